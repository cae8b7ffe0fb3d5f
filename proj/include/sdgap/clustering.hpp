#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "sdgap/core_data.hpp"
#include "sdgap/gap_engine.hpp"
#include "sdgap/matrix.hpp"

namespace sdgap {

/// Result of Lloyd's algorithm on block profiles.
struct Clustering {
    std::size_t k = 0;
    std::vector<int> assignment; // one label in [0,k) per block
    Matrix centroids;            // k x dim
    double inertia = 0.0;        // sum of squared distances to assigned centroids
    // Inertia recorded after every assignment pass, including the initial one.
    std::vector<double> inertia_trace;
    int iterations = 0; // update+reassign rounds actually performed

    bool operator==(const Clustering&) const = default;
};

/// Per-block 288-dim demand-gap profile: 144 slot means over workdays followed
/// by 144 slot means over holidays, averaged across all days of the tensor.
/// Throws DataError if the calendar has no workday or no holiday (use the
/// single-regime variant in that case).
Matrix block_profiles(const GapTensor& gap, const Calendar& cal);

/// Same, restricted to days in [d0, d1): profiles computed from a training
/// prefix must not look at test days.
Matrix block_profiles(const GapTensor& gap, const Calendar& cal, int d0, int d1);

/// 144-dim profile ignoring day types: slot means over every day in [d0, d1).
Matrix block_profiles_single(const GapTensor& gap, int d0, int d1);

/// In-place column standardization to zero mean and unit (population)
/// variance; constant columns are only centered.
void standardize_columns(Matrix& m);

/// K-means++ seeding: first center uniform, each next drawn with probability
/// proportional to the squared distance to the nearest already-chosen center.
Matrix kmeans_pp_init(const Matrix& profiles, std::size_t k, std::uint64_t seed);

/// Lloyd iterations from the given initial centroids. Stops when the
/// assignment is stable, every centroid moved less than tol, or max_iter
/// rounds have run. Empty clusters are reseeded with the point farthest from
/// its assigned centroid (ties toward the lowest row index).
Clustering kmeans(const Matrix& profiles, const Matrix& init, int max_iter = 300,
                  double tol = 1e-9);

void write_clustering_csv(std::ostream& out, const Clustering& c);
void write_centroids_csv(std::ostream& out, const Matrix& centroids);

} // namespace sdgap
