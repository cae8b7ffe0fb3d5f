#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "sdgap/clustering.hpp"
#include "sdgap/core_data.hpp"
#include "sdgap/gbdt.hpp"
#include "sdgap/matrix.hpp"

namespace sdgap {

/// Principal components of a cluster-level POI matrix.
struct PcaResult {
    std::vector<double> eigenvalues;  // retained, descending
    Matrix components;                // one unit row per retained eigenvalue
    std::vector<double> column_means; // centering offsets, length P
    std::vector<double> spectrum;     // every sample-covariance eigenvalue,
                                      // descending, retained or not

    bool operator==(const PcaResult&) const = default;
};

struct PoiRanking {
    struct Entry {
        int category = 0;
        double score = 0.0;
        bool operator==(const Entry&) const = default;
    };
    std::vector<Entry> entries; // descending score, ties by ascending index
    bool count_fallback = false; // true when PCA retained nothing and the
                                 // ranking degraded to total-count order

    bool operator==(const PoiRanking&) const = default;
};

struct SimilarityRow {
    int a = 0;
    int b = 0;            // a == b means within-cluster
    bool applicable = true; // false when the group has no pairs
    std::vector<double> share; // fraction of pair distances <= threshold

    bool operator==(const SimilarityRow&) const = default;
};

struct SimilarityTable {
    std::vector<double> thresholds;
    std::vector<SimilarityRow> rows;

    bool operator==(const SimilarityTable&) const = default;
};

/// k x P matrix of mean POI counts per cluster; empty clusters yield a zero
/// row and a note in `warnings` when given.
Matrix cluster_poi_means(const Clustering& clu, const PoiTable& poi,
                         std::vector<std::string>* warnings = nullptr);

/// PCA of the k x P matrix through the k x k Gram route: eigenvalues are
/// lambda = s^2/(k-1), components X^T u / s, largest-magnitude entry made
/// positive, everything below 1e-12 of the top eigenvalue dropped, and at
/// most min(k-1, P) pairs retained.
PcaResult pca(const Matrix& means);

/// Category scores sum eigenvalue-weighted absolute loadings over the
/// retained components (first component only when first_pc_only). With no
/// retained components the ranking falls back to total counts, flagged.
PoiRanking rank_pois(const PcaResult& p, const PoiTable& poi,
                     bool first_pc_only = false);

std::vector<int> select_top(const PoiRanking& r, int n);

/// Importance ranking of the POI categories by accumulated split gain; every
/// category must appear in the model as feature "poi_<label>".
PoiRanking gain_rank(const GbdtModel& model, const PoiTable& poi);

/// n distinct category indices, uniform without replacement.
std::vector<int> random_select(int P, int n, std::uint64_t seed);

/// Share of pairwise block distances below each threshold, within every
/// cluster and across every cluster pair; distances use L2-normalized POI
/// vectors unless normalize is off.
SimilarityTable similarity_report(const Clustering& clu, const PoiTable& poi,
                                  const std::vector<double>& thresholds,
                                  bool normalize = true);

/// Pooled mean pair distance (within-cluster, between-cluster).
std::pair<double, double> mean_within_between(const Clustering& clu,
                                              const PoiTable& poi,
                                              bool normalize = true);

void write_ranking_csv(std::ostream& out, const PoiRanking& r,
                       const PoiTable& poi, const std::string& method);
void write_similarity_csv(std::ostream& out, const SimilarityTable& table);

} // namespace sdgap
