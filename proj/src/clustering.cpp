#include "sdgap/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdgap/rng.hpp"

namespace sdgap {
namespace {

void require_finite(const Matrix& m, const char* what) {
    for (double v : m.data)
        if (!std::isfinite(v))
            throw DataError(std::string(what) + " contains a non-finite value");
}

void check_day_range(const GapTensor& gap, int d0, int d1) {
    if (d0 < 0 || d1 <= d0 || static_cast<std::size_t>(d1) > gap.days)
        throw ConfigError("bad day range [" + std::to_string(d0) + "," +
                          std::to_string(d1) + ")");
}

// Mean over the listed days of each (block, slot) cell, written into the
// profile matrix starting at column `col0`.
void fill_slot_means(Matrix& out, const GapTensor& gap,
                     const std::vector<int>& days, std::size_t col0) {
    const double inv = 1.0 / static_cast<double>(days.size());
    for (std::size_t b = 0; b < gap.blocks; ++b)
        for (int s = 0; s < kSlotsPerDay; ++s) {
            double sum = 0.0;
            for (int d : days) sum += gap.at(b, d, s);
            out.at(b, col0 + s) = sum * inv;
        }
}

} // namespace

Matrix block_profiles(const GapTensor& gap, const Calendar& cal) {
    return block_profiles(gap, cal, 0, static_cast<int>(gap.days));
}

Matrix block_profiles(const GapTensor& gap, const Calendar& cal, int d0, int d1) {
    check_day_range(gap, d0, d1);
    if (cal.days() < d1) throw DataError("calendar shorter than the day range");
    std::vector<int> workdays, holidays;
    for (int d = d0; d < d1; ++d)
        (cal.is_holiday(d) ? holidays : workdays).push_back(d);
    if (workdays.empty() || holidays.empty())
        throw DataError(std::string("no ") +
                        (workdays.empty() ? "workdays" : "holidays") +
                        " in days [" + std::to_string(d0) + "," +
                        std::to_string(d1) +
                        "); supply a calendar covering both day types or build "
                        "single-regime (144-dim) profiles instead");
    Matrix profiles(gap.blocks, 2 * kSlotsPerDay);
    fill_slot_means(profiles, gap, workdays, 0);
    fill_slot_means(profiles, gap, holidays, kSlotsPerDay);
    return profiles;
}

Matrix block_profiles_single(const GapTensor& gap, int d0, int d1) {
    check_day_range(gap, d0, d1);
    std::vector<int> days(d1 - d0);
    std::iota(days.begin(), days.end(), d0);
    Matrix profiles(gap.blocks, kSlotsPerDay);
    fill_slot_means(profiles, gap, days, 0);
    return profiles;
}

void standardize_columns(Matrix& m) {
    if (m.rows == 0) return;
    const double inv_n = 1.0 / static_cast<double>(m.rows);
    for (std::size_t c = 0; c < m.cols; ++c) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) mean += m.at(r, c);
        mean *= inv_n;
        double var = 0.0;
        for (std::size_t r = 0; r < m.rows; ++r) {
            const double d = m.at(r, c) - mean;
            var += d * d;
        }
        var *= inv_n;
        const double scale = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
        for (std::size_t r = 0; r < m.rows; ++r)
            m.at(r, c) = (m.at(r, c) - mean) * scale;
    }
}

Matrix kmeans_pp_init(const Matrix& profiles, std::size_t k, std::uint64_t seed) {
    const std::size_t n = profiles.rows;
    if (k == 0 || k > n)
        throw ConfigError("k = " + std::to_string(k) + " outside [1," +
                          std::to_string(n) + "]");
    require_finite(profiles, "profiles");

    Rng rng(seed);
    Matrix centers(k, profiles.cols);
    auto take = [&](std::size_t c, std::size_t p) {
        std::copy_n(profiles.row(p).data(), profiles.cols, centers.row(c).data());
    };
    take(0, rng.below(n));

    // d2[p] = squared distance of point p to its nearest chosen center.
    std::vector<double> d2(n);
    for (std::size_t p = 0; p < n; ++p)
        d2[p] = sq_dist(profiles.row(p), centers.row(0));

    for (std::size_t c = 1; c < k; ++c) {
        const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
        std::size_t pick;
        if (total > 0.0) {
            const double r = rng.uniform01() * total;
            double cum = 0.0;
            pick = n - 1; // rounding fallback
            for (std::size_t p = 0; p < n; ++p) {
                cum += d2[p];
                if (cum > r) {
                    pick = p;
                    break;
                }
            }
        } else {
            // Every point duplicates a chosen center; any pick repeats one.
            pick = rng.below(n);
        }
        take(c, pick);
        for (std::size_t p = 0; p < n; ++p)
            d2[p] = std::min(d2[p], sq_dist(profiles.row(p), centers.row(c)));
    }
    return centers;
}

Clustering kmeans(const Matrix& profiles, const Matrix& init, int max_iter,
                  double tol) {
    const std::size_t n = profiles.rows;
    const std::size_t k = init.rows;
    if (k == 0 || k > n)
        throw ConfigError("k = " + std::to_string(k) + " outside [1," +
                          std::to_string(n) + "]");
    if (init.cols != profiles.cols)
        throw ConfigError("centroid width " + std::to_string(init.cols) +
                          " does not match profile width " +
                          std::to_string(profiles.cols));
    if (max_iter < 0) throw ConfigError("max_iter must be non-negative");
    require_finite(profiles, "profiles");
    require_finite(init, "initial centroids");

    Clustering out;
    out.k = k;
    out.centroids = init;
    out.assignment.assign(n, 0);
    std::vector<double> dist(n); // squared distance to the assigned centroid

    auto assign = [&]() {
        double inertia = 0.0;
        for (std::size_t p = 0; p < n; ++p) {
            int best = 0;
            double bestd = sq_dist(profiles.row(p), out.centroids.row(0));
            for (std::size_t c = 1; c < k; ++c) {
                const double d = sq_dist(profiles.row(p), out.centroids.row(c));
                if (d < bestd) { // ties keep the lowest label
                    best = static_cast<int>(c);
                    bestd = d;
                }
            }
            out.assignment[p] = best;
            dist[p] = bestd;
            inertia += bestd;
        }
        out.inertia_trace.push_back(inertia);
    };

    assign();
    std::vector<int> prev(n);
    std::vector<std::size_t> counts(k);
    while (out.iterations < max_iter) {
        ++out.iterations;
        Matrix next(k, profiles.cols);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t p = 0; p < n; ++p) {
            const auto c = static_cast<std::size_t>(out.assignment[p]);
            ++counts[c];
            const auto row = profiles.row(p);
            auto acc = next.row(c);
            for (std::size_t j = 0; j < row.size(); ++j) acc[j] += row[j];
        }
        std::vector<double> reseed_d(dist); // consumed as points get reused
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                const double inv = 1.0 / static_cast<double>(counts[c]);
                for (double& v : next.row(c)) v *= inv;
            } else {
                // Reseed with the point currently farthest from its centroid.
                const auto far = std::max_element(reseed_d.begin(), reseed_d.end());
                const auto p = static_cast<std::size_t>(far - reseed_d.begin());
                std::copy_n(profiles.row(p).data(), profiles.cols,
                            next.row(c).data());
                *far = -1.0;
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < k; ++c)
            shift = std::max(shift, sq_dist(out.centroids.row(c), next.row(c)));
        out.centroids = std::move(next);
        prev = out.assignment;
        assign();
        if (out.assignment == prev || std::sqrt(shift) < tol) break;
    }
    out.inertia = out.inertia_trace.back();
    return out;
}

void write_clustering_csv(std::ostream& out, const Clustering& c) {
    out << "block_index,cluster_label\n";
    for (std::size_t b = 0; b < c.assignment.size(); ++b)
        out << b << ',' << c.assignment[b] << '\n';
}

void write_centroids_csv(std::ostream& out, const Matrix& centroids) {
    for (std::size_t r = 0; r < centroids.rows; ++r) {
        const auto row = centroids.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out << ',';
            out << num_str(row[j]);
        }
        out << '\n';
    }
}

} // namespace sdgap
