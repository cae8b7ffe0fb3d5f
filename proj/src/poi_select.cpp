#include "sdgap/poi_select.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdgap/error.hpp"
#include "sdgap/gap_engine.hpp"
#include "sdgap/rng.hpp"

namespace sdgap {
namespace {

// Cyclic Jacobi diagonalization of a symmetric matrix. Returns the
// eigenvalues in descending order; the matching eigenvectors come back as
// the columns of V, reordered the same way.
void jacobi_eigen(Matrix a, std::vector<double>& eig, Matrix& vecs) {
    const std::size_t n = a.rows;
    Matrix v(n, n);
    for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

    double frob = 0.0;
    for (double x : a.data) frob += x * x;
    frob = std::sqrt(frob);
    const double stop = 1e-15 * std::max(1.0, frob);

    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q)
                off += a.at(p, q) * a.at(p, q);
        if (std::sqrt(2.0 * off) <= stop) break;

        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p);
                const double aqq = a.at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t =
                    (tau >= 0.0 ? 1.0 : -1.0) /
                    (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;

                for (std::size_t r = 0; r < n; ++r) {
                    if (r == p || r == q) continue;
                    const double arp = a.at(r, p);
                    const double arq = a.at(r, q);
                    a.at(r, p) = a.at(p, r) = c * arp - s * arq;
                    a.at(r, q) = a.at(q, r) = s * arp + c * arq;
                }
                a.at(p, p) = app - t * apq;
                a.at(q, q) = aqq + t * apq;
                a.at(p, q) = a.at(q, p) = 0.0;

                for (std::size_t r = 0; r < n; ++r) {
                    const double vrp = v.at(r, p);
                    const double vrq = v.at(r, q);
                    v.at(r, p) = c * vrp - s * vrq;
                    v.at(r, q) = s * vrp + c * vrq;
                }
            }
        }
    }

    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
        return a.at(x, x) > a.at(y, y);
    });
    eig.resize(n);
    vecs = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        eig[i] = a.at(idx[i], idx[i]);
        for (std::size_t r = 0; r < n; ++r) vecs.at(r, i) = v.at(r, idx[i]);
    }
}

} // namespace

Matrix cluster_poi_means(const Clustering& clu, const PoiTable& poi,
                         std::vector<std::string>* warnings) {
    if (clu.assignment.size() != poi.blocks)
        throw DataError("clustering covers " +
                        std::to_string(clu.assignment.size()) +
                        " blocks, poi table has " + std::to_string(poi.blocks));
    const std::size_t k = clu.k;
    const std::size_t P = poi.P();
    Matrix means(k, P);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t b = 0; b < poi.blocks; ++b) {
        const auto c = static_cast<std::size_t>(clu.assignment[b]);
        ++counts[c];
        for (std::size_t p = 0; p < P; ++p)
            means.at(c, p) += static_cast<double>(poi.at(b, p));
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) {
            if (warnings)
                warnings->push_back("cluster " + std::to_string(c) +
                                    " is empty; its POI mean row is zero");
            continue;
        }
        const double inv = 1.0 / static_cast<double>(counts[c]);
        for (double& x : means.row(c)) x *= inv;
    }
    return means;
}

PcaResult pca(const Matrix& means) {
    const std::size_t k = means.rows;
    const std::size_t P = means.cols;
    if (k < 2) throw ConfigError("PCA needs at least 2 cluster rows");
    for (double x : means.data)
        if (!std::isfinite(x)) throw DataError("non-finite POI mean");

    PcaResult out;
    out.column_means.assign(P, 0.0);
    Matrix x(k, P);
    for (std::size_t j = 0; j < P; ++j) {
        double m = 0.0;
        for (std::size_t r = 0; r < k; ++r) m += means.at(r, j);
        m /= static_cast<double>(k);
        out.column_means[j] = m;
        for (std::size_t r = 0; r < k; ++r) x.at(r, j) = means.at(r, j) - m;
    }

    Matrix gram(k, k);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a; b < k; ++b) {
            double dot = 0.0;
            for (std::size_t j = 0; j < P; ++j) dot += x.at(a, j) * x.at(b, j);
            gram.at(a, b) = gram.at(b, a) = dot;
        }

    std::vector<double> mu;
    Matrix u;
    jacobi_eigen(std::move(gram), mu, u);

    const double divisor = static_cast<double>(k - 1);
    out.spectrum.resize(k);
    for (std::size_t i = 0; i < k; ++i) out.spectrum[i] = mu[i] / divisor;

    // Retention: relative cutoff against the leading eigenvalue, with an
    // absolute floor of 1e-12 so an all-identical input retains nothing; the
    // centered rank bounds the count at min(k-1, P).
    const double top = out.spectrum.empty() ? 0.0 : out.spectrum[0];
    const double cutoff = 1e-12 * std::max(1.0, top);
    std::size_t keep = 0;
    const std::size_t cap = std::min(k - 1, P);
    while (keep < cap && out.spectrum[keep] > cutoff) ++keep;

    out.eigenvalues.assign(out.spectrum.begin(), out.spectrum.begin() + keep);
    out.components = Matrix(keep, P);
    for (std::size_t i = 0; i < keep; ++i) {
        const double scale = 1.0 / std::sqrt(mu[i]);
        auto comp = out.components.row(i);
        for (std::size_t j = 0; j < P; ++j) {
            double dot = 0.0;
            for (std::size_t r = 0; r < k; ++r) dot += x.at(r, j) * u.at(r, i);
            comp[j] = dot * scale;
        }
        std::size_t arg = 0;
        for (std::size_t j = 1; j < P; ++j)
            if (std::abs(comp[j]) > std::abs(comp[arg])) arg = j;
        if (comp[arg] < 0.0)
            for (double& c : comp) c = -c;
    }
    return out;
}

PoiRanking rank_pois(const PcaResult& p, const PoiTable& poi,
                     bool first_pc_only) {
    const std::size_t P = poi.P();
    PoiRanking out;
    out.entries.resize(P);
    if (p.eigenvalues.empty()) {
        out.count_fallback = true;
        const auto totals = poi.column_totals();
        for (std::size_t j = 0; j < P; ++j)
            out.entries[j] = {static_cast<int>(j),
                              static_cast<double>(totals[j])};
    } else {
        if (p.components.cols != P)
            throw DataError("components cover " +
                            std::to_string(p.components.cols) +
                            " categories, poi table has " + std::to_string(P));
        const std::size_t use = first_pc_only ? 1 : p.eigenvalues.size();
        for (std::size_t j = 0; j < P; ++j) {
            double score = 0.0;
            for (std::size_t m = 0; m < use; ++m)
                score += p.eigenvalues[m] * std::abs(p.components.at(m, j));
            out.entries[j] = {static_cast<int>(j), score};
        }
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const PoiRanking::Entry& a, const PoiRanking::Entry& b) {
                  return a.score > b.score ||
                         (a.score == b.score && a.category < b.category);
              });
    return out;
}

std::vector<int> select_top(const PoiRanking& r, int n) {
    if (n < 0 || static_cast<std::size_t>(n) > r.entries.size())
        throw ConfigError("cannot take " + std::to_string(n) + " of " +
                          std::to_string(r.entries.size()) + " categories");
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[i] = r.entries[i].category;
    return out;
}

PoiRanking gain_rank(const GbdtModel& model, const PoiTable& poi) {
    PoiRanking out;
    out.entries.resize(poi.P());
    for (std::size_t j = 0; j < poi.P(); ++j) {
        const std::string name = "poi_" + poi.categories[j];
        const auto it = std::find(model.feature_names.begin(),
                                  model.feature_names.end(), name);
        if (it == model.feature_names.end())
            throw DataError("model has no feature " + name);
        const auto idx =
            static_cast<std::size_t>(it - model.feature_names.begin());
        const double gain =
            idx < model.feature_gain.size() ? model.feature_gain[idx] : 0.0;
        out.entries[j] = {static_cast<int>(j), gain};
    }
    std::sort(out.entries.begin(), out.entries.end(),
              [](const PoiRanking::Entry& a, const PoiRanking::Entry& b) {
                  return a.score > b.score ||
                         (a.score == b.score && a.category < b.category);
              });
    return out;
}

std::vector<int> random_select(int P, int n, std::uint64_t seed) {
    if (P < 0) throw ConfigError("category count must be >= 0");
    if (n < 0 || n > P)
        throw ConfigError("cannot draw " + std::to_string(n) + " of " +
                          std::to_string(P) + " categories");
    std::vector<int> pool(static_cast<std::size_t>(P));
    std::iota(pool.begin(), pool.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const auto j =
            i + static_cast<int>(rng.below(static_cast<std::uint64_t>(P - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(static_cast<std::size_t>(n));
    return pool;
}

namespace {

Matrix block_vectors(const PoiTable& poi, bool normalize) {
    Matrix v(poi.blocks, poi.P());
    for (std::size_t b = 0; b < poi.blocks; ++b) {
        double norm = 0.0;
        for (std::size_t p = 0; p < poi.P(); ++p) {
            const auto x = static_cast<double>(poi.at(b, p));
            v.at(b, p) = x;
            norm += x * x;
        }
        if (normalize && norm > 0.0) {
            const double inv = 1.0 / std::sqrt(norm);
            for (double& x : v.row(b)) x *= inv;
        }
    }
    return v;
}

std::vector<std::vector<int>> cluster_members(const Clustering& clu,
                                              std::size_t blocks) {
    if (clu.assignment.size() != blocks)
        throw DataError("clustering covers " +
                        std::to_string(clu.assignment.size()) +
                        " blocks, poi table has " + std::to_string(blocks));
    std::vector<std::vector<int>> groups(clu.k);
    for (std::size_t b = 0; b < blocks; ++b)
        groups[static_cast<std::size_t>(clu.assignment[b])].push_back(
            static_cast<int>(b));
    return groups;
}

} // namespace

SimilarityTable similarity_report(const Clustering& clu, const PoiTable& poi,
                                  const std::vector<double>& thresholds,
                                  bool normalize) {
    if (thresholds.empty()) throw ConfigError("need at least one threshold");
    for (std::size_t i = 1; i < thresholds.size(); ++i)
        if (thresholds[i] <= thresholds[i - 1])
            throw ConfigError("thresholds must be strictly increasing");

    const auto vecs = block_vectors(poi, normalize);
    const auto groups = cluster_members(clu, poi.blocks);
    SimilarityTable table;
    table.thresholds = thresholds;

    auto add_row = [&](int a, int b, const std::vector<double>& dists) {
        SimilarityRow row;
        row.a = a;
        row.b = b;
        row.share.assign(thresholds.size(), 0.0);
        if (dists.empty()) {
            row.applicable = false;
        } else {
            for (std::size_t t = 0; t < thresholds.size(); ++t) {
                std::size_t hits = 0;
                for (double d : dists)
                    if (d <= thresholds[t]) ++hits;
                row.share[t] = static_cast<double>(hits) /
                               static_cast<double>(dists.size());
            }
        }
        table.rows.push_back(std::move(row));
    };

    for (std::size_t c = 0; c < clu.k; ++c) {
        std::vector<double> dists;
        const auto& g = groups[c];
        for (std::size_t i = 0; i + 1 < g.size(); ++i)
            for (std::size_t j = i + 1; j < g.size(); ++j)
                dists.push_back(
                    std::sqrt(sq_dist(vecs.row(g[i]), vecs.row(g[j]))));
        add_row(static_cast<int>(c), static_cast<int>(c), dists);
    }
    for (std::size_t a = 0; a + 1 < clu.k; ++a)
        for (std::size_t b = a + 1; b < clu.k; ++b) {
            std::vector<double> dists;
            for (int i : groups[a])
                for (int j : groups[b])
                    dists.push_back(sqrt(sq_dist(vecs.row(i), vecs.row(j))));
            add_row(static_cast<int>(a), static_cast<int>(b), dists);
        }
    return table;
}

std::pair<double, double> mean_within_between(const Clustering& clu,
                                              const PoiTable& poi,
                                              bool normalize) {
    const auto vecs = block_vectors(poi, normalize);
    const auto groups = cluster_members(clu, poi.blocks);
    double within = 0.0, between = 0.0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t a = 0; a < groups.size(); ++a) {
        for (std::size_t i = 0; i + 1 < groups[a].size(); ++i)
            for (std::size_t j = i + 1; j < groups[a].size(); ++j) {
                within +=
                    std::sqrt(sq_dist(vecs.row(groups[a][i]), vecs.row(groups[a][j])));
                ++nw;
            }
        for (std::size_t b = a + 1; b < groups.size(); ++b)
            for (int i : groups[a])
                for (int j : groups[b]) {
                    between += std::sqrt(sq_dist(vecs.row(i), vecs.row(j)));
                    ++nb;
                }
    }
    if (nw == 0 || nb == 0)
        throw DataError("need at least one within-cluster and one "
                        "between-cluster block pair");
    return {within / static_cast<double>(nw), between / static_cast<double>(nb)};
}

void write_ranking_csv(std::ostream& out, const PoiRanking& r,
                       const PoiTable& poi, const std::string& method) {
    const std::string tag =
        r.count_fallback ? method + "_count_fallback" : method;
    out << "rank,category_label,score,method\n";
    for (std::size_t i = 0; i < r.entries.size(); ++i)
        out << i + 1 << ','
            << poi.categories[static_cast<std::size_t>(r.entries[i].category)]
            << ',' << num_str(r.entries[i].score) << ',' << tag << '\n';
}

void write_similarity_csv(std::ostream& out, const SimilarityTable& table) {
    out << "pair";
    for (double t : table.thresholds) out << ',' << num_str(t);
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.a == row.b)
            out << "within_" << row.a;
        else
            out << "between_" << row.a << '_' << row.b;
        for (std::size_t t = 0; t < table.thresholds.size(); ++t) {
            out << ',';
            if (row.applicable)
                out << num_str(row.share[t]);
            else
                out << "na";
        }
        out << '\n';
    }
}

} // namespace sdgap
