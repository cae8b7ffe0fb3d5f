#include "sdgap/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "sdgap/error.hpp"
#include "sdgap/rng.hpp"

namespace sdgap {
namespace {

void check_params(const BoostParams& p) {
    if (p.rounds < 1) throw ConfigError("rounds must be >= 1");
    if (!(p.learning_rate > 0.0) || p.learning_rate > 1.0)
        throw ConfigError("learning_rate must be in (0,1]");
    if (p.max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (p.lambda < 0.0) throw ConfigError("lambda must be >= 0");
    if (p.gamma < 0.0) throw ConfigError("gamma must be >= 0");
    if (p.min_child_weight < 0.0)
        throw ConfigError("min_child_weight must be >= 0");
    if (!(p.subsample > 0.0) || p.subsample > 1.0)
        throw ConfigError("subsample must be in (0,1]");
}

void check_data(const Dataset& data) {
    if (data.n == 0) throw DataError("cannot train on an empty dataset");
    if (data.f == 0) throw DataError("cannot train without features");
    for (double v : data.rows)
        if (!std::isfinite(v)) throw DataError("non-finite feature value");
    for (double y : data.targets)
        if (!std::isfinite(y)) throw DataError("non-finite target value");
}

// Mutable node record used while a tree grows level by level.
struct GrowNode {
    double G = 0.0;    // gradient sum over the node's rows (ascending row order)
    double H = 0.0;    // hessian sum = row count (squared-error loss)
    int feature = -1;  // split decision, -1 until (unless) one is accepted
    double threshold = 0.0;
    double gain = 0.0;
    int left = -1;
    int right = -1;
};

// Renumber into preorder so the serialized node list reads naturally.
void emit_preorder(const std::vector<GrowNode>& grown, int id, double lambda,
                   std::vector<TreeNode>& out) {
    const GrowNode& n = grown[id];
    const auto self = static_cast<int>(out.size());
    out.emplace_back();
    if (n.feature < 0) {
        out[self].weight = -n.G / (n.H + lambda);
        return;
    }
    out[self].feature = n.feature;
    out[self].threshold = n.threshold;
    out[self].gain = n.gain;
    out[self].left = self + 1;
    emit_preorder(grown, n.left, lambda, out);
    out[self].right = static_cast<int>(out.size());
    emit_preorder(grown, n.right, lambda, out);
}

} // namespace

double RegressionTree::value(std::span<const double> row) const {
    int id = 0;
    while (!nodes[id].is_leaf())
        id = row[nodes[id].feature] < nodes[id].threshold ? nodes[id].left
                                                          : nodes[id].right;
    return nodes[id].weight;
}

double GbdtModel::predict(std::span<const double> row) const {
    if (!feature_gain.empty() && row.size() != feature_gain.size())
        throw DataError("row has " + std::to_string(row.size()) +
                        " features, model expects " +
                        std::to_string(feature_gain.size()));
    double sum = 0.0;
    for (const auto& t : trees) sum += t.value(row);
    return base_score + params.learning_rate * sum;
}

std::vector<double> GbdtModel::predict_many(const Dataset& data) const {
    std::vector<double> out(data.n);
    for (std::size_t i = 0; i < data.n; ++i) out[i] = predict(data.row(i));
    return out;
}

GbdtModel train(const Dataset& data, const BoostParams& p) {
    check_params(p);
    check_data(data);
    const std::size_t n = data.n;
    const std::size_t f = data.f;
    const double* X = data.rows.data();

    GbdtModel model;
    model.params = p;
    model.feature_names = data.feature_names;
    model.feature_gain.assign(f, 0.0);
    model.base_score =
        std::accumulate(data.targets.begin(), data.targets.end(), 0.0) /
        static_cast<double>(n);

    // Column orders, sorted once: by value, row index breaking ties.
    std::vector<std::vector<std::uint32_t>> order(f);
    for (std::size_t j = 0; j < f; ++j) {
        auto& o = order[j];
        o.resize(n);
        std::iota(o.begin(), o.end(), 0u);
        std::sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = X[a * f + j], vb = X[b * f + j];
            return va < vb || (va == vb && a < b);
        });
    }

    std::vector<double> pred(n, model.base_score);
    std::vector<double> g(n);
    std::vector<int> row_node(n); // current node id, -1 = out of this tree
    Rng rng(p.seed);

    auto mse = [&]() {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = pred[i] - data.targets[i];
            s += r * r;
        }
        return s / static_cast<double>(n);
    };
    model.loss_curve.push_back(mse());

    for (int round = 0; round < p.rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) g[i] = pred[i] - data.targets[i];

        if (p.subsample < 1.0) {
            bool any = false;
            for (std::size_t i = 0; i < n; ++i) {
                const bool take = rng.uniform01() < p.subsample;
                row_node[i] = take ? 0 : -1;
                any = any || take;
            }
            if (!any) std::fill(row_node.begin(), row_node.end(), 0);
        } else {
            std::fill(row_node.begin(), row_node.end(), 0);
        }

        std::vector<GrowNode> grown(1);
        for (std::size_t i = 0; i < n; ++i)
            if (row_node[i] == 0) {
                grown[0].G += g[i];
                grown[0].H += 1.0;
            }

        int level_begin = 0;
        int level_end = 1;
        for (int depth = 0; depth < p.max_depth && level_begin < level_end;
             ++depth) {
            const auto width = static_cast<std::size_t>(level_end - level_begin);
            std::vector<double> best_gain(width, 0.0);
            std::vector<int> best_feat(width, -1);
            std::vector<double> best_thr(width, 0.0);
            std::vector<double> gl(width), prev(width);
            std::vector<double> cnt(width);

            for (std::size_t j = 0; j < f; ++j) {
                std::fill(gl.begin(), gl.end(), 0.0);
                std::fill(cnt.begin(), cnt.end(), 0.0);
                for (const std::uint32_t r : order[j]) {
                    const int nd = row_node[r];
                    if (nd < level_begin) continue; // inactive or settled
                    const auto s = static_cast<std::size_t>(nd - level_begin);
                    const double v = X[r * f + j];
                    if (cnt[s] > 0.0 && v > prev[s]) {
                        const double hl = cnt[s];
                        const double hr = grown[nd].H - hl;
                        if (hl >= p.min_child_weight &&
                            hr >= p.min_child_weight) {
                            const double gr = grown[nd].G - gl[s];
                            const double gain =
                                0.5 * (gl[s] * gl[s] / (hl + p.lambda) +
                                       gr * gr / (hr + p.lambda) -
                                       grown[nd].G * grown[nd].G /
                                           (grown[nd].H + p.lambda)) -
                                p.gamma;
                            if (gain > best_gain[s]) {
                                double t = (prev[s] + v) * 0.5;
                                if (t <= prev[s]) t = v; // adjacent doubles
                                best_gain[s] = gain;
                                best_feat[s] = static_cast<int>(j);
                                best_thr[s] = t;
                            }
                        }
                    }
                    gl[s] += g[r];
                    cnt[s] += 1.0;
                    prev[s] = v;
                }
            }

            for (std::size_t s = 0; s < width; ++s) {
                if (best_feat[s] < 0) continue;
                GrowNode& nd = grown[level_begin + static_cast<int>(s)];
                nd.feature = best_feat[s];
                nd.threshold = best_thr[s];
                nd.gain = best_gain[s];
                nd.left = static_cast<int>(grown.size());
                nd.right = nd.left + 1;
                grown.emplace_back();
                grown.emplace_back();
            }
            // Route rows down in ascending row order so every child's G is
            // the plain left-to-right sum (predictable to the last bit).
            for (std::size_t i = 0; i < n; ++i) {
                const int nd = row_node[i];
                if (nd < level_begin || grown[nd].feature < 0) continue;
                const int child = X[i * f + grown[nd].feature] <
                                          grown[nd].threshold
                                      ? grown[nd].left
                                      : grown[nd].right;
                row_node[i] = child;
                grown[child].G += g[i];
                grown[child].H += 1.0;
            }
            level_begin = level_end;
            level_end = static_cast<int>(grown.size());
        }

        RegressionTree tree;
        tree.nodes.reserve(grown.size());
        emit_preorder(grown, 0, p.lambda, tree.nodes);
        for (const auto& node : tree.nodes)
            if (!node.is_leaf()) model.feature_gain[node.feature] += node.gain;
        for (std::size_t i = 0; i < n; ++i)
            pred[i] += p.learning_rate * tree.value(data.row(i));
        model.trees.push_back(std::move(tree));
        model.loss_curve.push_back(mse());
    }
    return model;
}

std::string model_json(const GbdtModel& model) {
    nlohmann::json j;
    j["format"] = "sdgap-gbdt-1";
    j["params"] = {{"rounds", model.params.rounds},
                   {"learning_rate", model.params.learning_rate},
                   {"max_depth", model.params.max_depth},
                   {"lambda", model.params.lambda},
                   {"gamma", model.params.gamma},
                   {"min_child_weight", model.params.min_child_weight},
                   {"seed", model.params.seed},
                   {"subsample", model.params.subsample}};
    j["base_score"] = model.base_score;
    j["feature_names"] = model.feature_names;
    j["feature_gain"] = model.feature_gain;
    j["loss_curve"] = model.loss_curve;
    auto& trees = j["trees"] = nlohmann::json::array();
    for (const auto& tree : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            if (n.is_leaf()) {
                nodes.push_back({{"weight", n.weight}});
            } else {
                nodes.push_back({{"feature", n.feature},
                                 {"threshold", n.threshold},
                                 {"left", n.left},
                                 {"right", n.right},
                                 {"gain", n.gain}});
            }
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    return j.dump();
}

GbdtModel model_from_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        if (j.at("format").get<std::string>() != "sdgap-gbdt-1")
            throw DataError("unrecognized model format marker");
        GbdtModel m;
        const auto& p = j.at("params");
        m.params.rounds = p.at("rounds").get<int>();
        m.params.learning_rate = p.at("learning_rate").get<double>();
        m.params.max_depth = p.at("max_depth").get<int>();
        m.params.lambda = p.at("lambda").get<double>();
        m.params.gamma = p.at("gamma").get<double>();
        m.params.min_child_weight = p.at("min_child_weight").get<double>();
        m.params.seed = p.at("seed").get<std::uint64_t>();
        m.params.subsample = p.at("subsample").get<double>();
        m.base_score = j.at("base_score").get<double>();
        m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
        m.feature_gain = j.at("feature_gain").get<std::vector<double>>();
        m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
        for (const auto& jt : j.at("trees")) {
            RegressionTree tree;
            for (const auto& jn : jt.at("nodes")) {
                TreeNode n;
                if (jn.contains("feature")) {
                    n.feature = jn.at("feature").get<int>();
                    n.threshold = jn.at("threshold").get<double>();
                    n.left = jn.at("left").get<int>();
                    n.right = jn.at("right").get<int>();
                    n.gain = jn.at("gain").get<double>();
                } else {
                    n.weight = jn.at("weight").get<double>();
                }
                tree.nodes.push_back(n);
            }
            m.trees.push_back(std::move(tree));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

void save_model(std::ostream& out, const GbdtModel& model) {
    out << model_json(model) << '\n';
}

GbdtModel load_model(std::istream& in) {
    std::string text{std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>()};
    return model_from_json(text);
}

} // namespace sdgap
