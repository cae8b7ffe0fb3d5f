#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sdgap/gap_engine.hpp"

namespace sdgap {

struct BoostParams {
    int rounds = 100;
    double learning_rate = 0.1; // in (0,1]
    int max_depth = 6;
    double lambda = 1.0; // L2 penalty on leaf weights
    double gamma = 0.0;  // per-split penalty
    double min_child_weight = 1.0;
    std::uint64_t seed = 0;
    double subsample = 1.0; // per-tree row-sampling fraction, in (0,1]

    bool operator==(const BoostParams&) const = default;
};

/// One tree node; leaves have feature = -1 and carry only the weight.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double gain = 0.0;   // realized split gain (internal nodes)
    double weight = 0.0; // leaf output

    bool is_leaf() const { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes; // preorder, nodes[0] is the root

    /// Leaf weight reached by the row; equal values go right (x >= t).
    double value(std::span<const double> row) const;

    bool operator==(const RegressionTree&) const = default;
};

struct GbdtModel {
    BoostParams params;
    double base_score = 0.0; // mean of the training targets
    std::vector<RegressionTree> trees;
    std::vector<double> feature_gain; // per-feature accumulated split gain
    std::vector<std::string> feature_names;
    std::vector<double> loss_curve; // training MSE: before round 1, then per round

    double predict(std::span<const double> row) const;
    std::vector<double> predict_many(const Dataset& data) const;

    bool operator==(const GbdtModel&) const = default;
};

/// Second-order boosting on squared error: per round the gradient is
/// pred - y (hessian 1), one tree is grown by exact greedy split search over
/// midpoints between consecutive distinct feature values, and predictions
/// advance by learning_rate times the tree output.
GbdtModel train(const Dataset& data, const BoostParams& p);

/// Self-describing JSON with params, base_score and preorder node lists;
/// parsing the output reproduces the model bit for bit.
std::string model_json(const GbdtModel& model);
GbdtModel model_from_json(const std::string& text);

void save_model(std::ostream& out, const GbdtModel& model);
GbdtModel load_model(std::istream& in);

} // namespace sdgap
