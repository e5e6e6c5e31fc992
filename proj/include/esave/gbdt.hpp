#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace esave {

// Row-major numeric matrix for training.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data.data() + r * cols, cols);
    }
};

// Flat tree node; left/right index into the owning tree's node array,
// -1 means "no child" (leaf). Routing: go left iff value <= threshold.
struct TreeNode {
    int feature_index = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double leaf_value = 0.0;

    bool is_leaf() const { return left < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    int depth = 0;

    double predict(std::span<const double> features) const;
};

struct TrainingParams {
    int n_trees = 300;
    int max_depth = 4;
    double learning_rate = 0.05;
    int min_samples_leaf = 3;
    double lambda = 1.0;  // L2 leaf regularizer
    std::uint64_t seed = 42;

    void validate() const;  // throws UsageError on out-of-range values
};

// Additive model: prediction = base_score + learning_rate * sum of tree outputs.
struct GradientBoostedEnsemble {
    double base_score = 0.0;
    double learning_rate = 0.05;
    std::vector<RegressionTree> trees;

    double predict(std::span<const double> features) const;
};

struct LinearModel {
    double intercept = 0.0;
    std::vector<double> coefficients;

    double predict(std::span<const double> features) const;
};

namespace detail {

// Per-feature row indices sorted by ascending feature value (ties by row).
// Built once per training matrix and reused across boosting rounds.
struct SortedFeatures {
    std::vector<std::vector<std::uint32_t>> order;
};

SortedFeatures presort_features(const Matrix& features);

RegressionTree fit_tree_presorted(const Matrix& features, const SortedFeatures& sorted,
                                  std::span<const double> gradients,
                                  std::span<const double> hessians,
                                  const TrainingParams& params);

GradientBoostedEnsemble fit_ensemble_presorted(const Matrix& features,
                                               const SortedFeatures& sorted,
                                               std::span<const double> targets,
                                               const TrainingParams& params);

}  // namespace detail

// Single second-order tree on (gradient, hessian) pairs. Leaf value is
// -G/(H+lambda); a node splits only when the best candidate gain is
// strictly positive and both children keep >= min_samples_leaf rows.
RegressionTree fit_tree(const Matrix& features, std::span<const double> gradients,
                        std::span<const double> hessians, const TrainingParams& params);

// Squared-error boosting: per-row gradient = prediction - target, hessian = 1.
GradientBoostedEnsemble fit_ensemble(const Matrix& features, std::span<const double> targets,
                                     const TrainingParams& params);

// Ordinary least squares via normal equations with a tiny ridge (1e-8)
// for conditioning. Requires n > d.
LinearModel fit_ols(const Matrix& features, std::span<const double> targets);

}  // namespace esave
