#include "esave/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "esave/errors.hpp"

namespace esave {

namespace {

bool all_finite(std::span<const double> values) {
    return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double feature_at(std::span<const double> features, int index) {
    if (index < 0 || static_cast<std::size_t>(index) >= features.size()) {
        throw ModelError("feature vector width " + std::to_string(features.size()) +
                         " does not cover feature index " + std::to_string(index));
    }
    return features[static_cast<std::size_t>(index)];
}

}  // namespace

void TrainingParams::validate() const {
    if (n_trees < 0) throw UsageError("n_trees must be >= 0");
    if (max_depth < 1) throw UsageError("max_depth must be >= 1");
    if (!(learning_rate > 0.0) || learning_rate > 1.0) {
        throw UsageError("learning_rate must be in (0, 1]");
    }
    if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
    if (!(lambda >= 0.0)) throw UsageError("lambda must be >= 0");
}

double RegressionTree::predict(std::span<const double> features) const {
    const TreeNode* node = &nodes[0];
    while (!node->is_leaf()) {
        int next = feature_at(features, node->feature_index) <= node->threshold ? node->left
                                                                                : node->right;
        node = &nodes[static_cast<std::size_t>(next)];
    }
    return node->leaf_value;
}

double GradientBoostedEnsemble::predict(std::span<const double> features) const {
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.predict(features);
    return base_score + learning_rate * sum;
}

double LinearModel::predict(std::span<const double> features) const {
    if (features.size() != coefficients.size()) {
        throw ModelError("feature vector width " + std::to_string(features.size()) +
                         " does not match model width " + std::to_string(coefficients.size()));
    }
    double out = intercept;
    for (std::size_t i = 0; i < coefficients.size(); ++i) out += coefficients[i] * features[i];
    return out;
}

namespace detail {

SortedFeatures presort_features(const Matrix& features) {
    SortedFeatures sorted;
    sorted.order.resize(features.cols);
    for (std::size_t f = 0; f < features.cols; ++f) {
        auto& order = sorted.order[f];
        order.resize(features.rows);
        std::iota(order.begin(), order.end(), 0u);
        std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            return features.at(a, f) < features.at(b, f);
        });
    }
    return sorted;
}

namespace {

// Per-node split-search state for one level of the tree.
struct FrontierNode {
    int tree_node = 0;
    double sum_g = 0.0;
    double sum_h = 0.0;
    std::uint32_t count = 0;

    // running left-side accumulators for the feature being scanned
    double left_g = 0.0;
    double left_h = 0.0;
    std::uint32_t left_count = 0;
    double prev_value = 0.0;
    bool has_prev = false;

    // best candidate across all features scanned so far
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    double best_left_g = 0.0;
    double best_left_h = 0.0;
    std::uint32_t best_left_count = 0;
};

double leaf_score(double g, double h, double lambda) { return g * g / (h + lambda); }

}  // namespace

RegressionTree fit_tree_presorted(const Matrix& features, const SortedFeatures& sorted,
                                  std::span<const double> gradients,
                                  std::span<const double> hessians,
                                  const TrainingParams& params) {
    const std::size_t n = features.rows;
    if (n == 0) throw ModelError("cannot fit a tree on empty input");
    if (gradients.size() != n || hessians.size() != n) {
        throw ModelError("gradient/hessian length does not match row count");
    }
    params.validate();
    const double lambda = params.lambda;
    const auto min_leaf = static_cast<std::uint32_t>(params.min_samples_leaf);

    RegressionTree tree;
    tree.nodes.emplace_back();

    std::vector<FrontierNode> frontier(1);
    frontier[0].tree_node = 0;
    frontier[0].count = static_cast<std::uint32_t>(n);
    for (std::size_t i = 0; i < n; ++i) {
        frontier[0].sum_g += gradients[i];
        frontier[0].sum_h += hessians[i];
    }

    // slot_of_row[r]: index into frontier, -1 once the row's node is a leaf
    std::vector<std::int32_t> slot_of_row(n, 0);

    for (int level = 0; level < params.max_depth && !frontier.empty(); ++level) {
        // Scan features in ascending index, thresholds in ascending value;
        // strict gain improvement makes ties resolve to the lowest
        // feature_index, then the lowest threshold.
        for (std::size_t f = 0; f < features.cols; ++f) {
            for (auto& fn : frontier) {
                fn.left_g = 0.0;
                fn.left_h = 0.0;
                fn.left_count = 0;
                fn.has_prev = false;
            }
            for (std::uint32_t row : sorted.order[f]) {
                std::int32_t slot = slot_of_row[row];
                if (slot < 0) continue;
                auto& fn = frontier[static_cast<std::size_t>(slot)];
                double value = features.at(row, f);
                if (fn.has_prev && value > fn.prev_value && fn.left_count >= min_leaf &&
                    fn.count - fn.left_count >= min_leaf) {
                    double right_g = fn.sum_g - fn.left_g;
                    double right_h = fn.sum_h - fn.left_h;
                    double gain = 0.5 * (leaf_score(fn.left_g, fn.left_h, lambda) +
                                         leaf_score(right_g, right_h, lambda) -
                                         leaf_score(fn.sum_g, fn.sum_h, lambda));
                    if (gain > fn.best_gain) {
                        fn.best_gain = gain;
                        fn.best_feature = static_cast<int>(f);
                        fn.best_threshold = 0.5 * (fn.prev_value + value);
                        fn.best_left_g = fn.left_g;
                        fn.best_left_h = fn.left_h;
                        fn.best_left_count = fn.left_count;
                    }
                }
                fn.left_g += gradients[row];
                fn.left_h += hessians[row];
                fn.left_count += 1;
                fn.prev_value = value;
                fn.has_prev = true;
            }
        }

        std::vector<FrontierNode> next;
        std::vector<std::int32_t> child_slot(frontier.size(), -1);
        for (std::size_t s = 0; s < frontier.size(); ++s) {
            auto& fn = frontier[s];
            if (fn.best_feature < 0) {
                tree.nodes[static_cast<std::size_t>(fn.tree_node)].leaf_value =
                    -fn.sum_g / (fn.sum_h + lambda);
                continue;
            }
            int left_id = static_cast<int>(tree.nodes.size());
            tree.nodes.emplace_back();
            tree.nodes.emplace_back();
            auto& parent = tree.nodes[static_cast<std::size_t>(fn.tree_node)];
            parent.feature_index = fn.best_feature;
            parent.threshold = fn.best_threshold;
            parent.left = left_id;
            parent.right = left_id + 1;

            child_slot[s] = static_cast<std::int32_t>(next.size());
            FrontierNode left;
            left.tree_node = left_id;
            left.sum_g = fn.best_left_g;
            left.sum_h = fn.best_left_h;
            left.count = fn.best_left_count;
            FrontierNode right;
            right.tree_node = left_id + 1;
            right.sum_g = fn.sum_g - fn.best_left_g;
            right.sum_h = fn.sum_h - fn.best_left_h;
            right.count = fn.count - fn.best_left_count;
            next.push_back(left);
            next.push_back(right);
        }

        if (!next.empty()) tree.depth = level + 1;

        for (std::size_t r = 0; r < n; ++r) {
            std::int32_t slot = slot_of_row[r];
            if (slot < 0) continue;
            std::int32_t base = child_slot[static_cast<std::size_t>(slot)];
            if (base < 0) {
                slot_of_row[r] = -1;
                continue;
            }
            const auto& parent =
                tree.nodes[static_cast<std::size_t>(frontier[static_cast<std::size_t>(slot)].tree_node)];
            bool go_left = features.at(r, static_cast<std::size_t>(parent.feature_index)) <=
                           parent.threshold;
            slot_of_row[r] = base + (go_left ? 0 : 1);
        }
        frontier = std::move(next);
    }

    // depth cap: whatever is still open becomes a leaf
    for (const auto& fn : frontier) {
        tree.nodes[static_cast<std::size_t>(fn.tree_node)].leaf_value =
            -fn.sum_g / (fn.sum_h + lambda);
    }
    return tree;
}

GradientBoostedEnsemble fit_ensemble_presorted(const Matrix& features,
                                               const SortedFeatures& sorted,
                                               std::span<const double> targets,
                                               const TrainingParams& params) {
    const std::size_t n = features.rows;
    GradientBoostedEnsemble ensemble;
    ensemble.learning_rate = params.learning_rate;
    ensemble.base_score = std::accumulate(targets.begin(), targets.end(), 0.0) /
                          static_cast<double>(n);
    ensemble.trees.reserve(static_cast<std::size_t>(params.n_trees));

    std::vector<double> predictions(n, ensemble.base_score);
    std::vector<double> gradients(n);
    std::vector<double> hessians(n, 1.0);
    for (int t = 0; t < params.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) gradients[i] = predictions[i] - targets[i];
        RegressionTree tree = fit_tree_presorted(features, sorted, gradients, hessians, params);
        for (std::size_t i = 0; i < n; ++i) {
            predictions[i] += params.learning_rate * tree.predict(features.row(i));
        }
        ensemble.trees.push_back(std::move(tree));
    }
    return ensemble;
}

}  // namespace detail

RegressionTree fit_tree(const Matrix& features, std::span<const double> gradients,
                        std::span<const double> hessians, const TrainingParams& params) {
    auto sorted = detail::presort_features(features);
    return detail::fit_tree_presorted(features, sorted, gradients, hessians, params);
}

GradientBoostedEnsemble fit_ensemble(const Matrix& features, std::span<const double> targets,
                                     const TrainingParams& params) {
    params.validate();
    if (features.rows == 0) throw DataError("cannot train on an empty dataset");
    if (targets.size() != features.rows) {
        throw DataError("target length does not match row count");
    }
    if (!all_finite(features.data) || !all_finite(targets)) {
        throw DataError("non-finite value in training inputs");
    }
    auto sorted = detail::presort_features(features);
    return detail::fit_ensemble_presorted(features, sorted, targets, params);
}

LinearModel fit_ols(const Matrix& features, std::span<const double> targets) {
    const std::size_t n = features.rows;
    const std::size_t d = features.cols;
    if (n <= d) {
        throw DataError("need more rows than features for least squares (n=" +
                        std::to_string(n) + ", d=" + std::to_string(d) + ")");
    }
    if (!all_finite(features.data) || !all_finite(targets)) {
        throw DataError("non-finite value in training inputs");
    }

    // Normal equations on [1 X] with a tiny ridge for conditioning.
    const std::size_t m = d + 1;
    const double ridge = 1e-8;
    std::vector<double> gram(m * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    auto aug = [&](std::size_t row, std::size_t j) {
        return j == 0 ? 1.0 : features.at(row, j - 1);
    };
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < m; ++i) {
            double ai = aug(r, i);
            rhs[i] += ai * targets[r];
            for (std::size_t j = i; j < m; ++j) gram[i * m + j] += ai * aug(r, j);
        }
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < i; ++j) gram[i * m + j] = gram[j * m + i];
        gram[i * m + i] += ridge;
    }

    // Gaussian elimination with partial pivoting.
    std::vector<double> beta = rhs;
    for (std::size_t col = 0; col < m; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < m; ++r) {
            if (std::abs(gram[r * m + col]) > std::abs(gram[pivot * m + col])) pivot = r;
        }
        if (pivot != col) {
            for (std::size_t j = 0; j < m; ++j) std::swap(gram[col * m + j], gram[pivot * m + j]);
            std::swap(beta[col], beta[pivot]);
        }
        double diag = gram[col * m + col];
        if (diag == 0.0) throw DataError("degenerate feature matrix in least squares");
        for (std::size_t r = col + 1; r < m; ++r) {
            double factor = gram[r * m + col] / diag;
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < m; ++j) gram[r * m + j] -= factor * gram[col * m + j];
            beta[r] -= factor * beta[col];
        }
    }
    for (std::size_t col = m; col-- > 0;) {
        for (std::size_t j = col + 1; j < m; ++j) beta[col] -= gram[col * m + j] * beta[j];
        beta[col] /= gram[col * m + col];
    }

    LinearModel model;
    model.intercept = beta[0];
    model.coefficients.assign(beta.begin() + 1, beta.end());
    if (!std::isfinite(model.intercept) || !all_finite(model.coefficients)) {
        throw DataError("least squares produced non-finite coefficients");
    }
    return model;
}

}  // namespace esave
