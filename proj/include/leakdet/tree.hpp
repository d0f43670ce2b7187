#pragma once

// Regression tree grown by greedy variance reduction.  Split search is exact:
// every boundary between distinct values of a candidate feature is scored.
// The builder works level by level over per-feature presorted sample orders,
// which keeps large fits cheap and the scan order deterministic.
//
// Determinism contract: ties between candidate splits are broken toward the
// lowest feature index, then the lowest threshold (first strictly better
// candidate wins while scanning features in ascending index and values in
// ascending order).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "leakdet/common.hpp"

namespace leakdet::ml {

enum class MaxFeatures { all, sqrt_of, log2_of };

inline std::size_t resolve_max_features(MaxFeatures mode, std::size_t d) {
    switch (mode) {
        case MaxFeatures::sqrt_of:
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(double(d))));
        case MaxFeatures::log2_of:
            return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(double(d))));
        default:
            return d;
    }
}

struct TreeParams {
    int max_depth = -1;  // -1: unbounded
    int min_samples_split = 2;
    MaxFeatures max_features = MaxFeatures::all;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // mean of training targets routed here
    std::uint64_t n_samples = 0;
    int depth = 0;
};

class DecisionTree {
  public:
    // weights: bootstrap multiplicities (empty means all ones).  rng is only
    // consulted when params.max_features restricts the per-split candidates.
    void fit(const Matrix& x, const std::vector<double>& y, const TreeParams& params,
             Rng* rng = nullptr, const std::vector<std::uint32_t>& weights = {}) {
        if (x.rows() == 0 || x.rows() != y.size())
            throw data_error("decision tree: empty input or row/target mismatch");
        const std::size_t n = x.rows(), d = x.cols();
        n_features_ = d;
        nodes_.clear();

        std::vector<std::uint32_t> w = weights;
        if (w.empty()) w.assign(n, 1);

        // Presort every feature by (value, index).
        std::vector<std::vector<std::uint32_t>> order(d);
        for (std::size_t f = 0; f < d; ++f) {
            auto& ord = order[f];
            ord.resize(n);
            std::iota(ord.begin(), ord.end(), 0u);
            std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
                const double va = x.at(a, f), vb = x.at(b, f);
                if (va != vb) return va < vb;
                return a < b;
            });
        }

        const std::size_t m_try = resolve_max_features(params.max_features, d);
        if (m_try < d && d > 64)
            throw config_error("decision tree: feature subsampling supports at most 64 features");

        std::vector<std::int32_t> node_of(n);
        for (std::size_t i = 0; i < n; ++i) node_of[i] = w[i] > 0 ? 0 : -1;

        nodes_.push_back(TreeNode{});
        std::vector<int> level_nodes{0};

        struct NodeWork {
            double cnt = 0, sum = 0, sumsq = 0;
            bool splittable = false;
            std::uint64_t feat_mask = ~0ULL;  // candidate features (d <= 64 in practice)
            // running left-side accumulators during a feature scan
            double lcnt = 0, lsum = 0, lsumsq = 0;
            double prev_value = 0;
            bool seen = false;
            // best split so far
            double best_proxy = -std::numeric_limits<double>::infinity();
            int best_feature = -1;
            double best_threshold = 0;
            double parent_proxy = 0;
        };

        std::vector<std::int32_t> slot_of;  // node id -> work slot
        int depth = 0;
        while (!level_nodes.empty()) {
            slot_of.assign(nodes_.size(), -1);
            std::vector<NodeWork> work(level_nodes.size());
            for (std::size_t s = 0; s < level_nodes.size(); ++s) slot_of[level_nodes[s]] = int(s);

            // Node statistics, accumulated in sample-index order.
            for (std::size_t i = 0; i < n; ++i) {
                const auto nd = node_of[i];
                if (nd < 0 || slot_of[nd] < 0) continue;
                auto& ws = work[slot_of[nd]];
                const double wi = double(w[i]);
                ws.cnt += wi;
                ws.sum += wi * y[i];
                ws.sumsq += wi * y[i] * y[i];
            }

            for (std::size_t s = 0; s < level_nodes.size(); ++s) {
                auto& ws = work[s];
                auto& node = nodes_[level_nodes[s]];
                node.value = ws.sum / ws.cnt;
                node.n_samples = std::uint64_t(std::llround(ws.cnt));
                node.depth = depth;
                ws.parent_proxy = ws.sum * ws.sum / ws.cnt;
                const double sse = std::max(0.0, ws.sumsq - ws.parent_proxy);
                const bool pure = sse <= 1e-12 * ws.cnt * (1.0 + node.value * node.value);
                ws.splittable = ws.cnt >= double(params.min_samples_split) && !pure &&
                                (params.max_depth < 0 || depth < params.max_depth);
                if (ws.splittable && m_try < d && rng) {
                    // Sample m_try features without replacement, node order.
                    std::vector<std::uint32_t> pool(d);
                    std::iota(pool.begin(), pool.end(), 0u);
                    ws.feat_mask = 0;
                    for (std::size_t k = 0; k < m_try; ++k) {
                        const auto j = uniform_index(*rng, pool.size());
                        ws.feat_mask |= 1ULL << pool[j];
                        pool.erase(pool.begin() + std::ptrdiff_t(j));
                    }
                }
            }

            for (std::size_t f = 0; f < d; ++f) {
                for (auto& ws : work) {
                    ws.lcnt = ws.lsum = ws.lsumsq = 0;
                    ws.seen = false;
                }
                for (std::uint32_t i : order[f]) {
                    const auto nd = node_of[i];
                    if (nd < 0 || slot_of[nd] < 0) continue;
                    auto& ws = work[slot_of[nd]];
                    if (!ws.splittable || !(ws.feat_mask >> (f % 64) & 1ULL)) continue;
                    const double v = x.at(i, f);
                    if (ws.seen && v > ws.prev_value && ws.lcnt > 0 && ws.lcnt < ws.cnt) {
                        const double rcnt = ws.cnt - ws.lcnt;
                        const double rsum = ws.sum - ws.lsum;
                        const double proxy =
                            ws.lsum * ws.lsum / ws.lcnt + rsum * rsum / rcnt;
                        if (proxy > ws.best_proxy &&
                            proxy - ws.parent_proxy >
                                1e-12 * (std::fabs(ws.parent_proxy) + 1.0)) {
                            ws.best_proxy = proxy;
                            ws.best_feature = int(f);
                            ws.best_threshold = ws.prev_value + (v - ws.prev_value) / 2.0;
                        }
                    }
                    const double wi = double(w[i]);
                    ws.lcnt += wi;
                    ws.lsum += wi * y[i];
                    ws.lsumsq += wi * y[i] * y[i];
                    ws.prev_value = v;
                    ws.seen = true;
                }
            }

            // Materialise children and route samples.
            std::vector<int> next_level;
            for (std::size_t s = 0; s < level_nodes.size(); ++s) {
                auto& ws = work[s];
                auto& node = nodes_[level_nodes[s]];
                if (!ws.splittable || ws.best_feature < 0) continue;
                node.feature = ws.best_feature;
                node.threshold = ws.best_threshold;
                node.left = int(nodes_.size());
                node.right = int(nodes_.size() + 1);
                nodes_.push_back(TreeNode{});
                nodes_.push_back(TreeNode{});
                next_level.push_back(node.left);
                next_level.push_back(node.right);
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto nd = node_of[i];
                if (nd < 0 || slot_of[nd] < 0) continue;
                const auto& node = nodes_[nd];
                if (node.feature < 0) continue;
                node_of[i] =
                    x.at(i, std::size_t(node.feature)) <= node.threshold ? node.left : node.right;
            }
            level_nodes = std::move(next_level);
            ++depth;
        }
    }

    double predict_row(const double* row) const {
        int id = 0;
        while (nodes_[id].feature >= 0)
            id = row[nodes_[id].feature] <= nodes_[id].threshold ? nodes_[id].left
                                                                 : nodes_[id].right;
        return nodes_[id].value;
    }

    std::vector<double> predict(const Matrix& x) const {
        check_width(x.cols());
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
        return out;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    std::vector<TreeNode>& mutable_nodes() { return nodes_; }
    std::size_t n_features() const { return n_features_; }
    void set_n_features(std::size_t d) { n_features_ = d; }

    int max_depth() const {
        int depth = 0;
        for (const auto& n : nodes_) depth = std::max(depth, n.depth);
        return depth;
    }

    std::size_t n_leaves() const {
        std::size_t k = 0;
        for (const auto& n : nodes_)
            if (n.feature < 0) ++k;
        return k;
    }

  private:
    void check_width(std::size_t c) const {
        if (c != n_features_)
            throw data_error("decision tree: input width " + std::to_string(c) +
                             " does not match fitted width " + std::to_string(n_features_));
    }
    std::vector<TreeNode> nodes_;
    std::size_t n_features_ = 0;
};

}  // namespace leakdet::ml
