#pragma once

// Bagged ensemble of regression trees with per-split feature subsampling.
// Each tree owns an RNG stream derived from (seed, tree index), so fits are
// reproducible regardless of how many worker threads build them.

#include <cmath>
#include <vector>

#include "leakdet/common.hpp"
#include "leakdet/tree.hpp"

namespace leakdet::ml {

struct ForestParams {
    int n_estimators = 100;
    MaxFeatures max_features = MaxFeatures::sqrt_of;
    bool bootstrap = true;
    int min_samples_split = 2;
    int max_depth = -1;
    std::uint64_t seed = 0;
};

struct ForestPrediction {
    double mean = 0.0;
    double stddev = 0.0;  // spread of individual tree predictions
};

class RandomForest {
  public:
    void fit(const Matrix& x, const std::vector<double>& y, const ForestParams& params,
             const ThreadPool& pool = ThreadPool(1)) {
        if (params.n_estimators < 1)
            throw config_error("random forest: n_estimators must be >= 1");
        if (x.rows() == 0 || x.rows() != y.size())
            throw data_error("random forest: empty input or row/target mismatch");
        params_ = params;
        trees_.assign(std::size_t(params.n_estimators), DecisionTree{});
        const std::size_t n = x.rows();
        pool.run_indexed(trees_.size(), [&](std::size_t t) {
            Rng rng = make_rng(derive_seed(params_.seed, 0xf07e57, t));
            std::vector<std::uint32_t> weights;
            if (params_.bootstrap) {
                weights.assign(n, 0);
                for (std::size_t k = 0; k < n; ++k) ++weights[uniform_index(rng, n)];
            }
            TreeParams tp;
            tp.max_depth = params_.max_depth;
            tp.min_samples_split = params_.min_samples_split;
            tp.max_features = params_.max_features;
            trees_[t].fit(x, y, tp, &rng, weights);
        });
    }

    ForestPrediction predict_row_stats(const double* row) const {
        double sum = 0.0, sumsq = 0.0;
        for (const auto& t : trees_) {
            const double p = t.predict_row(row);
            sum += p;
            sumsq += p * p;
        }
        const double b = double(trees_.size());
        const double mean = sum / b;
        const double var = std::max(0.0, sumsq / b - mean * mean);
        return {mean, std::sqrt(var)};
    }

    double predict_row(const double* row) const { return predict_row_stats(row).mean; }

    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
        return out;
    }

    const std::vector<DecisionTree>& trees() const { return trees_; }
    std::vector<DecisionTree>& mutable_trees() { return trees_; }
    const ForestParams& params() const { return params_; }
    ForestParams& mutable_params() { return params_; }

  private:
    ForestParams params_;
    std::vector<DecisionTree> trees_;
};

}  // namespace leakdet::ml
