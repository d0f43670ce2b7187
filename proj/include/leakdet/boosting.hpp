#pragma once

// Stagewise additive gradient boosting for least-squares loss: the model
// starts from the target mean and each stage fits a regression tree to the
// current residuals, added with shrinkage.

#include <vector>

#include "leakdet/common.hpp"
#include "leakdet/tree.hpp"

namespace leakdet::ml {

struct BoostingParams {
    double learning_rate = 0.1;
    int n_estimators = 100;
    int max_depth = 3;
    int min_samples_split = 2;
};

class GradientBoosting {
  public:
    void fit(const Matrix& x, const std::vector<double>& y, const BoostingParams& params) {
        if (params.learning_rate <= 0.0)
            throw config_error("gradient boosting: learning_rate must be positive");
        if (params.n_estimators < 1)
            throw config_error("gradient boosting: n_estimators must be >= 1");
        if (x.rows() == 0 || x.rows() != y.size())
            throw data_error("gradient boosting: empty input or row/target mismatch");
        params_ = params;
        trees_.clear();
        stage_mse_.clear();

        const std::size_t n = x.rows();
        init_ = 0.0;
        for (double v : y) init_ += v;
        init_ /= double(n);

        std::vector<double> residual(n);
        for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - init_;
        stage_mse_.push_back(mse(residual));

        TreeParams tp;
        tp.max_depth = params.max_depth;
        tp.min_samples_split = params.min_samples_split;
        tp.max_features = MaxFeatures::all;

        for (int m = 0; m < params.n_estimators; ++m) {
            DecisionTree tree;
            tree.fit(x, residual, tp);
            for (std::size_t i = 0; i < n; ++i)
                residual[i] -= params.learning_rate * tree.predict_row(x.row(i));
            trees_.push_back(std::move(tree));
            stage_mse_.push_back(mse(residual));
        }
    }

    double predict_row(const double* row) const {
        double f = init_;
        for (const auto& t : trees_) f += params_.learning_rate * t.predict_row(row);
        return f;
    }

    std::vector<double> predict(const Matrix& x) const {
        std::vector<double> out(x.rows());
        for (std::size_t r = 0; r < x.rows(); ++r) out[r] = predict_row(x.row(r));
        return out;
    }

    double init() const { return init_; }
    void set_init(double v) { init_ = v; }
    const std::vector<DecisionTree>& trees() const { return trees_; }
    std::vector<DecisionTree>& mutable_trees() { return trees_; }
    const BoostingParams& params() const { return params_; }
    BoostingParams& mutable_params() { return params_; }
    // Training MSE after each stage (index 0 is the constant model).
    const std::vector<double>& stage_mse() const { return stage_mse_; }

  private:
    static double mse(const std::vector<double>& r) {
        double s = 0.0;
        for (double v : r) s += v * v;
        return s / double(r.size());
    }

    BoostingParams params_;
    double init_ = 0.0;
    std::vector<DecisionTree> trees_;
    std::vector<double> stage_mse_;
};

}  // namespace leakdet::ml
