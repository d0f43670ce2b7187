#pragma once

// Hyperparameter tuning: contiguous (non-shuffled) k-fold cross-validation
// over a grid of candidate cells, mean validation R^2 per cell, ties broken
// by first-in-grid order, winner refit on the full training set.
//
// Cells that degenerate (diverging boosting rates, non-finite scores) score
// -inf and lose to any stable cell.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "leakdet/common.hpp"
#include "leakdet/dataio.hpp"
#include "leakdet/metrics.hpp"
#include "leakdet/model.hpp"

namespace leakdet::ml {

using GridCell = nlohmann::json;

struct FoldSpan {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
};

inline std::vector<FoldSpan> contiguous_folds(std::size_t n, int k) {
    if (k < 2) throw config_error("k-fold: k must be >= 2");
    if (n < std::size_t(k)) throw data_error("k-fold: fewer samples than folds");
    std::vector<FoldSpan> out;
    for (int f = 0; f < k; ++f) {
        FoldSpan s{n * std::size_t(f) / std::size_t(k), n * std::size_t(f + 1) / std::size_t(k)};
        if (s.end - s.begin < 2) throw data_error("k-fold: fold with fewer than 2 samples");
        out.push_back(s);
    }
    return out;
}

inline MaxFeatures max_features_from_name(const std::string& s) {
    if (s == "all" || s == "none" || s == "auto") return MaxFeatures::all;
    if (s == "sqrt") return MaxFeatures::sqrt_of;
    if (s == "log2") return MaxFeatures::log2_of;
    throw config_error("unknown max_features \"" + s + "\"");
}

// Fits one family on an already preprocessed matrix, using the cell's
// hyperparameters.  The seed feeds families with internal randomness.
inline RegressorModel fit_cell(Family family, const GridCell& cell, const Matrix& x,
                               const std::vector<double>& y, std::uint64_t seed,
                               const ThreadPool& pool = ThreadPool(1)) {
    RegressorModel m;
    m.family = family;
    m.hyperparameters = cell;
    switch (family) {
        case Family::decision_tree: {
            TreeParams p;
            p.min_samples_split = cell.value("min_samples_split", 2);
            p.max_features = max_features_from_name(cell.value("max_features", "all"));
            p.max_depth = cell.value("max_depth", -1);
            DecisionTree t;
            Rng rng = make_rng(derive_seed(seed, 0xd7));
            t.fit(x, y, p, &rng);
            m.impl = std::move(t);
            break;
        }
        case Family::random_forest: {
            ForestParams p;
            p.n_estimators = cell.value("n_estimators", 100);
            p.max_features = max_features_from_name(cell.value("max_features", "sqrt"));
            p.bootstrap = cell.value("bootstrap", true);
            p.max_depth = cell.value("max_depth", -1);
            p.seed = seed;
            RandomForest rf;
            rf.fit(x, y, p, pool);
            m.impl = std::move(rf);
            break;
        }
        case Family::gradient_boosting: {
            BoostingParams p;
            p.learning_rate = cell.value("learning_rate", 0.1);
            p.n_estimators = cell.value("n_estimators", 100);
            p.max_depth = cell.value("max_depth", 3);
            GradientBoosting gb;
            gb.fit(x, y, p);
            m.impl = std::move(gb);
            break;
        }
        case Family::svr: {
            SvrParams p;
            p.c = cell.value("C", 1.0);
            p.kernel = cell.value("kernel", std::string("rbf")) == "linear" ? Kernel::linear
                                                                            : Kernel::rbf;
            p.epsilon = cell.value("epsilon", 0.01);
            Svr sv;
            sv.fit(x, y, p);
            m.impl = std::move(sv);
            break;
        }
        case Family::mlp: {
            MlpParams p;
            const int layers = cell.value("hidden_layers", 1);
            const int units = cell.value("units", 10);
            p.hidden.assign(std::size_t(layers), units);
            p.alpha = cell.value("alpha", 1e-4);
            p.seed = seed;
            Mlp nn;
            nn.fit(x, y, p);
            m.impl = std::move(nn);
            break;
        }
    }
    return m;
}

struct GridSearchResult {
    std::vector<GridCell> cells;
    std::vector<double> mean_cv_score;  // R^2, -inf for degenerate cells
    std::size_t best_cell = 0;
    RegressorModel best_model;  // refit on the full training matrix
};

inline GridSearchResult grid_search(Family family, const std::vector<GridCell>& grid,
                                    const Matrix& x, const std::vector<double>& y, int k,
                                    std::uint64_t seed, const ThreadPool& pool = ThreadPool(1)) {
    if (grid.empty()) throw config_error("grid_search: empty grid");
    const auto folds = contiguous_folds(x.rows(), k);

    GridSearchResult result;
    result.cells = grid;
    result.mean_cv_score.assign(grid.size(), 0.0);

    struct Task {
        std::size_t cell;
        std::size_t fold;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < grid.size(); ++c)
        for (std::size_t f = 0; f < folds.size(); ++f) tasks.push_back({c, f});
    std::vector<double> scores(tasks.size(), -std::numeric_limits<double>::infinity());

    pool.run_indexed(tasks.size(), [&](std::size_t t) {
        const auto [c, f] = tasks[t];
        const auto& span = folds[f];
        std::vector<std::size_t> train_idx, val_idx;
        for (std::size_t i = 0; i < x.rows(); ++i)
            (i >= span.begin && i < span.end ? val_idx : train_idx).push_back(i);
        const Matrix xt = x.take_rows(train_idx);
        const std::vector<double> yt = take(y, train_idx);
        const Matrix xv = x.take_rows(val_idx);
        const std::vector<double> yv = take(y, val_idx);
        try {
            const RegressorModel m =
                fit_cell(family, grid[c], xt, yt, derive_seed(seed, c, f), ThreadPool(1));
            const auto pred = std::visit([&](const auto& mm) { return mm.predict(xv); }, m.impl);
            const double r2 = metrics::r2(yv, pred);
            scores[t] = std::isfinite(r2) ? r2 : -std::numeric_limits<double>::infinity();
        } catch (const std::exception&) {
            scores[t] = -std::numeric_limits<double>::infinity();
        }
    });

    for (std::size_t c = 0; c < grid.size(); ++c) {
        double sum = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) sum += scores[c * folds.size() + f];
        result.mean_cv_score[c] = sum / double(folds.size());
    }
    result.best_cell = 0;
    for (std::size_t c = 1; c < grid.size(); ++c)
        if (result.mean_cv_score[c] > result.mean_cv_score[result.best_cell])
            result.best_cell = c;

    result.best_model =
        fit_cell(family, grid[result.best_cell], x, y, derive_seed(seed, result.best_cell), pool);
    result.best_model.metadata["cv_score"] = result.mean_cv_score[result.best_cell];
    return result;
}

// ---------------------------------------------------------------------------
// Default tuning grids.  Continuous paper ranges are discretised to
// logarithmic steps; counts are kept small enough that a full tuned run of
// all five families stays within the benchmark time budget.
// ---------------------------------------------------------------------------

inline std::vector<GridCell> default_grid(Family family) {
    std::vector<GridCell> cells;
    switch (family) {
        case Family::decision_tree:
            for (const char* mf : {"all", "log2", "sqrt"})
                for (int mss : {2, 5, 10})
                    cells.push_back({{"max_features", mf}, {"min_samples_split", mss}});
            break;
        case Family::random_forest:
            for (int ne : {10, 100})
                for (const char* mf : {"sqrt", "all", "log2"})
                    cells.push_back({{"n_estimators", ne}, {"max_features", mf}});
            break;
        case Family::gradient_boosting:
            for (double lr : {0.1, 1.0, 10.0})
                for (int ne : {50, 200, 500})
                    cells.push_back({{"learning_rate", lr}, {"n_estimators", ne}});
            break;
        case Family::svr:
            for (double c : {0.1, 1.0, 10.0, 100.0, 1000.0, 10000.0})
                for (const char* k : {"rbf", "linear"})
                    cells.push_back({{"C", c}, {"kernel", k}});
            break;
        case Family::mlp:
            for (int layers : {1, 2})
                for (int units : {5, 20})
                    for (double alpha : {0.01, 1.0, 10.0})
                        cells.push_back(
                            {{"hidden_layers", layers}, {"units", units}, {"alpha", alpha}});
            break;
    }
    return cells;
}

// ---------------------------------------------------------------------------
// End-to-end observer training: recipe per family (polynomial features for
// the tree and kernel models, scaling for SVR and the network), grid search
// on the training records, metrics on request.
// ---------------------------------------------------------------------------

struct TrainReport {
    double rmse_train = 0, mae_train = 0, r2_train = 0;
    double rmse_test = 0, mae_test = 0, r2_test = 0;
    double cv_score = 0;
};

inline Recipe make_recipe(Family family, const Matrix& x_train) {
    Recipe r;
    r.raw_width = x_train.cols();
    switch (family) {
        case Family::decision_tree:
        case Family::random_forest:
        case Family::gradient_boosting:
            r.poly_degree = 2;
            break;
        case Family::svr: {
            r.poly_degree = 2;
            const Matrix expanded = data::poly_expand(x_train, 2);
            r.scaler = data::Scaler::fit(expanded);
            break;
        }
        case Family::mlp:
            r.poly_degree = 0;
            r.scaler = data::Scaler::fit(x_train);
            break;
    }
    return r;
}

struct TunedObserver {
    RegressorModel model;
    GridSearchResult search;
    TrainReport report;
};

inline TunedObserver tune_observer(const data::Telemetry& train_records,
                                   const data::Telemetry& test_records, Family family,
                                   std::uint64_t seed, const ThreadPool& pool = ThreadPool(1),
                                   data::FlowChannel channel = data::FlowChannel::outlet,
                                   const std::vector<GridCell>* grid_override = nullptr,
                                   int k_folds = 5) {
    const auto train = data::make_features(train_records, channel);
    const auto test = data::make_features(test_records, channel);

    const Recipe recipe = make_recipe(family, train.x);
    const Matrix xt = recipe.apply(train.x);

    const auto grid = grid_override ? *grid_override : default_grid(family);
    TunedObserver out;
    out.search = grid_search(family, grid, xt, train.target, k_folds, seed, pool);
    out.model = std::move(out.search.best_model);
    out.model.recipe = recipe;

    const auto pred_train = out.model.predict(train.x);
    const auto pred_test = out.model.predict(test.x);
    out.report.rmse_train = metrics::rmse(train.target, pred_train);
    out.report.mae_train = metrics::mae(train.target, pred_train);
    out.report.r2_train = metrics::r2(train.target, pred_train);
    out.report.rmse_test = metrics::rmse(test.target, pred_test);
    out.report.mae_test = metrics::mae(test.target, pred_test);
    out.report.r2_test = metrics::r2(test.target, pred_test);
    out.report.cv_score = out.search.mean_cv_score[out.search.best_cell];
    out.model.metadata["rmse_test"] = out.report.rmse_test;
    out.model.metadata["mae_test"] = out.report.mae_test;
    out.model.metadata["r2_test"] = out.report.r2_test;
    out.model.metadata["r2_train"] = out.report.r2_train;
    out.model.metadata["seed"] = seed;
    return out;
}

}  // namespace leakdet::ml
