#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "leakdet/grid_search.hpp"

using namespace leakdet;
using namespace leakdet::ml;

namespace {

struct Dataset {
    Matrix x;
    std::vector<double> y;
};

Dataset dataset(std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Dataset d{Matrix(n, 2), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        d.x.at(i, 0) = uniform_real(rng, 0, 1);
        d.x.at(i, 1) = uniform_real(rng, 0, 1);
        d.y[i] = 2.0 * d.x.at(i, 0) + std::sin(4.0 * d.x.at(i, 1)) +
                 gaussian(rng, 0, 0.02);
    }
    return d;
}

}  // namespace

TEST_CASE("contiguous folds partition the index range") {
    const auto folds = contiguous_folds(103, 5);
    REQUIRE(folds.size() == 5);
    std::size_t covered = 0;
    for (std::size_t f = 0; f < folds.size(); ++f) {
        REQUIRE(folds[f].end > folds[f].begin);
        if (f > 0) REQUIRE(folds[f].begin == folds[f - 1].end);
        covered += folds[f].end - folds[f].begin;
    }
    REQUIRE(covered == 103);
    REQUIRE_THROWS_AS(contiguous_folds(5, 1), config_error);
    REQUIRE_THROWS_AS(contiguous_folds(7, 5), data_error);  // a fold gets < 2 samples
}

TEST_CASE("singleton grid equals a plain fit with a CV score attached") {
    const auto d = dataset(120, 5);
    std::vector<GridCell> grid{{{"learning_rate", 0.1}, {"n_estimators", 40}}};
    const auto result =
        grid_search(Family::gradient_boosting, grid, d.x, d.y, 5, 17);
    REQUIRE(result.cells.size() == 1);
    REQUIRE(result.best_cell == 0);
    REQUIRE(std::isfinite(result.mean_cv_score[0]));

    BoostingParams p;
    p.learning_rate = 0.1;
    p.n_estimators = 40;
    GradientBoosting gb;
    gb.fit(d.x, d.y, p);
    const auto pa = gb.predict(d.x);
    const auto pb = std::visit([&](const auto& m) { return m.predict(d.x); },
                               result.best_model.impl);
    for (std::size_t i = 0; i < pa.size(); ++i)
        REQUIRE(pa[i] == Catch::Approx(pb[i]).margin(1e-12));
}

TEST_CASE("a diverging cell loses to the stable cell") {
    const auto d = dataset(150, 9);
    std::vector<GridCell> grid{{{"learning_rate", 10.0}, {"n_estimators", 30}},
                               {{"learning_rate", 0.1}, {"n_estimators", 30}}};
    const auto result =
        grid_search(Family::gradient_boosting, grid, d.x, d.y, 5, 3);
    REQUIRE(result.best_cell == 1);
    REQUIRE(result.mean_cv_score[1] > result.mean_cv_score[0]);
}

TEST_CASE("ties break toward the first cell in grid order") {
    const auto d = dataset(80, 2);
    // Identical cells produce identical scores; the first must win.
    std::vector<GridCell> grid{{{"max_features", "all"}, {"min_samples_split", 2}},
                               {{"max_features", "all"}, {"min_samples_split", 2}}};
    const auto result = grid_search(Family::decision_tree, grid, d.x, d.y, 4, 5);
    REQUIRE(result.mean_cv_score[0] == result.mean_cv_score[1]);
    REQUIRE(result.best_cell == 0);
}

TEST_CASE("grid search is deterministic across thread counts") {
    const auto d = dataset(200, 4);
    const auto grid = default_grid(Family::random_forest);
    const auto a = grid_search(Family::random_forest, grid, d.x, d.y, 5, 11, ThreadPool(1));
    const auto b = grid_search(Family::random_forest, grid, d.x, d.y, 5, 11, ThreadPool(2));
    REQUIRE(a.best_cell == b.best_cell);
    for (std::size_t c = 0; c < grid.size(); ++c)
        REQUIRE(a.mean_cv_score[c] == b.mean_cv_score[c]);
}

TEST_CASE("empty grid is rejected") {
    const auto d = dataset(50, 8);
    REQUIRE_THROWS_AS(grid_search(Family::decision_tree, {}, d.x, d.y, 5, 1), config_error);
}

TEST_CASE("default grids carry the documented shapes") {
    REQUIRE(default_grid(Family::decision_tree).size() == 9);
    REQUIRE(default_grid(Family::random_forest).size() == 6);
    REQUIRE(default_grid(Family::gradient_boosting).size() == 9);
    REQUIRE(default_grid(Family::svr).size() == 12);
    REQUIRE(default_grid(Family::mlp).size() == 12);
}
