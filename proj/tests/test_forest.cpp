#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "leakdet/forest.hpp"
#include "leakdet/metrics.hpp"

using namespace leakdet;
using namespace leakdet::ml;

namespace {

struct Dataset {
    Matrix x;
    std::vector<double> y;
};

Dataset smooth_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    Dataset d{Matrix(n, 3), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) d.x.at(i, c) = uniform_real(rng, 0, 1);
        d.y[i] = 3.0 * d.x.at(i, 0) + std::sin(5.0 * d.x.at(i, 1));
    }
    return d;
}

}  // namespace

TEST_CASE("single tree without bootstrap degenerates to the decision tree") {
    const auto d = smooth_dataset(120, 5);
    ForestParams fp;
    fp.n_estimators = 1;
    fp.bootstrap = false;
    fp.max_features = MaxFeatures::all;
    RandomForest rf;
    rf.fit(d.x, d.y, fp);

    DecisionTree t;
    t.fit(d.x, d.y, TreeParams{});
    const auto pf = rf.predict(d.x);
    const auto pt = t.predict(d.x);
    for (std::size_t i = 0; i < pf.size(); ++i) REQUIRE(pf[i] == pt[i]);
}

TEST_CASE("prediction spread is zero on a constant target") {
    Matrix x(30, 2);
    Rng rng = make_rng(3);
    for (auto& v : x.data()) v = uniform_real(rng, 0, 1);
    std::vector<double> y(30, 2.5);
    ForestParams fp;
    fp.n_estimators = 12;
    fp.seed = 9;
    RandomForest rf;
    rf.fit(x, y, fp);
    const auto stats = rf.predict_row_stats(x.row(4));
    REQUIRE(stats.mean == Catch::Approx(2.5));
    REQUIRE(stats.stddev == 0.0);
}

TEST_CASE("ensemble spread never exceeds the largest single-tree deviation") {
    const auto d = smooth_dataset(200, 17);
    ForestParams fp;
    fp.n_estimators = 25;
    fp.seed = 31;
    RandomForest rf;
    rf.fit(d.x, d.y, fp);
    for (std::size_t i = 0; i < 20; ++i) {
        const auto stats = rf.predict_row_stats(d.x.row(i));
        double worst = 0.0;
        for (const auto& t : rf.trees())
            worst = std::max(worst, std::fabs(t.predict_row(d.x.row(i)) - stats.mean));
        REQUIRE(stats.stddev <= worst + 1e-12);
    }
}

TEST_CASE("fixed seed reproduces the forest bit for bit") {
    const auto d = smooth_dataset(150, 23);
    ForestParams fp;
    fp.n_estimators = 10;
    fp.seed = 4242;
    RandomForest a, b;
    a.fit(d.x, d.y, fp);
    b.fit(d.x, d.y, fp, ThreadPool(2));  // thread count must not matter
    const auto pa = a.predict(d.x);
    const auto pb = b.predict(d.x);
    for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i] == pb[i]);
}

TEST_CASE("forest fits the smooth function well") {
    const auto d = smooth_dataset(800, 77);
    ForestParams fp;
    fp.n_estimators = 40;
    fp.seed = 5;
    RandomForest rf;
    rf.fit(d.x, d.y, fp, ThreadPool(2));
    REQUIRE(metrics::r2(d.y, rf.predict(d.x)) > 0.97);
}

TEST_CASE("invalid estimator count is rejected") {
    RandomForest rf;
    Matrix x(5, 1, 1.0);
    ForestParams fp;
    fp.n_estimators = 0;
    REQUIRE_THROWS_AS(rf.fit(x, {1, 2, 3, 4, 5}, fp), config_error);
}
