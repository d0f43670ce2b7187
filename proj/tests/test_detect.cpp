#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <deque>

#include "leakdet/detect.hpp"
#include "leakdet/grid_search.hpp"
#include "leakdet/simulate.hpp"

using namespace leakdet;
using namespace leakdet::detect;

TEST_CASE("leak index reference points") {
    REQUIRE(leak_index(0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
    REQUIRE(leak_index(0) == Catch::Approx(0.36788).margin(1e-5));
    REQUIRE(leak_index(10) == Catch::Approx(0.990148).margin(1e-6));
    // Smallest integer a that clears the 0.99 trip level is 10.
    REQUIRE(leak_index(9) < 0.99);
    REQUIRE(leak_index(10) > 0.99);
    REQUIRE(leak_index(1e9) < 1.0);
    REQUIRE(leak_index(1e9) == Catch::Approx(1.0).margin(1e-6));
}

TEST_CASE("leak index is strictly increasing") {
    double prev = -1.0;
    for (int a = 0; a <= 60; ++a) {
        const double v = leak_index(a);
        REQUIRE(v > prev);
        prev = v;
    }
    REQUIRE_THROWS_AS(leak_index(-1), std::domain_error);
}

TEST_CASE("size estimate and localization formulas") {
    REQUIRE(estimate_leak_size(9.0, 9.0) == 0.0);
    REQUIRE(estimate_leak_size(9.0, 8.1) == Catch::Approx(10.0).epsilon(1e-12));
    REQUIRE_THROWS_AS(estimate_leak_size(0.0, 1.0), std::domain_error);

    REQUIRE(localize(1.0, 1.0) == 0.5);
    REQUIRE(localize(1.0, 2.0) == Catch::Approx(2.0 / 3.0).epsilon(1e-12));
    REQUIRE_THROWS_AS(localize(0.0, 0.0), std::domain_error);
    REQUIRE_THROWS_AS(localize(-1.0, 1.0), std::domain_error);
}

TEST_CASE("minutes-to-detect follows the appendix accounting") {
    REQUIRE(minutes_to_detect(42, 30, 2.0) == 20.0);
    REQUIRE(minutes_to_detect(32, 30, 2.0) == 0.0);
}

namespace {

// Feeds a synthetic flag pattern through the detector: observed-predicted
// is `high` when the pattern bit is set, else 0.
struct Replay {
    DetectorConfig config;
    DetectorState state;
    std::vector<StepOutcome> outcomes;

    explicit Replay(const DetectorConfig& c) : config(c), state(c.window) {}

    StepOutcome feed(bool exceed) {
        const double obs = 10.0;
        const double pred = exceed ? 10.0 - (config.threshold + 0.5) : 10.0;
        auto out = step(state, obs, pred, config);
        outcomes.push_back(out);
        return out;
    }
};

DetectorConfig default_config() {
    DetectorConfig c;
    c.threshold = 0.05;
    return c;
}

}  // namespace

TEST_CASE("quiet streams never alarm and the counter stays at zero") {
    Replay r(default_config());
    for (int i = 0; i < 500; ++i) {
        const auto out = r.feed(false);
        REQUIRE_FALSE(out.alarm);
        REQUIRE(out.counter == 0);
    }
}

TEST_CASE("persistent exceedances alarm exactly twelve samples after onset") {
    Replay r(default_config());
    for (int i = 0; i < 100; ++i) r.feed(false);
    int alarm_at = -1;
    for (int i = 0; i < 40; ++i) {
        const auto out = r.feed(true);
        if (out.alarm) {
            alarm_at = i;
            break;
        }
    }
    REQUIRE(alarm_at == 12);
}

TEST_CASE("no alarm can fire earlier than the twelfth sample under any input") {
    Rng rng = make_rng(864);
    for (int trial = 0; trial < 300; ++trial) {
        Replay r(default_config());
        for (int i = 0; i < 12; ++i) {
            const auto out = r.feed(uniform_index(rng, 2) == 1);
            REQUIRE_FALSE(out.alarm);
        }
    }
}

TEST_CASE("alarm latches: only one alarm per run") {
    Replay r(default_config());
    int alarms = 0;
    for (int i = 0; i < 400; ++i) alarms += r.feed(true).alarm ? 1 : 0;
    REQUIRE(alarms == 1);
}

TEST_CASE("ring-buffer window count matches a brute-force recount over fuzzed steps") {
    Rng rng = make_rng(5150);
    DetectorConfig config = default_config();
    config.window = 30;
    DetectorState state(config.window);
    std::deque<bool> history;
    for (int i = 0; i < 100000; ++i) {
        // Occasionally inject NaNs, which must be skipped without touching
        // the window.
        const bool skip = uniform_index(rng, 97) == 0;
        const bool exceed = uniform_index(rng, 3) == 0;
        const double obs = 10.0;
        const double pred = skip ? std::nan("") : (exceed ? 9.0 : 10.0);

        int brute = 0;
        for (bool b : history) brute += b ? 1 : 0;
        const auto out = step(state, obs, pred, config);
        if (!skip) {
            const double expected_a = 1.0 + brute;
            REQUIRE(out.index == Catch::Approx(leak_index(expected_a)).margin(1e-15));
            history.push_back(out.flag);
            if (history.size() > std::size_t(config.window)) history.pop_front();
        }
        if (state.latched) break;
    }
}

TEST_CASE("raising the threshold never increases the number of flags") {
    Rng rng = make_rng(99);
    std::vector<double> obs(400), pred(400);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i] = 10.0 + uniform_real(rng, -0.5, 0.5);
        pred[i] = 10.0 + uniform_real(rng, -0.5, 0.5);
    }
    std::size_t prev_flags = obs.size() + 1;
    for (double thr : {0.05, 0.1, 0.2, 0.4, 0.8}) {
        DetectorConfig c;
        c.threshold = thr;
        DetectorState s(c.window);
        std::size_t flags = 0;
        for (std::size_t i = 0; i < obs.size(); ++i)
            flags += step(s, obs[i], pred[i], c).flag ? 1 : 0;
        REQUIRE(flags <= prev_flags);
        prev_flags = flags;
    }
}

TEST_CASE("replaying the same inputs reproduces identical outcomes") {
    Rng rng = make_rng(31);
    std::vector<double> obs(300), pred(300);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        obs[i] = uniform_real(rng, 8, 10);
        pred[i] = uniform_real(rng, 8, 10);
    }
    DetectorConfig c;
    c.threshold = 0.7;
    DetectorState s1(c.window), s2(c.window);
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto a = step(s1, obs[i], pred[i], c);
        const auto b = step(s2, obs[i], pred[i], c);
        REQUIRE(a.flag == b.flag);
        REQUIRE(a.index == b.index);
        REQUIRE(a.counter == b.counter);
        REQUIRE(a.alarm == b.alarm);
    }
}

TEST_CASE("run_detection end to end on an injected leak") {
    sim::PipelineSpec spec;
    const auto train_stream =
        sim::synth_stream(spec, 3000, sim::OperatingProfile::standard(),
                          sim::NoiseModel::none(), 71);
    const auto [train, test] = data::split(train_stream, 0.30, 12);
    ml::GridCell cell = {{"n_estimators", 120}, {"learning_rate", 0.1}};
    std::vector<ml::GridCell> grid{cell};
    const auto tuned = ml::tune_observer(train, test, ml::Family::gradient_boosting, 3,
                                         ThreadPool(2), data::FlowChannel::outlet, &grid, 5);

    DetectorConfig config;
    config.threshold = default_threshold(tuned.report.mae_test);

    const auto base = sim::synth_stream(spec, 240, sim::OperatingProfile::standard(),
                                        sim::NoiseModel::none(), 99);
    // Clean stream: no alarm.
    const auto clean = run_detection(base, tuned.model, config);
    REQUIRE_FALSE(clean.alarm.has_value());

    // A 5% mid-pipe leak must alarm shortly after onset.
    const auto leaky = sim::inject_leak(base, spec, sim::LeakScenario{0.05, 0.5, 30});
    const auto det = run_detection(leaky, tuned.model, config, &tuned.model);
    REQUIRE(det.alarm.has_value());
    const double minutes = minutes_to_detect(det.alarm->ordinal, 30, spec.sampling_minutes);
    REQUIRE(minutes >= 0.0);
    REQUIRE(minutes <= 60.0);
    REQUIRE(det.alarm->estimated_location.has_value());
    REQUIRE(*det.alarm->estimated_location == Catch::Approx(0.5).margin(0.1));
    REQUIRE(det.alarm->estimated_total_size_pct == Catch::Approx(5.0).margin(2.0));

    // The detection log covers every sample.
    REQUIRE(det.log.size() == leaky.size());
}

TEST_CASE("short streams are rejected") {
    sim::PipelineSpec spec;
    const auto base = sim::synth_stream(spec, 10, sim::OperatingProfile::standard(),
                                        sim::NoiseModel::none(), 4);
    ml::RegressorModel dummy;
    DetectorConfig config;
    config.threshold = 0.1;
    REQUIRE_THROWS_AS(run_detection(base, dummy, config), data_error);
}
