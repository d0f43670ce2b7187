#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "leakdet/bench.hpp"
#include "leakdet/grid_search.hpp"

using namespace leakdet;
using namespace leakdet::bench;

namespace {

// One tuned-ish model shared by the bench tests (cheap fixed cell).
struct Fixture {
    sim::PipelineSpec spec;
    ml::TunedObserver observer;
    detect::DetectorConfig config;
    data::Telemetry base;

    Fixture() {
        const auto stream = sim::synth_stream(spec, 4000, sim::OperatingProfile::standard(),
                                              sim::NoiseModel::none(), 7001);
        const auto [train, test] = data::split(stream, 0.30, 12);
        std::vector<ml::GridCell> grid{{{"n_estimators", 120}, {"learning_rate", 0.1}}};
        observer = ml::tune_observer(train, test, ml::Family::gradient_boosting, 5,
                                     ThreadPool(2), data::FlowChannel::outlet, &grid, 5);
        config.threshold = detect::default_threshold(observer.report.mae_test);
        base = sim::synth_stream(spec, 400, sim::OperatingProfile::standard(),
                                 sim::NoiseModel::none(), 9001);
    }
};

Fixture& fixture() {
    static Fixture f;
    return f;
}

}  // namespace

TEST_CASE("zero-size control row yields no alarms") {
    auto& f = fixture();
    SweepGrid grid;
    grid.sizes = {0.0};
    grid.locations = {0.5};
    Observers obs{&f.observer.model, &f.observer.model};
    const auto sweep = run_sweep(obs, grid, f.spec, f.base, f.config);
    REQUIRE(sweep.cells.size() == 1);
    REQUIRE(sweep.cells[0].status == CellStatus::not_detected);
}

TEST_CASE("sweep accounts for every cell exactly once") {
    auto& f = fixture();
    SweepGrid grid;
    grid.sizes = {0.01, 0.05, 0.1};
    grid.locations = {0.2, 0.5, 0.8};
    Observers obs{&f.observer.model, &f.observer.model};
    const auto sweep = run_sweep(obs, grid, f.spec, f.base, f.config, ThreadPool(2));
    REQUIRE(sweep.cells.size() == 9);
    std::size_t accounted = 0;
    for (const auto& agg : sweep.per_size)
        accounted += agg.detected + agg.not_detected + agg.infeasible;
    REQUIRE(accounted == 9);
    // Detected cells must carry sane minutes.
    for (const auto& c : sweep.cells)
        if (c.status == CellStatus::detected) {
            REQUIRE(c.minutes >= 0.0);
            REQUIRE(c.minutes <= grid.budget_minutes);
        }
}

TEST_CASE("mean detection time is non-increasing in leak size on clean data") {
    auto& f = fixture();
    SweepGrid grid;  // default sizes and locations
    Observers obs{&f.observer.model, &f.observer.model};
    const auto sweep = run_sweep(obs, grid, f.spec, f.base, f.config, ThreadPool(2));
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& agg : sweep.per_size) {
        REQUIRE(agg.censored_mean_minutes <= prev + 1e-9);
        prev = agg.censored_mean_minutes;
    }
}

TEST_CASE("sweeps are reproducible") {
    auto& f = fixture();
    SweepGrid grid;
    grid.sizes = {0.05};
    Observers obs{&f.observer.model, &f.observer.model};
    const auto a = run_sweep(obs, grid, f.spec, f.base, f.config, ThreadPool(1));
    const auto b = run_sweep(obs, grid, f.spec, f.base, f.config, ThreadPool(2));
    REQUIRE(a.cells.size() == b.cells.size());
    for (std::size_t i = 0; i < a.cells.size(); ++i) {
        REQUIRE(a.cells[i].status == b.cells[i].status);
        REQUIRE(a.cells[i].minutes == b.cells[i].minutes);
    }
}

TEST_CASE("localization error aggregates detected cells per size") {
    auto& f = fixture();
    SweepGrid grid;
    grid.sizes = {0.05, 0.1};
    Observers obs{&f.observer.model, &f.observer.model};
    const auto sweep = run_sweep(obs, grid, f.spec, f.base, f.config, ThreadPool(2));
    const auto loc = localization_error(sweep);
    REQUIRE(loc.size() == 2);
    for (double err : loc) {
        REQUIRE(std::isfinite(err));
        REQUIRE(err < 30.0);
    }
    // Definition check: estimate 0.55 against truth 0.5 is a 10% error.
    ModelSweep manual;
    manual.grid.sizes = {0.05};
    manual.grid.locations = {0.5};
    CellResult cell;
    cell.size = 0.05;
    cell.location = 0.5;
    cell.status = CellStatus::detected;
    cell.estimated_location = 0.55;
    manual.cells.push_back(cell);
    manual.per_size = aggregate_by_size(manual.grid, manual.cells);
    REQUIRE(localization_error(manual)[0] == Catch::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("rttm reference rows are the fixed literature constants") {
    const auto& ref = rttm_reference();
    REQUIRE(ref.kMinutes[0] == 173.0);
    REQUIRE(ref.kMinutes[1] == 100.0);
    REQUIRE(ref.kMinutes[2] == 36.0);
    REQUIRE(ref.kMinutes[3] == 32.0);
    REQUIRE(ref.kLocalizationPct[2] == 7.0);
    static_assert(std::is_same_v<decltype(RttmReference::kMinutes), const double[4]>);
}

TEST_CASE("identical models share ranks and totals") {
    SarrEntry a;
    a.model_label = "A";
    a.min_detectable_size = 0.01;
    a.time_at_min_size = 100;
    a.accuracy_error = 12;
    a.size_error_pct = 5;
    a.false_alarms = 0;
    a.coverage = 0.8;
    a.degradation = 0.2;
    SarrEntry b = a;
    b.model_label = "B";
    const auto rows = sarr_rank({a, b});
    REQUIRE(rows[0].total == rows[1].total);
    REQUIRE(rows[0].sensitivity == 1);
    REQUIRE(rows[1].sensitivity == 1);
}

TEST_CASE("rank totals are invariant under a common time rescaling") {
    std::vector<SarrEntry> entries(3);
    const char* names[3] = {"A", "B", "C"};
    const double times[3] = {50, 100, 200};
    const double sizes[3] = {0.001, 0.01, 0.01};
    for (int i = 0; i < 3; ++i) {
        entries[i].model_label = names[i];
        entries[i].min_detectable_size = sizes[i];
        entries[i].time_at_min_size = times[i];
        entries[i].accuracy_error = 10.0 + i;
        entries[i].false_alarms = 0;
        entries[i].coverage = 0.5;
        entries[i].degradation = 0.1 * (3 - i);
    }
    const auto before = sarr_rank(entries);
    for (auto& e : entries) e.time_at_min_size *= 7.5;
    const auto after = sarr_rank(entries);
    for (std::size_t i = 0; i < before.size(); ++i)
        REQUIRE(before[i].total == after[i].total);
}

TEST_CASE("sarr_rank needs at least two models") {
    REQUIRE_THROWS_AS(sarr_rank({SarrEntry{}}), config_error);
}

TEST_CASE("fragments round-trip through JSON") {
    auto& f = fixture();
    SweepGrid grid;
    grid.sizes = {0.05};
    grid.locations = {0.3, 0.7};
    Observers obs{&f.observer.model, &f.observer.model};
    auto sweep = run_sweep(obs, grid, f.spec, f.base, f.config);
    sweep.model_label = "GB";
    const auto j = sweep_to_json(sweep);
    const auto back = sweep_from_json(j);
    REQUIRE(back.model_label == sweep.model_label);
    REQUIRE(back.cells.size() == sweep.cells.size());
    for (std::size_t i = 0; i < sweep.cells.size(); ++i) {
        REQUIRE(back.cells[i].status == sweep.cells[i].status);
        REQUIRE(back.cells[i].minutes == sweep.cells[i].minutes);
    }
}

TEST_CASE("report tables render with reference columns") {
    auto& f = fixture();
    SweepGrid grid;
    Observers obs{&f.observer.model, &f.observer.model};
    auto sweep = run_sweep(obs, grid, f.spec, f.base, f.config, ThreadPool(2));
    sweep.model_label = "GB";
    const auto time_table = render_time_table({sweep});
    REQUIRE_THAT(time_table, Catch::Matchers::ContainsSubstring("RTTM"));
    REQUIRE_THAT(time_table, Catch::Matchers::ContainsSubstring("173"));
    const auto loc_table = render_localization_table({sweep});
    REQUIRE_THAT(loc_table, Catch::Matchers::ContainsSubstring("n/a"));
    const auto kv = render_kv_summary({sweep});
    REQUIRE_THAT(kv, Catch::Matchers::ContainsSubstring("GB.size0.05"));
}

TEST_CASE("false alarm counter stays at zero on clean streams") {
    auto& f = fixture();
    std::vector<data::Telemetry> clean;
    for (int i = 0; i < 3; ++i)
        clean.push_back(sim::synth_stream(f.spec, 600, sim::OperatingProfile::standard(),
                                          sim::NoiseModel{}, derive_seed(55, i)));
    REQUIRE(count_false_alarms(f.observer.model, clean, f.config) == 0);
}
