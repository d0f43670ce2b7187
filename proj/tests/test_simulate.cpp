#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "leakdet/dataio.hpp"
#include "leakdet/simulate.hpp"

using namespace leakdet;
using namespace leakdet::sim;

namespace {

// Two-segment oracle: with the leak at fractional position l carrying
// (1+q) Q upstream and Q downstream, segment flow constants scale as
// c/sqrt(length).  Solving for the outlet pressure and backing out the
// equivalent single-segment constant gives the implied correction factor.
double two_segment_factor(double q, double l, double p1, double flow, double c) {
    const double cu = c / std::sqrt(l);
    const double cd = c / std::sqrt(1.0 - l);
    const double pm2 = p1 * p1 - std::pow(flow * (1.0 + q) / cu, 2.0);
    const double p22 = pm2 - std::pow(flow / cd, 2.0);
    const double dp2 = p1 * p1 - p22;
    return flow / (c * std::sqrt(dp2));
}

}  // namespace

TEST_CASE("leak factor identity and reference value") {
    REQUIRE(leak_factor(0.0, 0.7) == 1.0);
    REQUIRE(leak_factor(0.2, 0.0) == 1.0);
    REQUIRE(leak_factor(0.1, 0.5) == Catch::Approx(0.9513).margin(1e-12));
    REQUIRE_THROWS_AS(leak_factor(-0.1, 0.5), std::domain_error);
    REQUIRE_THROWS_AS(leak_factor(0.1, -0.5), std::domain_error);
}

TEST_CASE("leak factor equals the two-segment oracle over a 50x50 grid") {
    const double p1 = 1317.6, flow = 8.54, c = 0.0244;
    for (int i = 1; i <= 50; ++i) {
        for (int j = 1; j <= 50; ++j) {
            const double q = 0.5 * i / 50.0;
            const double l = j / 51.0;
            const double expected = two_segment_factor(q, l, p1, flow, c);
            REQUIRE(leak_factor_exact(q, l) == Catch::Approx(expected).margin(1e-6));
        }
    }
}

TEST_CASE("leak factor is strictly decreasing in each argument") {
    double prev = 2.0;
    for (int i = 1; i <= 20; ++i) {
        const double f = leak_factor_exact(0.02 * i, 0.5);
        REQUIRE(f < prev);
        prev = f;
    }
    prev = 2.0;
    for (int j = 1; j <= 20; ++j) {
        const double f = leak_factor_exact(0.1, 0.045 * j);
        REQUIRE(f < prev);
        prev = f;
    }
}

TEST_CASE("inject_leak reproduces the reference operating point") {
    data::TelemetryRecord r;
    r.index = 0;
    r.inlet_pressure = 1317.60;
    r.flowrate = 8.54;
    r.outlet_pressure = 1270.0;
    r.reference_outlet_pressure = 1270.0;
    PipelineSpec spec;
    // F_l = 1 scenario: outlet pressure from the flow equation alone.
    const double p2 = std::sqrt(1317.60 * 1317.60 - std::pow(8.54 / 0.0244, 2.0));
    REQUIRE(p2 == Catch::Approx(1270.2637).margin(1e-3));
    REQUIRE(std::fabs(p2 - 1269.96) < 1.0);
}

TEST_CASE("inject_leak leaves the stream untouched for a zero-size scenario") {
    PipelineSpec spec;
    auto stream = synth_stream(spec, 60, OperatingProfile::standard(), NoiseModel::none(), 7);
    const auto out = inject_leak(stream, spec, LeakScenario{0.0, 0.5, 30});
    for (std::size_t i = 0; i < stream.size(); ++i) {
        REQUIRE(out[i].outlet_pressure == stream[i].outlet_pressure);
        REQUIRE(out[i].inlet_flowrate.value() == stream[i].inlet_flowrate.value());
    }
}

TEST_CASE("inject_leak preserves pre-onset records and lowers post-onset pressure") {
    PipelineSpec spec;
    auto stream = synth_stream(spec, 80, OperatingProfile::standard(), NoiseModel::none(), 3);
    const auto out = inject_leak(stream, spec, LeakScenario{0.05, 0.5, 30});
    for (std::size_t i = 0; i < 30; ++i)
        REQUIRE(out[i].outlet_pressure == stream[i].outlet_pressure);
    for (std::size_t i = 30; i < 80; ++i) {
        REQUIRE(out[i].outlet_pressure < stream[i].outlet_pressure);
        REQUIRE(out[i].flowrate == stream[i].flowrate);
        REQUIRE(out[i].inlet_flowrate.value() ==
                Catch::Approx(stream[i].inlet_flowrate.value() + 0.05 * stream[i].flowrate));
    }
}

TEST_CASE("larger leaks depress the injected outlet pressure monotonically") {
    PipelineSpec spec;
    auto stream = synth_stream(spec, 40, OperatingProfile::constant(8.54),
                               NoiseModel::none(), 5);
    double prev = 1e9;
    for (double q : {0.01, 0.05, 0.1, 0.2}) {
        const auto out = inject_leak(stream, spec, LeakScenario{q, 0.5, 30});
        REQUIRE(out[35].outlet_pressure < prev);
        prev = out[35].outlet_pressure;
    }
}

TEST_CASE("an oversized leak raises scenario_infeasible naming the record") {
    PipelineSpec spec;
    spec.flow_constant = 0.0244;
    auto stream = synth_stream(spec, 40, OperatingProfile::constant(18.0),
                               NoiseModel::none(), 5);
    // Make the operating point marginal so F_l pushes it past the limit.
    for (auto& r : stream) r.inlet_pressure = 760.0;
    for (auto& r : stream) {
        r.outlet_pressure = 100.0;
        r.reference_outlet_pressure = 100.0;
    }
    REQUIRE_THROWS_AS(inject_leak(stream, spec, LeakScenario{0.3, 0.9, 30}),
                      scenario_infeasible);
}

TEST_CASE("noiseless constant-profile streams satisfy the flow equation exactly") {
    PipelineSpec spec;
    const auto stream =
        synth_stream(spec, 50, OperatingProfile::constant(8.54), NoiseModel::none(), 11);
    for (const auto& r : stream) {
        const double q = spec.flow_constant *
                         std::sqrt(r.inlet_pressure * r.inlet_pressure -
                                   r.outlet_pressure * r.outlet_pressure);
        REQUIRE(q == Catch::Approx(r.flowrate).margin(1e-9));
    }
    REQUIRE(flow_equation_error(stream, spec) < 1e-9);
}

TEST_CASE("default stream statistics track the reference pipeline") {
    PipelineSpec spec;
    const auto stream =
        synth_stream(spec, 21000, OperatingProfile::standard(), NoiseModel{}, 42);
    double p1 = 0, t1 = 0, t2 = 0, q = 0;
    for (const auto& r : stream) {
        p1 += r.inlet_pressure;
        t1 += r.inlet_temperature;
        t2 += r.outlet_temperature;
        q += r.flowrate;
    }
    const double n = double(stream.size());
    REQUIRE(p1 / n == Catch::Approx(1317.60).epsilon(0.01));
    REQUIRE(t1 / n == Catch::Approx(90.71).epsilon(0.01));
    REQUIRE(t2 / n == Catch::Approx(83.56).epsilon(0.01));
    REQUIRE(q / n == Catch::Approx(8.54).epsilon(0.01));
}

TEST_CASE("same seed gives byte-identical streams") {
    PipelineSpec spec;
    const auto a = synth_stream(spec, 500, OperatingProfile::standard(), NoiseModel{}, 9);
    const auto b = synth_stream(spec, 500, OperatingProfile::standard(), NoiseModel{}, 9);
    std::ostringstream sa, sb;
    data::save_telemetry(sa, a);
    data::save_telemetry(sb, b);
    REQUIRE(sa.str() == sb.str());

    const auto c = synth_stream(spec, 500, OperatingProfile::standard(), NoiseModel{}, 10);
    std::ostringstream sc;
    data::save_telemetry(sc, c);
    REQUIRE(sa.str() != sc.str());
}

TEST_CASE("calibrate_flow_constant recovers the generating constant") {
    PipelineSpec spec;
    const auto clean =
        synth_stream(spec, 2000, OperatingProfile::standard(), NoiseModel::none(), 21);
    const auto cal = calibrate_flow_constant(clean);
    REQUIRE(cal.flow_constant == Catch::Approx(0.0244).margin(1e-9));
    REQUIRE(cal.r2 > 0.999999);

    // With noise, recovery stays within half a percent.
    const auto noisy =
        synth_stream(spec, 2000, OperatingProfile::standard(), NoiseModel{}.scaled(10.0), 22);
    const auto cal2 = calibrate_flow_constant(noisy);
    REQUIRE(cal2.flow_constant == Catch::Approx(0.0244).epsilon(0.005));
}

TEST_CASE("calibration requires enough usable records") {
    PipelineSpec spec;
    const auto stream =
        synth_stream(spec, 50, OperatingProfile::standard(), NoiseModel::none(), 2);
    REQUIRE_THROWS_AS(calibrate_flow_constant(stream), data_error);
    data::Telemetry inverted = stream;
    for (auto& r : inverted) std::swap(r.inlet_pressure, r.outlet_pressure);
    REQUIRE_THROWS_AS(calibrate_flow_constant(inverted), data_error);
}
