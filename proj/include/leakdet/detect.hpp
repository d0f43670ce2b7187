#pragma once

// Streaming residual analysis.  Each sample's absolute residual between the
// metered flow and the observer prediction is compared against the
// threshold; the leak index exp(-1/(1+a^2)) is computed from a = 1 + the
// number of exceedances among the previous `window` samples (the sample
// under test is pushed into the window afterwards).  The trip counter grows
// while the index stays above the trip level and an alarm latches once the
// counter exceeds the persistence; with the defaults (window 30, trip 0.99,
// persistence 3) no alarm can fire earlier than twelve samples after
// residuals begin exceeding the threshold.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <vector>

#include "leakdet/common.hpp"
#include "leakdet/dataio.hpp"
#include "leakdet/model.hpp"

namespace leakdet::detect {

struct DetectorConfig {
    double threshold = 0.0;   // flow units; default_threshold(model MAE)
    int window = 30;          // one hour at 2-minute cadence
    double index_trip = 0.99;
    int persistence = 3;      // further tripped samples before the alarm

    void validate() const {
        if (!(threshold > 0)) throw config_error("detector: threshold must be positive");
        if (window < 1) throw config_error("detector: window must be >= 1");
        if (!(index_trip > 0 && index_trip < 1))
            throw config_error("detector: index trip must lie in (0, 1)");
        if (persistence < 1) throw config_error("detector: persistence must be >= 1");
    }
};

inline double default_threshold(double model_mae) { return model_mae + 0.01; }

inline double leak_index(double a) {
    if (a < 0) throw std::domain_error("leak_index: a must be non-negative");
    return std::exp(-1.0 / (1.0 + a * a));
}

inline double estimate_leak_size(double observed, double predicted) {
    if (observed == 0.0)
        throw std::domain_error("estimate_leak_size: observed flow is zero, size undefined");
    return std::fabs(observed - predicted) * 100.0 / observed;
}

inline double localize(double dev_inlet, double dev_outlet) {
    if (dev_inlet < 0 || dev_outlet < 0)
        throw std::domain_error("localize: deviations must be non-negative");
    if (dev_inlet == 0 && dev_outlet == 0)
        throw std::domain_error("localize: both deviations are zero, location undefined");
    return dev_outlet / (dev_outlet + dev_inlet);
}

// Appendix accounting: an alarm whose best-index ordinal is i on a stream
// with onset o and 2-minute cadence is reported as (i - (o + 2)) * 2 minutes.
inline double minutes_to_detect(std::size_t alarm_ordinal, std::size_t onset_index,
                                double sampling_minutes) {
    return (double(alarm_ordinal) - double(onset_index) - 2.0) * sampling_minutes;
}

struct AlarmEvent {
    std::size_t ordinal = 0;       // best-index ordinal
    double leak_index_value = 0.0;
    double estimated_size_pct = 0.0;        // outlet-channel estimate
    double estimated_total_size_pct = 0.0;  // both channels when available
    double inlet_pressure = 0.0;
    double outlet_pressure = 0.0;
    std::optional<double> estimated_location;  // needs the inlet flow channel
};

struct DetectorState {
    std::vector<std::uint8_t> flags;  // ring buffer of the previous `window`
    std::size_t pos = 0;
    int in_window = 0;
    int filled = 0;
    int counter = 0;
    double index = 0.0;
    double best_index = -1.0;
    std::size_t best_ordinal = 0;
    std::size_t ordinal = 0;
    bool latched = false;
    std::size_t skipped = 0;

    explicit DetectorState(int window = 30) : flags(std::size_t(window), 0) {}

    void reset() {
        std::fill(flags.begin(), flags.end(), 0);
        pos = 0;
        in_window = 0;
        filled = 0;
        counter = 0;
        index = 0.0;
        best_index = -1.0;
        best_ordinal = 0;
        ordinal = 0;
        latched = false;
        skipped = 0;
    }
};

struct StepOutcome {
    bool skipped = false;
    bool flag = false;
    double residual = 0.0;
    double index = 0.0;
    int counter = 0;
    bool alarm = false;  // alarm fired at this step
};

inline StepOutcome step(DetectorState& state, double observed, double predicted,
                        const DetectorConfig& config) {
    StepOutcome out;
    if (!std::isfinite(observed) || !std::isfinite(predicted)) {
        ++state.skipped;
        ++state.ordinal;
        out.skipped = true;
        out.index = state.index;
        out.counter = state.counter;
        return out;
    }
    out.residual = std::fabs(observed - predicted);
    out.flag = out.residual > config.threshold;

    const double a = 1.0 + double(state.in_window);
    state.index = leak_index(a);
    out.index = state.index;
    if (state.index > state.best_index) {
        state.best_index = state.index;
        state.best_ordinal = state.ordinal;
    }
    if (state.index > config.index_trip)
        ++state.counter;
    else
        state.counter = 0;
    out.counter = state.counter;

    if (!state.latched && state.counter > config.persistence) {
        state.latched = true;
        out.alarm = true;
    }

    // Push the current flag; the oldest one leaves the window.
    if (state.filled == config.window) state.in_window -= state.flags[state.pos];
    state.flags[state.pos] = out.flag ? 1 : 0;
    state.in_window += out.flag ? 1 : 0;
    state.pos = (state.pos + 1) % std::size_t(config.window);
    if (state.filled < config.window) ++state.filled;
    ++state.ordinal;
    return out;
}

struct DetectionRow {
    std::size_t ordinal = 0;
    double residual = 0.0;
    bool flag = false;
    double index = 0.0;
    int counter = 0;
    bool skipped = false;
};

struct DetectionResult {
    std::vector<DetectionRow> log;
    std::optional<AlarmEvent> alarm;
    std::size_t skipped = 0;
};

// Runs the detector over a telemetry stream with an outlet-flow observer and,
// optionally, an inlet-flow observer for localization.  At most one latched
// alarm per run.
inline DetectionResult run_detection(const data::Telemetry& stream,
                                     const ml::RegressorModel& outlet_model,
                                     const DetectorConfig& config,
                                     const ml::RegressorModel* inlet_model = nullptr) {
    config.validate();
    if (stream.size() < std::size_t(config.window))
        throw data_error("run_detection: stream of " + std::to_string(stream.size()) +
                         " samples is shorter than the window of " +
                         std::to_string(config.window));

    const auto features = data::make_features(stream, data::FlowChannel::outlet);
    const auto predicted = outlet_model.predict(features.x);
    std::vector<double> predicted_inlet;
    const bool has_inlet_channel =
        inlet_model != nullptr &&
        std::all_of(stream.begin(), stream.end(),
                    [](const data::TelemetryRecord& r) { return bool(r.inlet_flowrate); });
    if (has_inlet_channel) predicted_inlet = inlet_model->predict(features.x);

    DetectionResult result;
    result.log.reserve(stream.size());
    DetectorState state(config.window);
    for (std::size_t i = 0; i < stream.size(); ++i) {
        const auto outcome = step(state, stream[i].flowrate, predicted[i], config);
        DetectionRow row{stream[i].index, outcome.residual, outcome.flag,
                         outcome.index,   outcome.counter,  outcome.skipped};
        result.log.push_back(row);
        if (outcome.alarm) {
            AlarmEvent ev;
            ev.ordinal = state.best_ordinal;
            ev.leak_index_value = state.best_index;
            const auto& rec = stream[state.best_ordinal];
            ev.inlet_pressure = rec.inlet_pressure;
            ev.outlet_pressure = rec.outlet_pressure;
            const double dev_out = std::fabs(rec.flowrate - predicted[state.best_ordinal]);
            ev.estimated_size_pct =
                rec.flowrate != 0.0 ? estimate_leak_size(rec.flowrate, predicted[state.best_ordinal])
                                    : std::numeric_limits<double>::quiet_NaN();
            if (has_inlet_channel) {
                const double dev_in =
                    std::fabs(*rec.inlet_flowrate - predicted_inlet[state.best_ordinal]);
                ev.estimated_total_size_pct =
                    rec.flowrate != 0.0 ? (dev_out + dev_in) * 100.0 / rec.flowrate
                                        : std::numeric_limits<double>::quiet_NaN();
                if (dev_in > 0 || dev_out > 0) ev.estimated_location = localize(dev_in, dev_out);
            } else {
                ev.estimated_total_size_pct = ev.estimated_size_pct;
            }
            result.alarm = ev;
        }
    }
    result.skipped = state.skipped;
    return result;
}

inline std::string format_alarm_block(const AlarmEvent& ev, std::size_t onset_index,
                                      double sampling_minutes) {
    std::ostringstream os;
    auto r2 = [](double v) { return std::round(v * 100.0) / 100.0; };
    os << "LEAK\n";
    os << "leak index, percentage leak, Inlet Pressure, Outlet Pressure, minutes to detect: [";
    os << r2(ev.leak_index_value) << ", " << r2(ev.estimated_size_pct) << ", "
       << r2(ev.inlet_pressure) << ", " << r2(ev.outlet_pressure) << ", "
       << minutes_to_detect(ev.ordinal, onset_index, sampling_minutes) << "]";
    if (ev.estimated_location)
        os << "\nestimated fractional location: " << r2(*ev.estimated_location);
    return os.str();
}

}  // namespace leakdet::detect
