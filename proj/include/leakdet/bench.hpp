#pragma once

// SARR evaluation harness: sweeps leak sizes x locations over a no-leak base
// stream, aggregates time-to-detect and localization error per size, counts
// false alarms on clean streams, and ranks the models.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "leakdet/common.hpp"
#include "leakdet/detect.hpp"
#include "leakdet/model.hpp"
#include "leakdet/simulate.hpp"

namespace leakdet::bench {

struct SweepGrid {
    std::vector<double> sizes = {0.001, 0.01, 0.05, 0.1};
    std::vector<double> locations = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    std::size_t onset_index = 30;
    double budget_minutes = 240.0;
    std::uint64_t master_seed = 0;

    void validate() const {
        if (sizes.empty() || locations.empty())
            throw config_error("sweep grid: sizes and locations must be non-empty");
    }
};

enum class CellStatus { detected, not_detected, infeasible };

struct CellResult {
    double size = 0.0;
    double location = 0.0;
    std::uint64_t seed = 0;
    CellStatus status = CellStatus::not_detected;
    double minutes = 0.0;                      // valid when detected
    double estimated_size_pct = 0.0;           // outlet channel
    double estimated_total_size_pct = 0.0;     // both channels
    std::optional<double> estimated_location;
};

struct SizeAggregate {
    double size = 0.0;
    std::size_t detected = 0;
    std::size_t not_detected = 0;
    std::size_t infeasible = 0;
    double mean_minutes = std::numeric_limits<double>::quiet_NaN();  // detected cells only
    double censored_mean_minutes = 0.0;  // undetected cells contribute the budget
    double coverage = 0.0;               // detected / feasible
};

struct ModelSweep {
    std::string model_label;
    SweepGrid grid;
    std::vector<CellResult> cells;
    std::vector<SizeAggregate> per_size;
};

// Observers used by a sweep: the outlet model always, the inlet model when
// the stream carries the second flow channel.
struct Observers {
    const ml::RegressorModel* outlet = nullptr;
    const ml::RegressorModel* inlet = nullptr;  // may alias outlet
};

inline std::vector<SizeAggregate> aggregate_by_size(const SweepGrid& grid,
                                                    const std::vector<CellResult>& cells) {
    std::vector<SizeAggregate> out;
    for (double size : grid.sizes) {
        SizeAggregate agg;
        agg.size = size;
        double sum = 0.0, censored = 0.0;
        std::size_t feasible = 0;
        for (const auto& c : cells) {
            if (c.size != size) continue;
            if (c.status == CellStatus::infeasible) {
                ++agg.infeasible;
                continue;
            }
            ++feasible;
            if (c.status == CellStatus::detected) {
                ++agg.detected;
                sum += c.minutes;
                censored += c.minutes;
            } else {
                ++agg.not_detected;
                censored += grid.budget_minutes;
            }
        }
        if (agg.detected > 0) agg.mean_minutes = sum / double(agg.detected);
        agg.censored_mean_minutes = feasible > 0 ? censored / double(feasible) : 0.0;
        agg.coverage = feasible > 0 ? double(agg.detected) / double(feasible) : 0.0;
        out.push_back(agg);
    }
    return out;
}

inline ModelSweep run_sweep(const Observers& observers, const SweepGrid& grid,
                            const sim::PipelineSpec& spec, const data::Telemetry& base_stream,
                            const detect::DetectorConfig& config,
                            const ThreadPool& pool = ThreadPool(1)) {
    grid.validate();
    spec.validate();
    ModelSweep sweep;
    sweep.grid = grid;
    sweep.cells.resize(grid.sizes.size() * grid.locations.size());

    pool.run_indexed(sweep.cells.size(), [&](std::size_t idx) {
        const std::size_t si = idx / grid.locations.size();
        const std::size_t li = idx % grid.locations.size();
        CellResult cell;
        cell.size = grid.sizes[si];
        cell.location = grid.locations[li];
        cell.seed = derive_seed(grid.master_seed, si, li);
        sim::LeakScenario scenario{cell.size, cell.location, grid.onset_index};
        try {
            const auto injected = sim::inject_leak(base_stream, spec, scenario);
            const auto det =
                detect::run_detection(injected, *observers.outlet, config, observers.inlet);
            if (det.alarm) {
                const double minutes = detect::minutes_to_detect(
                    det.alarm->ordinal, grid.onset_index, spec.sampling_minutes);
                if (minutes <= grid.budget_minutes) {
                    cell.status = CellStatus::detected;
                    cell.minutes = minutes;
                    cell.estimated_size_pct = det.alarm->estimated_size_pct;
                    cell.estimated_total_size_pct = det.alarm->estimated_total_size_pct;
                    cell.estimated_location = det.alarm->estimated_location;
                } else {
                    cell.status = CellStatus::not_detected;
                }
            } else {
                cell.status = CellStatus::not_detected;
            }
        } catch (const scenario_infeasible&) {
            cell.status = CellStatus::infeasible;
        }
        sweep.cells[idx] = cell;
    });

    sweep.per_size = aggregate_by_size(grid, sweep.cells);
    return sweep;
}

// Mean absolute localization error per size, percent of the true fractional
// location; NaN where no detected cell carries a location estimate.
inline std::vector<double> localization_error(const ModelSweep& sweep) {
    std::vector<double> out;
    for (double size : sweep.grid.sizes) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& c : sweep.cells) {
            if (c.size != size || c.status != CellStatus::detected || !c.estimated_location)
                continue;
            sum += std::fabs(*c.estimated_location - c.location) / c.location * 100.0;
            ++n;
        }
        out.push_back(n > 0 ? sum / double(n) : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

// Mean absolute size-estimate error per size, percent of the true size.
inline std::vector<double> size_error(const ModelSweep& sweep) {
    std::vector<double> out;
    for (double size : sweep.grid.sizes) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& c : sweep.cells) {
            if (c.size != size || c.status != CellStatus::detected) continue;
            sum += std::fabs(c.estimated_total_size_pct - size * 100.0) / (size * 100.0) * 100.0;
            ++n;
        }
        out.push_back(n > 0 ? sum / double(n) : std::numeric_limits<double>::quiet_NaN());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Literature reference rows (real-time transient model).  Fixed constants
// for side-by-side report columns; never recomputed.
// ---------------------------------------------------------------------------

struct RttmReference {
    // Row order matches the default sweep sizes 0.1%, 1%, 5%, 10%.
    static constexpr double kSizesPct[4] = {0.1, 1.0, 5.0, 10.0};
    static constexpr double kMinutes[4] = {173.0, 100.0, 36.0, 32.0};
    // Localization error (%) for 1%, 5%, 10% leaks; 0.1% is not available.
    static constexpr double kLocalizationPct[3] = {10.0, 8.0, 7.0};
};

inline const RttmReference& rttm_reference() {
    static const RttmReference ref{};
    return ref;
}

// ---------------------------------------------------------------------------
// SARR ranking.  Each metric ranks ascending (lower is better) with ties
// sharing the lower rank; the total is the sum across the four metrics.
// ---------------------------------------------------------------------------

struct SarrEntry {
    std::string model_label;
    // Sensitivity: smallest detected size, then censored time at that size.
    double min_detectable_size = std::numeric_limits<double>::infinity();
    double time_at_min_size = std::numeric_limits<double>::infinity();
    // Accuracy: mean localization error (then size error as tiebreak).
    double accuracy_error = std::numeric_limits<double>::infinity();
    double size_error_pct = std::numeric_limits<double>::infinity();
    // Reliability: false alarms ascending, then coverage descending.
    double false_alarms = 0.0;
    double coverage = 0.0;
    // Robustness: relative degradation of censored detection time when the
    // channel noise doubles.
    double degradation = 0.0;
};

struct SarrRow {
    std::string model_label;
    int sensitivity = 0;
    int accuracy = 0;
    int reliability = 0;
    int robustness = 0;
    int total = 0;
};

namespace rank_detail {

// Ranks with ties sharing the lower rank: keys sorted ascending; equal keys
// receive the rank of their first occurrence.
template <typename Key>
std::vector<int> rank_ascending(const std::vector<Key>& keys) {
    std::vector<std::size_t> order(keys.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
    std::vector<int> ranks(keys.size(), 0);
    int rank = 0;
    for (std::size_t pos = 0; pos < order.size(); ++pos) {
        if (pos == 0 || keys[order[pos]] != keys[order[pos - 1]]) rank = int(pos) + 1;
        ranks[order[pos]] = rank;
    }
    return ranks;
}

}  // namespace rank_detail

inline std::vector<SarrRow> sarr_rank(const std::vector<SarrEntry>& entries) {
    if (entries.size() < 2) throw config_error("sarr_rank: need at least two models");
    using K2 = std::pair<double, double>;
    std::vector<K2> sens, acc, rel, rob;
    for (const auto& e : entries) {
        sens.emplace_back(e.min_detectable_size, e.time_at_min_size);
        acc.emplace_back(e.accuracy_error, e.size_error_pct);
        rel.emplace_back(e.false_alarms, -e.coverage);
        rob.emplace_back(e.degradation, 0.0);
    }
    const auto rs = rank_detail::rank_ascending(sens);
    const auto ra = rank_detail::rank_ascending(acc);
    const auto rr = rank_detail::rank_ascending(rel);
    const auto rb = rank_detail::rank_ascending(rob);
    std::vector<SarrRow> rows;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        SarrRow row;
        row.model_label = entries[i].model_label;
        row.sensitivity = rs[i];
        row.accuracy = ra[i];
        row.reliability = rr[i];
        row.robustness = rb[i];
        row.total = rs[i] + ra[i] + rr[i] + rb[i];
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Report rendering: plain-text tables plus a machine-readable key=value
// summary for CI assertions.
// ---------------------------------------------------------------------------

inline std::string format_minutes(const SizeAggregate& agg) {
    if (agg.detected == 0) return "N/A";
    std::ostringstream os;
    os.precision(1);
    os << std::fixed << agg.mean_minutes;
    if (agg.not_detected > 0) os << "*";
    return os.str();
}

inline std::string render_time_table(const std::vector<ModelSweep>& sweeps) {
    std::ostringstream os;
    os << "Average time to detection (minutes) per leak size\n";
    os << "Leak Size (%)";
    for (const auto& s : sweeps) os << '\t' << s.model_label;
    os << "\tRTTM\n";
    if (sweeps.empty()) return os.str();
    const auto& sizes = sweeps[0].grid.sizes;
    const auto& ref = rttm_reference();
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        os << sizes[i] * 100.0;
        for (const auto& s : sweeps) os << '\t' << format_minutes(s.per_size[i]);
        bool have_ref = false;
        for (std::size_t k = 0; k < 4; ++k)
            if (std::fabs(RttmReference::kSizesPct[k] - sizes[i] * 100.0) < 1e-9) {
                os << '\t' << ref.kMinutes[k];
                have_ref = true;
            }
        if (!have_ref) os << "\t-";
        os << '\n';
    }
    os << "(* some locations not detected within the budget; mean over detected cells)\n";
    return os.str();
}

inline std::string render_localization_table(const std::vector<ModelSweep>& sweeps) {
    std::ostringstream os;
    os << "Average leak localization error (% of true location)\n";
    os << "Leak Size (%)";
    for (const auto& s : sweeps) os << '\t' << s.model_label;
    os << "\tRTTM\n";
    if (sweeps.empty()) return os.str();
    const auto& sizes = sweeps[0].grid.sizes;
    std::vector<std::vector<double>> errs;
    for (const auto& s : sweeps) errs.push_back(localization_error(s));
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        os << sizes[i] * 100.0;
        for (std::size_t m = 0; m < sweeps.size(); ++m) {
            if (std::isnan(errs[m][i]))
                os << "\tn/a";
            else {
                os << '\t';
                os.precision(0);
                os << std::fixed << errs[m][i] << '%';
            }
        }
        const double pct = sizes[i] * 100.0;
        if (pct == 1.0)
            os << '\t' << RttmReference::kLocalizationPct[0] << '%';
        else if (pct == 5.0)
            os << '\t' << RttmReference::kLocalizationPct[1] << '%';
        else if (pct == 10.0)
            os << '\t' << RttmReference::kLocalizationPct[2] << '%';
        else
            os << "\tn/a";
        os << '\n';
    }
    return os.str();
}

inline std::string render_sarr_table(const std::vector<SarrRow>& rows) {
    std::ostringstream os;
    os << "SARR ranking (lower is better)\n";
    os << "Model\tSensitivity\tAccuracy\tRobustness\tReliability\tTotal\n";
    for (const auto& r : rows)
        os << r.model_label << '\t' << r.sensitivity << '\t' << r.accuracy << '\t'
           << r.robustness << '\t' << r.reliability << '\t' << r.total << '\n';
    return os.str();
}

inline std::string render_kv_summary(const std::vector<ModelSweep>& sweeps) {
    std::ostringstream os;
    os.precision(10);
    for (const auto& s : sweeps) {
        const auto loc = localization_error(s);
        for (std::size_t i = 0; i < s.grid.sizes.size(); ++i) {
            const auto& agg = s.per_size[i];
            const std::string key = s.model_label + ".size" + std::to_string(s.grid.sizes[i]);
            os << key << ".detected=" << agg.detected << '\n';
            os << key << ".not_detected=" << agg.not_detected << '\n';
            os << key << ".infeasible=" << agg.infeasible << '\n';
            if (agg.detected > 0) os << key << ".mean_minutes=" << agg.mean_minutes << '\n';
            os << key << ".censored_mean_minutes=" << agg.censored_mean_minutes << '\n';
            if (!std::isnan(loc[i])) os << key << ".loc_error_pct=" << loc[i] << '\n';
        }
    }
    return os.str();
}

// Counts alarms raised by a model over a set of clean streams.
inline std::size_t count_false_alarms(const ml::RegressorModel& model,
                                      const std::vector<data::Telemetry>& clean_streams,
                                      const detect::DetectorConfig& config) {
    std::size_t alarms = 0;
    for (const auto& stream : clean_streams) {
        const auto det = detect::run_detection(stream, model, config);
        if (det.alarm) ++alarms;
    }
    return alarms;
}

// ---------------------------------------------------------------------------
// Fragment serialization, used by the CLI to hand sweep results between the
// bench and report commands.
// ---------------------------------------------------------------------------

inline nlohmann::json sweep_to_json(const ModelSweep& sweep) {
    nlohmann::json j;
    j["label"] = sweep.model_label;
    j["grid"] = {{"sizes", sweep.grid.sizes},
                 {"locations", sweep.grid.locations},
                 {"onset", sweep.grid.onset_index},
                 {"budget_minutes", sweep.grid.budget_minutes},
                 {"master_seed", sweep.grid.master_seed}};
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& c : sweep.cells) {
        nlohmann::json jc;
        jc["size"] = c.size;
        jc["location"] = c.location;
        jc["seed"] = c.seed;
        jc["status"] = c.status == CellStatus::detected
                           ? "detected"
                           : (c.status == CellStatus::not_detected ? "not_detected"
                                                                   : "infeasible");
        jc["minutes"] = c.minutes;
        jc["estimated_size_pct"] = c.estimated_size_pct;
        jc["estimated_total_size_pct"] = c.estimated_total_size_pct;
        if (c.estimated_location) jc["estimated_location"] = *c.estimated_location;
        cells.push_back(jc);
    }
    j["cells"] = cells;
    return j;
}

inline ModelSweep sweep_from_json(const nlohmann::json& j) {
    ModelSweep sweep;
    sweep.model_label = j.at("label").get<std::string>();
    sweep.grid.sizes = j.at("grid").at("sizes").get<std::vector<double>>();
    sweep.grid.locations = j.at("grid").at("locations").get<std::vector<double>>();
    sweep.grid.onset_index = j.at("grid").at("onset").get<std::size_t>();
    sweep.grid.budget_minutes = j.at("grid").at("budget_minutes").get<double>();
    sweep.grid.master_seed = j.at("grid").at("master_seed").get<std::uint64_t>();
    for (const auto& jc : j.at("cells")) {
        CellResult c;
        c.size = jc.at("size").get<double>();
        c.location = jc.at("location").get<double>();
        c.seed = jc.at("seed").get<std::uint64_t>();
        const auto status = jc.at("status").get<std::string>();
        c.status = status == "detected"
                       ? CellStatus::detected
                       : (status == "not_detected" ? CellStatus::not_detected
                                                   : CellStatus::infeasible);
        c.minutes = jc.at("minutes").get<double>();
        c.estimated_size_pct = jc.at("estimated_size_pct").get<double>();
        c.estimated_total_size_pct = jc.at("estimated_total_size_pct").get<double>();
        if (jc.contains("estimated_location"))
            c.estimated_location = jc.at("estimated_location").get<double>();
        sweep.cells.push_back(c);
    }
    sweep.per_size = aggregate_by_size(sweep.grid, sweep.cells);
    return sweep;
}

// Builds a SARR entry from a model's sweep results and reliability counters.
inline SarrEntry make_sarr_entry(const std::string& label, const ModelSweep& clean_sweep,
                                 std::size_t false_alarms, double degradation) {
    SarrEntry e;
    e.model_label = label;
    e.false_alarms = double(false_alarms);
    e.degradation = degradation;
    const auto loc = localization_error(clean_sweep);
    const auto sz = size_error(clean_sweep);
    double loc_sum = 0, sz_sum = 0;
    std::size_t loc_n = 0, sz_n = 0;
    std::size_t covered = 0, feasible = 0;
    for (std::size_t i = 0; i < clean_sweep.per_size.size(); ++i) {
        const auto& agg = clean_sweep.per_size[i];
        covered += agg.detected;
        feasible += agg.detected + agg.not_detected;
        if (agg.detected > 0 && agg.size < e.min_detectable_size) {
            e.min_detectable_size = agg.size;
            e.time_at_min_size = agg.censored_mean_minutes;
        }
        if (!std::isnan(loc[i])) {
            loc_sum += loc[i];
            ++loc_n;
        }
        if (!std::isnan(sz[i])) {
            sz_sum += sz[i];
            ++sz_n;
        }
    }
    e.accuracy_error = loc_n > 0 ? loc_sum / double(loc_n)
                                 : std::numeric_limits<double>::infinity();
    e.size_error_pct = sz_n > 0 ? sz_sum / double(sz_n)
                                : std::numeric_limits<double>::infinity();
    e.coverage = feasible > 0 ? double(covered) / double(feasible) : 0.0;
    return e;
}

}  // namespace leakdet::bench
