// leakdet command-line surface.
//
// Subcommands: simulate, train, detect, bench, report.  Exit codes:
//   0  success (detect: no leak)
//   1  usage or configuration error
//   2  leak detected
//   3  data error
//
// Every run echoes its resolved configuration so it can be reproduced
// exactly; all randomness flows from --seed.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "leakdet/bench.hpp"
#include "leakdet/dataio.hpp"
#include "leakdet/detect.hpp"
#include "leakdet/grid_search.hpp"
#include "leakdet/model.hpp"
#include "leakdet/simulate.hpp"

namespace fs = std::filesystem;
using namespace leakdet;

namespace {

struct ConfigEcho {
    std::ostringstream os;
    template <typename T>
    void add(const std::string& key, const T& value) {
        os << " " << key << "=" << value;
    }
    void print(const std::string& command) const {
        std::cout << "config: command=" << command << os.str() << "\n";
    }
};

std::vector<double> parse_list(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

std::vector<std::string> parse_names(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

data::Telemetry load_clean(const std::string& path) {
    auto res = data::load_telemetry_file(path);
    if (!res.rejects.empty()) {
        std::cerr << "rejects: " << res.rejects.size() << " row(s)\n";
        for (const auto& r : res.rejects)
            std::cerr << "  line " << r.line << ": " << r.reason << "\n";
    }
    data::CleanReport report;
    auto cleaned = data::clean(res.records, &report);
    if (report.removed > 0)
        std::cout << "cleaned: removed " << report.removed << " of "
                  << res.records.size() << " records\n";
    return cleaned;
}

void print_metric_block(const char* label, const ml::TrainReport& r) {
    std::cout << "model metrics (" << label << ")\n";
    std::cout << "  RMSE (test)  " << r.rmse_test << "\n";
    std::cout << "  MAE  (test)  " << r.mae_test << "\n";
    std::cout << "  R2 (train)   " << r.r2_train << "\n";
    std::cout << "  R2 (test)    " << r.r2_test << "\n";
    std::cout << "  R2 (CV)      " << r.cv_score << "\n";
}

int cmd_simulate(const std::string& out_path, std::size_t samples, std::uint64_t seed,
                 double noise_scale, double leak_size, double leak_location,
                 std::size_t onset, double flow_constant, const std::string& profile_name,
                 double constant_flow) {
    ConfigEcho echo;
    echo.add("out", out_path);
    echo.add("samples", samples);
    echo.add("seed", seed);
    echo.add("noise_scale", noise_scale);
    echo.add("leak_size", leak_size);
    echo.add("leak_location", leak_location);
    echo.add("onset", onset);
    echo.add("flow_constant", flow_constant);
    echo.add("profile", profile_name);
    echo.print("simulate");

    sim::PipelineSpec spec;
    spec.flow_constant = flow_constant;
    sim::OperatingProfile profile = profile_name == "constant"
                                        ? sim::OperatingProfile::constant(constant_flow)
                                        : sim::OperatingProfile::standard();
    const auto noise = sim::NoiseModel{}.scaled(noise_scale);
    auto stream = sim::synth_stream(spec, samples, profile, noise, seed);
    if (leak_size > 0.0) {
        sim::LeakScenario scenario{leak_size, leak_location, onset};
        stream = sim::inject_leak(stream, spec, scenario);
    }
    data::save_telemetry_file(out_path, stream);
    std::cout << "wrote " << stream.size() << " records to " << out_path << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& family_name,
              const std::string& out_path, std::uint64_t seed, double test_fraction,
              unsigned jobs, bool no_tune, const std::string& channel_name, int kfold) {
    ConfigEcho echo;
    echo.add("data", data_path);
    echo.add("family", family_name);
    echo.add("out", out_path);
    echo.add("seed", seed);
    echo.add("test_fraction", test_fraction);
    echo.add("jobs", jobs);
    echo.add("tune", no_tune ? "off" : "grid");
    echo.add("channel", channel_name);
    echo.add("kfold", kfold);
    echo.print("train");

    const auto family = ml::family_from_name(family_name);
    const auto channel = channel_name == "inlet" ? data::FlowChannel::inlet
                                                 : data::FlowChannel::outlet;
    const auto records = load_clean(data_path);
    const auto [train, test] = data::split(records, test_fraction, seed);
    std::cout << "records: " << records.size() << " (train " << train.size() << ", test "
              << test.size() << ")\n";

    ThreadPool pool(jobs);
    std::vector<ml::GridCell> single;
    const std::vector<ml::GridCell>* grid = nullptr;
    if (no_tune) {
        single.push_back(ml::GridCell::object());
        grid = &single;
    }
    const auto tuned = ml::tune_observer(train, test, family, seed, pool, channel, grid, kfold);
    print_metric_block(ml::family_label(family), tuned.report);
    tuned.model.save(out_path);
    std::cout << "saved model to " << out_path << "\n";
    return 0;
}

int cmd_detect(const std::string& model_path, const std::string& inlet_model_path,
               const std::string& data_path, double threshold, int window, int persistence,
               double index_trip, std::size_t onset, const std::string& log_path) {
    ConfigEcho echo;
    echo.add("model", model_path);
    if (!inlet_model_path.empty()) echo.add("inlet_model", inlet_model_path);
    echo.add("data", data_path);
    echo.add("threshold", threshold);
    echo.add("window", window);
    echo.add("persistence", persistence);
    echo.add("index_trip", index_trip);
    echo.add("onset", onset);
    echo.print("detect");

    const auto model = ml::RegressorModel::load(model_path);
    std::optional<ml::RegressorModel> inlet_model;
    if (!inlet_model_path.empty()) inlet_model = ml::RegressorModel::load(inlet_model_path);

    const auto stream = load_clean(data_path);

    detect::DetectorConfig config;
    config.window = window;
    config.persistence = persistence;
    config.index_trip = index_trip;
    config.threshold = threshold > 0.0
                           ? threshold
                           : detect::default_threshold(
                                 model.metadata.value("mae_test", 0.0));
    std::cout << "threshold: " << config.threshold << "\n";

    const auto result = detect::run_detection(stream, model, config,
                                              inlet_model ? &*inlet_model : nullptr);
    if (!log_path.empty()) {
        std::ofstream log(log_path);
        log << "ordinal,residual,flag,index,counter,skipped\n";
        for (const auto& row : result.log)
            log << row.ordinal << ',' << row.residual << ',' << int(row.flag) << ','
                << row.index << ',' << row.counter << ',' << int(row.skipped) << "\n";
    }
    if (result.skipped > 0)
        std::cout << "skipped " << result.skipped << " non-finite sample(s)\n";
    if (result.alarm) {
        std::cout << detect::format_alarm_block(*result.alarm, onset, 2.0) << "\n";
        return 2;
    }
    std::cout << "NO LEAK\n";
    return 0;
}

int cmd_bench(const std::string& data_path, const std::string& stream_path,
              const std::string& families_csv, const std::string& sizes_csv,
              const std::string& locations_csv, double budget, std::uint64_t seed,
              unsigned jobs, const std::string& out_dir, std::size_t clean_streams,
              std::size_t clean_samples) {
    ConfigEcho echo;
    echo.add("data", data_path);
    echo.add("stream", stream_path.empty() ? "(synthetic)" : stream_path);
    echo.add("families", families_csv);
    echo.add("sizes", sizes_csv);
    echo.add("locations", locations_csv);
    echo.add("budget", budget);
    echo.add("seed", seed);
    echo.add("jobs", jobs);
    echo.add("out", out_dir);
    echo.print("bench");

    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/fragments");

    const auto records = load_clean(data_path);
    const auto [train, test] = data::split(records, 0.30, seed);

    sim::PipelineSpec spec;
    data::Telemetry base;
    if (!stream_path.empty()) {
        base = load_clean(stream_path);
    } else {
        base = sim::synth_stream(spec, 400, sim::OperatingProfile::standard(),
                                 sim::NoiseModel::none(), derive_seed(seed, 0xba5e));
    }

    bench::SweepGrid grid;
    if (!sizes_csv.empty()) grid.sizes = parse_list(sizes_csv);
    if (!locations_csv.empty()) grid.locations = parse_list(locations_csv);
    grid.budget_minutes = budget;
    grid.master_seed = seed;

    std::vector<data::Telemetry> clean;
    for (std::size_t i = 0; i < clean_streams; ++i)
        clean.push_back(sim::synth_stream(spec, clean_samples,
                                          sim::OperatingProfile::standard(), sim::NoiseModel{},
                                          derive_seed(seed, 0xc1ea, i)));

    ThreadPool pool(jobs);
    std::vector<bench::ModelSweep> sweeps;
    std::vector<bench::SarrEntry> entries;
    for (const auto& family_name : parse_names(families_csv)) {
        const auto family = ml::family_from_name(family_name);
        std::cout << "training " << ml::family_label(family) << "...\n";
        const auto tuned = ml::tune_observer(train, test, family, seed, pool);
        print_metric_block(ml::family_label(family), tuned.report);

        detect::DetectorConfig config;
        config.threshold = detect::default_threshold(tuned.report.mae_test);

        bench::Observers obs{&tuned.model, &tuned.model};
        auto sweep = bench::run_sweep(obs, grid, spec, base, config, pool);
        sweep.model_label = ml::family_label(family);

        const auto false_alarms = bench::count_false_alarms(tuned.model, clean, config);

        // Robustness: relative slowdown of the censored mean detection time
        // when channel noise doubles on the sweep stream.
        auto noisy_base = sim::synth_stream(spec, base.size(),
                                            sim::OperatingProfile::standard(),
                                            sim::NoiseModel{}.scaled(2.0),
                                            derive_seed(seed, 0x40b, 1));
        auto noisy_sweep = bench::run_sweep(obs, grid, spec, noisy_base, config, pool);
        double clean_time = 0, noisy_time = 0;
        for (std::size_t i = 0; i < sweep.per_size.size(); ++i) {
            clean_time += sweep.per_size[i].censored_mean_minutes;
            noisy_time += noisy_sweep.per_size[i].censored_mean_minutes;
        }
        const double degradation =
            clean_time > 0 ? (noisy_time - clean_time) / clean_time : 0.0;

        entries.push_back(bench::make_sarr_entry(sweep.model_label, sweep, false_alarms,
                                                 degradation));
        auto fragment = bench::sweep_to_json(sweep);
        fragment["false_alarms"] = false_alarms;
        fragment["clean_streams"] = clean.size();
        fragment["degradation"] = degradation;
        fragment["metrics"] = {{"rmse_test", tuned.report.rmse_test},
                               {"mae_test", tuned.report.mae_test},
                               {"r2_test", tuned.report.r2_test},
                               {"r2_train", tuned.report.r2_train},
                               {"r2_cv", tuned.report.cv_score}};
        std::ofstream(out_dir + "/fragments/" + family_name + ".json")
            << fragment.dump(2) << "\n";
        sweeps.push_back(std::move(sweep));
    }

    std::ostringstream report;
    report << bench::render_time_table(sweeps) << "\n";
    report << bench::render_localization_table(sweeps) << "\n";
    if (entries.size() >= 2) report << bench::render_sarr_table(bench::sarr_rank(entries));
    std::ofstream(out_dir + "/report.txt") << report.str();
    std::ofstream(out_dir + "/report_kv.txt") << bench::render_kv_summary(sweeps);
    std::cout << report.str();
    std::cout << "report written to " << out_dir << "\n";
    return 0;
}

int cmd_report(const std::string& fragments_csv, const std::string& out_dir) {
    ConfigEcho echo;
    echo.add("fragments", fragments_csv);
    echo.add("out", out_dir);
    echo.print("report");

    std::vector<bench::ModelSweep> sweeps;
    std::vector<bench::SarrEntry> entries;
    for (const auto& path : parse_names(fragments_csv)) {
        std::ifstream in(path);
        if (!in) throw data_error("report: cannot open fragment \"" + path + "\"");
        nlohmann::json j;
        in >> j;
        auto sweep = bench::sweep_from_json(j);
        entries.push_back(bench::make_sarr_entry(sweep.model_label, sweep,
                                                 j.value("false_alarms", std::size_t(0)),
                                                 j.value("degradation", 0.0)));
        sweeps.push_back(std::move(sweep));
    }
    std::ostringstream report;
    report << bench::render_time_table(sweeps) << "\n";
    report << bench::render_localization_table(sweeps) << "\n";
    if (entries.size() >= 2) report << bench::render_sarr_table(bench::sarr_rank(entries));
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream(out_dir + "/report.txt") << report.str();
        std::ofstream(out_dir + "/report_kv.txt") << bench::render_kv_summary(sweeps);
    }
    std::cout << report.str();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gas pipeline leak detection toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "generate synthetic telemetry");
    std::string sim_out;
    std::size_t sim_samples = 21000;
    std::uint64_t sim_seed = 42;
    double sim_noise = 1.0, sim_leak = 0.0, sim_loc = 0.5, sim_flowc = 0.0244;
    std::size_t sim_onset = 30;
    std::string sim_profile = "standard";
    double sim_const_flow = 8.54;
    sim_cmd->add_option("--out", sim_out, "output CSV path")->required();
    sim_cmd->add_option("--samples", sim_samples, "number of samples");
    sim_cmd->add_option("--seed", sim_seed, "master seed");
    sim_cmd->add_option("--noise-scale", sim_noise,
                        "noise multiplier (0 for a noiseless stream)");
    sim_cmd->add_option("--leak-size", sim_leak, "leak fraction of nominal flow");
    sim_cmd->add_option("--leak-location", sim_loc, "fractional leak location");
    sim_cmd->add_option("--onset", sim_onset, "leak onset sample");
    sim_cmd->add_option("--flow-constant", sim_flowc, "general flow equation constant");
    sim_cmd->add_option("--profile", sim_profile, "standard|constant");
    sim_cmd->add_option("--constant-flow", sim_const_flow,
                        "flow level for the constant profile");

    // train
    auto* train_cmd = app.add_subcommand("train", "train an observer model");
    std::string tr_data, tr_family = "rf", tr_out, tr_channel = "outlet";
    std::uint64_t tr_seed = 12;
    double tr_frac = 0.30;
    unsigned tr_jobs = default_jobs();
    bool tr_no_tune = false;
    int tr_kfold = 5;
    train_cmd->add_option("--data", tr_data, "telemetry CSV")->required();
    train_cmd->add_option("--family", tr_family, "dt|rf|gb|svr|mlp")->required();
    train_cmd->add_option("--out", tr_out, "model output path")->required();
    train_cmd->add_option("--seed", tr_seed, "master seed");
    train_cmd->add_option("--test-fraction", tr_frac, "held-out fraction");
    train_cmd->add_option("--jobs", tr_jobs, "worker threads");
    train_cmd->add_flag("--no-tune", tr_no_tune, "skip the grid search");
    train_cmd->add_option("--channel", tr_channel, "outlet|inlet flow target");
    train_cmd->add_option("--kfold", tr_kfold, "cross-validation folds");

    // detect
    auto* det_cmd = app.add_subcommand("detect", "run leak detection over a stream");
    std::string de_model, de_inlet_model, de_data, de_log;
    double de_threshold = 0.0, de_trip = 0.99;
    int de_window = 30, de_persistence = 3;
    std::size_t de_onset = 30;
    det_cmd->add_option("--model", de_model, "outlet observer model")->required();
    det_cmd->add_option("--inlet-model", de_inlet_model, "inlet observer model");
    det_cmd->add_option("--data", de_data, "telemetry CSV")->required();
    det_cmd->add_option("--threshold", de_threshold,
                        "residual threshold (default: model MAE + 0.01)");
    det_cmd->add_option("--window", de_window, "rolling window, samples");
    det_cmd->add_option("--persistence", de_persistence, "tripped samples before alarm");
    det_cmd->add_option("--index-trip", de_trip, "leak index trip level");
    det_cmd->add_option("--onset", de_onset, "onset ordinal for minute accounting");
    det_cmd->add_option("--log", de_log, "per-sample detection log path");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "sweep leak scenarios and rank models");
    std::string be_data, be_stream, be_families = "dt,rf,gb,svr,mlp";
    std::string be_sizes, be_locations, be_out = "bench_out";
    double be_budget = 240.0;
    std::uint64_t be_seed = 42;
    unsigned be_jobs = default_jobs();
    std::size_t be_clean_streams = 5, be_clean_samples = 2000;
    bench_cmd->add_option("--data", be_data, "training telemetry CSV")->required();
    bench_cmd->add_option("--stream", be_stream, "no-leak base stream CSV");
    bench_cmd->add_option("--families", be_families, "comma-separated families");
    bench_cmd->add_option("--sizes", be_sizes, "leak sizes, comma-separated fractions");
    bench_cmd->add_option("--locations", be_locations, "leak locations, comma-separated");
    bench_cmd->add_option("--budget", be_budget, "detection budget, minutes");
    bench_cmd->add_option("--seed", be_seed, "master seed");
    bench_cmd->add_option("--jobs", be_jobs, "worker threads");
    bench_cmd->add_option("--out", be_out, "report directory");
    bench_cmd->add_option("--clean-streams", be_clean_streams,
                          "clean streams for the false-alarm check");
    bench_cmd->add_option("--clean-samples", be_clean_samples, "samples per clean stream");

    // report
    auto* rep_cmd = app.add_subcommand("report", "render tables from sweep fragments");
    std::string re_fragments, re_out;
    rep_cmd->add_option("--fragments", re_fragments, "comma-separated fragment JSONs")
        ->required();
    rep_cmd->add_option("--out", re_out, "report directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*sim_cmd)
            return cmd_simulate(sim_out, sim_samples, sim_seed, sim_noise, sim_leak, sim_loc,
                                sim_onset, sim_flowc, sim_profile, sim_const_flow);
        if (*train_cmd)
            return cmd_train(tr_data, tr_family, tr_out, tr_seed, tr_frac, tr_jobs,
                             tr_no_tune, tr_channel, tr_kfold);
        if (*det_cmd)
            return cmd_detect(de_model, de_inlet_model, de_data, de_threshold, de_window,
                              de_persistence, de_trip, de_onset, de_log);
        if (*bench_cmd)
            return cmd_bench(be_data, be_stream, be_families, be_sizes, be_locations,
                             be_budget, be_seed, be_jobs, be_out, be_clean_streams,
                             be_clean_samples);
        if (*rep_cmd) return cmd_report(re_fragments, re_out);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const scenario_infeasible& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
