#pragma once

// Telemetry ingestion, cleaning, train/test partitioning and feature
// preprocessing.
//
// File format: comma-separated text with a header row.  Required columns are
// "Inlet Pressure", "Inlet Temp", "Outlet Pressure", "Outlet Temp" and
// "Flowrate".  Optional columns: "P2" (the no-leak baseline outlet pressure)
// and "Inlet Flowrate" (second flow channel, enables localization).  Rows
// whose required cells are blank or unparseable go to a rejects report; rows
// that parse but carry non-finite values are removed by clean().

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "leakdet/common.hpp"

namespace leakdet::data {

struct TelemetryRecord {
    std::size_t index = 0;  // sample ordinal, 2-minute cadence
    double inlet_pressure = 0.0;   // psia
    double inlet_temperature = 0.0;   // deg F
    double outlet_pressure = 0.0;  // psia
    double outlet_temperature = 0.0;  // deg F
    double flowrate = 0.0;         // mmscm, outlet channel
    std::optional<double> reference_outlet_pressure;  // baseline column "P2"
    std::optional<double> inlet_flowrate;             // mmscm
};

using Telemetry = std::vector<TelemetryRecord>;

struct Reject {
    std::size_t line = 0;  // 1-based line number in the source file
    std::string reason;
};

struct LoadResult {
    Telemetry records;
    std::vector<Reject> rejects;
    bool has_baseline = false;
    bool has_inlet_flow = false;
};

namespace names {
inline constexpr const char* kInletPressure = "Inlet Pressure";
inline constexpr const char* kInletTemp = "Inlet Temp";
inline constexpr const char* kOutletPressure = "Outlet Pressure";
inline constexpr const char* kOutletTemp = "Outlet Temp";
inline constexpr const char* kFlowrate = "Flowrate";
inline constexpr const char* kBaseline = "P2";
inline constexpr const char* kInletFlowrate = "Inlet Flowrate";
}  // namespace names

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    cells.push_back(trim(cur));
    return cells;
}

inline bool parse_double(const std::string& cell, double& out) {
    if (cell.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(cell, &pos);
        return pos == cell.size();
    } catch (...) {
        return false;
    }
}

}  // namespace detail

// Loads telemetry from a stream of comma-separated text.  Unknown columns are
// ignored.  A missing required column raises schema_error naming it; a bad
// required cell sends that row to the rejects report.
inline LoadResult load_telemetry(std::istream& in) {
    LoadResult result;
    std::string line;
    if (!std::getline(in, line)) throw schema_error("telemetry: empty input, header row required");
    const auto header = detail::split_csv_line(line);

    auto find_col = [&](const char* name) -> std::ptrdiff_t {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<std::ptrdiff_t>(i);
        return -1;
    };
    struct Col {
        const char* name;
        std::ptrdiff_t idx;
    };
    Col required[5] = {{names::kInletPressure, 0},
                       {names::kInletTemp, 0},
                       {names::kOutletPressure, 0},
                       {names::kOutletTemp, 0},
                       {names::kFlowrate, 0}};
    for (auto& c : required) {
        c.idx = find_col(c.name);
        if (c.idx < 0)
            throw schema_error(std::string("telemetry: missing required column \"") + c.name +
                               "\"");
    }
    const std::ptrdiff_t baseline_idx = find_col(names::kBaseline);
    const std::ptrdiff_t inlet_flow_idx = find_col(names::kInletFlowrate);
    result.has_baseline = baseline_idx >= 0;
    result.has_inlet_flow = inlet_flow_idx >= 0;

    std::size_t line_no = 1;
    std::size_t ordinal = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto cells = detail::split_csv_line(line);
        TelemetryRecord rec;
        rec.index = ordinal;
        bool ok = true;
        double* fields[5] = {&rec.inlet_pressure, &rec.inlet_temperature, &rec.outlet_pressure,
                             &rec.outlet_temperature, &rec.flowrate};
        for (int i = 0; i < 5 && ok; ++i) {
            const auto idx = static_cast<std::size_t>(required[i].idx);
            if (idx >= cells.size() || !detail::parse_double(cells[idx], *fields[i])) {
                std::ostringstream reason;
                reason << "bad value for \"" << required[i].name << "\"";
                result.rejects.push_back({line_no, reason.str()});
                ok = false;
            }
        }
        if (!ok) continue;
        if (baseline_idx >= 0 && static_cast<std::size_t>(baseline_idx) < cells.size()) {
            double v;
            if (detail::parse_double(cells[static_cast<std::size_t>(baseline_idx)], v))
                rec.reference_outlet_pressure = v;
        }
        if (inlet_flow_idx >= 0 && static_cast<std::size_t>(inlet_flow_idx) < cells.size()) {
            double v;
            if (detail::parse_double(cells[static_cast<std::size_t>(inlet_flow_idx)], v))
                rec.inlet_flowrate = v;
        }
        rec.index = ordinal++;
        result.records.push_back(rec);
    }
    return result;
}

inline LoadResult load_telemetry_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("telemetry: cannot open \"" + path + "\"");
    return load_telemetry(in);
}

inline void save_telemetry(std::ostream& out, const Telemetry& records, bool with_baseline = true,
                           bool with_inlet_flow = true) {
    out << names::kInletPressure << ',' << names::kInletTemp << ',' << names::kOutletPressure
        << ',' << names::kOutletTemp << ',' << names::kFlowrate;
    if (with_baseline) out << ',' << names::kBaseline;
    if (with_inlet_flow) out << ',' << names::kInletFlowrate;
    out << '\n';
    char buf[64];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.10g", v);
        out << buf;
    };
    for (const auto& r : records) {
        put(r.inlet_pressure);
        out << ',';
        put(r.inlet_temperature);
        out << ',';
        put(r.outlet_pressure);
        out << ',';
        put(r.outlet_temperature);
        out << ',';
        put(r.flowrate);
        if (with_baseline) {
            out << ',';
            put(r.reference_outlet_pressure.value_or(r.outlet_pressure));
        }
        if (with_inlet_flow) {
            out << ',';
            put(r.inlet_flowrate.value_or(r.flowrate));
        }
        out << '\n';
    }
}

inline void save_telemetry_file(const std::string& path, const Telemetry& records,
                                bool with_baseline = true, bool with_inlet_flow = true) {
    std::ofstream out(path);
    if (!out) throw data_error("telemetry: cannot write \"" + path + "\"");
    save_telemetry(out, records, with_baseline, with_inlet_flow);
}

struct CleanReport {
    std::size_t kept = 0;
    std::size_t removed = 0;
};

// Removes records carrying non-finite values.  Outliers are kept: transients
// carry signal.  Never fails; idempotent.
inline Telemetry clean(const Telemetry& records, CleanReport* report = nullptr) {
    Telemetry out;
    out.reserve(records.size());
    for (const auto& r : records) {
        const bool finite =
            std::isfinite(r.inlet_pressure) && std::isfinite(r.inlet_temperature) &&
            std::isfinite(r.outlet_pressure) && std::isfinite(r.outlet_temperature) &&
            std::isfinite(r.flowrate) &&
            (!r.reference_outlet_pressure || std::isfinite(*r.reference_outlet_pressure)) &&
            (!r.inlet_flowrate || std::isfinite(*r.inlet_flowrate));
        if (finite) out.push_back(r);
    }
    if (report) {
        report->kept = out.size();
        report->removed = records.size() - out.size();
    }
    return out;
}

// Deterministic shuffled partition.  test_fraction of the records (rounded)
// go to the test set; the shuffle is a pure function of the seed.
inline std::pair<Telemetry, Telemetry> split(const Telemetry& records, double test_fraction,
                                             std::uint64_t seed) {
    if (records.size() < 10)
        throw data_error("split: need at least 10 records, got " +
                         std::to_string(records.size()));
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw config_error("split: test fraction must lie in (0, 1)");
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng = make_rng(derive_seed(seed, 0x5eed));
    leakdet::shuffle(order, rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(records.size())));
    Telemetry test, train;
    test.reserve(n_test);
    train.reserve(records.size() - n_test);
    for (std::size_t i = 0; i < order.size(); ++i)
        (i < n_test ? test : train).push_back(records[order[i]]);
    return {train, test};
}

// ---------------------------------------------------------------------------
// Feature matrix assembly.  Column order is fixed by contract.
// ---------------------------------------------------------------------------

enum class FlowChannel { outlet, inlet };

struct FeatureMatrix {
    Matrix x;                              // raw features, 4 columns
    std::vector<std::string> column_names;
    std::vector<double> target;            // flowrate channel
};

inline FeatureMatrix make_features(const Telemetry& records,
                                   FlowChannel channel = FlowChannel::outlet) {
    FeatureMatrix fm;
    fm.column_names = {names::kInletPressure, names::kInletTemp, names::kOutletPressure,
                       names::kOutletTemp};
    fm.x = Matrix(records.size(), 4);
    fm.target.resize(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        fm.x.at(i, 0) = r.inlet_pressure;
        fm.x.at(i, 1) = r.inlet_temperature;
        fm.x.at(i, 2) = r.outlet_pressure;
        fm.x.at(i, 3) = r.outlet_temperature;
        if (channel == FlowChannel::outlet) {
            fm.target[i] = r.flowrate;
        } else {
            if (!r.inlet_flowrate)
                throw data_error("make_features: record " + std::to_string(r.index) +
                                 " has no inlet flowrate channel");
            fm.target[i] = *r.inlet_flowrate;
        }
    }
    return fm;
}

// ---------------------------------------------------------------------------
// Min-max scaler.  Fit on training rows only; transform never clips, so test
// rows may map outside [0,1].  Constant columns are flagged and map to 0.
// ---------------------------------------------------------------------------

class Scaler {
  public:
    Scaler() = default;

    static Scaler fit(const Matrix& x) {
        Scaler s;
        s.min_.assign(x.cols(), 0.0);
        s.range_.assign(x.cols(), 0.0);
        s.constant_.assign(x.cols(), false);
        if (x.rows() == 0) throw data_error("scaler: cannot fit on empty data");
        for (std::size_t c = 0; c < x.cols(); ++c) {
            double lo = x.at(0, c), hi = x.at(0, c);
            for (std::size_t r = 1; r < x.rows(); ++r) {
                lo = std::min(lo, x.at(r, c));
                hi = std::max(hi, x.at(r, c));
            }
            s.min_[c] = lo;
            s.range_[c] = hi - lo;
            s.constant_[c] = (hi == lo);
        }
        return s;
    }

    std::size_t cols() const { return min_.size(); }
    bool column_constant(std::size_t c) const { return constant_[c]; }
    const std::vector<double>& minimums() const { return min_; }
    const std::vector<double>& ranges() const { return range_; }

    Matrix transform(const Matrix& x) const {
        check_width(x.cols());
        Matrix out(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                out.at(r, c) = constant_[c] ? 0.0 : (x.at(r, c) - min_[c]) / range_[c];
        return out;
    }

    Matrix inverse_transform(const Matrix& x) const {
        check_width(x.cols());
        Matrix out(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t c = 0; c < x.cols(); ++c)
                out.at(r, c) = constant_[c] ? min_[c] : x.at(r, c) * range_[c] + min_[c];
        return out;
    }

    // Used by deserialization.
    static Scaler from_params(std::vector<double> mins, std::vector<double> ranges) {
        Scaler s;
        s.min_ = std::move(mins);
        s.range_ = std::move(ranges);
        s.constant_.resize(s.min_.size());
        for (std::size_t c = 0; c < s.min_.size(); ++c) s.constant_[c] = (s.range_[c] == 0.0);
        return s;
    }

  private:
    void check_width(std::size_t c) const {
        if (c != min_.size())
            throw data_error("scaler: input width " + std::to_string(c) +
                             " does not match fitted width " + std::to_string(min_.size()));
    }
    std::vector<double> min_, range_;
    std::vector<bool> constant_;
};

// ---------------------------------------------------------------------------
// Polynomial expansion with bias column and all cross terms.  For d input
// features and degree 2 the output has 1 + d + d(d+1)/2 columns.
// ---------------------------------------------------------------------------

class PolyExpansion {
  public:
    explicit PolyExpansion(int degree = 2) : degree_(degree) {
        if (degree_ < 1) throw config_error("poly_expand: degree must be >= 1");
    }

    int degree() const { return degree_; }

    // Monomial exponent tuples in graded-lexicographic order starting with
    // the bias term.
    std::vector<std::vector<int>> monomials(std::size_t d) const {
        std::vector<std::vector<int>> out;
        std::vector<int> expo(d, 0);
        for (int total = 0; total <= degree_; ++total) enumerate(d, 0, total, expo, out);
        return out;
    }

    std::vector<std::string> column_names(const std::vector<std::string>& input_names) const {
        std::vector<std::string> out;
        for (const auto& expo : monomials(input_names.size())) {
            std::string name;
            for (std::size_t i = 0; i < expo.size(); ++i) {
                if (expo[i] == 0) continue;
                if (!name.empty()) name += "*";
                name += input_names[i];
                if (expo[i] > 1) name += "^" + std::to_string(expo[i]);
            }
            if (name.empty()) name = "1";
            out.push_back(name);
        }
        return out;
    }

    Matrix transform(const Matrix& x) const {
        const auto monos = monomials(x.cols());
        Matrix out(x.rows(), monos.size());
        for (std::size_t r = 0; r < x.rows(); ++r) {
            const double* row = x.row(r);
            for (std::size_t m = 0; m < monos.size(); ++m) {
                double v = 1.0;
                for (std::size_t c = 0; c < monos[m].size(); ++c)
                    for (int k = 0; k < monos[m][c]; ++k) v *= row[c];
                out.at(r, m) = v;
            }
        }
        return out;
    }

    std::size_t output_cols(std::size_t d) const { return monomials(d).size(); }

  private:
    static void enumerate(std::size_t d, std::size_t pos, int remaining, std::vector<int>& expo,
                          std::vector<std::vector<int>>& out) {
        if (pos == d) {
            if (remaining == 0) out.push_back(expo);
            return;
        }
        for (int k = remaining; k >= 0; --k) {
            expo[pos] = k;
            enumerate(d, pos + 1, remaining - k, expo, out);
        }
        expo[pos] = 0;
    }

    int degree_;
};

inline Matrix poly_expand(const Matrix& x, int degree = 2) {
    return PolyExpansion(degree).transform(x);
}

}  // namespace leakdet::data
