#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fuzzydose/control.hpp"
#include "fuzzydose/dsl.hpp"
#include "fuzzydose/errors.hpp"
#include "fuzzydose/fis.hpp"
#include "fuzzydose/hydro.hpp"
#include "fuzzydose/reservoir.hpp"

namespace fuzzydose::bench {

struct BenchConfig {
    std::string rulebank_path;
    double ab_universe_hi = hydro::kDefaultAbUniverseHi;
    sim::DoseParams dose;
    hydro::NormalBand band;
    int max_steps = 10;
    double settle_s = 60.0;
    double telemetry_cadence_s = 300.0;
    double nominal_volume_l = 20.0;
    sim::LevelSensorModel level;
    double water_refill_ml_per_s = 100.0;
    double water_target_l = 20.0;
    double water_on_below_l = 19.0;
    double water_off_at_l = 20.0;

    void validate() const {
        dose.validate();
        if (!(band.ph_lo < band.ph_hi) || !(band.tds_lo < band.tds_hi)) {
            throw DefinitionError("normal band bounds must be ordered");
        }
        if (max_steps < 1) {
            throw DefinitionError("max_steps must be at least 1");
        }
        if (!(settle_s > 0.0)) {
            throw DefinitionError("settle_s must be positive");
        }
        if (telemetry_cadence_s < 0.0) {
            throw DefinitionError("telemetry_cadence_s must be non-negative");
        }
        if (!(nominal_volume_l > 0.0) || nominal_volume_l > sim::kCapacityL) {
            throw DefinitionError("nominal_volume_l must lie in (0, 25]");
        }
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) {
        ++b;
    }
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

inline double parse_number(const std::string& text, int line) {
    char* end = nullptr;
    const double value = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0') {
        throw ParseError(line, 1, "expected a number, got '" + text + "'");
    }
    return value;
}

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(trim(current));
            current.clear();
        } else {
            current += c;
        }
    }
    fields.push_back(trim(current));
    return fields;
}

inline std::vector<std::string> data_lines(std::string_view text,
                                           std::vector<int>* line_numbers) {
    std::vector<std::string> lines;
    std::string current;
    int line = 1;
    auto flush = [&]() {
        const std::string t = trim(current);
        if (!t.empty() && t[0] != '#') {
            lines.push_back(t);
            if (line_numbers) {
                line_numbers->push_back(line);
            }
        }
        current.clear();
    };
    for (char c : text) {
        if (c == '\n') {
            flush();
            ++line;
        } else {
            current += c;
        }
    }
    flush();
    return lines;
}

}  // namespace detail

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DefinitionError("cannot read file '" + path + "'");
    }
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::string& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DefinitionError("cannot write file '" + path + "'");
    }
    out << content;
}

inline BenchConfig parse_config(std::string_view text) {
    BenchConfig cfg;
    std::vector<int> line_numbers;
    const std::vector<std::string> lines = detail::data_lines(text, &line_numbers);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::string& line = lines[i];
        const int line_no = line_numbers[i];
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError(line_no, 1, "expected key=value, got '" + line + "'");
        }
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ParseError(line_no, 1, "expected key=value, got '" + line + "'");
        }
        auto num = [&]() { return detail::parse_number(value, line_no); };
        if (key == "rulebank") {
            cfg.rulebank_path = value;
        } else if (key == "u_ab") {
            cfg.ab_universe_hi = num();
        } else if (key == "pump_flow_ml_per_s") {
            cfg.dose.pump_flow_ml_per_s = num();
        } else if (key == "c_up_eq") {
            cfg.dose.c_up_eq = num();
        } else if (key == "c_down_eq") {
            cfg.dose.c_down_eq = num();
        } else if (key == "c_ab_ppm") {
            cfg.dose.c_ab_ppm = num();
        } else if (key == "drift_ph_per_step") {
            cfg.dose.drift_ph_per_step = num();
        } else if (key == "drift_tds_per_step") {
            cfg.dose.drift_tds_per_step = num();
        } else if (key == "buffer_total_eq") {
            cfg.dose.buffer_total_eq = num();
        } else if (key == "buffer_pka") {
            cfg.dose.buffer_pka = num();
        } else if (key == "band_ph_lo") {
            cfg.band.ph_lo = num();
        } else if (key == "band_ph_hi") {
            cfg.band.ph_hi = num();
        } else if (key == "band_tds_lo") {
            cfg.band.tds_lo = num();
        } else if (key == "band_tds_hi") {
            cfg.band.tds_hi = num();
        } else if (key == "max_steps") {
            cfg.max_steps = static_cast<int>(num());
        } else if (key == "settle_s") {
            cfg.settle_s = num();
        } else if (key == "telemetry_cadence_s") {
            cfg.telemetry_cadence_s = num();
        } else if (key == "nominal_volume_l") {
            cfg.nominal_volume_l = num();
        } else if (key == "level_area_cm2") {
            cfg.level.area_cm2 = num();
        } else if (key == "level_offset_cm") {
            cfg.level.offset_cm = num();
        } else if (key == "level_min_distance_cm") {
            cfg.level.min_distance_cm = num();
        } else if (key == "level_max_distance_cm") {
            cfg.level.max_distance_cm = num();
        } else if (key == "water_refill_ml_per_s") {
            cfg.water_refill_ml_per_s = num();
        } else if (key == "water_target_l") {
            cfg.water_target_l = num();
        } else if (key == "water_on_below_l") {
            cfg.water_on_below_l = num();
        } else if (key == "water_off_at_l") {
            cfg.water_off_at_l = num();
        } else {
            throw ParseError(line_no, 1, "unknown config key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline BenchConfig load_config(const std::string& path) {
    return parse_config(read_file(path));
}

struct Scenario {
    std::string name;
    double ph = 7.0;
    double tds_ppm = 0.0;
    double volume_l = 20.0;
    double drift_ph_per_step = 0.0;
    double drift_tds_per_step = 0.0;
    int expected_steps = -1;
};

inline std::vector<Scenario> parse_scenarios(std::string_view text) {
    std::vector<int> line_numbers;
    const std::vector<std::string> lines = detail::data_lines(text, &line_numbers);
    if (lines.empty()) {
        throw ParseError(1, 1, "scenario file is empty");
    }
    const std::string header =
        "name,ph,tds_ppm,volume_l,drift_ph_per_step,drift_tds_per_step,expected_steps";
    if (lines[0] != header) {
        throw ParseError(line_numbers[0], 1, "expected header '" + header + "'");
    }
    std::vector<Scenario> scenarios;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = detail::split_fields(lines[i]);
        if (f.size() != 7) {
            throw ParseError(line_numbers[i], 1, "expected 7 fields, got " +
                                                     std::to_string(f.size()));
        }
        Scenario sc;
        sc.name = f[0];
        sc.ph = detail::parse_number(f[1], line_numbers[i]);
        sc.tds_ppm = detail::parse_number(f[2], line_numbers[i]);
        sc.volume_l = detail::parse_number(f[3], line_numbers[i]);
        sc.drift_ph_per_step = detail::parse_number(f[4], line_numbers[i]);
        sc.drift_tds_per_step = detail::parse_number(f[5], line_numbers[i]);
        sc.expected_steps =
            f[6].empty() ? -1 : static_cast<int>(detail::parse_number(f[6], line_numbers[i]));
        scenarios.push_back(std::move(sc));
    }
    return scenarios;
}

inline std::vector<sim::DoseObservation> parse_observations(std::string_view text) {
    std::vector<int> line_numbers;
    const std::vector<std::string> lines = detail::data_lines(text, &line_numbers);
    if (lines.empty()) {
        throw ParseError(1, 1, "observation file is empty");
    }
    const std::string header =
        "experiment,volume_l,ph_before,tds_before,ph_up_ms,ph_down_ms,ab_ms,ph_after,"
        "tds_after,drift_ph_per_step";
    if (lines[0] != header) {
        throw ParseError(line_numbers[0], 1, "expected header '" + header + "'");
    }
    std::vector<sim::DoseObservation> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = detail::split_fields(lines[i]);
        if (f.size() != 10) {
            throw ParseError(line_numbers[i], 1, "expected 10 fields, got " +
                                                     std::to_string(f.size()));
        }
        // A value of -1 marks a quantity that was not measured.
        auto optional_field = [&](const std::string& s) {
            const double v = detail::parse_number(s, line_numbers[i]);
            return v < 0.0 ? std::numeric_limits<double>::quiet_NaN() : v;
        };
        sim::DoseObservation row;
        row.experiment = f[0];
        row.volume_l = detail::parse_number(f[1], line_numbers[i]);
        row.ph_before = detail::parse_number(f[2], line_numbers[i]);
        row.tds_before = detail::parse_number(f[3], line_numbers[i]);
        row.dose.ph_up_ms = detail::parse_number(f[4], line_numbers[i]);
        row.dose.ph_down_ms = detail::parse_number(f[5], line_numbers[i]);
        row.dose.ab_ms = detail::parse_number(f[6], line_numbers[i]);
        row.ph_after = optional_field(f[7]);
        row.tds_after = optional_field(f[8]);
        row.drift_ph_per_step = detail::parse_number(f[9], line_numbers[i]);
        rows.push_back(std::move(row));
    }
    return rows;
}

struct ValidationRow {
    double ph = 7.0;
    double tds_ppm = 0.0;
    std::string pump;
    double reference_ms = 0.0;
    double simulated_ms = 0.0;
    double error_ms = 0.0;
};

inline std::vector<ValidationRow> parse_validation_rows(std::string_view text) {
    std::vector<int> line_numbers;
    const std::vector<std::string> lines = detail::data_lines(text, &line_numbers);
    if (lines.empty()) {
        throw ParseError(1, 1, "validation file is empty");
    }
    const std::string header = "ph,tds_ppm,pump,reference_ms";
    if (lines[0] != header) {
        throw ParseError(line_numbers[0], 1, "expected header '" + header + "'");
    }
    std::vector<ValidationRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::vector<std::string> f = detail::split_fields(lines[i]);
        if (f.size() != 4) {
            throw ParseError(line_numbers[i], 1, "expected 4 fields, got " +
                                                     std::to_string(f.size()));
        }
        ValidationRow row;
        row.ph = detail::parse_number(f[0], line_numbers[i]);
        row.tds_ppm = detail::parse_number(f[1], line_numbers[i]);
        row.pump = f[2];
        row.reference_ms = detail::parse_number(f[3], line_numbers[i]);
        rows.push_back(std::move(row));
    }
    return rows;
}

inline hydro::HydroController make_controller(const BenchConfig& cfg) {
    if (!cfg.rulebank_path.empty()) {
        return hydro::HydroController(dsl::parse(read_file(cfg.rulebank_path)), cfg.band);
    }
    return hydro::HydroController(hydro::builtin_hydro_fis(cfg.ab_universe_hi), cfg.band);
}

struct ScenarioOutcome {
    std::string name;
    ctl::RunResult result;
    sim::ReservoirState final_state;
};

inline ScenarioOutcome run_scenario(const BenchConfig& cfg, const Scenario& scenario,
                                    ctl::TelemetrySink* telemetry = nullptr,
                                    double duration_s = 0.0) {
    sim::DoseParams params = cfg.dose;
    params.drift_ph_per_step = scenario.drift_ph_per_step;
    params.drift_tds_per_step = scenario.drift_tds_per_step;
    ctl::SimulatedDevice device(
        sim::make_state(scenario.volume_l, scenario.ph, scenario.tds_ppm, params), params,
        cfg.level, cfg.water_refill_ml_per_s, cfg.water_target_l);
    ctl::LoopConfig loop_cfg;
    loop_cfg.band = cfg.band;
    loop_cfg.max_steps = cfg.max_steps;
    loop_cfg.settle_s = cfg.settle_s;
    loop_cfg.telemetry_cadence_s = cfg.telemetry_cadence_s;
    loop_cfg.water_on_below_l = cfg.water_on_below_l;
    loop_cfg.water_off_at_l = cfg.water_off_at_l;
    ctl::ControlLoop loop(device, make_controller(cfg), loop_cfg, cfg.level);
    if (telemetry != nullptr) {
        loop.add_telemetry_sink(telemetry);
    }
    ScenarioOutcome outcome;
    outcome.name = scenario.name;
    outcome.result = duration_s > 0.0 ? loop.run_for(duration_s) : loop.run_until_normal();
    outcome.final_state = device.state();
    return outcome;
}

inline void write_trace_csv(std::ostream& out, const std::vector<ctl::StepTrace>& steps) {
    out << "step,ph_before,tds_before,ph_up_ms,ph_down_ms,ab_ms,ph_after,tds_after\n";
    char buf[256];
    for (const ctl::StepTrace& s : steps) {
        std::snprintf(buf, sizeof(buf), "%d,%.4f,%.2f,%.2f,%.2f,%.2f,%.4f,%.2f\n", s.step,
                      s.before.ph, s.before.tds_ppm, s.dose.ph_up_ms, s.dose.ph_down_ms,
                      s.dose.ab_ms, s.after.ph, s.after.tds_ppm);
        out << buf;
    }
}

struct ValidationReport {
    std::vector<ValidationRow> rows;
    double rmse = 0.0;
    double nrmse = 0.0;
    double max_abs_error = 0.0;
    double ph_pump_max_abs_error = 0.0;
};

inline ValidationReport validate_durations(const BenchConfig& cfg,
                                           std::vector<ValidationRow> rows) {
    const hydro::HydroController controller = make_controller(cfg);
    ValidationReport report;
    double sse = 0.0;
    double ref_lo = 0.0;
    double ref_hi = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ValidationRow& row = rows[i];
        const hydro::NutrientReading reading = hydro::clamp_reading(row.ph, row.tds_ppm);
        const hydro::DoseCommand dose = controller.compute_dose(reading);
        if (row.pump == "ph_up") {
            row.simulated_ms = dose.ph_up_ms;
        } else if (row.pump == "ph_down") {
            row.simulated_ms = dose.ph_down_ms;
        } else if (row.pump == "ab_mix") {
            row.simulated_ms = dose.ab_ms;
        } else {
            throw DefinitionError("unknown pump '" + row.pump + "' in validation row");
        }
        row.error_ms = row.simulated_ms - row.reference_ms;
        sse += row.error_ms * row.error_ms;
        report.max_abs_error = std::max(report.max_abs_error, std::fabs(row.error_ms));
        if (row.pump != "ab_mix") {
            report.ph_pump_max_abs_error =
                std::max(report.ph_pump_max_abs_error, std::fabs(row.error_ms));
        }
        ref_lo = (i == 0) ? row.reference_ms : std::min(ref_lo, row.reference_ms);
        ref_hi = (i == 0) ? row.reference_ms : std::max(ref_hi, row.reference_ms);
    }
    if (!rows.empty()) {
        report.rmse = std::sqrt(sse / static_cast<double>(rows.size()));
        if (ref_hi > ref_lo) {
            report.nrmse = report.rmse / (ref_hi - ref_lo);
        }
    }
    report.rows = std::move(rows);
    return report;
}

inline void write_validation_csv(std::ostream& out, const ValidationReport& report) {
    out << "ph,tds_ppm,pump,reference_ms,simulated_ms,error_ms\n";
    char buf[256];
    for (const ValidationRow& row : report.rows) {
        std::snprintf(buf, sizeof(buf), "%.4f,%.2f,%s,%.2f,%.2f,%+.2f\n", row.ph, row.tds_ppm,
                      row.pump.c_str(), row.reference_ms, row.simulated_ms, row.error_ms);
        out << buf;
    }
}

// Duration surface over the two input universes, endpoints included.
inline std::string surface_csv(const BenchConfig& cfg, const std::string& output_name,
                               int steps_a = 141, int steps_b = 141) {
    if (steps_a < 2 || steps_b < 2) {
        throw DefinitionError("surface needs at least 2 steps per axis");
    }
    const hydro::HydroController controller = make_controller(cfg);
    const Engine& engine = controller.engine();
    if (engine.input_count() != 2) {
        throw DefinitionError("surface requires a rulebank with exactly two inputs");
    }
    const std::size_t out_slot = engine.output_slot(output_name);
    const FisDefinition& fis = controller.fis();
    const std::vector<const LinguisticVariable*> inputs = fis.inputs();
    const UniverseInterval& ua = inputs[0]->universe();
    const UniverseInterval& ub = inputs[1]->universe();

    std::string csv = inputs[0]->name() + "," + inputs[1]->name() + "," + output_name + "_ms\n";
    char buf[128];
    std::vector<double> point(2, 0.0);
    for (int i = 0; i < steps_a; ++i) {
        point[0] = ua.lo + (ua.hi - ua.lo) * static_cast<double>(i) /
                              static_cast<double>(steps_a - 1);
        for (int j = 0; j < steps_b; ++j) {
            point[1] = ub.lo + (ub.hi - ub.lo) * static_cast<double>(j) /
                                  static_cast<double>(steps_b - 1);
            const std::vector<double> strengths = engine.rule_strengths(point);
            const double ms =
                engine.defuzzify_clips(out_slot, engine.term_clips(out_slot, strengths));
            std::snprintf(buf, sizeof(buf), "%.6g,%.6g,%.4f\n", point[0], point[1], ms);
            csv += buf;
        }
    }
    return csv;
}

struct AbAnchor {
    double ph = 4.54;
    double tds_ppm = 272.0;
    double target_ms = 4223.34;
};

inline double ab_duration_at(double ab_universe_hi, double ph, double tds_ppm) {
    const FisDefinition fis = hydro::builtin_hydro_fis(ab_universe_hi);
    const Engine engine(fis);
    std::vector<double> point(2, 0.0);
    point[engine.input_slot("ph")] = ph;
    point[engine.input_slot("tds")] = tds_ppm;
    const std::size_t slot = engine.output_slot("ab_mix");
    return engine.defuzzify_clips(slot, engine.term_clips(slot, engine.rule_strengths(point)));
}

// The AB universe upper bound is the one free shape parameter: the centroid of
// any clipped AB set grows monotonically with it.  Bisect until the duration at
// the anchor point matches, then round to whole milliseconds.
inline double fit_ab_universe(const AbAnchor& anchor, double lo = 3000.0, double hi = 20000.0,
                              int iterations = 60) {
    const hydro::NutrientReading reading = hydro::clamp_reading(anchor.ph, anchor.tds_ppm);
    if (ab_duration_at(lo, reading.ph, reading.tds_ppm) > anchor.target_ms ||
        ab_duration_at(hi, reading.ph, reading.tds_ppm) < anchor.target_ms) {
        throw DefinitionError("AB anchor duration is not reachable inside the search bracket");
    }
    for (int i = 0; i < iterations; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (ab_duration_at(mid, reading.ph, reading.tds_ppm) < anchor.target_ms) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return std::round(0.5 * (lo + hi));
}

struct CalibrateOutcome {
    sim::CalibrationResult fit;
    double ab_universe_hi = hydro::kDefaultAbUniverseHi;
    bool ab_universe_fitted = false;
    std::string config_fragment;
};

inline CalibrateOutcome calibrate(const BenchConfig& cfg,
                                  const std::vector<sim::DoseObservation>& rows,
                                  const std::optional<AbAnchor>& anchor) {
    CalibrateOutcome outcome;
    outcome.fit = sim::calibrate_dose_params(rows, cfg.dose);
    outcome.ab_universe_hi = cfg.ab_universe_hi;
    if (anchor.has_value()) {
        outcome.ab_universe_hi = fit_ab_universe(*anchor);
        outcome.ab_universe_fitted = true;
        outcome.fit.notes.push_back("fitted u_ab against the AB duration anchor");
    } else {
        outcome.fit.notes.push_back("no AB duration anchor given; u_ab left at base value");
    }
    std::string fragment;
    fragment += "u_ab = " + dsl::format_decimal(outcome.ab_universe_hi) + "\n";
    fragment += "c_up_eq = " + dsl::format_decimal(outcome.fit.params.c_up_eq) + "\n";
    fragment += "c_down_eq = " + dsl::format_decimal(outcome.fit.params.c_down_eq) + "\n";
    fragment += "c_ab_ppm = " + dsl::format_decimal(outcome.fit.params.c_ab_ppm) + "\n";
    outcome.config_fragment = std::move(fragment);
    return outcome;
}

}  // namespace fuzzydose::bench
