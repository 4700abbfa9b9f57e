#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fuzzydose/fuzzydose.hpp"

namespace {

using namespace fuzzydose;

struct CliOptions {
    std::string config_path;

    struct Infer {
        double ph = 7.0;
        double tds = 0.0;
        bool activations = false;
    } infer;

    struct Surface {
        std::string output = "ab_mix";
        int ph_steps = 141;
        int tds_steps = 141;
        std::string out_path;
    } surface;

    struct Run {
        std::string scenarios_path;
        std::string scenario_name;
        double duration_s = 0.0;
        std::string telemetry_path;
        std::string trace_path;
    } run;

    struct Validate {
        std::string reference_path;
        std::string out_path;
        double max_ph_error_ms = 100.0;
    } validate;

    struct Calibrate {
        std::string observations_path;
        std::string out_path;
        std::vector<double> anchor;
    } calibrate;
};

bench::BenchConfig load_config_or_default(const std::string& path) {
    if (path.empty()) {
        return bench::BenchConfig{};
    }
    return bench::load_config(path);
}

int cmd_infer(const bench::BenchConfig& cfg, const CliOptions::Infer& opt) {
    const hydro::HydroController controller = bench::make_controller(cfg);
    const hydro::NutrientReading reading = hydro::clamp_reading(opt.ph, opt.tds);
    const hydro::DoseCommand dose = controller.compute_dose(reading);
    std::printf("ph = %.4f\n", reading.ph);
    std::printf("tds_ppm = %.2f\n", reading.tds_ppm);
    std::printf("ph_up_ms = %.2f\n", dose.ph_up_ms);
    std::printf("ph_down_ms = %.2f\n", dose.ph_down_ms);
    std::printf("ab_ms = %.2f\n", dose.ab_ms);
    if (opt.activations) {
        for (const hydro::RuleActivation& a : controller.rule_activations(reading)) {
            std::printf("rule %zu strength %.6f\n", a.rule_index, a.strength);
        }
    }
    return 0;
}

int cmd_surface(const bench::BenchConfig& cfg, const CliOptions::Surface& opt) {
    const std::string csv = bench::surface_csv(cfg, opt.output, opt.ph_steps, opt.tds_steps);
    if (opt.out_path.empty()) {
        std::cout << csv;
    } else {
        bench::write_file(opt.out_path, csv);
    }
    return 0;
}

int cmd_run(const bench::BenchConfig& cfg, const CliOptions::Run& opt) {
    std::vector<bench::Scenario> scenarios =
        bench::parse_scenarios(bench::read_file(opt.scenarios_path));
    if (!opt.scenario_name.empty()) {
        std::vector<bench::Scenario> picked;
        for (const bench::Scenario& sc : scenarios) {
            if (sc.name == opt.scenario_name) {
                picked.push_back(sc);
            }
        }
        if (picked.empty()) {
            std::cerr << "no scenario named '" << opt.scenario_name << "'\n";
            return 3;
        }
        scenarios = std::move(picked);
    }
    if (scenarios.size() > 1 && (!opt.telemetry_path.empty() || !opt.trace_path.empty())) {
        std::cerr << "telemetry and trace output need a single --scenario\n";
        return 1;
    }

    bool all_converged = true;
    for (const bench::Scenario& sc : scenarios) {
        std::ofstream telemetry_file;
        std::optional<ctl::OStreamTelemetrySink> sink;
        if (!opt.telemetry_path.empty()) {
            telemetry_file.open(opt.telemetry_path, std::ios::binary);
            if (!telemetry_file) {
                throw DefinitionError("cannot write file '" + opt.telemetry_path + "'");
            }
            sink.emplace(telemetry_file);
        }
        const bench::ScenarioOutcome outcome = bench::run_scenario(
            cfg, sc, sink.has_value() ? &*sink : nullptr, opt.duration_s);
        if (!opt.trace_path.empty()) {
            std::ofstream trace_file(opt.trace_path, std::ios::binary);
            if (!trace_file) {
                throw DefinitionError("cannot write file '" + opt.trace_path + "'");
            }
            bench::write_trace_csv(trace_file, outcome.result.steps);
        }
        std::printf("%s: steps=%zu converged=%s final_ph=%.4f final_tds=%.2f",
                    outcome.name.c_str(), outcome.result.steps.size(),
                    outcome.result.converged ? "yes" : "no", outcome.result.final_reading.ph,
                    outcome.result.final_reading.tds_ppm);
        if (sc.expected_steps >= 0) {
            std::printf(" expected_steps=%d", sc.expected_steps);
        }
        std::printf("\n");
        all_converged = all_converged && outcome.result.converged;
    }
    if (!all_converged) {
        std::cerr << "one or more scenarios did not converge\n";
        return 2;
    }
    return 0;
}

int cmd_validate(const bench::BenchConfig& cfg, const CliOptions::Validate& opt) {
    const bench::ValidationReport report = bench::validate_durations(
        cfg, bench::parse_validation_rows(bench::read_file(opt.reference_path)));
    std::ostringstream table;
    bench::write_validation_csv(table, report);
    if (opt.out_path.empty()) {
        std::cout << table.str();
    } else {
        bench::write_file(opt.out_path, table.str());
    }
    std::printf("rmse_ms = %.4f\n", report.rmse);
    std::printf("nrmse = %.6f\n", report.nrmse);
    std::printf("max_abs_error_ms = %.4f\n", report.max_abs_error);
    std::printf("ph_pump_max_abs_error_ms = %.4f\n", report.ph_pump_max_abs_error);
    if (report.ph_pump_max_abs_error > opt.max_ph_error_ms) {
        std::cerr << "pH pump error exceeds the acceptance gate of " << opt.max_ph_error_ms
                  << " ms\n";
        return 2;
    }
    return 0;
}

int cmd_calibrate(const bench::BenchConfig& cfg, const CliOptions::Calibrate& opt) {
    std::optional<bench::AbAnchor> anchor;
    if (!opt.anchor.empty()) {
        anchor = bench::AbAnchor{opt.anchor[0], opt.anchor[1], opt.anchor[2]};
    }
    const bench::CalibrateOutcome outcome = bench::calibrate(
        cfg, bench::parse_observations(bench::read_file(opt.observations_path)), anchor);
    for (const std::string& note : outcome.fit.notes) {
        std::printf("note: %s\n", note.c_str());
    }
    for (const sim::CalibrationResidual& r : outcome.fit.residuals) {
        std::printf("residual %s %s: predicted=%.4f observed=%.4f\n", r.experiment.c_str(),
                    r.quantity.c_str(), r.predicted, r.observed);
    }
    std::printf("%s", outcome.config_fragment.c_str());
    if (!opt.out_path.empty()) {
        bench::write_file(opt.out_path, outcome.config_fragment);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fuzzy dosing engine for hydroponic nutrient control"};
    app.require_subcommand(1);

    CliOptions opt;
    app.add_option("--config", opt.config_path, "Engine configuration file");

    CLI::App* infer_cmd = app.add_subcommand("infer", "Compute pump durations for a reading");
    infer_cmd->add_option("--ph", opt.infer.ph, "pH reading")->required();
    infer_cmd->add_option("--tds", opt.infer.tds, "TDS reading in ppm")->required();
    infer_cmd->add_flag("--activations", opt.infer.activations,
                        "Also print nonzero rule strengths");

    CLI::App* surface_cmd =
        app.add_subcommand("surface", "Sample a dosing surface over both inputs");
    surface_cmd->add_option("--output", opt.surface.output, "Output variable name");
    surface_cmd->add_option("--ph-steps", opt.surface.ph_steps, "Grid steps on the first input");
    surface_cmd->add_option("--tds-steps", opt.surface.tds_steps,
                            "Grid steps on the second input");
    surface_cmd->add_option("--out", opt.surface.out_path, "Write CSV here instead of stdout");

    CLI::App* run_cmd = app.add_subcommand("run", "Run closed-loop dosing scenarios");
    run_cmd->add_option("--scenarios", opt.run.scenarios_path, "Scenario CSV file")->required();
    run_cmd->add_option("--scenario", opt.run.scenario_name, "Run a single named scenario");
    run_cmd->add_option("--duration", opt.run.duration_s,
                        "Run for a fixed simulated time in seconds");
    run_cmd->add_option("--telemetry", opt.run.telemetry_path,
                        "Write JSON-lines telemetry here");
    run_cmd->add_option("--trace", opt.run.trace_path, "Write a per-step trace CSV here");

    CLI::App* validate_cmd =
        app.add_subcommand("validate", "Compare simulated durations against references");
    validate_cmd->add_option("--reference", opt.validate.reference_path, "Reference CSV file")
        ->required();
    validate_cmd->add_option("--out", opt.validate.out_path, "Write the comparison CSV here");
    validate_cmd->add_option("--max-ph-error", opt.validate.max_ph_error_ms,
                             "Acceptance gate for pH pump errors in ms");

    CLI::App* calibrate_cmd =
        app.add_subcommand("calibrate", "Fit dosing parameters from recorded transitions");
    calibrate_cmd
        ->add_option("--observations", opt.calibrate.observations_path, "Observation CSV file")
        ->required();
    calibrate_cmd
        ->add_option("--ab-anchor", opt.calibrate.anchor,
                     "Fit the AB universe: pH, TDS, and target duration in ms")
        ->expected(3);
    calibrate_cmd->add_option("--out", opt.calibrate.out_path,
                              "Write the fitted config fragment here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const bench::BenchConfig cfg = load_config_or_default(opt.config_path);
        if (infer_cmd->parsed()) {
            return cmd_infer(cfg, opt.infer);
        }
        if (surface_cmd->parsed()) {
            return cmd_surface(cfg, opt.surface);
        }
        if (run_cmd->parsed()) {
            return cmd_run(cfg, opt.run);
        }
        if (validate_cmd->parsed()) {
            return cmd_validate(cfg, opt.validate);
        }
        if (calibrate_cmd->parsed()) {
            return cmd_calibrate(cfg, opt.calibrate);
        }
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 3;
    } catch (const DefinitionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const SensorFault& e) {
        std::cerr << "sensor fault: " << e.what() << "\n";
        return 2;
    } catch (const OverflowFault& e) {
        std::cerr << "overflow fault: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
