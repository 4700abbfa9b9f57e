#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fuzzydose/bench.hpp"

using namespace fuzzydose;

namespace {

const std::string kDataDir = FUZZYDOSE_DATA_DIR;
const std::string kCliPath = FUZZYDOSE_CLI_PATH;

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return std::string(buf);
}

bool report(const char* id, bool ok, const std::string& detail) {
    std::printf("criterion %s: %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
    return ok;
}

bench::BenchConfig calibrated_config() {
    return bench::load_config(kDataDir + "/calibrated.cfg");
}

struct EngineView {
    hydro::HydroController controller;
    std::size_t slot_ph;
    std::size_t slot_tds;
    std::size_t slot_up;
    std::size_t slot_down;
    std::size_t slot_ab;

    explicit EngineView(const bench::BenchConfig& cfg)
        : controller(bench::make_controller(cfg)),
          slot_ph(controller.engine().input_slot("ph")),
          slot_tds(controller.engine().input_slot("tds")),
          slot_up(controller.engine().output_slot("ph_up")),
          slot_down(controller.engine().output_slot("ph_down")),
          slot_ab(controller.engine().output_slot("ab_mix")) {}

    const Engine& engine() const { return controller.engine(); }

    double duration(std::size_t slot, double ph, double tds) const {
        std::vector<double> point(2, 0.0);
        point[slot_ph] = ph;
        point[slot_tds] = tds;
        const std::vector<double> strengths = engine().rule_strengths(point);
        return engine().defuzzify_clips(slot, engine().term_clips(slot, strengths));
    }
};

}  // namespace

TEST_CASE("acid reading yields the recorded up-pump duration within budget", "[c1]") {
    const hydro::HydroController controller = bench::make_controller(calibrated_config());
    const hydro::NutrientReading reading = hydro::clamp_reading(4.54, 272.0);
    const hydro::DoseCommand dose = controller.compute_dose(reading);
    double best_ms = 1e300;
    double sink = 0.0;
    for (int i = 0; i < 200; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        const hydro::DoseCommand d = controller.compute_dose(reading);
        const auto t1 = std::chrono::steady_clock::now();
        best_ms = std::min(best_ms, std::chrono::duration<double, std::milli>(t1 - t0).count());
        sink += d.ph_up_ms;
    }
    const bool ok = std::fabs(dose.ph_up_ms - 689.09) <= 1.0 && best_ms < 10.0 && sink > 0.0;
    REQUIRE(report("c1", ok,
                   fmt("ph_up(4.54, 272) = %.2f ms vs 689.09 +/- 1.0 ms; inference takes "
                       "%.4f ms (budget 10 ms)",
                       dose.ph_up_ms, best_ms)));
}

TEST_CASE("alkaline reading yields the recorded down-pump duration", "[c2]") {
    const hydro::HydroController controller = bench::make_controller(calibrated_config());
    const hydro::DoseCommand dose = controller.compute_dose(hydro::clamp_reading(10.55, 324.0));
    const bool ok = std::fabs(dose.ph_down_ms - 1800.89) <= 2.0;
    REQUIRE(report("c2", ok,
                   fmt("ph_down(10.55, 324) = %.2f ms vs 1800.89 +/- 2.0 ms", dose.ph_down_ms)));
}

TEST_CASE("the calibrated AB universe reproduces the anchored duration", "[c3]") {
    const std::string fragment_path = "/tmp/fuzzydose_acceptance_fragment.cfg";
    const std::string cmd = "'" + kCliPath + "' --config '" + kDataDir +
                            "/calibrated.cfg' calibrate --observations '" + kDataDir +
                            "/bench_observations.csv' --ab-anchor 4.54 272 4223.34 --out '" +
                            fragment_path + "' > /dev/null";
    const int rc = std::system(cmd.c_str());
    double fitted = 0.0;
    std::istringstream fragment(bench::read_file(fragment_path));
    std::string line;
    while (std::getline(fragment, line)) {
        if (line.rfind("u_ab = ", 0) == 0) {
            fitted = std::strtod(line.c_str() + 7, nullptr);
        }
    }
    const double duration = fitted > 0.0 ? bench::ab_duration_at(fitted, 4.54, 272.0) : 0.0;
    const double rel = std::fabs(duration - 4223.34) / 4223.34;

    hydro::HydroController refit(hydro::builtin_hydro_fis(fitted > 0.0 ? fitted : 7500.0),
                                 hydro::NormalBand{});
    const hydro::DoseCommand up = refit.compute_dose(hydro::clamp_reading(4.54, 272.0));
    const hydro::DoseCommand down = refit.compute_dose(hydro::clamp_reading(10.55, 324.0));
    const bool ok = rc == 0 && fitted > 0.0 && rel <= 0.005 &&
                    std::fabs(up.ph_up_ms - 689.09) <= 1.0 &&
                    std::fabs(down.ph_down_ms - 1800.89) <= 2.0;
    REQUIRE(report("c3", ok,
                   fmt("calibrate fitted u_ab = %.0f; ab(4.54, 272) = %.2f ms vs 4223.34 "
                       "(off %.3f%%, gate 0.5%%); ph_up %.2f and ph_down %.2f ms unchanged",
                       fitted, duration, rel * 100.0, up.ph_up_ms, down.ph_down_ms)));
}

TEST_CASE("dosing surfaces hit the recorded maxima and stay quiet in band", "[c4]") {
    const bench::BenchConfig cfg = calibrated_config();
    const EngineView view(cfg);
    double up_max = 0.0;
    double down_max = 0.0;
    double ab_max = 0.0;
    double band_max = 0.0;
    int band_points = 0;
    std::vector<double> point(2, 0.0);
    for (int i = 0; i < 141; ++i) {
        const double ph = 14.0 * static_cast<double>(i) / 140.0;
        for (int j = 0; j < 141; ++j) {
            const double tds = 1400.0 * static_cast<double>(j) / 140.0;
            point[view.slot_ph] = ph;
            point[view.slot_tds] = tds;
            const std::vector<double> strengths = view.engine().rule_strengths(point);
            const Engine& e = view.engine();
            const double du =
                e.defuzzify_clips(view.slot_up, e.term_clips(view.slot_up, strengths));
            const double dd =
                e.defuzzify_clips(view.slot_down, e.term_clips(view.slot_down, strengths));
            const double da =
                e.defuzzify_clips(view.slot_ab, e.term_clips(view.slot_ab, strengths));
            up_max = std::max(up_max, du);
            down_max = std::max(down_max, dd);
            ab_max = std::max(ab_max, da);
            if (ph >= cfg.band.ph_lo && ph <= cfg.band.ph_hi && tds >= cfg.band.tds_lo &&
                tds <= cfg.band.tds_hi) {
                ++band_points;
                band_max = std::max(band_max, std::max(du, std::max(dd, da)));
            }
        }
    }
    const bool ok = up_max >= 1950.0 && up_max <= 2005.0 && down_max >= 1950.0 &&
                    down_max <= 2005.0 && ab_max >= 4300.0 && ab_max <= 4600.0 &&
                    band_points > 0 && band_max == 0.0;
    REQUIRE(report("c4", ok,
                   fmt("surface maxima: ph_up %.2f, ph_down %.2f (gate [1950, 2005]), "
                       "ab %.2f (gate [4300, 4600]); %d in-band grid points, largest dose "
                       "there %.4f ms",
                       up_max, down_max, ab_max, band_points, band_max)));
}

TEST_CASE("the bundled scenarios converge on the recorded step counts", "[c5]") {
    const bench::BenchConfig cfg = calibrated_config();
    const std::vector<bench::Scenario> scenarios =
        bench::parse_scenarios(bench::read_file(kDataDir + "/bench_scenarios.csv"));
    const int expected[6] = {1, 1, 2, 1, 3, 2};
    bool ok = scenarios.size() == 6;
    std::string counts;
    const auto t0 = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const bench::ScenarioOutcome outcome = bench::run_scenario(cfg, scenarios[i]);
        const int steps = static_cast<int>(outcome.result.steps.size());
        ok = ok && outcome.result.converged && i < 6 && steps == expected[i] &&
             cfg.band.contains(outcome.result.final_reading);
        if (!counts.empty()) {
            counts += ' ';
        }
        counts += std::to_string(steps);
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ok = ok && elapsed < 5.0;
    REQUIRE(report("c5", ok,
                   fmt("steps [%s] vs [1 1 2 1 3 2], all converged inside the band, "
                       "suite took %.3f s (budget 5 s)",
                       counts.c_str(), elapsed)));
}

namespace {

struct ShoulderPairChannel {
    std::size_t slot = 0;
    double lo = 0.0;
    double hi = 0.0;
    double h_fine = 0.0;
    double edge_lo = 0.0;
    double edge_hi = 0.0;
};

double fine_trapezoid_centroid(const ShoulderPairChannel& o, double clip_fast, double clip_slow) {
    if (clip_fast <= 0.0 && clip_slow <= 0.0) {
        return 0.0;
    }
    const long n = std::lround((o.hi - o.lo) / o.h_fine);
    const double inv = 1.0 / (o.edge_hi - o.edge_lo);
    auto mu = [&](long j) {
        const double y = o.lo + static_cast<double>(j) * o.h_fine;
        const double f = std::clamp((o.edge_hi - y) * inv, 0.0, 1.0);
        const double s = std::clamp((y - o.edge_lo) * inv, 0.0, 1.0);
        return std::max(std::min(clip_fast, f), std::min(clip_slow, s));
    };
    long j0 = 0;
    long j1 = n;
    if (clip_fast <= 0.0) {
        j0 = static_cast<long>(o.edge_lo / o.h_fine);
    }
    if (clip_slow <= 0.0) {
        j1 = std::min(n, static_cast<long>(o.edge_hi / o.h_fine) + 1);
    }
    double num = 0.0;
    double den = 0.0;
    for (long j = j0; j <= j1; ++j) {
        const double m = mu(j);
        num += (o.lo + static_cast<double>(j) * o.h_fine) * m;
        den += m;
    }
    if (j0 == 0) {
        const double m = mu(0);
        num -= 0.5 * o.lo * m;
        den -= 0.5 * m;
    }
    if (j1 == n) {
        const double m = mu(n);
        num -= 0.5 * (o.lo + static_cast<double>(n) * o.h_fine) * m;
        den -= 0.5 * m;
    }
    return den < 1e-12 ? 0.0 : num / den;
}

}  // namespace

TEST_CASE("sampled centroids agree with a hundredfold-finer quadrature", "[c6]") {
    const bench::BenchConfig cfg = calibrated_config();
    const EngineView view(cfg);
    const FisDefinition& fis = view.controller.fis();

    std::vector<ShoulderPairChannel> channels;
    for (const LinguisticVariable* out : fis.outputs()) {
        REQUIRE(out->terms().size() == 2);
        REQUIRE(out->terms()[0].first == "fast");
        REQUIRE(out->terms()[1].first == "slow");
        ShoulderPairChannel channel;
        channel.slot = view.engine().output_slot(out->name());
        channel.lo = out->universe().lo;
        channel.hi = out->universe().hi;
        channel.h_fine = out->universe().resolution / 100.0;
        const bool ab = out->name() == "ab_mix";
        channel.edge_lo = ab ? 400.0 : 300.0;
        channel.edge_hi = ab ? 2400.0 : 1800.0;
        channels.push_back(channel);
    }

    std::mt19937_64 rng(20260816);
    std::uniform_real_distribution<double> ph_dist(0.0, 14.0);
    std::uniform_real_distribution<double> tds_dist(0.0, 1400.0);
    double worst = 0.0;
    std::vector<double> point(2, 0.0);
    for (int trial = 0; trial < 10000; ++trial) {
        point[view.slot_ph] = ph_dist(rng);
        point[view.slot_tds] = tds_dist(rng);
        const std::vector<double> strengths = view.engine().rule_strengths(point);
        for (const ShoulderPairChannel& channel : channels) {
            const std::vector<double> clips = view.engine().term_clips(channel.slot, strengths);
            const double production = view.engine().defuzzify_clips(channel.slot, clips);
            const double reference = fine_trapezoid_centroid(channel, clips[0], clips[1]);
            worst = std::max(worst, std::fabs(production - reference));
        }
    }
    const bool ok = worst <= 0.5;
    REQUIRE(report("c6", ok,
                   fmt("max |sampled - fine quadrature| = %.6f ms over 10000 random readings "
                       "x 3 outputs (gate 0.5 ms)",
                       worst)));
}

TEST_CASE("input term sets sum to one everywhere", "[c7a]") {
    const FisDefinition fis = hydro::builtin_hydro_fis(7733.0);
    double worst = 0.0;
    for (const LinguisticVariable* input : fis.inputs()) {
        const double lo = input->universe().lo;
        const double hi = input->universe().hi;
        const long n = std::lround((hi - lo) / 0.001);
        for (long k = 0; k <= n; ++k) {
            const double x = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(n);
            double sum = 0.0;
            for (const auto& [name, mf] : input->terms()) {
                sum += mf.evaluate(x);
            }
            worst = std::max(worst, std::fabs(sum - 1.0));
        }
    }
    const bool ok = worst <= 1e-9;
    REQUIRE(report("c7a", ok,
                   fmt("max |sum of term degrees - 1| = %.3g over 0.001-step scans of both "
                       "inputs (gate 1e-9)",
                       worst)));
}

TEST_CASE("up and down channels mirror about neutral pH", "[c7b]") {
    const EngineView view(calibrated_config());
    const Engine& e = view.engine();
    REQUIRE(e.defuzzify_clips(view.slot_up, std::vector<double>{0.0, 0.0}) == 0.0);
    REQUIRE(e.defuzzify_clips(view.slot_down, std::vector<double>{0.0, 0.0}) == 0.0);

    double worst = 0.0;
    double worst_ph = 0.0;
    double worst_tds = 0.0;
    std::vector<double> point(2, 0.0);
    for (int i = 0; i <= 1200; ++i) {
        const double ph = 12.0 * static_cast<double>(i) / 1200.0;
        for (int j = 0; j <= 1400; ++j) {
            const double tds = static_cast<double>(j);
            point[view.slot_ph] = ph;
            point[view.slot_tds] = tds;
            const std::vector<double> up_clips =
                e.term_clips(view.slot_up, e.rule_strengths(point));
            point[view.slot_ph] = 12.0 - ph;
            const std::vector<double> down_clips =
                e.term_clips(view.slot_down, e.rule_strengths(point));
            if (up_clips[0] <= 0.0 && up_clips[1] <= 0.0 && down_clips[0] <= 0.0 &&
                down_clips[1] <= 0.0) {
                continue;
            }
            const double du = e.defuzzify_clips(view.slot_up, up_clips);
            const double dd = e.defuzzify_clips(view.slot_down, down_clips);
            const double diff = std::fabs(du - dd);
            if (diff > worst) {
                worst = diff;
                worst_ph = ph;
                worst_tds = tds;
            }
        }
    }
    const bool ok = worst <= 0.5;
    REQUIRE(report("c7b", ok,
                   fmt("max |ph_up(ph, tds) - ph_down(12 - ph, tds)| = %.3g ms at "
                       "(%.2f, %.0f) over the 0.01 x 1 grid (gate 0.5 ms)",
                       worst, worst_ph, worst_tds)));
}

TEST_CASE("up and down dosing never fire together", "[c7c]") {
    const EngineView view(calibrated_config());
    const Engine& e = view.engine();
    long violations = 0;
    double worst_product = 0.0;
    std::vector<double> point(2, 0.0);
    std::mt19937_64 rng(4242);
    std::uniform_int_distribution<int> pick(0, 1400);
    for (int i = 0; i <= 1400; ++i) {
        const double ph = 14.0 * static_cast<double>(i) / 1400.0;
        for (int j = 0; j <= 1400; ++j) {
            point[view.slot_ph] = ph;
            point[view.slot_tds] = static_cast<double>(j);
            const std::vector<double> strengths = e.rule_strengths(point);
            const std::vector<double> up_clips = e.term_clips(view.slot_up, strengths);
            const std::vector<double> down_clips = e.term_clips(view.slot_down, strengths);
            const bool up_active = up_clips[0] > 0.0 || up_clips[1] > 0.0;
            const bool down_active = down_clips[0] > 0.0 || down_clips[1] > 0.0;
            if (up_active && down_active) {
                ++violations;
                worst_product = std::max(
                    worst_product, e.defuzzify_clips(view.slot_up, up_clips) *
                                       e.defuzzify_clips(view.slot_down, down_clips));
            }
        }
    }
    for (int probe = 0; probe < 300; ++probe) {
        const double ph = 14.0 * static_cast<double>(pick(rng)) / 1400.0;
        const double tds = static_cast<double>(pick(rng));
        const double product =
            view.duration(view.slot_up, ph, tds) * view.duration(view.slot_down, ph, tds);
        worst_product = std::max(worst_product, product);
    }
    const bool ok = violations == 0 && worst_product == 0.0;
    REQUIRE(report("c7c", ok,
                   fmt("%ld grid points with both channels active; largest duration product "
                       "%.3g (must be 0)",
                       violations, worst_product)));
}

TEST_CASE("AB dosing is monotone non-increasing in TDS", "[c7d]") {
    const EngineView view(calibrated_config());
    double worst_rise = 0.0;
    double rise_ph = 0.0;
    double rise_from_tds = 0.0;
    double rise_from_ms = 0.0;
    double rise_to_tds = 0.0;
    double rise_to_ms = 0.0;
    for (int pi = 0; pi <= 28; ++pi) {
        const double ph = 0.5 * static_cast<double>(pi);
        double min_ms = 1e300;
        double min_tds = 0.0;
        for (int tds = 0; tds <= 1400; ++tds) {
            const double ms = view.duration(view.slot_ab, ph, static_cast<double>(tds));
            if (ms < min_ms) {
                min_ms = ms;
                min_tds = static_cast<double>(tds);
            }
            const double rise = ms - min_ms;
            if (rise > worst_rise) {
                worst_rise = rise;
                rise_ph = ph;
                rise_from_tds = min_tds;
                rise_from_ms = min_ms;
                rise_to_tds = static_cast<double>(tds);
                rise_to_ms = ms;
            }
        }
    }
    const bool ok = worst_rise <= 1e-9;
    REQUIRE(report("c7d", ok,
                   fmt("ab duration rises %.2f ms along increasing TDS at ph %.2f: "
                       "%.2f ms at tds %.0f grows to %.2f ms at tds %.0f (gate: "
                       "non-increasing)",
                       worst_rise, rise_ph, rise_from_ms, rise_from_tds, rise_to_ms,
                       rise_to_tds)));
}

namespace {

FisDefinition random_bank(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double hi = unit(rng) < 0.5 ? 10.0 : 20.0;
    const UniverseInterval universe(0.0, hi, hi / 200.0);

    auto random_mf = [&]() {
        std::array<double, 4> k{};
        for (double& v : k) {
            v = unit(rng) * hi;
        }
        std::sort(k.begin(), k.end());
        switch (static_cast<int>(unit(rng) * 4.0)) {
            case 0:
                return PiecewiseLinearMf::shoulder_down(k[0], k[2]);
            case 1:
                return PiecewiseLinearMf::shoulder_up(k[1], k[3]);
            case 2:
                return PiecewiseLinearMf::triangle(k[0], k[1], k[3]);
            default:
                return PiecewiseLinearMf::trapezoid(k[0], k[1], k[2], k[3]);
        }
    };

    auto make_var = [&](const std::string& name, VariableKind kind) {
        LinguisticVariable var(name, kind, universe);
        const int term_count = 1 + static_cast<int>(unit(rng) * 3.0);
        for (int t = 0; t < term_count; ++t) {
            var.add_term("m" + std::to_string(t), random_mf());
        }
        return var;
    };

    std::vector<LinguisticVariable> vars;
    vars.push_back(make_var("a", VariableKind::input));
    vars.push_back(make_var("b", VariableKind::input));
    vars.push_back(make_var("x", VariableKind::output));
    const bool two_outputs = unit(rng) < 0.5;
    if (two_outputs) {
        vars.push_back(make_var("y", VariableKind::output));
    }

    auto term_of = [&](const LinguisticVariable& var) {
        const std::size_t i = static_cast<std::size_t>(unit(rng) * var.terms().size());
        return var.terms()[std::min(i, var.terms().size() - 1)].first;
    };

    std::vector<Rule> rules;
    const int rule_count = 1 + static_cast<int>(unit(rng) * 5.0);
    for (int r = 0; r < rule_count; ++r) {
        Rule rule;
        for (std::size_t v = 0; v < 2; ++v) {
            if (unit(rng) < 0.7) {
                rule.antecedent.push_back({vars[v].name(), term_of(vars[v])});
            }
        }
        if (rule.antecedent.empty()) {
            rule.antecedent.push_back({vars[0].name(), term_of(vars[0])});
        }
        for (std::size_t v = 2; v < vars.size(); ++v) {
            if (unit(rng) < 0.7) {
                rule.consequent.push_back({vars[v].name(), term_of(vars[v])});
            }
        }
        if (rule.consequent.empty()) {
            rule.consequent.push_back({vars[2].name(), term_of(vars[2])});
        }
        rules.push_back(std::move(rule));
    }
    return FisDefinition(std::move(vars), std::move(rules));
}

}  // namespace

TEST_CASE("rulebank text round-trips for generated and bundled banks", "[c8]") {
    std::mt19937_64 rng(7070);
    int round_tripped = 0;
    std::string failure;
    for (int trial = 0; trial < 1000; ++trial) {
        const FisDefinition bank = random_bank(rng);
        const std::string text = dsl::serialize(bank);
        const FisDefinition parsed = dsl::parse(text);
        if (!(parsed == bank) || dsl::serialize(parsed) != text) {
            failure = fmt("trial %d diverged", trial);
            break;
        }
        ++round_tripped;
    }

    const FisDefinition bundled = dsl::parse(bench::read_file(kDataDir + "/hydro.fzb"));
    const LinguisticVariable* ph = bundled.find_variable("ph");
    const LinguisticVariable* tds = bundled.find_variable("tds");
    const bool bundled_ok = bundled.rules().size() == 14 && bundled.inputs().size() == 2 &&
                            bundled.outputs().size() == 3 && ph != nullptr &&
                            ph->terms().size() == 5 && tds != nullptr &&
                            tds->terms().size() == 3;
    const bool ok = round_tripped == 1000 && bundled_ok;
    REQUIRE(report("c8", ok,
                   fmt("%d/1000 random banks round-tripped%s%s; bundled bank: %zu rules, "
                       "%zu+%zu input terms, %zu outputs",
                       round_tripped, failure.empty() ? "" : ", ", failure.c_str(),
                       bundled.rules().size(), ph ? ph->terms().size() : 0,
                       tds ? tds->terms().size() : 0, bundled.outputs().size())));
}

TEST_CASE("the reservoir conserves volume and solute mass under dosing", "[c9]") {
    const sim::DoseParams params = calibrated_config().dose;
    std::mt19937_64 rng(990);
    std::uniform_real_distribution<double> vol_dist(5.0, 20.0);
    std::uniform_real_distribution<double> ph_dist(3.0, 11.0);
    std::uniform_real_distribution<double> tds_dist(0.0, 1400.0);
    std::uniform_real_distribution<double> ms_dist(0.0, 2000.0);
    double worst_volume = 0.0;
    double worst_mass = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        sim::ReservoirState state =
            sim::make_state(vol_dist(rng), ph_dist(rng), tds_dist(rng), params);
        double expected_volume = state.volume_l;
        double expected_mass = state.tds_ppm * state.volume_l;
        for (int d = 0; d < 4; ++d) {
            hydro::DoseCommand dose;
            dose.ph_up_ms = ms_dist(rng);
            dose.ph_down_ms = ms_dist(rng);
            dose.ab_ms = ms_dist(rng);
            state = sim::apply_dose(state, dose, params);
            expected_volume += sim::dose_volume_l(dose.ph_up_ms, params) +
                               sim::dose_volume_l(dose.ph_down_ms, params) +
                               sim::dose_volume_l(dose.ab_ms, params);
            expected_mass += params.c_ab_ppm * sim::dose_volume_l(dose.ab_ms, params);
        }
        worst_volume = std::max(worst_volume,
                                std::fabs(state.volume_l - expected_volume) / expected_volume);
        worst_mass =
            std::max(worst_mass, std::fabs(state.tds_ppm * state.volume_l - expected_mass) /
                                     std::max(expected_mass, 1.0));
    }

    int monotone_violations = 0;
    const double starts[3][3] = {{20.0, 4.0, 200.0}, {20.0, 9.0, 800.0}, {10.0, 6.5, 1000.0}};
    for (const double* s : starts) {
        const sim::ReservoirState base = sim::make_state(s[0], s[1], s[2], params);
        double prev_up = -1e300;
        double prev_down = 1e300;
        double prev_tds = -1e300;
        for (int ms = 0; ms <= 3000; ms += 20) {
            hydro::DoseCommand up;
            up.ph_up_ms = ms;
            hydro::DoseCommand down;
            down.ph_down_ms = ms;
            hydro::DoseCommand ab;
            ab.ab_ms = ms;
            const double ph_up = sim::reservoir_ph(sim::apply_dose(base, up, params), params);
            const double ph_down =
                sim::reservoir_ph(sim::apply_dose(base, down, params), params);
            const double tds_ab = sim::apply_dose(base, ab, params).tds_ppm;
            if (ph_up < prev_up - 1e-9 || ph_down > prev_down + 1e-9 ||
                tds_ab < prev_tds - 1e-9) {
                ++monotone_violations;
            }
            prev_up = ph_up;
            prev_down = ph_down;
            prev_tds = tds_ab;
        }
    }
    const bool ok = worst_volume <= 1e-9 && worst_mass <= 1e-9 && monotone_violations == 0;
    REQUIRE(report("c9", ok,
                   fmt("10000 dose sequences: worst relative volume error %.3g, worst "
                       "relative mass error %.3g (gate 1e-9); %d monotonicity violations "
                       "across duration scans",
                       worst_volume, worst_mass, monotone_violations)));
}

TEST_CASE("telemetry lands on the five-minute cadence", "[c10]") {
    const bench::BenchConfig cfg = calibrated_config();
    const std::vector<bench::Scenario> scenarios =
        bench::parse_scenarios(bench::read_file(kDataDir + "/bench_scenarios.csv"));
    REQUIRE(!scenarios.empty());

    auto run_once = [&]() {
        ctl::CollectingTelemetrySink sink;
        bench::run_scenario(cfg, scenarios[0], &sink, 3600.0);
        return sink.records;
    };
    const std::vector<ctl::TelemetryRecord> records = run_once();
    bool cadence_ok = records.size() == 12;
    for (std::size_t i = 0; i < records.size(); ++i) {
        cadence_ok = cadence_ok && records[i].t_s == 300.0 * static_cast<double>(i + 1);
    }
    const std::vector<ctl::TelemetryRecord> rerun = run_once();
    bool identical = rerun.size() == records.size();
    for (std::size_t i = 0; identical && i < records.size(); ++i) {
        identical = ctl::format_telemetry(records[i]) == ctl::format_telemetry(rerun[i]);
    }
    const bool ok = cadence_ok && identical;
    REQUIRE(report("c10", ok,
                   fmt("3600 s run emitted %zu records (want 12) at 300 s multiples; rerun "
                       "byte-identical: %s",
                       records.size(), identical ? "yes" : "no")));
}

TEST_CASE("simulated pH pump durations stay inside the recorded envelope", "[envelope]") {
    const bench::ValidationReport report_rows = bench::validate_durations(
        calibrated_config(),
        bench::parse_validation_rows(bench::read_file(kDataDir + "/validation_reference.csv")));
    const bool ok = report_rows.rows.size() == 14 && report_rows.ph_pump_max_abs_error <= 100.0;
    REQUIRE(report("envelope", ok,
                   fmt("max |pH pump error| = %.2f ms over %zu reference rows (gate 100 ms); "
                       "rmse %.2f ms",
                       report_rows.ph_pump_max_abs_error, report_rows.rows.size(),
                       report_rows.rmse)));
}
