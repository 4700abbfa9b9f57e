#pragma once

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "fuzzydose/errors.hpp"
#include "fuzzydose/fis.hpp"

namespace fuzzydose::hydro {

inline constexpr double kPhUniverseLo = 0.0;
inline constexpr double kPhUniverseHi = 14.0;
inline constexpr double kTdsUniverseLo = 0.0;
inline constexpr double kTdsUniverseHi = 1400.0;
inline constexpr double kPumpUniverseHi = 3000.0;
inline constexpr double kDefaultAbUniverseHi = 7500.0;
inline constexpr double kMinAbUniverseHi = 2400.0;

// The five-variable, fourteen-rule bank for NFT nutrient dosing.  The AB pump
// universe upper bound is the one calibratable piece of the bank shape.
inline FisDefinition builtin_hydro_fis(double ab_universe_hi = kDefaultAbUniverseHi) {
    if (!(ab_universe_hi >= kMinAbUniverseHi)) {
        throw DefinitionError("ab_mix universe must reach at least 2400 ms");
    }
    using Mf = PiecewiseLinearMf;

    LinguisticVariable ph("ph", VariableKind::input,
                          UniverseInterval(kPhUniverseLo, kPhUniverseHi, 0.01));
    ph.add_term("strong_acid", Mf::shoulder_down(1.0, 4.0));
    ph.add_term("weak_acid", Mf::triangle(1.0, 4.0, 5.5));
    ph.add_term("normal", Mf::trapezoid(4.0, 5.5, 6.5, 8.0));
    ph.add_term("weak_alkaline", Mf::triangle(6.5, 8.0, 11.0));
    ph.add_term("strong_alkaline", Mf::shoulder_up(8.0, 11.0));

    LinguisticVariable tds("tds", VariableKind::input,
                           UniverseInterval(kTdsUniverseLo, kTdsUniverseHi, 1.0));
    tds.add_term("very_low", Mf::shoulder_down(150.0, 625.0));
    tds.add_term("low", Mf::triangle(150.0, 625.0, 1050.0));
    tds.add_term("normal", Mf::trapezoid(625.0, 1050.0, 1400.0, 1400.0));

    LinguisticVariable ph_up("ph_up", VariableKind::output,
                             UniverseInterval(0.0, kPumpUniverseHi, 1.0));
    ph_up.add_term("fast", Mf::shoulder_down(300.0, 1800.0));
    ph_up.add_term("slow", Mf::shoulder_up(300.0, 1800.0));

    LinguisticVariable ph_down("ph_down", VariableKind::output,
                               UniverseInterval(0.0, kPumpUniverseHi, 1.0));
    ph_down.add_term("fast", Mf::shoulder_down(300.0, 1800.0));
    ph_down.add_term("slow", Mf::shoulder_up(300.0, 1800.0));

    LinguisticVariable ab_mix("ab_mix", VariableKind::output,
                              UniverseInterval(0.0, ab_universe_hi, 1.0));
    ab_mix.add_term("fast", Mf::shoulder_down(400.0, 2400.0));
    ab_mix.add_term("slow", Mf::shoulder_up(400.0, 2400.0));

    auto rule = [](std::vector<RuleClause> antecedent, std::vector<RuleClause> consequent) {
        return Rule{std::move(antecedent), std::move(consequent)};
    };

    std::vector<Rule> rules;
    rules.push_back(rule({{"ph", "strong_acid"}, {"tds", "very_low"}},
                         {{"ph_up", "slow"}, {"ab_mix", "slow"}}));
    rules.push_back(rule({{"ph", "strong_acid"}, {"tds", "low"}},
                         {{"ph_up", "slow"}, {"ab_mix", "fast"}}));
    rules.push_back(rule({{"ph", "strong_acid"}, {"tds", "normal"}}, {{"ph_up", "slow"}}));
    rules.push_back(rule({{"ph", "weak_acid"}, {"tds", "very_low"}},
                         {{"ph_up", "fast"}, {"ab_mix", "slow"}}));
    rules.push_back(rule({{"ph", "weak_acid"}, {"tds", "low"}},
                         {{"ph_up", "fast"}, {"ab_mix", "fast"}}));
    rules.push_back(rule({{"ph", "weak_acid"}, {"tds", "normal"}}, {{"ph_up", "fast"}}));
    rules.push_back(
        rule({{"ph", "normal"}, {"tds", "very_low"}}, {{"ab_mix", "slow"}}));
    rules.push_back(rule({{"ph", "normal"}, {"tds", "low"}}, {{"ab_mix", "fast"}}));
    rules.push_back(rule({{"ph", "weak_alkaline"}, {"tds", "very_low"}},
                         {{"ph_down", "fast"}, {"ab_mix", "slow"}}));
    rules.push_back(rule({{"ph", "weak_alkaline"}, {"tds", "low"}},
                         {{"ph_down", "fast"}, {"ab_mix", "fast"}}));
    rules.push_back(
        rule({{"ph", "weak_alkaline"}, {"tds", "normal"}}, {{"ph_down", "fast"}}));
    rules.push_back(rule({{"ph", "strong_alkaline"}, {"tds", "very_low"}},
                         {{"ph_down", "slow"}, {"ab_mix", "slow"}}));
    rules.push_back(rule({{"ph", "strong_alkaline"}, {"tds", "low"}},
                         {{"ph_down", "slow"}, {"ab_mix", "fast"}}));
    rules.push_back(
        rule({{"ph", "strong_alkaline"}, {"tds", "normal"}}, {{"ph_down", "slow"}}));

    std::vector<LinguisticVariable> variables;
    variables.push_back(std::move(ph));
    variables.push_back(std::move(tds));
    variables.push_back(std::move(ph_up));
    variables.push_back(std::move(ph_down));
    variables.push_back(std::move(ab_mix));
    return FisDefinition(std::move(variables), std::move(rules));
}

struct NutrientReading {
    double ph = 7.0;
    double tds_ppm = 0.0;
};

// Sensor values are clamped to the rulebank universes before inference; a
// non-finite value is a hard sensor fault.
inline NutrientReading clamp_reading(double raw_ph, double raw_tds_ppm) {
    if (!std::isfinite(raw_ph)) {
        throw SensorFault("pH reading is not finite");
    }
    if (!std::isfinite(raw_tds_ppm)) {
        throw SensorFault("TDS reading is not finite");
    }
    NutrientReading r;
    r.ph = std::min(kPhUniverseHi, std::max(kPhUniverseLo, raw_ph));
    r.tds_ppm = std::min(kTdsUniverseHi, std::max(kTdsUniverseLo, raw_tds_ppm));
    return r;
}

struct NormalBand {
    double ph_lo = 5.5;
    double ph_hi = 6.5;
    double tds_lo = 1050.0;
    double tds_hi = 1400.0;

    bool contains(const NutrientReading& r) const {
        return r.ph >= ph_lo && r.ph <= ph_hi && r.tds_ppm >= tds_lo && r.tds_ppm <= tds_hi;
    }
};

struct DoseCommand {
    double ph_up_ms = 0.0;
    double ph_down_ms = 0.0;
    double ab_ms = 0.0;

    bool any() const { return ph_up_ms > 0.0 || ph_down_ms > 0.0 || ab_ms > 0.0; }

    friend bool operator==(const DoseCommand&, const DoseCommand&) = default;
};

struct RuleActivation {
    std::size_t rule_index = 0;
    double strength = 0.0;
};

class HydroController {
  public:
    explicit HydroController(FisDefinition fis = builtin_hydro_fis(), NormalBand band = {})
        : fis_(std::make_shared<FisDefinition>(std::move(fis))),
          band_(band),
          engine_(*fis_),
          ph_slot_(engine_.input_slot("ph")),
          tds_slot_(engine_.input_slot("tds")),
          up_slot_(engine_.output_slot("ph_up")),
          down_slot_(engine_.output_slot("ph_down")),
          ab_slot_(engine_.output_slot("ab_mix")) {}

    const FisDefinition& fis() const { return *fis_; }
    const Engine& engine() const { return engine_; }
    const NormalBand& band() const { return band_; }

    bool is_normal(const NutrientReading& r) const { return band_.contains(r); }

    // Pump run times in milliseconds, rounded to 0.01 ms.
    DoseCommand compute_dose(const NutrientReading& r) const {
        const std::vector<double> strengths = strengths_for(r);
        DoseCommand dose;
        dose.ph_up_ms = round_ms(engine_.defuzzify_clips(up_slot_, engine_.term_clips(up_slot_, strengths)));
        dose.ph_down_ms =
            round_ms(engine_.defuzzify_clips(down_slot_, engine_.term_clips(down_slot_, strengths)));
        dose.ab_ms = round_ms(engine_.defuzzify_clips(ab_slot_, engine_.term_clips(ab_slot_, strengths)));
        return dose;
    }

    std::vector<RuleActivation> rule_activations(const NutrientReading& r) const {
        const std::vector<double> strengths = strengths_for(r);
        std::vector<RuleActivation> active;
        for (std::size_t i = 0; i < strengths.size(); ++i) {
            if (strengths[i] > 0.0) {
                active.push_back({i, strengths[i]});
            }
        }
        return active;
    }

  private:
    std::vector<double> strengths_for(const NutrientReading& r) const {
        std::vector<double> inputs(engine_.input_count(), 0.0);
        inputs[ph_slot_] = r.ph;
        inputs[tds_slot_] = r.tds_ppm;
        return engine_.rule_strengths(inputs);
    }

    static double round_ms(double ms) { return std::round(ms * 100.0) / 100.0; }

    std::shared_ptr<const FisDefinition> fis_;
    NormalBand band_;
    Engine engine_;
    std::size_t ph_slot_;
    std::size_t tds_slot_;
    std::size_t up_slot_;
    std::size_t down_slot_;
    std::size_t ab_slot_;
};

}  // namespace fuzzydose::hydro
