#include <catch2/catch_amalgamated.hpp>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fuzzydose/dsl.hpp"
#include "fuzzydose/hydro.hpp"

using Catch::Approx;
using namespace fuzzydose;
using hydro::DoseCommand;
using hydro::HydroController;
using hydro::NormalBand;
using hydro::NutrientReading;

namespace {

std::string read_whole_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

}  // namespace

TEST_CASE("built-in bank has the expected structure") {
    const FisDefinition fis = hydro::builtin_hydro_fis();
    REQUIRE(fis.variables().size() == 5);
    CHECK(fis.variables()[0].name() == "ph");
    CHECK(fis.variables()[0].kind() == VariableKind::input);
    CHECK(fis.variables()[0].universe().hi == 14.0);
    CHECK(fis.variables()[0].universe().resolution == 0.01);
    CHECK(fis.variables()[0].terms().size() == 5);
    CHECK(fis.variables()[1].name() == "tds");
    CHECK(fis.variables()[1].universe().hi == 1400.0);
    CHECK(fis.variables()[1].terms().size() == 3);
    CHECK(fis.variables()[2].name() == "ph_up");
    CHECK(fis.variables()[2].kind() == VariableKind::output);
    CHECK(fis.variables()[2].universe().hi == 3000.0);
    CHECK(fis.variables()[3].name() == "ph_down");
    CHECK(fis.variables()[4].name() == "ab_mix");
    CHECK(fis.variables()[4].universe().hi == 7500.0);
    CHECK(fis.rules().size() == 14);

    CHECK(hydro::builtin_hydro_fis(7733.0).outputs()[2]->universe().hi == 7733.0);
    CHECK(hydro::builtin_hydro_fis(2400.0).outputs()[2]->universe().hi == 2400.0);
    CHECK_THROWS_AS(hydro::builtin_hydro_fis(2000.0), DefinitionError);
}

TEST_CASE("shipped rulebank file parses back to the built-in bank") {
    const std::string text = read_whole_file(std::string(FUZZYDOSE_DATA_DIR) + "/hydro.fzb");
    const FisDefinition parsed = dsl::parse(text);
    CHECK(parsed == hydro::builtin_hydro_fis());
    CHECK(parsed == hydro::builtin_hydro_fis(7500.0));
    CHECK_FALSE(parsed == hydro::builtin_hydro_fis(7733.0));
    CHECK(dsl::serialize(parsed) == text);
}

TEST_CASE("sensor readings are clamped to the universes") {
    const NutrientReading low = hydro::clamp_reading(-2.0, -50.0);
    CHECK(low.ph == 0.0);
    CHECK(low.tds_ppm == 0.0);
    const NutrientReading high = hydro::clamp_reading(19.5, 5000.0);
    CHECK(high.ph == 14.0);
    CHECK(high.tds_ppm == 1400.0);
    const NutrientReading inside = hydro::clamp_reading(6.2, 1100.0);
    CHECK(inside.ph == 6.2);
    CHECK(inside.tds_ppm == 1100.0);

    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(hydro::clamp_reading(nan, 100.0), SensorFault);
    CHECK_THROWS_AS(hydro::clamp_reading(7.0, nan), SensorFault);
    CHECK_THROWS_AS(hydro::clamp_reading(inf, 100.0), SensorFault);
    CHECK_THROWS_AS(hydro::clamp_reading(7.0, -inf), SensorFault);
}

TEST_CASE("normal band boundaries are inclusive") {
    const NormalBand band;
    CHECK(band.contains({5.5, 1050.0}));
    CHECK(band.contains({6.5, 1400.0}));
    CHECK(band.contains({6.0, 1200.0}));
    CHECK_FALSE(band.contains({5.49, 1200.0}));
    CHECK_FALSE(band.contains({6.51, 1200.0}));
    CHECK_FALSE(band.contains({6.0, 1049.0}));
    CHECK_FALSE(band.contains({6.0, 1401.0}));

    const NormalBand tight{6.0, 6.5, 1100.0, 1400.0};
    const HydroController controller(hydro::builtin_hydro_fis(), tight);
    CHECK(controller.is_normal({6.2, 1200.0}));
    CHECK_FALSE(controller.is_normal({5.8, 1200.0}));
}

TEST_CASE("dose durations match the frozen reference controller") {
    const HydroController stock;

    const DoseCommand acid_mid = stock.compute_dose({4.54, 272.0});
    CHECK(acid_mid.ph_up_ms == 689.09);
    CHECK(acid_mid.ph_down_ms == 0.0);
    CHECK(acid_mid.ab_ms == 4105.97);

    const DoseCommand alkaline = stock.compute_dose({10.55, 324.0});
    CHECK(alkaline.ph_up_ms == 0.0);
    CHECK(alkaline.ph_down_ms == 1800.94);
    CHECK(alkaline.ab_ms == 4010.03);

    const DoseCommand low_tds_only = stock.compute_dose({6.0, 100.0});
    CHECK(low_tds_only.ph_up_ms == 0.0);
    CHECK(low_tds_only.ph_down_ms == 0.0);
    CHECK(low_tds_only.ab_ms == 4422.68);

    const HydroController wide(hydro::builtin_hydro_fis(7733.0));

    const DoseCommand w1 = wide.compute_dose({4.54, 272.0});
    CHECK(w1.ph_up_ms == 689.09);
    CHECK(w1.ab_ms == 4223.55);

    const DoseCommand w2 = wide.compute_dose({10.55, 324.0});
    CHECK(w2.ph_down_ms == 1800.94);
    CHECK(w2.ab_ms == 4127.68);

    const DoseCommand w3 = wide.compute_dose({6.35, 110.0});
    CHECK(w3.ph_up_ms == 0.0);
    CHECK(w3.ph_down_ms == 0.0);
    CHECK(w3.ab_ms == 4540.18);

    const DoseCommand w4 = wide.compute_dose({4.02, 272.0});
    CHECK(w4.ph_up_ms == 662.98);
    CHECK(w4.ab_ms == 4288.28);

    const DoseCommand w5 = wide.compute_dose({9.46, 531.0});
    CHECK(w5.ph_down_ms == 1481.65);
    CHECK(w5.ab_ms == 3088.68);

    const DoseCommand w6 = wide.compute_dose({6.09, 946.0});
    CHECK(w6.ph_up_ms == 0.0);
    CHECK(w6.ph_down_ms == 0.0);
    CHECK(w6.ab_ms == 1082.28);
}

TEST_CASE("readings inside the normal band produce no dose") {
    const HydroController controller;
    const DoseCommand dose = controller.compute_dose({6.0, 1200.0});
    CHECK(dose.ph_up_ms == 0.0);
    CHECK(dose.ph_down_ms == 0.0);
    CHECK(dose.ab_ms == 0.0);
    CHECK_FALSE(dose.any());
    CHECK(controller.rule_activations({6.0, 1200.0}).empty());
}

TEST_CASE("universe extremes fire the single boundary rule") {
    const HydroController controller;

    const DoseCommand floor = controller.compute_dose({0.0, 0.0});
    CHECK(floor.ph_up_ms == 1976.92);
    CHECK(floor.ph_down_ms == 0.0);
    CHECK(floor.ab_ms == 4422.68);
    const auto floor_rules = controller.rule_activations({0.0, 0.0});
    REQUIRE(floor_rules.size() == 1);
    CHECK(floor_rules[0].rule_index == 0);
    CHECK(floor_rules[0].strength == 1.0);

    const DoseCommand ceil = controller.compute_dose({14.0, 1400.0});
    CHECK(ceil.ph_up_ms == 0.0);
    CHECK(ceil.ph_down_ms == 1976.92);
    CHECK(ceil.ab_ms == 0.0);
    const auto ceil_rules = controller.rule_activations({14.0, 1400.0});
    REQUIRE(ceil_rules.size() == 1);
    CHECK(ceil_rules[0].rule_index == 13);
    CHECK(ceil_rules[0].strength == 1.0);
}

TEST_CASE("rule activations list every firing rule with its strength") {
    const HydroController controller;
    const auto active = controller.rule_activations({10.55, 324.0});
    REQUIRE(active.size() == 4);
    CHECK(active[0].rule_index == 8);
    CHECK(active[0].strength == Approx(0.15).epsilon(1e-12));
    CHECK(active[1].rule_index == 9);
    CHECK(active[1].strength == Approx(0.15).epsilon(1e-12));
    CHECK(active[2].rule_index == 11);
    CHECK(active[2].strength == Approx(301.0 / 475.0).epsilon(1e-12));
    CHECK(active[3].rule_index == 12);
    CHECK(active[3].strength == Approx(174.0 / 475.0).epsilon(1e-12));
}

TEST_CASE("dose durations are reported on a centisecond grid") {
    const HydroController controller;
    for (double ph : {2.3, 4.7, 6.1, 7.9, 9.3, 12.8}) {
        for (double tds : {40.0, 310.0, 777.0, 1120.0}) {
            const DoseCommand dose = controller.compute_dose({ph, tds});
            for (double ms : {dose.ph_up_ms, dose.ph_down_ms, dose.ab_ms}) {
                CHECK(ms == std::round(ms * 100.0) / 100.0);
            }
        }
    }
}
