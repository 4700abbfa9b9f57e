#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "fuzzydose/errors.hpp"
#include "fuzzydose/hydro.hpp"

namespace fuzzydose::sim {

inline constexpr double kWaterIonProduct = 1e-14;
inline constexpr double kCapacityL = 25.0;

struct DoseParams {
    double pump_flow_ml_per_s = 55.56;
    double c_up_eq = 0.05565698;
    double c_down_eq = 0.00642522;
    double c_ab_ppm = 86645.72;
    double drift_ph_per_step = 0.0;
    double drift_tds_per_step = 0.0;
    // Weak-acid buffering of the nutrient matrix; zero total keeps the pure
    // strong-acid water model.
    double buffer_total_eq = 0.0;
    double buffer_pka = 5.65;

    void validate() const {
        const bool finite = std::isfinite(pump_flow_ml_per_s) && std::isfinite(c_up_eq) &&
                            std::isfinite(c_down_eq) && std::isfinite(c_ab_ppm) &&
                            std::isfinite(drift_ph_per_step) && std::isfinite(drift_tds_per_step) &&
                            std::isfinite(buffer_total_eq) && std::isfinite(buffer_pka);
        if (!finite) {
            throw DefinitionError("dose parameters must be finite");
        }
        if (pump_flow_ml_per_s <= 0.0) {
            throw DefinitionError("pump_flow_ml_per_s must be positive");
        }
        if (c_up_eq <= 0.0 || c_down_eq <= 0.0 || c_ab_ppm <= 0.0) {
            throw DefinitionError("stock strengths must be positive");
        }
        if (buffer_total_eq < 0.0) {
            throw DefinitionError("buffer_total_eq must be non-negative");
        }
        if (buffer_pka <= 0.0 || buffer_pka >= 14.0) {
            throw DefinitionError("buffer_pka must lie inside (0, 14)");
        }
    }
};

// Net strong-acid equivalents per liter present at hydrogen concentration h,
// relative to neutral water: charge balance of H+, OH-, and (optionally) the
// deprotonated fraction of a weak-acid buffer referenced to pH 7.
inline double net_acid_from_hydrogen(double h, const DoseParams& params) {
    double acid = h - kWaterIonProduct / h;
    if (params.buffer_total_eq > 0.0) {
        const double ka = std::pow(10.0, -params.buffer_pka);
        acid += params.buffer_total_eq * ka / (1e-7 + ka) -
                params.buffer_total_eq * ka / (h + ka);
    }
    return acid;
}

inline double acid_from_ph(double ph, const DoseParams& params) {
    return net_acid_from_hydrogen(std::pow(10.0, -ph), params);
}

inline double ph_from_acid(double acid_eq, const DoseParams& params) {
    if (!std::isfinite(acid_eq)) {
        throw DefinitionError("acid concentration must be finite");
    }
    if (params.buffer_total_eq <= 0.0) {
        const double h = 0.5 * (acid_eq + std::sqrt(acid_eq * acid_eq + 4.0 * kWaterIonProduct));
        return -std::log10(h);
    }
    double lo = -14.0;
    double hi = 0.0;
    if (net_acid_from_hydrogen(std::pow(10.0, lo), params) >= acid_eq) {
        return 14.0;
    }
    if (net_acid_from_hydrogen(std::pow(10.0, hi), params) <= acid_eq) {
        return 0.0;
    }
    for (int i = 0; i < 100; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (net_acid_from_hydrogen(std::pow(10.0, mid), params) < acid_eq) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return -0.5 * (lo + hi);
}

struct ReservoirState {
    double volume_l = 20.0;
    double acid_eq = 0.0;
    double tds_ppm = 0.0;
    double time_s = 0.0;
};

inline ReservoirState make_state(double volume_l, double ph, double tds_ppm,
                                 const DoseParams& params) {
    if (!(volume_l > 0.0) || volume_l > kCapacityL) {
        throw DefinitionError("initial volume must lie in (0, 25] liters");
    }
    ReservoirState s;
    s.volume_l = volume_l;
    s.acid_eq = acid_from_ph(ph, params);
    s.tds_ppm = tds_ppm;
    return s;
}

inline double reservoir_ph(const ReservoirState& state, const DoseParams& params) {
    return ph_from_acid(state.acid_eq, params);
}

inline double dose_volume_l(double duration_ms, const DoseParams& params) {
    return duration_ms / 1000.0 * params.pump_flow_ml_per_s / 1000.0;
}

// Instantaneous well-mixed addition of the commanded stock volumes.  Extensive
// quantities mix linearly, so applying pumps one at a time or all together
// yields the same state.
inline ReservoirState apply_dose(const ReservoirState& state, const hydro::DoseCommand& dose,
                                 const DoseParams& params) {
    if (!(dose.ph_up_ms >= 0.0) || !(dose.ph_down_ms >= 0.0) || !(dose.ab_ms >= 0.0)) {
        throw DefinitionError("pump durations must be non-negative");
    }
    const double v_up = dose_volume_l(dose.ph_up_ms, params);
    const double v_down = dose_volume_l(dose.ph_down_ms, params);
    const double v_ab = dose_volume_l(dose.ab_ms, params);
    const double v_total = v_up + v_down + v_ab;
    const double v0 = state.volume_l;
    if (v0 + v_total > kCapacityL + 1e-9) {
        throw OverflowFault("dose would exceed reservoir capacity");
    }
    ReservoirState next = state;
    if (v_total == 0.0) {
        return next;
    }
    next.volume_l = v0 + v_total;
    next.acid_eq =
        (state.acid_eq * v0 + params.c_down_eq * v_down - params.c_up_eq * v_up) / next.volume_l;
    next.tds_ppm = (state.tds_ppm * v0 + params.c_ab_ppm * v_ab) / next.volume_l;
    return next;
}

// Ambient disturbance over dt seconds.  Drift rates are expressed per 60 s
// settle window and scale linearly with elapsed time.  With zero drift the
// chemical state is returned bit-identical.
inline ReservoirState advance_time(const ReservoirState& state, double dt_s,
                                   const DoseParams& params) {
    if (!(dt_s >= 0.0)) {
        throw DefinitionError("time step must be non-negative");
    }
    ReservoirState next = state;
    next.time_s = state.time_s + dt_s;
    if (params.drift_ph_per_step != 0.0) {
        const double drifted =
            ph_from_acid(state.acid_eq, params) + params.drift_ph_per_step * dt_s / 60.0;
        next.acid_eq = acid_from_ph(drifted, params);
    }
    if (params.drift_tds_per_step != 0.0) {
        next.tds_ppm = std::max(0.0, state.tds_ppm + params.drift_tds_per_step * dt_s / 60.0);
    }
    return next;
}

inline ReservoirState top_up_water(const ReservoirState& state, double add_l,
                                   const DoseParams& params) {
    (void)params;
    if (!(add_l >= 0.0)) {
        throw DefinitionError("top-up volume must be non-negative");
    }
    if (state.volume_l + add_l > kCapacityL + 1e-9) {
        throw OverflowFault("top-up would exceed reservoir capacity");
    }
    if (add_l == 0.0) {
        return state;
    }
    ReservoirState next = state;
    next.volume_l = state.volume_l + add_l;
    next.acid_eq = state.acid_eq * state.volume_l / next.volume_l;
    next.tds_ppm = state.tds_ppm * state.volume_l / next.volume_l;
    return next;
}

// Ultrasonic level sensing: the sensor looks down at the surface, so volume
// falls linearly as measured distance grows.
struct LevelSensorModel {
    double area_cm2 = 1000.0;
    double offset_cm = 27.0;
    double min_distance_cm = 2.0;
    double max_distance_cm = 400.0;
};

inline double level_to_volume(double distance_cm, const LevelSensorModel& model) {
    if (!std::isfinite(distance_cm) || distance_cm < model.min_distance_cm ||
        distance_cm > model.max_distance_cm) {
        throw SensorFault("level reading outside sensor range");
    }
    return (model.offset_cm - distance_cm) * model.area_cm2 / 1000.0;
}

inline double volume_to_level(double volume_l, const LevelSensorModel& model) {
    return model.offset_cm - volume_l * 1000.0 / model.area_cm2;
}

struct DoseObservation {
    std::string experiment;
    double volume_l = 20.0;
    double ph_before = std::numeric_limits<double>::quiet_NaN();
    double tds_before = std::numeric_limits<double>::quiet_NaN();
    hydro::DoseCommand dose;
    double ph_after = std::numeric_limits<double>::quiet_NaN();
    double tds_after = std::numeric_limits<double>::quiet_NaN();
    double drift_ph_per_step = 0.0;
};

struct CalibrationResidual {
    std::string experiment;
    std::string quantity;
    double predicted = 0.0;
    double observed = 0.0;
};

struct CalibrationResult {
    DoseParams params;
    std::vector<CalibrationResidual> residuals;
    std::vector<std::string> notes;
    double ph_sse = 0.0;
    double tds_sse = 0.0;
};

namespace detail {

inline double predict_ph_after(const DoseObservation& row, const DoseParams& params) {
    const double tds0 = std::isfinite(row.tds_before) ? row.tds_before : 0.0;
    ReservoirState state = make_state(row.volume_l, row.ph_before, tds0, params);
    state = apply_dose(state, row.dose, params);
    return ph_from_acid(state.acid_eq, params) + row.drift_ph_per_step;
}

inline double ph_sse_for(const std::vector<const DoseObservation*>& rows,
                         const DoseParams& params) {
    double sse = 0.0;
    for (const DoseObservation* row : rows) {
        const double err = predict_ph_after(*row, params) - row->ph_after;
        sse += err * err;
    }
    return sse;
}

struct TdsTransition {
    std::string experiment;
    double base_term = 0.0;
    double gain_term = 0.0;
    double observed = 0.0;
};

// One aggregate transition per experiment: initial TDS and volume from the
// first usable row, final TDS from the last, with every commanded volume in
// between.  Sequential mixing telescopes, so the predicted final TDS is linear
// in the stock strength: predicted = base_term + gain_term * c_ab_ppm.
inline std::vector<TdsTransition> tds_transitions(const std::vector<DoseObservation>& rows,
                                                  const DoseParams& params) {
    std::vector<std::string> order;
    for (const DoseObservation& row : rows) {
        if (std::find(order.begin(), order.end(), row.experiment) == order.end()) {
            order.push_back(row.experiment);
        }
    }
    std::vector<TdsTransition> transitions;
    for (const std::string& name : order) {
        double v0 = 0.0;
        double tds0 = std::numeric_limits<double>::quiet_NaN();
        double tds1 = std::numeric_limits<double>::quiet_NaN();
        double v_ab = 0.0;
        double v_all = 0.0;
        bool started = false;
        for (const DoseObservation& row : rows) {
            if (row.experiment != name) {
                continue;
            }
            if (!started) {
                if (!std::isfinite(row.tds_before)) {
                    continue;
                }
                started = true;
                v0 = row.volume_l;
                tds0 = row.tds_before;
            }
            v_ab += dose_volume_l(row.dose.ab_ms, params);
            v_all += dose_volume_l(row.dose.ph_up_ms, params) +
                     dose_volume_l(row.dose.ph_down_ms, params) +
                     dose_volume_l(row.dose.ab_ms, params);
            if (std::isfinite(row.tds_after)) {
                tds1 = row.tds_after;
            }
        }
        if (!started || !std::isfinite(tds1) || v_ab <= 0.0) {
            continue;
        }
        TdsTransition t;
        t.experiment = name;
        t.base_term = tds0 * v0 / (v0 + v_all);
        t.gain_term = v_ab / (v0 + v_all);
        t.observed = tds1;
        transitions.push_back(t);
    }
    return transitions;
}

inline double golden_minimize(const std::function<double(double)>& f, double lo, double hi,
                              int iterations) {
    const double inv_phi = 0.6180339887498949;
    double a = lo;
    double b = hi;
    double c = b - (b - a) * inv_phi;
    double d = a + (b - a) * inv_phi;
    double fc = f(c);
    double fd = f(d);
    for (int i = 0; i < iterations; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    return 0.5 * (a + b);
}

inline std::pair<double, double> nelder_mead_2d(
    const std::function<double(double, double)>& f, double x0, double y0, double scale,
    int iterations) {
    struct Vertex {
        double x;
        double y;
        double value;
    };
    auto eval = [&](double x, double y) { return Vertex{x, y, f(x, y)}; };
    std::vector<Vertex> simplex = {eval(x0, y0), eval(x0 + scale, y0), eval(x0, y0 + scale)};
    auto by_value = [](const Vertex& a, const Vertex& b) { return a.value < b.value; };
    for (int it = 0; it < iterations; ++it) {
        std::stable_sort(simplex.begin(), simplex.end(), by_value);
        const Vertex& best = simplex[0];
        const Vertex& second = simplex[1];
        const Vertex& worst = simplex[2];
        const double cx = 0.5 * (best.x + second.x);
        const double cy = 0.5 * (best.y + second.y);
        Vertex reflected = eval(cx + (cx - worst.x), cy + (cy - worst.y));
        if (reflected.value < best.value) {
            Vertex expanded = eval(cx + 2.0 * (cx - worst.x), cy + 2.0 * (cy - worst.y));
            simplex[2] = expanded.value < reflected.value ? expanded : reflected;
        } else if (reflected.value < second.value) {
            simplex[2] = reflected;
        } else {
            const Vertex& base = reflected.value < worst.value ? reflected : worst;
            Vertex contracted = eval(cx + 0.5 * (base.x - cx), cy + 0.5 * (base.y - cy));
            if (contracted.value < base.value) {
                simplex[2] = contracted;
            } else {
                simplex[1] = eval(best.x + 0.5 * (simplex[1].x - best.x),
                                  best.y + 0.5 * (simplex[1].y - best.y));
                simplex[2] = eval(best.x + 0.5 * (simplex[2].x - best.x),
                                  best.y + 0.5 * (simplex[2].y - best.y));
            }
        }
    }
    std::stable_sort(simplex.begin(), simplex.end(), by_value);
    return {simplex[0].x, simplex[0].y};
}

}  // namespace detail

// Fits stock strengths to recorded dosing transitions.  The TDS strength has a
// closed-form least-squares solution; the pH strengths are fitted in log space
// with a fixed-iteration simplex (or a line search when only one pump type is
// observed).  Buffer parameters are inputs, never fitted.
inline CalibrationResult calibrate_dose_params(const std::vector<DoseObservation>& rows,
                                               const DoseParams& base) {
    base.validate();
    CalibrationResult result;
    result.params = base;

    const std::vector<detail::TdsTransition> transitions = detail::tds_transitions(rows, base);
    if (transitions.empty()) {
        result.notes.push_back("no usable TDS transitions; c_ab_ppm left at base value");
    } else {
        double num = 0.0;
        double den = 0.0;
        for (const detail::TdsTransition& t : transitions) {
            num += t.gain_term * (t.observed - t.base_term);
            den += t.gain_term * t.gain_term;
        }
        result.params.c_ab_ppm = num / den;
        result.notes.push_back("fitted c_ab_ppm from " + std::to_string(transitions.size()) +
                               " TDS transitions");
    }

    std::vector<const DoseObservation*> ph_rows;
    bool any_up = false;
    bool any_down = false;
    for (const DoseObservation& row : rows) {
        if (!std::isfinite(row.ph_before) || !std::isfinite(row.ph_after)) {
            continue;
        }
        if (row.dose.ph_up_ms <= 0.0 && row.dose.ph_down_ms <= 0.0) {
            continue;
        }
        ph_rows.push_back(&row);
        any_up = any_up || row.dose.ph_up_ms > 0.0;
        any_down = any_down || row.dose.ph_down_ms > 0.0;
    }

    if (ph_rows.empty()) {
        result.notes.push_back("no usable pH transitions; pump strengths left at base values");
    } else if (any_up && any_down) {
        auto objective = [&](double log_up, double log_down) {
            DoseParams p = result.params;
            p.c_up_eq = std::pow(10.0, log_up);
            p.c_down_eq = std::pow(10.0, log_down);
            return detail::ph_sse_for(ph_rows, p);
        };
        const auto [log_up, log_down] = detail::nelder_mead_2d(
            objective, std::log10(base.c_up_eq), std::log10(base.c_down_eq), 0.3, 400);
        result.params.c_up_eq = std::pow(10.0, log_up);
        result.params.c_down_eq = std::pow(10.0, log_down);
        result.notes.push_back("fitted c_up_eq and c_down_eq from " +
                               std::to_string(ph_rows.size()) + " pH transitions");
    } else if (any_up) {
        auto objective = [&](double log_up) {
            DoseParams p = result.params;
            p.c_up_eq = std::pow(10.0, log_up);
            return detail::ph_sse_for(ph_rows, p);
        };
        const double center = std::log10(base.c_up_eq);
        result.params.c_up_eq =
            std::pow(10.0, detail::golden_minimize(objective, center - 3.0, center + 3.0, 200));
        result.notes.push_back("fitted c_up_eq from " + std::to_string(ph_rows.size()) +
                               " pH transitions; no pH-down doses observed, c_down_eq left "
                               "at base value");
    } else {
        auto objective = [&](double log_down) {
            DoseParams p = result.params;
            p.c_down_eq = std::pow(10.0, log_down);
            return detail::ph_sse_for(ph_rows, p);
        };
        const double center = std::log10(base.c_down_eq);
        result.params.c_down_eq =
            std::pow(10.0, detail::golden_minimize(objective, center - 3.0, center + 3.0, 200));
        result.notes.push_back("fitted c_down_eq from " + std::to_string(ph_rows.size()) +
                               " pH transitions; no pH-up doses observed, c_up_eq left at "
                               "base value");
    }

    for (const DoseObservation* row : ph_rows) {
        CalibrationResidual residual;
        residual.experiment = row->experiment;
        residual.quantity = "ph";
        residual.predicted = detail::predict_ph_after(*row, result.params);
        residual.observed = row->ph_after;
        result.ph_sse += (residual.predicted - residual.observed) *
                         (residual.predicted - residual.observed);
        result.residuals.push_back(residual);
    }
    for (const detail::TdsTransition& t : transitions) {
        CalibrationResidual residual;
        residual.experiment = t.experiment;
        residual.quantity = "tds";
        residual.predicted = t.base_term + t.gain_term * result.params.c_ab_ppm;
        residual.observed = t.observed;
        result.tds_sse += (residual.predicted - residual.observed) *
                          (residual.predicted - residual.observed);
        result.residuals.push_back(residual);
    }
    return result;
}

}  // namespace fuzzydose::sim
