#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fuzzydose/errors.hpp"
#include "fuzzydose/hydro.hpp"
#include "fuzzydose/reservoir.hpp"

namespace fuzzydose::ctl {

enum class Pump { water, ph_up, ph_down, ab };

class DeviceInterface {
  public:
    virtual ~DeviceInterface() = default;
    virtual double read_ph() = 0;
    virtual double read_tds() = 0;
    virtual double read_level_distance() = 0;
    virtual void run_pump(Pump pump, double duration_ms) = 0;
    virtual void sleep_s(double seconds) = 0;
};

// Digital twin of the reservoir behind the device interface.  Dosing pumps mix
// their stock instantly at command time; the refill pump tops up toward its
// target volume; sleeping advances ambient drift.
class SimulatedDevice : public DeviceInterface {
  public:
    SimulatedDevice(sim::ReservoirState initial, sim::DoseParams params,
                    sim::LevelSensorModel level = {}, double refill_ml_per_s = 100.0,
                    double refill_target_l = 20.0)
        : state_(initial),
          params_(params),
          level_(level),
          refill_ml_per_s_(refill_ml_per_s),
          refill_target_l_(refill_target_l) {
        params_.validate();
    }

    double read_ph() override { return sim::reservoir_ph(state_, params_); }
    double read_tds() override { return state_.tds_ppm; }
    double read_level_distance() override {
        return sim::volume_to_level(state_.volume_l, level_);
    }

    void run_pump(Pump pump, double duration_ms) override {
        hydro::DoseCommand dose;
        switch (pump) {
            case Pump::ph_up:
                dose.ph_up_ms = duration_ms;
                break;
            case Pump::ph_down:
                dose.ph_down_ms = duration_ms;
                break;
            case Pump::ab:
                dose.ab_ms = duration_ms;
                break;
            case Pump::water: {
                const double pumped_l = refill_ml_per_s_ * duration_ms / 1e6;
                const double lack_l = std::max(0.0, refill_target_l_ - state_.volume_l);
                state_ = sim::top_up_water(state_, std::min(pumped_l, lack_l), params_);
                return;
            }
        }
        state_ = sim::apply_dose(state_, dose, params_);
    }

    void sleep_s(double seconds) override {
        state_ = sim::advance_time(state_, seconds, params_);
    }

    const sim::ReservoirState& state() const { return state_; }
    const sim::DoseParams& params() const { return params_; }

  private:
    sim::ReservoirState state_;
    sim::DoseParams params_;
    sim::LevelSensorModel level_;
    double refill_ml_per_s_;
    double refill_target_l_;
};

// Refill hysteresis: engage below the low mark, release at the high mark, hold
// in between.  One state change per threshold crossing, never chatter.
struct WaterLatch {
    bool on = false;
};

inline bool water_level_tick(WaterLatch& latch, double volume_l, double on_below_l = 19.0,
                             double off_at_l = 20.0) {
    if (volume_l < on_below_l) {
        latch.on = true;
    } else if (volume_l >= off_at_l) {
        latch.on = false;
    }
    return latch.on;
}

struct TelemetryRecord {
    double t_s = 0.0;
    double volume_l = 0.0;
    double ph = 0.0;
    double tds_ppm = 0.0;
    bool water = false;
    bool ph_up = false;
    bool ph_down = false;
    bool ab = false;
};

// One JSON object per record.  Dosing pump flags mean "fired since the previous
// record"; the water flag is the latch state at the record instant.
inline std::string format_telemetry(const TelemetryRecord& r) {
    auto num = [](double v, const char* fmt) {
        char buf[64];
        if (!std::isfinite(v)) {
            return std::string("null");
        }
        std::snprintf(buf, sizeof(buf), fmt, v);
        return std::string(buf);
    };
    auto flag = [](bool b) { return b ? "true" : "false"; };
    std::string out = "{\"t_s\":" + num(r.t_s, "%.0f");
    out += ",\"volume_l\":" + num(r.volume_l, "%.4f");
    out += ",\"ph\":" + num(r.ph, "%.4f");
    out += ",\"tds_ppm\":" + num(r.tds_ppm, "%.2f");
    out += ",\"pumps\":{\"water\":";
    out += flag(r.water);
    out += ",\"ph_up\":";
    out += flag(r.ph_up);
    out += ",\"ph_down\":";
    out += flag(r.ph_down);
    out += ",\"ab\":";
    out += flag(r.ab);
    out += "}}";
    return out;
}

class TelemetrySink {
  public:
    virtual ~TelemetrySink() = default;
    virtual void record(const TelemetryRecord& r) = 0;
};

class OStreamTelemetrySink : public TelemetrySink {
  public:
    explicit OStreamTelemetrySink(std::ostream& out) : out_(out) {}
    void record(const TelemetryRecord& r) override { out_ << format_telemetry(r) << '\n'; }

  private:
    std::ostream& out_;
};

class CollectingTelemetrySink : public TelemetrySink {
  public:
    void record(const TelemetryRecord& r) override { records.push_back(r); }
    std::vector<TelemetryRecord> records;
};

struct StepTrace {
    int step = 0;
    hydro::NutrientReading before;
    std::vector<hydro::RuleActivation> activations;
    hydro::DoseCommand dose;
    hydro::NutrientReading after;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
};

struct LoopConfig {
    hydro::NormalBand band;
    int max_steps = 10;
    double settle_s = 60.0;
    double telemetry_cadence_s = 300.0;
    double water_on_below_l = 19.0;
    double water_off_at_l = 20.0;
};

struct RunResult {
    std::vector<StepTrace> steps;
    bool converged = false;
    hydro::NutrientReading final_reading;
    double elapsed_s = 0.0;
};

// Sense, infer, dose, settle.  Dosing happens only while readings sit outside
// the normal band; the water latch is serviced once per cycle; telemetry is
// emitted at every cadence boundary regardless of activity.
class ControlLoop {
  public:
    ControlLoop(DeviceInterface& device, hydro::HydroController controller,
                LoopConfig config = {}, sim::LevelSensorModel level = {})
        : device_(device),
          controller_(std::move(controller)),
          config_(config),
          level_(level) {}

    void add_telemetry_sink(TelemetrySink* sink) { sinks_.push_back(sink); }

    const hydro::HydroController& controller() const { return controller_; }
    double now_s() const { return now_; }
    bool water_on() const { return water_latch_.on; }
    bool level_fault() const { return level_fault_; }

    hydro::NutrientReading read_clamped() {
        return hydro::clamp_reading(device_.read_ph(), device_.read_tds());
    }

    // One unconditional cycle: useful for drivers that manage convergence
    // themselves.
    StepTrace control_step() {
        const hydro::NutrientReading before = read_clamped();
        return run_cycle(before, !controller_.is_normal(before));
    }

    RunResult run_until_normal() {
        RunResult result;
        for (int k = 0; k < config_.max_steps; ++k) {
            const hydro::NutrientReading reading = read_clamped();
            if (controller_.is_normal(reading)) {
                result.converged = true;
                result.final_reading = reading;
                result.elapsed_s = now_;
                return result;
            }
            StepTrace trace = run_cycle(reading, true);
            trace.step = static_cast<int>(result.steps.size()) + 1;
            result.steps.push_back(std::move(trace));
        }
        result.final_reading = read_clamped();
        result.converged = controller_.is_normal(result.final_reading);
        result.elapsed_s = now_;
        return result;
    }

    RunResult run_for(double duration_s) {
        RunResult result;
        const long cycles = std::lround(duration_s / config_.settle_s);
        for (long k = 0; k < cycles; ++k) {
            const hydro::NutrientReading reading = read_clamped();
            const bool dose_enabled = !controller_.is_normal(reading);
            StepTrace trace = run_cycle(reading, dose_enabled);
            if (trace.dose.any()) {
                trace.step = static_cast<int>(result.steps.size()) + 1;
                result.steps.push_back(std::move(trace));
            }
        }
        result.final_reading = read_clamped();
        result.converged = controller_.is_normal(result.final_reading);
        result.elapsed_s = now_;
        return result;
    }

  private:
    StepTrace run_cycle(const hydro::NutrientReading& before, bool dose_enabled) {
        StepTrace trace;
        trace.before = before;
        trace.t_start_s = now_;
        if (dose_enabled) {
            trace.activations = controller_.rule_activations(before);
            trace.dose = controller_.compute_dose(before);
            // Antagonist interlock: never run both pH pumps in one cycle.
            if (trace.dose.ph_up_ms > 0.0 && trace.dose.ph_down_ms > 0.0) {
                if (trace.dose.ph_up_ms >= trace.dose.ph_down_ms) {
                    trace.dose.ph_down_ms = 0.0;
                } else {
                    trace.dose.ph_up_ms = 0.0;
                }
            }
            if (trace.dose.ph_up_ms > 0.0) {
                device_.run_pump(Pump::ph_up, trace.dose.ph_up_ms);
                fired_up_ = true;
            }
            if (trace.dose.ph_down_ms > 0.0) {
                device_.run_pump(Pump::ph_down, trace.dose.ph_down_ms);
                fired_down_ = true;
            }
            if (trace.dose.ab_ms > 0.0) {
                device_.run_pump(Pump::ab, trace.dose.ab_ms);
                fired_ab_ = true;
            }
        }
        advance_and_emit(config_.settle_s);
        service_water_latch();
        trace.after = read_clamped();
        trace.t_end_s = now_;
        return trace;
    }

    void service_water_latch() {
        double volume = 0.0;
        try {
            volume = sim::level_to_volume(device_.read_level_distance(), level_);
            level_fault_ = false;
        } catch (const SensorFault&) {
            level_fault_ = true;
            water_latch_.on = false;
            return;
        }
        water_level_tick(water_latch_, volume, config_.water_on_below_l,
                         config_.water_off_at_l);
        if (water_latch_.on) {
            device_.run_pump(Pump::water, config_.settle_s * 1000.0);
        }
    }

    void advance_and_emit(double dt_s) {
        double remaining = dt_s;
        while (remaining > 0.0) {
            const double cadence = config_.telemetry_cadence_s;
            double piece = remaining;
            if (cadence > 0.0 && !sinks_.empty()) {
                const double boundary =
                    (std::floor(now_ / cadence + 1e-9) + 1.0) * cadence;
                piece = std::min(remaining, boundary - now_);
            }
            device_.sleep_s(piece);
            now_ += piece;
            remaining -= piece;
            if (cadence > 0.0 && !sinks_.empty() &&
                std::fabs(now_ / cadence - std::round(now_ / cadence)) < 1e-9) {
                emit_telemetry();
            }
        }
    }

    void emit_telemetry() {
        TelemetryRecord rec;
        rec.t_s = now_;
        try {
            rec.volume_l = sim::level_to_volume(device_.read_level_distance(), level_);
        } catch (const SensorFault&) {
            rec.volume_l = std::numeric_limits<double>::quiet_NaN();
        }
        rec.ph = device_.read_ph();
        rec.tds_ppm = device_.read_tds();
        rec.water = water_latch_.on;
        rec.ph_up = fired_up_;
        rec.ph_down = fired_down_;
        rec.ab = fired_ab_;
        for (TelemetrySink* sink : sinks_) {
            sink->record(rec);
        }
        fired_up_ = false;
        fired_down_ = false;
        fired_ab_ = false;
    }

    DeviceInterface& device_;
    hydro::HydroController controller_;
    LoopConfig config_;
    sim::LevelSensorModel level_;
    std::vector<TelemetrySink*> sinks_;
    WaterLatch water_latch_;
    bool level_fault_ = false;
    bool fired_up_ = false;
    bool fired_down_ = false;
    bool fired_ab_ = false;
    double now_ = 0.0;
};

}  // namespace fuzzydose::ctl
