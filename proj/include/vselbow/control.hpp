#pragma once
// High-level control at the slow rate: posture compensation that cancels the
// output sag a preload change would cause, reference mixing into shaft
// commands, and the two-channel muscle interface.  The fast position loops
// live with the motors; nothing here ever reads the output encoder except
// the measured deflection handed to the compensator.

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vselbow/layout.hpp"
#include "vselbow/surface.hpp"

namespace vselbow {

struct ControllerConfig {
    double kp1 = 40.0;          ///< 1/s, motor 1 position-loop gain
    double kp2 = 40.0;          ///< 1/s, motor 2 position-loop gain
    double high_period = 5e-3;  ///< s, high-level tick
    double motor_period = 1e-3; ///< s, motor loop tick
    bool compensation = true;
    double sigma_eps = 1e-3;    ///< Nm/rad, stiffness floor for compensation

    void validate() const {
        if (!(kp1 > 0.0) || !(kp2 > 0.0))
            throw std::invalid_argument("controller: gains must be positive");
        if (!(motor_period > 0.0) || !(high_period > 0.0))
            throw std::invalid_argument("controller: periods must be positive");
        const double ratio = high_period / motor_period;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
            throw std::invalid_argument(
                "controller: high_period must be a whole multiple of motor_period");
        if (!(sigma_eps > 0.0))
            throw std::invalid_argument("controller: sigma_eps must be positive");
    }

    int ticks_per_frame() const {
        return static_cast<int>(std::round(high_period / motor_period));
    }
};

inline ControllerConfig antagonist_controller_defaults() {
    ControllerConfig c;
    c.kp1 = 60.0;
    c.kp2 = 60.0;
    return c;
}

inline ControllerConfig independent_controller_defaults() { return ControllerConfig{}; }

struct CompensatorState {
    double theta_pc = 0.0;       ///< rad, accumulated posture correction
    bool has_prev = false;
    double prev_theta_s_ref = 0.0;
    bool skipped = false;        ///< last update hit the stiffness floor
};

/// One compensation update.  Predicts the deflection after the preload
/// reference moves, assuming the held torque stays constant, and absorbs the
/// difference into the posture correction.  Returns the predicted deflection.
inline double compensate_posture(CompensatorState& st, const TorqueSurface& surface,
                                 double theta_s_ref_next, double delta_meas,
                                 double sigma_eps) {
    st.skipped = false;
    if (!st.has_prev) {
        st.has_prev = true;
        st.prev_theta_s_ref = theta_s_ref_next;
        return delta_meas;
    }
    const double dts = theta_s_ref_next - st.prev_theta_s_ref;
    if (dts == 0.0) return delta_meas;

    const double ts = std::clamp(st.prev_theta_s_ref, surface.theta_s_min(),
                                 surface.theta_s_max());
    const double lim = surface.delta_limit(ts);
    const double d = std::clamp(delta_meas, -lim, lim);
    const double sigma = surface.stiffness(ts, d);
    if (sigma < sigma_eps) {
        st.skipped = true;
        st.prev_theta_s_ref = theta_s_ref_next;
        return delta_meas;
    }
    const double predicted = delta_meas - surface.preload_sensitivity(ts, d) / sigma * dts;
    st.theta_pc += delta_meas - predicted;
    st.prev_theta_s_ref = theta_s_ref_next;
    return predicted;
}

/// Slow-rate controller: compensation plus reference mixing.
class HighLevelController {
  public:
    struct TickResult {
        double ref1 = 0.0;
        double ref2 = 0.0;
        bool saturated = false;
        bool comp_skipped = false;
        double delta_predicted = 0.0;
    };

    HighLevelController(const ElbowLayout& layout, const TorqueSurface& surface,
                        ControllerConfig cfg)
        : layout_(layout), surface_(surface), cfg_(cfg) {
        cfg_.validate();
    }

    TickResult tick(double theta_p_ref, double theta_s_ref, double delta_meas) {
        TickResult r;
        r.delta_predicted = delta_meas;
        if (cfg_.compensation) {
            r.delta_predicted =
                compensate_posture(comp_, surface_, theta_s_ref, delta_meas, cfg_.sigma_eps);
            r.comp_skipped = comp_.skipped;
        }
        const MixResult m =
            layout_.shafts_from_joints(theta_p_ref + comp_.theta_pc, theta_s_ref);
        r.ref1 = m.theta1;
        r.ref2 = m.theta2;
        r.saturated = m.saturated;
        return r;
    }

    const CompensatorState& compensator() const { return comp_; }
    const ControllerConfig& config() const { return cfg_; }
    void reset() { comp_ = CompensatorState{}; }

  private:
    ElbowLayout layout_;
    const TorqueSurface& surface_;
    ControllerConfig cfg_;
    CompensatorState comp_;
};

struct EmgMapConfig {
    double deadband = 0.1;                 ///< activation difference ignored as noise
    double cocontraction_threshold = 0.2;  ///< both channels above this can halt
};

struct EmgCommand {
    double omega_norm = 0.0; ///< [-1, 1], positive flexes
    double sigma_norm = 0.0; ///< [0, 1], requested stiffness level
    bool halt = false;
};

/// Two-channel activation to motion intent.  Flexor minus extensor drives the
/// rate through a deadband; co-contraction above the threshold with a small
/// difference means brace in place.
inline EmgCommand map_emg(double a_flex, double a_ext, const EmgMapConfig& cfg) {
    const double b = std::clamp(a_flex, 0.0, 1.0);
    const double t = std::clamp(a_ext, 0.0, 1.0);
    const double d = b - t;
    EmgCommand cmd;
    cmd.sigma_norm = std::min(b, t);
    cmd.halt = std::min(b, t) > cfg.cocontraction_threshold &&
               std::abs(d) < cfg.deadband;
    if (!cmd.halt && std::abs(d) > cfg.deadband)
        cmd.omega_norm = (d > 0.0 ? 1.0 : -1.0) * (std::abs(d) - cfg.deadband) /
                         (1.0 - cfg.deadband);
    return cmd;
}

} // namespace vselbow
