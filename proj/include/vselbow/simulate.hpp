#pragma once
// Closed-loop session runner: the motor loops tick every millisecond, the
// high-level controller every fifth tick, and one trajectory row is recorded
// per completed control frame.

#include <cmath>
#include <functional>
#include <vector>

#include "vselbow/control.hpp"
#include "vselbow/plant.hpp"

namespace vselbow {

struct LogRow {
    double t = 0.0;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double theta_p = 0.0;
    double theta_s = 0.0;
    double theta_o = 0.0;
    double delta = 0.0;
    double omega_o = 0.0;
    double tau_elastic = 0.0;
    unsigned fault = 0;
};

/// Joint-space references as functions of time.
struct ReferenceSchedule {
    std::function<double(double)> theta_p_ref;
    std::function<double(double)> theta_s_ref;
};

inline ReferenceSchedule constant_refs(double theta_p, double theta_s) {
    return {[theta_p](double) { return theta_p; }, [theta_s](double) { return theta_s; }};
}

/// Step in posture at t_step, preload held throughout.
inline ReferenceSchedule step_refs(double theta_p_from, double theta_p_to, double t_step,
                                   double theta_s) {
    return {[=](double t) { return t < t_step ? theta_p_from : theta_p_to; },
            [theta_s](double) { return theta_s; }};
}

/// Constant-rate ramp from one posture to another, preload held.
inline ReferenceSchedule ramp_refs(double theta_p_from, double theta_p_to, double t_start,
                                   double duration, double theta_s) {
    return {[=](double t) {
                if (t <= t_start) return theta_p_from;
                if (t >= t_start + duration) return theta_p_to;
                return theta_p_from + (theta_p_to - theta_p_from) * (t - t_start) / duration;
            },
            [theta_s](double) { return theta_s; }};
}

/// Sinusoidal posture sweep about a midpoint, preload held.
inline ReferenceSchedule sine_refs(double theta_p_mid, double amplitude, double period,
                                   double theta_s) {
    return {[=](double t) {
                return theta_p_mid + amplitude * std::sin(2.0 * M_PI * t / period);
            },
            [theta_s](double) { return theta_s; }};
}

struct SessionResult {
    std::vector<LogRow> rows;
    bool ref_saturated = false;  ///< any tick clipped by preload or travel range
    bool comp_skipped = false;   ///< any tick hit the compensation stiffness floor
};

/// Run the closed loop for `horizon` seconds.  Each control frame reads the
/// deflection, updates the slow controller, holds the shaft references while
/// the motor loops run, then logs the state the frame ended in.  A zero
/// horizon produces no rows.
inline SessionResult run_session(Plant& plant, HighLevelController& ctl,
                                 const ReferenceSchedule& refs, double horizon) {
    const ControllerConfig& cfg = ctl.config();
    const int sub = cfg.ticks_per_frame();
    const long frames = std::lround(horizon / cfg.high_period);

    SessionResult out;
    out.rows.reserve(frames > 0 ? static_cast<size_t>(frames) : 0);
    for (long k = 0; k < frames; ++k) {
        const double t = plant.time();
        const HighLevelController::TickResult cmd =
            ctl.tick(refs.theta_p_ref(t), refs.theta_s_ref(t), plant.delta());
        out.ref_saturated = out.ref_saturated || cmd.saturated;
        out.comp_skipped = out.comp_skipped || cmd.comp_skipped;
        for (int i = 0; i < sub; ++i)
            plant.step(cfg.motor_period, cmd.ref1, cmd.ref2, cfg.kp1, cfg.kp2);

        LogRow row;
        row.t = plant.time();
        row.theta1 = plant.motor1().theta;
        row.theta2 = plant.motor2().theta;
        const JointRefs j = plant.joints();
        row.theta_p = j.theta_p;
        row.theta_s = j.theta_s;
        row.theta_o = plant.theta_o();
        row.delta = plant.delta();
        row.omega_o = plant.omega_o();
        row.tau_elastic = plant.elastic_torque();
        row.fault = plant.faults();
        out.rows.push_back(row);
    }
    return out;
}

} // namespace vselbow
