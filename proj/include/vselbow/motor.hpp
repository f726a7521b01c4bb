#pragma once
// Kinematic motor unit behind a non-backdrivable worm stage: a proportional
// position loop commands shaft velocity, saturated by the speed limit, a
// load-dependent droop, and an acceleration slew; reflected load never moves
// the shaft passively, and holding needs no power up to the tooth limit.

#include <cmath>
#include <stdexcept>

namespace vselbow {

struct MotorUnit {
    double tau_n = 1.0;        ///< Nm, continuous output torque
    double tau_m = 1.0;        ///< Nm, peak output torque; motion stalls above it
    double xi = 1.0;           ///< total transmission ratio
    double eta = 1.0;          ///< transmission efficiency (0, 1]
    double omega_max = 1.0;    ///< rad/s, no-load shaft speed at the joint side
    double tau_stall = 1.0;    ///< Nm, opposing torque at which speed droops to zero
    double accel_limit = 1e9;  ///< rad/s^2, slew bound on achieved velocity
    double tau_lock = 15.3;    ///< Nm, passive holding limit of the worm teeth
    bool non_backdrivable = true;

    void validate() const {
        if (!(tau_n > 0.0) || !(tau_n <= tau_m))
            throw std::invalid_argument("motor: need 0 < tau_n <= tau_m");
        if (!(eta > 0.0) || !(eta <= 1.0))
            throw std::invalid_argument("motor: need 0 < eta <= 1");
        if (!(xi >= 1.0)) throw std::invalid_argument("motor: need xi >= 1");
        if (!(omega_max > 0.0)) throw std::invalid_argument("motor: need omega_max > 0");
        if (!(tau_stall > 0.0)) throw std::invalid_argument("motor: need tau_stall > 0");
        if (!(accel_limit > 0.0)) throw std::invalid_argument("motor: need accel_limit > 0");
        if (!(tau_lock > 0.0)) throw std::invalid_argument("motor: need tau_lock > 0");
    }

    /// Achievable speed against a resisting torque.  Aiding loads (negative)
    /// give no boost: the worm stage cannot be driven from the load side.
    double available_speed(double opposing) const {
        if (opposing <= 0.0) return omega_max;
        if (opposing >= tau_m) return 0.0;
        return omega_max * std::max(0.0, 1.0 - opposing / tau_stall);
    }
};

struct MotorState {
    double theta = 0.0;   ///< rad, shaft angle at the joint side
    double omega = 0.0;   ///< rad/s, achieved velocity of the last step
    bool overload = false;///< latched when the passive limit was ever exceeded
    double energy = 0.0;  ///< J, cumulative work done against the reflected load
};

/// One position-loop step at the motor rate.  `opposing` is the reflected
/// torque resisting the intended motion (negative = aiding); `static_load` is
/// the unsigned reflected torque the worm holds when parked, checked against
/// tau_lock.  The angle holds bitwise when the reference is reached.
inline void motor_step(const MotorUnit& u, MotorState& s, double theta_ref, double kp,
                       double opposing, double static_load, double dt) {
    if (std::abs(static_load) > u.tau_lock) s.overload = true;

    const double err = theta_ref - s.theta;
    if (err == 0.0) {
        // Parked on the reference: self-locking, no command, no power.
        s.omega = 0.0;
        return;
    }

    const double cap = u.available_speed(opposing);
    double v = kp * err;
    if (v > cap) v = cap;
    if (v < -cap) v = -cap;

    // Drives accelerate under slew; braking into the self-locking stage is
    // immediate, so only the speed-up direction is limited.
    const double dv = u.accel_limit * dt;
    if (v > 0.0 && v > s.omega + dv) v = std::max(0.0, s.omega) + dv;
    if (v < 0.0 && v < s.omega - dv) v = std::min(0.0, s.omega) - dv;

    const double travel = v * dt;
    if (std::abs(travel) >= std::abs(err)) {
        // Would cross the reference this step: land on it exactly.
        s.theta = theta_ref;
        s.omega = 0.0;
        s.energy += std::max(0.0, opposing) * std::abs(err);
    } else {
        s.theta += travel;
        s.omega = v;
        s.energy += std::max(0.0, opposing) * std::abs(travel);
    }
}

} // namespace vselbow
