#pragma once
// Synthetic ground-truth transmission: a cubic-hardening torque curve whose
// slope grows quadratically with preload, plus Coulomb hysteresis, a preload
// dependent deflection envelope, and the belt tension curve seen by the motors.

#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "vselbow/surface.hpp"

namespace vselbow {

/// Parameters of the synthetic torque model
///   f(theta_s, delta) = a0 * (1 + preload_gain * theta_s^2) * delta + a1 * delta^3
/// valid for theta_s in [theta_s_min, theta_s_max] and |delta| up to an envelope
/// that tapers linearly from delta_cap_low (at theta_s_min) to delta_cap_high
/// (at theta_s_max): high preload tightens the usable deflection range.
struct SyntheticTransmissionParams {
    double a0 = 1.0;              ///< Nm/rad, slope at zero preload and zero deflection
    double a1 = 0.0;              ///< Nm/rad^3, cubic hardening
    double preload_gain = 0.0;    ///< 1/rad^2, quadratic preload stiffening
    double theta_s_min = 0.0;     ///< rad
    double theta_s_max = 1.0;     ///< rad
    double delta_cap_low = 1.0;   ///< rad, envelope at theta_s_min
    double delta_cap_high = 1.0;  ///< rad, envelope at theta_s_max
    double tau_fric = 0.0;        ///< Nm, Coulomb torque opposing deflection rate
    double k_spring_N_per_mm = 0.0;       ///< documented spring rate of the unit
    double preload_tension_offset = 0.0;  ///< Nm, belt tension torque at zero preload
    double preload_tension_slope = 0.0;   ///< Nm/rad, tension growth with preload
};

class SyntheticSurface : public TorqueSurface {
public:
    explicit SyntheticSurface(const SyntheticTransmissionParams& p) : p_(p) {
        if (!(p.a0 > 0.0)) throw std::invalid_argument("synthetic surface: a0 must be positive");
        if (p.a1 < 0.0) throw std::invalid_argument("synthetic surface: a1 must be non-negative");
        if (p.preload_gain < 0.0)
            throw std::invalid_argument("synthetic surface: preload_gain must be non-negative");
        if (!(p.theta_s_max > p.theta_s_min) || p.theta_s_min < 0.0)
            throw std::invalid_argument("synthetic surface: need 0 <= theta_s_min < theta_s_max");
        if (!(p.delta_cap_low > 0.0) || !(p.delta_cap_high > 0.0))
            throw std::invalid_argument("synthetic surface: deflection envelope must be positive");
        if (p.tau_fric < 0.0)
            throw std::invalid_argument("synthetic surface: tau_fric must be non-negative");
    }

    double torque(double theta_s, double delta) const override {
        check_domain(theta_s, delta);
        return torque_unchecked(theta_s, delta);
    }

    /// Torque including Coulomb hysteresis; rate_sign is the sign of the
    /// deflection rate (-1, 0, +1) and selects the friction branch.
    double torque_with_friction(double theta_s, double delta, int rate_sign) const {
        check_domain(theta_s, delta);
        return torque_unchecked(theta_s, delta) + p_.tau_fric * static_cast<double>(rate_sign);
    }

    double stiffness(double theta_s, double delta) const override {
        check_domain(theta_s, delta);
        return p_.a0 * gain(theta_s) + 3.0 * p_.a1 * delta * delta;
    }

    double preload_sensitivity(double theta_s, double delta) const override {
        check_domain(theta_s, delta);
        return 2.0 * p_.a0 * p_.preload_gain * theta_s * delta;
    }

    /// Energy stored in the elastic element at fixed preload, the deflection
    /// integral of the torque in closed form.
    double elastic_energy(double theta_s, double delta) const {
        check_domain(theta_s, delta);
        const double d2 = delta * delta;
        return 0.5 * p_.a0 * gain(theta_s) * d2 + 0.25 * p_.a1 * d2 * d2;
    }

    double theta_s_min() const override { return p_.theta_s_min; }
    double theta_s_max() const override { return p_.theta_s_max; }

    double delta_limit(double theta_s) const override {
        const double w = (p_.theta_s_max - p_.theta_s_min);
        const double u = (theta_s - p_.theta_s_min) / w;
        return p_.delta_cap_low + (p_.delta_cap_high - p_.delta_cap_low) * u;
    }

    /// Belt tension torque reflected to a motor shaft at the given preload.
    double preload_tension(double theta_s) const {
        return p_.preload_tension_offset + p_.preload_tension_slope * theta_s;
    }

    double coulomb_torque() const { return p_.tau_fric; }
    const SyntheticTransmissionParams& params() const { return p_; }

private:
    double gain(double theta_s) const {
        return 1.0 + p_.preload_gain * theta_s * theta_s;
    }

    double torque_unchecked(double theta_s, double delta) const {
        return p_.a0 * gain(theta_s) * delta + p_.a1 * delta * delta * delta;
    }

    void check_domain(double theta_s, double delta) const {
        std::ostringstream oss;
        if (theta_s < p_.theta_s_min) {
            oss << "synthetic surface: preload " << theta_s << " rad below minimum "
                << p_.theta_s_min << " rad";
            throw DomainError(oss.str());
        }
        if (theta_s > p_.theta_s_max) {
            oss << "synthetic surface: preload " << theta_s << " rad above maximum "
                << p_.theta_s_max << " rad";
            throw DomainError(oss.str());
        }
        const double cap = delta_limit(theta_s);
        if (std::abs(delta) > cap) {
            oss << "synthetic surface: deflection " << delta
                << " rad outside envelope +/-" << cap << " rad at preload " << theta_s << " rad";
            throw DomainError(oss.str());
        }
    }

    SyntheticTransmissionParams p_;
};

/// Transmission of the antagonist pair architecture (two motors share posture
/// and preload through a differential belt path).
inline SyntheticTransmissionParams aa_transmission_defaults() {
    SyntheticTransmissionParams p;
    p.a0 = 0.65;
    p.a1 = 10.0;
    p.preload_gain = 29.3;
    p.theta_s_min = 0.0;
    p.theta_s_max = 2.0;
    p.delta_cap_low = 0.96;
    p.delta_cap_high = 0.20;
    p.tau_fric = 0.03;
    p.k_spring_N_per_mm = 2.4;
    p.preload_tension_offset = 0.4;
    p.preload_tension_slope = 0.8;
    return p;
}

/// Transmission of the split architecture (dedicated posture and stiffness
/// motors; the stiffness screw is phase-opposed to the elastic load path).
inline SyntheticTransmissionParams d2_transmission_defaults() {
    SyntheticTransmissionParams p;
    p.a0 = 1.0;
    p.a1 = 13.0;
    p.preload_gain = 23.5;
    p.theta_s_min = 0.0;
    p.theta_s_max = 2.0;
    p.delta_cap_low = 0.50;
    p.delta_cap_high = 0.12;
    p.tau_fric = 0.009;
    p.k_spring_N_per_mm = 4.17;
    p.preload_tension_offset = 0.2;
    p.preload_tension_slope = 0.4;
    return p;
}

} // namespace vselbow
