#pragma once
// Bench dynamics of the elastic elbow: two worm-geared shafts position the
// posture and preload coordinates, the forearm segment hangs on the elastic
// transmission, and gravity, Coulomb friction, viscous damping, stops, and
// impulsive pushes act on the output.  Zero is the fully extended hanging
// pose and flexion is positive, so gravity pulls the output toward zero and
// a carried load makes the joint sag below its posture reference until the
// elastic torque balances the gravity torque in magnitude.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "vselbow/layout.hpp"
#include "vselbow/motor.hpp"
#include "vselbow/synthetic.hpp"
#include "vselbow/units.hpp"

namespace vselbow {

struct SegmentProps {
    double m_F = 0.4;    ///< kg, forearm segment mass
    double l_F = 0.06;   ///< m, segment center of mass distance from the joint
    double L = 0.12;     ///< m, segment length
    double I_F = 0.0;    ///< kg m^2, segment inertia about the joint
    double b = 0.0;      ///< Nm s/rad, viscous damping on the deflection rate

    void validate() const {
        if (!(m_F > 0.0) || !(l_F > 0.0) || !(L > 0.0))
            throw std::invalid_argument("segment: mass and geometry must be positive");
        if (l_F > L) throw std::invalid_argument("segment: center of mass beyond the tip");
        if (!(I_F >= m_F * l_F * l_F))
            throw std::invalid_argument("segment: inertia below the point-mass bound");
        if (b < 0.0) throw std::invalid_argument("segment: damping must be non-negative");
    }
};

struct PayloadSpec {
    double mass = 0.0;   ///< kg, carried load
    double lever = 0.30; ///< m, load distance from the joint
};

struct ImpulseEvent {
    double t = 0.0;      ///< s, when the push lands
    double domega = 0.0; ///< rad/s, velocity added to the output
};

/// Everything the bench is set up with before a run.
struct PlantConfig {
    SegmentProps segment;
    PayloadSpec payload;
    double rom_lo = 0.0;
    double rom_hi = deg2rad(120.0);
    std::optional<double> obstacle;   ///< rad, rigid stop inside the flexion path
    std::vector<ImpulseEvent> impulses;
    bool gravity_on = true;
    double mu_load = 0.35;            ///< worm friction share of the carried torque
    bool payload_drop_enabled = false;
    double drop_fraction = 1.0;       ///< fraction of the envelope where the load lets go
    double theta_p0 = 0.0;
    double theta_s0 = 0.0;
    double delta0 = 0.0;
};

/// Gravity lever arm of segment plus payload, in Nm per unit sine.
inline double gravity_moment(const SegmentProps& seg, const PayloadSpec& load) {
    return kGravity * (load.mass * load.lever + seg.m_F * seg.l_F);
}

/// Magnitude of the load torque at an elbow angle; it acts toward extension.
inline double gravity_torque(double theta_o, double moment) {
    return moment * std::sin(theta_o);
}

inline constexpr unsigned kFaultOverload = 1u;
inline constexpr unsigned kFaultIntegration = 2u;

class Plant {
  public:
    Plant(ElbowLayout layout, SyntheticSurface surface, MotorUnit m1, MotorUnit m2,
          PlantConfig cfg)
        : layout_(layout), surface_(std::move(surface)), u1_(m1), u2_(m2), cfg_(cfg) {
        u1_.validate();
        u2_.validate();
        cfg_.segment.validate();
        if (!(cfg_.rom_lo < cfg_.rom_hi))
            throw std::invalid_argument("plant: empty range of motion");
        std::sort(cfg_.impulses.begin(), cfg_.impulses.end(),
                  [](const ImpulseEvent& a, const ImpulseEvent& b) { return a.t < b.t; });
        const auto shafts = layout_.shafts_from_joints(cfg_.theta_p0, cfg_.theta_s0);
        s1_.theta = shafts.theta1;
        s2_.theta = shafts.theta2;
        theta_o_ = cfg_.theta_p0 + cfg_.delta0;
        payload_attached_ = cfg_.payload.mass > 0.0;
    }

    /// One motor-rate step: both shaft loops, then the output dynamics.
    void step(double dt, double ref1, double ref2, double kp1, double kp2) {
        if (faults_ & kFaultIntegration) return;
        const MotorState save1 = s1_, save2 = s2_;
        const double save_theta = theta_o_, save_omega = omega_o_;

        const JointRefs before = joints();
        const double delta_k = theta_o_ - before.theta_p;
        maybe_drop_payload(before.theta_s, delta_k);
        const double f = elastic_torque_at(before.theta_s, delta_k);
        drive_motor(0, u1_, s1_, ref1, kp1, f, before.theta_s, dt);
        drive_motor(1, u2_, s2_, ref2, kp2, f, before.theta_s, dt);

        const JointRefs after = joints();
        const double theta_p_rate = (after.theta_p - before.theta_p) / dt;

        const double inertia = total_inertia();
        const double tau_g = cfg_.gravity_on
                                 ? gravity_torque(theta_o_, gravity_moment(cfg_.segment, active_payload()))
                                 : 0.0;
        const double delta_rate = omega_o_ - theta_p_rate;
        double w = omega_o_ + dt * (-f - cfg_.segment.b * delta_rate - tau_g) / inertia;

        while (next_impulse_ < cfg_.impulses.size() &&
               cfg_.impulses[next_impulse_].t < t_ + dt) {
            if (cfg_.impulses[next_impulse_].t >= t_) {
                w += cfg_.impulses[next_impulse_].domega;
                ++impulses_applied_;
            }
            ++next_impulse_;
        }

        const double tau_f = surface_.coulomb_torque();
        if (tau_f > 0.0) {
            const double dv_max = dt * tau_f / inertia;
            const double v_rel = w - theta_p_rate;
            if (std::abs(v_rel) <= dv_max)
                w = theta_p_rate;
            else
                w -= dv_max * (v_rel > 0.0 ? 1.0 : -1.0);
        }

        double x = theta_o_ + dt * w;

        contact_ = false;
        contact_torque_ = 0.0;
        const double hi = cfg_.obstacle ? std::min(cfg_.rom_hi, *cfg_.obstacle) : cfg_.rom_hi;
        if (x >= hi) {
            x = hi;
            if (w > 0.0) w = 0.0;
            contact_ = true;
        } else if (x <= cfg_.rom_lo) {
            x = cfg_.rom_lo;
            if (w < 0.0) w = 0.0;
            contact_ = true;
        }
        if (contact_) {
            const double tau_g_c = cfg_.gravity_on
                                       ? gravity_torque(x, gravity_moment(cfg_.segment, active_payload()))
                                       : 0.0;
            contact_torque_ = elastic_torque_at(after.theta_s, x - after.theta_p) + tau_g_c;
        }

        if (!std::isfinite(x) || !std::isfinite(w) || !std::isfinite(s1_.theta) ||
            !std::isfinite(s2_.theta)) {
            s1_ = save1;
            s2_ = save2;
            theta_o_ = save_theta;
            omega_o_ = save_omega;
            faults_ |= kFaultIntegration;
            return;
        }

        theta_o_ = x;
        omega_o_ = w;
        t_ += dt;
        if (s1_.overload || s2_.overload) faults_ |= kFaultOverload;
    }

    JointRefs joints() const { return layout_.joints_from_shafts(s1_.theta, s2_.theta); }
    double theta_o() const { return theta_o_; }
    double omega_o() const { return omega_o_; }
    double delta() const { return theta_o_ - joints().theta_p; }
    double time() const { return t_; }
    unsigned faults() const { return faults_; }
    bool in_contact() const { return contact_; }
    double contact_torque() const { return contact_torque_; }
    bool envelope_exceeded() const { return envelope_hit_; }
    bool payload_attached() const { return payload_attached_; }
    double drop_time() const { return drop_time_; }
    std::size_t impulses_applied() const { return impulses_applied_; }
    const MotorState& motor1() const { return s1_; }
    const MotorState& motor2() const { return s2_; }
    const SyntheticSurface& surface() const { return surface_; }
    const PlantConfig& config() const { return cfg_; }

    /// Elastic torque at the current pose, evaluated the same way the
    /// integrator sees it.
    double elastic_torque() const {
        const JointRefs j = joints();
        return elastic_torque_at(j.theta_s, theta_o_ - j.theta_p);
    }

    /// Total mechanical energy for audits: kinetic, elastic, and gravity
    /// potential (zero at the horizontal, lowest at full extension).
    double energy() const {
        const JointRefs j = joints();
        const double ts = clamp_preload(j.theta_s);
        const double lim = surface_.delta_limit(ts);
        const double d = std::clamp(theta_o_ - j.theta_p, -lim, lim);
        double e = 0.5 * total_inertia() * omega_o_ * omega_o_ + surface_.elastic_energy(ts, d);
        if (cfg_.gravity_on)
            e -= gravity_moment(cfg_.segment, active_payload()) * std::cos(theta_o_);
        return e;
    }

  private:
    PayloadSpec active_payload() const {
        return payload_attached_ ? cfg_.payload : PayloadSpec{0.0, cfg_.payload.lever};
    }

    double total_inertia() const {
        const PayloadSpec p = active_payload();
        return cfg_.segment.I_F + p.mass * p.lever * p.lever;
    }

    double clamp_preload(double ts) const {
        return std::clamp(ts, surface_.theta_s_min(), surface_.theta_s_max());
    }

    double elastic_torque_at(double theta_s, double delta) const {
        const double ts = clamp_preload(theta_s);
        const double lim = surface_.delta_limit(ts);
        const double d = std::clamp(delta, -lim, lim);
        if (d != delta) envelope_hit_ = true;
        return surface_.torque(ts, d);
    }

    void drive_motor(int idx, const MotorUnit& u, MotorState& s, double ref, double kp,
                     double f, double theta_s, double dt) {
        const double load_grad = -f * layout_.posture_weight(idx) +
                                 surface_.preload_tension(clamp_preload(theta_s)) *
                                     layout_.preload_weight(idx);
        const double intent = ref > s.theta ? 1.0 : ref < s.theta ? -1.0 : 0.0;
        double opposing = 0.0;
        if (intent != 0.0) {
            opposing = load_grad * intent +
                       cfg_.mu_load * std::abs(f * layout_.posture_weight(idx));
            opposing = std::max(0.0, opposing);
        }
        motor_step(u, s, ref, kp, opposing, std::abs(load_grad), dt);
    }

    void maybe_drop_payload(double theta_s, double delta) {
        if (!cfg_.payload_drop_enabled || !payload_attached_) return;
        const double lim = surface_.delta_limit(clamp_preload(theta_s));
        if (std::abs(delta) > cfg_.drop_fraction * lim) {
            payload_attached_ = false;
            drop_time_ = t_;
        }
    }

    ElbowLayout layout_;
    SyntheticSurface surface_;
    MotorUnit u1_, u2_;
    PlantConfig cfg_;
    MotorState s1_, s2_;
    double theta_o_ = 0.0;
    double omega_o_ = 0.0;
    double t_ = 0.0;
    unsigned faults_ = 0;
    bool contact_ = false;
    double contact_torque_ = 0.0;
    mutable bool envelope_hit_ = false;
    bool payload_attached_ = false;
    double drop_time_ = -1.0;
    std::size_t next_impulse_ = 0;
    std::size_t impulses_applied_ = 0;
};

inline SegmentProps antagonist_segment_defaults() {
    SegmentProps s;
    s.m_F = 0.894;
    s.l_F = 0.0665;
    s.L = 0.133;
    s.I_F = s.m_F * (s.L / 2.0) * (s.L / 2.0);
    s.b = 0.2;
    return s;
}

inline SegmentProps independent_segment_defaults() {
    SegmentProps s;
    s.m_F = 0.413;
    s.l_F = 0.062;
    s.L = 0.124;
    s.I_F = s.m_F * (s.L / 2.0) * (s.L / 2.0);
    s.b = 0.0045;
    return s;
}

/// Flexion-side drive of the antagonist pair.  Same no-load joint speed as
/// its partner; the asymmetry between the two sits in the droop slopes.
inline MotorUnit antagonist_motor_flexor() {
    MotorUnit u;
    u.tau_n = 3.9;
    u.tau_m = 8.7;
    u.xi = 336.0;
    u.eta = 0.32;
    u.omega_max = deg2rad(288.75);
    u.tau_stall = 9.24;
    u.accel_limit = 60.0;
    return u;
}

/// Extension-side drive of the antagonist pair.
inline MotorUnit antagonist_motor_extensor() {
    MotorUnit u;
    u.tau_n = 0.6;
    u.tau_m = 3.9;
    u.xi = 111.0;
    u.eta = 0.33;
    u.omega_max = deg2rad(288.75);
    u.tau_stall = 6.60;
    u.accel_limit = 60.0;
    return u;
}

/// Posture drive of the independent pair.
inline MotorUnit independent_motor_posture() {
    MotorUnit u;
    u.tau_n = 5.5;
    u.tau_m = 9.7;
    u.xi = 588.0;
    u.eta = 0.27;
    u.omega_max = 2.2253;
    u.tau_stall = 20.0;
    u.accel_limit = 2.2253;
    return u;
}

/// Preload screw drive of the independent pair.
inline MotorUnit independent_motor_preload() {
    MotorUnit u;
    u.tau_n = 2.4;
    u.tau_m = 8.3;
    u.xi = 525.0;
    u.eta = 0.30;
    u.omega_max = 1.5834;
    u.tau_stall = 5.0;
    u.accel_limit = 400.0;
    return u;
}

} // namespace vselbow
