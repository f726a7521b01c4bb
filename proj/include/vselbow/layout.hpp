#pragma once
// Two drive layouts for the same elbow: an antagonist pair on one pulley,
// where posture and preload are sums and differences of the two shafts, and
// an independent pair, where one motor owns posture and the other owns
// preload.  Both directions of the coordinate change live here so control
// code can mix references and unmix encoder readings without knowing which
// layout it runs on.

#include <array>
#include <cmath>
#include <stdexcept>

namespace vselbow {

enum class LayoutKind { Antagonist, Independent };

struct MixResult {
    double theta1 = 0.0;
    double theta2 = 0.0;
    bool saturated = false;  ///< a reference had to be clamped to stay reachable
};

struct JointRefs {
    double theta_p = 0.0;
    double theta_s = 0.0;
};

class ElbowLayout {
  public:
    /// `fwd` maps shaft angles to joint coordinates: (theta_p, theta_s) = A (theta1, theta2).
    ElbowLayout(LayoutKind kind, std::array<double, 4> fwd, double pulley_ratio,
                double theta_s_min, double theta_s_max, double travel_lo, double travel_hi)
        : kind_(kind), a_(fwd), ratio_(pulley_ratio),
          ts_min_(theta_s_min), ts_max_(theta_s_max),
          travel_lo_(travel_lo), travel_hi_(travel_hi) {
        const double det = a_[0] * a_[3] - a_[1] * a_[2];
        if (std::abs(det) < 1e-12)
            throw std::invalid_argument("layout: mixing matrix is singular");
        if (kind_ == LayoutKind::Antagonist && ratio_ != 1.0)
            throw std::invalid_argument("layout: antagonist pair needs a unit pulley ratio");
        if (!(ts_min_ < ts_max_))
            throw std::invalid_argument("layout: empty preload range");
        if (!(travel_lo_ < travel_hi_))
            throw std::invalid_argument("layout: empty shaft travel range");
        inv_ = {a_[3] / det, -a_[1] / det, -a_[2] / det, a_[0] / det};
    }

    LayoutKind kind() const { return kind_; }
    double pulley_ratio() const { return ratio_; }
    double theta_s_min() const { return ts_min_; }
    double theta_s_max() const { return ts_max_; }

    /// Joint coordinates from shaft angles (the encoder direction).
    JointRefs joints_from_shafts(double theta1, double theta2) const {
        return {a_[0] * theta1 + a_[1] * theta2, a_[2] * theta1 + a_[3] * theta2};
    }

    /// Shaft references from joint references, clamping preload into its
    /// mechanical range and both shafts into their travel.
    MixResult shafts_from_joints(double theta_p, double theta_s) const {
        MixResult r;
        double ts = theta_s;
        if (ts < ts_min_) { ts = ts_min_; r.saturated = true; }
        if (ts > ts_max_) { ts = ts_max_; r.saturated = true; }
        r.theta1 = inv_[0] * theta_p + inv_[1] * ts;
        r.theta2 = inv_[2] * theta_p + inv_[3] * ts;
        for (double* th : {&r.theta1, &r.theta2}) {
            if (*th < travel_lo_) { *th = travel_lo_; r.saturated = true; }
            if (*th > travel_hi_) { *th = travel_hi_; r.saturated = true; }
        }
        return r;
    }

    /// Partial derivative of posture with respect to shaft `motor` (0 or 1).
    double posture_weight(int motor) const { return a_[motor]; }
    /// Partial derivative of preload with respect to shaft `motor` (0 or 1).
    double preload_weight(int motor) const { return a_[2 + motor]; }

  private:
    LayoutKind kind_;
    std::array<double, 4> a_;
    std::array<double, 4> inv_;
    double ratio_;
    double ts_min_, ts_max_;
    double travel_lo_, travel_hi_;
};

/// Antagonist pair: posture is the mean shaft angle, preload the half
/// difference doubled, so (theta1, theta2) = (theta_p - theta_s/2, theta_p + theta_s/2).
inline ElbowLayout antagonist_layout(double theta_s_min = 0.0, double theta_s_max = 2.0) {
    return ElbowLayout(LayoutKind::Antagonist, {0.5, 0.5, -1.0, 1.0}, 1.0,
                       theta_s_min, theta_s_max, -2.5, 4.5);
}

/// Independent pair: motor 1 is the posture shaft, motor 2 the preload screw.
inline ElbowLayout independent_layout(double theta_s_min = 0.0, double theta_s_max = 2.0) {
    return ElbowLayout(LayoutKind::Independent, {1.0, 0.0, 0.0, 1.0}, 1.0,
                       theta_s_min, theta_s_max, -2.5, 4.5);
}

} // namespace vselbow
