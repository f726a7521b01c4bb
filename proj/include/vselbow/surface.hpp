#pragma once
// Abstract torque surface of an elastic transmission: transmitted torque as a
// function of preload (theta_s) and deflection (delta), with analytic partials.

#include <cmath>
#include <stdexcept>
#include <string>

namespace vselbow {

// Raised when a surface is queried outside its valid (theta_s, delta) region.
class DomainError : public std::runtime_error {
public:
    explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

class TorqueSurface {
public:
    virtual ~TorqueSurface() = default;

    /// Transmitted elastic torque in Nm at deflection delta under preload theta_s.
    virtual double torque(double theta_s, double delta) const = 0;

    /// Stiffness dtau/ddelta in Nm/rad (analytic, never finite-differenced).
    virtual double stiffness(double theta_s, double delta) const = 0;

    /// Preload sensitivity dtau/dtheta_s in Nm/rad (analytic).
    virtual double preload_sensitivity(double theta_s, double delta) const = 0;

    virtual double theta_s_min() const = 0;
    virtual double theta_s_max() const = 0;

    /// Largest |delta| the surface is defined for at the given preload.
    virtual double delta_limit(double theta_s) const = 0;

    bool in_domain(double theta_s, double delta) const {
        if (theta_s < theta_s_min() || theta_s > theta_s_max()) return false;
        return std::abs(delta) <= delta_limit(theta_s);
    }
};

/// Convenience accessor used wherever only sigma is of interest.
inline double stiffness_of(const TorqueSurface& surface, double theta_s, double delta) {
    return surface.stiffness(theta_s, delta);
}

} // namespace vselbow
