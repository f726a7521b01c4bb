#pragma once
// Polynomial torque surface fitted to measured (theta_s, delta, tau) samples.
// The basis is ordinary monomials over inputs rescaled to [-1, 1], solved by
// column-pivoted QR on the design matrix.  Sweep pools are wedge shaped (the
// stiffest presets only reach small deflections), which stretches the basis
// badly enough that squaring it into normal equations would cost most of the
// available precision; QR keeps the error proportional to the condition
// itself, and rank collapse is still detected and reported rather than
// silently producing garbage coefficients.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "vselbow/surface.hpp"

namespace vselbow {

/// One quasi-static characterization sample.
struct TorqueSample {
    double theta_s; ///< rad, preload at which the point was taken
    double delta;   ///< rad, measured deflection
    double tau;     ///< Nm, torque transmitted at that deflection
};

/// Raised when the sample set cannot support the requested basis.
class IllConditionedFit : public std::runtime_error {
public:
    IllConditionedFit(const std::string& msg, double condition)
        : std::runtime_error(msg), condition_(condition) {}
    /// Condition estimate of the normal matrix that triggered the failure.
    double condition() const { return condition_; }

private:
    double condition_;
};

/// Affine map x -> (x - center) / halfwidth used to rescale one input axis.
struct AxisMap {
    double center = 0.0;
    double halfwidth = 1.0;

    double forward(double x) const { return (x - center) / halfwidth; }
};

class PolynomialSurface : public TorqueSurface {
public:
    PolynomialSurface(int deg_theta_s, int deg_delta, AxisMap map_theta_s, AxisMap map_delta,
                      std::vector<double> coeffs, double theta_s_lo, double theta_s_hi,
                      double delta_lo, double delta_hi, double r_squared, double rmse)
        : deg_ts_(deg_theta_s),
          deg_d_(deg_delta),
          map_ts_(map_theta_s),
          map_d_(map_delta),
          coeffs_(std::move(coeffs)),
          ts_lo_(theta_s_lo),
          ts_hi_(theta_s_hi),
          d_lo_(delta_lo),
          d_hi_(delta_hi),
          r_squared_(r_squared),
          rmse_(rmse) {
        if (deg_ts_ < 0 || deg_d_ < 0)
            throw std::invalid_argument("polynomial surface: degrees must be non-negative");
        const size_t expect = size_t(deg_ts_ + 1) * size_t(deg_d_ + 1);
        if (coeffs_.size() != expect) {
            std::ostringstream oss;
            oss << "polynomial surface: expected " << expect << " coefficients, got "
                << coeffs_.size();
            throw std::invalid_argument(oss.str());
        }
    }

    /// Evaluates everywhere; callers decide how to treat extrapolation,
    /// see in_domain().
    double torque(double theta_s, double delta) const override {
        const double u = map_ts_.forward(theta_s);
        const double v = map_d_.forward(delta);
        double acc = 0.0;
        double ui = 1.0;
        for (int i = 0; i <= deg_ts_; ++i) {
            // Horner over the delta axis for the row of this theta_s power.
            double row = 0.0;
            for (int j = deg_d_; j >= 0; --j) row = row * v + coef(i, j);
            acc += ui * row;
            ui *= u;
        }
        return acc;
    }

    double stiffness(double theta_s, double delta) const override {
        const double u = map_ts_.forward(theta_s);
        const double v = map_d_.forward(delta);
        double acc = 0.0;
        double ui = 1.0;
        for (int i = 0; i <= deg_ts_; ++i) {
            double row = 0.0;
            for (int j = deg_d_; j >= 1; --j) row = row * v + coef(i, j) * double(j);
            acc += ui * row;
            ui *= u;
        }
        return acc / map_d_.halfwidth;
    }

    double preload_sensitivity(double theta_s, double delta) const override {
        const double u = map_ts_.forward(theta_s);
        const double v = map_d_.forward(delta);
        double acc = 0.0;
        double ui = 1.0;
        for (int i = 1; i <= deg_ts_; ++i) {
            double row = 0.0;
            for (int j = deg_d_; j >= 0; --j) row = row * v + coef(i, j);
            acc += double(i) * ui * row;
            ui *= u;
        }
        return acc / map_ts_.halfwidth;
    }

    double theta_s_min() const override { return ts_lo_; }
    double theta_s_max() const override { return ts_hi_; }
    double delta_min() const { return d_lo_; }
    double delta_max() const { return d_hi_; }

    double delta_limit(double) const override { return std::max(std::abs(d_lo_), std::abs(d_hi_)); }

    /// True inside the bounding box of the training samples.
    bool in_box(double theta_s, double delta) const {
        return theta_s >= ts_lo_ && theta_s <= ts_hi_ && delta >= d_lo_ && delta <= d_hi_;
    }

    int deg_theta_s() const { return deg_ts_; }
    int deg_delta() const { return deg_d_; }
    const AxisMap& map_theta_s() const { return map_ts_; }
    const AxisMap& map_delta() const { return map_d_; }
    /// Row-major over (theta_s power, delta power), in rescaled coordinates.
    const std::vector<double>& coefficients() const { return coeffs_; }
    double r_squared() const { return r_squared_; }
    double rmse() const { return rmse_; }

private:
    double coef(int i, int j) const { return coeffs_[size_t(i) * size_t(deg_d_ + 1) + size_t(j)]; }

    int deg_ts_;
    int deg_d_;
    AxisMap map_ts_;
    AxisMap map_d_;
    std::vector<double> coeffs_;
    double ts_lo_, ts_hi_, d_lo_, d_hi_;
    double r_squared_;
    double rmse_;
};

/// Least squares fit of the torque surface over the given samples.  Throws
/// std::invalid_argument when the sample set is structurally unusable and
/// IllConditionedFit when the normal matrix is numerically rank deficient.
inline PolynomialSurface fit_polynomial_surface(const std::vector<TorqueSample>& samples,
                                                int deg_theta_s = 4, int deg_delta = 5) {
    if (deg_theta_s < 0 || deg_delta < 0)
        throw std::invalid_argument("surface fit: degrees must be non-negative");
    const size_t n_basis = size_t(deg_theta_s + 1) * size_t(deg_delta + 1);
    if (samples.size() < n_basis) {
        std::ostringstream oss;
        oss << "surface fit: need at least " << n_basis << " samples for degrees ("
            << deg_theta_s << ", " << deg_delta << "), got " << samples.size();
        throw std::invalid_argument(oss.str());
    }

    std::set<double> distinct;
    double ts_lo = samples.front().theta_s, ts_hi = ts_lo;
    double d_lo = samples.front().delta, d_hi = d_lo;
    for (const auto& s : samples) {
        if (!std::isfinite(s.theta_s) || !std::isfinite(s.delta) || !std::isfinite(s.tau))
            throw std::invalid_argument("surface fit: samples must be finite");
        distinct.insert(s.theta_s);
        ts_lo = std::min(ts_lo, s.theta_s);
        ts_hi = std::max(ts_hi, s.theta_s);
        d_lo = std::min(d_lo, s.delta);
        d_hi = std::max(d_hi, s.delta);
    }
    if (distinct.size() < 3) {
        std::ostringstream oss;
        oss << "surface fit: need samples at 3 or more distinct preloads, got "
            << distinct.size();
        throw std::invalid_argument(oss.str());
    }

    AxisMap map_ts{0.5 * (ts_lo + ts_hi), 0.5 * (ts_hi - ts_lo)};
    AxisMap map_d{0.5 * (d_lo + d_hi), 0.5 * (d_hi - d_lo)};
    if (map_ts.halfwidth <= 0.0) map_ts.halfwidth = 1.0;
    if (map_d.halfwidth <= 0.0) map_d.halfwidth = 1.0;

    const long nb = static_cast<long>(n_basis);
    Eigen::MatrixXd design(static_cast<long>(samples.size()), nb);
    Eigen::VectorXd y(static_cast<long>(samples.size()));
    for (size_t r = 0; r < samples.size(); ++r) {
        const auto& s = samples[r];
        const double u = map_ts.forward(s.theta_s);
        const double v = map_d.forward(s.delta);
        double ui = 1.0;
        long k = 0;
        for (int i = 0; i <= deg_theta_s; ++i) {
            double vj = 1.0;
            for (int j = 0; j <= deg_delta; ++j) {
                design(static_cast<long>(r), k++) = ui * vj;
                vj *= v;
            }
            ui *= u;
        }
        y(static_cast<long>(r)) = s.tau;
    }

    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    // Pivoting sorts the R diagonal by magnitude, so its extremes estimate
    // the design condition.
    double diag_max = 0.0, diag_min = std::numeric_limits<double>::infinity();
    for (long k = 0; k < nb; ++k) {
        const double d = std::abs(qr.matrixQR()(k, k));
        diag_max = std::max(diag_max, d);
        diag_min = std::min(diag_min, d);
    }
    const double condition = (diag_min > 0.0) ? diag_max / diag_min
                                              : std::numeric_limits<double>::infinity();
    if (!(diag_min > 0.0) || condition > 1e10) {
        std::ostringstream oss;
        oss << "surface fit: design matrix is rank deficient for this sample layout "
               "(condition estimate "
            << condition << "); spread samples across more preloads and deflections";
        throw IllConditionedFit(oss.str(), condition);
    }
    const Eigen::VectorXd c = qr.solve(y);

    // Quality figures recomputed by direct residual evaluation over the
    // training samples, not from the accumulated moments, so near exact fits
    // do not suffer cancellation.
    double mean = 0.0;
    for (const auto& s : samples) mean += s.tau;
    mean /= double(samples.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (const auto& s : samples) {
        const double u = map_ts.forward(s.theta_s);
        const double v = map_d.forward(s.delta);
        double pred = 0.0;
        double ui = 1.0;
        long k = 0;
        for (int i = 0; i <= deg_theta_s; ++i) {
            double vj = 1.0;
            for (int j = 0; j <= deg_delta; ++j) {
                pred += c(k++) * ui * vj;
                vj *= v;
            }
            ui *= u;
        }
        ss_res += (s.tau - pred) * (s.tau - pred);
        ss_tot += (s.tau - mean) * (s.tau - mean);
    }
    const double rmse = std::sqrt(ss_res / double(samples.size()));
    const double r2 = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : (ss_res == 0.0 ? 1.0 : 0.0);

    return PolynomialSurface(deg_theta_s, deg_delta, map_ts, map_d,
                             std::vector<double>(c.data(), c.data() + c.size()), ts_lo, ts_hi,
                             d_lo, d_hi, r2, rmse);
}

} // namespace vselbow
