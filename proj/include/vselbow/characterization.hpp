#pragma once
// Bench protocols for one elbow build: quasi-static elastic sweeps under a
// hanging payload, full-range speed steps, and preload-transition timing,
// reduced into a datasheet record with requirement checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "vselbow/bench.hpp"
#include "vselbow/polyfit.hpp"
#include "vselbow/simulate.hpp"

namespace vselbow {

/// A protocol could not run to completion on this bench.
class ProtocolError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct ElasticProtocolConfig {
    PayloadSpec payload{3.0, 0.30};
    double period = 20.0;          ///< s, posture sweep period
    int repetitions = 3;
    int preset_count = 9;
    double safety_margin = 0.1;    ///< fraction of the torque budget held back
    double envelope_guard = 0.95;  ///< usable fraction of the deflection envelope
    double settle_time = 1.0;      ///< s, hold at the start pose before sweeping

    void validate() const {
        if (!(period >= 10.0))
            throw std::invalid_argument("elastic protocol: period must be at least 10 s");
        if (repetitions < 1)
            throw std::invalid_argument("elastic protocol: need at least one repetition");
        if (preset_count < 3)
            throw std::invalid_argument("elastic protocol: need at least three presets");
        if (!(safety_margin >= 0.0 && safety_margin < 1.0))
            throw std::invalid_argument("elastic protocol: safety margin must lie in [0, 1)");
        if (!(envelope_guard > 0.0 && envelope_guard <= 1.0))
            throw std::invalid_argument("elastic protocol: envelope guard must lie in (0, 1]");
        if (!(settle_time >= 0.0))
            throw std::invalid_argument("elastic protocol: settle time must be non-negative");
    }
};

/// Uniform preset ladder over [lo, hi], endpoints included.
inline std::vector<double> preset_levels(double lo, double hi, int n) {
    if (n < 2) throw std::invalid_argument("preset ladder needs at least two levels");
    std::vector<double> v(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        v[static_cast<size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    return v;
}

struct AngleInterval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Largest output-angle interval inside the RoM whose holding torque stays
/// within the limit after `margin` of it is held back.  Inverts the static
/// load curve tau_g = G sin(theta_o); the RoM must sit inside [0, pi].
inline AngleInterval exploration_range(double torque_limit, const PayloadSpec& load,
                                       const SegmentProps& seg, double margin,
                                       double rom_lo = 0.0, double rom_hi = deg2rad(120.0)) {
    if (!(margin >= 0.0 && margin < 1.0))
        throw std::invalid_argument("exploration range: margin must lie in [0, 1)");
    if (!(rom_lo >= 0.0 && rom_lo < rom_hi && rom_hi <= kPi))
        throw std::invalid_argument("exploration range: need 0 <= rom_lo < rom_hi <= pi");
    const double moment = gravity_moment(seg, load);
    if (moment <= 0.0) return {rom_lo, rom_hi};
    const double c = (1.0 - margin) * torque_limit / moment;
    if (c <= 0.0) throw ProtocolError("exploration range: no torque budget for this payload");
    if (c >= 1.0) return {rom_lo, rom_hi};
    // sin(theta) <= c splits [0, pi] into a wedge at each end; keep the longer
    // piece that intersects the RoM.
    const double a = std::asin(c);
    const AngleInterval low{rom_lo, std::min(a, rom_hi)};
    const AngleInterval high{std::max(kPi - a, rom_lo), rom_hi};
    const AngleInterval best = (high.hi - high.lo > low.hi - low.lo) ? high : low;
    if (!(best.hi - best.lo > 0.0))
        throw ProtocolError("exploration range: torque limit admits no interval inside the RoM");
    return best;
}

/// Peak quasi-static output torque a sweep may command at one preset: the
/// guarded elastic envelope capacity, capped by what each posture-bearing
/// drive can still oppose once preload tension and the worm friction share
/// are paid.
inline double preset_torque_budget(const Bench& bench, double level, double envelope_guard) {
    const SyntheticSurface surf(bench.transmission);
    double budget = surf.torque(level, envelope_guard * surf.delta_limit(level));
    const double tension = surf.preload_tension(level);
    const MotorUnit* motors[2] = {&bench.m1, &bench.m2};
    for (int i = 0; i < 2; ++i) {
        const double wp = std::abs(bench.layout.posture_weight(i));
        if (wp < 1e-12) continue;
        const double ws = std::abs(bench.layout.preload_weight(i));
        const double head = motors[i]->tau_m - tension * ws;
        if (head <= 0.0) return 0.0;
        budget = std::min(budget, head / (wp * (1.0 + bench.config.mu_load)));
    }
    return budget;
}

/// Peak absolute rate of a uniformly sampled signal: 5-sample median prefilter
/// followed by central differences, the same estimator the speed table uses.
inline double peak_rate(const std::vector<double>& x, double dt) {
    const size_t n = x.size();
    if (n < 3) return 0.0;
    std::vector<double> f(n);
    for (size_t i = 0; i < n; ++i) {
        if (i < 2 || i + 2 >= n) {
            f[i] = x[i];
            continue;
        }
        std::array<double, 5> w{x[i - 2], x[i - 1], x[i], x[i + 1], x[i + 2]};
        std::nth_element(w.begin(), w.begin() + 2, w.end());
        f[i] = w[2];
    }
    double peak = 0.0;
    for (size_t i = 1; i + 1 < n; ++i)
        peak = std::max(peak, std::abs(f[i + 1] - f[i - 1]) / (2.0 * dt));
    return peak;
}

struct SweepSample {
    double t = 0.0;        ///< s, since sweep onset
    int rep = 0;           ///< repetition index, 0-based
    bool loading = false;  ///< commanded output rising toward the range top
    double theta_s = 0.0;  ///< rad, measured at the shafts
    double delta = 0.0;    ///< rad
    double theta_o = 0.0;  ///< rad
    double tau = 0.0;      ///< Nm, static inversion of the hanging load
};

struct PresetSweep {
    double level = 0.0;
    bool valid = false;
    std::string note;             ///< reason when invalid
    AngleInterval range;          ///< swept output interval
    double torque_budget = 0.0;   ///< Nm
    double delta_peak = 0.0;      ///< rad, largest |delta| seen
    double hysteresis = 0.0;      ///< rad, widest branch gap at matched torque
    std::vector<SweepSample> samples;
};

/// One preset of the elastic protocol: hold the preload, sweep the output
/// reference sinusoidally through the exploration range, and record the
/// deflection against the inferred load torque.  Compensation stays off
/// throughout.
///
/// The posture reference is planned from measured deflection, but never by
/// instantaneous feedback: with a hanging payload the output resonance is so
/// lightly damped that any per-frame correction loop pumps it, at soft
/// presets directly and at stiff ones through the loop delays.  Instead the
/// protocol runs one uncounted calibration pass with the posture swept open
/// loop, tabulates deflection against output angle per branch, and replays
/// each later repetition feedforward through the previous pass's table.  A
/// ratchet on the posture command keeps the output from running past the
/// planned range top where the table had to extrapolate, which keeps every
/// pass inside the torque budget the range was derived from.
inline PresetSweep run_preset_sweep(const Bench& bench, const ElasticProtocolConfig& cfg,
                                    double level) {
    PresetSweep out;
    out.level = level;

    Bench b = bench;
    b.config.payload = cfg.payload;
    b.config.gravity_on = true;
    b.config.obstacle.reset();
    b.config.impulses.clear();
    b.config.payload_drop_enabled = false;
    b.controller.compensation = false;

    out.torque_budget = preset_torque_budget(b, level, cfg.envelope_guard);
    try {
        out.range = exploration_range(out.torque_budget, cfg.payload, b.config.segment,
                                      cfg.safety_margin, b.config.rom_lo, b.config.rom_hi);
    } catch (const ProtocolError& e) {
        out.note = e.what();
        return out;
    }
    // The commanded band stops short of the range on both sides.  The top
    // few percent are clearance so a converged pass glides under the posture
    // ratchet instead of banging against it; the bottom margin keeps a
    // lightly damped arm from tapping the travel stop at the low turnaround,
    // which would re-excite it every cycle and skew the samples taken near
    // zero load.
    const double lo_aim = out.range.lo + 0.03 * (out.range.hi - out.range.lo);
    const double hi_aim = out.range.lo + 0.96 * (out.range.hi - out.range.lo);
    const double mid = 0.5 * (lo_aim + hi_aim);
    const double amp = 0.5 * (hi_aim - lo_aim);
    const double moment = gravity_moment(b.config.segment, cfg.payload);

    const SyntheticSurface surf = b.surface();
    Plant plant = b.make(out.range.lo, level);
    HighLevelController ctl(b.layout, surf, b.controller);
    const ControllerConfig& cc = ctl.config();
    const int sub = cc.ticks_per_frame();

    struct Cover {
        int first = -1;
        int top = -1;
        bool law = false;
    };
    std::vector<std::vector<double>> rep_log(cfg.repetitions);
    std::array<Cover, 2> last_cover{};
    bool saturated = false;
    double worst_err = 0.0;
    const double omega = 2.0 * kPi / cfg.period;
    const double span = out.range.hi - out.range.lo;
    const double envelope = cfg.envelope_guard * surf.delta_limit(level);

    // Deflection against output angle, tabulated separately for the loading
    // and unloading branches.  `replay` steers the current pass; bin sums and
    // counts collect its measurements and become the next pass's `replay`.
    constexpr int nbins = 256;
    std::array<std::vector<double>, 2> replay, bin_sum, bin_sum_th;
    std::array<std::vector<int>, 2> bin_n;
    for (int br = 0; br < 2; ++br) {
        replay[br].assign(nbins, 0.0);
        bin_sum[br].assign(nbins, 0.0);
        bin_sum_th[br].assign(nbins, 0.0);
        bin_n[br].assign(nbins, 0);
    }
    const auto consolidate = [&](std::vector<double>& d, std::vector<double>& sum,
                                 std::vector<int>& n) -> Cover {
        int first = -1, top = -1;
        int occupied = 0;
        for (int j = 0; j < nbins; ++j)
            if (n[j] > 0) {
                if (first < 0) first = j;
                top = j;
                ++occupied;
            }
        if (first < 0) {
            std::fill(d.begin(), d.end(), 0.0);
            return {};
        }
        const auto bin_angle = [&](int j) { return out.range.lo + (j + 0.5) * span / nbins; };
        // A lightly damped arm rings a little even under a smooth command, and
        // bins written during the ring would echo it into the next pass and
        // feed it.  At a held preset the transmission behaves as a stiffening
        // spring, so the branch is first fitted to offset + linear + cubic in
        // the deflection against the hanging-load torque.  Three parameters
        // cannot follow ripple at any wavelength, the offset absorbs a
        // friction plateau, and inverting the law per bin yields a table that
        // stays smooth across the whole travel, measured or not.
        bool law = false;
        Eigen::Vector3d c = Eigen::Vector3d::Zero();
        if (occupied >= 3) {
            Eigen::Matrix3d gram3 = Eigen::Matrix3d::Zero();
            Eigen::Vector3d rhs3 = Eigen::Vector3d::Zero();
            for (int j = first; j <= top; ++j) {
                if (n[j] == 0) continue;
                const double mean = sum[j] / n[j];
                const Eigen::Vector3d basis(1.0, mean, mean * mean * mean);
                const double tau = -gravity_torque(bin_angle(j), moment);
                gram3 += double(n[j]) * basis * basis.transpose();
                rhs3 += double(n[j]) * basis * tau;
            }
            c = gram3.ldlt().solve(rhs3);
            const double worst_slope = c[1] + 3.0 * std::min(0.0, c[2]) * envelope * envelope;
            if (c.allFinite() && c[1] > 0.0 && worst_slope > 1e-9) {
                law = true;
                double root = 0.0;
                for (int j = 0; j < nbins && law; ++j) {
                    const double tau = -gravity_torque(bin_angle(j), moment);
                    bool converged = false;
                    for (int it = 0; it < 40; ++it) {
                        const double g = c[0] + root * (c[1] + c[2] * root * root) - tau;
                        const double gp = c[1] + 3.0 * c[2] * root * root;
                        const double step = g / gp;
                        root -= std::clamp(step, -0.5, 0.5);
                        if (std::abs(step) < 1e-12) {
                            converged = true;
                            break;
                        }
                    }
                    if (!converged || !std::isfinite(root))
                        law = false;
                    else
                        d[j] = std::clamp(root, -envelope, envelope);
                }
            }
        }
        // Benches where the drive never produced clean spring-like data (or
        // barely any coverage) fall back to a plain polynomial over whatever
        // the bins hold, which is enough to reach an honest verdict.
        if (!law) {
            const int degree = std::min(7, occupied - 1);
            const double half_w = top > first ? 0.5 * (top - first) : 1.0;
            Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(degree + 1, degree + 1);
            Eigen::VectorXd rhs = Eigen::VectorXd::Zero(degree + 1);
            for (int j = first; j <= top; ++j) {
                if (n[j] == 0) continue;
                const double x = (j - first) / half_w - 1.0;
                const double mean = sum[j] / n[j];
                double pw = 1.0;
                std::array<double, 8> basis{};
                for (int a = 0; a <= degree; ++a) {
                    basis[a] = pw;
                    pw *= x;
                }
                for (int a = 0; a <= degree; ++a) {
                    rhs[a] += n[j] * basis[a] * mean;
                    for (int cc2 = 0; cc2 <= degree; ++cc2)
                        gram(a, cc2) += n[j] * basis[a] * basis[cc2];
                }
            }
            const Eigen::VectorXd coef = gram.ldlt().solve(rhs);
            const auto poly = [&](double x) {
                double acc = 0.0, pw = 1.0;
                for (int a = 0; a <= degree; ++a) {
                    acc += coef[a] * pw;
                    pw *= x;
                }
                return acc;
            };
            for (int j = first; j <= top; ++j) d[j] = poly((j - first) / half_w - 1.0);
            for (int j = 0; j < first; ++j) d[j] = d[first];
        }
#ifdef VSELBOW_SWEEP_TRACE
        std::fprintf(stderr, "  law=%d c0=%.6f s0=%.5f a1=%.5f first=%d top=%d\n", int(law), c[0],
                     c[1], c[2], first, top);
#endif
        std::fill(sum.begin(), sum.end(), 0.0);
        std::fill(n.begin(), n.end(), 0);
        return {first, top, law};
    };
    // A spring-law table already spans the whole travel; a fallback table
    // goes only as far as the data did, so past its measured top it continues
    // with the local slope, decays it exponentially, and levels off a bounded
    // distance out.  Leveling off errs on the undershooting side, so coverage
    // grows a bounded step per pass instead of overdriving the arm at each
    // new frontier, and the decay keeps the table free of slope steps, which
    // the replay would turn into rate steps in the command right where the
    // sweep crosses into unmeasured territory.  The slope is a secant over
    // the top stretch of the fitted curve, shared between the branches so
    // they agree where neither has data.
    const auto extend = [&](std::array<std::vector<double>, 2>& tabs,
                            const std::array<Cover, 2>& cover) {
        double slope = 0.0;
        int contributing = 0;
        for (int br = 0; br < 2; ++br) {
            if (cover[br].law) continue;
            const int back = std::max(cover[br].first, cover[br].top - nbins / 8);
            if (cover[br].top > back) {
                slope += (tabs[br][cover[br].top] - tabs[br][back]) / double(cover[br].top - back);
                ++contributing;
            }
        }
        if (contributing > 0) slope /= contributing;
        const double horizon = nbins / 4.0;
        for (int br = 0; br < 2; ++br) {
            if (cover[br].law || cover[br].top < 0) continue;
            const int top = cover[br].top;
            for (int j = top + 1; j < nbins; ++j) {
                const double reach = horizon * (1.0 - std::exp(-(j - top) / horizon));
                tabs[br][j] = std::clamp(tabs[br][top] + slope * reach, -envelope, envelope);
            }
        }
    };
    const auto lookup = [&](const std::vector<double>& d, double th) {
        const double x = (th - out.range.lo) / span * nbins - 0.5;
        if (x <= 0.0) return d.front();
        if (x >= double(nbins - 1)) return d.back();
        const int j = static_cast<int>(x);
        const double w = x - j;
        return d[j] * (1.0 - w) + d[j + 1] * w;
    };

    const double pace_bound = amp * omega * 1.5;
    const double err_bound = 0.05 * span + 1e-3;
    const double slew = 1.5 * span * cc.high_period;  // per frame
    double p_cmd = out.range.lo;
    double ceiling = std::numeric_limits<double>::infinity();
    double rate_est = 0.0;
    double prev_theta_o = plant.theta_o();
    const long pass_frames = std::lround(cfg.period / cc.high_period);

    const auto quiet_step = [&] {
        const auto cmd = ctl.tick(p_cmd, level, plant.delta());
        saturated = saturated || cmd.saturated;
        for (int i = 0; i < sub; ++i)
            plant.step(cc.motor_period, cmd.ref1, cmd.ref2, cc.kp1, cc.kp2);
        rate_est += 0.2 * ((plant.theta_o() - prev_theta_o) / cc.high_period - rate_est);
        prev_theta_o = plant.theta_o();
    };
    // Minimum-jerk command glide.  An arm with next to no damping keeps
    // whatever ring a stepped move would excite, so every repositioning
    // outside the sweep proper has to put in essentially none.
    const auto glide_to = [&](double to, double seconds) {
        const long frames = std::lround(seconds / cc.high_period);
        const double from = p_cmd;
        for (long k = 0; k < frames; ++k) {
            const double u = double(k + 1) / double(frames);
            const double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
            p_cmd = from + s * (to - from);
            quiet_step();
        }
    };
    glide_to(lo_aim, cfg.settle_time);

    // Pass 0 sweeps open loop, later passes replay the learned tables.
    // Repetitions start counting once a learned pass replays cleanly, so the
    // recorded pool only holds converged, crawl-speed coverage; patience is
    // capped so a drive that can never converge still reaches the verdict.
    const int max_learning = 10;
    const long bridge_frames = std::lround(0.15 * cfg.period / cc.high_period);
    int pass_index = 0;
    int counted = 0;
    bool counting = false;
    while (counted < cfg.repetitions) {
        double pass_peak = 0.0;
        double pass_err = 0.0;
        // Every replayed pass opens with the sweep phase frozen at the low
        // turnaround while the command glides from wherever the previous
        // pass left it to where the refreshed table wants it.  The refresh
        // can move the bottom of the command by a sizable step right after
        // the first learning pass, and on benches with branch-dependent
        // tables the boundary also swaps branches; a slow glide injects
        // next to nothing at the arm's natural frequency, which matters
        // when the arm has nothing to damp a kick back out.
        const long glide_frames = pass_index >= 1 ? bridge_frames : 0;
        const double p_start = p_cmd;
        for (long k = 0; k < glide_frames + pass_frames; ++k) {
            const bool gliding = k < glide_frames;
            const double ph = gliding ? 0.0 : (k - glide_frames) * cc.high_period;
            const double target = mid - amp * std::cos(omega * ph);
            const int branch = ph < 0.5 * cfg.period ? 0 : 1;
            double desired = target;
            if (pass_index >= 1) desired = target - lookup(replay[branch], target);
            if (gliding) {
                const double u = double(k + 1) / double(glide_frames);
                const double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
                desired = p_start + s * (desired - p_start);
            }
            // Ratchet, not a hard reset: releasing the ceiling instantly
            // would slam the posture back to an extrapolated overshoot and
            // ring the arm.
            if (plant.theta_o() >= out.range.hi)
                ceiling = std::min(ceiling, p_cmd);
            else if (ceiling < 1e9)
                ceiling += (span / cfg.period) * cc.high_period;
            const double step = std::clamp(std::min(desired, ceiling) - p_cmd, -slew, slew);
            p_cmd += step;
#ifdef VSELBOW_SWEEP_TRACE
            if (k % VSELBOW_SWEEP_TRACE == 0)
                std::fprintf(
                    stderr,
                    "t=%7.3f pass=%d br=%d tgt=%8.4f p=%8.4f th_o=%8.4f d=%8.4f r=%8.4f ceil=%s\n",
                    plant.time() - cfg.settle_time, pass_index, branch, target, p_cmd,
                    plant.theta_o(), plant.delta(), rate_est, ceiling < 1e9 ? "Y" : "n");
#endif
            const auto cmd = ctl.tick(p_cmd, level, plant.delta());
            saturated = saturated || cmd.saturated;
            for (int i = 0; i < sub; ++i)
                plant.step(cc.motor_period, cmd.ref1, cmd.ref2, cc.kp1, cc.kp2);

            rate_est += 0.2 * ((plant.theta_o() - prev_theta_o) / cc.high_period - rate_est);
            prev_theta_o = plant.theta_o();
            if (!gliding) {
                pass_peak = std::max(pass_peak, std::abs(rate_est));
                pass_err = std::max(pass_err, std::abs(plant.theta_o() - target));
            }
            // Moments that move faster than the protocol allows carry dynamic
            // deflection and would poison the replay table; skip them, along
            // with anything past the range top.
            const double rel = (plant.theta_o() - out.range.lo) / span;
            if (std::abs(rate_est) <= pace_bound && rel < 1.0 + 1.0 / nbins) {
                const int bin = std::clamp(static_cast<int>(rel * nbins), 0, nbins - 1);
                bin_sum[branch][bin] += plant.delta();
                bin_sum_th[branch][bin] += plant.theta_o();
                bin_n[branch][bin] += 1;
            }
            if (counting && !gliding) {
                const JointRefs j = plant.joints();
                SweepSample s;
                s.t = plant.time() - cfg.settle_time;
                s.rep = counted;
                s.loading = branch == 0;
                s.theta_s = j.theta_s;
                s.delta = plant.delta();
                s.theta_o = plant.theta_o();
                s.tau = -gravity_torque(s.theta_o, moment);
                out.samples.push_back(s);
                rep_log[counted].push_back(s.theta_o);
                if (counted == cfg.repetitions - 1)
                    worst_err = std::max(worst_err, std::abs(s.theta_o - target));
            }
        }
#ifdef VSELBOW_SWEEP_TRACE
        std::fprintf(stderr, "pass=%d peak=%.5f err=%.5f counting=%d counted=%d\n", pass_index,
                     pass_peak, pass_err, int(counting), counted);
#endif
        std::array<Cover, 2> cover;
        for (int br = 0; br < 2; ++br)
            cover[br] = consolidate(replay[br], bin_sum[br], bin_n[br]);
        extend(replay, cover);
        last_cover = cover;
        if (counting) {
            ++counted;
        } else if (pass_index >= 1 && ((pass_peak <= pace_bound && pass_err <= err_bound) ||
                                       pass_index >= max_learning)) {
            counting = true;
            // The travel stop is the one thing on a barely damped bench that
            // can absorb whatever ring the learning passes left behind, so
            // lean on it once before anything is recorded: press gently past
            // the range floor and let the contact swallow the motion.  The
            // return is split at the floor so the arm leaves the stop from
            // rest; releasing it mid-glide would trade the old ring for a
            // fresh one the size of the release speed.  On benches whose
            // floor sits above the stop the whole thing is a slow detour and
            // costs nothing.
            glide_to(out.range.lo - 0.05 * span, 2.0);
            for (long k = 0; k < std::lround(1.0 / cc.high_period); ++k) quiet_step();
            glide_to(out.range.lo, 1.5);
            glide_to(lo_aim, 1.5);
        }
        ++pass_index;
    }

    if (plant.faults() != 0) {
        out.note = "plant fault during sweep";
        return out;
    }
    if (saturated) {
        out.note = "shaft travel saturated";
        return out;
    }
    // Scaled to the sweep span so a drive that stalls partway through a short
    // range is still caught.
    if (worst_err > err_bound) {
        out.note = "drive could not track the sweep";
        return out;
    }
    for (const SweepSample& s : out.samples) {
        if (std::abs(s.delta) > surf.delta_limit(std::clamp(s.theta_s, surf.theta_s_min(),
                                                            surf.theta_s_max()))) {
            out.note = "deflection envelope exceeded";
            return out;
        }
    }
    // The static torque inversion only holds while the sweep crawls; reject
    // runs whose output moved faster than the commanded pace allows.  Each
    // repetition is judged on its own, since consecutive repetitions are
    // separated by the inter-pass glide and do not join smoothly in time.
    for (const std::vector<double>& rep : rep_log) {
        if (peak_rate(rep, cc.high_period) > pace_bound) {
            out.note = "sweep too fast to count as quasi-static";
            return out;
        }
    }

    out.valid = true;
    for (const SweepSample& s : out.samples)
        out.delta_peak = std::max(out.delta_peak, std::abs(s.delta));
    // Hysteresis is the widest gap between the loading and unloading branch
    // tables of the final repetition, inside their shared measured coverage.
    // The hanging load applies the same torque to both branches at matched
    // output angle, so this is the branch separation at equal torque, with
    // any ride-along ripple already fitted out by the consolidation.
    const int j_lo = std::max({last_cover[0].first, last_cover[1].first, 0});
    const int j_hi = std::min(last_cover[0].top, last_cover[1].top);
    for (int j = j_lo; j <= j_hi; ++j)
        out.hysteresis = std::max(out.hysteresis, std::abs(replay[0][j] - replay[1][j]));
    return out;
}

struct ElasticCharacterization {
    std::vector<PresetSweep> presets;
    PolynomialSurface surface;
    double sigma_min = 0.0;  ///< Nm/rad, fitted stiffness extremes over the samples
    double sigma_max = 0.0;
};

/// Full elastic protocol: one sweep per preset (optionally fanned out across
/// threads, one plant instance each), then a single polynomial fit over every
/// valid sample.  Results are assembled in preset order either way, so the
/// outcome does not depend on scheduling.
inline ElasticCharacterization run_elastic_characterization(const Bench& bench,
                                                            const ElasticProtocolConfig& cfg,
                                                            bool parallel = false) {
    cfg.validate();
    const std::vector<double> levels =
        preset_levels(bench.layout.theta_s_min(), bench.layout.theta_s_max(), cfg.preset_count);

    std::vector<PresetSweep> sweeps(levels.size());
    if (parallel) {
        std::vector<std::future<PresetSweep>> jobs;
        jobs.reserve(levels.size());
        for (const double level : levels)
            jobs.push_back(std::async(std::launch::async, [&bench, &cfg, level] {
                return run_preset_sweep(bench, cfg, level);
            }));
        for (size_t i = 0; i < jobs.size(); ++i) sweeps[i] = jobs[i].get();
    } else {
        for (size_t i = 0; i < levels.size(); ++i)
            sweeps[i] = run_preset_sweep(bench, cfg, levels[i]);
    }

    std::vector<TorqueSample> pool;
    for (const PresetSweep& p : sweeps) {
        if (!p.valid) continue;
        for (const SweepSample& s : p.samples) pool.push_back({s.theta_s, s.delta, s.tau});
    }
    if (pool.empty()) throw ProtocolError("elastic characterization: every preset failed");

    PolynomialSurface fit = fit_polynomial_surface(pool);
    double smin = std::numeric_limits<double>::infinity();
    double smax = -std::numeric_limits<double>::infinity();
    for (const TorqueSample& s : pool) {
        const double sg = fit.stiffness(s.theta_s, s.delta);
        smin = std::min(smin, sg);
        smax = std::max(smax, sg);
    }
    return ElasticCharacterization{std::move(sweeps), std::move(fit), smin, smax};
}

struct SpeedRow {
    double level = 0.0;      ///< rad, preload preset
    double flexion = 0.0;    ///< deg/s, peak output speed rising through the RoM
    double extension = 0.0;  ///< deg/s, peak output speed falling through it
};

/// One full-range step with gravity disabled (axis vertical on the rig) and no
/// payload; returns the peak output speed in deg/s.
inline double run_speed_step(const Bench& bench, double level, bool flexion,
                             double timeout = 10.0) {
    Bench b = bench;
    b.config.gravity_on = false;
    b.config.payload.mass = 0.0;
    b.config.obstacle.reset();
    b.config.impulses.clear();
    b.controller.compensation = false;

    const double from = flexion ? b.config.rom_lo : b.config.rom_hi;
    const double to = flexion ? b.config.rom_hi : b.config.rom_lo;
    Plant plant = b.make(from, level);
    const SyntheticSurface surf = b.surface();
    HighLevelController ctl(b.layout, surf, b.controller);
    const auto out = run_session(plant, ctl, constant_refs(to, level), timeout);

    const size_t n = out.rows.size();
    const size_t tail = std::min<size_t>(n, 100);
    for (size_t i = n - tail; i < n; ++i)
        if (std::abs(out.rows[i].theta_o - to) > deg2rad(1.0))
            throw ProtocolError("speed step did not settle inside the timeout");
    std::vector<double> pos(n);
    for (size_t i = 0; i < n; ++i) pos[i] = out.rows[i].theta_o;
    return rad2deg(peak_rate(pos, ctl.config().high_period));
}

inline std::vector<SpeedRow> run_speed_characterization(const Bench& bench,
                                                        const std::vector<double>& levels) {
    std::vector<SpeedRow> table;
    table.reserve(levels.size());
    for (const double level : levels)
        table.push_back(
            {level, run_speed_step(bench, level, true), run_speed_step(bench, level, false)});
    return table;
}

struct SvtResult {
    double svt = std::numeric_limits<double>::quiet_NaN();  ///< s, 10% to 90% preload rise
    bool reached = false;       ///< the 90% mark was crossed
    double residual = 0.0;      ///< rad short of the 90% mark when !reached
    double posture_ref = 0.0;   ///< rad, output reference held during the step
    std::vector<LogRow> trace;  ///< 200 Hz log from just before the step
};

/// Preload step from minimum to maximum against a held posture; the posture
/// reference is the angle where the guarded torque budget at full preload is
/// exactly used up, so the stiffest case works at its limit.  The same
/// reference serves loaded and unloaded runs, which keeps them comparable.
inline SvtResult run_svt_characterization(const Bench& bench, const PayloadSpec& load,
                                          const ElasticProtocolConfig& cfg,
                                          double timeout = 12.0) {
    Bench b = bench;
    b.config.payload = load;
    b.config.gravity_on = true;
    b.config.obstacle.reset();
    b.config.impulses.clear();
    b.config.payload_drop_enabled = false;
    b.controller.compensation = false;

    const double ts_lo = b.layout.theta_s_min();
    const double ts_hi = b.layout.theta_s_max();
    const double moment = gravity_moment(b.config.segment, cfg.payload);
    const double cap =
        (1.0 - cfg.safety_margin) * preset_torque_budget(b, ts_hi, cfg.envelope_guard);
    double ref = b.config.rom_hi;
    if (moment > 0.0 && cap < moment) ref = std::asin(std::max(0.0, cap / moment));

    SvtResult out;
    out.posture_ref = ref;

    Plant plant = b.make(ref, ts_lo);
    const SyntheticSurface surf = b.surface();
    HighLevelController ctl(b.layout, surf, b.controller);
    const double t_step = cfg.settle_time;
    const ReferenceSchedule sched{[ref](double) { return ref; },
                                  [=](double t) { return t < t_step ? ts_lo : ts_hi; }};
    const auto sess = run_session(plant, ctl, sched, t_step + timeout);

    const double mark_lo = 0.1 * ts_hi;
    const double mark_hi = 0.9 * ts_hi;
    double t_lo = std::numeric_limits<double>::quiet_NaN();
    double t_hi = std::numeric_limits<double>::quiet_NaN();
    double peak = -std::numeric_limits<double>::infinity();
    LogRow prev{};
    bool have_prev = false;
    for (const LogRow& r : sess.rows) {
        if (r.t < t_step) continue;
        out.trace.push_back(r);
        peak = std::max(peak, r.theta_s);
        if (have_prev) {
            const double span = r.theta_s - prev.theta_s;
            if (std::isnan(t_lo) && prev.theta_s < mark_lo && r.theta_s >= mark_lo)
                t_lo = prev.t + (mark_lo - prev.theta_s) / span * (r.t - prev.t);
            if (std::isnan(t_hi) && prev.theta_s < mark_hi && r.theta_s >= mark_hi)
                t_hi = prev.t + (mark_hi - prev.theta_s) / span * (r.t - prev.t);
        }
        prev = r;
        have_prev = true;
    }
    if (!std::isnan(t_lo) && !std::isnan(t_hi)) {
        out.reached = true;
        out.svt = t_hi - t_lo;
    } else {
        out.residual = mark_hi - peak;
    }
    return out;
}

struct ComplianceFlags {
    bool rom = false;
    bool stiffness_range = false;
    bool active_torque = false;
    bool speed = false;
    bool passive_limit = false;
    bool all_pass() const { return rom && stiffness_range && active_torque && speed && passive_limit; }
};

/// Functional targets a prosthetic elbow build is judged against.
struct RequirementTargets {
    double rom_hi = deg2rad(120.0);  ///< rad
    double sigma_lo = 2.0;           ///< Nm/rad, range must extend at least this low
    double sigma_hi = 60.0;          ///< Nm/rad, and at least this high
    double flexion_torque = 5.9;     ///< Nm
    double extension_torque = 2.8;   ///< Nm
    double speed = 250.0;            ///< deg/s
    double passive_mass = 5.0;       ///< kg held by the locked drive
    double passive_lever = 0.30;     ///< m
};

struct CharacterizationReport {
    ElasticCharacterization elastic;
    double delta_softest_deg = 0.0;       ///< peak deflection at the softest preset
    double delta_stiffest_deg = 0.0;      ///< and at the stiffest one
    double hysteresis_softest_deg = 0.0;
    double hysteresis_stiffest_deg = 0.0;
    std::vector<SpeedRow> speed;
    SvtResult svt_unloaded;
    SvtResult svt_loaded;
    double rom_lo = 0.0;                  ///< rad
    double rom_hi = 0.0;
    double active_flexion_torque = 0.0;   ///< Nm, drive rating toward flexion
    double active_extension_torque = 0.0;
    double passive_limit = 0.0;           ///< Nm, weakest locked-drive holding bound
    ComplianceFlags flags;
};

inline ComplianceFlags check_requirements(const CharacterizationReport& r,
                                          const RequirementTargets& t = {}) {
    ComplianceFlags f;
    f.rom = r.rom_lo <= 0.0 && r.rom_hi >= t.rom_hi - 1e-9;
    f.stiffness_range = r.elastic.sigma_min <= t.sigma_lo && r.elastic.sigma_max >= t.sigma_hi;
    f.active_torque = r.active_flexion_torque >= t.flexion_torque &&
                      r.active_extension_torque >= t.extension_torque;
    double best = 0.0;
    for (const SpeedRow& row : r.speed) best = std::max({best, row.flexion, row.extension});
    f.speed = best >= t.speed;
    f.passive_limit = r.passive_limit >= t.passive_mass * kGravity * t.passive_lever;
    return f;
}

/// All three protocols plus the requirement checks on one bench.
inline CharacterizationReport run_full_characterization(const Bench& bench,
                                                        const ElasticProtocolConfig& cfg,
                                                        bool parallel = false) {
    CharacterizationReport r{run_elastic_characterization(bench, cfg, parallel)};
    const PresetSweep& soft = r.elastic.presets.front();
    const PresetSweep& stiff = r.elastic.presets.back();
    if (soft.valid) {
        r.delta_softest_deg = rad2deg(soft.delta_peak);
        r.hysteresis_softest_deg = rad2deg(soft.hysteresis);
    }
    if (stiff.valid) {
        r.delta_stiffest_deg = rad2deg(stiff.delta_peak);
        r.hysteresis_stiffest_deg = rad2deg(stiff.hysteresis);
    }

    std::vector<double> levels;
    levels.reserve(r.elastic.presets.size());
    for (const PresetSweep& p : r.elastic.presets) levels.push_back(p.level);
    r.speed = run_speed_characterization(bench, levels);

    r.svt_unloaded = run_svt_characterization(bench, PayloadSpec{0.0, cfg.payload.lever}, cfg);
    r.svt_loaded = run_svt_characterization(bench, cfg.payload, cfg);

    r.rom_lo = bench.config.rom_lo;
    r.rom_hi = bench.config.rom_hi;
    r.active_flexion_torque = bench.m1.tau_m;
    r.active_extension_torque =
        bench.layout.kind() == LayoutKind::Antagonist ? bench.m2.tau_m : bench.m1.tau_m;
    // The weakest worm-tooth bound; layouts that split the load across both
    // drives hold strictly more, so this stays conservative.
    r.passive_limit = std::min(bench.m1.tau_lock, bench.m2.tau_lock);
    r.flags = check_requirements(r);
    return r;
}

} // namespace vselbow
