#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "vselbow/characterization.hpp"
#include "vselbow/units.hpp"

using namespace vselbow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("protocol configuration rejects out-of-range settings") {
    ElasticProtocolConfig cfg;
    REQUIRE_NOTHROW(cfg.validate());
    cfg.period = 5.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.preset_count = 2;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.safety_margin = 1.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.envelope_guard = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("preset ladder is uniform and endpoint inclusive") {
    const auto v = preset_levels(0.0, 2.0, 9);
    REQUIRE(v.size() == 9);
    REQUIRE(v.front() == 0.0);
    REQUIRE(v.back() == 2.0);
    for (size_t i = 0; i < v.size(); ++i)
        REQUIRE_THAT(v[i], WithinAbs(0.25 * double(i), 1e-15));
    REQUIRE_THROWS_AS(preset_levels(0.0, 2.0, 1), std::invalid_argument);
}

TEST_CASE("exploration range inverts the hanging load curve") {
    const SegmentProps seg = independent_segment_defaults();
    const PayloadSpec load{3.0, 0.30};
    const double moment = gravity_moment(seg, load);

    // A 9.08 Nm budget against this payload runs out just shy of horizontal.
    const auto full = exploration_range(9.08, load, seg, 0.0);
    REQUIRE(full.lo == 0.0);
    REQUIRE_THAT(rad2deg(full.hi), WithinAbs(90.0, 1.0));
    REQUIRE(rad2deg(full.hi) < 90.0);

    const auto half = exploration_range(9.08, load, seg, 0.5);
    REQUIRE(half.lo == 0.0);
    REQUIRE_THAT(rad2deg(half.hi), WithinAbs(30.0, 0.05));

    // Nothing to hold up means the whole RoM is explorable.
    SegmentProps weightless = seg;
    weightless.m_F = 0.0;
    const auto free = exploration_range(1.0, PayloadSpec{0.0, 0.0}, weightless, 0.0);
    REQUIRE(free.lo == 0.0);
    REQUIRE(free.hi == deg2rad(120.0));

    // A RoM pinned near the top keeps the wedge past the horizontal instead.
    const auto top = exploration_range(0.9 * moment, load, seg, 0.0, deg2rad(100.0), deg2rad(120.0));
    REQUIRE_THAT(rad2deg(top.lo), WithinAbs(115.842, 0.01));
    REQUIRE(top.hi == deg2rad(120.0));

    REQUIRE_THROWS_AS(exploration_range(9.08, load, seg, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(exploration_range(9.08, load, seg, -0.1), std::invalid_argument);
    REQUIRE_THROWS_AS(exploration_range(9.08, load, seg, 0.0, 1.0, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(exploration_range(0.0, load, seg, 0.0), ProtocolError);
    // Mid-range RoM the load forbids entirely: both wedges miss it.
    REQUIRE_THROWS_AS(
        exploration_range(0.3 * moment, load, seg, 0.0, deg2rad(40.0), deg2rad(120.0)),
        ProtocolError);
}

TEST_CASE("torque budget stops at the weakest drive or the envelope edge") {
    const Bench aa = antagonist_bench_defaults();
    // Soft end: the extension drive binds once tension and the friction share
    // are paid.  Stiff end: tension has eaten most of that drive's rating.
    REQUIRE_THAT(preset_torque_budget(aa, 0.0, 0.95), WithinRel(3.5 / 0.675, 1e-12));
    REQUIRE_THAT(preset_torque_budget(aa, 2.0, 0.95), WithinRel(1.9 / 0.675, 1e-12));

    const Bench d2 = independent_bench_defaults();
    // Soft end: the guarded deflection envelope binds before the posture drive.
    REQUIRE_THAT(preset_torque_budget(d2, 0.0, 0.95), WithinRel(1.868234375, 1e-12));
    REQUIRE_THAT(preset_torque_budget(d2, 2.0, 0.95), WithinRel(9.7 / 1.35, 1e-12));

    Bench weak = aa;
    weak.m2.tau_n = 0.2;
    weak.m2.tau_m = 0.3;
    REQUIRE(preset_torque_budget(weak, 0.0, 0.95) == 0.0);
}

TEST_CASE("frictionless bench recovers its own elastic surface") {
    Bench b = antagonist_bench_defaults();
    b.transmission.tau_fric = 0.0;
    b.config.segment.b = 0.003;
    const ElasticProtocolConfig cfg;
    const auto elastic = run_elastic_characterization(b, cfg);

    REQUIRE(elastic.presets.size() == 9);
    for (const auto& p : elastic.presets) {
        INFO("preset " << p.level << ": " << p.note);
        REQUIRE(p.valid);
        REQUIRE(rad2deg(p.hysteresis) < 0.05);
    }
    REQUIRE(elastic.surface.r_squared() > 0.9999);
    REQUIRE(elastic.surface.rmse() < 0.01);

    const SyntheticSurface truth(b.transmission);
    for (const auto& p : elastic.presets) {
        for (double frac : {0.0, 0.5, 0.9}) {
            const double d = -frac * p.delta_peak;
            INFO("preset " << p.level << " at delta " << d);
            REQUIRE_THAT(elastic.surface.stiffness(p.level, d),
                         WithinRel(truth.stiffness(p.level, d), 0.05));
        }
    }

    double worst = 0.0;
    for (const auto& p : elastic.presets)
        for (const auto& s : p.samples)
            worst = std::max(worst,
                             std::abs(elastic.surface.torque(s.theta_s, s.delta) - s.tau));
    REQUIRE(worst <= 3.0 * elastic.surface.rmse() + 1e-9);
}

TEST_CASE("antagonist datasheet meets every functional target") {
    const ElasticProtocolConfig cfg;
    const auto r = run_full_characterization(antagonist_bench_defaults(), cfg);

    REQUIRE(r.elastic.presets.size() == 9);
    for (const auto& p : r.elastic.presets) {
        INFO("preset " << p.level << ": " << p.note);
        REQUIRE(p.valid);
        REQUIRE(p.samples.size() == 12000);
    }
    for (size_t i = 1; i < r.elastic.presets.size(); ++i) {
        REQUIRE(r.elastic.presets[i].delta_peak < r.elastic.presets[i - 1].delta_peak);
        REQUIRE(r.elastic.presets[i].hysteresis <= r.elastic.presets[i - 1].hysteresis + 1e-9);
    }
    REQUIRE_THAT(r.delta_softest_deg, WithinAbs(43.0, 7.0));
    REQUIRE_THAT(r.delta_stiffest_deg, WithinAbs(1.9, 0.7));
    REQUIRE(r.hysteresis_softest_deg > 2.0);
    REQUIRE(r.hysteresis_softest_deg < 8.0);
    REQUIRE(r.hysteresis_stiffest_deg < 0.2);
    REQUIRE(r.hysteresis_softest_deg > r.hysteresis_stiffest_deg);

    REQUIRE_THAT(r.elastic.sigma_min, WithinRel(0.65, 0.20));
    REQUIRE_THAT(r.elastic.sigma_max, WithinRel(77.0, 0.20));

    // Full-swing speed race: fastest soft, extension ahead of flexion, and the
    // whole table falls off monotonically as tension grows.
    REQUIRE(r.speed.size() == 9);
    REQUIRE_THAT(r.speed.front().flexion, WithinRel(265.0, 0.15));
    REQUIRE_THAT(r.speed.back().flexion, WithinRel(232.0, 0.15));
    REQUIRE_THAT(r.speed.front().extension, WithinRel(306.0, 0.15));
    REQUIRE_THAT(r.speed.back().extension, WithinRel(238.0, 0.15));
    for (const auto& row : r.speed) REQUIRE(row.extension > row.flexion);
    for (size_t i = 1; i < r.speed.size(); ++i) {
        REQUIRE(r.speed[i].flexion < r.speed[i - 1].flexion);
        REQUIRE(r.speed[i].extension < r.speed[i - 1].extension);
    }

    REQUIRE(r.svt_loaded.reached);
    REQUIRE(r.svt_unloaded.reached);
    REQUIRE(r.svt_loaded.posture_ref == r.svt_unloaded.posture_ref);
    REQUIRE_THAT(r.svt_loaded.posture_ref, WithinAbs(0.2725, 0.002));
    REQUIRE(r.svt_loaded.svt > r.svt_unloaded.svt);
    REQUIRE(r.svt_loaded.svt > 0.1);
    REQUIRE(r.svt_loaded.svt < 0.5);
    REQUIRE(r.svt_unloaded.svt > 0.1);

    REQUIRE(r.flags.rom);
    REQUIRE(r.flags.stiffness_range);
    REQUIRE(r.flags.active_torque);
    REQUIRE(r.flags.speed);
    REQUIRE(r.flags.passive_limit);
    REQUIRE(r.flags.all_pass());
}

TEST_CASE("independent datasheet is honest about its speed shortfall") {
    const ElasticProtocolConfig cfg;
    const auto r = run_full_characterization(independent_bench_defaults(), cfg);

    for (const auto& p : r.elastic.presets) {
        INFO("preset " << p.level << ": " << p.note);
        REQUIRE(p.valid);
    }
    for (size_t i = 1; i < r.elastic.presets.size(); ++i) {
        REQUIRE(r.elastic.presets[i].delta_peak < r.elastic.presets[i - 1].delta_peak);
        REQUIRE(r.elastic.presets[i].hysteresis <= r.elastic.presets[i - 1].hysteresis + 1e-9);
    }
    REQUIRE_THAT(r.delta_softest_deg, WithinAbs(26.0, 5.0));
    REQUIRE_THAT(r.delta_stiffest_deg, WithinAbs(3.9, 0.9));
    REQUIRE(r.hysteresis_softest_deg > 0.4);
    REQUIRE(r.hysteresis_softest_deg < 2.0);
    REQUIRE(r.hysteresis_stiffest_deg < 0.05);

    REQUIRE_THAT(r.elastic.sigma_min, WithinRel(1.0, 0.20));
    REQUIRE_THAT(r.elastic.sigma_max, WithinRel(93.0, 0.20));

    // One shared drive moves the whole arm, so the speed table is flat across
    // presets and directions, and it sits far from the 250 deg/s target.
    double mn = 1e9, mx = 0.0;
    for (const auto& row : r.speed) {
        REQUIRE_THAT(row.flexion, WithinAbs(127.5, 2.0));
        REQUIRE_THAT(row.extension, WithinAbs(127.5, 2.0));
        mn = std::min({mn, row.flexion, row.extension});
        mx = std::max({mx, row.flexion, row.extension});
    }
    REQUIRE((mx - mn) / mn < 0.01);

    // The preload drive feels only its own tension, so the transition time
    // cannot depend on what the arm carries.
    REQUIRE(r.svt_loaded.reached);
    REQUIRE(r.svt_unloaded.reached);
    REQUIRE(r.svt_loaded.svt == r.svt_unloaded.svt);
    REQUIRE_THAT(r.svt_loaded.svt, WithinAbs(1.1504, 0.02));

    REQUIRE(r.flags.rom);
    REQUIRE(r.flags.stiffness_range);
    REQUIRE(r.flags.active_torque);
    REQUIRE_FALSE(r.flags.speed);
    REQUIRE(r.flags.passive_limit);
    REQUIRE_FALSE(r.flags.all_pass());
}

TEST_CASE("speed step flags a drive that cannot settle") {
    Bench slow = independent_bench_defaults();
    slow.m1.omega_max = 0.1;
    REQUIRE_THROWS_AS(run_speed_step(slow, 1.0, true), ProtocolError);
}

TEST_CASE("preload transition timing matches a first-order oracle") {
    const ElasticProtocolConfig cfg;
    // Unbounded drive plus a proportional loop of gain 2 is a first-order lag
    // with a 0.5 s time constant; 10% to 90% takes tau * ln 9.
    Bench fo = independent_bench_defaults();
    fo.controller.kp2 = 2.0;
    fo.m2.omega_max = 1e6;
    fo.m2.tau_stall = 1e9;
    fo.m2.accel_limit = 1e12;
    const auto r = run_svt_characterization(fo, PayloadSpec{0.0, 0.30}, cfg);
    REQUIRE(r.reached);
    REQUIRE_THAT(r.svt, WithinAbs(0.5 * std::log(9.0), 0.010));

    Bench stuck = independent_bench_defaults();
    stuck.m2.omega_max = 0.05;
    const auto nr = run_svt_characterization(stuck, PayloadSpec{0.0, 0.30}, cfg);
    REQUIRE_FALSE(nr.reached);
    REQUIRE(std::isnan(nr.svt));
    REQUIRE(nr.residual > 0.5);
}

TEST_CASE("a stalling posture drive invalidates the affected presets") {
    Bench b = independent_bench_defaults();
    b.m1.tau_stall = 3.0;
    ElasticProtocolConfig cfg;
    cfg.repetitions = 1;

    const auto low = run_preset_sweep(b, cfg, 0.0);
    REQUIRE(low.valid);
    REQUIRE(low.note.empty());
    const auto mid = run_preset_sweep(b, cfg, 0.5);
    REQUIRE_FALSE(mid.valid);
    REQUIRE(mid.note == "drive could not track the sweep");

    // Only the two softest presets survive, which leaves too few distinct
    // preloads for the surface fit to be identifiable.
    REQUIRE_THROWS_AS(run_elastic_characterization(b, cfg), std::invalid_argument);
}

TEST_CASE("parallel preset fan-out reproduces the serial reduction") {
    const Bench b = independent_bench_defaults();
    ElasticProtocolConfig cfg;
    cfg.repetitions = 1;
    const auto serial = run_elastic_characterization(b, cfg, false);
    const auto parallel = run_elastic_characterization(b, cfg, true);

    REQUIRE(serial.sigma_min == parallel.sigma_min);
    REQUIRE(serial.sigma_max == parallel.sigma_max);
    REQUIRE(serial.surface.r_squared() == parallel.surface.r_squared());
    REQUIRE(serial.surface.rmse() == parallel.surface.rmse());
    REQUIRE(serial.presets.size() == parallel.presets.size());
    for (size_t i = 0; i < serial.presets.size(); ++i) {
        REQUIRE(serial.presets[i].delta_peak == parallel.presets[i].delta_peak);
        REQUIRE(serial.presets[i].hysteresis == parallel.presets[i].hysteresis);
        REQUIRE(serial.presets[i].samples.size() == parallel.presets[i].samples.size());
    }
    for (double ts : {0.0, 1.0, 2.0})
        for (double d : {-0.3, 0.0, 0.2})
            REQUIRE(serial.surface.torque(ts, d) == parallel.surface.torque(ts, d));
}
