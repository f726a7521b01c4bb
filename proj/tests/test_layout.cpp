#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "vselbow/layout.hpp"
#include "vselbow/units.hpp"

using namespace vselbow;

TEST_CASE("antagonist mixing reproduces the worked shaft split") {
    const auto lay = antagonist_layout();
    const auto r = lay.shafts_from_joints(deg2rad(60.0), deg2rad(20.0));
    REQUIRE_FALSE(r.saturated);
    REQUIRE_THAT(r.theta1, Catch::Matchers::WithinAbs(deg2rad(50.0), 1e-12));
    REQUIRE_THAT(r.theta2, Catch::Matchers::WithinAbs(deg2rad(70.0), 1e-12));
}

TEST_CASE("antagonist zero preload collapses both shafts onto the posture") {
    const auto lay = antagonist_layout();
    for (double tp : {-0.5, 0.0, 0.3, 1.7, 2.1}) {
        const auto r = lay.shafts_from_joints(tp, 0.0);
        REQUIRE(r.theta1 == tp);
        REQUIRE(r.theta2 == tp);
    }
}

TEST_CASE("independent mixing is the identity") {
    const auto lay = independent_layout();
    const auto r = lay.shafts_from_joints(0.973, 1.204);
    REQUIRE(r.theta1 == 0.973);
    REQUIRE(r.theta2 == 1.204);
    const auto j = lay.joints_from_shafts(0.211, 0.77);
    REQUIRE(j.theta_p == 0.211);
    REQUIRE(j.theta_s == 0.77);
}

TEST_CASE("mixing and unmixing are inverse to machine precision") {
    std::mt19937_64 rng(0x51a7e5u);
    std::uniform_real_distribution<double> posture(-1.0, 3.0);
    std::uniform_real_distribution<double> preload(0.0, 2.0);
    const auto aa = antagonist_layout();
    const auto d2 = independent_layout();
    for (const auto* lay : {&aa, &d2}) {
        for (int i = 0; i < 10000; ++i) {
            const double tp = posture(rng);
            const double ts = preload(rng);
            const auto r = lay->shafts_from_joints(tp, ts);
            REQUIRE_FALSE(r.saturated);
            const auto j = lay->joints_from_shafts(r.theta1, r.theta2);
            REQUIRE_THAT(j.theta_p, Catch::Matchers::WithinAbs(tp, 1e-13));
            REQUIRE_THAT(j.theta_s, Catch::Matchers::WithinAbs(ts, 1e-13));
        }
    }
}

TEST_CASE("out-of-range references clamp and raise the saturation flag") {
    const auto lay = antagonist_layout(0.0, 2.0);
    auto r = lay.shafts_from_joints(1.0, 2.5);
    REQUIRE(r.saturated);
    auto j = lay.joints_from_shafts(r.theta1, r.theta2);
    REQUIRE_THAT(j.theta_s, Catch::Matchers::WithinAbs(2.0, 1e-13));

    r = lay.shafts_from_joints(1.0, -0.4);
    REQUIRE(r.saturated);
    j = lay.joints_from_shafts(r.theta1, r.theta2);
    REQUIRE_THAT(j.theta_s, Catch::Matchers::WithinAbs(0.0, 1e-13));

    r = lay.shafts_from_joints(40.0, 1.0);
    REQUIRE(r.saturated);
    REQUIRE(r.theta1 <= 4.5);
    REQUIRE(r.theta2 <= 4.5);
}

TEST_CASE("layout construction rejects bad geometry") {
    REQUIRE_THROWS_AS(ElbowLayout(LayoutKind::Antagonist, {1.0, 1.0, 2.0, 2.0}, 1.0,
                                  0.0, 2.0, -1.0, 1.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(ElbowLayout(LayoutKind::Antagonist, {0.5, 0.5, -1.0, 1.0}, 1.2,
                                  0.0, 2.0, -1.0, 1.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(ElbowLayout(LayoutKind::Independent, {1.0, 0.0, 0.0, 1.0}, 1.0,
                                  2.0, 2.0, -1.0, 1.0),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(ElbowLayout(LayoutKind::Independent, {1.0, 0.0, 0.0, 1.0}, 1.0,
                                  0.0, 2.0, 1.0, 1.0),
                      std::invalid_argument);
}

TEST_CASE("coupling weights match the mixing matrix rows") {
    const auto aa = antagonist_layout();
    REQUIRE(aa.posture_weight(0) == 0.5);
    REQUIRE(aa.posture_weight(1) == 0.5);
    REQUIRE(aa.preload_weight(0) == -1.0);
    REQUIRE(aa.preload_weight(1) == 1.0);
    const auto d2 = independent_layout();
    REQUIRE(d2.posture_weight(0) == 1.0);
    REQUIRE(d2.posture_weight(1) == 0.0);
    REQUIRE(d2.preload_weight(0) == 0.0);
    REQUIRE(d2.preload_weight(1) == 1.0);
}
