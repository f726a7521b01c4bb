#pragma once

#include "vselbow/control.hpp"
#include "vselbow/plant.hpp"

namespace vselbow {

/// One complete test rig: shaft layout, elastic transmission, the two drive
/// units, the mechanical environment, and the matching controller gains.
/// Protocols copy a bench, tweak the config fields they care about, and call
/// make() per run, so concurrent runs never share mutable state.
struct Bench {
    ElbowLayout layout;
    SyntheticTransmissionParams transmission;
    MotorUnit m1;
    MotorUnit m2;
    PlantConfig config;
    ControllerConfig controller;

    /// Fresh plant at the given initial pose.  The surface object inside the
    /// plant is built from the transmission record, so edits to `transmission`
    /// after this call do not reach the running plant.
    Plant make(double theta_p0, double theta_s0, double delta0 = 0.0) const {
        PlantConfig cfg = config;
        cfg.theta_p0 = theta_p0;
        cfg.theta_s0 = theta_s0;
        cfg.delta0 = delta0;
        return Plant(layout, SyntheticSurface(transmission), m1, m2, cfg);
    }

    /// Standalone surface for controllers and analysis.  The caller owns it;
    /// a HighLevelController holds it by reference, so keep it alive as long
    /// as the controller runs.
    SyntheticSurface surface() const { return SyntheticSurface(transmission); }
};

inline Bench antagonist_bench_defaults() {
    Bench b{antagonist_layout(),
            aa_transmission_defaults(),
            antagonist_motor_flexor(),
            antagonist_motor_extensor(),
            PlantConfig{},
            antagonist_controller_defaults()};
    b.config.segment = antagonist_segment_defaults();
    return b;
}

inline Bench independent_bench_defaults() {
    Bench b{independent_layout(),
            d2_transmission_defaults(),
            independent_motor_posture(),
            independent_motor_preload(),
            PlantConfig{},
            independent_controller_defaults()};
    b.config.segment = independent_segment_defaults();
    return b;
}

} // namespace vselbow
