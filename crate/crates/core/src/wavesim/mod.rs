//! Wave-propagation oracle: group velocity profiles, analytic TDOAs, the
//! dispersion / temperature scaling laws, synthetic sensor signals and the
//! delamination-onset load.

mod gvp;
mod laminate;
mod scenario;
mod signal;
mod tdoa;

pub use gvp::{group_velocity, reduce_angle, GvpKind, GvpModel};
pub use laminate::{critical_delamination_load, critical_load_from_effective, LaminateStiffness};
pub use scenario::{default_plate, default_sensor_array, GridSpec, Scenario, DEFAULT_SENSORS_MM};
pub use signal::{synthesize_signals, tone_burst, SyntheticSignal, BURST_CYCLES, MIN_OVERSAMPLING};
pub use tdoa::{
    analytic_tdoa, analytic_tdoa_with_rng, apply_temperature_scaling, arrival_times, noisy_tdoa,
    scale_tdoa, NoiseModel,
};
