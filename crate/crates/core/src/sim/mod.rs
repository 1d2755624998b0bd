//! Ground-truth data generators: tabular structural equation models with
//! corruption stages, and stationary linear multivariate time series.

mod noise;
pub mod tabular;
pub mod timeseries;

pub use noise::{sample_noise, NoiseKind};
pub use tabular::{
    apply_domain_shift, apply_measurement_error, apply_missing, discretize_columns, simulate_tabular, FunctionType,
    TabularScenario,
};
pub use timeseries::{
    generate_temporal_graph, simulate_temporal, simulate_ts_scenario, spectral_radius, stabilize, TsGraphType,
    TsScenario,
};

use crate::rng::Rng;
use rand::Rng as _;

/// Uniform draw from `±[lo, hi]` with a fair random sign.
pub(crate) fn signed_uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    let mag = lo + (hi - lo) * rng.random::<f64>();
    if rng.random::<bool>() {
        mag
    } else {
        -mag
    }
}
