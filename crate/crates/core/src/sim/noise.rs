use crate::rng::Rng;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, Gumbel, StandardNormal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Exponential,
    Gumbel,
    Uniform,
    Logistic,
}

impl NoiseKind {
    pub fn is_gaussian(self) -> bool {
        self == NoiseKind::Gaussian
    }
}

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// One standardized draw: mean 0, variance 1.
fn standard_draw(kind: NoiseKind, rng: &mut Rng) -> f64 {
    use std::f64::consts::PI;
    match kind {
        NoiseKind::Gaussian => StandardNormal.sample(rng),
        NoiseKind::Exponential => {
            let e: f64 = Exp1.sample(rng);
            e - 1.0
        }
        NoiseKind::Gumbel => {
            let g = Gumbel::new(0.0, 1.0).expect("valid gumbel").sample(rng);
            (g - EULER_GAMMA) / (PI / 6f64.sqrt())
        }
        NoiseKind::Uniform => (rng.random::<f64>() * 2.0 - 1.0) * 3f64.sqrt(),
        NoiseKind::Logistic => {
            let u: f64 = rng.random_range(f64::EPSILON..1.0);
            (u / (1.0 - u)).ln() / (PI / 3f64.sqrt())
        }
    }
}

/// `n` i.i.d. draws centered analytically and scaled to standard deviation
/// `scale`.
pub fn sample_noise(kind: NoiseKind, scale: f64, n: usize, rng: &mut Rng) -> Vec<f64> {
    assert!(scale > 0.0, "noise scale must be positive");
    (0..n).map(|_| scale * standard_draw(kind, rng)).collect()
}
