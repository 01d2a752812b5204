#![allow(dead_code)]

use cellflux::cell_model::ModelParams;
use cellflux::periodic::PeriodicForcing;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sinusoidal alpha, raised-cos-squared gamma, with `D` at least a tenth of `beta * mean(gamma)`.
pub fn periodic_draw(rng: &mut ChaCha8Rng) -> ModelParams {
    loop {
        let a0 = rng.gen_range(1.0..3.0);
        let a1 = rng.gen_range(0.0..0.9) * a0;
        let g0 = rng.gen_range(0.5..2.0);
        let g1 = rng.gen_range(0.0..1.5);
        let beta = rng.gen_range(0.5..3.0);
        let sigma = rng.gen_range(0.5..3.0);
        let eps = rng.gen_range(0.05..1.0);
        let bg = beta * (g0 + g1 / 2.0);
        if bg - sigma * a0 > 0.1 * bg {
            return ModelParams::new(
                PeriodicForcing::sinusoid(1.0, a0, a1, 1).unwrap(),
                PeriodicForcing::raised_cos_squared(1.0, g0, g1, 1).unwrap(),
                beta,
                sigma,
                eps,
            )
            .unwrap();
        }
    }
}

/// Constant forcings with `D > 0`, returned with the closed-form equilibrium.
pub fn autonomous_draw(rng: &mut ChaCha8Rng) -> (ModelParams, f64, f64) {
    loop {
        let period = rng.gen_range(0.5..3.0);
        let alpha = rng.gen_range(0.5..3.0);
        let gamma = rng.gen_range(0.5..3.0);
        let beta = rng.gen_range(0.5..3.0);
        let sigma = rng.gen_range(0.5..3.0);
        let eps = rng.gen_range(0.05..1.0);
        let d = beta * gamma - sigma * alpha;
        if d > 0.1 * beta * gamma {
            let y = eps * beta / d;
            let x = alpha / beta * y;
            let params = ModelParams::autonomous(period, alpha, gamma, beta, sigma, eps).unwrap();
            return (params, x, y);
        }
    }
}
