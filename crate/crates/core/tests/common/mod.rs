#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use synergistic::backstepping::BacksteppingParams;
use synergistic::navigation::{NavGains, NavigationWorld, Vec2};
use synergistic::smoothing::SmoothedParams;

pub fn wide_barrier_world() -> NavigationWorld<f64> {
    NavigationWorld::new([4.0, 0.0], 1.0, 0.1, [0.0, 0.0], 1.0, 16.0).unwrap()
}

/// Obstacle on the segment from the start (12, 0) to the destination.
pub fn collinear_world() -> NavigationWorld<f64> {
    NavigationWorld::new([5.0, 0.0], 2.0, 0.1, [0.0, 0.0], 0.5, 15.0).unwrap()
}

pub fn reference_gains() -> NavGains<f64> {
    NavGains {
        k_p: 12.0,
        k_theta: 0.02,
        gamma_theta: 2.0264,
        theta_set: vec![0.2],
        delta: 0.0365,
        smoothing: Some(SmoothedParams {
            gamma_s: 0.0659,
            k_eta: 100.0,
            delta_s: 0.0036,
        }),
        backstepping: Some(BacksteppingParams {
            gamma_b: 0.1,
            k_b: 10.0,
            delta_b: 0.0036,
        }),
    }
}

/// Uniform point of the free space around `w`'s obstacle, biased so that
/// roughly half the draws land inside the barrier band.
pub fn random_free_point(rng: &mut ChaCha8Rng, w: &NavigationWorld<f64>) -> Vec2<f64> {
    if rng.gen_bool(0.5) {
        let r = w.r_o + rng.gen_range(w.epsilon + 1e-3..w.r_s);
        let a = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        return [w.p_o[0] + r * a.cos(), w.p_o[1] + r * a.sin()];
    }
    loop {
        let p = [rng.gen_range(-4.0..12.0), rng.gen_range(-6.0..6.0)];
        if w.d_o(p) > w.epsilon + 1e-3 {
            return p;
        }
    }
}

/// `‖a − b‖ / max(‖b‖, floor)`.
pub fn rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / scale.max(floor)
}

/// Fourth-order central difference of a scalar function of one variable.
pub fn diff5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}
