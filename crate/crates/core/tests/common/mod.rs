#![allow(dead_code)]

use dipiir::simdata::{Ellipse, SHEPP_LOGAN};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn disk(side: usize, radius: f64) -> Vec<f64> {
    let c = (side as f64 - 1.0) / 2.0;
    let h = 1.0 / side as f64;
    let mut v = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            let x = (j as f64 - c) * h;
            let y = (i as f64 - c) * h;
            if x * x + y * y <= radius * radius {
                v[i * side + j] = 1.0;
            }
        }
    }
    v
}

/// Exact line integral of one ellipse along `x cosθ + y sinθ = t`, with the
/// ellipse table rescaled from `[-1, 1]²` onto the unit field of view.
fn ellipse_projection(e: &Ellipse, theta: f64, t: f64) -> f64 {
    let (x0, y0, a, b) = (0.5 * e.x0, 0.5 * e.y0, 0.5 * e.a, 0.5 * e.b);
    let gamma = theta - e.phi_deg.to_radians();
    let s2 = (a * gamma.cos()).powi(2) + (b * gamma.sin()).powi(2);
    let tau = t - x0 * theta.cos() - y0 * theta.sin();
    if tau * tau >= s2 {
        0.0
    } else {
        2.0 * e.intensity * a * b * (s2 - tau * tau).sqrt() / s2
    }
}

/// Analytic Shepp-Logan sinogram on the given angle/detector layout.
pub fn analytic_shepp_logan_sinogram(angles: &[f64], offsets: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len() * offsets.len());
    for &theta in angles {
        for &t in offsets {
            out.push(
                SHEPP_LOGAN
                    .iter()
                    .map(|e| ellipse_projection(e, theta, t))
                    .sum(),
            );
        }
    }
    out
}
