use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::operators::KSpaceMask;

/// A uniform `[0, π)` angle grid split into an observed prefix and the
/// missing remainder.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitedAngleSet {
    pub observed: Vec<f64>,
    pub missing: Vec<f64>,
}

impl LimitedAngleSet {
    pub fn full(&self) -> Vec<f64> {
        let mut all = self.observed.clone();
        all.extend_from_slice(&self.missing);
        all
    }
}

pub fn make_limited_angle_set(
    num_angles_full: usize,
    keep_fraction: f64,
) -> Result<LimitedAngleSet> {
    if !(keep_fraction > 0.0 && keep_fraction < 1.0) {
        return Err(Error::config(format!(
            "keep_fraction must lie in (0, 1), got {keep_fraction}"
        )));
    }
    // The small offset keeps fractions like 179/180 from flooring one short.
    let keep = (keep_fraction * num_angles_full as f64 + 1e-9).floor() as usize;
    if keep == 0 || keep >= num_angles_full {
        return Err(Error::config(format!(
            "keep_fraction {keep_fraction} of {num_angles_full} angles leaves no observed or no missing angles"
        )));
    }
    let mut observed = crate::operators::uniform_angles(num_angles_full);
    let missing = observed.split_off(keep);
    Ok(LimitedAngleSet { observed, missing })
}

/// Every `accel`-th column plus a centered ACS band of
/// `round(acs_fraction · n)` columns starting at `n/2 − w/2`.
pub fn make_kspace_mask(n: usize, accel: usize, acs_fraction: f64) -> Result<KSpaceMask> {
    if accel == 0 {
        return Err(Error::config("acceleration must be at least 1"));
    }
    if !(0.0..1.0).contains(&acs_fraction) {
        return Err(Error::config(format!(
            "ACS fraction must lie in [0, 1), got {acs_fraction}"
        )));
    }
    let width = (acs_fraction * n as f64 + 0.5).floor() as usize;
    if width > n {
        return Err(Error::config(format!(
            "ACS band of {width} columns exceeds {n}"
        )));
    }
    let start = n / 2 - width / 2;
    let band = start..start + width;
    let lines: Vec<usize> = (0..n)
        .filter(|c| c % accel == 0 || band.contains(c))
        .collect();
    KSpaceMask::new(n, n, lines, band)
}

/// `v + σ·z` with `z` standard normal from a ChaCha8 stream seeded by `seed`.
pub fn add_gaussian_noise(v: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::config(format!(
            "noise sigma must be non-negative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(v.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(v.iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sigma * z
        })
        .collect())
}
