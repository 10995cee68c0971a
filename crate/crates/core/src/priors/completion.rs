//! Interpolation-based estimates of unobserved sensor data.

use std::f64::consts::PI;

use crate::error::{ensure_len, Error, Result};
use crate::operators::{gather_lines, CtGeometry, KSpaceMask};

/// Fills the angles `num_observed..` of `geom_full` from a sinogram over its
/// first `num_observed` angles.
///
/// Each missing projection is a linear blend, in angle, of the last observed
/// projection and the conjugate `s(θ₀ + π, t) = s(θ₀, −t)` of the first one.
/// The result is laid out like a sinogram over the missing angles.
pub fn sinogram_complete(
    limited: &[f64],
    geom_full: &CtGeometry,
    num_observed: usize,
) -> Result<Vec<f64>> {
    let na = geom_full.num_angles();
    let nd = geom_full.num_detectors();
    if num_observed == 0 {
        return Err(Error::config(
            "sinogram completion needs at least one observed angle",
        ));
    }
    if num_observed > na {
        return Err(Error::config(format!(
            "{num_observed} observed angles but the full set has only {na}"
        )));
    }
    ensure_len("limited sinogram", limited.len(), num_observed * nd)?;
    if num_observed == na {
        return Ok(Vec::new());
    }
    let angles = geom_full.angles();
    let last_angle = angles[num_observed - 1];
    let conj_angle = angles[0] + PI;
    let span = conj_angle - last_angle;
    let last = &limited[(num_observed - 1) * nd..num_observed * nd];
    let first = &limited[..nd];
    let mut out = Vec::with_capacity((na - num_observed) * nd);
    for &theta in &angles[num_observed..] {
        let w = (theta - last_angle) / span;
        for k in 0..nd {
            out.push((1.0 - w) * last[k] + w * first[nd - 1 - k]);
        }
    }
    Ok(out)
}

/// Completes the missing k-space columns of a zero-filled two-channel grid
/// by per-row linear interpolation between the nearest sampled columns,
/// holding the edge values constant outside the sampled range. Returns the
/// missing entries in (channel, row, line) order.
pub fn kspace_complete(masked: &[f64], mask: &KSpaceMask) -> Result<Vec<f64>> {
    let n = mask.cols();
    if mask.rows() != n {
        return Err(Error::shape("k-space completion expects a square grid"));
    }
    ensure_len("masked k-space", masked.len(), 2 * n * n)?;
    let sampled = mask.sampled_lines();
    if sampled.len() < 2 {
        return Err(Error::config(
            "k-space completion needs at least two sampled lines",
        ));
    }
    let missing = mask.missing_lines();
    if missing.is_empty() {
        return Ok(Vec::new());
    }
    // For every missing column: (left sampled, right sampled, weight of right).
    let stencil: Vec<(usize, usize, f64)> = missing
        .iter()
        .map(|&c| {
            let pos = sampled.partition_point(|&s| s < c);
            if pos == 0 {
                (sampled[0], sampled[0], 0.0)
            } else if pos == sampled.len() {
                let s = sampled[pos - 1];
                (s, s, 0.0)
            } else {
                let (l, r) = (sampled[pos - 1], sampled[pos]);
                (l, r, (c - l) as f64 / (r - l) as f64)
            }
        })
        .collect();
    let mut filled = masked.to_vec();
    for row in filled.chunks_mut(n) {
        for (&c, &(l, r, w)) in missing.iter().zip(&stencil) {
            row[c] = (1.0 - w) * row[l] + w * row[r];
        }
    }
    Ok(gather_lines(&filled, n, &missing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_observation_gives_empty() {
        let g = CtGeometry::parallel(16, 4).unwrap();
        let sino = vec![1.0; g.sinogram_len()];
        assert!(sinogram_complete(&sino, &g, 4).unwrap().is_empty());
        assert!(sinogram_complete(&sino[..0], &g, 0).is_err());
    }

    #[test]
    fn midway_angle_is_average() {
        // Angles 0, π/3, 2π/3: the missing angle is midway between π/3 and π.
        let g = CtGeometry::parallel(8, 3).unwrap();
        let nd = g.num_detectors();
        let limited: Vec<f64> = (0..2 * nd).map(|k| (k * k % 17) as f64).collect();
        let out = sinogram_complete(&limited, &g, 2).unwrap();
        assert_eq!(out.len(), nd);
        for k in 0..nd {
            let expected = 0.5 * (limited[nd + k] + limited[nd - 1 - k]);
            assert!((out[k] - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn kspace_midpoint_and_edges() {
        let n = 4;
        let mask = KSpaceMask::new(n, n, vec![0, 2], 0..1).unwrap();
        let mut grid = vec![0.0; 2 * n * n];
        for ch in 0..2 {
            for r in 0..n {
                grid[ch * n * n + r * n] = (ch * 10 + r) as f64;
                grid[ch * n * n + r * n + 2] = (ch * 10 + r) as f64 + 4.0;
            }
        }
        let out = kspace_complete(&grid, &mask).unwrap();
        // Missing lines 1 and 3, (channel, row, line) order.
        for ch in 0..2 {
            for r in 0..n {
                let base = (ch * 10 + r) as f64;
                let at = (ch * n + r) * 2;
                assert!((out[at] - (base + 2.0)).abs() < 1e-12);
                assert!((out[at + 1] - (base + 4.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kspace_needs_two_lines() {
        let mask = KSpaceMask::new(4, 4, vec![2], 2..3).unwrap();
        assert!(matches!(
            kspace_complete(&[0.0; 32], &mask),
            Err(Error::Config(_))
        ));
        let full = KSpaceMask::new(4, 4, (0..4).collect(), 1..3).unwrap();
        assert!(kspace_complete(&[0.0; 32], &full).unwrap().is_empty());
    }
}
