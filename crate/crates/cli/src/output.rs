//! Tensor layouts of stored arrays and image previews.

use std::fs;
use std::path::Path;

use dipiir::operators::KSpaceMask;
use dipiir::pipeline::{Acquisition, Simulation};
use dipiir::priors::{save_tensor, Tensor};
use dipiir::Result;
use serde::Serialize;

/// Dimensions of the observed data as stored on disk.
pub fn observed_dims(sim: &Simulation) -> Vec<usize> {
    let n = sim.side();
    match &sim.acquisition {
        Acquisition::Ct { full, num_observed } => vec![*num_observed, full.num_detectors()],
        Acquisition::Mri { mask } => vec![2, n, mask.sampled_lines().len()],
        Acquisition::Deblur { .. } => vec![n, n],
        Acquisition::Superres { factor, .. } => vec![n / factor, n / factor],
    }
}

/// Dimensions of the complete data.
pub fn full_dims(sim: &Simulation) -> Vec<usize> {
    let n = sim.side();
    match &sim.acquisition {
        Acquisition::Ct { full, .. } => vec![full.num_angles(), full.num_detectors()],
        Acquisition::Mri { .. } => vec![2, n, n],
        _ => vec![n, n],
    }
}

pub fn image_dims(sim: &Simulation) -> Vec<usize> {
    let n = sim.side();
    if sim.is_complex() {
        vec![2, n, n]
    } else {
        vec![n, n]
    }
}

/// Per-column codes: 0 missing, 1 sampled, 2 calibration band.
pub fn mask_codes(mask: &KSpaceMask) -> Vec<f64> {
    let acs = mask.acs_band();
    (0..mask.cols())
        .map(|c| {
            if acs.contains(&c) {
                2.0
            } else if mask.is_sampled(c) {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

pub fn save(path: &Path, dims: Vec<usize>, data: Vec<f64>) -> Result<()> {
    save_tensor(path, &Tensor::new(dims, data)?)
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| dipiir::Error::Numeric(format!("cannot serialize report: {e}")))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Binary 8-bit PGM of a `rows × cols` image mapped linearly from
/// `[lo, hi]` to `[0, 255]`.
pub fn write_pgm(
    path: &Path,
    image: &[f64],
    rows: usize,
    cols: usize,
    lo: f64,
    hi: f64,
) -> Result<()> {
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut bytes = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    bytes.extend(
        image
            .iter()
            .map(|v| (((v - lo) / span).clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    fs::write(path, bytes)?;
    Ok(())
}
