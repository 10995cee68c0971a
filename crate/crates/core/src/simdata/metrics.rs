use serde::Serialize;

use crate::error::{ensure_len, Error, Result};

/// Reported when the two inputs are identical.
pub const PSNR_CAP: f64 = 300.0;

pub fn rmse(a: &[f64], b: &[f64]) -> Result<f64> {
    Ok(mse(a, b)?.sqrt())
}

fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len("metric input", a.len(), b.len())?;
    if a.is_empty() {
        return Err(Error::shape("metrics of empty vectors"));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(s / a.len() as f64)
}

/// `10·log10(peak² / mse)`, capped at [`PSNR_CAP`].
pub fn psnr(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::config(format!(
            "PSNR peak must be positive, got {peak}"
        )));
    }
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (peak * peak / m).log10()).min(PSNR_CAP))
}

/// `‖a − b‖² / ‖b‖²` with `b` the reference.
pub fn nmse(a: &[f64], b: &[f64]) -> Result<f64> {
    ensure_len("metric input", a.len(), b.len())?;
    let den: f64 = b.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(Error::numeric("NMSE reference has zero norm"));
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SsimConfig {
    pub window: usize,
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Default for SsimConfig {
    fn default() -> Self {
        Self {
            window: 11,
            sigma: 1.5,
            k1: 0.01,
            k2: 0.03,
        }
    }
}

fn gaussian_window(cfg: &SsimConfig) -> Vec<f64> {
    let c = (cfg.window as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..cfg.window)
        .map(|k| {
            let d = k as f64 - c;
            (-d * d / (2.0 * cfg.sigma * cfg.sigma)).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    g.iter().map(|v| v / total).collect()
}

/// Mean SSIM over all fully contained windows, dynamic range taken from the
/// reference `b` (1 if `b` is constant).
pub fn ssim(a: &[f64], b: &[f64], rows: usize, cols: usize, cfg: &SsimConfig) -> Result<f64> {
    ensure_len("ssim input", a.len(), rows * cols)?;
    ensure_len("ssim reference", b.len(), rows * cols)?;
    let w = cfg.window;
    if w == 0 || w > rows || w > cols {
        return Err(Error::shape(format!(
            "{rows}x{cols} image is smaller than the {w}x{w} SSIM window"
        )));
    }
    let (lo, hi) = b
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
            (l.min(*v), h.max(*v))
        });
    let range = if hi > lo { hi - lo } else { 1.0 };
    let c1 = (cfg.k1 * range).powi(2);
    let c2 = (cfg.k2 * range).powi(2);
    let g = gaussian_window(cfg);

    // Separable weighted sums of a, b, a², b², ab over every valid window.
    let moments = |f: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let oc = cols - w + 1;
        let or = rows - w + 1;
        let mut tmp = vec![0.0; rows * oc];
        for i in 0..rows {
            for j in 0..oc {
                tmp[i * oc + j] = (0..w).map(|k| g[k] * f(i * cols + j + k)).sum();
            }
        }
        let mut out = vec![0.0; or * oc];
        for i in 0..or {
            for j in 0..oc {
                out[i * oc + j] = (0..w).map(|k| g[k] * tmp[(i + k) * oc + j]).sum();
            }
        }
        out
    };
    let ma = moments(&|k| a[k]);
    let mb = moments(&|k| b[k]);
    let maa = moments(&|k| a[k] * a[k]);
    let mbb = moments(&|k| b[k] * b[k]);
    let mab = moments(&|k| a[k] * b[k]);
    let total: f64 = (0..ma.len())
        .map(|k| {
            let va = maa[k] - ma[k] * ma[k];
            let vb = mbb[k] - mb[k] * mb[k];
            let cov = mab[k] - ma[k] * mb[k];
            ((2.0 * ma[k] * mb[k] + c1) * (2.0 * cov + c2))
                / ((ma[k] * ma[k] + mb[k] * mb[k] + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / ma.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub rmse: f64,
    pub psnr: f64,
    pub ssim: f64,
    pub nmse: f64,
    pub peak: f64,
    pub ssim_window: usize,
    pub ssim_sigma: f64,
}

impl MetricsReport {
    /// All metrics of `recon` against `reference` on a `rows × cols` grid,
    /// with the reference's dynamic range as PSNR peak.
    pub fn compute(recon: &[f64], reference: &[f64], rows: usize, cols: usize) -> Result<Self> {
        let cfg = SsimConfig::default();
        let (lo, hi) = reference
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                (l.min(*v), h.max(*v))
            });
        let peak = if hi > lo { hi - lo } else { 1.0 };
        Ok(Self {
            rmse: rmse(recon, reference)?,
            psnr: psnr(recon, reference, peak)?,
            ssim: ssim(recon, reference, rows, cols, &cfg)?,
            nmse: nmse(recon, reference)?,
            peak,
            ssim_window: cfg.window,
            ssim_sigma: cfg.sigma,
        })
    }
}
