use serde::Serialize;

use crate::error::{ensure_len, Error, Result};
use crate::operators::reflect_index as reflect;

/// Which half of the augmented state a denoiser is meant for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Image,
    Data,
}

/// Layout of a flat vector as `channels` stacked `rows × cols` planes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridShape {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(channels: usize, rows: usize, cols: usize) -> Self {
        Self {
            channels,
            rows,
            cols,
        }
    }

    pub fn square(side: usize) -> Self {
        Self::new(1, side, side)
    }

    pub fn plane_len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn len(&self) -> usize {
        self.channels * self.plane_len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> Vec<usize> {
        if self.channels == 1 {
            vec![self.rows, self.cols]
        } else {
            vec![self.channels, self.rows, self.cols]
        }
    }
}

/// A same-length map on image or data vectors.
pub trait Denoiser: Send + Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> Domain;
    fn params(&self) -> Vec<(String, f64)> {
        Vec::new()
    }
    fn denoise(&self, v: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct IdentityDenoiser {
    pub domain: Domain,
}

impl Denoiser for IdentityDenoiser {
    fn name(&self) -> &str {
        "identity"
    }
    fn domain(&self) -> Domain {
        self.domain
    }
    fn denoise(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }
}

fn gaussian_taps(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|k| {
            let d = k as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= total);
    taps
}

/// Separable Gaussian smoothing of every plane, reflective border, kernel
/// truncated at 3σ and normalized to unit sum.
pub fn gaussian_denoise(v: &[f64], shape: GridShape, sigma: f64) -> Result<Vec<f64>> {
    ensure_len("gaussian denoiser input", v.len(), shape.len())?;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::config(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let taps = gaussian_taps(sigma);
    let r = (taps.len() / 2) as isize;
    let (rows, cols) = (shape.rows, shape.cols);
    let mut out = vec![0.0; v.len()];
    let mut tmp = vec![0.0; shape.plane_len()];
    for (src, dst) in v
        .chunks(shape.plane_len())
        .zip(out.chunks_mut(shape.plane_len()))
    {
        for i in 0..rows {
            for j in 0..cols {
                tmp[i * cols + j] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * src[i * cols + reflect(j as isize + k as isize - r, cols)])
                    .sum();
            }
        }
        for i in 0..rows {
            for j in 0..cols {
                dst[i * cols + j] = taps
                    .iter()
                    .enumerate()
                    .map(|(k, t)| t * tmp[reflect(i as isize + k as isize - r, rows) * cols + j])
                    .sum();
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GaussianDenoiser {
    pub shape: GridShape,
    pub sigma: f64,
    pub domain: Domain,
}

impl Denoiser for GaussianDenoiser {
    fn name(&self) -> &str {
        "gaussian"
    }
    fn domain(&self) -> Domain {
        self.domain
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![("sigma".into(), self.sigma)]
    }
    fn denoise(&self, v: &[f64]) -> Result<Vec<f64>> {
        gaussian_denoise(v, self.shape, self.sigma)
    }
}

/// Inner solver settings for total-variation denoising.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvConfig {
    pub max_iters: usize,
    /// Stop when the largest change of the dual field drops below this.
    pub tol: f64,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvOutcome {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// `argmin_u ½‖u − v‖² + weight·TV(u)` per plane, isotropic TV with forward
/// differences, solved with Chambolle's dual projection iterations.
pub fn tv_denoise(v: &[f64], shape: GridShape, weight: f64, cfg: &TvConfig) -> Result<TvOutcome> {
    ensure_len("tv denoiser input", v.len(), shape.len())?;
    if !(weight >= 0.0) || !weight.is_finite() {
        return Err(Error::config(format!(
            "TV weight must be non-negative, got {weight}"
        )));
    }
    if weight == 0.0 || shape.is_empty() {
        return Ok(TvOutcome {
            values: v.to_vec(),
            iterations: 0,
            converged: true,
        });
    }
    let mut values = Vec::with_capacity(v.len());
    let mut iterations = 0;
    let mut converged = true;
    for plane in v.chunks(shape.plane_len()) {
        let (u, it, ok) = chambolle_plane(plane, shape.rows, shape.cols, weight, cfg);
        values.extend(u);
        iterations = iterations.max(it);
        converged &= ok;
    }
    Ok(TvOutcome {
        values,
        iterations,
        converged,
    })
}

fn chambolle_plane(
    f: &[f64],
    rows: usize,
    cols: usize,
    weight: f64,
    cfg: &TvConfig,
) -> (Vec<f64>, usize, bool) {
    const TAU: f64 = 0.125;
    let n = rows * cols;
    let mut px = vec![0.0; n];
    let mut py = vec![0.0; n];
    let mut div = vec![0.0; n];
    let mut g = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        divergence(&px, &py, rows, cols, &mut div);
        for k in 0..n {
            g[k] = div[k] - f[k] / weight;
        }
        let mut change = 0.0f64;
        for i in 0..rows {
            for j in 0..cols {
                let k = i * cols + j;
                let gx = if j + 1 < cols { g[k + 1] - g[k] } else { 0.0 };
                let gy = if i + 1 < rows {
                    g[k + cols] - g[k]
                } else {
                    0.0
                };
                let scale = 1.0 + TAU * (gx * gx + gy * gy).sqrt();
                let nx = (px[k] + TAU * gx) / scale;
                let ny = (py[k] + TAU * gy) / scale;
                change = change.max((nx - px[k]).abs()).max((ny - py[k]).abs());
                px[k] = nx;
                py[k] = ny;
            }
        }
        iterations += 1;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    divergence(&px, &py, rows, cols, &mut div);
    let u = f.iter().zip(&div).map(|(fv, d)| fv - weight * d).collect();
    (u, iterations, converged)
}

/// Negative adjoint of the forward-difference gradient.
fn divergence(px: &[f64], py: &[f64], rows: usize, cols: usize, out: &mut [f64]) {
    for i in 0..rows {
        for j in 0..cols {
            let k = i * cols + j;
            let dx = match (j, cols) {
                (_, 1) => 0.0,
                (0, _) => px[k],
                (j, c) if j + 1 == c => -px[k - 1],
                _ => px[k] - px[k - 1],
            };
            let dy = match (i, rows) {
                (_, 1) => 0.0,
                (0, _) => py[k],
                (i, r) if i + 1 == r => -py[k - cols],
                _ => py[k] - py[k - cols],
            };
            out[k] = dx + dy;
        }
    }
}

#[derive(Debug, Clone)]
pub struct TvDenoiser {
    pub shape: GridShape,
    pub weight: f64,
    pub cfg: TvConfig,
    pub domain: Domain,
}

impl Denoiser for TvDenoiser {
    fn name(&self) -> &str {
        "tv"
    }
    fn domain(&self) -> Domain {
        self.domain
    }
    fn params(&self) -> Vec<(String, f64)> {
        vec![
            ("weight".into(), self.weight),
            ("max_iters".into(), self.cfg.max_iters as f64),
            ("tol".into(), self.cfg.tol),
        ]
    }
    fn denoise(&self, v: &[f64]) -> Result<Vec<f64>> {
        tv_denoise(v, self.shape, self.weight, &self.cfg).map(|o| o.values)
    }
}
