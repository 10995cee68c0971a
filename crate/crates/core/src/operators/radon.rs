//! Parallel-beam projector (ray-driven, linear interpolation across the
//! image rows or columns crossed by each ray) and Ram-Lak filtered
//! backprojection.
//!
//! Coordinates: pixel `(row i, col j)` has its center at
//! `x = (j − c)·h`, `y = (i − c)·h` with `c = (side − 1)/2` and `h` the pixel
//! size. Projection angle θ measures rays `x cosθ + y sinθ = t` where `t` is
//! the signed detector offset. Sinograms are stored angle-major.

use std::f64::consts::PI;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::LinearOp;
use crate::error::{ensure_finite, ensure_len, Error, Result};

/// Smallest odd detector count covering the image diagonal at unit spacing.
pub fn default_detector_count(image_side: usize) -> usize {
    let n = (image_side as f64 * std::f64::consts::SQRT_2).ceil() as usize;
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtGeometry {
    image_side: usize,
    pixel_size: f64,
    angles: Vec<f64>,
    num_detectors: usize,
    detector_spacing: f64,
}

impl CtGeometry {
    pub fn new(
        image_side: usize,
        pixel_size: f64,
        angles: Vec<f64>,
        num_detectors: usize,
        detector_spacing: f64,
    ) -> Result<Self> {
        if image_side == 0 {
            return Err(Error::config("image side must be positive"));
        }
        if !(pixel_size > 0.0) || !(detector_spacing > 0.0) {
            return Err(Error::config(
                "pixel size and detector spacing must be positive",
            ));
        }
        if angles.is_empty() {
            return Err(Error::config("geometry needs at least one angle"));
        }
        if angles.iter().any(|a| !(0.0..PI).contains(a)) {
            return Err(Error::config("angles must lie in [0, pi)"));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("angles must be strictly increasing"));
        }
        if num_detectors < image_side {
            return Err(Error::config(format!(
                "{num_detectors} detectors cannot cover a {image_side}-pixel field of view"
            )));
        }
        Ok(Self {
            image_side,
            pixel_size,
            angles,
            num_detectors,
            detector_spacing,
        })
    }

    /// Unit field of view, `num_angles` uniform angles over `[0, π)`,
    /// detector spacing equal to the pixel size.
    pub fn parallel(image_side: usize, num_angles: usize) -> Result<Self> {
        let h = 1.0 / image_side.max(1) as f64;
        Self::new(
            image_side,
            h,
            uniform_angles(num_angles),
            default_detector_count(image_side),
            h,
        )
    }

    /// Same detector and image layout with a different angle list.
    pub fn with_angles(&self, angles: Vec<f64>) -> Result<Self> {
        Self::new(
            self.image_side,
            self.pixel_size,
            angles,
            self.num_detectors,
            self.detector_spacing,
        )
    }

    pub fn image_side(&self) -> usize {
        self.image_side
    }
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }
    pub fn angles(&self) -> &[f64] {
        &self.angles
    }
    pub fn num_angles(&self) -> usize {
        self.angles.len()
    }
    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }
    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }
    pub fn image_len(&self) -> usize {
        self.image_side * self.image_side
    }
    pub fn sinogram_len(&self) -> usize {
        self.angles.len() * self.num_detectors
    }

    pub fn detector_offset(&self, k: usize) -> f64 {
        (k as f64 - (self.num_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }
}

pub(crate) fn uniform_angles(num_angles: usize) -> Vec<f64> {
    (0..num_angles)
        .map(|k| k as f64 * PI / num_angles as f64)
        .collect()
}

/// Visits the interpolation weights of one ray: `f(pixel_index, weight)`.
#[inline]
fn for_each_ray_weight(
    side: usize,
    h: f64,
    cos: f64,
    sin: f64,
    t: f64,
    mut f: impl FnMut(usize, f64),
) {
    let c = (side as f64 - 1.0) / 2.0;
    if cos.abs() >= sin.abs() {
        // Steep ray: one sample per image row, interpolate across columns.
        let step = h / cos.abs();
        for i in 0..side {
            let y = (i as f64 - c) * h;
            let u = (t - y * sin) / (cos * h) + c;
            interp_into(u, side, |j, w| f(i * side + j, w * step));
        }
    } else {
        let step = h / sin.abs();
        for j in 0..side {
            let x = (j as f64 - c) * h;
            let u = (t - x * cos) / (sin * h) + c;
            interp_into(u, side, |i, w| f(i * side + j, w * step));
        }
    }
}

#[inline]
fn interp_into(u: f64, n: usize, mut f: impl FnMut(usize, f64)) {
    if !(u > -1.0 && u < n as f64) {
        return;
    }
    let base = u.floor();
    let frac = u - base;
    let k0 = base as isize;
    if k0 >= 0 && (k0 as usize) < n && frac < 1.0 {
        f(k0 as usize, 1.0 - frac);
    }
    let k1 = k0 + 1;
    if k1 >= 0 && (k1 as usize) < n && frac > 0.0 {
        f(k1 as usize, frac);
    }
}

// Partial images accumulated by the adjoint are summed in this fixed order,
// independent of the thread count.
const ADJOINT_CHUNKS: usize = 16;

fn project(geom: &CtGeometry, image: &[f64], sino: &mut [f64]) {
    let side = geom.image_side;
    let h = geom.pixel_size;
    sino.par_chunks_mut(geom.num_detectors)
        .zip(geom.angles.par_iter())
        .for_each(|(row, &theta)| {
            let (sin, cos) = theta.sin_cos();
            for (k, out) in row.iter_mut().enumerate() {
                let t = geom.detector_offset(k);
                let mut acc = 0.0;
                for_each_ray_weight(side, h, cos, sin, t, |p, w| acc += w * image[p]);
                *out = acc;
            }
        });
}

fn backproject_exact(geom: &CtGeometry, sino: &[f64], image: &mut [f64]) {
    let side = geom.image_side;
    let h = geom.pixel_size;
    let nd = geom.num_detectors;
    let na = geom.num_angles();
    let chunk = na.div_ceil(ADJOINT_CHUNKS).max(1);
    let partials: Vec<Vec<f64>> = (0..na)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut part = vec![0.0; side * side];
            for a in start..(start + chunk).min(na) {
                let (sin, cos) = geom.angles[a].sin_cos();
                for k in 0..nd {
                    let v = sino[a * nd + k];
                    if v == 0.0 {
                        continue;
                    }
                    let t = geom.detector_offset(k);
                    for_each_ray_weight(side, h, cos, sin, t, |p, w| part[p] += w * v);
                }
            }
            part
        })
        .collect();
    image.fill(0.0);
    for part in &partials {
        for (o, p) in image.iter_mut().zip(part) {
            *o += p;
        }
    }
}

/// Discrete line integrals of `image` along every (angle, detector) ray.
pub fn radon_apply(image: &[f64], geom: &CtGeometry) -> Result<Vec<f64>> {
    ensure_len("radon input image", image.len(), geom.image_len())?;
    ensure_finite("radon input image", image)?;
    let mut sino = vec![0.0; geom.sinogram_len()];
    project(geom, image, &mut sino);
    Ok(sino)
}

/// Exact transpose of [`radon_apply`] (unfiltered backprojection).
pub fn radon_adjoint(sino: &[f64], geom: &CtGeometry) -> Result<Vec<f64>> {
    ensure_len("radon adjoint input", sino.len(), geom.sinogram_len())?;
    let mut image = vec![0.0; geom.image_len()];
    backproject_exact(geom, sino, &mut image);
    Ok(image)
}

#[derive(Debug, Clone)]
pub struct RadonOp {
    geom: Arc<CtGeometry>,
    label: String,
}

impl RadonOp {
    pub fn new(geom: CtGeometry) -> Self {
        Self::with_label(geom, "radon")
    }

    pub fn with_label(geom: CtGeometry, label: &str) -> Self {
        Self {
            geom: Arc::new(geom),
            label: label.to_string(),
        }
    }

    pub fn geometry(&self) -> &CtGeometry {
        &self.geom
    }
}

impl LinearOp for RadonOp {
    fn input_len(&self) -> usize {
        self.geom.image_len()
    }
    fn output_len(&self) -> usize {
        self.geom.sinogram_len()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        project(&self.geom, x, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        backproject_exact(&self.geom, y, out);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    RamLak,
}

impl FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ram-lak" | "ramlak" | "ram_lak" => Ok(FilterKind::RamLak),
            other => Err(Error::config(format!("unsupported FBP filter `{other}`"))),
        }
    }
}

/// Filtered backprojection: each projection is convolved with the
/// band-limited ramp kernel in the frequency domain, then backprojected with
/// linear interpolation along the detector and scaled by `π / num_angles`.
pub fn fbp(sino: &[f64], geom: &CtGeometry, filter: FilterKind) -> Result<Vec<f64>> {
    ensure_len("fbp sinogram", sino.len(), geom.sinogram_len())?;
    ensure_finite("fbp sinogram", sino)?;
    let filtered = ramp_filter(sino, geom, filter);

    let side = geom.image_side;
    let nd = geom.num_detectors;
    let h = geom.pixel_size;
    let tau = geom.detector_spacing;
    let c = (side as f64 - 1.0) / 2.0;
    let center_det = (nd as f64 - 1.0) / 2.0;
    let trig: Vec<(f64, f64)> = geom.angles.iter().map(|a| a.sin_cos()).collect();
    let scale = PI / geom.num_angles() as f64;

    let mut image = vec![0.0; side * side];
    image.par_chunks_mut(side).enumerate().for_each(|(i, row)| {
        let y = (i as f64 - c) * h;
        for (j, out) in row.iter_mut().enumerate() {
            let x = (j as f64 - c) * h;
            let mut acc = 0.0;
            for (a, &(sin, cos)) in trig.iter().enumerate() {
                let u = (x * cos + y * sin) / tau + center_det;
                let proj = &filtered[a * nd..(a + 1) * nd];
                interp_into(u, nd, |k, w| acc += w * proj[k]);
            }
            *out = acc * scale;
        }
    });
    Ok(image)
}

fn ramp_filter(sino: &[f64], geom: &CtGeometry, filter: FilterKind) -> Vec<f64> {
    let FilterKind::RamLak = filter;
    let nd = geom.num_detectors;
    let tau = geom.detector_spacing;
    let len = (2 * nd).next_power_of_two();

    // Spatial Ram-Lak kernel sampled at detector spacing.
    let mut kernel = vec![Complex::new(0.0, 0.0); len];
    kernel[0].re = 1.0 / (4.0 * tau * tau);
    for k in (1..nd).step_by(2) {
        let v = -1.0 / (PI * PI * (k * k) as f64 * tau * tau);
        kernel[k].re = v;
        kernel[len - k].re = v;
    }
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    fwd.process(&mut kernel);

    let mut out = vec![0.0; sino.len()];
    out.par_chunks_mut(nd)
        .zip(sino.par_chunks(nd))
        .for_each(|(dst, src)| {
            let mut buf: Vec<Complex<f64>> = src
                .iter()
                .map(|&v| Complex::new(v, 0.0))
                .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
                .take(len)
                .collect();
            fwd.process(&mut buf);
            for (b, k) in buf.iter_mut().zip(&kernel) {
                *b *= k;
            }
            inv.process(&mut buf);
            let norm = tau / len as f64;
            for (d, b) in dst.iter_mut().zip(&buf) {
                *d = b.re * norm;
            }
        });
    out
}
