//! Centered, unitary 2D DFT acting on two-channel (real, imaginary) grids,
//! plus line-selection operators for Cartesian undersampling.
//!
//! Layout of a two-channel grid of side `n`: the real plane (row-major
//! `n × n`) followed by the imaginary plane. The image origin sits at pixel
//! `(⌊n/2⌋, ⌊n/2⌋)` and the DC coefficient at k-space index `(⌊n/2⌋, ⌊n/2⌋)`.
//! Sampling masks select k-space columns ("lines"); compact line vectors are
//! ordered channel, then row, then selected column.

use std::ops::Range;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::LinearOp;
use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KSpaceMask {
    rows: usize,
    cols: usize,
    sampled_lines: Vec<usize>,
    acs_band: Range<usize>,
}

impl KSpaceMask {
    pub fn new(
        rows: usize,
        cols: usize,
        mut sampled_lines: Vec<usize>,
        acs_band: Range<usize>,
    ) -> Result<Self> {
        sampled_lines.sort_unstable();
        sampled_lines.dedup();
        if sampled_lines.is_empty() {
            return Err(Error::config("mask samples no lines"));
        }
        if sampled_lines.iter().any(|&c| c >= cols) {
            return Err(Error::config(format!("mask line index outside 0..{cols}")));
        }
        if acs_band.end > cols || acs_band.start > acs_band.end {
            return Err(Error::config("ACS band outside the k-space grid"));
        }
        if acs_band
            .clone()
            .any(|c| sampled_lines.binary_search(&c).is_err())
        {
            return Err(Error::config("ACS band must be fully sampled"));
        }
        Ok(Self {
            rows,
            cols,
            sampled_lines,
            acs_band,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn sampled_lines(&self) -> &[usize] {
        &self.sampled_lines
    }
    pub fn acs_band(&self) -> Range<usize> {
        self.acs_band.clone()
    }

    pub fn is_sampled(&self, col: usize) -> bool {
        self.sampled_lines.binary_search(&col).is_ok()
    }

    pub fn missing_lines(&self) -> Vec<usize> {
        (0..self.cols).filter(|&c| !self.is_sampled(c)).collect()
    }

    /// `cols / |sampled|`.
    pub fn net_acceleration(&self) -> f64 {
        self.cols as f64 / self.sampled_lines.len() as f64
    }
}

/// Planned forward/inverse transforms for one grid size.
pub struct Fourier2d {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fourier2d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier2d").field("n", &self.n).finish()
    }
}

impl Fourier2d {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
        }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn grid_len(&self) -> usize {
        2 * self.n * self.n
    }

    /// Unitary centered forward transform.
    pub fn forward(&self, image: &[f64], out: &mut [f64]) {
        self.transform(image, out, true);
    }

    /// Unitary centered inverse transform (equal to the adjoint).
    pub fn inverse(&self, kspace: &[f64], out: &mut [f64]) {
        self.transform(kspace, out, false);
    }

    fn transform(&self, src: &[f64], dst: &mut [f64], forward: bool) {
        let n = self.n;
        let nn = n * n;
        let half = n / 2;
        let mut buf = vec![Complex::new(0.0, 0.0); nn];
        for i in 0..n {
            for j in 0..n {
                let si = centered(i, half, n);
                let sj = centered(j, half, n);
                buf[i * n + j] = Complex::new(src[si * n + sj], src[nn + si * n + sj]);
            }
        }
        let plan = if forward { &self.fwd } else { &self.inv };
        // Rows, then columns through a transpose.
        plan.process(&mut buf);
        let mut t = transpose(&buf, n);
        plan.process(&mut t);
        let buf = transpose(&t, n);
        let scale = 1.0 / n as f64;
        for i in 0..n {
            for j in 0..n {
                let di = centered(i, half, n);
                let dj = centered(j, half, n);
                let v = buf[i * n + j] * scale;
                dst[di * n + dj] = v.re;
                dst[nn + di * n + dj] = v.im;
            }
        }
    }
}

// Position of uncentered index `k` in a centered layout. Both the input
// un-centering and the output centering use this map.
fn centered(k: usize, half: usize, n: usize) -> usize {
    (k + half) % n
}

fn transpose(buf: &[Complex<f64>], n: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            out[j * n + i] = buf[i * n + j];
        }
    }
    out
}

/// Extracts the entries of `lines` from a full two-channel grid, in
/// (channel, row, line) order.
pub fn gather_lines(full: &[f64], n: usize, lines: &[usize]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * n * lines.len());
    for ch in 0..2 {
        for r in 0..n {
            let row = &full[ch * n * n + r * n..ch * n * n + (r + 1) * n];
            out.extend(lines.iter().map(|&c| row[c]));
        }
    }
    out
}

/// Inverse of [`gather_lines`]: writes compact entries into a zeroed full
/// grid.
pub fn scatter_lines(compact: &[f64], n: usize, lines: &[usize]) -> Vec<f64> {
    let mut full = vec![0.0; 2 * n * n];
    scatter_lines_into(compact, n, lines, &mut full);
    full
}

fn scatter_lines_into(compact: &[f64], n: usize, lines: &[usize], full: &mut [f64]) {
    full.fill(0.0);
    let m = lines.len();
    for ch in 0..2 {
        for r in 0..n {
            let src = &compact[(ch * n + r) * m..(ch * n + r + 1) * m];
            for (&c, &v) in lines.iter().zip(src) {
                full[ch * n * n + r * n + c] = v;
            }
        }
    }
}

/// Fourier operator restricted to a set of k-space columns.
pub struct FourierOp {
    fft: Arc<Fourier2d>,
    lines: Option<Vec<usize>>,
    label: String,
}

impl FourierOp {
    /// Full unitary transform.
    pub fn full(fft: Arc<Fourier2d>) -> Self {
        Self {
            fft,
            lines: None,
            label: "fourier".into(),
        }
    }

    /// Image → sampled lines of `mask`.
    pub fn observed(fft: Arc<Fourier2d>, mask: &KSpaceMask) -> Result<Self> {
        Self::check_mask(&fft, mask)?;
        Ok(Self {
            fft,
            lines: Some(mask.sampled_lines().to_vec()),
            label: "fourier-observed".into(),
        })
    }

    /// Image → lines of the complement of `mask`.
    pub fn unobserved(fft: Arc<Fourier2d>, mask: &KSpaceMask) -> Result<Self> {
        Self::check_mask(&fft, mask)?;
        Ok(Self {
            fft,
            lines: Some(mask.missing_lines()),
            label: "fourier-unobserved".into(),
        })
    }

    fn check_mask(fft: &Fourier2d, mask: &KSpaceMask) -> Result<()> {
        if mask.rows() != fft.side() || mask.cols() != fft.side() {
            return Err(Error::shape(format!(
                "mask {}x{} does not match a {}-point transform",
                mask.rows(),
                mask.cols(),
                fft.side()
            )));
        }
        Ok(())
    }

    pub fn lines(&self) -> Option<&[usize]> {
        self.lines.as_deref()
    }
}

impl LinearOp for FourierOp {
    fn input_len(&self) -> usize {
        self.fft.grid_len()
    }
    fn output_len(&self) -> usize {
        match &self.lines {
            None => self.fft.grid_len(),
            Some(l) => 2 * self.fft.side() * l.len(),
        }
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.lines {
            None => self.fft.forward(x, out),
            Some(lines) => {
                let mut full = vec![0.0; self.fft.grid_len()];
                self.fft.forward(x, &mut full);
                out.copy_from_slice(&gather_lines(&full, self.fft.side(), lines));
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        match &self.lines {
            None => self.fft.inverse(y, out),
            Some(lines) => {
                let mut full = vec![0.0; self.fft.grid_len()];
                scatter_lines_into(y, self.fft.side(), lines, &mut full);
                self.fft.inverse(&full, out);
            }
        }
    }
}

fn square_side(len: usize, rows: usize, cols: usize) -> Result<usize> {
    if rows != cols {
        return Err(Error::shape(format!(
            "2D Fourier transform needs a square grid, got {rows}x{cols}"
        )));
    }
    ensure_len("two-channel grid", len, 2 * rows * cols)?;
    Ok(rows)
}

/// Forward transform of a `rows × cols` two-channel image. With a mask, the
/// unsampled columns of the result are zeroed.
pub fn dft2_apply(
    image: &[f64],
    rows: usize,
    cols: usize,
    mask: Option<&KSpaceMask>,
) -> Result<Vec<f64>> {
    let n = square_side(image.len(), rows, cols)?;
    let fft = Fourier2d::new(n);
    let mut out = vec![0.0; 2 * n * n];
    fft.forward(image, &mut out);
    if let Some(mask) = mask {
        if mask.cols() != n || mask.rows() != n {
            return Err(Error::shape("mask does not match the image grid"));
        }
        for c in mask.missing_lines() {
            for r in 0..2 * n {
                out[r * n + c] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Adjoint (= inverse) of the unmasked [`dft2_apply`].
pub fn dft2_adjoint(kspace: &[f64], rows: usize, cols: usize) -> Result<Vec<f64>> {
    let n = square_side(kspace.len(), rows, cols)?;
    let fft = Fourier2d::new(n);
    let mut out = vec![0.0; 2 * n * n];
    fft.inverse(kspace, &mut out);
    Ok(out)
}
