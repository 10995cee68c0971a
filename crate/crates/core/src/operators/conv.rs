//! Shift-invariant blur with symmetric (half-sample) reflection at the image
//! border, and integer-factor decimation.

use super::LinearOp;
use crate::error::{ensure_len, Error, Result};

/// Odd-sized 2D convolution stencil, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2d {
    rows: usize,
    cols: usize,
    taps: Vec<f64>,
}

impl Kernel2d {
    pub fn new(rows: usize, cols: usize, taps: Vec<f64>) -> Result<Self> {
        if rows.is_multiple_of(2) || cols.is_multiple_of(2) {
            return Err(Error::config(format!(
                "blur kernel must be odd-sized, got {rows}x{cols}"
            )));
        }
        ensure_len("blur kernel taps", taps.len(), rows * cols)?;
        Ok(Self { rows, cols, taps })
    }

    /// Isotropic Gaussian truncated at `radius`, normalized to unit sum.
    pub fn gaussian(sigma: f64, radius: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::config("Gaussian kernel sigma must be positive"));
        }
        let size = 2 * radius + 1;
        let mut taps = Vec::with_capacity(size * size);
        for i in 0..size {
            for j in 0..size {
                let di = i as f64 - radius as f64;
                let dj = j as f64 - radius as f64;
                taps.push((-(di * di + dj * dj) / (2.0 * sigma * sigma)).exp());
            }
        }
        let total: f64 = taps.iter().sum();
        taps.iter_mut().for_each(|t| *t /= total);
        Self::new(size, size, taps)
    }

    /// Uniform `size × size` box, unit sum.
    pub fn boxcar(size: usize) -> Result<Self> {
        let n = size * size;
        Self::new(size, size, vec![1.0 / n as f64; n])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn taps(&self) -> &[f64] {
        &self.taps
    }
}

/// Half-sample symmetric reflection: `… b a | a b c … | c b …`.
pub(crate) fn reflect(idx: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = idx.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

#[derive(Debug, Clone)]
pub struct BlurOp {
    kernel: Kernel2d,
    side: usize,
    label: String,
}

pub fn make_blur_op(kernel: Kernel2d, image_side: usize) -> Result<BlurOp> {
    if image_side == 0 {
        return Err(Error::config("blur image side must be positive"));
    }
    let label = format!("blur({}x{})", kernel.rows, kernel.cols);
    Ok(BlurOp {
        kernel,
        side: image_side,
        label,
    })
}

impl BlurOp {
    pub fn side(&self) -> usize {
        self.side
    }
    pub fn kernel(&self) -> &Kernel2d {
        &self.kernel
    }
}

impl LinearOp for BlurOp {
    fn input_len(&self) -> usize {
        self.side * self.side
    }
    fn output_len(&self) -> usize {
        self.side * self.side
    }
    fn label(&self) -> &str {
        &self.label
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.side;
        let (kr, kc) = (self.kernel.rows as isize / 2, self.kernel.cols as isize / 2);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for a in 0..self.kernel.rows {
                    let si = reflect(i as isize - (a as isize - kr), n);
                    for b in 0..self.kernel.cols {
                        let sj = reflect(j as isize - (b as isize - kc), n);
                        acc += self.kernel.taps[a * self.kernel.cols + b] * x[si * n + sj];
                    }
                }
                out[i * n + j] = acc;
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.side;
        let (kr, kc) = (self.kernel.rows as isize / 2, self.kernel.cols as isize / 2);
        out.fill(0.0);
        for i in 0..n {
            for j in 0..n {
                let v = y[i * n + j];
                for a in 0..self.kernel.rows {
                    let si = reflect(i as isize - (a as isize - kr), n);
                    for b in 0..self.kernel.cols {
                        let sj = reflect(j as isize - (b as isize - kc), n);
                        out[si * n + sj] += self.kernel.taps[a * self.kernel.cols + b] * v;
                    }
                }
            }
        }
    }
}

/// Keeps every `factor`-th pixel along both axes.
#[derive(Debug, Clone)]
pub struct SubsampleOp {
    factor: usize,
    side: usize,
    label: String,
}

pub fn make_subsample_op(factor: usize, image_side: usize) -> Result<SubsampleOp> {
    if factor == 0 || image_side == 0 || !image_side.is_multiple_of(factor) {
        return Err(Error::config(format!(
            "subsample factor {factor} must be positive and divide image side {image_side}"
        )));
    }
    Ok(SubsampleOp {
        factor,
        side: image_side,
        label: format!("subsample(x{factor})"),
    })
}

impl SubsampleOp {
    pub fn low_side(&self) -> usize {
        self.side / self.factor
    }
    pub fn factor(&self) -> usize {
        self.factor
    }
}

impl LinearOp for SubsampleOp {
    fn input_len(&self) -> usize {
        self.side * self.side
    }
    fn output_len(&self) -> usize {
        self.low_side() * self.low_side()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.low_side();
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = x[(i * self.factor) * self.side + j * self.factor];
            }
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let m = self.low_side();
        out.fill(0.0);
        for i in 0..m {
            for j in 0..m {
                out[(i * self.factor) * self.side + j * self.factor] = y[i * m + j];
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::check_adjoint;

    #[test]
    fn reflect_indices() {
        let got: Vec<usize> = (-3..7).map(|i| reflect(i, 4)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 3, 2, 1]);
        assert_eq!(reflect(0, 1), 0);
        assert_eq!(reflect(-5, 1), 0);
    }

    #[test]
    fn unit_kernel_is_identity() {
        let op = make_blur_op(Kernel2d::new(1, 1, vec![1.0]).unwrap(), 6).unwrap();
        let x: Vec<f64> = (0..36).map(|v| v as f64 * 0.5 - 3.0).collect();
        assert_eq!(op.apply(&x).unwrap(), x);
        assert_eq!(op.adjoint(&x).unwrap(), x);
    }

    #[test]
    fn unit_sum_blur_preserves_constants() {
        let op = make_blur_op(Kernel2d::gaussian(1.3, 3).unwrap(), 9).unwrap();
        let out = op.apply(&vec![2.5; 81]).unwrap();
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn blur_adjoint_consistent_with_asymmetric_kernel() {
        let k = Kernel2d::new(3, 5, (0..15).map(|v| (v as f64).sin()).collect()).unwrap();
        let op = make_blur_op(k, 7).unwrap();
        assert!(check_adjoint(&op, 30, 2).unwrap() < 1e-12);
    }

    #[test]
    fn even_kernel_rejected() {
        assert!(matches!(
            Kernel2d::new(2, 3, vec![0.0; 6]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn subsample_factor_one_is_identity() {
        let op = make_subsample_op(1, 5).unwrap();
        let x: Vec<f64> = (0..25).map(f64::from).collect();
        assert_eq!(op.apply(&x).unwrap(), x);
    }

    #[test]
    fn subsample_keeps_grid_points() {
        let op = make_subsample_op(2, 4).unwrap();
        let x: Vec<f64> = (0..16).map(f64::from).collect();
        assert_eq!(op.apply(&x).unwrap(), vec![0.0, 2.0, 8.0, 10.0]);
        let up = op.adjoint(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(up[0], 1.0);
        assert_eq!(up[2], 2.0);
        assert_eq!(up[8], 3.0);
        assert_eq!(up[10], 4.0);
        assert_eq!(up.iter().filter(|v| **v != 0.0).count(), 4);
        assert!(check_adjoint(&op, 10, 0).unwrap() < 1e-14);
    }

    #[test]
    fn non_dividing_factor_rejected() {
        assert!(matches!(make_subsample_op(3, 8), Err(Error::Config(_))));
        assert!(matches!(make_subsample_op(0, 8), Err(Error::Config(_))));
    }
}
