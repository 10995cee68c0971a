//! Matrix-free linear operators with matched adjoints.
//!
//! Every operator acts on flat `f64` vectors. Complex-valued quantities
//! (k-space, MR images) are carried as two stacked real planes, so all maps
//! here are real-linear and their adjoints are ordinary transposes.

mod block;
mod cg;
mod conv;
mod fourier;
mod radon;

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure_len, Error, Result};
use crate::linalg::{dot, norm};

pub use block::{make_incomplete_op, BlockIncompleteOp};
pub use cg::{
    cg_least_squares, cg_least_squares_observed, quadratic_objective, CgConfig, CgReport,
};
pub(crate) use conv::reflect as reflect_index;
pub use conv::{make_blur_op, make_subsample_op, BlurOp, Kernel2d, SubsampleOp};
pub use fourier::{
    dft2_adjoint, dft2_apply, gather_lines, scatter_lines, Fourier2d, FourierOp, KSpaceMask,
};
pub(crate) use radon::uniform_angles;
pub use radon::{
    default_detector_count, fbp, radon_adjoint, radon_apply, CtGeometry, FilterKind, RadonOp,
};

/// A real linear map between flat vectors, together with its exact adjoint.
pub trait LinearOp: Send + Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn label(&self) -> &str;

    /// Writes `A x` into `out`. Lengths are the caller's responsibility.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// Writes `Aᵀ y` into `out`. Lengths are the caller's responsibility.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.label(), x.len(), self.input_len())?;
        let mut out = vec![0.0; self.output_len()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        ensure_len(self.label(), y.len(), self.output_len())?;
        let mut out = vec![0.0; self.input_len()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }
}

pub type SharedOp = Arc<dyn LinearOp>;

#[derive(Debug, Clone)]
pub struct IdentityOp {
    len: usize,
    label: String,
}

impl IdentityOp {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            label: format!("identity({len})"),
        }
    }
}

impl LinearOp for IdentityOp {
    fn input_len(&self) -> usize {
        self.len
    }
    fn output_len(&self) -> usize {
        self.len
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// Dense row-major matrix. Mostly useful for small problems and tests.
#[derive(Debug, Clone)]
pub struct DenseOp {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    label: String,
}

impl DenseOp {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        ensure_len("dense matrix entries", data.len(), rows * cols)?;
        Ok(Self {
            rows,
            cols,
            data,
            label: format!("dense({rows}x{cols})"),
        })
    }

    pub fn entry(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

impl LinearOp for DenseOp {
    fn input_len(&self) -> usize {
        self.cols
    }
    fn output_len(&self) -> usize {
        self.rows
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = dot(&self.data[r * self.cols..(r + 1) * self.cols], x);
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, &yr) in y.iter().enumerate() {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
    }
}

/// `outer ∘ inner`.
pub struct ComposedOp {
    outer: SharedOp,
    inner: SharedOp,
    label: String,
}

impl ComposedOp {
    pub fn new(outer: SharedOp, inner: SharedOp) -> Result<Self> {
        if outer.input_len() != inner.output_len() {
            return Err(Error::shape(format!(
                "cannot compose {} (input {}) after {} (output {})",
                outer.label(),
                outer.input_len(),
                inner.label(),
                inner.output_len()
            )));
        }
        let label = format!("{}*{}", outer.label(), inner.label());
        Ok(Self {
            outer,
            inner,
            label,
        })
    }
}

impl LinearOp for ComposedOp {
    fn input_len(&self) -> usize {
        self.inner.input_len()
    }
    fn output_len(&self) -> usize {
        self.outer.output_len()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; self.inner.output_len()];
        self.inner.apply_into(x, &mut mid);
        self.outer.apply_into(&mid, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let mut mid = vec![0.0; self.outer.input_len()];
        self.outer.adjoint_into(y, &mut mid);
        self.inner.adjoint_into(&mid, out);
    }
}

/// Wraps an operator and multiplies its adjoint by a constant. With any
/// factor other than 1 the result is a broken operator; `check` uses it as
/// a negative control.
pub struct MiscaledAdjoint {
    inner: SharedOp,
    factor: f64,
    label: String,
}

impl MiscaledAdjoint {
    pub fn new(inner: SharedOp, factor: f64) -> Self {
        let label = format!("{}[adjoint x{factor}]", inner.label());
        Self {
            inner,
            factor,
            label,
        }
    }
}

impl LinearOp for MiscaledAdjoint {
    fn input_len(&self) -> usize {
        self.inner.input_len()
    }
    fn output_len(&self) -> usize {
        self.inner.output_len()
    }
    fn label(&self) -> &str {
        &self.label
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.apply_into(x, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inner.adjoint_into(y, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

const ADJOINT_EPS: f64 = 1e-300;

/// Largest relative inner-product discrepancy `|⟨Au,v⟩ − ⟨u,Aᵀv⟩| / (‖Au‖‖v‖ + ε)`
/// over `trials` standard-normal pairs drawn from a generator seeded by `seed`.
pub fn check_adjoint(op: &dyn LinearOp, trials: usize, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(Error::config("check_adjoint needs at least one trial"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let u: Vec<f64> = (0..op.input_len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let v: Vec<f64> = (0..op.output_len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let au = op.apply(&u)?;
        let atv = op.adjoint(&v)?;
        let lhs = dot(&au, &v);
        let rhs = dot(&u, &atv);
        let rel = (lhs - rhs).abs() / (norm(&au) * norm(&v) + ADJOINT_EPS);
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_adjoint_is_exact() {
        let op = IdentityOp::new(17);
        assert_eq!(check_adjoint(&op, 20, 3).unwrap(), 0.0);
    }

    #[test]
    fn scaled_adjoint_is_flagged() {
        let dense = DenseOp::new(2, 2, vec![1.0, 2.0, -0.5, 3.0]).unwrap();
        let bad = MiscaledAdjoint::new(Arc::new(dense), 2.0);
        assert!(check_adjoint(&bad, 50, 11).unwrap() > 0.3);
    }

    #[test]
    fn dense_adjoint_matches_transpose() {
        let op = DenseOp::new(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(op.apply(&[1.0, -1.0]).unwrap(), vec![-1.0, -1.0, -1.0]);
        assert_eq!(op.adjoint(&[1.0, 0.0, 1.0]).unwrap(), vec![6.0, 8.0]);
        assert!(check_adjoint(&op, 50, 1).unwrap() < 1e-12);
    }

    #[test]
    fn composition_checks_lengths() {
        let a: SharedOp = Arc::new(IdentityOp::new(3));
        let b: SharedOp = Arc::new(IdentityOp::new(4));
        assert!(matches!(ComposedOp::new(a, b), Err(Error::Shape(_))));
    }

    #[test]
    fn apply_rejects_wrong_length() {
        let op = IdentityOp::new(3);
        assert!(matches!(op.apply(&[1.0]), Err(Error::Shape(_))));
        assert!(matches!(op.adjoint(&[1.0; 4]), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_trials_rejected() {
        assert!(check_adjoint(&IdentityOp::new(1), 0, 0).is_err());
    }
}
