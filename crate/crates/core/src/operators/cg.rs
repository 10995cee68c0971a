//! Conjugate gradients on the regularized, weighted normal equations
//!
//! ```text
//! (Aᵀ W A + λ I) v = Aᵀ W y + λ·anchor
//! ```
//!
//! i.e. the minimizer of `‖y − A v‖²_W + λ ‖v − anchor‖²`, warm-started at
//! the anchor.

use super::LinearOp;
use crate::error::{ensure_finite, ensure_len, Error, Result};
use crate::linalg::{axpy, dot, norm};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            max_iters: 20,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// `‖y − A v‖²_W + λ ‖v − anchor‖²`.
pub fn quadratic_objective(
    op: &dyn LinearOp,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    anchor: &[f64],
    v: &[f64],
) -> Result<f64> {
    let av = op.apply(v)?;
    let fit: f64 = av
        .iter()
        .zip(y)
        .zip(weights)
        .map(|((a, y), w)| w * (y - a) * (y - a))
        .sum();
    let prox: f64 = v.iter().zip(anchor).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(fit + lambda * prox)
}

pub fn cg_least_squares(
    op: &dyn LinearOp,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    anchor: &[f64],
    cfg: &CgConfig,
) -> Result<Vec<f64>> {
    cg_least_squares_observed(op, y, weights, lambda, anchor, cfg, |_, _| {}).map(|(v, _)| v)
}

/// As [`cg_least_squares`], calling `observer(k, v_k)` on the starting point
/// (`k = 0`) and after every iteration.
pub fn cg_least_squares_observed(
    op: &dyn LinearOp,
    y: &[f64],
    weights: &[f64],
    lambda: f64,
    anchor: &[f64],
    cfg: &CgConfig,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(Vec<f64>, CgReport)> {
    let n = op.input_len();
    if n == 0 || op.output_len() == 0 {
        return Err(Error::shape(format!(
            "least squares on zero-dimensional operator {}",
            op.label()
        )));
    }
    ensure_len("least-squares data", y.len(), op.output_len())?;
    ensure_len("least-squares weights", weights.len(), op.output_len())?;
    ensure_len("least-squares anchor", anchor.len(), n)?;
    ensure_finite("least-squares data", y)?;
    ensure_finite("least-squares weights", weights)?;
    ensure_finite("least-squares anchor", anchor)?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::numeric(format!("invalid proximal weight {lambda}")));
    }
    if weights.iter().any(|&w| w < 0.0) {
        return Err(Error::numeric("negative data weight"));
    }

    let mut scratch = vec![0.0; op.output_len()];
    let normal = |v: &[f64], out: &mut [f64], scratch: &mut [f64]| {
        op.apply_into(v, scratch);
        for (s, w) in scratch.iter_mut().zip(weights) {
            *s *= w;
        }
        op.adjoint_into(scratch, out);
        axpy(lambda, v, out);
    };

    // b = AᵀW y + λ anchor
    let wy: Vec<f64> = y.iter().zip(weights).map(|(a, b)| a * b).collect();
    let mut rhs = vec![0.0; n];
    op.adjoint_into(&wy, &mut rhs);
    axpy(lambda, anchor, &mut rhs);
    let rhs_norm = norm(&rhs);

    let mut x = anchor.to_vec();
    let mut ax = vec![0.0; n];
    normal(&x, &mut ax, &mut scratch);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut ap = vec![0.0; n];
    observer(0, &x);

    let rel = |rr: f64| {
        if rhs_norm > 0.0 {
            rr.sqrt() / rhs_norm
        } else {
            rr.sqrt()
        }
    };

    let mut iterations = 0;
    while iterations < cfg.max_iters && rel(rr) >= cfg.rel_tol {
        normal(&p, &mut ap, &mut scratch);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            if curvature.is_nan() {
                return Err(Error::numeric(
                    "non-finite curvature in conjugate gradients",
                ));
            }
            // Search direction in the null space: nothing more to gain.
            break;
        }
        let alpha = rr / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
        iterations += 1;
        if !rr.is_finite() {
            return Err(Error::numeric(format!(
                "conjugate gradients diverged at iteration {iterations}"
            )));
        }
        observer(iterations, &x);
    }
    ensure_finite("least-squares solution", &x)?;
    Ok((
        x,
        CgReport {
            iterations,
            rel_residual: rel(rr),
        },
    ))
}
