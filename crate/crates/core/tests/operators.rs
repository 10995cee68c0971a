mod common;

use std::sync::Arc;

use dipiir::linalg::{dot, norm};
use dipiir::operators::*;
use dipiir::simdata::{make_kspace_mask, psnr, shepp_logan};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::{analytic_shepp_logan_sinogram, disk, max_abs_diff, rng, uniform};

fn ct_ops(side: usize) -> Vec<SharedOp> {
    let g = CtGeometry::parallel(side, 24).unwrap();
    let obs = g.with_angles(g.angles()[..12].to_vec()).unwrap();
    let mis = g.with_angles(g.angles()[12..].to_vec()).unwrap();
    vec![
        Arc::new(RadonOp::new(g)),
        Arc::new(RadonOp::new(obs)),
        Arc::new(RadonOp::new(mis)),
    ]
}

#[test]
fn every_small_operator_has_a_matched_adjoint() {
    let n = 16;
    let fft = Arc::new(Fourier2d::new(n));
    let mask = make_kspace_mask(n, 4, 0.125).unwrap();
    let blur: SharedOp = Arc::new(make_blur_op(Kernel2d::gaussian(1.2, 2).unwrap(), n).unwrap());
    let sub: SharedOp = Arc::new(make_subsample_op(2, n).unwrap());
    let mut ops: Vec<SharedOp> = ct_ops(n);
    ops.push(Arc::new(FourierOp::full(fft.clone())));
    ops.push(Arc::new(FourierOp::observed(fft.clone(), &mask).unwrap()));
    ops.push(Arc::new(FourierOp::unobserved(fft, &mask).unwrap()));
    ops.push(blur.clone());
    ops.push(sub.clone());
    ops.push(Arc::new(ComposedOp::new(sub, blur.clone()).unwrap()));
    ops.push(Arc::new(make_incomplete_op(blur.clone(), blur).unwrap()));
    for op in &ops {
        let err = check_adjoint(op.as_ref(), 50, 42).unwrap();
        assert!(err < 1e-10, "{}: {err}", op.label());
    }
}

#[test]
fn check_adjoint_is_deterministic() {
    let g = CtGeometry::parallel(12, 7).unwrap();
    let op = RadonOp::new(g);
    let bad = MiscaledAdjoint::new(Arc::new(op), 1.001);
    assert_eq!(
        check_adjoint(&bad, 5, 9).unwrap(),
        check_adjoint(&bad, 5, 9).unwrap()
    );
}

#[test]
fn doubled_radon_adjoint_is_caught() {
    let op: SharedOp = Arc::new(RadonOp::new(CtGeometry::parallel(16, 10).unwrap()));
    let bad = MiscaledAdjoint::new(op, 2.0);
    // Random pairs are nearly orthogonal in high dimension, which shrinks
    // the normalized discrepancy; it still sits far above the pass bound.
    let err = check_adjoint(&bad, 50, 1).unwrap();
    assert!(err > 1e-3, "{err}");
}

#[test]
fn centered_disk_central_ray_matches_line_integral() {
    let side = 128;
    let radius = 0.25;
    let g = CtGeometry::parallel(side, 8).unwrap();
    let s = radon_apply(&disk(side, radius), &g).unwrap();
    let nd = g.num_detectors();

    // Dense oracle: integrate the rasterized disk along y = 0 at 10x the
    // pixel rate, using nearest-row lookup between the two middle rows.
    let h = 1.0 / side as f64;
    let steps = 10 * side;
    let oracle: f64 = (0..steps)
        .map(|k| {
            let x = -0.5 + (k as f64 + 0.5) / steps as f64;
            let j = ((x / h) + (side as f64 - 1.0) / 2.0).round() as usize;
            let y = 0.5 * h;
            if (x * x + y * y) <= radius * radius && j < side {
                1.0
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / steps as f64;
    assert!((oracle - 0.5).abs() < 0.02, "oracle {oracle}");
    for a in 0..g.num_angles() {
        let center = s[a * nd + nd / 2];
        assert!(
            (center - oracle).abs() < 0.02,
            "angle {a}: {center} vs {oracle}"
        );
    }
}

#[test]
fn single_bin_backprojection_stays_on_its_ray() {
    let side = 16;
    let g = CtGeometry::parallel(side, 5).unwrap();
    let nd = g.num_detectors();
    for (angle, det) in [(0, nd / 2), (1, nd / 2 + 3), (3, 7)] {
        let bin = angle * nd + det;
        let mut sino = vec![0.0; g.sinogram_len()];
        sino[bin] = 1.0;
        let back = radon_adjoint(&sino, &g).unwrap();
        // Footprint of that ray under the forward discretization.
        for p in 0..side * side {
            let mut e = vec![0.0; side * side];
            e[p] = 1.0;
            let touched = radon_apply(&e, &g).unwrap()[bin] != 0.0;
            assert_eq!(back[p] != 0.0, touched, "pixel {p}, bin {bin}");
        }
        assert!(back.iter().any(|v| *v != 0.0));
    }
}

fn analytic_sinogram(g: &CtGeometry) -> Vec<f64> {
    let offsets: Vec<f64> = (0..g.num_detectors())
        .map(|k| g.detector_offset(k))
        .collect();
    analytic_shepp_logan_sinogram(g.angles(), &offsets)
}

#[test]
fn fbp_regression_full_and_limited_view() {
    let side = 128;
    let g = CtGeometry::parallel(side, 180).unwrap();
    let sino = analytic_sinogram(&g);
    let truth = shepp_logan(side).unwrap().values;
    let full = psnr(&fbp(&sino, &g, FilterKind::RamLak).unwrap(), &truth, 2.0).unwrap();
    // Measured at 25.5 dB when the projector was brought up.
    assert!(full >= 25.0, "full-view FBP PSNR {full}");

    let mut limited = sino.clone();
    limited[90 * g.num_detectors()..].fill(0.0);
    let rec = fbp(&limited, &g, FilterKind::RamLak).unwrap();
    assert!(rec.iter().any(|v| *v != 0.0));
    let lim = psnr(&rec, &truth, 2.0).unwrap();
    assert!(lim < full, "limited {lim} vs full {full}");
    assert!(lim > 10.0, "limited-view FBP PSNR {lim}");
}

#[test]
fn joseph_projector_tracks_analytic_sinogram() {
    let side = 128;
    let g = CtGeometry::parallel(side, 45).unwrap();
    let exact = analytic_sinogram(&g);
    let discrete = radon_apply(&shepp_logan(side).unwrap().values, &g).unwrap();
    let rel = dipiir::linalg::dist(&exact, &discrete) / norm(&exact);
    assert!(rel < 0.03, "relative sinogram error {rel}");
}

#[test]
fn cg_matches_dense_normal_equations() {
    let mut r = rng(6);
    for trial in 0..10 {
        let a = uniform(&mut r, 24, -1.0, 1.0);
        let y = uniform(&mut r, 6, -2.0, 2.0);
        let w = uniform(&mut r, 6, 0.5, 2.0);
        let anchor = uniform(&mut r, 4, -1.0, 1.0);
        let lambda = 0.1;
        let op = DenseOp::new(6, 4, a.clone()).unwrap();
        let cfg = CgConfig {
            max_iters: 40,
            rel_tol: 1e-14,
        };
        let v = cg_least_squares(&op, &y, &w, lambda, &anchor, &cfg).unwrap();

        let am = DMatrix::from_row_slice(6, 4, &a);
        let wm = DMatrix::from_diagonal(&DVector::from_vec(w));
        let lhs = am.transpose() * &wm * &am + DMatrix::identity(4, 4) * lambda;
        let rhs = am.transpose() * &wm * DVector::from_vec(y) + DVector::from_vec(anchor) * lambda;
        let exact = lhs.lu().solve(&rhs).unwrap();
        assert!(max_abs_diff(&v, exact.as_slice()) < 1e-8, "trial {trial}");
    }
}

#[test]
fn cg_objective_never_increases() {
    let g = CtGeometry::parallel(24, 16).unwrap();
    let op = RadonOp::new(g);
    let mut r = rng(2);
    let y = uniform(&mut r, op.output_len(), 0.0, 1.0);
    let w = vec![1.0; y.len()];
    let anchor = uniform(&mut r, op.input_len(), -0.5, 0.5);
    let mut values = Vec::new();
    cg_least_squares_observed(&op, &y, &w, 0.3, &anchor, &CgConfig::default(), |_, v| {
        values.push(quadratic_objective(&op, &y, &w, 0.3, &anchor, v).unwrap());
    })
    .unwrap();
    assert!(values.len() > 2);
    for pair in values.windows(2) {
        assert!(
            pair[1] <= pair[0] + 1e-12 * pair[0].abs().max(1.0),
            "{pair:?}"
        );
    }
}

#[test]
fn fourier_partition_sums_to_identity() {
    let n = 12;
    let fft = Arc::new(Fourier2d::new(n));
    let mask = make_kspace_mask(n, 3, 0.17).unwrap();
    let obs = FourierOp::observed(fft.clone(), &mask).unwrap();
    let unobs = FourierOp::unobserved(fft, &mask).unwrap();
    let x = uniform(&mut rng(8), 2 * n * n, -1.0, 1.0);
    let a = obs.adjoint(&obs.apply(&x).unwrap()).unwrap();
    let b = unobs.adjoint(&unobs.apply(&x).unwrap()).unwrap();
    let sum: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
    assert!(max_abs_diff(&sum, &x) < 1e-10);
}

#[test]
fn superres_reduces_to_deblur_at_unit_factor() {
    let n = 8;
    let x = uniform(&mut rng(4), n * n, -1.0, 1.0);
    let id: SharedOp = Arc::new(make_blur_op(Kernel2d::new(1, 1, vec![1.0]).unwrap(), n).unwrap());
    let sub: SharedOp = Arc::new(make_subsample_op(1, n).unwrap());
    let comp = ComposedOp::new(sub, id.clone()).unwrap();
    assert_eq!(comp.apply(&x).unwrap(), x);
    assert_eq!(id.apply(&x).unwrap(), x);
}

fn lin_combo(a: f64, u: &[f64], b: f64, v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(x, y)| a * x + b * y).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radon_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let g = CtGeometry::parallel(16, 9).unwrap();
        let mut r = rng(seed);
        let u = uniform(&mut r, 256, -1.0, 1.0);
        let v = uniform(&mut r, 256, -1.0, 1.0);
        let lhs = radon_apply(&lin_combo(a, &u, b, &v), &g).unwrap();
        let rhs = lin_combo(a, &radon_apply(&u, &g).unwrap(), b, &radon_apply(&v, &g).unwrap());
        let scale = norm(&rhs).max(1.0);
        prop_assert!(max_abs_diff(&lhs, &rhs) <= 1e-10 * scale);
    }

    #[test]
    fn dft_is_linear_and_unitary(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let n = 10;
        let mut r = rng(seed);
        let u = uniform(&mut r, 2 * n * n, -1.0, 1.0);
        let v = uniform(&mut r, 2 * n * n, -1.0, 1.0);
        let fu = dft2_apply(&u, n, n, None).unwrap();
        let fv = dft2_apply(&v, n, n, None).unwrap();
        let lhs = dft2_apply(&lin_combo(a, &u, b, &v), n, n, None).unwrap();
        prop_assert!(max_abs_diff(&lhs, &lin_combo(a, &fu, b, &fv)) <= 1e-10 * norm(&lhs).max(1.0));
        prop_assert!((norm(&fu) - norm(&u)).abs() < 1e-10 * norm(&u));
        prop_assert!((dot(&fu, &fv) - dot(&u, &v)).abs() < 1e-9);
    }

    #[test]
    fn block_operator_layout(seed in any::<u64>()) {
        let n = 6;
        let blur: SharedOp = Arc::new(make_blur_op(Kernel2d::boxcar(3).unwrap(), n).unwrap());
        let block = make_incomplete_op(blur.clone(), blur.clone()).unwrap();
        let mut r = rng(seed);
        let img = uniform(&mut r, n * n, -1.0, 1.0);
        let data = uniform(&mut r, n * n, -1.0, 1.0);
        let mut x = img.clone();
        x.extend_from_slice(&data);
        let out = block.apply(&x).unwrap();
        let bx = blur.apply(&img).unwrap();
        prop_assert_eq!(&out[..n * n], &bx[..]);
        let expect: Vec<f64> = bx.iter().zip(&data).map(|(p, q)| p - q).collect();
        prop_assert!(max_abs_diff(&out[n * n..], &expect) < 1e-14);
    }
}
