mod common;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;

use dipiir::linalg::dist;
use dipiir::operators::{dft2_apply, gather_lines, CtGeometry, Fourier2d, FourierOp, LinearOp};
use dipiir::priors::*;
use dipiir::simdata::make_kspace_mask;
use dipiir::Error;
use proptest::prelude::*;

use common::{max_abs_diff, rng, uniform};

#[test]
fn angle_independent_sinogram_completes_to_its_profile() {
    let g = CtGeometry::parallel(32, 40).unwrap();
    let nd = g.num_detectors();
    // Analytic centered-disk profile: identical at every angle and even in t.
    let profile: Vec<f64> = (0..nd)
        .map(|k| {
            let t = g.detector_offset(k);
            2.0 * (0.3f64 * 0.3 - t * t).max(0.0).sqrt()
        })
        .collect();
    let observed = 17;
    let limited: Vec<f64> = (0..observed).flat_map(|_| profile.clone()).collect();
    let v0 = sinogram_complete(&limited, &g, observed).unwrap();
    assert_eq!(v0.len(), (40 - observed) * nd);
    for row in v0.chunks(nd) {
        assert!(max_abs_diff(row, &profile) < 1e-6);
    }
    assert!(sinogram_complete(&limited, &g, 0).is_err());
}

#[test]
fn smooth_spectrum_completion_beats_zero_fill() {
    let n = 64;
    let c = (n as f64 - 1.0) / 2.0;
    // Narrow image-domain blob: its spectrum varies slowly across columns.
    let mut image = vec![0.0; 2 * n * n];
    for i in 0..n {
        for j in 0..n {
            let r2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            image[i * n + j] = (-r2 / (2.0 * 1.5 * 1.5)).exp();
        }
    }
    let mask = make_kspace_mask(n, 4, 0.06).unwrap();
    let full = dft2_apply(&image, n, n, None).unwrap();
    let masked = dft2_apply(&image, n, n, Some(&mask)).unwrap();
    let truth = gather_lines(&full, n, &mask.missing_lines());
    let v0 = kspace_complete(&masked, &mask).unwrap();
    let zero = vec![0.0; truth.len()];
    let err = dist(&v0, &truth);
    let zf = dist(&zero, &truth);
    assert!(err < zf, "completion {err} vs zero-fill {zf}");

    // The same lines as the unobserved-part operator selects.
    let unobs = FourierOp::unobserved(Arc::new(Fourier2d::new(n)), &mask).unwrap();
    assert!(max_abs_diff(&unobs.apply(&image).unwrap(), &truth) < 1e-12);
}

#[test]
fn fully_sampled_mask_completes_to_nothing() {
    let n = 8;
    let mask = make_kspace_mask(n, 1, 0.0).unwrap();
    assert!(kspace_complete(&vec![1.0; 2 * n * n], &mask)
        .unwrap()
        .is_empty());
}

#[test]
fn denoisers_keep_constants() {
    let shape = GridShape::new(2, 9, 11);
    let v = vec![0.37; shape.len()];
    let tv = TvDenoiser {
        shape,
        weight: 0.8,
        cfg: TvConfig::default(),
        domain: Domain::Image,
    };
    let gauss = GaussianDenoiser {
        shape,
        sigma: 2.0,
        domain: Domain::Data,
    };
    let id = IdentityDenoiser {
        domain: Domain::Data,
    };
    let list: [&dyn Denoiser; 3] = [&tv, &gauss, &id];
    for d in list {
        let out = d.denoise(&v).unwrap();
        assert!(max_abs_diff(&out, &v) < 1e-8, "{}", d.name());
    }
}

#[test]
fn gaussian_delta_keeps_mass() {
    let shape = GridShape::square(21);
    let mut v = vec![0.0; shape.len()];
    v[10 * 21 + 10] = 1.0;
    let out = gaussian_denoise(&v, shape, 1.7).unwrap();
    assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn completions_are_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mut r = rng(seed);
        let g = CtGeometry::parallel(16, 20).unwrap();
        let len = 9 * g.num_detectors();
        let (p, q) = (uniform(&mut r, len, -1.0, 1.0), uniform(&mut r, len, -1.0, 1.0));
        let combo: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
        let lhs = sinogram_complete(&combo, &g, 9).unwrap();
        let sp = sinogram_complete(&p, &g, 9).unwrap();
        let sq = sinogram_complete(&q, &g, 9).unwrap();
        let rhs: Vec<f64> = sp.iter().zip(&sq).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10);

        let n = 16;
        let mask = make_kspace_mask(n, 3, 0.2).unwrap();
        let zero_missing = |v: Vec<f64>| -> Vec<f64> {
            let mut v = v;
            for c in mask.missing_lines() {
                for row in 0..2 * n {
                    v[row * n + c] = 0.0;
                }
            }
            v
        };
        let p = zero_missing(uniform(&mut r, 2 * n * n, -1.0, 1.0));
        let q = zero_missing(uniform(&mut r, 2 * n * n, -1.0, 1.0));
        let combo: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
        let lhs = kspace_complete(&combo, &mask).unwrap();
        let kp = kspace_complete(&p, &mask).unwrap();
        let kq = kspace_complete(&q, &mask).unwrap();
        let rhs: Vec<f64> = kp.iter().zip(&kq).map(|(x, y)| a * x + b * y).collect();
        prop_assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
    }

    #[test]
    fn tensor_roundtrip_is_bit_exact(
        dims in prop::collection::vec(1usize..5, 0..4),
        seed in any::<u64>(),
    ) {
        let len: usize = dims.iter().product();
        let mut data = uniform(&mut rng(seed), len, -1e6, 1e6);
        if len > 2 {
            data[0] = f64::MIN_POSITIVE;
            data[1] = -0.0;
        }
        let t = Tensor::new(dims.clone(), data).unwrap();
        let back = decode_tensor(&encode_tensor(&t, DType::F64)).unwrap();
        prop_assert_eq!(&back.dims, &t.dims);
        let same = back.data.iter().zip(&t.data).all(|(x, y)| x.to_bits() == y.to_bits());
        prop_assert!(same);

        let narrowed: Vec<f64> = t.data.iter().map(|v| *v as f32 as f64).collect();
        let t32 = Tensor::new(dims, narrowed).unwrap();
        prop_assert_eq!(decode_tensor(&encode_tensor(&t32, DType::F32)).unwrap(), t32);
    }
}

struct Scripts {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn scripts() -> Scripts {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();
    let short = Tensor::vector(vec![1.0, 2.0]);
    save_tensor(&root.join("short.dipt"), &short).unwrap();
    let write = |name: &str, body: &str| std::fs::write(root.join(name), body).unwrap();
    write("echo.sh", "exec cat\n");
    write(
        "fail.sh",
        "cat >/dev/null\necho 'model weights missing' >&2\nexit 1\n",
    );
    write(
        "short.sh",
        &format!(
            "cat >/dev/null\ncat '{}'\n",
            root.join("short.dipt").display()
        ),
    );
    write("slow.sh", "sleep 5\n");
    write("garbage.sh", "cat >/dev/null\necho not-a-tensor\n");
    Scripts { _dir: dir, root }
}

/// Scripts run through `/bin/sh` so no freshly written file is exec'd.
fn spec(root: &Path, script: &str, timeout: f64, len: usize) -> PluginSpec {
    PluginSpec::new("/bin/sh", timeout, len)
        .unwrap()
        .with_args(vec![root.join(script).display().to_string()])
}

#[test]
fn plugin_protocol_outcomes() {
    let s = scripts();
    let v = uniform(&mut rng(1), 50, -3.0, 3.0);

    let out = plugin_denoise(&v, &spec(&s.root, "echo.sh", 10.0, 50)).unwrap();
    assert!(out.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits()));

    match plugin_denoise(&v, &spec(&s.root, "fail.sh", 10.0, 50)) {
        Err(Error::Plugin(msg)) => assert!(msg.contains("model weights missing"), "{msg}"),
        other => panic!("expected plugin error, got {other:?}"),
    }
    assert!(matches!(
        plugin_denoise(&v, &spec(&s.root, "short.sh", 10.0, 50)),
        Err(Error::Protocol(_))
    ));
    assert!(matches!(
        plugin_denoise(&v, &spec(&s.root, "garbage.sh", 10.0, 50)),
        Err(Error::Protocol(_))
    ));
    let start = std::time::Instant::now();
    assert!(matches!(
        plugin_denoise(&v, &spec(&s.root, "slow.sh", 0.3, 50)),
        Err(Error::Timeout(_))
    ));
    assert!(start.elapsed().as_secs_f64() < 4.0);
    assert!(PluginSpec::new("/bin/sh", 0.0, 1).is_err());
}

#[test]
fn concurrent_plugin_calls_are_independent() {
    let s = scripts();
    let handles: Vec<_> = (0..6)
        .map(|k| {
            let sp = spec(&s.root, "echo.sh", 10.0, 40);
            thread::spawn(move || {
                let v = uniform(&mut rng(k), 40, -1.0, 1.0);
                (plugin_denoise(&v, &sp).unwrap(), v)
            })
        })
        .collect();
    for h in handles {
        let (out, v) = h.join().unwrap();
        assert_eq!(out, v);
    }
}

#[test]
fn plugin_denoiser_wraps_the_protocol() {
    let s = scripts();
    let d = PluginDenoiser {
        spec: spec(&s.root, "echo.sh", 10.0, 16).with_dims(vec![4, 4]),
        domain: Domain::Image,
    };
    let v: Vec<f64> = (0..16).map(|k| k as f64).collect();
    assert_eq!(d.denoise(&v).unwrap(), v);
    assert!(matches!(d.denoise(&v[..3]), Err(Error::Shape(_))));
}
