//! Python bindings. Arrays cross the boundary as flat `list[float]` in
//! row-major order; wrap them with `numpy.asarray(...).reshape(...)`.

use dipiir::agents::explicit_data_agent;
use dipiir::ce::AugmentedState;
use dipiir::operators::{check_adjoint, CtGeometry, RadonOp};
use dipiir::pipeline::{
    reconstruct as run_pipeline, PipelineKind, ProblemKind, ProblemSpec, ReconParams, Simulation,
};
use dipiir::simdata::{self, MetricsReport};
use dipiir::Error;
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyTimeoutError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::Shape(_) => PyValueError::new_err(err.to_string()),
        Error::Io(_) => PyOSError::new_err(err.to_string()),
        Error::Timeout(_) => PyTimeoutError::new_err(err.to_string()),
        _ => PyRuntimeError::new_err(err.to_string()),
    }
}

/// Shepp-Logan phantom, `side × side`, values in `[0, 2]`.
#[pyfunction]
fn shepp_logan(side: usize) -> PyResult<Vec<f64>> {
    simdata::shepp_logan(side).map(|p| p.values).map_err(to_py)
}

/// PSNR in dB with the given peak value.
#[pyfunction]
fn psnr(recon: Vec<f64>, reference: Vec<f64>, peak: f64) -> PyResult<f64> {
    simdata::psnr(&recon, &reference, peak).map_err(to_py)
}

/// Mean SSIM over an `rows × cols` grid (11-tap Gaussian window).
#[pyfunction]
fn ssim(recon: Vec<f64>, reference: Vec<f64>, rows: usize, cols: usize) -> PyResult<f64> {
    simdata::ssim(
        &recon,
        &reference,
        rows,
        cols,
        &simdata::SsimConfig::default(),
    )
    .map_err(to_py)
}

/// Normalized adjoint mismatch of the parallel-beam projector.
#[pyfunction]
#[pyo3(signature = (side, num_angles, trials = 10, seed = 0))]
fn radon_adjoint_mismatch(
    py: Python<'_>,
    side: usize,
    num_angles: usize,
    trials: usize,
    seed: u64,
) -> PyResult<f64> {
    py.detach(|| {
        let op = RadonOp::new(CtGeometry::parallel(side, num_angles)?);
        check_adjoint(&op, trials, seed)
    })
    .map_err(to_py)
}

/// Closed-form explicit data-prior agent; returns `(image, data)`.
#[pyfunction]
#[pyo3(signature = (image, data, v0, lambda_d, nonneg = false))]
fn explicit_data_step(
    image: Vec<f64>,
    data: Vec<f64>,
    v0: Vec<f64>,
    lambda_d: f64,
    nonneg: bool,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let x = AugmentedState::new(image, data);
    let out = explicit_data_agent(&x, &v0, lambda_d, nonneg).map_err(to_py)?;
    Ok((out.image, out.data))
}

fn metrics_dict<'py>(py: Python<'py>, m: &MetricsReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("psnr", m.psnr)?;
    d.set_item("ssim", m.ssim)?;
    d.set_item("nmse", m.nmse)?;
    d.set_item("rmse", m.rmse)?;
    Ok(d)
}

/// Simulates a problem and runs one pipeline with its shipped settings.
///
/// Returns a dict with `image` (magnitude for MRI), `side`, `metrics` and,
/// for consensus pipelines, `trace` as a list of per-iteration dicts.
#[pyfunction]
#[pyo3(signature = (problem, pipeline, side = None, seed = 0, max_iters = None))]
fn reconstruct<'py>(
    py: Python<'py>,
    problem: &str,
    pipeline: &str,
    side: Option<usize>,
    seed: u64,
    max_iters: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let kind: ProblemKind = problem.parse().map_err(to_py)?;
    let pipe: PipelineKind = pipeline.parse().map_err(to_py)?;
    let mut spec = ProblemSpec::new(kind);
    if let Some(s) = side {
        spec.side = s;
    }
    spec.seed = seed;
    let mut params = ReconParams::preset(kind, pipe);
    if let Some(n) = max_iters {
        params.ce = params.ce.to_builder().max_iters(n).build().map_err(to_py)?;
    }
    let (sim, out) = py
        .detach(|| {
            let sim = Simulation::simulate(&spec)?;
            let out = run_pipeline(&sim, pipe, &params)?;
            Ok::<_, Error>((sim, out))
        })
        .map_err(to_py)?;

    let d = PyDict::new(py);
    d.set_item("image", sim.display_image(&out.image))?;
    d.set_item("side", sim.side())?;
    if let Some(m) = &out.metrics {
        d.set_item("metrics", metrics_dict(py, m)?)?;
    }
    if let Some(trace) = &out.trace {
        let rows = trace
            .records
            .iter()
            .map(|r| {
                let row = PyDict::new(py);
                row.set_item("iter", r.iter)?;
                row.set_item("mann_residual", r.mann_residual)?;
                row.set_item("gaps", r.gaps.to_vec())?;
                row.set_item("psnr", r.psnr)?;
                Ok(row)
            })
            .collect::<PyResult<Vec<_>>>()?;
        d.set_item("trace", rows)?;
    }
    Ok(d)
}

#[pymodule]
fn dipiir_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(shepp_logan, m)?)?;
    m.add_function(wrap_pyfunction!(psnr, m)?)?;
    m.add_function(wrap_pyfunction!(ssim, m)?)?;
    m.add_function(wrap_pyfunction!(radon_adjoint_mismatch, m)?)?;
    m.add_function(wrap_pyfunction!(explicit_data_step, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_runs_inside_an_embedded_interpreter() {
        Python::initialize();
        Python::attach(|py| {
            let m = PyModule::new(py, "dipiir_py").unwrap();
            dipiir_py(&m).unwrap();
            let p: Vec<f64> = m
                .getattr("shepp_logan")
                .unwrap()
                .call1((16,))
                .unwrap()
                .extract()
                .unwrap();
            assert_eq!(p.len(), 256);
            let (_, data): (Vec<f64>, Vec<f64>) = m
                .getattr("explicit_data_step")
                .unwrap()
                .call1((vec![0.0], vec![4.0], vec![0.0], 3.0))
                .unwrap()
                .extract()
                .unwrap();
            assert_eq!(data, vec![3.0]);
            let err = m
                .getattr("reconstruct")
                .unwrap()
                .call1(("mri-accel", "fbp"))
                .unwrap_err();
            assert!(err.is_instance_of::<PyValueError>(py));
        });
    }

    #[test]
    fn error_kinds_map_to_python_exceptions() {
        Python::initialize();
        Python::attach(|py| {
            assert!(to_py(Error::Timeout(1.0)).is_instance_of::<PyTimeoutError>(py));
            assert!(to_py(Error::Shape("x".into())).is_instance_of::<PyValueError>(py));
            assert!(to_py(Error::Protocol("x".into())).is_instance_of::<PyRuntimeError>(py));
        });
    }
}
