//! The `simulate`, `reconstruct` and `metrics` commands.

use std::fs;
use std::path::{Path, PathBuf};

use dipiir::ce::IterationRecord;
use dipiir::pipeline::{
    reconstruct as run_pipeline, Acquisition, PipelineKind, Simulation, StageTiming,
};
use dipiir::priors::load_tensor;
use dipiir::simdata::MetricsReport;
use dipiir::{Error, Result};
use serde::Serialize;

use crate::config::{ConfigEcho, RunConfig};
use crate::output::{full_dims, image_dims, mask_codes, observed_dims, save, save_json, write_pgm};

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot create output directory {}: {e}", dir.display()),
        ))
    })
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    ensure_dir(&cfg.out_dir)?;
    let sim = Simulation::simulate(&cfg.problem)?;
    let side = sim.side();
    let mut written = Vec::new();
    let mut put = |suffix: &str, dims: Vec<usize>, data: Vec<f64>| -> Result<()> {
        let p = cfg.path(suffix);
        save(&p, dims, data).map_err(|e| with_path(&p, e))?;
        written.push(p);
        Ok(())
    };
    put(
        ".phantom.dipt",
        vec![side, side],
        sim.truth.clone().unwrap_or_default(),
    )?;
    put(
        ".full.dipt",
        full_dims(&sim),
        sim.full_data.clone().unwrap_or_default(),
    )?;
    put(".observed.dipt", observed_dims(&sim), sim.observed.clone())?;
    match &sim.acquisition {
        Acquisition::Ct { full, num_observed } => {
            let table = full
                .angles()
                .iter()
                .enumerate()
                .flat_map(|(k, a)| [*a, if k < *num_observed { 1.0 } else { 0.0 }])
                .collect();
            put(".angles.dipt", vec![full.num_angles(), 2], table)?;
        }
        Acquisition::Mri { mask } => put(".mask.dipt", vec![mask.cols()], mask_codes(mask))?,
        Acquisition::Deblur { kernel } | Acquisition::Superres { kernel, .. } => put(
            ".kernel.dipt",
            vec![kernel.rows(), kernel.cols()],
            kernel.taps().to_vec(),
        )?,
    }
    let spec = cfg.path(".problem.json");
    save_json(&spec, &cfg.problem)?;
    written.push(spec);
    if cfg.pgm {
        let p = cfg.path(".phantom.pgm");
        let truth = sim.truth.as_deref().unwrap_or_default();
        let hi = truth.iter().cloned().fold(0.0, f64::max);
        write_pgm(&p, truth, side, side, 0.0, hi)?;
        written.push(p);
    }
    if let Acquisition::Mri { mask } = &sim.acquisition {
        println!(
            "{}: {} of {} k-space lines sampled, net acceleration {:.2}",
            cfg.name,
            mask.sampled_lines().len(),
            mask.cols(),
            mask.net_acceleration()
        );
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}

#[derive(Debug, Serialize)]
struct Files {
    recon: String,
    data: Option<String>,
    trace: Option<String>,
    preview: Option<String>,
    timing: String,
}

#[derive(Debug, Serialize)]
struct Timing {
    stages: Vec<StageTiming>,
    total_seconds: f64,
}

#[derive(Debug, Serialize)]
struct Report {
    run: String,
    config: ConfigEcho,
    metrics: Option<MetricsReport>,
    iterations: usize,
    final_iteration: Option<IterationRecord>,
    data_agent_calls: Option<usize>,
    tv_nonconverged_calls: usize,
    notes: Vec<String>,
    files: Files,
}

fn load_simulation(cfg: &RunConfig) -> Result<Simulation> {
    let observed_path = cfg
        .observed_path
        .clone()
        .unwrap_or_else(|| cfg.path(".observed.dipt"));
    if !observed_path.exists() {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!(
                "observed data {} not found (run `dipiir simulate` first or set input.observed)",
                observed_path.display()
            ),
        )));
    }
    let observed = load_tensor(&observed_path).map_err(|e| with_path(&observed_path, e))?;
    let truth_path = match &cfg.truth_path {
        Some(p) => Some(p.clone()),
        None => Some(cfg.path(".phantom.dipt")).filter(|p| p.exists()),
    };
    let truth = match truth_path {
        Some(p) => Some(load_tensor(&p).map_err(|e| with_path(&p, e))?.data),
        None => None,
    };
    Simulation::from_observed(&cfg.problem, observed.data, truth)
}

pub fn reconstruct(cfg: &RunConfig) -> Result<PathBuf> {
    let sim = load_simulation(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let out = run_pipeline(&sim, cfg.pipeline, &cfg.params)?;
    let run = cfg.run_name();
    let path = |suffix: &str| cfg.out_dir.join(format!("{run}{suffix}"));

    let recon_path = path(".recon.dipt");
    save(&recon_path, image_dims(&sim), out.image.clone())?;
    let data_path = match &out.data {
        Some(d) => {
            let p = path(".data.dipt");
            save(&p, sim.data_shape().dims(), d.clone())?;
            Some(p)
        }
        None => None,
    };
    let trace_path = match &out.trace {
        Some(t) => {
            let p = path(".trace.csv");
            fs::write(&p, t.to_csv())?;
            Some(p)
        }
        None => None,
    };
    let preview = if cfg.pgm {
        let p = path(".recon.pgm");
        let shown = sim.display_image(&out.image);
        let reference = sim.truth.as_deref().unwrap_or(&shown);
        let hi = reference.iter().cloned().fold(0.0, f64::max);
        write_pgm(&p, &shown, sim.side(), sim.side(), 0.0, hi)?;
        Some(p)
    } else {
        None
    };

    let mut notes = Vec::new();
    if cfg.pipeline == PipelineKind::PnpMbir {
        notes.push(
            "pnp-mbir: data agent weight fixed at 0, sensor and image weights renormalized; \
             initialized from the zero-filled inversion"
                .to_string(),
        );
    }
    if let Acquisition::Mri { mask } = &sim.acquisition {
        notes.push(format!(
            "k-space: {} of {} lines sampled, net acceleration {:.2}",
            mask.sampled_lines().len(),
            mask.cols(),
            mask.net_acceleration()
        ));
    }
    if out.tv_nonconverged_calls > 0 {
        notes.push(format!(
            "TV denoiser hit its iteration cap in {} calls",
            out.tv_nonconverged_calls
        ));
    }
    if sim.truth.is_none() {
        notes.push("no ground truth available: metrics omitted".to_string());
    }

    let timing_path = path(".timing.json");
    let report = Report {
        run: run.clone(),
        config: cfg.echo(),
        metrics: out.metrics.clone(),
        iterations: out.trace.as_ref().map_or(0, |t| t.len()),
        final_iteration: out.trace.as_ref().and_then(|t| t.last().cloned()),
        data_agent_calls: out.data_agent_calls,
        tv_nonconverged_calls: out.tv_nonconverged_calls,
        notes,
        files: Files {
            recon: file_name(&recon_path),
            data: data_path.as_deref().map(file_name),
            trace: trace_path.as_deref().map(file_name),
            preview: preview.as_deref().map(file_name),
            timing: file_name(&timing_path),
        },
    };
    // Wall-clock times live apart from the report so reruns of a seeded
    // configuration give byte-identical reports.
    save_json(
        &timing_path,
        &Timing {
            total_seconds: out.timings.iter().map(|t| t.seconds).sum(),
            stages: out.timings.clone(),
        },
    )?;
    let report_path = path(".report.json");
    save_json(&report_path, &report)?;
    match &out.metrics {
        Some(m) => println!(
            "{run}: PSNR {:.2} dB, SSIM {:.4}, NMSE {:.4e}",
            m.psnr, m.ssim, m.nmse
        ),
        None => println!("{run}: done"),
    }
    println!("wrote {}", report_path.display());
    Ok(report_path)
}

/// Grid of a stored image: the last two dimensions, or a square.
fn grid(dims: &[usize], len: usize) -> Result<(usize, usize)> {
    if dims.len() >= 2 {
        return Ok((dims[dims.len() - 2], dims[dims.len() - 1]));
    }
    let side = (len as f64).sqrt().round() as usize;
    if side * side != len {
        return Err(Error::Shape(format!(
            "cannot infer an image grid for {len} values"
        )));
    }
    Ok((side, side))
}

pub fn metrics(recon: &Path, reference: &Path, report: Option<&Path>) -> Result<MetricsReport> {
    let r = load_tensor(recon).map_err(|e| with_path(recon, e))?;
    let t = load_tensor(reference).map_err(|e| with_path(reference, e))?;
    let (rows, cols) = grid(&t.dims, t.len())?;
    if rows * cols != t.len() {
        return Err(Error::Shape(format!(
            "reference must be a single image plane, got dims {:?}",
            t.dims
        )));
    }
    let values = if r.len() == 2 * t.len() {
        // Two planes: compare the magnitude.
        let n = t.len();
        (0..n).map(|k| r.data[k].hypot(r.data[n + k])).collect()
    } else if r.len() == t.len() {
        r.data
    } else {
        return Err(Error::Shape(format!(
            "reconstruction has {} values, reference {}",
            r.len(),
            t.len()
        )));
    };
    let m = MetricsReport::compute(&values, &t.data, rows, cols)?;
    let text = serde_json::to_string_pretty(&m).expect("metrics serialize");
    println!("{text}");
    if let Some(p) = report {
        fs::write(p, text + "\n").map_err(|e| with_path(p, Error::Io(e)))?;
    }
    Ok(m)
}
