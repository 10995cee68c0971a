//! Runs every pipeline of a problem on the default seeded simulation and
//! prints PSNR / SSIM per pipeline.
//!
//! ```text
//! cargo run --release -p dipiir --example compare_pipelines -- ct-limited
//! ```

use std::time::Instant;

use dipiir::pipeline::{
    reconstruct, PipelineKind, ProblemKind, ProblemSpec, ReconParams, Simulation,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let problem: ProblemKind = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "ct-limited".into())
        .parse()?;
    let sim = Simulation::simulate(&ProblemSpec::new(problem))?;
    for pipeline in PipelineKind::ALL {
        if !pipeline.supports(problem) {
            continue;
        }
        let params = ReconParams::preset(problem, pipeline);
        let start = Instant::now();
        let out = reconstruct(&sim, pipeline, &params)?;
        let m = out.metrics.expect("simulated truth");
        println!(
            "{:<16} psnr {:7.3} dB  ssim {:.4}  ({:.2} s)",
            pipeline.as_str(),
            m.psnr,
            m.ssim,
            start.elapsed().as_secs_f64()
        );
        if let Some(trace) = &out.trace {
            for r in &trace.records {
                println!(
                    "    iter {} residual {:.3e} psnr {:.3}",
                    r.iter,
                    r.mann_residual,
                    r.psnr.unwrap_or(f64::NAN)
                );
            }
        }
    }
    Ok(())
}
