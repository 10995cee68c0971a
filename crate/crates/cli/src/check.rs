//! Self-diagnostics on the configured problem.

use std::sync::Arc;

use dipiir::agents::{Agent, ExplicitDataAgent, ImplicitDataAgent, Touches, TvImageAgent};
use dipiir::ce::{reflect_g, AugmentedState, StackedState};
use dipiir::operators::{check_adjoint, make_incomplete_op, LinearOp, MiscaledAdjoint, SharedOp};
use dipiir::pipeline::{complete_data, Simulation};
use dipiir::priors::{Domain, GaussianDenoiser, TvConfig};
use dipiir::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckLine {
    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_state(rng: &mut ChaCha8Rng, image: usize, data: usize) -> AugmentedState {
    AugmentedState::new(random(rng, image), random(rng, data))
}

/// Largest change an agent made to a slice it must leave alone.
fn untouched_drift(agent: &dyn Agent, x: &AugmentedState) -> Result<f64> {
    let y = agent.apply(x)?;
    let drift = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(p, q)| {
                if p.to_bits() == q.to_bits() {
                    0.0
                } else {
                    (p - q).abs().max(f64::MIN_POSITIVE)
                }
            })
            .fold(0.0, f64::max)
    };
    Ok(match agent.touches() {
        Touches::ImageOnly => drift(&x.data, &y.data),
        Touches::DataOnly => drift(&x.image, &y.image),
        Touches::Both => 0.0,
    })
}

/// Computes every diagnostic without printing.
pub fn collect(cfg: &RunConfig) -> Result<Vec<CheckLine>> {
    let sim = Simulation::simulate(&cfg.problem)?;
    let s = &cfg.check;
    let (obs, unobs) = sim.operators()?;
    let obs: SharedOp = if s.corrupt_adjoint {
        Arc::new(MiscaledAdjoint::new(obs, 2.0))
    } else {
        obs
    };
    let block = make_incomplete_op(obs.clone(), unobs.clone())?;
    let mut lines = Vec::new();
    let ops: [&dyn LinearOp; 3] = [obs.as_ref(), unobs.as_ref(), &block];
    for op in ops {
        lines.push(CheckLine {
            name: format!("adjoint[{}]", op.label()),
            value: check_adjoint(op, s.trials, s.seed)?,
            tolerance: s.tolerance,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let (ni, nd) = (sim.image_len(), sim.data_len());
    let weights = cfg.params.ce.weights();
    let mut worst = 0.0f64;
    for _ in 0..s.trials.clamp(1, 10) {
        let st = StackedState::new(
            random_state(&mut rng, ni, nd),
            random_state(&mut rng, ni, nd),
            random_state(&mut rng, ni, nd),
        )?;
        let back = reflect_g(&reflect_g(&st, weights), weights);
        worst = worst.max(back.dist(&st) / st.norm());
    }
    lines.push(CheckLine {
        name: "involution[2G-I]".into(),
        value: worst,
        tolerance: 1e-12,
    });

    let ce = &cfg.params.ce;
    let v0 = complete_data(&sim, &cfg.params)?;
    let tv_cfg = TvConfig {
        max_iters: cfg.params.tv.max_iters.min(50),
        ..cfg.params.tv
    };
    let agents: Vec<Arc<dyn Agent>> = vec![
        Arc::new(ExplicitDataAgent {
            v0,
            lambda: ce.lambda_d(),
            nonneg: ce.nonneg_data(),
        }),
        Arc::new(ImplicitDataAgent {
            denoiser: Arc::new(GaussianDenoiser {
                shape: sim.data_shape(),
                sigma: cfg.params.data_sigma,
                domain: Domain::Data,
            }),
            nonneg: ce.nonneg_data(),
        }),
        Arc::new(
            TvImageAgent::new(sim.image_shape(), ce.lambda_i(), tv_cfg)?
                .with_nonneg(ce.nonneg_image()),
        ),
    ];
    for agent in agents {
        let mut drift = 0.0f64;
        for _ in 0..3 {
            drift = drift.max(untouched_drift(
                agent.as_ref(),
                &random_state(&mut rng, ni, nd),
            )?);
        }
        lines.push(CheckLine {
            name: format!("slices[{}]", agent.name()),
            value: drift,
            tolerance: 0.0,
        });
    }
    Ok(lines)
}

/// Prints one line per check; `Ok(false)` when any check fails.
pub fn run_checks(cfg: &RunConfig) -> Result<bool> {
    let lines = collect(cfg)?;
    let mut ok = true;
    for l in &lines {
        let verdict = if l.passed() { "PASS" } else { "FAIL" };
        ok &= l.passed();
        println!(
            "{verdict} {:<28} {:.3e} (tolerance {:.1e})",
            l.name, l.value, l.tolerance
        );
    }
    Ok(ok)
}
