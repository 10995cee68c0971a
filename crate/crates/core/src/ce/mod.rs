//! Consensus equilibrium: the averaging operator `G`, the stacked agent map
//! `F`, and Mann iterations on `T = (2F − I)(2G − I)`.
//!
//! A fixed point `w*` of `T` is not itself the set of per-agent variables of
//! the equilibrium equations; those are `v* = (2G − I) w*`, which satisfy
//! `F_j(v*_j) = ⟨w*⟩` for every agent. Reported consensus gaps are therefore
//! measured at the reflected point.

mod config;
mod state;
mod trace;

use std::sync::Arc;

use crate::agents::Agent;
use crate::error::{Error, Result};

pub use config::{CeConfig, CeConfigBuilder, Weights};
pub use state::{AgentRole, AugmentedState, StackedState};
pub use trace::{ConvergenceTrace, IterationRecord};

/// The sensor, data-prior and image-prior agents.
#[derive(Clone)]
pub struct AgentSet {
    agents: [Arc<dyn Agent>; 3],
}

impl AgentSet {
    pub fn new(sensor: Arc<dyn Agent>, data: Arc<dyn Agent>, image: Arc<dyn Agent>) -> Self {
        Self {
            agents: [sensor, data, image],
        }
    }

    pub fn get(&self, role: AgentRole) -> &Arc<dyn Agent> {
        &self.agents[role.index()]
    }
}

/// `⟨x⟩ = μ_s x_s + μ_d x_d + μ_i x_i`.
///
/// Evaluated as `x_s + μ_d(x_d − x_s) + μ_i(x_i − x_s)`, which uses that the
/// weights sum to one and returns a consensus input bit-for-bit.
pub fn weighted_average(s: &StackedState, weights: &Weights) -> AugmentedState {
    let [xs, xd, xi] = s.parts();
    let mu_d = weights.get(AgentRole::Data);
    let mu_i = weights.get(AgentRole::Image);
    let mix = |a: &[f64], d: &[f64], i: &[f64]| -> Vec<f64> {
        a.iter()
            .zip(d)
            .zip(i)
            .map(|((a, d), i)| a + mu_d * (d - a) + mu_i * (i - a))
            .collect()
    };
    AugmentedState::new(
        mix(&xs.image, &xd.image, &xi.image),
        mix(&xs.data, &xd.data, &xi.data),
    )
}

/// `G(s)`: every component replaced by the weighted average.
pub fn apply_g(s: &StackedState, weights: &Weights) -> StackedState {
    StackedState::replicate(weighted_average(s, weights))
}

/// `(2G − I)(s)`.
pub fn reflect_g(s: &StackedState, weights: &Weights) -> StackedState {
    reflect_about(s, &weighted_average(s, weights))
}

fn reflect_about(s: &StackedState, avg: &AugmentedState) -> StackedState {
    let parts = s.parts().clone().map(|mut p| {
        p.combine(-1.0, 2.0, avg);
        p
    });
    StackedState::from_parts_unchecked(parts)
}

fn run_agent(agent: &dyn Agent, x: &AugmentedState) -> Result<AugmentedState> {
    let out = agent.apply(x).map_err(|e| match e {
        e @ Error::Agent { .. } => e,
        e => e.in_agent(agent.name()),
    })?;
    if out.dims() != x.dims() {
        return Err(Error::shape(format!(
            "agent changed state dimensions from {:?} to {:?}",
            x.dims(),
            out.dims()
        ))
        .in_agent(agent.name()));
    }
    Ok(out)
}

/// `F(s) = (F_s(x_s), F_d(x_d), F_i(x_i))`, evaluated concurrently.
///
/// An agent whose weight is exactly zero cannot influence the consensus and
/// is not evaluated; its component passes through unchanged.
pub fn apply_f(s: &StackedState, agents: &AgentSet, weights: &Weights) -> Result<StackedState> {
    let eval = |role: AgentRole| -> Result<AugmentedState> {
        let x = s.get(role);
        if weights.get(role) == 0.0 {
            Ok(x.clone())
        } else {
            run_agent(agents.get(role).as_ref(), x)
        }
    };
    let (fs, (fd, fi)) = rayon::join(
        || eval(AgentRole::Sensor),
        || rayon::join(|| eval(AgentRole::Data), || eval(AgentRole::Image)),
    );
    StackedState::new(fs?, fd?, fi?)
}

struct StepOutput {
    next: StackedState,
    gaps: [f64; 3],
}

fn mann_step_inner(s: &StackedState, agents: &AgentSet, cfg: &CeConfig) -> Result<StepOutput> {
    let weights = cfg.weights();
    let rho = cfg.rho();
    let avg = weighted_average(s, weights);
    // v ← 2G(x) − x
    let v = reflect_about(s, &avg);
    let fv = apply_f(&v, agents, weights)?;
    let mut gaps = [0.0; 3];
    for role in AgentRole::ALL {
        gaps[role.index()] = fv.get(role).dist(&avg);
    }
    // z ← 2F(v) − v ; x ← (1 − ρ)x + ρz
    let mut next = s.clone();
    for role in AgentRole::ALL {
        let mut z = fv.get(role).clone();
        z.combine(2.0, -1.0, v.get(role));
        next.get_mut(role).combine(1.0 - rho, rho, &z);
    }
    Ok(StepOutput { next, gaps })
}

/// One Mann update `(1 − ρ)s + ρ(2F − I)(2G − I)s`.
pub fn mann_step(s: &StackedState, agents: &AgentSet, cfg: &CeConfig) -> Result<StackedState> {
    mann_step_inner(s, agents, cfg).map(|o| o.next)
}

/// `‖F_j(x_j) − ⟨s⟩‖` for each agent, treating `s` as the per-agent
/// equilibrium variables.
pub fn consensus_gap(s: &StackedState, agents: &AgentSet, cfg: &CeConfig) -> Result<[f64; 3]> {
    let avg = weighted_average(s, cfg.weights());
    let fs = apply_f(s, agents, cfg.weights())?;
    let mut gaps = [0.0; 3];
    for role in AgentRole::ALL {
        gaps[role.index()] = fs.get(role).dist(&avg);
    }
    Ok(gaps)
}

#[derive(Debug, Clone)]
pub struct CeOutcome {
    /// `⟨x⁽ᵏ⁾⟩` of the final iterate: reconstruction and estimated data.
    pub solution: AugmentedState,
    pub final_state: StackedState,
    pub trace: ConvergenceTrace,
}

/// Image-slice quality measure recorded in the trace.
pub type ImageScore<'a> = &'a (dyn Fn(&[f64]) -> f64 + Sync);

/// Iterates [`mann_step`] until `max_iters` steps or a relative Mann residual
/// below `residual_tol`.
pub fn run_dipiir(init: StackedState, agents: &AgentSet, cfg: &CeConfig) -> Result<CeOutcome> {
    run_dipiir_scored(init, agents, cfg, None)
}

pub fn run_dipiir_scored(
    init: StackedState,
    agents: &AgentSet,
    cfg: &CeConfig,
    score: Option<ImageScore<'_>>,
) -> Result<CeOutcome> {
    if !init.is_finite() {
        return Err(Error::numeric("initial stacked state is not finite"));
    }
    let mut state = init;
    let mut trace = ConvergenceTrace::default();
    for k in 1..=cfg.max_iters() {
        let step = mann_step_inner(&state, agents, cfg)?;
        if !step.next.is_finite() {
            return Err(Error::numeric(format!(
                "consensus iterate became non-finite at iteration {k}"
            )));
        }
        let denom = state.norm();
        let diff = step.next.dist(&state);
        let residual = if denom > 0.0 { diff / denom } else { diff };
        state = step.next;
        let psnr = score.map(|f| f(&weighted_average(&state, cfg.weights()).image));
        trace.records.push(IterationRecord {
            iter: k,
            mann_residual: residual,
            gaps: step.gaps,
            psnr,
        });
        if residual < cfg.residual_tol() {
            break;
        }
    }
    let solution = weighted_average(&state, cfg.weights());
    Ok(CeOutcome {
        solution,
        final_state: state,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{IdentityAgent, Touches};

    fn scalar(v: f64) -> AugmentedState {
        AugmentedState::new(vec![v], vec![])
    }

    fn identity_agents() -> AgentSet {
        let id: Arc<dyn Agent> = Arc::new(IdentityAgent);
        AgentSet::new(id.clone(), id.clone(), id)
    }

    struct Shift(f64);

    impl Agent for Shift {
        fn name(&self) -> &str {
            "shift"
        }
        fn touches(&self) -> Touches {
            Touches::ImageOnly
        }
        fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
            Ok(AugmentedState::new(
                x.image.iter().map(|v| v + self.0).collect(),
                x.data.clone(),
            ))
        }
    }

    struct Failing;

    impl Agent for Failing {
        fn name(&self) -> &str {
            "broken"
        }
        fn touches(&self) -> Touches {
            Touches::Both
        }
        fn apply(&self, _: &AugmentedState) -> Result<AugmentedState> {
            Err(Error::Numeric("boom".into()))
        }
    }

    #[test]
    fn weighted_average_of_scalars() {
        let w = Weights::new(0.6, 0.2, 0.2).unwrap();
        let s = StackedState::new(scalar(10.0), scalar(0.0), scalar(0.0)).unwrap();
        assert!((weighted_average(&s, &w).image[0] - 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_weight_picks_sensor() {
        let w = Weights::new(1.0, 0.0, 0.0).unwrap();
        let s = StackedState::new(scalar(3.5), scalar(-1.0), scalar(7.0)).unwrap();
        assert_eq!(weighted_average(&s, &w), scalar(3.5));
    }

    #[test]
    fn consensus_input_is_fixed_by_g() {
        let w = Weights::new(0.3, 0.3, 0.4).unwrap();
        let x = AugmentedState::new(vec![1.5, -2.0], vec![0.25]);
        let s = StackedState::replicate(x.clone());
        assert_eq!(weighted_average(&s, &w), x);
        assert_eq!(apply_g(&s, &w), s);
    }

    #[test]
    fn identity_agents_keep_consensus_fixed() {
        let cfg = CeConfig::builder().build().unwrap();
        let s = StackedState::replicate(AugmentedState::new(vec![1.0, 2.0], vec![3.0]));
        let next = mann_step(&s, &identity_agents(), &cfg).unwrap();
        assert_eq!(next, s);
        let out = run_dipiir(s.clone(), &identity_agents(), &cfg).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace.records[0].mann_residual, 0.0);
        assert_eq!(out.trace.records[0].gaps, [0.0; 3]);
        assert_eq!(out.solution, weighted_average(&s, cfg.weights()));
    }

    #[test]
    fn agent_failure_names_agent() {
        let cfg = CeConfig::builder().build().unwrap();
        let id: Arc<dyn Agent> = Arc::new(IdentityAgent);
        let agents = AgentSet::new(id.clone(), Arc::new(Failing), id);
        let s = StackedState::replicate(scalar(1.0));
        match mann_step(&s, &agents, &cfg) {
            Err(Error::Agent { agent, .. }) => assert_eq!(agent, "broken"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_weight_agent_not_evaluated() {
        let cfg = CeConfig::builder().weights(0.5, 0.0, 0.5).build().unwrap();
        let id: Arc<dyn Agent> = Arc::new(IdentityAgent);
        let agents = AgentSet::new(id.clone(), Arc::new(Failing), id);
        let s = StackedState::replicate(scalar(1.0));
        assert!(run_dipiir(s, &agents, &cfg).is_ok());
    }

    #[test]
    fn non_finite_init_rejected() {
        let cfg = CeConfig::builder().build().unwrap();
        let s = StackedState::replicate(scalar(f64::NAN));
        assert!(matches!(
            run_dipiir(s, &identity_agents(), &cfg),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn divergence_reports_iteration() {
        let cfg = CeConfig::builder().max_iters(50).build().unwrap();
        let id: Arc<dyn Agent> = Arc::new(IdentityAgent);
        let agents = AgentSet::new(Arc::new(Shift(f64::MAX)), id.clone(), id);
        let s = StackedState::replicate(scalar(0.0));
        match run_dipiir(s, &agents, &cfg) {
            Err(Error::Numeric(msg)) => assert!(msg.contains("iteration"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn one_step_matches_hand_unrolled_update() {
        // Scalar state; agents: F_s(x) = x + 1, F_d = F_i = identity.
        let cfg = CeConfig::builder()
            .weights(0.5, 0.25, 0.25)
            .rho(0.4)
            .build()
            .unwrap();
        let id: Arc<dyn Agent> = Arc::new(IdentityAgent);
        let agents = AgentSet::new(Arc::new(Shift(1.0)), id.clone(), id);
        let s = StackedState::new(scalar(2.0), scalar(4.0), scalar(-4.0)).unwrap();
        // ⟨x⟩ = 1 + 1 − 1 = 1; v = (0, −2, 6); F(v) = (1, −2, 6);
        // z = 2F(v) − v = (2, −2, 6); x' = 0.6x + 0.4z = (2.0, 1.6, 0.0).
        let next = mann_step(&s, &agents, &cfg).unwrap();
        let got: Vec<f64> = next.parts().iter().map(|p| p.image[0]).collect();
        for (g, e) in got.iter().zip([2.0, 1.6, 0.0]) {
            assert!((g - e).abs() < 1e-14, "{got:?}");
        }
    }
}
