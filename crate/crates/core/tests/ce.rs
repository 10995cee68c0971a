mod common;

use std::sync::Arc;

use dipiir::agents::{Agent, IdentityAgent, SensorAgent, SensorModel, Touches};
use dipiir::ce::*;
use dipiir::operators::{CgConfig, DenseOp};
use dipiir::Result;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use common::{max_abs_diff, rng, uniform};

/// Proximal map of `‖B v − c‖²` with strength `λ`, solved densely.
struct QuadProx {
    b: DMatrix<f64>,
    c: DVector<f64>,
    lambda: f64,
}

impl Agent for QuadProx {
    fn name(&self) -> &str {
        "quad"
    }
    fn touches(&self) -> Touches {
        Touches::Both
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        let n = self.b.ncols();
        let lhs = self.b.transpose() * &self.b + DMatrix::identity(n, n) * self.lambda;
        let rhs = self.b.transpose() * &self.c + DVector::from_vec(x.to_flat()) * self.lambda;
        let v = lhs.lu().solve(&rhs).unwrap();
        AugmentedState::from_flat(v.as_slice(), x.image.len())
    }
}

struct Toy {
    agents: AgentSet,
    mats: Vec<(DMatrix<f64>, DVector<f64>)>,
}

const TOY_LAMBDA: f64 = 1.0;

/// Three quadratics on a 2 + 2 augmented state. The sensor role goes through
/// the real CG-based sensor agent on a dense operator.
fn toy(seed: u64) -> Toy {
    let mut r = rng(seed);
    let mut mats = Vec::new();
    for _ in 0..3 {
        let b = DMatrix::from_row_slice(5, 4, &uniform(&mut r, 20, -1.0, 1.0));
        let c = DVector::from_vec(uniform(&mut r, 5, -1.0, 1.0));
        mats.push((b, c));
    }
    let (b0, c0) = &mats[0];
    let dense = DenseOp::new(5, 4, b0.transpose().as_slice().to_vec()).unwrap();
    let model = SensorModel::new(c0.as_slice().to_vec(), Arc::new(dense), vec![1.0; 5], 2).unwrap();
    let sensor = SensorAgent::new(model, TOY_LAMBDA).with_cg(CgConfig {
        max_iters: 50,
        rel_tol: 1e-15,
    });
    let prox = |k: usize| -> Arc<dyn Agent> {
        Arc::new(QuadProx {
            b: mats[k].0.clone(),
            c: mats[k].1.clone(),
            lambda: TOY_LAMBDA,
        })
    };
    let agents = AgentSet::new(Arc::new(sensor), prox(1), prox(2));
    Toy { agents, mats }
}

fn toy_minimizer(t: &Toy, mu: [f64; 3]) -> Vec<f64> {
    let mut lhs = DMatrix::zeros(4, 4);
    let mut rhs = DVector::zeros(4);
    for ((b, c), m) in t.mats.iter().zip(mu) {
        lhs += b.transpose() * b * m;
        rhs += b.transpose() * c * m;
    }
    lhs.lu().solve(&rhs).unwrap().as_slice().to_vec()
}

fn toy_config(mu: [f64; 3], iters: usize, tol: f64) -> CeConfig {
    CeConfig::builder()
        .weights(mu[0], mu[1], mu[2])
        .rho(0.5)
        .max_iters(iters)
        .residual_tol(tol)
        .lambdas(TOY_LAMBDA, TOY_LAMBDA, TOY_LAMBDA)
        .build()
        .unwrap()
}

fn random_stacked(seed: u64, ni: usize, nd: usize) -> StackedState {
    let mut r = rng(seed);
    let mut part = || {
        AugmentedState::new(
            uniform(&mut r, ni, -2.0, 2.0),
            uniform(&mut r, nd, -2.0, 2.0),
        )
    };
    StackedState::new(part(), part(), part()).unwrap()
}

#[test]
fn quadratic_toy_reaches_weighted_minimizer() {
    for (seed, mu) in [
        (1, [0.6, 0.2, 0.2]),
        (2, [0.45, 0.2, 0.35]),
        (3, [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
    ] {
        let t = toy(seed);
        let cfg = toy_config(mu, 200, 1e-14);
        let out = run_dipiir(random_stacked(seed, 2, 2), &t.agents, &cfg).unwrap();
        let exact = toy_minimizer(&t, mu);
        let err = max_abs_diff(&out.solution.to_flat(), &exact);
        assert!(
            err < 1e-6,
            "seed {seed}: {err} after {} iterations",
            out.trace.len()
        );
        assert!(out.trace.len() <= 200);
    }
}

#[test]
fn mann_differences_never_grow_in_weighted_norm() {
    let mu = [0.6, 0.2, 0.2];
    let t = toy(5);
    let cfg = toy_config(mu, 1, 0.0);
    let mut s = random_stacked(11, 2, 2);
    let mut diffs = Vec::new();
    for _ in 0..60 {
        let next = mann_step(&s, &t.agents, &cfg).unwrap();
        let d: f64 = AgentRole::ALL
            .iter()
            .map(|&r| mu[r.index()] * next.get(r).dist(s.get(r)).powi(2))
            .sum::<f64>()
            .sqrt();
        diffs.push(d);
        s = next;
    }
    for (k, pair) in diffs.windows(2).enumerate().skip(1) {
        assert!(pair[1] <= pair[0] + 1e-10, "iteration {}: {pair:?}", k + 1);
    }
}

#[test]
fn equilibrium_gaps_vanish_at_convergence() {
    let mu = [0.6, 0.2, 0.2];
    let t = toy(8);
    let cfg = toy_config(mu, 200, 1e-14);
    let out = run_dipiir(random_stacked(3, 2, 2), &t.agents, &cfg).unwrap();
    // The CE variables are the reflected iterate, whose average is the solution.
    let v = reflect_g(&out.final_state, cfg.weights());
    let gaps = consensus_gap(&v, &t.agents, &cfg).unwrap();
    assert!(gaps.iter().all(|g| *g < 1e-6), "{gaps:?}");
    let last = out.trace.last().unwrap();
    assert!(last.gaps.iter().all(|g| *g < 1e-6), "{:?}", last.gaps);
    assert_eq!(
        consensus_gap(&v, &t.agents, &cfg).unwrap(),
        consensus_gap(&v, &t.agents, &cfg).unwrap()
    );
}

#[test]
fn solution_is_average_of_final_state() {
    let t = toy(4);
    let cfg = toy_config([0.5, 0.3, 0.2], 7, 0.0);
    let out = run_dipiir(random_stacked(9, 2, 2), &t.agents, &cfg).unwrap();
    assert_eq!(
        out.solution,
        weighted_average(&out.final_state, cfg.weights())
    );
    assert_eq!(out.trace.len(), 7);
}

#[test]
fn identity_agents_reach_consensus_in_one_step() {
    let id: Arc<dyn Agent> = Arc::new(IdentityAgent);
    let agents = AgentSet::new(id.clone(), id.clone(), id);
    let cfg = CeConfig::builder().max_iters(3).build().unwrap();
    let init = random_stacked(2, 3, 2);
    let avg = weighted_average(&init, cfg.weights());
    let out = run_dipiir(init, &agents, &cfg).unwrap();
    assert!(max_abs_diff(&out.solution.to_flat(), &avg.to_flat()) < 1e-12);
    let gaps = consensus_gap(&StackedState::replicate(avg), &agents, &cfg).unwrap();
    assert_eq!(gaps, [0.0; 3]);
}

#[test]
fn default_budget_is_four_iterations() {
    assert_eq!(CeConfig::builder().build().unwrap().max_iters(), 4);
}

#[test]
fn trace_csv_has_documented_columns() {
    let t = toy(1);
    let cfg = toy_config([0.6, 0.2, 0.2], 3, 0.0);
    let out = run_dipiir(random_stacked(1, 2, 2), &t.agents, &cfg).unwrap();
    let csv = out.trace.to_csv();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "iter,mann_residual,gap_s,gap_d,gap_i,psnr"
    );
    assert_eq!(lines.count(), 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reflection_is_an_involution(seed in any::<u64>(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let total = a + b + 1.0;
        let w = Weights::new(a / total, b / total, 1.0 - (a + b) / total).unwrap();
        let s = random_stacked(seed, 5, 3);
        let back = reflect_g(&reflect_g(&s, &w), &w);
        for role in AgentRole::ALL {
            prop_assert!(max_abs_diff(&back.get(role).to_flat(), &s.get(role).to_flat()) < 1e-12);
        }
        let g = apply_g(&s, &w);
        prop_assert_eq!(apply_g(&g, &w), g);
    }

    #[test]
    fn averaging_respects_permutation(seed in any::<u64>(), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let total = a + b + 1.0;
        let mu = [a / total, b / total, 1.0 - (a + b) / total];
        let s = random_stacked(seed, 4, 2);
        let [xs, xd, xi] = s.clone().into_parts();
        let swapped = StackedState::new(xi, xs, xd).unwrap();
        let w1 = Weights::new(mu[0], mu[1], mu[2]).unwrap();
        let w2 = Weights::new(mu[2], mu[0], mu[1]).unwrap();
        let p = weighted_average(&s, &w1).to_flat();
        let q = weighted_average(&swapped, &w2).to_flat();
        prop_assert!(max_abs_diff(&p, &q) < 1e-12);
    }
}
