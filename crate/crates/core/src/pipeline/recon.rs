use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use super::problem::{Acquisition, ProblemKind, Simulation};
use crate::agents::{
    Agent, CountingAgent, ExplicitDataAgent, ImageAgent, ImplicitDataAgent, SensorAgent,
    TvImageAgent,
};
use crate::ce::{
    run_dipiir_scored, AgentSet, AugmentedState, CeConfig, ConvergenceTrace, ImageScore,
    StackedState,
};
use crate::error::{Error, Result};
use crate::operators::CgConfig;
use crate::priors::{
    gaussian_denoise, kspace_complete, sinogram_complete, Denoiser, Domain, GaussianDenoiser,
    GridShape, PluginDenoiser, PluginSpec, TvConfig,
};
use crate::simdata::MetricsReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PipelineKind {
    Fbp,
    Ift,
    DcFbp,
    DcIft,
    PnpMbir,
    DipiirExplicit,
    DipiirImplicit,
}

impl PipelineKind {
    pub const ALL: [PipelineKind; 7] = [
        PipelineKind::Fbp,
        PipelineKind::Ift,
        PipelineKind::DcFbp,
        PipelineKind::DcIft,
        PipelineKind::PnpMbir,
        PipelineKind::DipiirExplicit,
        PipelineKind::DipiirImplicit,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::Fbp => "fbp",
            PipelineKind::Ift => "ift",
            PipelineKind::DcFbp => "dc-fbp",
            PipelineKind::DcIft => "dc-ift",
            PipelineKind::PnpMbir => "pnp-mbir",
            PipelineKind::DipiirExplicit => "dipiir-explicit",
            PipelineKind::DipiirImplicit => "dipiir-implicit",
        }
    }

    pub fn is_iterative(self) -> bool {
        matches!(
            self,
            PipelineKind::PnpMbir | PipelineKind::DipiirExplicit | PipelineKind::DipiirImplicit
        )
    }

    pub fn supports(self, problem: ProblemKind) -> bool {
        match self {
            PipelineKind::Fbp | PipelineKind::DcFbp => problem == ProblemKind::CtLimited,
            PipelineKind::Ift | PipelineKind::DcIft => problem == ProblemKind::MriAccel,
            _ => true,
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PipelineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PipelineKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown pipeline `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImagePrior {
    Tv,
    Gaussian,
}

impl FromStr for ImagePrior {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tv" => Ok(ImagePrior::Tv),
            "gaussian" => Ok(ImagePrior::Gaussian),
            other => Err(Error::config(format!("unknown image prior `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Analytic inversion of the completed data, data slice `A_unobs` of it.
    Completed,
    /// Analytic inversion of the zero-filled data.
    ZeroFill,
    Zeros,
}

impl FromStr for InitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "completed" => Ok(InitKind::Completed),
            "zero-fill" => Ok(InitKind::ZeroFill),
            "zeros" => Ok(InitKind::Zeros),
            other => Err(Error::config(format!("unknown initialization `{other}`"))),
        }
    }
}

/// Solver, prior and initialization settings of a reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconParams {
    pub ce: CeConfig,
    pub cg: CgConfig,
    pub tv: TvConfig,
    pub image_prior: ImagePrior,
    /// Width of the Gaussian image denoiser.
    pub image_sigma: f64,
    /// Width of the Gaussian data denoiser of the implicit data agent.
    pub data_sigma: f64,
    /// Smoothing used to complete blur-problem data.
    pub completion_sigma: f64,
    /// `None` picks the per-pipeline default.
    pub init: Option<InitKind>,
    pub image_plugin: Option<PluginSpec>,
    pub data_plugin: Option<PluginSpec>,
}

impl ReconParams {
    pub fn new(ce: CeConfig) -> Self {
        Self {
            ce,
            cg: CgConfig::default(),
            tv: TvConfig::default(),
            image_prior: ImagePrior::Tv,
            image_sigma: 1.0,
            data_sigma: 1.0,
            completion_sigma: 1.0,
            init: None,
            image_plugin: None,
            data_plugin: None,
        }
    }

    /// Shipped settings for a problem and pipeline.
    pub fn preset(problem: ProblemKind, pipeline: PipelineKind) -> Self {
        let b = CeConfig::builder();
        let b = match (problem, pipeline) {
            (ProblemKind::CtLimited, PipelineKind::DipiirImplicit) => b
                .rho(0.35)
                .weights(0.65, 0.20, 0.15)
                .lambdas(CT_LAMBDA_S, 3.33, CT_LAMBDA_I)
                .nonneg(true, true),
            (ProblemKind::CtLimited, _) => b
                .rho(0.5)
                .weights(0.6, 0.2, 0.2)
                .lambdas(CT_LAMBDA_S, CT_LAMBDA_D, CT_LAMBDA_I)
                .nonneg(true, true),
            (ProblemKind::MriAccel, _) => {
                b.rho(0.45)
                    .weights(0.45, 0.20, 0.35)
                    .lambdas(MRI_LAMBDA_S, 1.0, MRI_LAMBDA_I)
            }
            _ => b.lambdas(1.0, 1.0, 4.0).nonneg(true, true),
        };
        let ce = b.build().expect("preset is valid");
        let mut p = Self::new(ce);
        match problem {
            ProblemKind::CtLimited => {
                p.data_sigma = CT_DATA_SIGMA;
            }
            ProblemKind::MriAccel => {
                p.data_sigma = MRI_DATA_SIGMA;
            }
            _ => {}
        }
        p
    }
}

// Proximal strengths at phantom scale (unit field of view, unit intensities).
const CT_LAMBDA_S: f64 = 0.5;
const CT_LAMBDA_D: f64 = 2.0;
const CT_LAMBDA_I: f64 = 2.0;
const CT_DATA_SIGMA: f64 = 1.0;
const MRI_LAMBDA_S: f64 = 0.05;
const MRI_LAMBDA_I: f64 = 0.25;
const MRI_DATA_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ReconOutput {
    pub pipeline: PipelineKind,
    /// Reconstruction layout (two planes for MRI).
    pub image: Vec<f64>,
    /// Estimated missing data, for pipelines that produce it.
    pub data: Option<Vec<f64>>,
    pub trace: Option<ConvergenceTrace>,
    pub metrics: Option<MetricsReport>,
    pub timings: Vec<StageTiming>,
    pub data_agent_calls: Option<usize>,
    pub tv_nonconverged_calls: usize,
}

struct Stopwatch(Vec<StageTiming>);

impl Stopwatch {
    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{stage}: {msg}")),
            Error::Numeric(msg) => Error::Numeric(format!("{stage}: {msg}")),
            Error::Shape(msg) => Error::Shape(format!("{stage}: {msg}")),
            other => other,
        })?;
        self.0.push(StageTiming {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

fn upsample_nearest(low: &[f64], low_side: usize, factor: usize) -> Vec<f64> {
    let side = low_side * factor;
    let mut out = vec![0.0; side * side];
    for i in 0..side {
        for j in 0..side {
            out[i * side + j] = low[(i / factor) * low_side + j / factor];
        }
    }
    out
}

/// Estimate of the missing data computed from the observations alone.
pub fn complete_data(sim: &Simulation, params: &ReconParams) -> Result<Vec<f64>> {
    let n = sim.side();
    match &sim.acquisition {
        Acquisition::Ct { full, num_observed } => {
            sinogram_complete(&sim.observed, full, *num_observed)
        }
        Acquisition::Mri { mask } => {
            let zero_filled = sim.assemble(&sim.observed, &vec![0.0; sim.data_len()])?;
            kspace_complete(&zero_filled, mask)
        }
        Acquisition::Deblur { .. } => {
            gaussian_denoise(&sim.observed, GridShape::square(n), params.completion_sigma)
        }
        Acquisition::Superres { factor, .. } => {
            let up = upsample_nearest(&sim.observed, n / factor, *factor);
            gaussian_denoise(&up, GridShape::square(n), params.completion_sigma)
        }
    }
}

/// Analytic inversion with the missing data set to zero.
pub fn zero_fill_inversion(sim: &Simulation) -> Result<Vec<f64>> {
    match &sim.acquisition {
        Acquisition::Deblur { .. } => Ok(sim.observed.clone()),
        Acquisition::Superres { factor, .. } => Ok(upsample_nearest(
            &sim.observed,
            sim.side() / factor,
            *factor,
        )),
        _ => sim.invert(&sim.assemble(&sim.observed, &vec![0.0; sim.data_len()])?),
    }
}

type ImageAgents = (Arc<dyn Agent>, Option<Arc<TvImageAgent>>);

fn image_denoiser(sim: &Simulation, params: &ReconParams) -> Result<ImageAgents> {
    let nonneg = params.ce.nonneg_image();
    if let Some(spec) = &params.image_plugin {
        let mut spec = spec.clone();
        spec.expected_len = sim.image_len();
        spec.dims = Some(sim.image_shape().dims());
        let d: Arc<dyn Denoiser> = Arc::new(PluginDenoiser {
            spec,
            domain: Domain::Image,
        });
        return Ok((
            Arc::new(ImageAgent {
                denoiser: d,
                nonneg,
            }),
            None,
        ));
    }
    Ok(match params.image_prior {
        ImagePrior::Tv => {
            let tv = Arc::new(
                TvImageAgent::new(sim.image_shape(), params.ce.lambda_i(), params.tv)?
                    .with_nonneg(nonneg),
            );
            (tv.clone(), Some(tv))
        }
        ImagePrior::Gaussian => {
            let agent = Arc::new(ImageAgent {
                denoiser: Arc::new(GaussianDenoiser {
                    shape: sim.image_shape(),
                    sigma: params.image_sigma,
                    domain: Domain::Image,
                }),
                nonneg,
            });
            (agent, None)
        }
    })
}

fn data_denoiser(sim: &Simulation, params: &ReconParams) -> Arc<dyn Denoiser> {
    match &params.data_plugin {
        Some(spec) => {
            let mut spec = spec.clone();
            spec.expected_len = sim.data_len();
            spec.dims = Some(sim.data_shape().dims());
            Arc::new(PluginDenoiser {
                spec,
                domain: Domain::Data,
            })
        }
        None => Arc::new(GaussianDenoiser {
            shape: sim.data_shape(),
            sigma: params.data_sigma,
            domain: Domain::Data,
        }),
    }
}

/// Runs one pipeline on a problem instance.
pub fn reconstruct(
    sim: &Simulation,
    pipeline: PipelineKind,
    params: &ReconParams,
) -> Result<ReconOutput> {
    if !pipeline.supports(sim.spec.kind) {
        return Err(Error::config(format!(
            "pipeline {pipeline} does not apply to problem {}",
            sim.spec.kind
        )));
    }
    let mut clock = Stopwatch(Vec::new());
    let mut out = ReconOutput {
        pipeline,
        image: Vec::new(),
        data: None,
        trace: None,
        metrics: None,
        timings: Vec::new(),
        data_agent_calls: None,
        tv_nonconverged_calls: 0,
    };

    match pipeline {
        PipelineKind::Fbp | PipelineKind::Ift => {
            out.image = clock.time("inversion", || zero_fill_inversion(sim))?;
            out.data = Some(vec![0.0; sim.data_len()]);
        }
        PipelineKind::DcFbp | PipelineKind::DcIft => {
            let v0 = clock.time("completion", || complete_data(sim, params))?;
            out.image = clock.time("inversion", || {
                sim.invert(&sim.assemble(&sim.observed, &v0)?)
            })?;
            out.data = Some(v0);
        }
        _ => run_ce(sim, pipeline, params, &mut clock, &mut out)?,
    }

    if let Some(truth) = &sim.truth {
        let shown = sim.display_image(&out.image);
        out.metrics = Some(MetricsReport::compute(
            &shown,
            truth,
            sim.side(),
            sim.side(),
        )?);
    }
    out.timings = clock.0;
    Ok(out)
}

fn run_ce(
    sim: &Simulation,
    pipeline: PipelineKind,
    params: &ReconParams,
    clock: &mut Stopwatch,
    out: &mut ReconOutput,
) -> Result<()> {
    let model = clock.time("sensor-model", || sim.sensor_model())?;
    let (_, a_unobs) = sim.operators()?;
    let v0 = clock.time("completion", || complete_data(sim, params))?;

    let default_init = if pipeline == PipelineKind::PnpMbir {
        InitKind::ZeroFill
    } else {
        InitKind::Completed
    };
    let init = clock.time("initialization", || -> Result<AugmentedState> {
        let image = match params.init.unwrap_or(default_init) {
            InitKind::Zeros => return Ok(AugmentedState::zeros(sim.image_len(), sim.data_len())),
            InitKind::ZeroFill => zero_fill_inversion(sim)?,
            InitKind::Completed => match &sim.acquisition {
                Acquisition::Deblur { .. } | Acquisition::Superres { .. } => v0.clone(),
                _ => sim.invert(&sim.assemble(&sim.observed, &v0)?)?,
            },
        };
        let data = a_unobs.apply(&image)?;
        Ok(AugmentedState::new(image, data))
    })?;

    let ce = if pipeline == PipelineKind::PnpMbir {
        let w = params.ce.weights();
        let total = w.sensor + w.image;
        params
            .ce
            .to_builder()
            .weights(w.sensor / total, 0.0, w.image / total)
            .build()?
    } else {
        params.ce.clone()
    };

    let sensor: Arc<dyn Agent> = Arc::new(
        SensorAgent::new(model, ce.lambda_s())
            .with_cg(params.cg)
            .with_nonneg(ce.nonneg_image(), ce.nonneg_data()),
    );
    let data_inner: Arc<dyn Agent> = match pipeline {
        PipelineKind::DipiirImplicit => Arc::new(ImplicitDataAgent {
            denoiser: data_denoiser(sim, params),
            nonneg: ce.nonneg_data(),
        }),
        _ => Arc::new(ExplicitDataAgent {
            v0: v0.clone(),
            lambda: ce.lambda_d(),
            nonneg: ce.nonneg_data(),
        }),
    };
    let data = Arc::new(CountingAgent::new(data_inner));
    let (image, tv) = image_denoiser(sim, params)?;
    let agents = AgentSet::new(sensor, data.clone(), image);

    let score = |img: &[f64]| sim.psnr(img).unwrap_or(f64::NAN);
    let scored: Option<ImageScore<'_>> = if sim.truth.is_some() {
        Some(&score)
    } else {
        None
    };
    let outcome = clock.time("consensus", || {
        run_dipiir_scored(StackedState::replicate(init), &agents, &ce, scored)
    })?;

    out.image = outcome.solution.image;
    out.data = Some(outcome.solution.data);
    out.trace = Some(outcome.trace);
    out.data_agent_calls = Some(data.calls());
    out.tv_nonconverged_calls = tv.map_or(0, |t| t.nonconverged_calls());
    Ok(())
}
