//! Sensor, data-prior and image-prior agents acting on augmented states.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use crate::ce::AugmentedState;
use crate::error::{ensure_len, Error, Result};
use crate::operators::{
    cg_least_squares, make_incomplete_op, BlockIncompleteOp, CgConfig, ComposedOp, LinearOp,
    SharedOp,
};
use crate::priors::{tv_denoise, Denoiser, GridShape, TvConfig};

/// Which slices of the augmented state an agent may change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Touches {
    Both,
    ImageOnly,
    DataOnly,
}

pub trait Agent: Send + Sync {
    fn name(&self) -> &str;
    fn touches(&self) -> Touches;
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityAgent;

impl Agent for IdentityAgent {
    fn name(&self) -> &str {
        "identity"
    }
    fn touches(&self) -> Touches {
        Touches::Both
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        Ok(x.clone())
    }
}

/// Forwards to another agent and counts invocations.
pub struct CountingAgent {
    inner: Arc<dyn Agent>,
    calls: AtomicUsize,
}

impl CountingAgent {
    pub fn new(inner: Arc<dyn Agent>) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }
}

impl Agent for CountingAgent {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn touches(&self) -> Touches {
        self.inner.touches()
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.apply(x)
    }
}

fn clamp_nonneg(v: &mut [f64]) {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Observations, forward model over the augmented state and diagonal data
/// weights.
#[derive(Clone)]
pub struct SensorModel {
    y: Vec<f64>,
    op: SharedOp,
    weights: Vec<f64>,
    image_len: usize,
}

impl std::fmt::Debug for SensorModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SensorModel")
            .field("op", &self.op.label())
            .field("y_len", &self.y.len())
            .field("image_len", &self.image_len)
            .finish()
    }
}

impl SensorModel {
    pub fn new(y: Vec<f64>, op: SharedOp, weights: Vec<f64>, image_len: usize) -> Result<Self> {
        ensure_len("sensor observations", y.len(), op.output_len())?;
        ensure_len("sensor weights", weights.len(), op.output_len())?;
        if image_len > op.input_len() {
            return Err(Error::shape(format!(
                "image length {image_len} exceeds sensor input length {}",
                op.input_len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::config(
                "sensor weights must be finite and non-negative",
            ));
        }
        Ok(Self {
            y,
            op,
            weights,
            image_len,
        })
    }

    /// Incomplete-data model: `y = (y_obs; 0)` and unit weights.
    pub fn incomplete(y_obs: Vec<f64>, block: BlockIncompleteOp) -> Result<Self> {
        ensure_len("observed data", y_obs.len(), block.observed_len())?;
        let image_len = block.image_len();
        let mut y = y_obs;
        y.resize(LinearOp::output_len(&block), 0.0);
        let weights = vec![1.0; y.len()];
        Self::new(y, Arc::new(block), weights, image_len)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        ensure_len("sensor weights", weights.len(), self.y.len())?;
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::config(
                "sensor weights must be finite and non-negative",
            ));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn op(&self) -> &SharedOp {
        &self.op
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn image_len(&self) -> usize {
        self.image_len
    }
    pub fn data_len(&self) -> usize {
        self.op.input_len() - self.image_len
    }
}

/// Deblurring: `y = (y_noisy; 0)`, `A = [[B, 0], [B, −I]]`.
pub fn make_deblur_sensor_model(y_noisy: Vec<f64>, blur: SharedOp) -> Result<SensorModel> {
    if blur.input_len() != blur.output_len() {
        return Err(Error::shape(format!(
            "blur operator {} is not square",
            blur.label()
        )));
    }
    SensorModel::incomplete(y_noisy, make_incomplete_op(blur.clone(), blur)?)
}

/// Super-resolution: `y = (y_lowres; 0)`, `A = [[S·B, 0], [B, −I]]`.
pub fn make_superres_sensor_model(
    y_lowres: Vec<f64>,
    blur: SharedOp,
    sub: SharedOp,
) -> Result<SensorModel> {
    let observed: SharedOp = Arc::new(ComposedOp::new(sub, blur.clone())?);
    SensorModel::incomplete(y_lowres, make_incomplete_op(observed, blur)?)
}

/// Proximal map of the weighted data fit, solved with CG warm-started at the
/// anchor, then clamped per slice.
pub struct SensorAgent {
    pub model: SensorModel,
    pub lambda: f64,
    pub cg: CgConfig,
    pub nonneg_image: bool,
    pub nonneg_data: bool,
}

impl SensorAgent {
    pub fn new(model: SensorModel, lambda: f64) -> Self {
        Self {
            model,
            lambda,
            cg: CgConfig::default(),
            nonneg_image: false,
            nonneg_data: false,
        }
    }

    pub fn with_cg(mut self, cg: CgConfig) -> Self {
        self.cg = cg;
        self
    }

    pub fn with_nonneg(mut self, image: bool, data: bool) -> Self {
        self.nonneg_image = image;
        self.nonneg_data = data;
        self
    }
}

impl Agent for SensorAgent {
    fn name(&self) -> &str {
        "sensor"
    }
    fn touches(&self) -> Touches {
        Touches::Both
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        sensor_agent(
            x,
            &self.model,
            self.lambda,
            &self.cg,
            self.nonneg_image,
            self.nonneg_data,
        )
    }
}

pub fn sensor_agent(
    x_s: &AugmentedState,
    model: &SensorModel,
    lambda_s: f64,
    cg: &CgConfig,
    nonneg_image: bool,
    nonneg_data: bool,
) -> Result<AugmentedState> {
    let run = || -> Result<AugmentedState> {
        if !(lambda_s > 0.0) {
            return Err(Error::config(format!(
                "lambda_s must be positive, got {lambda_s}"
            )));
        }
        ensure_len("sensor image slice", x_s.image.len(), model.image_len)?;
        ensure_len("sensor data slice", x_s.data.len(), model.data_len())?;
        let anchor = x_s.to_flat();
        let v = cg_least_squares(
            model.op.as_ref(),
            &model.y,
            &model.weights,
            lambda_s,
            &anchor,
            cg,
        )?;
        let mut out = AugmentedState::from_flat(&v, model.image_len)?;
        if nonneg_image {
            clamp_nonneg(&mut out.image);
        }
        if nonneg_data {
            clamp_nonneg(&mut out.data);
        }
        Ok(out)
    };
    run().map_err(|e| e.in_agent("sensor"))
}

/// `(v0 + λ_d·x_d.data) / (1 + λ_d)` on the data slice; image slice copied.
pub fn explicit_data_agent(
    x_d: &AugmentedState,
    v0_data: &[f64],
    lambda_d: f64,
    nonneg_data: bool,
) -> Result<AugmentedState> {
    ensure_len("explicit prior v0", v0_data.len(), x_d.data.len())
        .map_err(|e| e.in_agent("data-explicit"))?;
    if !(lambda_d > 0.0) {
        return Err(
            Error::config(format!("lambda_d must be positive, got {lambda_d}"))
                .in_agent("data-explicit"),
        );
    }
    let scale = 1.0 / (1.0 + lambda_d);
    let mut data: Vec<f64> = v0_data
        .iter()
        .zip(&x_d.data)
        .map(|(v, x)| (v + lambda_d * x) * scale)
        .collect();
    if nonneg_data {
        clamp_nonneg(&mut data);
    }
    Ok(AugmentedState::new(x_d.image.clone(), data))
}

pub struct ExplicitDataAgent {
    pub v0: Vec<f64>,
    pub lambda: f64,
    pub nonneg: bool,
}

impl Agent for ExplicitDataAgent {
    fn name(&self) -> &str {
        "data-explicit"
    }
    fn touches(&self) -> Touches {
        Touches::DataOnly
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        explicit_data_agent(x, &self.v0, self.lambda, self.nonneg)
    }
}

fn checked_denoise(denoiser: &dyn Denoiser, v: &[f64], agent: &str) -> Result<Vec<f64>> {
    let out = denoiser.denoise(v).map_err(|e| e.in_agent(agent))?;
    if out.len() != v.len() {
        return Err(Error::shape(format!(
            "denoiser {} returned {} values for {} inputs",
            denoiser.name(),
            out.len(),
            v.len()
        ))
        .in_agent(agent));
    }
    Ok(out)
}

/// Data slice replaced by a data-domain denoiser.
pub struct ImplicitDataAgent {
    pub denoiser: Arc<dyn Denoiser>,
    pub nonneg: bool,
}

impl ImplicitDataAgent {
    pub fn new(denoiser: Arc<dyn Denoiser>) -> Self {
        Self {
            denoiser,
            nonneg: false,
        }
    }
}

impl Agent for ImplicitDataAgent {
    fn name(&self) -> &str {
        "data-implicit"
    }
    fn touches(&self) -> Touches {
        Touches::DataOnly
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        let mut data = checked_denoise(self.denoiser.as_ref(), &x.data, self.name())?;
        if self.nonneg {
            clamp_nonneg(&mut data);
        }
        Ok(AugmentedState::new(x.image.clone(), data))
    }
}

/// Image slice replaced by an image-domain denoiser.
pub struct ImageAgent {
    pub denoiser: Arc<dyn Denoiser>,
    pub nonneg: bool,
}

impl ImageAgent {
    pub fn new(denoiser: Arc<dyn Denoiser>) -> Self {
        Self {
            denoiser,
            nonneg: false,
        }
    }
}

impl Agent for ImageAgent {
    fn name(&self) -> &str {
        "image"
    }
    fn touches(&self) -> Touches {
        Touches::ImageOnly
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        let mut image = checked_denoise(self.denoiser.as_ref(), &x.image, self.name())?;
        if self.nonneg {
            clamp_nonneg(&mut image);
        }
        Ok(AugmentedState::new(image, x.data.clone()))
    }
}

/// Proximal map `argmin_v TV(v) + λ_i‖v − x.image‖²` on the image slice.
pub struct TvImageAgent {
    shape: GridShape,
    lambda: f64,
    cfg: TvConfig,
    nonneg: bool,
    nonconverged: AtomicUsize,
}

impl TvImageAgent {
    pub fn new(shape: GridShape, lambda: f64, cfg: TvConfig) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::config(format!(
                "lambda_i must be positive, got {lambda}"
            )));
        }
        Ok(Self {
            shape,
            lambda,
            cfg,
            nonneg: false,
            nonconverged: AtomicUsize::new(0),
        })
    }

    pub fn with_nonneg(mut self, nonneg: bool) -> Self {
        self.nonneg = nonneg;
        self
    }

    /// Number of calls whose inner solver hit `max_iters` before `tol`.
    pub fn nonconverged_calls(&self) -> usize {
        self.nonconverged.load(Ordering::Relaxed)
    }
}

impl Agent for TvImageAgent {
    fn name(&self) -> &str {
        "image-tv"
    }
    fn touches(&self) -> Touches {
        Touches::ImageOnly
    }
    fn apply(&self, x: &AugmentedState) -> Result<AugmentedState> {
        let weight = 0.5 / self.lambda;
        let out = tv_denoise(&x.image, self.shape, weight, &self.cfg)
            .map_err(|e| e.in_agent(self.name()))?;
        if !out.converged {
            self.nonconverged.fetch_add(1, Ordering::Relaxed);
        }
        let mut image = out.values;
        if self.nonneg {
            clamp_nonneg(&mut image);
        }
        Ok(AugmentedState::new(image, x.data.clone()))
    }
}
