//! Flat `key = value` run configuration.
//!
//! One assignment per line, `#` starts a comment, keys may contain dots.
//! Booleans are `true`/`false`, lists are comma-separated. Every key must
//! appear in [`KEYS`]; anything else is rejected.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use dipiir::ce::CeConfig;
use dipiir::pipeline::{ImagePrior, InitKind, PipelineKind, ProblemKind, ProblemSpec, ReconParams};
use dipiir::priors::PluginSpec;
use dipiir::{Error, Result};
use serde::Serialize;

/// Every accepted key with a one-line description.
pub const KEYS: &[(&str, &str)] = &[
    ("name", "run name used as output file prefix"),
    ("problem", "ct-limited | mri-accel | deblur | superres"),
    (
        "pipeline",
        "fbp | ift | dc-fbp | dc-ift | pnp-mbir | dipiir-explicit | dipiir-implicit",
    ),
    ("seed", "noise seed"),
    ("problem.side", "image side in pixels"),
    (
        "problem.noise_sigma",
        "standard deviation of additive Gaussian noise",
    ),
    ("problem.num_angles", "CT: uniform angles over [0, pi)"),
    (
        "problem.keep_fraction",
        "CT: observed fraction of the angle range",
    ),
    ("problem.accel", "MRI: keep every accel-th k-space column"),
    (
        "problem.acs_fraction",
        "MRI: width of the central calibration band",
    ),
    (
        "problem.blur_sigma",
        "deblur/superres: Gaussian kernel width",
    ),
    (
        "problem.blur_radius",
        "deblur/superres: kernel radius in pixels",
    ),
    ("problem.sr_factor", "superres: decimation factor"),
    ("ce.mu", "agent weights mu_s, mu_d, mu_i (sum to 1)"),
    ("ce.rho", "Mann parameter in (0, 1)"),
    ("ce.max_iters", "consensus iterations"),
    (
        "ce.residual_tol",
        "stop early below this relative Mann residual",
    ),
    ("ce.lambda_s", "sensor proximal strength"),
    ("ce.lambda_d", "data-prior proximal strength"),
    ("ce.lambda_i", "image-prior proximal strength"),
    ("ce.nonneg_image", "clamp image slices at zero"),
    ("ce.nonneg_data", "clamp data slices at zero"),
    (
        "cg.max_iters",
        "conjugate-gradient iterations in the sensor agent",
    ),
    (
        "cg.rel_tol",
        "conjugate-gradient relative residual tolerance",
    ),
    ("tv.max_iters", "TV dual iterations"),
    ("tv.tol", "TV dual change tolerance"),
    ("prior.image", "tv | gaussian"),
    ("prior.image_sigma", "Gaussian image denoiser width"),
    (
        "prior.data_sigma",
        "Gaussian data denoiser width (implicit data agent)",
    ),
    (
        "prior.completion_sigma",
        "smoothing used to complete blur-problem data",
    ),
    ("init", "completed | zero-fill | zeros"),
    (
        "plugin.image.command",
        "external image denoiser: program, args...",
    ),
    ("plugin.image.timeout", "seconds"),
    (
        "plugin.data.command",
        "external data denoiser: program, args...",
    ),
    ("plugin.data.timeout", "seconds"),
    (
        "input.observed",
        "observed data tensor (default <out>/<name>.observed.dipt)",
    ),
    (
        "input.truth",
        "ground-truth tensor (default <out>/<name>.phantom.dipt if present)",
    ),
    ("output.dir", "output directory"),
    ("output.pgm", "also write 8-bit PGM previews"),
    ("check.trials", "random trials per adjoint check"),
    ("check.seed", "seed of the diagnostic checks"),
    ("check.tolerance", "adjoint pass threshold"),
    (
        "check.corrupt_adjoint",
        "negative control: double the observed operator's adjoint",
    ),
];

fn is_known(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Raw key/value pairs in the order of precedence they were applied.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut map = Self::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{}: expected `key = value`", no + 1))
            })?;
            map.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{origin}:{}: {}", no + 1, strip(e))))?;
        }
        Ok(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot read config {}: {e}", path.display()),
            ))
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_known(key) {
            return Err(Error::Config(format!("unknown config key `{key}`")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        match self.raw(key) {
            None => Ok(None),
            Some("true") => Ok(Some(true)),
            Some("false") => Ok(Some(false)),
            Some(v) => Err(Error::Config(format!(
                "`{key}` must be true or false, got `{v}`"
            ))),
        }
    }

    fn get_list(&self, key: &str) -> Option<Vec<String>> {
        self.raw(key).map(|v| {
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect()
        })
    }

    fn get_parsed<T: FromStr<Err = Error>>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("`{key}`: {}", strip(e))))
            })
            .transpose()
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckSettings {
    pub trials: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub corrupt_adjoint: bool,
}

/// A fully resolved run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub pipeline: PipelineKind,
    pub params: ReconParams,
    pub out_dir: PathBuf,
    pub observed_path: Option<PathBuf>,
    pub truth_path: Option<PathBuf>,
    pub pgm: bool,
    pub check: CheckSettings,
}

fn plugin(map: &ConfigMap, which: &str) -> Result<Option<PluginSpec>> {
    let key = format!("plugin.{which}.command");
    let Some(cmd) = map.get_list(&key) else {
        return Ok(None);
    };
    let (program, args) = cmd
        .split_first()
        .ok_or_else(|| Error::Config(format!("`{key}` is empty")))?;
    let timeout = map
        .get::<f64>(&format!("plugin.{which}.timeout"))?
        .unwrap_or(60.0);
    // The expected length is filled in once the problem is known.
    Ok(Some(
        PluginSpec::new(program, timeout, 0)?.with_args(args.to_vec()),
    ))
}

impl RunConfig {
    pub fn resolve(map: &ConfigMap) -> Result<Self> {
        let kind: ProblemKind = map.get_parsed("problem")?.unwrap_or(ProblemKind::CtLimited);
        let pipeline: PipelineKind = map
            .get_parsed("pipeline")?
            .unwrap_or(PipelineKind::DipiirExplicit);
        if !pipeline.supports(kind) {
            return Err(Error::Config(format!(
                "pipeline {pipeline} does not apply to problem {kind}"
            )));
        }

        let mut problem = ProblemSpec::new(kind);
        macro_rules! field {
            ($key:literal, $dst:expr) => {
                if let Some(v) = map.get($key)? {
                    $dst = v;
                }
            };
        }
        field!("seed", problem.seed);
        field!("problem.side", problem.side);
        field!("problem.noise_sigma", problem.noise_sigma);
        field!("problem.num_angles", problem.num_angles);
        field!("problem.keep_fraction", problem.keep_fraction);
        field!("problem.accel", problem.accel);
        field!("problem.acs_fraction", problem.acs_fraction);
        field!("problem.blur_sigma", problem.blur_sigma);
        field!("problem.blur_radius", problem.blur_radius);
        field!("problem.sr_factor", problem.sr_factor);

        let mut params = ReconParams::preset(kind, pipeline);
        params.ce = resolve_ce(map, &params.ce)?;
        field!("cg.max_iters", params.cg.max_iters);
        field!("cg.rel_tol", params.cg.rel_tol);
        field!("tv.max_iters", params.tv.max_iters);
        field!("tv.tol", params.tv.tol);
        field!("prior.image_sigma", params.image_sigma);
        field!("prior.data_sigma", params.data_sigma);
        field!("prior.completion_sigma", params.completion_sigma);
        if let Some(p) = map.get_parsed::<ImagePrior>("prior.image")? {
            params.image_prior = p;
        }
        if let Some(i) = map.get_parsed::<InitKind>("init")? {
            params.init = Some(i);
        }
        params.image_plugin = plugin(map, "image")?;
        params.data_plugin = plugin(map, "data")?;

        let mut check = CheckSettings {
            trials: 50,
            seed: 0,
            tolerance: 1e-6,
            corrupt_adjoint: false,
        };
        field!("check.trials", check.trials);
        field!("check.seed", check.seed);
        field!("check.tolerance", check.tolerance);
        if let Some(b) = map.get_bool("check.corrupt_adjoint")? {
            check.corrupt_adjoint = b;
        }

        let name = map.raw("name").unwrap_or("run").to_string();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::Config(format!("invalid run name `{name}`")));
        }
        Ok(Self {
            name,
            problem,
            pipeline,
            params,
            out_dir: map
                .raw("output.dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| ".".into()),
            observed_path: map.raw("input.observed").map(PathBuf::from),
            truth_path: map.raw("input.truth").map(PathBuf::from),
            pgm: map.get_bool("output.pgm")?.unwrap_or(false),
            check,
        })
    }

    /// `<out>/<name><suffix>`.
    pub fn path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}{suffix}", self.name))
    }

    /// Name prefix of reconstruction outputs.
    pub fn run_name(&self) -> String {
        format!("{}-{}", self.name, self.pipeline)
    }

    pub fn echo(&self) -> ConfigEcho {
        let ce = &self.params.ce;
        ConfigEcho {
            name: self.name.clone(),
            problem: self.problem.clone(),
            pipeline: self.pipeline.to_string(),
            mu: ce.weights().as_array(),
            rho: ce.rho(),
            max_iters: ce.max_iters(),
            residual_tol: ce.residual_tol(),
            lambda: [ce.lambda_s(), ce.lambda_d(), ce.lambda_i()],
            nonneg_image: ce.nonneg_image(),
            nonneg_data: ce.nonneg_data(),
            cg_max_iters: self.params.cg.max_iters,
            cg_rel_tol: self.params.cg.rel_tol,
            tv_max_iters: self.params.tv.max_iters,
            tv_tol: self.params.tv.tol,
            image_prior: if self.params.image_plugin.is_some() {
                "plugin".into()
            } else {
                label(&self.params.image_prior)
            },
            image_sigma: self.params.image_sigma,
            data_sigma: self.params.data_sigma,
            data_prior: if self.params.data_plugin.is_some() {
                "plugin".into()
            } else {
                "gaussian".into()
            },
            init: self.params.init.as_ref().map(label),
        }
    }
}

/// Serialized name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn resolve_ce(map: &ConfigMap, base: &CeConfig) -> Result<CeConfig> {
    let mut b = base.to_builder();
    if let Some(mu) = map.get_list("ce.mu") {
        let vals: Vec<f64> = mu
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("`ce.mu` must be three numbers, got {mu:?}")))?;
        if vals.len() != 3 {
            return Err(Error::Config(format!(
                "`ce.mu` needs three weights, got {}",
                vals.len()
            )));
        }
        b = b.weights(vals[0], vals[1], vals[2]);
    }
    if let Some(r) = map.get("ce.rho")? {
        b = b.rho(r);
    }
    if let Some(n) = map.get("ce.max_iters")? {
        b = b.max_iters(n);
    }
    if let Some(t) = map.get("ce.residual_tol")? {
        b = b.residual_tol(t);
    }
    let ls = map.get("ce.lambda_s")?.unwrap_or(base.lambda_s());
    let ld = map.get("ce.lambda_d")?.unwrap_or(base.lambda_d());
    let li = map.get("ce.lambda_i")?.unwrap_or(base.lambda_i());
    b = b.lambdas(ls, ld, li);
    let ni = map
        .get_bool("ce.nonneg_image")?
        .unwrap_or(base.nonneg_image());
    let nd = map
        .get_bool("ce.nonneg_data")?
        .unwrap_or(base.nonneg_data());
    b.nonneg(ni, nd).build()
}

/// Effective settings written into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigEcho {
    pub name: String,
    pub problem: ProblemSpec,
    pub pipeline: String,
    pub mu: [f64; 3],
    pub rho: f64,
    pub max_iters: usize,
    pub residual_tol: f64,
    pub lambda: [f64; 3],
    pub nonneg_image: bool,
    pub nonneg_data: bool,
    pub cg_max_iters: usize,
    pub cg_rel_tol: f64,
    pub tv_max_iters: usize,
    pub tv_tol: f64,
    pub image_prior: String,
    pub image_sigma: f64,
    pub data_sigma: f64,
    pub data_prior: String,
    pub init: Option<String>,
}
