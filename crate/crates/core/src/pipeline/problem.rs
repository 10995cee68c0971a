use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::agents::{make_deblur_sensor_model, make_superres_sensor_model, SensorModel};
use crate::error::{ensure_len, Error, Result};
use crate::operators::{
    fbp, gather_lines, make_blur_op, make_incomplete_op, make_subsample_op, radon_apply,
    scatter_lines, CtGeometry, FilterKind, Fourier2d, FourierOp, KSpaceMask, Kernel2d, LinearOp,
    RadonOp, SharedOp,
};
use crate::priors::GridShape;
use crate::simdata::{
    add_gaussian_noise, make_kspace_mask, make_limited_angle_set, psnr, shepp_logan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    CtLimited,
    MriAccel,
    Deblur,
    Superres,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::CtLimited,
        ProblemKind::MriAccel,
        ProblemKind::Deblur,
        ProblemKind::Superres,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProblemKind::CtLimited => "ct-limited",
            ProblemKind::MriAccel => "mri-accel",
            ProblemKind::Deblur => "deblur",
            ProblemKind::Superres => "superres",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown problem `{s}`")))
    }
}

/// Everything needed to regenerate a simulated acquisition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub side: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub num_angles: usize,
    pub keep_fraction: f64,
    pub accel: usize,
    pub acs_fraction: f64,
    pub blur_sigma: f64,
    pub blur_radius: usize,
    pub sr_factor: usize,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind) -> Self {
        let side = match kind {
            ProblemKind::CtLimited | ProblemKind::MriAccel => 128,
            ProblemKind::Deblur | ProblemKind::Superres => 64,
        };
        Self {
            kind,
            side,
            noise_sigma: 0.01,
            seed: 0,
            num_angles: 180,
            keep_fraction: 0.5,
            accel: 4,
            acs_fraction: 0.06,
            blur_sigma: 1.5,
            blur_radius: 4,
            sr_factor: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Acquisition {
    Ct {
        full: CtGeometry,
        num_observed: usize,
    },
    Mri {
        mask: KSpaceMask,
    },
    Deblur {
        kernel: Kernel2d,
    },
    Superres {
        kernel: Kernel2d,
        factor: usize,
    },
}

impl Acquisition {
    pub fn from_spec(spec: &ProblemSpec) -> Result<Self> {
        Ok(match spec.kind {
            ProblemKind::CtLimited => {
                let set = make_limited_angle_set(spec.num_angles, spec.keep_fraction)?;
                Acquisition::Ct {
                    full: CtGeometry::parallel(spec.side, spec.num_angles)?,
                    num_observed: set.observed.len(),
                }
            }
            ProblemKind::MriAccel => Acquisition::Mri {
                mask: make_kspace_mask(spec.side, spec.accel, spec.acs_fraction)?,
            },
            ProblemKind::Deblur => Acquisition::Deblur {
                kernel: Kernel2d::gaussian(spec.blur_sigma, spec.blur_radius)?,
            },
            ProblemKind::Superres => {
                make_subsample_op(spec.sr_factor, spec.side)?;
                Acquisition::Superres {
                    kernel: Kernel2d::gaussian(spec.blur_sigma, spec.blur_radius)?,
                    factor: spec.sr_factor,
                }
            }
        })
    }
}

/// A simulated (or loaded) problem instance.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub spec: ProblemSpec,
    pub acquisition: Acquisition,
    /// Real ground-truth image, `side²` values, when known.
    pub truth: Option<Vec<f64>>,
    /// Noiseless complete data, when simulated.
    pub full_data: Option<Vec<f64>>,
    /// Noisy observations in the layout of the observed operator.
    pub observed: Vec<f64>,
}

impl Simulation {
    /// Phantom, complete data and noisy observations for `spec`.
    pub fn simulate(spec: &ProblemSpec) -> Result<Self> {
        let acquisition = Acquisition::from_spec(spec)?;
        let phantom = shepp_logan(spec.side)?;
        let mut sim = Self {
            spec: spec.clone(),
            acquisition,
            truth: None,
            full_data: None,
            observed: Vec::new(),
        };
        let image = sim.lift_truth(&phantom.values);
        let (obs_op, _) = sim.operators()?;
        let full = sim.complete_forward(&image)?;
        let clean_obs = obs_op.apply(&image)?;
        sim.observed = add_gaussian_noise(&clean_obs, spec.noise_sigma, spec.seed)?;
        sim.full_data = Some(full);
        sim.truth = Some(phantom.values);
        Ok(sim)
    }

    /// Rebuilds an instance from a spec plus stored observations.
    pub fn from_observed(
        spec: &ProblemSpec,
        observed: Vec<f64>,
        truth: Option<Vec<f64>>,
    ) -> Result<Self> {
        let sim = Self {
            spec: spec.clone(),
            acquisition: Acquisition::from_spec(spec)?,
            truth,
            full_data: None,
            observed,
        };
        let (obs_op, _) = sim.operators()?;
        ensure_len("observed data", sim.observed.len(), obs_op.output_len())?;
        if let Some(t) = &sim.truth {
            ensure_len("ground truth", t.len(), spec.side * spec.side)?;
        }
        Ok(sim)
    }

    pub fn side(&self) -> usize {
        self.spec.side
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.acquisition, Acquisition::Mri { .. })
    }

    /// Length of the reconstructed image vector (two planes for MRI).
    pub fn image_len(&self) -> usize {
        let n = self.side() * self.side();
        if self.is_complex() {
            2 * n
        } else {
            n
        }
    }

    pub fn image_shape(&self) -> GridShape {
        let channels = if self.is_complex() { 2 } else { 1 };
        GridShape::new(channels, self.side(), self.side())
    }

    /// Grid layout of the data slice (missing data).
    pub fn data_shape(&self) -> GridShape {
        let n = self.side();
        match &self.acquisition {
            Acquisition::Ct { full, num_observed } => {
                GridShape::new(1, full.num_angles() - num_observed, full.num_detectors())
            }
            Acquisition::Mri { mask } => GridShape::new(2, n, mask.missing_lines().len()),
            Acquisition::Deblur { .. } | Acquisition::Superres { .. } => GridShape::square(n),
        }
    }

    pub fn data_len(&self) -> usize {
        self.data_shape().len()
    }

    /// Ground-truth image in reconstruction layout.
    pub fn lift_truth(&self, truth: &[f64]) -> Vec<f64> {
        let mut v = truth.to_vec();
        if self.is_complex() {
            v.resize(2 * truth.len(), 0.0);
        }
        v
    }

    /// Real image used for metrics: the magnitude for two-plane images.
    pub fn display_image(&self, image: &[f64]) -> Vec<f64> {
        if self.is_complex() {
            let n = image.len() / 2;
            (0..n).map(|k| image[k].hypot(image[n + k])).collect()
        } else {
            image.to_vec()
        }
    }

    pub fn ct_geometries(&self) -> Option<(CtGeometry, CtGeometry)> {
        match &self.acquisition {
            Acquisition::Ct { full, num_observed } => {
                let angles = full.angles();
                let obs = full.with_angles(angles[..*num_observed].to_vec()).ok()?;
                let miss = full.with_angles(angles[*num_observed..].to_vec()).ok()?;
                Some((obs, miss))
            }
            _ => None,
        }
    }

    /// `(A_obs, A_unobs)`: image to observed data and image to missing data.
    pub fn operators(&self) -> Result<(SharedOp, SharedOp)> {
        let side = self.side();
        Ok(match &self.acquisition {
            Acquisition::Ct { .. } => {
                let (obs, miss) = self.ct_geometries().expect("CT acquisition");
                (
                    Arc::new(RadonOp::with_label(obs, "radon-observed")),
                    Arc::new(RadonOp::with_label(miss, "radon-missing")),
                )
            }
            Acquisition::Mri { mask } => {
                let fft = Arc::new(Fourier2d::new(side));
                (
                    Arc::new(FourierOp::observed(fft.clone(), mask)?),
                    Arc::new(FourierOp::unobserved(fft, mask)?),
                )
            }
            Acquisition::Deblur { kernel } => {
                let blur: SharedOp = Arc::new(make_blur_op(kernel.clone(), side)?);
                (blur.clone(), blur)
            }
            Acquisition::Superres { kernel, factor } => {
                let blur: SharedOp = Arc::new(make_blur_op(kernel.clone(), side)?);
                let sub: SharedOp = Arc::new(make_subsample_op(*factor, side)?);
                let obs: SharedOp = Arc::new(crate::operators::ComposedOp::new(sub, blur.clone())?);
                (obs, blur)
            }
        })
    }

    pub fn sensor_model(&self) -> Result<SensorModel> {
        let (obs, unobs) = self.operators()?;
        match &self.acquisition {
            Acquisition::Deblur { .. } => make_deblur_sensor_model(self.observed.clone(), unobs),
            Acquisition::Superres { factor, .. } => {
                let sub: SharedOp = Arc::new(make_subsample_op(*factor, self.side())?);
                make_superres_sensor_model(self.observed.clone(), unobs, sub)
            }
            _ => SensorModel::incomplete(self.observed.clone(), make_incomplete_op(obs, unobs)?),
        }
    }

    /// Noiseless complete data of `image`: full sinogram, full k-space, or
    /// the blurred image.
    pub fn complete_forward(&self, image: &[f64]) -> Result<Vec<f64>> {
        match &self.acquisition {
            Acquisition::Ct { full, .. } => radon_apply(image, full),
            Acquisition::Mri { .. } => {
                FourierOp::full(Arc::new(Fourier2d::new(self.side()))).apply(image)
            }
            Acquisition::Deblur { .. } | Acquisition::Superres { .. } => {
                self.operators()?.1.apply(image)
            }
        }
    }

    /// Merges observations with an estimate of the missing data into the
    /// complete-data layout.
    pub fn assemble(&self, observed: &[f64], missing: &[f64]) -> Result<Vec<f64>> {
        ensure_len("missing data", missing.len(), self.data_len())?;
        match &self.acquisition {
            Acquisition::Ct { .. } => {
                let mut full = observed.to_vec();
                full.extend_from_slice(missing);
                Ok(full)
            }
            Acquisition::Mri { mask } => {
                let n = self.side();
                let mut full = scatter_lines(observed, n, mask.sampled_lines());
                let missing_lines = mask.missing_lines();
                let fill = scatter_lines(missing, n, &missing_lines);
                for (f, m) in full.iter_mut().zip(fill) {
                    *f += m;
                }
                Ok(full)
            }
            Acquisition::Deblur { .. } | Acquisition::Superres { .. } => Ok(missing.to_vec()),
        }
    }

    /// Analytic inversion of complete data: Ram-Lak FBP, inverse DFT, or the
    /// identity for the blur problems.
    pub fn invert(&self, full: &[f64]) -> Result<Vec<f64>> {
        match &self.acquisition {
            Acquisition::Ct { full: geom, .. } => fbp(full, geom, FilterKind::RamLak),
            Acquisition::Mri { .. } => {
                FourierOp::full(Arc::new(Fourier2d::new(self.side()))).adjoint(full)
            }
            Acquisition::Deblur { .. } | Acquisition::Superres { .. } => {
                ensure_len("blurred image", full.len(), self.image_len())?;
                Ok(full.to_vec())
            }
        }
    }

    /// Extracts the missing part from complete data.
    pub fn missing_part(&self, full: &[f64]) -> Result<Vec<f64>> {
        match &self.acquisition {
            Acquisition::Ct {
                full: geom,
                num_observed,
            } => {
                ensure_len("complete sinogram", full.len(), geom.sinogram_len())?;
                Ok(full[num_observed * geom.num_detectors()..].to_vec())
            }
            Acquisition::Mri { mask } => Ok(gather_lines(full, self.side(), &mask.missing_lines())),
            Acquisition::Deblur { .. } | Acquisition::Superres { .. } => Ok(full.to_vec()),
        }
    }

    /// PSNR of `image` (reconstruction layout) against the ground truth,
    /// peak = dynamic range of the truth.
    pub fn psnr(&self, image: &[f64]) -> Option<f64> {
        let truth = self.truth.as_ref()?;
        let (lo, hi) = truth
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| {
                (l.min(*v), h.max(*v))
            });
        let peak = if hi > lo { hi - lo } else { 1.0 };
        psnr(&self.display_image(image), truth, peak).ok()
    }
}
