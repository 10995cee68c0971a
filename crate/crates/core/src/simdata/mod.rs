//! Phantoms, acquisition patterns, noise and image-quality metrics.

mod acquisition;
mod metrics;
mod phantom;

pub use acquisition::{
    add_gaussian_noise, make_kspace_mask, make_limited_angle_set, LimitedAngleSet,
};
pub use metrics::{nmse, psnr, rmse, ssim, MetricsReport, SsimConfig, PSNR_CAP};
pub use phantom::{
    pixel_center, rasterize, shepp_logan, Ellipse, Phantom, MIN_PHANTOM_SIDE, SHEPP_LOGAN,
};
