//! Denoisers, data completion and the external-plugin boundary.

mod completion;
mod denoise;
mod plugin;
pub mod tensor;

pub use completion::{kspace_complete, sinogram_complete};
pub use denoise::{
    gaussian_denoise, tv_denoise, Denoiser, Domain, GaussianDenoiser, GridShape, IdentityDenoiser,
    TvConfig, TvDenoiser, TvOutcome,
};
pub use plugin::{plugin_denoise, PluginDenoiser, PluginSpec};
pub use tensor::{decode_tensor, encode_tensor, load_tensor, save_tensor, DType, Tensor};
