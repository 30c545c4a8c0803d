//! FMCW radar simulation and volumetric reconstruction.
//!
//! The crate is organized bottom-up:
//!
//! - [`signal`]: chirp parameters, beat tones, the 1/N-normalized DFT and the
//!   closed-form per-bin tone response with Dirichlet leakage.
//! - [`geometry`]: poses, cylindrical apertures, round-trip delays and the
//!   valid-bin window.
//! - [`scene`]: ground-truth point scenes, voxel and neural fields, query
//!   grids and point-cloud extraction.
//! - [`forward`]: closed-form spectral, time-domain and range-quantized
//!   forward models plus their adjoints.
//! - [`recon`]: losses, regularizers, Adam, the training loop and coherent
//!   backprojection.
//! - [`metrics`]: IoU, Chamfer, Hausdorff, PSNR and SSIM.
//! - [`io`]: dataset format, config parser and exporters.
//! - [`experiments`]: bundled scenes, runtime benchmark and ablation sweeps.

pub mod error;
pub mod experiments;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod recon;
pub mod scene;
pub mod signal;

pub use error::{Error, Result};

/// Complex sample type used throughout the compute path.
pub type C64 = num_complex::Complex64;

/// 3-vector in meters.
pub type Vec3 = nalgebra::Vector3<f64>;
