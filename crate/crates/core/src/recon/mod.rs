//! Reconstruction: losses, regularizers, Adam, the staged training loop and
//! coherent backprojection.

mod adam;
mod backprojection;
mod loss;
mod regularize;
mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use backprojection::{backprojection, range_profile, PROFILE_UPSAMPLING};
pub use loss::{complex_loss, spectral_loss, LossValue, SILENT_BIN};
pub use regularize::{smoothness_reg, sparsity_reg};
pub use train::{field_gain, train, Objective, ObjectiveValue, StepRecord, TrainHistory};

use crate::forward::ForwardKind;
use crate::{Error, Result};

/// Weights of the loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Weight of the real/imaginary squared error relative to the magnitude term.
    pub lambda: f64,
    /// Smoothness weight.
    pub beta: f64,
    /// Sparsity weight.
    pub gamma: f64,
    /// Perturbation half-range in meters; `None` uses half the query voxel spacing.
    pub epsilon: Option<f64>,
    /// Fraction of the steps trained on the magnitude term alone.
    pub stage_fraction: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda: 0.5, beta: 1e-2, gamma: 1e-2, epsilon: None, stage_fraction: 0.10 }
    }
}

impl LossWeights {
    pub fn unregularized() -> Self {
        Self { beta: 0.0, gamma: 0.0, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda, self.beta, self.gamma, self.epsilon.unwrap_or(1.0)];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::config("loss weights must be finite and >= 0"));
        }
        if self.epsilon == Some(0.0) {
            return Err(Error::config("epsilon must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.stage_fraction) {
            return Err(Error::config(format!("stage_fraction must lie in [0, 1], got {}", self.stage_fraction)));
        }
        Ok(())
    }
}

/// Forward model and supervision domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Closed-form spectral forward model, loss on the K valid bins.
    Spectral,
    /// Time-domain forward model, loss on the beat-signal samples.
    TfTs,
    /// Time-domain forward model, loss on its transform over the K bins.
    TfSs,
    /// Range-quantized forward model, loss on the K bins.
    Rq,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Spectral, Method::TfTs, Method::TfSs, Method::Rq];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Spectral => "spectral",
            Method::TfTs => "tfts",
            Method::TfSs => "tfss",
            Method::Rq => "rq",
        }
    }

    pub fn forward_kind(&self) -> ForwardKind {
        match self {
            Method::Spectral => ForwardKind::SpectralClosedForm,
            Method::TfTs | Method::TfSs => ForwardKind::TimeDomain,
            Method::Rq => ForwardKind::RangeQuantized,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown method '{s}' (spectral, tfts, tfss, rq)")))
    }
}

/// Default Adam step for voxel fields. Voxel values are in field units (see
/// [`field_gain`]), where a point scatterer fitted at 64^3 peaks near 10^3.
pub const VOXEL_LEARNING_RATE: f64 = 3.0;
/// Default Adam step for network parameters.
pub const INR_LEARNING_RATE: f64 = 3e-3;
/// Default query grid for network fields. Jitter moves the nodes every step,
/// so a coarse grid still covers the volume.
pub const INR_QUERY_RESOLUTION: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub iterations: usize,
    pub adam: AdamParams,
    pub poses_per_step: usize,
    pub reg_samples_per_step: usize,
    /// Quadrature grid used to evaluate the scene integral.
    pub query_resolution: [usize; 3],
    /// Query nodes closer than this to any antenna are dropped, meters.
    pub clearance: f64,
    /// Displace every query node uniformly within its cell at each step, so
    /// the scene integral is sampled everywhere rather than at fixed nodes.
    pub query_jitter: bool,
    pub seed: u64,
    /// Accepted for interface stability; every reduction is already
    /// performed in a fixed order, so runs are always reproducible.
    pub reproducible: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Spectral,
            iterations: 500,
            adam: AdamParams { lr: VOXEL_LEARNING_RATE, ..AdamParams::default() },
            poses_per_step: 4,
            reg_samples_per_step: 1024,
            query_resolution: [32, 32, 32],
            clearance: 0.05,
            query_jitter: true,
            seed: 0,
            reproducible: true,
        }
    }
}

impl TrainConfig {
    /// Defaults with the learning rate and query grid suited to network
    /// parameters.
    pub fn for_inr() -> Self {
        let mut cfg = Self::default();
        cfg.adam.lr = INR_LEARNING_RATE;
        cfg.query_resolution = [INR_QUERY_RESOLUTION; 3];
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if !(a.lr > 0.0 && a.lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be > 0, got {}", a.lr)));
        }
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) {
            return Err(Error::config("Adam betas must lie in [0, 1)"));
        }
        if a.eps.is_nan() || a.eps <= 0.0 {
            return Err(Error::config("Adam eps must be > 0"));
        }
        if self.poses_per_step == 0 || self.reg_samples_per_step == 0 {
            return Err(Error::config("poses_per_step and reg_samples_per_step must be >= 1"));
        }
        if self.query_resolution.contains(&0) {
            return Err(Error::config("query resolution must be >= 1 per axis"));
        }
        if self.clearance.is_nan() || self.clearance < 0.0 {
            return Err(Error::config("clearance must be >= 0"));
        }
        Ok(())
    }
}
