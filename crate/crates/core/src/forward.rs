//! Forward models mapping a sampled reflectivity field to per-pose radar
//! measurements, and the adjoints that carry spectral residuals back to
//! d(loss)/d(sigma).
//!
//! Every model is linear in sigma. A query node `i` with quadrature weight
//! `w_i`, ranges `R_T`, `R_R` and delay `tau` contributes the tone
//! `w_i sigma_i / (R_T R_R) * exp(i (alpha t + phi))` to the beat signal,
//! with `phi = 2 pi f0 tau` and `alpha = 2 pi S tau / f_s`.

use std::ops::Range;

use rayon::prelude::*;

use crate::geometry::{round_trip_delay, Pose};
use crate::scene::QuerySet;
use crate::signal::{bin_omega, leakage_ratio, range_to_bin, ChirpConfig, DftPlan, Spectrum};
use crate::{Error, Result, C64};

/// Below this denominator magnitude the per-bin kernel is evaluated through
/// the half-angle form instead of the direct complex quotient.
const DIRECT_QUOTIENT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ForwardKind {
    SpectralClosedForm,
    TimeDomain,
    RangeQuantized,
}

impl ForwardKind {
    pub fn name(&self) -> &'static str {
        match self {
            ForwardKind::SpectralClosedForm => "spectral",
            ForwardKind::TimeDomain => "time",
            ForwardKind::RangeQuantized => "rq",
        }
    }
}

impl std::str::FromStr for ForwardKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(ForwardKind::SpectralClosedForm),
            "time" => Ok(ForwardKind::TimeDomain),
            "rq" => Ok(ForwardKind::RangeQuantized),
            other => Err(Error::config(format!("unknown forward model '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseSpectrum {
    pub pose_index: usize,
    pub spectrum: Spectrum,
}

/// Per-node tone parameters for one pose.
#[derive(Debug, Clone, Copy)]
struct Tone {
    /// w / (R_T R_R), before sigma.
    gain: f64,
    phase: f64,
    omega: f64,
    /// One-way equivalent range (R_T + R_R) / 2.
    range: f64,
}

#[inline]
fn tone(chirp: &ChirpConfig, pose: &Pose, queries: &QuerySet, i: usize) -> Result<Tone> {
    let d = round_trip_delay(pose, &queries.positions[i])?;
    Ok(Tone {
        gain: queries.weights[i] / (d.r_t * d.r_r),
        phase: chirp.phase_for_delay(d.tau),
        omega: chirp.omega_for_delay(d.tau),
        range: 0.5 * (d.r_t + d.r_r),
    })
}

fn check_lengths(queries: &QuerySet, sigma: &[f64]) -> Result<()> {
    if queries.len() != sigma.len() {
        return Err(Error::LengthMismatch { expected: queries.len(), actual: sigma.len() });
    }
    Ok(())
}

/// Bin angular frequencies and their conjugate twiddles for a bin window.
struct BinTable {
    n: usize,
    betas: Vec<f64>,
    twiddles: Vec<C64>,
}

impl BinTable {
    fn new(bins: &Range<usize>, n: usize) -> Self {
        assert!(bins.end <= n, "bin window {bins:?} exceeds N = {n}");
        let betas: Vec<f64> = bins.clone().map(|k| bin_omega(k, n)).collect();
        let twiddles = betas.iter().map(|&b| C64::from_polar(1.0, -b)).collect();
        Self { n, betas, twiddles }
    }

    /// Calls `visit(j, kernel)` for every bin with the spectral kernel of a
    /// unit-gain tone: exp(i phi)/N * (1 - exp(i alpha N)) / (1 - exp(i (alpha - beta_k))).
    #[inline]
    fn for_each_kernel(&self, gain: f64, phase: f64, omega: f64, mut visit: impl FnMut(usize, C64)) {
        let nf = self.n as f64;
        let prefactor = C64::from_polar(gain / nf, phase);
        let numerator = prefactor * (C64::new(1.0, 0.0) - C64::from_polar(1.0, omega * nf));
        let step = C64::from_polar(1.0, omega);
        for (j, tw) in self.twiddles.iter().enumerate() {
            let den = C64::new(1.0, 0.0) - step * tw;
            let norm = den.norm_sqr();
            let kernel = if norm >= DIRECT_QUOTIENT_FLOOR * DIRECT_QUOTIENT_FLOOR {
                numerator * den.conj() / norm
            } else {
                prefactor * leakage_ratio(omega, self.betas[j], self.n)
            };
            visit(j, kernel);
        }
    }
}

/// Closed-form spectral response over `bins` for one pose.
pub fn spectral_forward(
    chirp: &ChirpConfig,
    pose: &Pose,
    queries: &QuerySet,
    sigma: &[f64],
    bins: Range<usize>,
) -> Result<Spectrum> {
    check_lengths(queries, sigma)?;
    let table = BinTable::new(&bins, chirp.num_samples);
    let mut acc = vec![C64::new(0.0, 0.0); bins.len()];
    for (i, &s) in sigma.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let t = tone(chirp, pose, queries, i)?;
        table.for_each_kernel(t.gain * s, t.phase, t.omega, |j, z| acc[j] += z);
    }
    Ok(Spectrum { bins: acc, bin_offset: bins.start })
}

/// Adjoint of [`spectral_forward`]: dL/dsigma_i = Re sum_k conj(A_ik) r_k,
/// where `residual[k]` is dL/dRe(Z_k) + i dL/dIm(Z_k).
pub fn spectral_adjoint(
    chirp: &ChirpConfig,
    pose: &Pose,
    queries: &QuerySet,
    residual: &[C64],
    bins: Range<usize>,
) -> Result<Vec<f64>> {
    if residual.len() != bins.len() {
        return Err(Error::LengthMismatch { expected: bins.len(), actual: residual.len() });
    }
    let table = BinTable::new(&bins, chirp.num_samples);
    let mut grad = vec![0.0; queries.len()];
    if residual.iter().all(|r| *r == C64::new(0.0, 0.0)) {
        return Ok(grad);
    }
    for (i, g) in grad.iter_mut().enumerate() {
        let t = tone(chirp, pose, queries, i)?;
        let mut acc = 0.0;
        table.for_each_kernel(t.gain, t.phase, t.omega, |j, a| {
            acc += a.re * residual[j].re + a.im * residual[j].im;
        });
        *g = acc;
    }
    Ok(grad)
}

/// Beat signal of length N: sum_i w_i sigma_i / (R_T R_R) exp(i (alpha_i t + phi_i)).
pub fn time_domain_forward(chirp: &ChirpConfig, pose: &Pose, queries: &QuerySet, sigma: &[f64]) -> Result<Vec<C64>> {
    check_lengths(queries, sigma)?;
    let n = chirp.num_samples;
    let mut series = vec![C64::new(0.0, 0.0); n];
    for (i, &s) in sigma.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let t = tone(chirp, pose, queries, i)?;
        let amp = t.gain * s;
        for (ts, out) in series.iter_mut().enumerate() {
            *out += C64::from_polar(amp, t.omega * ts as f64 + t.phase);
        }
    }
    Ok(series)
}

/// Adjoint of [`time_domain_forward`] for a per-sample residual.
pub fn time_domain_adjoint(chirp: &ChirpConfig, pose: &Pose, queries: &QuerySet, residual: &[C64]) -> Result<Vec<f64>> {
    if residual.len() != chirp.num_samples {
        return Err(Error::LengthMismatch { expected: chirp.num_samples, actual: residual.len() });
    }
    (0..queries.len())
        .map(|i| {
            let t = tone(chirp, pose, queries, i)?;
            Ok(residual
                .iter()
                .enumerate()
                .map(|(ts, r)| {
                    let a = C64::from_polar(t.gain, t.omega * ts as f64 + t.phase);
                    a.re * r.re + a.im * r.im
                })
                .sum())
        })
        .collect()
}

/// Maps a residual on the 1/N-normalized DFT bins `bins` back to the time
/// samples: g_t = (1/N) sum_k r_k exp(i beta_k t).
pub fn dft_window_adjoint(residual: &[C64], bins: Range<usize>, n: usize) -> Vec<C64> {
    let nf = n as f64;
    (0..n)
        .map(|t| {
            bins.clone().zip(residual).map(|(k, r)| r * C64::from_polar(1.0 / nf, bin_omega(k, n) * t as f64)).sum()
        })
        .collect()
}

/// Time-domain synthesis followed by the transform, restricted to `bins`.
pub fn time_domain_spectrum(
    chirp: &ChirpConfig,
    pose: &Pose,
    queries: &QuerySet,
    sigma: &[f64],
    bins: Range<usize>,
    plan: &DftPlan,
) -> Result<Spectrum> {
    let mut series = time_domain_forward(chirp, pose, queries, sigma)?;
    plan.process(&mut series);
    Ok(Spectrum { bins: series[bins.clone()].to_vec(), bin_offset: bins.start })
}

/// Range-quantized baseline: every node adds the real value
/// w sigma / (N R_T R_R) to the bin nearest its range (ties to even).
pub fn range_quantized_forward(
    chirp: &ChirpConfig,
    pose: &Pose,
    queries: &QuerySet,
    sigma: &[f64],
    bins: Range<usize>,
) -> Result<Spectrum> {
    check_lengths(queries, sigma)?;
    let nf = chirp.num_samples as f64;
    let mut acc = vec![C64::new(0.0, 0.0); bins.len()];
    for (i, &s) in sigma.iter().enumerate() {
        if s == 0.0 {
            continue;
        }
        let t = tone(chirp, pose, queries, i)?;
        let k = range_to_bin(chirp, t.range).round_ties_even() as usize;
        if bins.contains(&k) {
            acc[k - bins.start].re += t.gain * s / nf;
        }
    }
    Ok(Spectrum { bins: acc, bin_offset: bins.start })
}

pub fn range_quantized_adjoint(
    chirp: &ChirpConfig,
    pose: &Pose,
    queries: &QuerySet,
    residual: &[C64],
    bins: Range<usize>,
) -> Result<Vec<f64>> {
    if residual.len() != bins.len() {
        return Err(Error::LengthMismatch { expected: bins.len(), actual: residual.len() });
    }
    let nf = chirp.num_samples as f64;
    (0..queries.len())
        .map(|i| {
            let t = tone(chirp, pose, queries, i)?;
            let k = range_to_bin(chirp, t.range).round_ties_even() as usize;
            Ok(if bins.contains(&k) { t.gain / nf * residual[k - bins.start].re } else { 0.0 })
        })
        .collect()
}

/// A forward model bound to a chirp and bin window.
#[derive(Clone)]
pub struct ForwardModel {
    pub kind: ForwardKind,
    pub chirp: ChirpConfig,
    pub bins: Range<usize>,
}

impl ForwardModel {
    pub fn new(kind: ForwardKind, chirp: ChirpConfig, k_bins: usize) -> Self {
        Self { kind, chirp, bins: 0..k_bins }
    }

    /// Predicted spectrum over the bin window.
    pub fn predict(&self, pose: &Pose, queries: &QuerySet, sigma: &[f64]) -> Result<Spectrum> {
        match self.kind {
            ForwardKind::SpectralClosedForm => spectral_forward(&self.chirp, pose, queries, sigma, self.bins.clone()),
            ForwardKind::TimeDomain => time_domain_spectrum(
                &self.chirp,
                pose,
                queries,
                sigma,
                self.bins.clone(),
                &DftPlan::new(self.chirp.num_samples),
            ),
            ForwardKind::RangeQuantized => {
                range_quantized_forward(&self.chirp, pose, queries, sigma, self.bins.clone())
            }
        }
    }

    /// dL/dsigma for a residual on the predicted bins.
    pub fn adjoint(&self, pose: &Pose, queries: &QuerySet, residual: &[C64]) -> Result<Vec<f64>> {
        match self.kind {
            ForwardKind::SpectralClosedForm => {
                spectral_adjoint(&self.chirp, pose, queries, residual, self.bins.clone())
            }
            ForwardKind::TimeDomain => {
                let series = dft_window_adjoint(residual, self.bins.clone(), self.chirp.num_samples);
                time_domain_adjoint(&self.chirp, pose, queries, &series)
            }
            ForwardKind::RangeQuantized => {
                range_quantized_adjoint(&self.chirp, pose, queries, residual, self.bins.clone())
            }
        }
    }

    /// Predictions for every pose, in pose order.
    pub fn predict_all(&self, poses: &[Pose], queries: &QuerySet, sigma: &[f64]) -> Result<Vec<Spectrum>> {
        poses.par_iter().map(|p| self.predict(p, queries, sigma)).collect()
    }
}
