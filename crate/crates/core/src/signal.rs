//! FMCW waveform math: beat tones, the 1/N-normalized DFT and the
//! closed-form per-bin response of a complex tone.
//!
//! Angular frequencies are expressed in radians per ADC sample, so a tone at
//! `omega` lines up with DFT bin `k` when `omega == 2*pi*k/N`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::{Error, Result, C64};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this wrapped gap (radians per sample) the tone response switches to
/// its series expansion around the removable singularity.
pub const SINGULAR_GAP: f64 = 1e-9;

/// Chirp slope of the reference radar configuration, Hz/s.
pub const REFERENCE_SLOPE: f64 = 70.295e12;
/// ADC sample rate of the reference radar configuration, Hz.
pub const REFERENCE_SAMPLE_RATE: f64 = 5e6;
/// ADC samples per chirp of the reference radar configuration.
pub const REFERENCE_NUM_SAMPLES: usize = 256;
/// Default start frequency, Hz.
pub const DEFAULT_START_FREQUENCY: f64 = 1e9;

/// Linear-FM chirp parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpConfig {
    /// Start frequency f0, Hz.
    pub f0: f64,
    /// Slope S, Hz/s.
    pub slope: f64,
    /// ADC sample rate, Hz.
    pub sample_rate: f64,
    /// Samples per chirp N.
    pub num_samples: usize,
}

impl ChirpConfig {
    pub fn new(f0: f64, slope: f64, sample_rate: f64, num_samples: usize) -> Result<Self> {
        let chirp = Self { f0, slope, sample_rate, num_samples };
        chirp.validate()?;
        Ok(chirp)
    }

    /// Reference configuration (S = 70.295 THz/s, 5 MHz ADC, 256 samples) at
    /// the given start frequency.
    pub fn reference(f0: f64) -> Self {
        Self { f0, slope: REFERENCE_SLOPE, sample_rate: REFERENCE_SAMPLE_RATE, num_samples: REFERENCE_NUM_SAMPLES }
    }

    /// Same slope and sample rate, with the slope rescaled so the swept
    /// bandwidth equals `bandwidth`.
    pub fn with_bandwidth(&self, bandwidth: f64) -> Self {
        Self { slope: bandwidth / self.duration(), ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.f0) || !positive(self.slope) || !positive(self.sample_rate) {
            return Err(Error::config(format!("chirp parameters must be finite and positive: {self:?}")));
        }
        if self.num_samples < 2 {
            return Err(Error::config("chirp needs at least 2 samples"));
        }
        Ok(())
    }

    /// Chirp duration T_c = N / f_s, seconds.
    pub fn duration(&self) -> f64 {
        self.num_samples as f64 / self.sample_rate
    }

    /// Swept bandwidth B = S * T_c, Hz.
    pub fn bandwidth(&self) -> f64 {
        self.slope * self.duration()
    }

    /// Range resolution c / (2B), meters.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth())
    }

    /// Beat-frequency spacing between DFT bins, f_s / N.
    pub fn bin_spacing_hz(&self) -> f64 {
        self.sample_rate / self.num_samples as f64
    }

    /// Carrier wavelength at the start frequency, meters.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.f0
    }

    /// Per-sample angular frequency of the beat tone for delay `tau`.
    #[inline]
    pub fn omega_for_delay(&self, tau: f64) -> f64 {
        2.0 * PI * self.slope * tau / self.sample_rate
    }

    /// Baseband phase 2*pi*f0*tau.
    #[inline]
    pub fn phase_for_delay(&self, tau: f64) -> f64 {
        2.0 * PI * self.f0 * tau
    }
}

/// A complex tone M * exp(i(omega*t + phase)) sampled at integer t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneParams {
    pub amplitude: f64,
    /// Radians; not wrapped.
    pub phase: f64,
    /// Radians per sample.
    pub omega: f64,
}

/// A contiguous run of DFT bins starting at `bin_offset`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub bins: Vec<C64>,
    pub bin_offset: usize,
}

impl Spectrum {
    pub fn new(bins: Vec<C64>) -> Self {
        Self { bins, bin_offset: 0 }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![C64::new(0.0, 0.0); len])
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.bins.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs_diff(&self, other: &Spectrum) -> f64 {
        self.bins.iter().zip(&other.bins).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Beat tone produced by a point return with round-trip delay `tau`.
///
/// The residual video phase term is neglected.
pub fn beat_params(chirp: &ChirpConfig, tau: f64, amplitude: f64) -> Result<ToneParams> {
    let chirp_duration = chirp.duration();
    if !(tau >= 0.0 && tau < chirp_duration) {
        return Err(Error::InvalidDelay { tau, chirp_duration });
    }
    Ok(ToneParams { amplitude, phase: chirp.phase_for_delay(tau), omega: chirp.omega_for_delay(tau) })
}

pub fn synth_beat_time(params: &ToneParams, n: usize) -> Vec<C64> {
    (0..n).map(|t| C64::from_polar(params.amplitude, params.omega * t as f64 + params.phase)).collect()
}

/// Builds FFT plans for the 1/N-normalized forward transform.
pub struct DftPlan {
    fft: Arc<dyn Fft<f64>>,
    len: usize,
}

impl DftPlan {
    pub fn new(len: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(len);
        Self { fft, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Transforms `buf` in place and scales by 1/N.
    pub fn process(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.len, "DFT length mismatch");
        self.fft.process(buf);
        let scale = 1.0 / self.len as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }
}

/// Z_k = (1/N) * sum_t s_t * exp(-i * 2*pi*k*t / N) for all N bins.
pub fn dft(series: &[C64]) -> Spectrum {
    assert!(!series.is_empty(), "dft of an empty series");
    let mut buf = series.to_vec();
    DftPlan::new(series.len()).process(&mut buf);
    Spectrum::new(buf)
}

/// Angular frequency of DFT bin `k`.
#[inline]
pub fn bin_omega(k: usize, n: usize) -> f64 {
    2.0 * PI * k as f64 / n as f64
}

/// Wraps an angle to (-pi, pi].
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let y = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if y <= -PI {
        y + 2.0 * PI
    } else if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// (1 - exp(i*omega*N)) / (1 - exp(i*(omega - beta_k))), the leakage factor of
/// a length-N tone into bin `beta_k`.
///
/// Since `beta_k N` is a multiple of 2 pi the numerator equals
/// `1 - exp(i gap N)` with the wrapped gap `omega - beta_k`, so the ratio is
/// `sin(N gap/2) / sin(gap/2) exp(i gap (N-1)/2)`. Working from the gap
/// alone avoids the rounding of `omega N` for large arguments. Within
/// [`SINGULAR_GAP`] of a bin center the Dirichlet factor is replaced by its
/// series `N (1 - (N^2-1) gap^2 / 24)`.
#[inline]
pub fn leakage_ratio(omega: f64, beta_k: f64, n: usize) -> C64 {
    let nf = n as f64;
    let gap = wrap_angle(omega - beta_k);
    let phase = gap * (nf - 1.0) / 2.0;
    if gap.abs() < SINGULAR_GAP {
        return C64::from_polar(nf * (1.0 - (nf * nf - 1.0) * gap * gap / 24.0), phase);
    }
    C64::from_polar((0.5 * nf * gap).sin() / (0.5 * gap).sin(), phase)
}

/// Closed-form DFT bins of a sampled complex tone:
/// Z_k = (M/N) e^{i phase} (1 - e^{i omega N}) / (1 - e^{i (omega - beta_k)}).
pub fn tone_spectrum_closed_form(params: &ToneParams, n: usize, bins: &[usize]) -> Spectrum {
    assert!(n >= 2, "closed-form spectrum needs n >= 2");
    let prefactor = C64::from_polar(params.amplitude / n as f64, params.phase);
    let values = bins
        .iter()
        .map(|&k| {
            assert!(k < n, "bin {k} outside [0, {n})");
            prefactor * leakage_ratio(params.omega, bin_omega(k, n), n)
        })
        .collect();
    Spectrum { bins: values, bin_offset: bins.first().copied().unwrap_or(0) }
}

/// |sin(N gap / 2) / sin(gap / 2)| with gap = alpha - beta_k; equals `n` at gap = 0.
pub fn dirichlet_magnitude(alpha: f64, beta_k: f64, n: usize) -> f64 {
    let nf = n as f64;
    let gap = wrap_angle(alpha - beta_k);
    if gap.abs() < SINGULAR_GAP {
        return nf * (1.0 - (nf * nf - 1.0) * gap * gap / 24.0);
    }
    ((0.5 * nf * gap).sin() / (0.5 * gap).sin()).abs()
}

/// Fractional DFT bin index of a monostatic target at one-way range `d`.
pub fn range_to_bin(chirp: &ChirpConfig, d: f64) -> f64 {
    let beat = chirp.slope * 2.0 * d / SPEED_OF_LIGHT;
    beat / chirp.bin_spacing_hz()
}
