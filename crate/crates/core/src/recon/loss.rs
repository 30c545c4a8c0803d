use crate::signal::Spectrum;
use crate::{Error, Result, C64};

/// Loss value with its components and the gradient with respect to the
/// prediction, stored as dL/dRe + i dL/dIm per entry.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub total: f64,
    /// sum (|Z| - |Z~|)^2
    pub magnitude: f64,
    /// sum |Z - Z~|^2, before the lambda weight.
    pub complex: f64,
    pub grad: Vec<C64>,
}

/// Below this magnitude d|Z|/dZ is taken as 0.
pub const SILENT_BIN: f64 = 1e-15;

/// Magnitude plus lambda-weighted real/imaginary squared error on paired
/// complex samples (spectral bins or time samples).
pub fn complex_loss(pred: &[C64], meas: &[C64], lambda: f64) -> Result<LossValue> {
    if pred.len() != meas.len() {
        return Err(Error::LengthMismatch { expected: meas.len(), actual: pred.len() });
    }
    let mut magnitude = 0.0;
    let mut complex = 0.0;
    let grad = pred
        .iter()
        .zip(meas)
        .map(|(z, m)| {
            let a = z.norm();
            let dm = a - m.norm();
            magnitude += dm * dm;
            let diff = z - m;
            complex += diff.norm_sqr();
            let g_mag = if a < SILENT_BIN { C64::new(0.0, 0.0) } else { z * (2.0 * dm / a) };
            g_mag + diff * (2.0 * lambda)
        })
        .collect();
    Ok(LossValue { total: magnitude + lambda * complex, magnitude, complex, grad })
}

pub fn spectral_loss(pred: &Spectrum, meas: &Spectrum, lambda: f64) -> Result<LossValue> {
    complex_loss(&pred.bins, &meas.bins, lambda)
}
