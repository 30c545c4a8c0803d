//! Binary measurement datasets.
//!
//! Little-endian layout:
//!
//! ```text
//! magic      4 bytes  "SPNR"
//! version    u32      1
//! chirp      4 x f64  f0, slope, sample_rate, num_samples
//! poses      u32      pose count P
//! k_bins     u32      K
//! scale      f64      normalization divisor applied to the spectra
//! geometry   P x 6 x f64   tx.xyz, rx.xyz
//! spectra    P x K x (f32 re, f32 im), pose-major
//! ```

use std::fs;
use std::path::Path;

use crate::geometry::{Aperture, Pose};
use crate::signal::ChirpConfig;
use crate::{Error, Result, Vec3, C64};

pub const MAGIC: [u8; 4] = *b"SPNR";
pub const VERSION: u32 = 1;

/// Per-pose spectra over the leading `k_bins` DFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub chirp: ChirpConfig,
    pub aperture: Aperture,
    pub k_bins: usize,
    /// The stored spectra equal the raw spectra divided by `scale`.
    pub scale: f64,
    pub spectra: Vec<Vec<C64>>,
}

impl MeasurementSet {
    pub fn new(
        chirp: ChirpConfig,
        aperture: Aperture,
        k_bins: usize,
        scale: f64,
        spectra: Vec<Vec<C64>>,
    ) -> Result<Self> {
        let ms = Self { chirp, aperture, k_bins, scale, spectra };
        ms.validate()?;
        Ok(ms)
    }

    /// Divides raw spectra by their largest magnitude so the peak is 1.
    pub fn normalized(chirp: ChirpConfig, aperture: Aperture, k_bins: usize, mut raw: Vec<Vec<C64>>) -> Result<Self> {
        let peak = raw.iter().flat_map(|s| s.iter().map(|z| z.norm())).fold(0.0, f64::max);
        let scale = if peak > 0.0 { peak } else { 1.0 };
        for s in &mut raw {
            for z in s.iter_mut() {
                *z /= scale;
            }
        }
        Self::new(chirp, aperture, k_bins, scale, raw)
    }

    pub fn validate(&self) -> Result<()> {
        self.chirp.validate()?;
        if self.spectra.len() != self.aperture.len() {
            return Err(Error::LengthMismatch { expected: self.aperture.len(), actual: self.spectra.len() });
        }
        if self.k_bins == 0 || self.k_bins > self.chirp.num_samples {
            return Err(Error::config(format!("K = {} outside [1, {}]", self.k_bins, self.chirp.num_samples)));
        }
        if let Some(bad) = self.spectra.iter().find(|s| s.len() != self.k_bins) {
            return Err(Error::LengthMismatch { expected: self.k_bins, actual: bad.len() });
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::config(format!("scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn num_poses(&self) -> usize {
        self.spectra.len()
    }

    /// Serialized size in bytes.
    pub fn encoded_len(&self) -> usize {
        4 + 4 + 32 + 4 + 4 + 8 + self.num_poses() * (48 + 8 * self.k_bins)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [self.chirp.f0, self.chirp.slope, self.chirp.sample_rate, self.chirp.num_samples as f64] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&(self.num_poses() as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_bins as u32).to_le_bytes());
        out.extend_from_slice(&self.scale.to_le_bytes());
        for pose in &self.aperture.poses {
            for v in pose.tx.iter().chain(pose.rx.iter()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for spectrum in &self.spectra {
            for z in spectrum {
                out.extend_from_slice(&(z.re as f32).to_le_bytes());
                out.extend_from_slice(&(z.im as f32).to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, offset: 0 };
        let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
        if magic != MAGIC {
            return Err(Error::BadMagic { offset: 0, found: magic });
        }
        let version_offset = r.offset as u64;
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::VersionUnsupported { offset: version_offset, version });
        }
        let (f0, slope, sample_rate, n) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
        if n.fract() != 0.0 || n < 2.0 {
            return Err(Error::config(format!("sample count {n} is not an integer >= 2")));
        }
        let chirp = ChirpConfig::new(f0, slope, sample_rate, n as usize)?;
        let num_poses = r.u32()? as usize;
        let k_bins = r.u32()? as usize;
        let scale = r.f64()?;
        let mut poses = Vec::with_capacity(num_poses.min(1 << 20));
        for _ in 0..num_poses {
            let tx = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
            let rx = Vec3::new(r.f64()?, r.f64()?, r.f64()?);
            poses.push(Pose { tx, rx });
        }
        let mut spectra = Vec::with_capacity(num_poses.min(1 << 20));
        for _ in 0..num_poses {
            let mut s = Vec::with_capacity(k_bins);
            for _ in 0..k_bins {
                let re = r.f32()? as f64;
                let im = r.f32()? as f64;
                s.push(C64::new(re, im));
            }
            spectra.push(s);
        }
        let aperture = Aperture::from_poses(poses)?;
        Self::new(chirp, aperture, k_bins, scale, spectra)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < self.offset + n {
            return Err(Error::TruncatedFile { offset: self.offset as u64, needed: n });
        }
        let out = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_dataset(path: impl AsRef<Path>, ms: &MeasurementSet) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, ms.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    MeasurementSet::from_bytes(&bytes)
}
