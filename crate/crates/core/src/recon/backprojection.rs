use rayon::prelude::*;

use crate::geometry::{round_trip_delay, SceneBounds};
use crate::io::MeasurementSet;
use crate::scene::VoxelField;
use crate::signal::{bin_omega, DftPlan};
use crate::{Result, C64};

/// Range-profile samples per DFT bin.
pub const PROFILE_UPSAMPLING: usize = 8;

/// Complex range profile of one pose at 1/PROFILE_UPSAMPLING-bin spacing.
///
/// The stored bins are synthesized into a band-limited beat signal, zero
/// padded to `PROFILE_UPSAMPLING * N` samples and transformed, so entry `j`
/// equals the 1/N-normalized transform evaluated at fractional bin
/// `j / PROFILE_UPSAMPLING`.
pub fn range_profile(spectrum: &[C64], n: usize, plan: &DftPlan) -> Vec<C64> {
    let len = plan.len();
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for (t, out) in buf.iter_mut().take(n).enumerate() {
        *out = spectrum.iter().enumerate().map(|(k, z)| z * C64::from_polar(1.0, bin_omega(k, n) * t as f64)).sum();
    }
    plan.process(&mut buf);
    // The plan divides by its own length; rescale to the 1/N convention.
    let scale = len as f64 / n as f64;
    buf.iter_mut().for_each(|z| *z *= scale);
    buf
}

fn interpolate(profile: &[C64], u: f64) -> C64 {
    let x = u * PROFILE_UPSAMPLING as f64;
    if x.is_nan() || x < 0.0 {
        return C64::new(0.0, 0.0);
    }
    let i = x.floor() as usize;
    if i + 1 >= profile.len() {
        return C64::new(0.0, 0.0);
    }
    let f = x - i as f64;
    profile[i] * (1.0 - f) + profile[i + 1] * f
}

/// Coherent backprojection onto a voxel grid.
///
/// For every voxel and pose the range profile is interpolated at the
/// voxel's fractional bin alpha N / (2 pi), phase-aligned by exp(-i phi)
/// and accumulated; the voxel value is the magnitude of the pose-averaged
/// sum.
pub fn backprojection(data: &MeasurementSet, bounds: &SceneBounds, resolution: [usize; 3]) -> Result<VoxelField> {
    data.validate()?;
    let mut grid = VoxelField::zeros(*bounds, resolution)?;
    let chirp = &data.chirp;
    let n = chirp.num_samples;
    let plan = DftPlan::new(PROFILE_UPSAMPLING * n);
    let profiles: Vec<Vec<C64>> = data.spectra.iter().map(|s| range_profile(s, n, &plan)).collect();
    let centers = grid.centers();
    let to_bin = n as f64 / (2.0 * std::f64::consts::PI);
    let inv_poses = 1.0 / data.num_poses() as f64;
    let values: Vec<f64> = centers
        .par_iter()
        .map(|x| {
            let mut acc = C64::new(0.0, 0.0);
            for (pose, profile) in data.aperture.poses.iter().zip(&profiles) {
                let d = round_trip_delay(pose, x)?;
                let u = chirp.omega_for_delay(d.tau) * to_bin;
                acc += interpolate(profile, u) * C64::from_polar(1.0, -chirp.phase_for_delay(d.tau));
            }
            Ok((acc * inv_poses).norm())
        })
        .collect::<Result<_>>()?;
    grid.values = values;
    Ok(grid)
}
