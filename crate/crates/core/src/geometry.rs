//! Antenna poses, aperture synthesis, propagation delays and the window of
//! DFT bins that can carry energy from a bounded scene.

use std::f64::consts::PI;

use crate::signal::{range_to_bin, ChirpConfig, SPEED_OF_LIGHT};
use crate::{Error, Result, Vec3};

/// Points closer than this to an antenna are rejected as degenerate.
pub const COINCIDENCE_TOLERANCE: f64 = 1e-9;

/// Bins kept beyond the geometric maximum to hold leakage tails.
pub const DEFAULT_BIN_MARGIN: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub tx: Vec3,
    pub rx: Vec3,
}

impl Pose {
    pub fn monostatic(at: Vec3) -> Self {
        Self { tx: at, rx: at }
    }

    pub fn is_monostatic(&self) -> bool {
        self.tx == self.rx
    }

    /// Tx/Rx midpoint, the phase center used by the monostatic approximation.
    pub fn phase_center(&self) -> Vec3 {
        0.5 * (self.tx + self.rx)
    }

    pub fn baseline(&self) -> f64 {
        (self.tx - self.rx).norm()
    }
}

/// Parameters a cylindrical aperture was generated from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureMeta {
    pub radius: f64,
    pub n_angles: usize,
    pub n_heights: usize,
    pub height_extent: f64,
    pub center: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aperture {
    pub poses: Vec<Pose>,
    /// `None` for apertures built from explicit pose lists.
    pub meta: Option<ApertureMeta>,
}

impl Aperture {
    pub fn from_poses(poses: Vec<Pose>) -> Result<Self> {
        if poses.is_empty() {
            return Err(Error::config("aperture has no poses"));
        }
        Ok(Self { poses, meta: None })
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// Axis-aligned cube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBounds {
    pub center: Vec3,
    pub side: f64,
}

impl SceneBounds {
    pub fn new(center: Vec3, side: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::config(format!("scene bounds need a finite center and positive side, got side {side}")));
        }
        Ok(Self { center, side })
    }

    pub fn min_corner(&self) -> Vec3 {
        self.center - Vec3::repeat(0.5 * self.side)
    }

    pub fn max_corner(&self) -> Vec3 {
        self.center + Vec3::repeat(0.5 * self.side)
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let h = 0.5 * self.side;
        let mut out = [self.center; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -h } else { h };
            let sy = if i & 2 == 0 { -h } else { h };
            let sz = if i & 4 == 0 { -h } else { h };
            *c += Vec3::new(sx, sy, sz);
        }
        out
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let h = 0.5 * self.side;
        (0..3).all(|a| (p[a] - self.center[a]).abs() <= h)
    }

    pub fn volume(&self) -> f64 {
        self.side.powi(3)
    }
}

/// Monostatic poses on a cylinder around `center`'s vertical axis, ordered
/// angle-major then by height.
pub fn cylindrical_aperture(
    radius: f64,
    n_angles: usize,
    n_heights: usize,
    height_extent: f64,
    center: Vec3,
) -> Result<Aperture> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::config(format!("aperture radius must be positive, got {radius}")));
    }
    if n_angles == 0 || n_heights == 0 {
        return Err(Error::config("aperture needs at least one angle and one height"));
    }
    if !(height_extent.is_finite() && height_extent >= 0.0) {
        return Err(Error::config("height extent must be finite and non-negative"));
    }
    let heights: Vec<f64> = if n_heights == 1 {
        vec![0.0]
    } else {
        (0..n_heights).map(|j| -0.5 * height_extent + height_extent * j as f64 / (n_heights - 1) as f64).collect()
    };
    let mut poses = Vec::with_capacity(n_angles * n_heights);
    for a in 0..n_angles {
        let theta = 2.0 * PI * a as f64 / n_angles as f64;
        let (s, c) = theta.sin_cos();
        for &h in &heights {
            poses.push(Pose::monostatic(center + Vec3::new(radius * c, radius * s, h)));
        }
    }
    Ok(Aperture { poses, meta: Some(ApertureMeta { radius, n_angles, n_heights, height_extent, center }) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delay {
    /// Round-trip delay, seconds.
    pub tau: f64,
    /// Tx to point, meters.
    pub r_t: f64,
    /// Point to Rx, meters.
    pub r_r: f64,
}

#[inline]
pub fn round_trip_delay(pose: &Pose, x: &Vec3) -> Result<Delay> {
    let r_t = (pose.tx - x).norm();
    let r_r = (pose.rx - x).norm();
    if r_t < COINCIDENCE_TOLERANCE || r_r < COINCIDENCE_TOLERANCE {
        return Err(Error::DegenerateGeometry { x: x[0], y: x[1], z: x[2] });
    }
    Ok(Delay { tau: (r_t + r_r) / SPEED_OF_LIGHT, r_t, r_r })
}

/// Worst-case one-way range from any pose to the scene: the largest
/// (R_T + R_R)/2 over poses and cube corners.
pub fn max_scene_range(bounds: &SceneBounds, aperture: &Aperture) -> f64 {
    let corners = bounds.corners();
    aperture
        .poses
        .iter()
        .flat_map(|p| corners.iter().map(move |c| 0.5 * ((p.tx - c).norm() + (p.rx - c).norm())))
        .fold(0.0, f64::max)
}

/// Number of leading DFT bins `K` that can hold scene energy.
pub fn valid_bins(chirp: &ChirpConfig, bounds: &SceneBounds, aperture: &Aperture, margin: usize) -> usize {
    let d_max = max_scene_range(bounds, aperture);
    let k = range_to_bin(chirp, d_max).ceil() as usize + margin;
    k.min(chirp.num_samples)
}

/// Replaces every bistatic pose by a monostatic element at its phase center.
///
/// For a target at distance at least `d_min` from the phase center, the
/// monostatic range differs from the true (R_T + R_R)/2 by at most
/// [`phase_center_error_bound`].
pub fn multistatic_to_monostatic(pairs: &[Pose]) -> Vec<Pose> {
    pairs.iter().map(|p| if p.is_monostatic() { *p } else { Pose::monostatic(p.phase_center()) }).collect()
}

/// |ΔR| <= baseline^2 / (4 d_min).
pub fn phase_center_error_bound(baseline: f64, d_min: f64) -> f64 {
    baseline * baseline / (4.0 * d_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_aperture() {
        let ap = cylindrical_aperture(0.23, 4, 1, 0.0, Vec3::zeros()).unwrap();
        let expected = [
            Vec3::new(0.23, 0.0, 0.0),
            Vec3::new(0.0, 0.23, 0.0),
            Vec3::new(-0.23, 0.0, 0.0),
            Vec3::new(0.0, -0.23, 0.0),
        ];
        for (p, e) in ap.poses.iter().zip(expected) {
            assert!((p.tx - e).norm() < 1e-15);
            assert!(p.is_monostatic());
        }
    }

    #[test]
    fn dense_aperture_count_and_radius() {
        let center = Vec3::new(0.1, -0.2, 0.05);
        let ap = cylindrical_aperture(0.23, 90, 16, 0.2, center).unwrap();
        assert_eq!(ap.len(), 1440);
        for p in &ap.poses {
            let d = p.tx - center;
            assert!(((d[0] * d[0] + d[1] * d[1]).sqrt() - 0.23).abs() < 1e-12);
            assert!(d[2].abs() <= 0.1 + 1e-15);
        }
        assert!((ap.poses[0].tx[2] - center[2] + 0.1).abs() < 1e-15);
        assert!((ap.poses[15].tx[2] - center[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn aperture_rejects_bad_counts() {
        assert!(cylindrical_aperture(0.23, 0, 1, 0.0, Vec3::zeros()).is_err());
        assert!(cylindrical_aperture(0.23, 1, 0, 0.0, Vec3::zeros()).is_err());
        assert!(cylindrical_aperture(0.0, 1, 1, 0.0, Vec3::zeros()).is_err());
    }

    #[test]
    fn aperture_is_deterministic() {
        let a = cylindrical_aperture(0.3, 17, 3, 0.1, Vec3::new(0.01, 0.0, 0.0)).unwrap();
        let b = cylindrical_aperture(0.3, 17, 3, 0.1, Vec3::new(0.01, 0.0, 0.0)).unwrap();
        for (p, q) in a.poses.iter().zip(&b.poses) {
            for i in 0..3 {
                assert_eq!(p.tx[i].to_bits(), q.tx[i].to_bits());
            }
        }
    }

    #[test]
    fn delays() {
        let pose = Pose::monostatic(Vec3::new(0.23, 0.0, 0.0));
        let d = round_trip_delay(&pose, &Vec3::zeros()).unwrap();
        assert!((d.tau - 1.534_394_837_9e-9).abs() < 1e-18);
        assert!(matches!(round_trip_delay(&pose, &pose.tx), Err(Error::DegenerateGeometry { .. })));
        let bistatic = Pose { tx: Vec3::new(1.0, 0.0, 0.0), rx: Vec3::new(-1.0, 0.0, 0.0) };
        let d = round_trip_delay(&bistatic, &Vec3::zeros()).unwrap();
        assert_eq!((d.r_t, d.r_r), (1.0, 1.0));
        assert!((d.tau - 2.0 / SPEED_OF_LIGHT).abs() < 1e-24);
    }

    #[test]
    fn reference_valid_bins() {
        let chirp = ChirpConfig::reference(1e9);
        let bounds = SceneBounds::new(Vec3::zeros(), 0.36).unwrap();
        let ap = cylindrical_aperture(0.23, 90, 4, 0.2, Vec3::zeros()).unwrap();
        assert_eq!(valid_bins(&chirp, &bounds, &ap, 2), 16);
    }

    #[test]
    fn valid_bins_degenerate_and_clamped() {
        let chirp = ChirpConfig::reference(1e9);
        let at = Vec3::new(0.23, 0.0, 0.0);
        let ap = Aperture::from_poses(vec![Pose::monostatic(at)]).unwrap();
        let point = SceneBounds { center: at, side: 0.0 };
        assert_eq!(valid_bins(&chirp, &point, &ap, 3), 3);
        let bounds = SceneBounds::new(Vec3::zeros(), 0.36).unwrap();
        assert_eq!(valid_bins(&chirp, &bounds, &ap, 1000), 256);
    }

    #[test]
    fn midpoint_transform() {
        let pair = Pose { tx: Vec3::new(1.0, 0.0, 0.0), rx: Vec3::new(-1.0, 0.0, 0.0) };
        let mono = Pose::monostatic(Vec3::new(0.3, 0.2, 0.1));
        let out = multistatic_to_monostatic(&[pair, mono]);
        assert_eq!(out[0], Pose::monostatic(Vec3::zeros()));
        assert_eq!(out[1], mono);
    }

    #[test]
    fn midpoint_error_small_baseline() {
        let pair = Pose { tx: Vec3::new(0.23, 0.0, 0.01), rx: Vec3::new(0.23, 0.0, -0.01) };
        let target = Vec3::zeros();
        let d = round_trip_delay(&pair, &target).unwrap();
        let virt = multistatic_to_monostatic(&[pair])[0];
        let err = (0.5 * (d.r_t + d.r_r) - (virt.tx - target).norm()).abs();
        assert!(err < 2.2e-4, "{err}");
        assert!(err <= phase_center_error_bound(pair.baseline(), 0.23));
    }
}
