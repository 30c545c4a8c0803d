//! Scatterer fields: ground-truth point sets, optimizable voxel grids and
//! coordinate networks, plus the quadrature grid that discretizes the
//! forward integral and point-cloud extraction for metrics.

mod inr;
mod voxel;

use std::f64::consts::PI;
use std::ops::Range;

pub use inr::{softplus, InrConfig, InrField};
pub use voxel::VoxelField;

use crate::geometry::{Aperture, SceneBounds};
use crate::{Error, Result, Vec3};

/// A reflectivity field sigma(x) with a flat, optimizable parameter vector.
pub trait Field: Send + Sync {
    fn bounds(&self) -> &SceneBounds;

    /// sigma at each position; zero outside the bounds.
    fn sample(&self, positions: &[Vec3]) -> Vec<f64>;

    /// Gradient of sum_i upstream[i] * sigma(positions[i]) with respect to
    /// every parameter.
    fn param_gradient(&self, positions: &[Vec3], upstream: &[f64]) -> Vec<f64>;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Restores parameter constraints after an optimizer step.
    fn project(&mut self) {}

    /// Parameter range of the first layer, used for gradient telemetry.
    fn first_layer(&self) -> Range<usize>;

    /// Samples the field at the voxel centers of a grid over its bounds.
    fn rasterize(&self, resolution: [usize; 3]) -> Result<VoxelField>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointScatterer {
    pub position: Vec3,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointScatterers {
    pub points: Vec<PointScatterer>,
}

impl PointScatterers {
    pub fn new(points: Vec<PointScatterer>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !(p.intensity >= 0.0 && p.intensity.is_finite())) {
            return Err(Error::config(format!("scatterer intensity must be finite and >= 0, got {}", p.intensity)));
        }
        Ok(Self { points })
    }

    pub fn unit(positions: impl IntoIterator<Item = Vec3>) -> Self {
        Self { points: positions.into_iter().map(|position| PointScatterer { position, intensity: 1.0 }).collect() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn translated(mut self, offset: Vec3) -> Self {
        for p in &mut self.points {
            p.position += offset;
        }
        self
    }

    pub fn check_inside(&self, bounds: &SceneBounds) -> Result<()> {
        match self.points.iter().find(|p| !bounds.contains(&p.position)) {
            Some(p) => {
                Err(Error::config(format!("scatterer at {:?} lies outside the scene bounds", p.position.as_slice())))
            }
            None => Ok(()),
        }
    }

    /// Sum of intensities of points within `radius` of each position.
    pub fn sample(&self, positions: &[Vec3], radius: f64) -> Vec<f64> {
        positions
            .iter()
            .map(|q| self.points.iter().filter(|p| (p.position - q).norm() <= radius).map(|p| p.intensity).sum())
            .collect()
    }

    /// Bins every point into its containing voxel, summing intensities.
    pub fn rasterize(&self, bounds: SceneBounds, resolution: [usize; 3]) -> Result<VoxelField> {
        let mut grid = VoxelField::zeros(bounds, resolution)?;
        for p in &self.points {
            if let Some(i) = grid.voxel_of(&p.position) {
                grid.values[i] += p.intensity;
            }
        }
        Ok(grid)
    }

    /// Drops points closer than `clearance` to any antenna.
    pub fn clear_of(&self, aperture: &Aperture, clearance: f64) -> Self {
        let points =
            self.points.iter().filter(|p| min_antenna_distance(&p.position, aperture) >= clearance).copied().collect();
        Self { points }
    }
}

/// Quadrature nodes for the scene integral.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySet {
    pub positions: Vec<Vec3>,
    /// Volume element per node, m^3.
    pub weights: Vec<f64>,
}

impl QuerySet {
    pub fn new(positions: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if positions.len() != weights.len() {
            return Err(Error::LengthMismatch { expected: positions.len(), actual: weights.len() });
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::config("quadrature weights must be positive"));
        }
        Ok(Self { positions, weights })
    }

    /// Point scatterers as unit-weight nodes carrying their intensities.
    pub fn from_points(points: &PointScatterers) -> (Self, Vec<f64>) {
        let positions = points.positions();
        let weights = vec![1.0; positions.len()];
        let sigma = points.points.iter().map(|p| p.intensity).collect();
        (Self { positions, weights }, sigma)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Keeps nodes at least `clearance` from every antenna; returns the
    /// indices that survived.
    pub fn retain_clear_of(&mut self, aperture: &Aperture, clearance: f64) -> Vec<usize> {
        let keep: Vec<usize> =
            (0..self.len()).filter(|&i| min_antenna_distance(&self.positions[i], aperture) >= clearance).collect();
        self.positions = keep.iter().map(|&i| self.positions[i]).collect();
        self.weights = keep.iter().map(|&i| self.weights[i]).collect();
        keep
    }
}

fn min_antenna_distance(x: &Vec3, aperture: &Aperture) -> f64 {
    aperture.poses.iter().map(|p| (p.tx - x).norm().min((p.rx - x).norm())).fold(f64::INFINITY, f64::min)
}

/// Voxel-center quadrature nodes, each weighted by the voxel volume.
pub fn make_query_grid(bounds: &SceneBounds, resolution: [usize; 3]) -> Result<QuerySet> {
    let grid = VoxelField::zeros(*bounds, resolution)?;
    let w = grid.cell_volume();
    Ok(QuerySet { positions: grid.centers(), weights: vec![w; grid.len()] })
}

/// Sinusoidal sheet z = amplitude * sin(2 pi (base_freq y + growth y^2 / 2))
/// sampled on an (x, y) lattice over [-extent/2, extent/2]^2, centered on the
/// origin. The local spatial frequency at y is base_freq + growth * y.
pub fn sheet_benchmark(
    amplitude: f64,
    base_freq: f64,
    growth: f64,
    extent: f64,
    sample_spacing: f64,
) -> Result<PointScatterers> {
    if !(sample_spacing > 0.0 && sample_spacing.is_finite()) {
        return Err(Error::config("sheet sample spacing must be positive"));
    }
    let n = (extent / sample_spacing).floor() as usize;
    let start = -0.5 * (n.saturating_sub(1)) as f64 * sample_spacing;
    let mut points = Vec::with_capacity(n * n);
    for iy in 0..n {
        let y = start + iy as f64 * sample_spacing;
        let z = sheet_height(amplitude, base_freq, growth, y);
        for ix in 0..n {
            let x = start + ix as f64 * sample_spacing;
            points.push(PointScatterer { position: Vec3::new(x, y, z), intensity: 1.0 });
        }
    }
    Ok(PointScatterers { points })
}

pub fn sheet_height(amplitude: f64, base_freq: f64, growth: f64, y: f64) -> f64 {
    amplitude * (2.0 * PI * (base_freq * y + 0.5 * growth * y * y)).sin()
}

/// Points on a sphere of `radius` around `center`, Fibonacci lattice.
pub fn sphere_shell(center: Vec3, radius: f64, n_points: usize) -> PointScatterers {
    let golden = PI * (3.0 - 5f64.sqrt());
    PointScatterers::unit((0..n_points).map(|i| {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n_points as f64;
        let r = (1.0 - z * z).sqrt();
        let theta = golden * i as f64;
        center + radius * Vec3::new(r * theta.cos(), r * theta.sin(), z)
    }))
}

/// Voxel centers whose value reaches `rel_threshold` of the maximum.
pub fn extract_pointcloud(grid: &VoxelField, rel_threshold: f64) -> Result<Vec<Vec3>> {
    if !(rel_threshold > 0.0 && rel_threshold <= 1.0) {
        return Err(Error::config(format!("relative threshold must lie in (0, 1], got {rel_threshold}")));
    }
    let max = grid.max_sigma();
    if max <= 0.0 {
        return Err(Error::EmptyField);
    }
    let cut = rel_threshold * max;
    Ok((0..grid.len()).filter(|&i| grid.values[i] >= cut).map(|i| grid.center_of(i)).collect())
}

/// For every line of voxels parallel to `axis`, the center of its largest
/// voxel. Lines that are entirely zero are skipped.
pub fn line_argmax(grid: &VoxelField, axis: usize) -> Vec<Vec3> {
    assert!(axis < 3);
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let res = grid.resolution;
    let mut out = Vec::new();
    for j in 0..res[v] {
        for i in 0..res[u] {
            let mut best: Option<(usize, f64)> = None;
            for t in 0..res[axis] {
                let mut c = [0usize; 3];
                c[u] = i;
                c[v] = j;
                c[axis] = t;
                let idx = grid.index(c[0], c[1], c[2]);
                let val = grid.values[idx];
                if val > 0.0 && best.is_none_or(|(_, b)| val > b) {
                    best = Some((idx, val));
                }
            }
            if let Some((idx, _)) = best {
                out.push(grid.center_of(idx));
            }
        }
    }
    out
}
