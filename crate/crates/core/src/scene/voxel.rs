use std::ops::Range;

use super::Field;
use crate::geometry::SceneBounds;
use crate::{Error, Result, Vec3};

/// Scalar field stored at voxel centers of a regular grid, x-fastest.
///
/// Values are clamped at zero by [`Field::project`]; sampling reads
/// `max(value, 0)` so a field that was never projected still reports a
/// nonnegative reflectivity.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelField {
    pub bounds: SceneBounds,
    pub resolution: [usize; 3],
    pub values: Vec<f64>,
}

impl VoxelField {
    pub fn zeros(bounds: SceneBounds, resolution: [usize; 3]) -> Result<Self> {
        Self::filled(bounds, resolution, 0.0)
    }

    pub fn filled(bounds: SceneBounds, resolution: [usize; 3], value: f64) -> Result<Self> {
        if resolution.contains(&0) {
            return Err(Error::config(format!("voxel resolution must be >= 1 per axis, got {resolution:?}")));
        }
        Ok(Self { bounds, resolution, values: vec![value; resolution.iter().product()] })
    }

    pub fn from_values(bounds: SceneBounds, resolution: [usize; 3], values: Vec<f64>) -> Result<Self> {
        let mut field = Self::zeros(bounds, resolution)?;
        if values.len() != field.values.len() {
            return Err(Error::LengthMismatch { expected: field.values.len(), actual: values.len() });
        }
        field.values = values;
        Ok(field)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> Vec3 {
        let s = self.bounds.side;
        Vec3::new(s / self.resolution[0] as f64, s / self.resolution[1] as f64, s / self.resolution[2] as f64)
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().product()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        ix + self.resolution[0] * (iy + self.resolution[1] * iz)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let [nx, ny, _] = self.resolution;
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    pub fn center_of(&self, index: usize) -> Vec3 {
        let c = self.coords(index);
        let h = self.spacing();
        let lo = self.bounds.min_corner();
        Vec3::new(
            lo[0] + (c[0] as f64 + 0.5) * h[0],
            lo[1] + (c[1] as f64 + 0.5) * h[1],
            lo[2] + (c[2] as f64 + 0.5) * h[2],
        )
    }

    pub fn centers(&self) -> Vec<Vec3> {
        (0..self.len()).map(|i| self.center_of(i)).collect()
    }

    /// Voxel containing `p`, or `None` outside the bounds.
    pub fn voxel_of(&self, p: &Vec3) -> Option<usize> {
        if !self.bounds.contains(p) {
            return None;
        }
        let h = self.spacing();
        let lo = self.bounds.min_corner();
        let mut c = [0usize; 3];
        for a in 0..3 {
            let u = ((p[a] - lo[a]) / h[a]).floor();
            c[a] = (u.max(0.0) as usize).min(self.resolution[a] - 1);
        }
        Some(self.index(c[0], c[1], c[2]))
    }

    /// Nonnegative reflectivity at every voxel.
    pub fn sigma(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.max(0.0)).collect()
    }

    pub fn max_sigma(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v))
    }

    /// Index of the largest value (first one on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn same_grid(&self, other: &VoxelField) -> bool {
        self.bounds == other.bounds && self.resolution == other.resolution
    }

    /// Eight (voxel index, weight) pairs for trilinear interpolation at `p`,
    /// or `None` outside the bounds. Coordinates beyond the outermost voxel
    /// centers clamp to the edge value.
    #[inline]
    pub fn trilinear(&self, p: &Vec3) -> Option<[(usize, f64); 8]> {
        if !self.bounds.contains(p) {
            return None;
        }
        let h = self.spacing();
        let lo = self.bounds.min_corner();
        let mut base = [0usize; 3];
        let mut next = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..3 {
            let n = self.resolution[a];
            let u = ((p[a] - lo[a]) / h[a] - 0.5).clamp(0.0, (n - 1) as f64);
            let i0 = (u.floor() as usize).min(n.saturating_sub(2));
            base[a] = i0;
            next[a] = (i0 + 1).min(n - 1);
            frac[a] = if n == 1 { 0.0 } else { u - i0 as f64 };
        }
        let mut out = [(0usize, 0.0f64); 8];
        for (corner, slot) in out.iter_mut().enumerate() {
            let mut w = 1.0;
            let mut c = [0usize; 3];
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    c[a] = next[a];
                    w *= frac[a];
                } else {
                    c[a] = base[a];
                    w *= 1.0 - frac[a];
                }
            }
            *slot = (self.index(c[0], c[1], c[2]), w);
        }
        Some(out)
    }
}

impl Field for VoxelField {
    fn bounds(&self) -> &SceneBounds {
        &self.bounds
    }

    fn sample(&self, positions: &[Vec3]) -> Vec<f64> {
        positions
            .iter()
            .map(|p| match self.trilinear(p) {
                Some(taps) => taps.iter().map(|&(i, w)| w * self.values[i].max(0.0)).sum(),
                None => 0.0,
            })
            .collect()
    }

    fn param_gradient(&self, positions: &[Vec3], upstream: &[f64]) -> Vec<f64> {
        assert_eq!(positions.len(), upstream.len());
        let mut grad = vec![0.0; self.values.len()];
        for (p, &g) in positions.iter().zip(upstream) {
            if g == 0.0 {
                continue;
            }
            if let Some(taps) = self.trilinear(p) {
                for (i, w) in taps {
                    // d max(v, 0)/dv is taken as 1 at v = 0 so voxels
                    // clamped to zero can grow again.
                    if self.values[i] >= 0.0 {
                        grad[i] += g * w;
                    }
                }
            }
        }
        grad
    }

    fn params(&self) -> &[f64] {
        &self.values
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn project(&mut self) {
        for v in &mut self.values {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
    }

    fn first_layer(&self) -> Range<usize> {
        0..self.values.len()
    }

    fn rasterize(&self, resolution: [usize; 3]) -> Result<VoxelField> {
        if resolution == self.resolution {
            let mut out = self.clone();
            out.project();
            return Ok(out);
        }
        let mut out = VoxelField::zeros(self.bounds, resolution)?;
        out.values = self.sample(&out.centers());
        Ok(out)
    }
}
