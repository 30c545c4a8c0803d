//! Reconstruction quality metrics.
//!
//! Conventions:
//!
//! - IoU binarizes each volume at `rel_threshold` times its own maximum.
//! - Chamfer distance is the symmetric mean-of-means, halved:
//!   (mean_a d(a, B) + mean_b d(b, A)) / 2.
//! - Hausdorff distance is the larger of the two directed maxima.
//! - PSNR and SSIM first scale each volume by its own maximum so values lie
//!   in [0, 1]. PSNR is capped at [`PSNR_CAP`] dB.
//! - SSIM averages the three axis-aligned central slices, each scored with a
//!   7x7 uniform window over every fully contained position.

use crate::scene::VoxelField;
use crate::{Error, Result, Vec3};

pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 7;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;
/// Below this many points nearest-neighbor queries use brute force.
pub const BRUTE_FORCE_LIMIT: usize = 2000;

fn check_grids(a: &VoxelField, b: &VoxelField) -> Result<()> {
    if !a.same_grid(b) {
        return Err(Error::ShapeMismatch(format!(
            "grids differ: {:?} over {:?} vs {:?} over {:?}",
            a.resolution, a.bounds, b.resolution, b.bounds
        )));
    }
    Ok(())
}

fn mask(f: &VoxelField, rel: f64) -> Vec<bool> {
    let max = f.max_sigma();
    if max <= 0.0 {
        return vec![false; f.len()];
    }
    f.values.iter().map(|&v| v >= rel * max).collect()
}

pub fn iou(a: &VoxelField, b: &VoxelField, rel_threshold: f64) -> Result<f64> {
    check_grids(a, b)?;
    let (ma, mb) = (mask(a, rel_threshold), mask(b, rel_threshold));
    let inter = ma.iter().zip(&mb).filter(|(x, y)| **x && **y).count();
    let union = ma.iter().zip(&mb).filter(|(x, y)| **x || **y).count();
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Exact nearest-neighbor index: uniform buckets over the bounding box.
pub struct NearestIndex<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    /// Bucket start offsets into `order`, length cells + 1.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> NearestIndex<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        assert!(!points.is_empty());
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = hi - lo;
        let volume_side = extent.max().max(1e-12);
        let target = (points.len() as f64).cbrt().max(1.0);
        let cell = volume_side / target;
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).floor() as usize + 1).min(1 << 10));
        let cell_of = |p: &Vec3| -> usize {
            let c = [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell) as usize).min(dims[a] - 1));
            c[0] + dims[0] * (c[1] + dims[1] * c[2])
        };
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut counts = vec![0usize; n_cells + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 0..n_cells {
            counts[i + 1] += counts[i];
        }
        let mut fill = counts.clone();
        let mut order = vec![0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            order[fill[c]] = i;
            fill[c] += 1;
        }
        Self { points, origin: lo, cell, dims, starts: counts, order }
    }

    /// Distance from `q` to the closest indexed point.
    pub fn nearest(&self, q: &Vec3) -> f64 {
        let c0 = [0, 1, 2].map(|a| {
            let x = ((q[a] - self.origin[a]) / self.cell).floor();
            x.clamp(0.0, (self.dims[a] - 1) as f64) as i64
        });
        let mut best = f64::INFINITY;
        let max_ring = *self.dims.iter().max().expect("3 axes") as i64;
        for r in 0..=max_ring {
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let c = [c0[0] + dx, c0[1] + dy, c0[2] + dz];
                        if (0..3).any(|a| c[a] < 0 || c[a] >= self.dims[a] as i64) {
                            continue;
                        }
                        let id = c[0] as usize + self.dims[0] * (c[1] as usize + self.dims[1] * c[2] as usize);
                        for &i in &self.order[self.starts[id]..self.starts[id + 1]] {
                            best = best.min((self.points[i] - q).norm());
                        }
                    }
                }
            }
            // Cells beyond ring r are at least r cells away from q.
            if best <= r as f64 * self.cell {
                break;
            }
        }
        best
    }
}

fn brute_nearest(points: &[Vec3], q: &Vec3) -> f64 {
    points.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min)
}

/// Nearest-neighbor distance from every point of `from` to the set `to`.
pub fn directed_distances(from: &[Vec3], to: &[Vec3]) -> Result<Vec<f64>> {
    if from.is_empty() || to.is_empty() {
        return Err(Error::EmptySet);
    }
    if to.len() < BRUTE_FORCE_LIMIT {
        return Ok(from.iter().map(|q| brute_nearest(to, q)).collect());
    }
    let index = NearestIndex::new(to);
    Ok(from.iter().map(|q| index.nearest(q)).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    let ab = directed_distances(a, b)?;
    let ba = directed_distances(b, a)?;
    Ok(0.5 * (mean(&ab) + mean(&ba)))
}

pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    let ab = directed_distances(a, b)?;
    let ba = directed_distances(b, a)?;
    Ok(ab.iter().chain(&ba).copied().fold(0.0, f64::max))
}

/// Values divided by the field maximum (unchanged when the maximum is <= 0),
/// with negatives clamped to 0.
pub fn normalized(f: &VoxelField) -> Vec<f64> {
    let max = f.max_sigma();
    let s = if max > 0.0 { 1.0 / max } else { 1.0 };
    f.values.iter().map(|&v| v.max(0.0) * s).collect()
}

pub fn psnr(a: &VoxelField, b: &VoxelField) -> Result<f64> {
    check_grids(a, b)?;
    let (na, nb) = (normalized(a), normalized(b));
    let mse = na.iter().zip(&nb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / na.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

/// A row-major 2D image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<f64>,
}

/// The central slice of normalized values perpendicular to `axis`.
pub fn central_slice(f: &VoxelField, values: &[f64], axis: usize) -> Image {
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let (width, height) = (f.resolution[u], f.resolution[v]);
    let mid = f.resolution[axis] / 2;
    let mut pixels = Vec::with_capacity(width * height);
    for j in 0..height {
        for i in 0..width {
            let mut c = [0; 3];
            c[axis] = mid;
            c[u] = i;
            c[v] = j;
            pixels.push(values[f.index(c[0], c[1], c[2])]);
        }
    }
    Image { width, height, pixels }
}

/// Summed-area table with a zero first row and column.
fn integral(img: &Image, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let w = img.width + 1;
    let mut t = vec![0.0; w * (img.height + 1)];
    for j in 0..img.height {
        let mut row = 0.0;
        for i in 0..img.width {
            row += f(j * img.width + i);
            t[(j + 1) * w + i + 1] = t[j * w + i + 1] + row;
        }
    }
    t
}

/// Mean SSIM of two equally sized images; the window shrinks to the image
/// size along axes shorter than [`SSIM_WINDOW`].
pub fn ssim_image(a: &Image, b: &Image) -> f64 {
    assert_eq!((a.width, a.height), (b.width, b.height));
    let (wx, wy) = (SSIM_WINDOW.min(a.width), SSIM_WINDOW.min(a.height));
    let sa = integral(a, |i| a.pixels[i]);
    let sb = integral(b, |i| b.pixels[i]);
    let saa = integral(a, |i| a.pixels[i] * a.pixels[i]);
    let sbb = integral(b, |i| b.pixels[i] * b.pixels[i]);
    let sab = integral(a, |i| a.pixels[i] * b.pixels[i]);
    let w = a.width + 1;
    let rect = |t: &[f64], x: usize, y: usize| {
        t[(y + wy) * w + x + wx] - t[y * w + x + wx] - t[(y + wy) * w + x] + t[y * w + x]
    };
    let n = (wx * wy) as f64;
    let mut total = 0.0;
    let mut count = 0;
    for y in 0..=a.height - wy {
        for x in 0..=a.width - wx {
            let (ma, mb) = (rect(&sa, x, y) / n, rect(&sb, x, y) / n);
            let va = rect(&saa, x, y) / n - ma * ma;
            let vb = rect(&sbb, x, y) / n - mb * mb;
            let cov = rect(&sab, x, y) / n - ma * mb;
            total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
            count += 1;
        }
    }
    total / count as f64
}

pub fn ssim(a: &VoxelField, b: &VoxelField) -> Result<f64> {
    check_grids(a, b)?;
    let (na, nb) = (normalized(a), normalized(b));
    Ok((0..3).map(|axis| ssim_image(&central_slice(a, &na, axis), &central_slice(b, &nb, axis))).sum::<f64>() / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub iou: f64,
    pub chamfer: f64,
    pub hausdorff: f64,
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    pub const COLUMNS: [&'static str; 5] = ["iou", "chamfer", "hausdorff", "psnr", "ssim"];

    /// Scores a predicted volume against a ground-truth volume on the same
    /// grid; point clouds are voxel centers at or above `rel_threshold` of
    /// each volume's maximum.
    pub fn compute(pred: &VoxelField, gt: &VoxelField, rel_threshold: f64) -> Result<Self> {
        check_grids(pred, gt)?;
        let pa = crate::scene::extract_pointcloud(pred, rel_threshold)?;
        let pb = crate::scene::extract_pointcloud(gt, rel_threshold)?;
        Ok(Self {
            iou: iou(pred, gt, rel_threshold)?,
            chamfer: chamfer(&pa, &pb)?,
            hausdorff: hausdorff(&pa, &pb)?,
            psnr: psnr(pred, gt)?,
            ssim: ssim(pred, gt)?,
        })
    }

    pub fn cells(&self) -> Vec<String> {
        [self.iou, self.chamfer, self.hausdorff, self.psnr, self.ssim].iter().map(|v| v.to_string()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SceneBounds;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(res: [usize; 3]) -> VoxelField {
        VoxelField::zeros(SceneBounds::new(Vec3::zeros(), 1.0).unwrap(), res).unwrap()
    }

    #[test]
    fn iou_cases() {
        let mut a = grid([4, 4, 4]);
        a.values[..8].iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(iou(&a, &a, 0.5).unwrap(), 1.0);
        let mut b = grid([4, 4, 4]);
        b.values[8..16].iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(iou(&a, &b, 0.5).unwrap(), 0.0);
        let mut c = grid([4, 4, 4]);
        c.values[4..12].iter_mut().for_each(|v| *v = 1.0);
        assert!((iou(&a, &c, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(iou(&grid([4, 4, 4]), &grid([4, 4, 4]), 0.5).unwrap(), 1.0);
        assert!(matches!(iou(&a, &grid([4, 4, 5]), 0.5), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn chamfer_and_hausdorff_cases() {
        let a = vec![Vec3::new(0.0, 0.0, 0.0)];
        let b = vec![Vec3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&a, &b).unwrap(), 1.0);
        let square: Vec<Vec3> =
            [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
        let shifted: Vec<Vec3> = square.iter().map(|p| p + Vec3::new(0.1, 0.0, 0.0)).collect();
        assert!((chamfer(&square, &shifted).unwrap() - 0.1).abs() < 1e-15);
        let pair = vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-3.0, 0.0, 0.0)];
        assert_eq!(hausdorff(&a, &pair).unwrap(), 3.0);
        assert!(matches!(chamfer(&a, &[]), Err(Error::EmptySet)));
        assert!(matches!(hausdorff(&[], &a), Err(Error::EmptySet)));
    }

    #[test]
    fn grid_index_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut pt =
            |s: f64| Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(0.0..s * 0.1));
        let cloud: Vec<Vec3> = (0..5000).map(|_| pt(1.0)).collect();
        let queries: Vec<Vec3> = (0..300).map(|_| pt(2.0)).collect();
        let index = NearestIndex::new(&cloud);
        for q in &queries {
            assert_eq!(index.nearest(q), brute_nearest(&cloud, q));
        }
    }

    #[test]
    fn psnr_cases() {
        let mut a = grid([4, 4, 4]);
        a.values.iter_mut().enumerate().for_each(|(i, v)| *v = (i % 5) as f64);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP);
        let ones = VoxelField::filled(a.bounds, a.resolution, 1.0).unwrap();
        assert!((psnr(&grid([4, 4, 4]), &ones).unwrap() - 0.0).abs() < 1e-12);
        // Peak voxel pinned at 1 in both; all others differ by 0.1.
        let mut x = VoxelField::filled(a.bounds, a.resolution, 0.5).unwrap();
        let mut y = VoxelField::filled(a.bounds, a.resolution, 0.6).unwrap();
        x.values[0] = 1.0;
        y.values[0] = 1.0;
        let mse: f64 = 0.01 * 63.0 / 64.0;
        assert!((psnr(&x, &y).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-9);
    }

    fn ssim_direct(a: &Image, b: &Image) -> f64 {
        let (wx, wy) = (SSIM_WINDOW.min(a.width), SSIM_WINDOW.min(a.height));
        let mut total = 0.0;
        let mut count = 0.0;
        for y in 0..=a.height - wy {
            for x in 0..=a.width - wx {
                let mut pa = Vec::new();
                let mut pb = Vec::new();
                for j in y..y + wy {
                    for i in x..x + wx {
                        pa.push(a.pixels[j * a.width + i]);
                        pb.push(b.pixels[j * a.width + i]);
                    }
                }
                let n = pa.len() as f64;
                let ma = pa.iter().sum::<f64>() / n;
                let mb = pb.iter().sum::<f64>() / n;
                let va = pa.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / n;
                let vb = pb.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / n;
                let cov = pa.iter().zip(&pb).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1.0;
            }
        }
        total / count
    }

    #[test]
    fn ssim_matches_direct_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut a = grid([12, 10, 9]);
        let mut b = grid([12, 10, 9]);
        for (x, y) in a.values.iter_mut().zip(b.values.iter_mut()) {
            *x = rng.random_range(0.0..1.0);
            *y = 0.6 * *x + 0.4 * rng.random_range(0.0..1.0);
        }
        let (na, nb) = (normalized(&a), normalized(&b));
        let mut direct = 0.0;
        for axis in 0..3 {
            direct += ssim_direct(&central_slice(&a, &na, axis), &central_slice(&b, &nb, axis)) / 3.0;
        }
        assert!((ssim(&a, &b).unwrap() - direct).abs() < 1e-10);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_penalizes_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = Image { width: 16, height: 16, pixels: (0..256).map(|_| rng.random_range(0.0..0.5)).collect() };
        let shifted = Image { pixels: img.pixels.iter().map(|v| v + 0.5).collect(), ..img.clone() };
        assert!((ssim_image(&img, &img) - 1.0).abs() < 1e-12);
        assert!(ssim_image(&img, &shifted) < 1.0);
    }

    #[test]
    fn report_identity() {
        let mut a = grid([8, 8, 8]);
        let i = a.index(3, 4, 5);
        a.values[i] = 2.0;
        let r = MetricReport::compute(&a, &a, 0.5).unwrap();
        assert_eq!((r.iou, r.chamfer, r.hausdorff, r.psnr), (1.0, 0.0, 0.0, PSNR_CAP));
        assert!((r.ssim - 1.0).abs() < 1e-12);
    }
}
