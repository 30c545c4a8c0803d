use rand::Rng;

use crate::scene::Field;
use crate::Vec3;

fn uniform_in_box(rng: &mut impl Rng, lo: &Vec3, hi: &Vec3) -> Vec3 {
    Vec3::new(rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2]))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Monte-Carlo estimate of E|sigma(x) - sigma(x + d)| with x uniform in the
/// field bounds and d uniform in [-epsilon, epsilon]^3. Perturbed points are
/// clamped back into the bounds. Returns the value and its parameter
/// gradient.
pub fn smoothness_reg<F: Field + ?Sized>(
    field: &F,
    epsilon: f64,
    n_samples: usize,
    rng: &mut impl Rng,
) -> (f64, Vec<f64>) {
    assert!(n_samples >= 1 && epsilon > 0.0);
    let b = field.bounds();
    let (lo, hi) = (b.min_corner(), b.max_corner());
    let mut positions = Vec::with_capacity(2 * n_samples);
    for _ in 0..n_samples {
        let x = uniform_in_box(rng, &lo, &hi);
        let d = Vec3::new(
            rng.random_range(-epsilon..epsilon),
            rng.random_range(-epsilon..epsilon),
            rng.random_range(-epsilon..epsilon),
        );
        positions.push(x);
        positions.push((x + d).sup(&lo).inf(&hi));
    }
    let sigma = field.sample(&positions);
    let inv = 1.0 / n_samples as f64;
    let mut value = 0.0;
    let mut upstream = vec![0.0; positions.len()];
    for i in 0..n_samples {
        let diff = sigma[2 * i] - sigma[2 * i + 1];
        value += diff.abs() * inv;
        let s = sign(diff) * inv;
        upstream[2 * i] = s;
        upstream[2 * i + 1] = -s;
    }
    (value, field.param_gradient(&positions, &upstream))
}

/// Monte-Carlo estimate of E|sigma(x)| over the field bounds.
pub fn sparsity_reg<F: Field + ?Sized>(field: &F, n_samples: usize, rng: &mut impl Rng) -> (f64, Vec<f64>) {
    assert!(n_samples >= 1);
    let b = field.bounds();
    let (lo, hi) = (b.min_corner(), b.max_corner());
    let positions: Vec<Vec3> = (0..n_samples).map(|_| uniform_in_box(rng, &lo, &hi)).collect();
    let sigma = field.sample(&positions);
    let inv = 1.0 / n_samples as f64;
    let value = sigma.iter().map(|s| s.abs()).sum::<f64>() * inv;
    let upstream: Vec<f64> = sigma.iter().map(|&s| sign(s) * inv).collect();
    (value, field.param_gradient(&positions, &upstream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SceneBounds;
    use crate::scene::VoxelField;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cube() -> SceneBounds {
        SceneBounds::new(Vec3::zeros(), 0.36).unwrap()
    }

    #[test]
    fn constant_field() {
        let f = VoxelField::filled(cube(), [8, 8, 8], 0.7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (s, _) = smoothness_reg(&f, 0.01, 1000, &mut rng);
        assert!(s.abs() < 1e-12);
        let (sp, _) = sparsity_reg(&f, 1000, &mut rng);
        assert!((sp - 0.7).abs() < 1e-12);
        let zero = VoxelField::zeros(cube(), [8, 8, 8]).unwrap();
        assert_eq!(sparsity_reg(&zero, 100, &mut rng).0, 0.0);
    }

    #[test]
    fn ramp_matches_expected_displacement() {
        let b = cube();
        let res = [64, 4, 4];
        let mut f = VoxelField::zeros(b, res).unwrap();
        let slope = 10.0;
        for i in 0..f.len() {
            let c = f.center_of(i);
            f.values[i] = slope * (c[0] + 0.2);
        }
        let eps = 0.004;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let (s, _) = smoothness_reg(&f, eps, n, &mut rng);
        let expected = slope * eps / 2.0;
        // Standard error of |U| * slope is slope * eps / sqrt(12 n); edge
        // clamping removes at most a fraction eps/side of the samples.
        let tol = 4.0 * slope * eps / (12.0 * n as f64).sqrt() + expected * 2.0 * eps / b.side;
        assert!((s - expected).abs() < tol, "{s} vs {expected} (tol {tol})");
        let (tiny, _) = smoothness_reg(&f, 1e-9, 1000, &mut rng);
        assert!(tiny < 1e-7);
    }

    #[test]
    fn spike_volume_fraction() {
        let res = [64, 64, 64];
        let mut f = VoxelField::zeros(cube(), res).unwrap();
        let i = f.index(30, 31, 32);
        f.values[i] = 1.0;
        // Trilinear sampling spreads the spike over a 2x2x2-voxel support
        // whose integral is one voxel volume.
        let n = 2_000_000;
        let (s, _) = sparsity_reg(&f, n, &mut ChaCha8Rng::seed_from_u64(3));
        let expected = 1.0 / 64f64.powi(3);
        let p = 8.0 / 64f64.powi(3);
        let tol = 4.0 * (p / n as f64).sqrt();
        assert!((s - expected).abs() < tol, "{s} vs {expected}");
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut f = VoxelField::zeros(cube(), [6, 6, 6]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for v in f.values.iter_mut() {
            *v = rng.random_range(0.1..1.0);
        }
        let eval = |f: &VoxelField| {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            let (a, ga) = smoothness_reg(f, 0.03, 200, &mut r);
            let (b, gb) = sparsity_reg(f, 200, &mut r);
            (a + b, ga.iter().zip(&gb).map(|(x, y)| x + y).collect::<Vec<_>>())
        };
        let (_, g) = eval(&f);
        let h = 1e-7;
        for i in [0, 17, 100, 215] {
            let mut p = f.clone();
            p.values[i] += h;
            let up = eval(&p).0;
            p.values[i] -= 2.0 * h;
            let down = eval(&p).0;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "{i}: {fd} vs {}", g[i]);
        }
    }
}
