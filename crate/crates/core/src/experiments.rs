//! Bundled scenes, simulation helpers, the forward-model benchmark, the
//! ablation sweeps and the gradient check harness.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::forward::{spectral_forward, ForwardKind, ForwardModel};
use crate::geometry::{cylindrical_aperture, valid_bins, Aperture, SceneBounds, DEFAULT_BIN_MARGIN};
use crate::io::{CsvTable, MeasurementSet};
use crate::metrics::{chamfer, MetricReport};
use crate::recon::{backprojection, train, LossWeights, Method, Objective, TrainConfig};
use crate::scene::{
    extract_pointcloud, line_argmax, sheet_benchmark, sheet_height, sphere_shell, Field, InrConfig, InrField,
    PointScatterers, QuerySet, VoxelField,
};
use crate::signal::{ChirpConfig, DftPlan, DEFAULT_START_FREQUENCY};
use crate::{Error, Result, Vec3, C64};

/// Radar, aperture and scene volume shared by the experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub chirp: ChirpConfig,
    pub aperture: Aperture,
    pub bounds: SceneBounds,
    pub margin: usize,
}

impl Setup {
    /// 0.36 m cube at the origin, 90 x 4 monostatic poses on a 0.23 m
    /// cylinder spanning 0.28 m in height, reference chirp at `f0`.
    pub fn reference(f0: f64) -> Self {
        Self {
            chirp: ChirpConfig::reference(f0),
            aperture: cylindrical_aperture(0.23, 90, 4, 0.28, Vec3::zeros()).expect("valid aperture"),
            bounds: SceneBounds::new(Vec3::zeros(), 0.36).expect("valid bounds"),
            margin: DEFAULT_BIN_MARGIN,
        }
    }

    pub fn k_bins(&self) -> usize {
        valid_bins(&self.chirp, &self.bounds, &self.aperture, self.margin)
    }
}

/// Synthesizes peak-normalized measurements of a point scene.
pub fn simulate(setup: &Setup, scene: &PointScatterers, kind: ForwardKind) -> Result<MeasurementSet> {
    scene.check_inside(&setup.bounds)?;
    let k = setup.k_bins();
    let (queries, sigma) = QuerySet::from_points(scene);
    let raw: Vec<Vec<C64>> = match kind {
        ForwardKind::RangeQuantized => {
            return Err(Error::config("measurements are simulated with the spectral or time model"));
        }
        _ => ForwardModel::new(kind, setup.chirp, k)
            .predict_all(&setup.aperture.poses, &queries, &sigma)?
            .into_iter()
            .map(|s| s.bins)
            .collect(),
    };
    MeasurementSet::normalized(setup.chirp, setup.aperture.clone(), k, raw)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BundledScene {
    Single,
    TwoPoints,
    SphereShell,
    Sheet,
}

impl BundledScene {
    pub const ALL: [BundledScene; 4] =
        [BundledScene::Single, BundledScene::TwoPoints, BundledScene::SphereShell, BundledScene::Sheet];

    pub fn name(&self) -> &'static str {
        match self {
            BundledScene::Single => "single",
            BundledScene::TwoPoints => "two",
            BundledScene::SphereShell => "sphere",
            BundledScene::Sheet => "sheet",
        }
    }

    /// Scene points placed on voxel centers of `grid` where the scene is
    /// discrete, so rasterized ground truth is exact.
    pub fn points(&self, grid: &VoxelField) -> PointScatterers {
        let snap = |p: Vec3| grid.center_of(grid.voxel_of(&p).expect("inside bounds"));
        let s = grid.bounds.side;
        let c = grid.bounds.center;
        match self {
            BundledScene::Single => PointScatterers::unit([snap(c + Vec3::new(0.01, -0.02, 0.015))]),
            BundledScene::TwoPoints => PointScatterers::unit([
                snap(c + Vec3::new(-0.2 * s, 0.05 * s, 0.0)),
                snap(c + Vec3::new(0.2 * s, -0.05 * s, 0.02 * s)),
            ]),
            BundledScene::SphereShell => sphere_shell(c, 0.2 * s, 160),
            BundledScene::Sheet => {
                let [amp, f, g] = sheet_parameters(s);
                sheet_benchmark(amp, f, g, 0.6 * s, s / 32.0).expect("positive spacing").translated(c)
            }
        }
    }
}

/// Amplitude (m), base frequency (1/m) and growth (1/m^2) of the bundled
/// sheet for a cube of side `side`.
pub fn sheet_parameters(side: f64) -> [f64; 3] {
    [0.04 * side / 0.36, 4.0, 20.0]
}

impl std::str::FromStr for BundledScene {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BundledScene::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scene '{s}' (single, two, sphere, sheet)")))
    }
}

/// Regularization used by the desk-scale experiments. The 4 x 90 aperture
/// leaves vertical ghosts that the library defaults (1e-2) barely suppress.
pub const DESK_WEIGHTS: LossWeights =
    LossWeights { lambda: 0.5, beta: 0.03, gamma: 0.03, epsilon: None, stage_fraction: 0.10 };

/// Desk-scale training settings for the sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskScale {
    pub resolution: [usize; 3],
    pub iterations: usize,
    pub voxel_init: f64,
    pub rel_threshold: f64,
    /// Loss weights of the regularized runs.
    pub weights: LossWeights,
    pub seed: u64,
}

impl Default for DeskScale {
    fn default() -> Self {
        Self {
            resolution: [32, 32, 32],
            iterations: 500,
            voxel_init: 0.1,
            rel_threshold: 0.5,
            weights: DESK_WEIGHTS,
            seed: 0,
        }
    }
}

impl DeskScale {
    pub fn train_config(&self, method: Method) -> TrainConfig {
        TrainConfig { method, iterations: self.iterations, seed: self.seed, ..TrainConfig::default() }
    }
}

/// Trains a voxel field with `method` and returns it with the history.
pub fn reconstruct_voxels(
    data: &MeasurementSet,
    bounds: &SceneBounds,
    desk: &DeskScale,
    method: Method,
    weights: &LossWeights,
) -> Result<(VoxelField, crate::recon::TrainHistory)> {
    let mut field = VoxelField::filled(*bounds, desk.resolution, desk.voxel_init)?;
    let history = train(&mut field, data, weights, &desk.train_config(method))?;
    Ok((field, history))
}

/// Chamfer distance between the thresholded reconstruction and the scene's
/// rasterized ground truth.
pub fn chamfer_to_truth(pred: &VoxelField, truth: &PointScatterers, rel_threshold: f64) -> Result<f64> {
    let gt = truth.rasterize(pred.bounds, pred.resolution)?;
    let a = extract_pointcloud(pred, rel_threshold)?;
    let b = extract_pointcloud(&gt, 1e-9)?;
    chamfer(&a, &b)
}

pub fn report_to_truth(pred: &VoxelField, truth: &PointScatterers, rel_threshold: f64) -> Result<MetricReport> {
    let gt = truth.rasterize(pred.bounds, pred.resolution)?;
    MetricReport::compute(pred, &gt, rel_threshold)
}

/// One row of the quality comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityRow {
    pub scene: BundledScene,
    pub method: &'static str,
    pub report: MetricReport,
}

/// Trains the spectral and range-quantized models and runs backprojection
/// on one bundled scene.
pub fn quality_comparison(setup: &Setup, scene: BundledScene, desk: &DeskScale) -> Result<Vec<QualityRow>> {
    let grid = VoxelField::zeros(setup.bounds, desk.resolution)?;
    let truth = scene.points(&grid);
    let data = simulate(setup, &truth, ForwardKind::SpectralClosedForm)?;
    let weights = desk.weights;
    let mut rows = Vec::new();
    for method in [Method::Spectral, Method::Rq] {
        let (field, _) = reconstruct_voxels(&data, &setup.bounds, desk, method, &weights)?;
        rows.push(QualityRow {
            scene,
            method: method.name(),
            report: report_to_truth(&field, &truth, desk.rel_threshold)?,
        });
    }
    let bp = backprojection(&data, &setup.bounds, desk.resolution)?;
    rows.push(QualityRow {
        scene,
        method: "backprojection",
        report: report_to_truth(&bp, &truth, desk.rel_threshold)?,
    });
    Ok(rows)
}

pub fn quality_table(rows: &[QualityRow]) -> CsvTable {
    let mut header = vec!["scene", "method"];
    header.extend(MetricReport::COLUMNS);
    let mut t = CsvTable::new(&header);
    for r in rows {
        let mut cells = vec![r.scene.name().to_string(), r.method.to_string()];
        cells.extend(r.report.cells());
        t.push(cells);
    }
    t
}

/// Fraction of sum(sigma^2) lying outside the ground-truth voxels dilated
/// by `dilation` voxels (Chebyshev distance).
pub fn spurious_energy_fraction(field: &VoxelField, truth: &VoxelField, dilation: usize) -> Result<f64> {
    if !field.same_grid(truth) {
        return Err(Error::ShapeMismatch("field and truth grids differ".into()));
    }
    let res = field.resolution;
    let mut inside = vec![false; field.len()];
    for i in (0..truth.len()).filter(|&i| truth.values[i] > 0.0) {
        let c = truth.coords(i);
        let range = |a: usize| c[a].saturating_sub(dilation)..=(c[a] + dilation).min(res[a] - 1);
        for z in range(2) {
            for y in range(1) {
                for x in range(0) {
                    inside[field.index(x, y, z)] = true;
                }
            }
        }
    }
    let energy = |keep: bool| -> f64 {
        field.values.iter().zip(&inside).filter(|(_, &m)| m == keep).map(|(v, _)| v.max(0.0) * v.max(0.0)).sum()
    };
    let (outside, total) = (energy(false), energy(false) + energy(true));
    if total == 0.0 {
        return Err(Error::EmptyField);
    }
    Ok(outside / total)
}

#[derive(Debug, Clone)]
pub struct RegularizationRow {
    pub regularized: bool,
    pub spurious_fraction: f64,
    pub chamfer: f64,
    pub field: VoxelField,
}

/// Training on the sphere shell with the regularizers of `desk.weights` switched
/// off and on, same seed. Intended for the ambiguous regime (f0 = 4 GHz).
pub fn regularization_ablation(setup: &Setup, desk: &DeskScale) -> Result<[RegularizationRow; 2]> {
    let weights = &desk.weights;
    let grid = VoxelField::zeros(setup.bounds, desk.resolution)?;
    let truth = BundledScene::SphereShell.points(&grid);
    let gt = truth.rasterize(setup.bounds, desk.resolution)?;
    let data = simulate(setup, &truth, ForwardKind::SpectralClosedForm)?;
    let run = |weights: LossWeights, regularized| -> Result<RegularizationRow> {
        let (field, _) = reconstruct_voxels(&data, &setup.bounds, desk, Method::Spectral, &weights)?;
        Ok(RegularizationRow {
            regularized,
            spurious_fraction: spurious_energy_fraction(&field, &gt, 2)?,
            chamfer: chamfer_to_truth(&field, &truth, desk.rel_threshold)?,
            field,
        })
    };
    let off = LossWeights { beta: 0.0, gamma: 0.0, ..*weights };
    Ok([run(off, false)?, run(*weights, true)?])
}

pub const BANDWIDTHS: [f64; 4] = [40e6, 400e6, 800e6, 4e9];
pub const START_FREQUENCIES: [f64; 5] = [1e9, 2e9, 3e9, 4e9, 5e9];

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub k_bins: usize,
    pub report: MetricReport,
    pub field: VoxelField,
}

/// Metrics of the spectral method on `scene` for each chirp produced by
/// `vary` from the reference setup.
pub fn sweep(
    base: &Setup,
    scene: BundledScene,
    desk: &DeskScale,
    values: &[f64],
    vary: impl Fn(&Setup, f64) -> Setup,
) -> Result<Vec<SweepRow>> {
    let grid = VoxelField::zeros(base.bounds, desk.resolution)?;
    let truth = scene.points(&grid);
    values
        .iter()
        .map(|&v| {
            let setup = vary(base, v);
            let data = simulate(&setup, &truth, ForwardKind::SpectralClosedForm)?;
            let (field, _) = reconstruct_voxels(&data, &setup.bounds, desk, Method::Spectral, &desk.weights)?;
            Ok(SweepRow {
                value: v,
                k_bins: data.k_bins,
                report: report_to_truth(&field, &truth, desk.rel_threshold)?,
                field,
            })
        })
        .collect()
}

pub fn with_bandwidth(setup: &Setup, bandwidth: f64) -> Setup {
    Setup { chirp: setup.chirp.with_bandwidth(bandwidth), ..setup.clone() }
}

pub fn with_start_frequency(setup: &Setup, f0: f64) -> Setup {
    Setup { chirp: ChirpConfig { f0, ..setup.chirp }, ..setup.clone() }
}

/// Sheet benchmark: mean absolute error between the per-column argmax
/// height and the analytic sheet, grouped by y slice, with the trained field.
pub fn sheet_profile(setup: &Setup, desk: &DeskScale) -> Result<(Vec<(f64, f64)>, VoxelField)> {
    let grid = VoxelField::zeros(setup.bounds, desk.resolution)?;
    let truth = BundledScene::Sheet.points(&grid);
    let data = simulate(setup, &truth, ForwardKind::SpectralClosedForm)?;
    let (field, _) = reconstruct_voxels(&data, &setup.bounds, desk, Method::Spectral, &desk.weights)?;
    let s = setup.bounds.side;
    let c = setup.bounds.center;
    let [amp, f, g] = sheet_parameters(s);
    let half = 0.3 * s;
    let mut rows: Vec<(f64, f64, usize)> = Vec::new();
    for p in line_argmax(&field, 2) {
        let (x, y) = (p[0] - c[0], p[1] - c[1]);
        if x.abs() > half || y.abs() > half {
            continue;
        }
        let err = (p[2] - c[2] - sheet_height(amp, f, g, y)).abs();
        match rows.iter_mut().find(|r| (r.0 - p[1]).abs() < 1e-12) {
            Some(r) => {
                r.1 += err;
                r.2 += 1;
            }
            None => rows.push((p[1], err, 1)),
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((rows.into_iter().map(|(y, e, n)| (y, e / n as f64)).collect(), field))
}

/// Normalized errors of perturbed spectra against clean spectra.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityRow {
    pub noise: f64,
    /// sum (|Z| - |Z~|)^2 / sum |Z~|^2
    pub magnitude_mse: f64,
    /// sum |Z - Z~|^2 / sum |Z~|^2
    pub complex_mse: f64,
}

/// Perturbs the scene points with isotropic Gaussian noise of each standard
/// deviation and measures how far the spectra move under each loss term.
pub fn loss_sensitivity(
    setup: &Setup,
    scene: &PointScatterers,
    noise_levels: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<SensitivityRow>> {
    let k = setup.k_bins();
    let model = ForwardModel::new(ForwardKind::SpectralClosedForm, setup.chirp, k);
    let (q, s) = QuerySet::from_points(scene);
    let clean = model.predict_all(&setup.aperture.poses, &q, &s)?;
    let reference: f64 = clean.iter().map(|z| z.energy()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    noise_levels
        .iter()
        .map(|&noise| {
            let normal = Normal::new(0.0, noise).map_err(|e| Error::config(e.to_string()))?;
            let (mut mag, mut cpx) = (0.0, 0.0);
            for _ in 0..trials {
                let positions: Vec<Vec3> = q
                    .positions
                    .iter()
                    .map(|p| p + Vec3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
                    .collect();
                let noisy_q = QuerySet::new(positions, q.weights.clone())?;
                let noisy = model.predict_all(&setup.aperture.poses, &noisy_q, &s)?;
                for (a, b) in noisy.iter().zip(&clean) {
                    for (z, m) in a.bins.iter().zip(&b.bins) {
                        mag += (z.norm() - m.norm()).powi(2);
                        cpx += (z - m).norm_sqr();
                    }
                }
            }
            let denom = reference * trials as f64;
            Ok(SensitivityRow { noise, magnitude_mse: mag / denom, complex_mse: cpx / denom })
        })
        .collect()
}

/// Log-spaced values from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count).map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)).collect()
}

/// Median wall time of one forward model evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchRow {
    pub model: ForwardKind,
    pub points: usize,
    pub k_bins: usize,
    pub n: usize,
    pub seconds: f64,
}

/// Random query nodes in `bounds` at least 5 cm from the pose.
pub fn bench_scene(setup: &Setup, points: usize, seed: u64) -> Result<(QuerySet, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (setup.bounds.min_corner(), setup.bounds.max_corner());
    let pose = &setup.aperture.poses[0];
    let mut positions = Vec::with_capacity(points);
    while positions.len() < points {
        let p =
            Vec3::new(rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1]), rng.random_range(lo[2]..hi[2]));
        if (p - pose.tx).norm() > 0.05 && (p - pose.rx).norm() > 0.05 {
            positions.push(p);
        }
    }
    let sigma = (0..points).map(|_| rng.random_range(0.1..1.0)).collect();
    Ok((QuerySet::new(positions, vec![1.0; points])?, sigma))
}

/// Times each model on one pose, reporting the median of `repeats` runs.
pub fn bench(
    setup: &Setup,
    sizes: &[usize],
    models: &[ForwardKind],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    if repeats == 0 || sizes.contains(&0) {
        return Err(Error::config("bench sizes and repeats must be >= 1"));
    }
    let k = setup.k_bins();
    let pose = setup.aperture.poses[0];
    let mut rows = Vec::new();
    for &points in sizes {
        let (q, s) = bench_scene(setup, points, seed)?;
        for &kind in models {
            let model = ForwardModel::new(kind, setup.chirp, k);
            let mut times: Vec<f64> = (0..repeats)
                .map(|_| {
                    let start = Instant::now();
                    let out = model.predict(&pose, &q, &s);
                    let elapsed = start.elapsed().as_secs_f64();
                    out.map(|spectrum| {
                        std::hint::black_box(spectrum);
                        elapsed
                    })
                })
                .collect::<Result<_>>()?;
            times.sort_by(f64::total_cmp);
            rows.push(BenchRow {
                model: kind,
                points,
                k_bins: k,
                n: setup.chirp.num_samples,
                seconds: times[repeats / 2],
            });
        }
    }
    Ok(rows)
}

pub fn bench_table(rows: &[BenchRow]) -> CsvTable {
    let mut t = CsvTable::new(&["model", "points", "K", "N", "seconds"]);
    for r in rows {
        t.push(vec![
            r.model.name().to_string(),
            r.points.to_string(),
            r.k_bins.to_string(),
            r.n.to_string(),
            r.seconds.to_string(),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradcheckField {
    Voxel,
    Inr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    /// Largest relative adjoint dot-product mismatch over the three models.
    pub adjoint_error: f64,
    /// Largest relative finite-difference mismatch of the training gradient.
    pub fd_error: f64,
    pub adjoint_tolerance: f64,
    pub fd_tolerance: f64,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.adjoint_error < self.adjoint_tolerance && self.fd_error < self.fd_tolerance
    }
}

/// Relative error of two values, measured against their larger magnitude or
/// `floor`, whichever is bigger.
fn relative(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Adjoint dot-product test <A s, r> = <s, A^T r> for every forward model on
/// a random scene; returns the largest relative mismatch.
pub fn adjoint_error(setup: &Setup, points: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (q, s) = bench_scene(setup, points, seed)?;
    let k = setup.k_bins();
    let pose = setup.aperture.poses[0];
    let mut worst: f64 = 0.0;
    for kind in [ForwardKind::SpectralClosedForm, ForwardKind::TimeDomain, ForwardKind::RangeQuantized] {
        let model = ForwardModel::new(kind, setup.chirp, k);
        let r: Vec<C64> = (0..k).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let forward = model.predict(&pose, &q, &s)?;
        let lhs: f64 = forward.bins.iter().zip(&r).map(|(z, r)| z.re * r.re + z.im * r.im).sum();
        let back = model.adjoint(&pose, &q, &r)?;
        let rhs: f64 = back.iter().zip(&s).map(|(g, s)| g * s).sum();
        worst = worst.max(relative(lhs, rhs, 0.0));
    }
    Ok(worst)
}

/// Scales the analytic gradient by `1 + gradient_error` before comparing,
/// as a negative control for the harness.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GradcheckOptions {
    pub gradient_error: f64,
}

/// Full gradient check: adjoint identity plus finite differences of the
/// pose-averaged training loss (with regularizers) for the chosen field.
pub fn gradcheck(kind: GradcheckField, seed: u64, options: GradcheckOptions) -> Result<GradcheckReport> {
    let setup = Setup {
        aperture: cylindrical_aperture(0.23, 12, 2, 0.1, Vec3::zeros())?,
        bounds: SceneBounds::new(Vec3::zeros(), 0.2)?,
        ..Setup::reference(DEFAULT_START_FREQUENCY)
    };
    let adjoint = adjoint_error(&setup, 64, seed)?;
    let grid = VoxelField::zeros(setup.bounds, [8, 8, 8])?;
    let truth = BundledScene::TwoPoints.points(&grid);
    let data = simulate(&setup, &truth, ForwardKind::SpectralClosedForm)?;
    let cfg = TrainConfig { query_resolution: [8, 8, 8], seed, ..TrainConfig::default() };
    let objective = Objective::new(&data, &setup.bounds, &cfg)?;
    let poses = [0, 7, 15];
    let weights = LossWeights::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (fd_error, fd_tolerance) = match kind {
        GradcheckField::Voxel => {
            let mut f = VoxelField::zeros(setup.bounds, [8, 8, 8])?;
            f.values.iter_mut().for_each(|v| *v = rng.random_range(0.1..1.0));
            let indices: Vec<usize> = (0..100).map(|_| rng.random_range(0..f.len())).collect();
            let h = 1e-4 * f.max_sigma();
            (fd_check(&mut f, &objective, &poses, &weights, seed, &indices, h, options)?, 1e-5)
        }
        GradcheckField::Inr => {
            let config =
                InrConfig { encoding_frequencies: 4, hidden: vec![32, 32], output_bias: 0.0, output_scale: 1.0, seed };
            let mut f = InrField::new(setup.bounds, &config)?;
            let n = f.params().len();
            let indices: Vec<usize> = (0..100).map(|_| rng.random_range(0..n)).collect();
            (fd_check(&mut f, &objective, &poses, &weights, seed, &indices, 1e-5, options)?, 1e-4)
        }
    };
    Ok(GradcheckReport { adjoint_error: adjoint, fd_error, adjoint_tolerance: 1e-12, fd_tolerance })
}

/// Training loss (data term plus regularizers, fixed Monte-Carlo seed) and
/// its gradient.
fn loss_and_grad<F: Field>(
    field: &F,
    objective: &Objective<'_>,
    poses: &[usize],
    weights: &LossWeights,
    seed: u64,
) -> Result<(f64, Vec<f64>)> {
    let epsilon = 0.5 * field.bounds().side / 8.0;
    let data = objective.evaluate(field, poses, weights.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let (smooth, gs) = crate::recon::smoothness_reg(field, epsilon, 256, &mut rng);
    let (sparse, gp) = crate::recon::sparsity_reg(field, 256, &mut rng);
    let total = data.magnitude + weights.lambda * data.complex + weights.beta * smooth + weights.gamma * sparse;
    let grad = data.grad.iter().zip(&gs).zip(&gp).map(|((d, s), p)| d + weights.beta * s + weights.gamma * p).collect();
    Ok((total, grad))
}

/// Largest relative central-difference error over `indices` with step `h`.
#[allow(clippy::too_many_arguments)]
fn fd_check<F: Field>(
    field: &mut F,
    objective: &Objective<'_>,
    poses: &[usize],
    weights: &LossWeights,
    seed: u64,
    indices: &[usize],
    h: f64,
    options: GradcheckOptions,
) -> Result<f64> {
    let (_, grad) = loss_and_grad(&*field, objective, poses, weights, seed)?;
    let scale = grad.iter().map(|g| g.abs()).fold(0.0, f64::max);
    let mut worst: f64 = 0.0;
    for &i in indices {
        let original = field.params()[i];
        field.params_mut()[i] = original + h;
        let up = loss_and_grad(&*field, objective, poses, weights, seed)?.0;
        field.params_mut()[i] = original - h;
        let down = loss_and_grad(&*field, objective, poses, weights, seed)?.0;
        field.params_mut()[i] = original;
        let fd = (up - down) / (2.0 * h);
        let analytic = grad[i] * (1.0 + options.gradient_error);
        worst = worst.max(relative(fd, analytic, 1e-3 * scale));
    }
    Ok(worst)
}

/// Random point scene for the model-equivalence checks: up to `max_points`
/// scatterers with random intensities, clear of the first pose.
pub fn random_scene(setup: &Setup, rng: &mut impl Rng, max_points: usize) -> Result<(QuerySet, Vec<f64>)> {
    let n = rng.random_range(1..=max_points);
    bench_scene(setup, n, rng.random())
}

/// Largest |closed form - DFT(time domain)| over all N bins for one scene.
pub fn model_equivalence_error(setup: &Setup, queries: &QuerySet, sigma: &[f64], pose_index: usize) -> Result<f64> {
    let pose = setup.aperture.poses[pose_index];
    let n = setup.chirp.num_samples;
    let closed = spectral_forward(&setup.chirp, &pose, queries, sigma, 0..n)?;
    let timed = crate::forward::time_domain_spectrum(&setup.chirp, &pose, queries, sigma, 0..n, &DftPlan::new(n))?;
    Ok(closed.max_abs_diff(&timed))
}
