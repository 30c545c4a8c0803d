use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::{adam_step, AdamState};
use super::loss::complex_loss;
use super::regularize::{smoothness_reg, sparsity_reg};
use super::{LossWeights, Method, TrainConfig};
use crate::forward::{time_domain_adjoint, time_domain_forward, ForwardModel};
use crate::geometry::{Aperture, SceneBounds};
use crate::io::{CsvTable, MeasurementSet};
use crate::scene::{make_query_grid, Field, QuerySet};
use crate::signal::bin_omega;
use crate::{Error, Result, Vec3, C64};

/// Mean of R_T R_R from the poses to the bounds center.
///
/// Training scales every query volume element by `field_gain / volume`, so
/// a field of unit mean over the bounds, concentrated near the center,
/// produces a tone of roughly unit amplitude. Fitted to peak-normalized data
/// the field then has a mean of order one at any grid resolution, which keeps
/// the regularizer expectations on the scale of the data residuals.
pub fn field_gain(bounds: &SceneBounds, aperture: &Aperture) -> f64 {
    let c = bounds.center;
    let sum: f64 = aperture.poses.iter().map(|p| (p.tx - c).norm() * (p.rx - c).norm()).sum();
    sum / aperture.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepRecord {
    pub step: usize,
    pub total: f64,
    pub l_mag: f64,
    /// lambda-weighted complex term; zero during the magnitude-only stage.
    pub l_complex: f64,
    /// beta-weighted smoothness term.
    pub l_smooth: f64,
    /// gamma-weighted sparsity term.
    pub l_sparsity: f64,
    pub grad_mean: f64,
    pub grad_std: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub records: Vec<StepRecord>,
}

impl TrainHistory {
    pub const COLUMNS: [&'static str; 8] =
        ["step", "total", "l_mag", "l_complex", "l_smooth", "l_sparsity", "grad_mean", "grad_std"];

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_csv(&self) -> CsvTable {
        let mut t = CsvTable::new(&Self::COLUMNS);
        for r in &self.records {
            t.push(vec![
                r.step.to_string(),
                r.total.to_string(),
                r.l_mag.to_string(),
                r.l_complex.to_string(),
                r.l_smooth.to_string(),
                r.l_sparsity.to_string(),
                r.grad_mean.to_string(),
                r.grad_std.to_string(),
            ]);
        }
        t
    }
}

/// Data term of one minibatch: components averaged over the poses and the
/// parameter gradient of `magnitude + lambda * complex`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue {
    pub magnitude: f64,
    pub complex: f64,
    pub grad: Vec<f64>,
}

/// The data-fit term of training: query nodes, the bound forward model and
/// per-pose targets in the supervision domain.
pub struct Objective<'a> {
    pub data: &'a MeasurementSet,
    pub method: Method,
    pub queries: QuerySet,
    pub model: ForwardModel,
    /// Query cell edge lengths; jittered nodes stay inside their cell.
    pub cell: Vec3,
    targets: Vec<Vec<C64>>,
}

impl<'a> Objective<'a> {
    pub fn new(data: &'a MeasurementSet, bounds: &SceneBounds, cfg: &TrainConfig) -> Result<Self> {
        data.validate()?;
        let mut queries = make_query_grid(bounds, cfg.query_resolution)?;
        queries.retain_clear_of(&data.aperture, cfg.clearance);
        if queries.is_empty() {
            return Err(Error::config("every query node lies within the antenna clearance"));
        }
        let scale = field_gain(bounds, &data.aperture) / bounds.volume();
        queries.weights.iter_mut().for_each(|w| *w *= scale);
        let model = ForwardModel::new(cfg.method.forward_kind(), data.chirp, data.k_bins);
        let n = data.chirp.num_samples;
        let targets = match cfg.method {
            // The stored K bins are the only supervision available, so the
            // temporal target is their band-limited synthesis.
            Method::TfTs => data
                .spectra
                .iter()
                .map(|z| {
                    (0..n)
                        .map(|t| {
                            z.iter()
                                .enumerate()
                                .map(|(k, zk)| zk * C64::from_polar(1.0, bin_omega(k, n) * t as f64))
                                .sum()
                        })
                        .collect()
                })
                .collect(),
            _ => data.spectra.clone(),
        };
        Ok(Self {
            data,
            method: cfg.method,
            queries,
            model,
            cell: Vec3::from_fn(|i, _| bounds.side / cfg.query_resolution[i] as f64),
            targets,
        })
    }

    pub fn num_poses(&self) -> usize {
        self.data.num_poses()
    }

    /// The query nodes, each displaced uniformly within its own cell.
    pub fn jittered(&self, rng: &mut impl Rng) -> QuerySet {
        let h = 0.5 * self.cell;
        let positions = self
            .queries
            .positions
            .iter()
            .map(|x| {
                x + Vec3::new(
                    rng.random_range(-h[0]..h[0]),
                    rng.random_range(-h[1]..h[1]),
                    rng.random_range(-h[2]..h[2]),
                )
            })
            .collect();
        QuerySet { positions, weights: self.queries.weights.clone() }
    }

    fn pose_term(&self, queries: &QuerySet, p: usize, sigma: &[f64], lambda: f64) -> Result<(f64, f64, Vec<f64>)> {
        let pose = &self.data.aperture.poses[p];
        let chirp = &self.data.chirp;
        if self.method == Method::TfTs {
            let pred = time_domain_forward(chirp, pose, queries, sigma)?;
            let l = complex_loss(&pred, &self.targets[p], lambda)?;
            let g = time_domain_adjoint(chirp, pose, queries, &l.grad)?;
            return Ok((l.magnitude, l.complex, g));
        }
        let pred = self.model.predict(pose, queries, sigma)?;
        let l = complex_loss(&pred.bins, &self.targets[p], lambda)?;
        let g = self.model.adjoint(pose, queries, &l.grad)?;
        Ok((l.magnitude, l.complex, g))
    }

    /// Pose-averaged data loss over `poses` and its parameter gradient.
    pub fn evaluate<F: Field + ?Sized>(&self, field: &F, poses: &[usize], lambda: f64) -> Result<ObjectiveValue> {
        self.evaluate_on(&self.queries, field, poses, lambda)
    }

    /// As [`Objective::evaluate`] with the scene integral taken over `queries`.
    pub fn evaluate_on<F: Field + ?Sized>(
        &self,
        queries: &QuerySet,
        field: &F,
        poses: &[usize],
        lambda: f64,
    ) -> Result<ObjectiveValue> {
        let sigma = field.sample(&queries.positions);
        let terms: Vec<(f64, f64, Vec<f64>)> =
            poses.par_iter().map(|&p| self.pose_term(queries, p, &sigma, lambda)).collect::<Result<_>>()?;
        let inv = 1.0 / poses.len() as f64;
        let mut upstream = vec![0.0; queries.len()];
        let (mut magnitude, mut complex) = (0.0, 0.0);
        for (m, c, g) in &terms {
            magnitude += m * inv;
            complex += c * inv;
            for (u, gi) in upstream.iter_mut().zip(g) {
                *u += gi * inv;
            }
        }
        Ok(ObjectiveValue { magnitude, complex, grad: field.param_gradient(&queries.positions, &upstream) })
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits `field` to the measurements with Adam over pose minibatches.
///
/// Each step evaluates the data term on `poses_per_step` poses drawn from a
/// per-epoch shuffle, using the magnitude term alone while
/// `step < stage_fraction * iterations`, adds the smoothness and sparsity
/// terms, takes one Adam step and projects the field onto its constraints.
pub fn train<F: Field + ?Sized>(
    field: &mut F,
    data: &MeasurementSet,
    weights: &LossWeights,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    weights.validate()?;
    cfg.validate()?;
    let bounds = *field.bounds();
    let objective = Objective::new(data, &bounds, cfg)?;
    let max_res = *cfg.query_resolution.iter().max().expect("three axes") as f64;
    let epsilon = weights.epsilon.unwrap_or(0.5 * bounds.side / max_res);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut state = AdamState::new(field.params().len());
    let stage_end = weights.stage_fraction * cfg.iterations as f64;
    let mut history = TrainHistory::default();

    for step in 0..cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.poses_per_step);
        while batch.len() < cfg.poses_per_step.min(objective.num_poses()) {
            if cursor == order.len() {
                order = (0..objective.num_poses()).collect();
                order.shuffle(&mut rng);
                cursor = 0;
            }
            batch.push(order[cursor]);
            cursor += 1;
        }
        let lambda = if (step as f64) < stage_end { 0.0 } else { weights.lambda };
        let data_term = if cfg.query_jitter {
            let queries = objective.jittered(&mut rng);
            objective.evaluate_on(&queries, &*field, &batch, lambda)?
        } else {
            objective.evaluate(&*field, &batch, lambda)?
        };
        let mut grad = data_term.grad;
        let mut record = StepRecord {
            step,
            l_mag: data_term.magnitude,
            l_complex: lambda * data_term.complex,
            ..StepRecord::default()
        };
        if weights.beta > 0.0 {
            let (v, g) = smoothness_reg(&*field, epsilon, cfg.reg_samples_per_step, &mut rng);
            record.l_smooth = weights.beta * v;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += weights.beta * b);
        }
        if weights.gamma > 0.0 {
            let (v, g) = sparsity_reg(&*field, cfg.reg_samples_per_step, &mut rng);
            record.l_sparsity = weights.gamma * v;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += weights.gamma * b);
        }
        record.total = record.l_mag + record.l_complex + record.l_smooth + record.l_sparsity;
        let (mean, std) = mean_std(&grad[field.first_layer()]);
        record.grad_mean = mean;
        record.grad_std = std;
        if !record.total.is_finite() || !mean.is_finite() || !std.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                detail: format!(
                    "loss {} (mag {}, complex {}), first-layer gradient mean {mean} std {std}",
                    record.total, record.l_mag, record.l_complex
                ),
            });
        }
        history.records.push(record);
        adam_step(field.params_mut(), &grad, &mut state, &cfg.adam);
        field.project();
    }
    Ok(history)
}
