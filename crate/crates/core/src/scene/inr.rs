use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{Field, VoxelField};
use crate::geometry::SceneBounds;
use crate::{Error, Result, Vec3};

/// Positions evaluated per parallel work item; partial gradients are summed
/// in chunk order so results do not depend on the thread count.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct InrConfig {
    /// Sinusoidal encoding frequencies 2^0 pi .. 2^(L-1) pi per axis.
    pub encoding_frequencies: usize,
    /// Hidden layer widths; hidden layers use sine activations.
    pub hidden: Vec<usize>,
    /// Initial bias of the output unit, before softplus.
    pub output_bias: f64,
    /// Factor applied after softplus; sets the reachable field magnitude.
    pub output_scale: f64,
    pub seed: u64,
}

impl Default for InrConfig {
    fn default() -> Self {
        Self { encoding_frequencies: 6, hidden: vec![64, 64], output_bias: -7.0, output_scale: 100.0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Layer {
    inputs: usize,
    outputs: usize,
    /// Offset of the row-major weight matrix; biases follow it.
    offset: usize,
}

impl Layer {
    fn weights(&self) -> Range<usize> {
        self.offset..self.offset + self.inputs * self.outputs
    }

    fn biases(&self) -> Range<usize> {
        let start = self.offset + self.inputs * self.outputs;
        start..start + self.outputs
    }

    fn end(&self) -> usize {
        self.offset + (self.inputs + 1) * self.outputs
    }
}

/// Coordinate network: positional encoding, sine hidden layers and a
/// scaled softplus output. All parameters live in one flat vector.
#[derive(Debug, Clone, PartialEq)]
pub struct InrField {
    pub bounds: SceneBounds,
    pub encoding_frequencies: usize,
    pub output_scale: f64,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Scratch {
    /// Activations per layer input (encoding first).
    acts: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers.
    pre: Vec<Vec<f64>>,
    delta: Vec<f64>,
    delta_next: Vec<f64>,
}

impl InrField {
    pub fn new(bounds: SceneBounds, config: &InrConfig) -> Result<Self> {
        if config.encoding_frequencies == 0 {
            return Err(Error::config("INR needs at least one encoding frequency"));
        }
        if config.hidden.contains(&0) {
            return Err(Error::config("INR hidden widths must be positive"));
        }
        if !(config.output_scale > 0.0 && config.output_scale.is_finite()) {
            return Err(Error::config("INR output scale must be positive"));
        }
        let mut widths = vec![6 * config.encoding_frequencies];
        widths.extend(&config.hidden);
        widths.push(1);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        let mut offset = 0;
        for pair in widths.windows(2) {
            let layer = Layer { inputs: pair[0], outputs: pair[1], offset };
            offset = layer.end();
            layers.push(layer);
        }
        let mut params = vec![0.0; offset];
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        for layer in &layers {
            let limit = (6.0 / layer.inputs as f64).sqrt();
            for w in &mut params[layer.weights()] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        let last = *layers.last().expect("at least one layer");
        params[last.biases().start] = config.output_bias;
        Ok(Self {
            bounds,
            encoding_frequencies: config.encoding_frequencies,
            output_scale: config.output_scale,
            layers,
            params,
        })
    }

    pub fn layer_widths(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.outputs).collect()
    }

    pub fn input_width(&self) -> usize {
        6 * self.encoding_frequencies
    }

    /// Maps the bounds onto [-1, 1]^3.
    pub fn normalize(&self, p: &Vec3) -> Vec3 {
        (p - self.bounds.center) * (2.0 / self.bounds.side)
    }

    fn encode_into(&self, p: &Vec3, out: &mut [f64]) {
        let q = self.normalize(p);
        for l in 0..self.encoding_frequencies {
            let freq = (1u64 << l) as f64 * PI;
            for a in 0..3 {
                let (s, c) = (freq * q[a]).sin_cos();
                out[6 * l + a] = s;
                out[6 * l + 3 + a] = c;
            }
        }
    }

    fn scratch(&self) -> Scratch {
        let mut acts = vec![vec![0.0; self.input_width()]];
        let mut pre = Vec::new();
        for layer in &self.layers[..self.layers.len() - 1] {
            acts.push(vec![0.0; layer.outputs]);
            pre.push(vec![0.0; layer.outputs]);
        }
        let widest = self.layers.iter().map(|l| l.inputs.max(l.outputs)).max().unwrap_or(1);
        Scratch { acts, pre, delta: vec![0.0; widest], delta_next: vec![0.0; widest] }
    }

    /// Runs the network up to the output pre-activation.
    fn forward_one(&self, p: &Vec3, s: &mut Scratch) -> f64 {
        self.encode_into(p, &mut s.acts[0]);
        let hidden = self.layers.len() - 1;
        for (li, layer) in self.layers[..hidden].iter().enumerate() {
            let w = &self.params[layer.weights()];
            let b = &self.params[layer.biases()];
            let (lower, upper) = s.acts.split_at_mut(li + 1);
            let input = &lower[li];
            let output = &mut upper[0];
            for o in 0..layer.outputs {
                let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                let z = b[o] + row.iter().zip(input.iter()).map(|(a, x)| a * x).sum::<f64>();
                s.pre[li][o] = z;
                output[o] = z.sin();
            }
        }
        let out = self.layers[hidden];
        let w = &self.params[out.weights()];
        let input = &s.acts[hidden];
        self.params[out.biases().start] + w.iter().zip(input.iter()).map(|(a, x)| a * x).sum::<f64>()
    }

    fn backward_one(&self, upstream: f64, s: &mut Scratch, grad: &mut [f64]) {
        let hidden = self.layers.len() - 1;
        let out = self.layers[hidden];
        // upstream already includes the softplus derivative.
        {
            let input = &s.acts[hidden];
            let gw = &mut grad[out.weights()];
            for (g, x) in gw.iter_mut().zip(input.iter()) {
                *g += upstream * x;
            }
            grad[out.biases().start] += upstream;
            let w = &self.params[out.weights()];
            for (d, wi) in s.delta[..out.inputs].iter_mut().zip(w) {
                *d = upstream * wi;
            }
        }
        for li in (0..hidden).rev() {
            let layer = self.layers[li];
            for o in 0..layer.outputs {
                s.delta[o] *= s.pre[li][o].cos();
            }
            let input = &s.acts[li];
            {
                let gw = &mut grad[layer.weights()];
                for o in 0..layer.outputs {
                    let d = s.delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    for (g, x) in row.iter_mut().zip(input.iter()) {
                        *g += d * x;
                    }
                }
            }
            {
                let gb = &mut grad[layer.biases()];
                for (g, d) in gb.iter_mut().zip(&s.delta[..layer.outputs]) {
                    *g += d;
                }
            }
            if li > 0 {
                let w = &self.params[layer.weights()];
                s.delta_next[..layer.inputs].iter_mut().for_each(|v| *v = 0.0);
                for o in 0..layer.outputs {
                    let d = s.delta[o];
                    let row = &w[o * layer.inputs..(o + 1) * layer.inputs];
                    for (acc, a) in s.delta_next[..layer.inputs].iter_mut().zip(row) {
                        *acc += d * a;
                    }
                }
                std::mem::swap(&mut s.delta, &mut s.delta_next);
            }
        }
    }
}

impl Field for InrField {
    fn bounds(&self) -> &SceneBounds {
        &self.bounds
    }

    fn sample(&self, positions: &[Vec3]) -> Vec<f64> {
        positions
            .par_chunks(CHUNK)
            .flat_map_iter(|chunk| {
                let mut s = self.scratch();
                chunk
                    .iter()
                    .map(|p| {
                        if self.bounds.contains(p) {
                            self.output_scale * softplus(self.forward_one(p, &mut s))
                        } else {
                            0.0
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    fn param_gradient(&self, positions: &[Vec3], upstream: &[f64]) -> Vec<f64> {
        assert_eq!(positions.len(), upstream.len());
        let partials: Vec<Vec<f64>> = positions
            .par_chunks(CHUNK)
            .zip(upstream.par_chunks(CHUNK))
            .map(|(ps, us)| {
                let mut s = self.scratch();
                let mut grad = vec![0.0; self.params.len()];
                for (p, &u) in ps.iter().zip(us) {
                    if u == 0.0 || !self.bounds.contains(p) {
                        continue;
                    }
                    let o = self.forward_one(p, &mut s);
                    self.backward_one(u * self.output_scale * sigmoid(o), &mut s, &mut grad);
                }
                grad
            })
            .collect();
        let mut total = vec![0.0; self.params.len()];
        for part in partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        total
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn first_layer(&self) -> Range<usize> {
        self.layers[0].weights()
    }

    fn rasterize(&self, resolution: [usize; 3]) -> Result<VoxelField> {
        let mut out = VoxelField::zeros(self.bounds, resolution)?;
        out.values = self.sample(&out.centers());
        Ok(out)
    }
}
