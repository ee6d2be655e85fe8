//! Dense feed-forward classifier with manual backpropagation.
//!
//! Hidden layers use a rectifier, the output layer is affine. Weights of layer
//! `l` have shape `(layer_sizes[l + 1], layer_sizes[l])`. Dropout, when
//! requested, is inverted dropout on hidden post-activations: kept units are
//! scaled by `1 / (1 - rate)` so inference needs no correction.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::Tensor2;
use crate::error::{ensure, Error, Result};
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub rng_seed: u64,
}

impl DropoutSpec {
    pub fn new(rate: f64, rng_seed: u64) -> Result<Self> {
        ensure!(
            rate.is_finite() && (0.0..1.0).contains(&rate),
            Parameter,
            "dropout rate must be in [0, 1), got {rate}"
        );
        Ok(Self { rate, rng_seed })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Tensor2>,
    biases: Vec<Vec<f64>>,
}

/// Everything `backward` needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    input: Tensor2,
    /// Rectifier inputs, one per hidden layer.
    pre: Vec<Tensor2>,
    /// Hidden outputs after rectifier and dropout, one per hidden layer.
    post: Vec<Tensor2>,
    /// Per-unit multipliers (0 or 1/(1-rate)), present only when dropout ran.
    masks: Option<Vec<Tensor2>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }

    pub fn hidden_activations(&self) -> &[Tensor2] {
        &self.post
    }

    pub fn masks(&self) -> Option<&[Tensor2]> {
        self.masks.as_deref()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Tensor2>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net
                .weights
                .iter()
                .map(|w| Tensor2::zeros(w.rows(), w.cols()))
                .collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.weights.iter_mut().for_each(|w| w.scale(k));
        self.biases
            .iter_mut()
            .flat_map(|b| b.iter_mut())
            .for_each(|v| *v *= k);
    }

    /// Flattened view in layer order: weights then biases per layer.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

fn glorot_fill(rows: usize, cols: usize, rng: &mut impl Rng) -> Tensor2 {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
    let data = (0..rows * cols).map(|_| dist.sample(rng)).collect();
    Tensor2::from_vec(rows, cols, data).expect("shape matches by construction")
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], seed: u64) -> Result<Self> {
        ensure!(
            layer_sizes.len() >= 2,
            Parameter,
            "need at least input and output sizes, got {layer_sizes:?}"
        );
        ensure!(
            layer_sizes.iter().all(|&n| n > 0),
            Parameter,
            "layer sizes must be positive, got {layer_sizes:?}"
        );
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for (l, pair) in layer_sizes.windows(2).enumerate() {
            let mut rng = seed::derived_rng(seed, &[tag::INIT, l as u64]);
            weights.push(glorot_fill(pair[1], pair[0], &mut rng));
            biases.push(vec![0.0; pair[1]]);
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
        })
    }

    /// Build from explicit parameters, validating every shape.
    pub fn from_parts(weights: Vec<Tensor2>, biases: Vec<Vec<f64>>) -> Result<Self> {
        ensure!(
            !weights.is_empty(),
            Parameter,
            "network needs at least one layer"
        );
        ensure!(
            weights.len() == biases.len(),
            RejectedInput,
            "{} weight matrices but {} bias vectors",
            weights.len(),
            biases.len()
        );
        let mut layer_sizes = vec![weights[0].cols()];
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            ensure!(
                w.cols() == *layer_sizes.last().unwrap(),
                RejectedInput,
                "layer {l} expects {} inputs but previous layer has {}",
                w.cols(),
                layer_sizes.last().unwrap()
            );
            ensure!(
                b.len() == w.rows(),
                RejectedInput,
                "layer {l} bias has {} entries, expected {}",
                b.len(),
                w.rows()
            );
            ensure!(
                b.iter().all(|v| v.is_finite()),
                RejectedInput,
                "layer {l} bias is not finite"
            );
            layer_sizes.push(w.rows());
        }
        ensure!(
            layer_sizes.iter().all(|&n| n > 0),
            Parameter,
            "layer sizes must be positive, got {layer_sizes:?}"
        );
        Ok(Self {
            layer_sizes,
            weights,
            biases,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    /// Number of classes the output layer currently scores.
    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        &self.layer_sizes[1..self.layer_sizes.len() - 1]
    }

    pub fn weights(&self) -> &[Tensor2] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Tensor2] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.as_slice().len() + b.len())
            .sum()
    }

    /// Bitwise equality of all parameters.
    pub fn bit_eq(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes
            && self
                .weights
                .iter()
                .zip(&other.weights)
                .all(|(a, b)| bits_eq(a.as_slice(), b.as_slice()))
            && self
                .biases
                .iter()
                .zip(&other.biases)
                .all(|(a, b)| bits_eq(a, b))
    }

    pub fn forward(
        &self,
        batch: &Tensor2,
        dropout: Option<&DropoutSpec>,
    ) -> Result<(Tensor2, ForwardCache)> {
        ensure!(
            batch.cols() == self.input_dim(),
            RejectedInput,
            "batch has {} features, network expects {}",
            batch.cols(),
            self.input_dim()
        );
        if let Some(spec) = dropout {
            DropoutSpec::new(spec.rate, spec.rng_seed)?;
        }
        let n_layers = self.weights.len();
        let mut pre = Vec::with_capacity(n_layers - 1);
        let mut post = Vec::with_capacity(n_layers - 1);
        let mut masks = dropout.map(|_| Vec::with_capacity(n_layers - 1));
        let mut mask_rng = dropout.map(|d| seed::rng(d.rng_seed));

        let mut current = batch.clone();
        for l in 0..n_layers {
            let z = affine(&current, &self.weights[l], &self.biases[l]);
            if l + 1 == n_layers {
                let cache = ForwardCache {
                    layer_sizes: self.layer_sizes.clone(),
                    input: batch.clone(),
                    pre,
                    post,
                    masks,
                };
                return Ok((z, cache));
            }
            let mut a = z.clone();
            a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
            if let (Some(spec), Some(rng), Some(masks)) =
                (dropout, mask_rng.as_mut(), masks.as_mut())
            {
                let keep_scale = 1.0 / (1.0 - spec.rate);
                let mut mask = Tensor2::zeros(a.rows(), a.cols());
                for (m, v) in mask.as_mut_slice().iter_mut().zip(a.as_mut_slice()) {
                    let u: f64 = rng.random();
                    *m = if u < spec.rate { 0.0 } else { keep_scale };
                    *v *= *m;
                }
                masks.push(mask);
            }
            pre.push(z);
            post.push(a.clone());
            current = a;
        }
        unreachable!("loop returns at the output layer")
    }

    /// Inference logits (no dropout).
    pub fn logits(&self, batch: &Tensor2) -> Result<Tensor2> {
        self.forward(batch, None).map(|(z, _)| z)
    }

    /// Argmax class per row, ties broken towards the lowest index.
    pub fn predict(&self, batch: &Tensor2) -> Result<Vec<usize>> {
        let z = self.logits(batch)?;
        Ok(z.iter_rows().map(argmax).collect())
    }

    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Tensor2) -> Result<Gradients> {
        if cache.layer_sizes != self.layer_sizes {
            return Err(Error::Contract(format!(
                "cache built for layers {:?}, network has {:?}",
                cache.layer_sizes, self.layer_sizes
            )));
        }
        if grad_logits.shape() != (cache.batch_size(), self.classes()) {
            return Err(Error::Contract(format!(
                "grad_logits shape {:?} does not match cached batch ({}, {})",
                grad_logits.shape(),
                cache.batch_size(),
                self.classes()
            )));
        }
        let n_layers = self.weights.len();
        let mut grads = Gradients::zeros_like(self);
        let mut delta = grad_logits.clone();
        for l in (0..n_layers).rev() {
            let layer_input = if l == 0 {
                &cache.input
            } else {
                &cache.post[l - 1]
            };
            accumulate_outer(&delta, layer_input, &mut grads.weights[l]);
            for row in delta.iter_rows() {
                for (g, d) in grads.biases[l].iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l == 0 {
                break;
            }
            let mut upstream = matmul(&delta, &self.weights[l]);
            let z = &cache.pre[l - 1];
            let mask = cache.masks.as_ref().map(|m| &m[l - 1]);
            for (i, g) in upstream.as_mut_slice().iter_mut().enumerate() {
                // Rectifier derivative is taken as 0 at exactly zero.
                if z.as_slice()[i] <= 0.0 {
                    *g = 0.0;
                } else if let Some(mask) = mask {
                    *g *= mask.as_slice()[i];
                }
            }
            delta = upstream;
        }
        Ok(grads)
    }

    /// Plain SGD update `w <- w - lr * g`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        ensure!(
            learning_rate.is_finite() && learning_rate >= 0.0,
            Parameter,
            "learning rate must be finite and non-negative, got {learning_rate}"
        );
        ensure!(
            grads.weights.len() == self.weights.len()
                && grads
                    .weights
                    .iter()
                    .zip(&self.weights)
                    .all(|(g, w)| g.shape() == w.shape())
                && grads
                    .biases
                    .iter()
                    .zip(&self.biases)
                    .all(|(g, b)| g.len() == b.len()),
            RejectedInput,
            "gradient shapes do not match network {:?}",
            self.layer_sizes
        );
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            for (wv, gv) in w.as_mut_slice().iter_mut().zip(g.as_slice()) {
                *wv -= learning_rate * gv;
            }
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            for (bv, gv) in b.iter_mut().zip(g) {
                *bv -= learning_rate * gv;
            }
        }
        Ok(())
    }

    /// Grow the output layer to `new_total_classes`, keeping existing rows.
    pub fn expand_output_layer(&self, new_total_classes: usize, seed: u64) -> Result<Mlp> {
        let old = self.classes();
        ensure!(
            new_total_classes > old,
            Parameter,
            "output layer can only grow: {old} -> {new_total_classes}"
        );
        let last = self.weights.len() - 1;
        let fan_in = self.weights[last].cols();
        let mut rng = seed::derived_rng(seed, &[tag::EXPAND, new_total_classes as u64]);
        // Fresh rows use the same limit a layer of the new width would get.
        let fresh = glorot_fill(new_total_classes, fan_in, &mut rng);
        let mut data = self.weights[last].as_slice().to_vec();
        data.extend_from_slice(&fresh.as_slice()[old * fan_in..]);
        let mut out = self.clone();
        out.weights[last] = Tensor2::from_vec(new_total_classes, fan_in, data)?;
        out.biases[last].resize(new_total_classes, 0.0);
        *out.layer_sizes.last_mut().unwrap() = new_total_classes;
        Ok(out)
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn bits_eq(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// `x W^T + b` for a batch `x` of shape `(n, in)` and `W` of shape `(out, in)`.
fn affine(x: &Tensor2, w: &Tensor2, b: &[f64]) -> Tensor2 {
    let (n, out) = (x.rows(), w.rows());
    let mut z = Tensor2::zeros(n, out);
    for r in 0..n {
        let xr = x.row(r);
        let zr = z.row_mut(r);
        for (o, zv) in zr.iter_mut().enumerate() {
            let wr = w.row(o);
            *zv = b[o] + xr.iter().zip(wr).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    z
}

/// `delta W` for `delta` of shape `(n, out)` and `W` of shape `(out, in)`.
fn matmul(delta: &Tensor2, w: &Tensor2) -> Tensor2 {
    let mut out = Tensor2::zeros(delta.rows(), w.cols());
    for r in 0..delta.rows() {
        let dr = delta.row(r);
        let or = out.row_mut(r);
        for (o, &d) in dr.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (acc, wv) in or.iter_mut().zip(w.row(o)) {
                *acc += d * wv;
            }
        }
    }
    out
}

/// `g += delta^T x`.
fn accumulate_outer(delta: &Tensor2, x: &Tensor2, g: &mut Tensor2) {
    for r in 0..delta.rows() {
        let xr = x.row(r);
        for (o, &d) in delta.row(r).iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (acc, xv) in g.row_mut(o).iter_mut().zip(xr) {
                *acc += d * xv;
            }
        }
    }
}
