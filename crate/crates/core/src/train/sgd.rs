use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::LrSchedule;
use crate::error::Result;
use crate::nn::{Gradients, Mlp};
use crate::seed::{self, tag};

/// Training phase. The discriminant keys the phase's shuffle and dropout streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Base = 1,
    Incremental = 2,
    /// Exemplar-batch stream paired with `Incremental`.
    IncrementalMemory = 3,
    Dropout = 4,
    Ordinary = 5,
    HardSample = 6,
}

/// Seeded permutation of `0..n` for one epoch of one phase.
pub(crate) fn epoch_order(n: usize, seed: u64, phase: Phase, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::derived_rng(
        seed,
        &[tag::SHUFFLE, phase as u64, epoch as u64],
    ));
    order
}

/// Dropout mask seed for one minibatch.
pub(crate) fn batch_seed(seed: u64, phase: Phase, epoch: usize, batch: usize) -> u64 {
    seed::derive(
        seed,
        &[tag::DROPOUT, phase as u64, epoch as u64, batch as u64],
    )
}

/// Minibatch SGD over `n` samples for `epochs` epochs. `objective` receives the
/// batch indices and its dropout seed and returns the batch gradient.
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_sgd<F>(
    net: &mut Mlp,
    n: usize,
    epochs: usize,
    batch_size: usize,
    lr: &LrSchedule,
    clip: Option<f64>,
    seed: u64,
    phase: Phase,
    mut objective: F,
) -> Result<()>
where
    F: FnMut(&Mlp, usize, &[usize], u64) -> Result<Gradients>,
{
    if n == 0 {
        return Ok(());
    }
    for epoch in 0..epochs {
        let rate = lr.rate(epoch, epochs);
        let order = epoch_order(n, seed, phase, epoch);
        for (b, chunk) in order.chunks(batch_size).enumerate() {
            let mut grads = objective(net, epoch, chunk, batch_seed(seed, phase, epoch, b))?;
            if let Some(max_norm) = clip {
                clip_norm(&mut grads, max_norm);
            }
            net.sgd_step(&grads, rate)?;
        }
    }
    Ok(())
}

/// Rescale `grads` so its global L2 norm is at most `max_norm`.
pub(crate) fn clip_norm(grads: &mut Gradients, max_norm: f64) {
    let norm = grads
        .weights
        .iter()
        .flat_map(|w| w.as_slice())
        .chain(grads.biases.iter().flatten())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        grads.scale(max_norm / norm);
    }
}
