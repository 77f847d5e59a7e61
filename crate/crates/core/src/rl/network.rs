//! One-hidden-layer Q-network with a hand-written backward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A transition `(s, a, r, s', done)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experience {
    pub s: Vec<f64>,
    pub a: usize,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub done: bool,
}

/// `q = W2 · tanh(W1 · x + b1) + b2`. Weight matrices are row-major with one
/// row per output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QNetwork {
    input: usize,
    hidden: usize,
    output: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    fn zeros(net: &QNetwork) -> Self {
        Self {
            w1: vec![0.0; net.w1.len()],
            b1: vec![0.0; net.b1.len()],
            w2: vec![0.0; net.w2.len()],
            b2: vec![0.0; net.b2.len()],
        }
    }

    pub fn norm(&self) -> f64 {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .flat_map(|v| v.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened in the same order as [`QNetwork::params`].
    pub fn flatten(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }
}

impl QNetwork {
    /// Glorot-uniform weights, zero biases.
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, output: usize, rng: &mut R) -> Self {
        let l1 = (6.0 / (input + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + output) as f64).sqrt();
        Self {
            input,
            hidden,
            output,
            w1: (0..input * hidden).map(|_| rng.gen_range(-l1..l1)).collect(),
            b1: vec![0.0; hidden],
            w2: (0..hidden * output).map(|_| rng.gen_range(-l2..l2)).collect(),
            b2: vec![0.0; output],
        }
    }

    pub fn zeros(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            input,
            hidden,
            output,
            w1: vec![0.0; input * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * output],
            b2: vec![0.0; output],
        }
    }

    pub fn from_parts(
        input: usize,
        hidden: usize,
        output: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        for (expected, got) in [
            (input * hidden, w1.len()),
            (hidden, b1.len()),
            (hidden * output, w2.len()),
            (output, b2.len()),
        ] {
            if expected != got {
                return Err(Error::Dimension { expected, got });
            }
        }
        Ok(Self {
            input,
            hidden,
            output,
            w1,
            b1,
            w2,
            b2,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden
    }

    pub fn output_dim(&self) -> usize {
        self.output
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::Dimension {
                expected: self.num_params(),
                got: params.len(),
            });
        }
        let mut rest = params;
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            let (head, tail) = rest.split_at(v.len());
            v.copy_from_slice(head);
            rest = tail;
        }
        Ok(())
    }

    /// FNV-1a over the parameter bit patterns.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        for p in self.params() {
            for b in p.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        }
        h
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input {
            return Err(Error::Dimension {
                expected: self.input,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn hidden_layer(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.b1.clone();
        // state vectors are sparse binary features, so walk the non-zeros
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (k, hk) in h.iter_mut().enumerate() {
                *hk += self.w1[k * self.input + j] * xj;
            }
        }
        h.iter_mut().for_each(|v| *v = v.tanh());
        h
    }

    fn output_layer(&self, h: &[f64]) -> Vec<f64> {
        (0..self.output)
            .map(|a| {
                let row = &self.w2[a * self.hidden..(a + 1) * self.hidden];
                self.b2[a] + row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(self.output_layer(&self.hidden_layer(x)))
    }

    pub fn forward_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        xs.iter().map(|x| self.forward(x)).collect()
    }

    /// Index of the largest output; ties go to the lowest index.
    pub fn argmax(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(x)?))
    }

    /// Bellman targets from `target`: `r` for terminal transitions, else
    /// `r + γ · max_a' Q_target(s', a')`.
    pub fn targets(target: &QNetwork, batch: &[Experience], gamma: f64) -> Result<Vec<f64>> {
        batch
            .iter()
            .map(|e| {
                if e.done {
                    Ok(e.r)
                } else {
                    let q = target.forward(&e.s_next)?;
                    Ok(e.r + gamma * q.iter().copied().fold(f64::NEG_INFINITY, f64::max))
                }
            })
            .collect()
    }

    /// Mean of `½ (Q(s, a) − y)²` over the batch and its gradient.
    pub fn loss_and_grad(&self, batch: &[Experience], targets: &[f64]) -> Result<(f64, Gradients)> {
        if batch.is_empty() {
            return Err(Error::EmptyPool);
        }
        let n = batch.len() as f64;
        let mut grad = Gradients::zeros(self);
        let mut loss = 0.0;
        for (e, &y) in batch.iter().zip(targets) {
            self.check_input(&e.s)?;
            if e.a >= self.output {
                return Err(Error::ActionOutOfRange {
                    index: e.a,
                    size: self.output,
                });
            }
            let h = self.hidden_layer(&e.s);
            let row = &self.w2[e.a * self.hidden..(e.a + 1) * self.hidden];
            let q = self.b2[e.a] + row.iter().zip(&h).map(|(w, v)| w * v).sum::<f64>();
            let diff = q - y;
            loss += 0.5 * diff * diff / n;
            let d = diff / n;
            grad.b2[e.a] += d;
            for k in 0..self.hidden {
                grad.w2[e.a * self.hidden + k] += d * h[k];
                let dz = d * row[k] * (1.0 - h[k] * h[k]);
                if dz == 0.0 {
                    continue;
                }
                grad.b1[k] += dz;
                let base = k * self.input;
                for (j, &xj) in e.s.iter().enumerate() {
                    if xj != 0.0 {
                        grad.w1[base + j] += dz * xj;
                    }
                }
            }
        }
        Ok((loss, grad))
    }

    /// One SGD step on `batch` against `target`; `target` is not touched.
    /// Returns the pre-update mean loss.
    pub fn batch_update(
        &mut self,
        target: &QNetwork,
        batch: &[Experience],
        gamma: f64,
        lr: f64,
        clip: Option<f64>,
    ) -> Result<f64> {
        let targets = Self::targets(target, batch, gamma)?;
        let (loss, mut grad) = self.loss_and_grad(batch, &targets)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!(
                "loss {loss} on a batch of {} (targets {:?})",
                batch.len(),
                &targets[..targets.len().min(4)]
            )));
        }
        if let Some(c) = clip {
            let norm = grad.norm();
            if norm > c {
                let scale = c / norm;
                for v in [&mut grad.w1, &mut grad.b1, &mut grad.w2, &mut grad.b2] {
                    v.iter_mut().for_each(|g| *g *= scale);
                }
            }
        }
        for (p, g) in [
            (&mut self.w1, &grad.w1),
            (&mut self.b1, &grad.b1),
            (&mut self.w2, &grad.w2),
            (&mut self.b2, &grad.b2),
        ] {
            p.iter_mut().zip(g).for_each(|(p, g)| *p -= lr * g);
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("parameters diverged after update".into()));
        }
        Ok(loss)
    }
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}
