//! Fully connected network with tanh hidden layers and a linear output,
//! stored as one flat parameter vector so optimizers can treat it uniformly.
//!
//! Layer `l` occupies `out*in` weights (row-major, one row per output) followed
//! by `out` biases.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

/// Layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Tape {
    /// `acts[0]` is the input; `acts[l + 1]` is the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("forward ran")
    }
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let n = sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum();
        Mlp {
            sizes: sizes.to_vec(),
            params: vec![0.0; n],
        }
    }

    /// Orthogonal weights scaled by `hidden_gain` on hidden layers and by
    /// `output_gain` on the last layer; zero biases.
    pub fn orthogonal<R: Rng + ?Sized>(sizes: &[usize], hidden_gain: f64, output_gain: f64, rng: &mut R) -> Self {
        let mut net = Self::zeros(sizes);
        let n_layers = sizes.len() - 1;
        let mut off = 0;
        for l in 0..n_layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let gain = if l + 1 == n_layers { output_gain } else { hidden_gain };
            let w = orthogonal_matrix(fan_out, fan_in, rng);
            for r in 0..fan_out {
                for c in 0..fan_in {
                    net.params[off + r * fan_in + c] = gain * w[(r, c)];
                }
            }
            off += fan_out * fan_in + fan_out;
        }
        net
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                what: "network input".into(),
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_tape(x)?.acts.pop().unwrap())
    }

    pub fn forward_tape(&self, x: &[f64]) -> Result<Tape> {
        self.check_input(x)?;
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(x.to_vec());
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_out * n_in];
            let b = &self.params[off + n_out * n_in..off + n_out * n_in + n_out];
            let input = &acts[l];
            let mut out = Vec::with_capacity(n_out);
            for r in 0..n_out {
                let row = &w[r * n_in..(r + 1) * n_in];
                let z = row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>() + b[r];
                out.push(if l + 1 < n_layers { z.tanh() } else { z });
            }
            acts.push(out);
            off += n_out * n_in + n_out;
        }
        Ok(Tape { acts })
    }

    /// Accumulate `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, tape: &Tape, d_out: &[f64], grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l + 1] * self.sizes[l] + self.sizes[l + 1];
        }
        let mut delta = d_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            if l + 1 < n_layers {
                // Through tanh: d/dz = d/da * (1 - a^2).
                for (d, a) in delta.iter_mut().zip(&tape.acts[l + 1]) {
                    *d *= 1.0 - a * a;
                }
            }
            let input = &tape.acts[l];
            for r in 0..n_out {
                let g_row = &mut grad[off + r * n_in..off + (r + 1) * n_in];
                for (g, x) in g_row.iter_mut().zip(input) {
                    *g += delta[r] * x;
                }
                grad[off + n_out * n_in + r] += delta[r];
            }
            if l > 0 {
                let w = &self.params[off..off + n_out * n_in];
                let mut prev = vec![0.0; n_in];
                for r in 0..n_out {
                    let row = &w[r * n_in..(r + 1) * n_in];
                    for (p, wv) in prev.iter_mut().zip(row) {
                        *p += delta[r] * wv;
                    }
                }
                delta = prev;
            }
        }
    }
}

fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    let (big, small) = (rows.max(cols), rows.min(cols));
    let a = DMatrix::from_fn(big, small, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Sign correction makes the distribution uniform over orthogonal matrices.
    for j in 0..small {
        if r[(j, j)] < 0.0 {
            for i in 0..big {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if rows >= cols {
        q
    } else {
        q.transpose()
    }
}
