use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Fully connected layer; `w` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            w: vec![0.0; inputs * outputs],
            b: vec![0.0; outputs],
        }
    }

    /// Orthogonal rows (or columns, whichever is shorter) scaled by `gain`, zero bias.
    pub fn orthogonal<R: Rng + ?Sized>(inputs: usize, outputs: usize, gain: f64, rng: &mut R) -> Self {
        let mut layer = Dense::zeros(inputs, outputs);
        let (rows, cols) = if outputs <= inputs {
            (outputs, inputs)
        } else {
            (inputs, outputs)
        };
        let mut m: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..cols).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        for i in 0..rows {
            for j in 0..i {
                let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                let mj = m[j].clone();
                m[i].iter_mut().zip(&mj).for_each(|(a, b)| *a -= dot * b);
            }
            let norm = m[i].iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            m[i].iter_mut().for_each(|a| *a /= norm);
        }
        for o in 0..outputs {
            for i in 0..inputs {
                let v = if outputs <= inputs { m[o][i] } else { m[i][o] };
                layer.w[o * inputs + i] = gain * v;
            }
        }
        layer
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.b.len()
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.outputs {
            let row = &self.w[o * self.inputs..(o + 1) * self.inputs];
            out.push(self.b[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>());
        }
    }
}

/// Tanh hidden layers, identity output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `widths` lists every layer width, input first, output last.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], hidden_gain: f64, head_gain: f64, rng: &mut R) -> Self {
        assert!(widths.len() >= 2, "need at least input and output widths");
        let n = widths.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let gain = if i + 1 == n { head_gain } else { hidden_gain };
                Dense::orthogonal(widths[i], widths[i + 1], gain, rng)
            })
            .collect();
        Mlp { layers }
    }

    pub fn zeros(widths: &[usize]) -> Self {
        Mlp {
            layers: widths.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    /// Analytic parameter count: sum of `(in + 1) * out` over layers.
    pub fn param_count_for(widths: &[usize]) -> usize {
        widths.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Vec::new();
        self.forward_cached(x, &mut acts);
        acts.pop().expect("output")
    }

    /// Stores every layer's post-activation output (input first) in `acts`.
    pub fn forward_cached(&self, x: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.clear();
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.forward(acts.last().expect("input"), &mut out);
            if i != last {
                out.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(out);
        }
    }

    /// Accumulates parameter gradients for upstream `d_out` into `grads`
    /// (laid out as in [`Mlp::write_params`]).
    pub fn backward(&self, acts: &[Vec<f64>], d_out: &[f64], grads: &mut [f64]) {
        let mut delta = d_out.to_vec();
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }
        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let base = offsets[li];
            let (gw, gb) = grads[base..base + layer.param_count()].split_at_mut(layer.w.len());
            for o in 0..layer.outputs {
                let d = delta[o];
                gb[o] += d;
                if d != 0.0 {
                    let row = &mut gw[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(g, x)| *g += d * x);
                }
            }
            if li == 0 {
                break;
            }
            let mut prev = vec![0.0; layer.inputs];
            for o in 0..layer.outputs {
                let d = delta[o];
                if d != 0.0 {
                    let row = &layer.w[o * layer.inputs..(o + 1) * layer.inputs];
                    prev.iter_mut().zip(row).for_each(|(p, w)| *p += d * w);
                }
            }
            // input of this layer is tanh output of the previous one
            for (p, a) in prev.iter_mut().zip(input) {
                *p *= 1.0 - a * a;
            }
            delta = prev;
        }
    }

    pub fn write_params(&self, out: &mut Vec<f64>) {
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
    }

    /// Reads parameters from the front of `src`; returns how many were used.
    pub fn read_params(&mut self, src: &[f64]) -> usize {
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.w.len();
            l.w.copy_from_slice(&src[off..off + nw]);
            off += nw;
            let nb = l.b.len();
            l.b.copy_from_slice(&src[off..off + nb]);
            off += nb;
        }
        off
    }
}
