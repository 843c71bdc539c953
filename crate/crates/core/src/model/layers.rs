//! Network building blocks with hand-written forward and reverse passes.
//!
//! Every layer stores its parameters as flat row-major `Vec`s so that
//! gradients and Adam moments can reuse the same structs.

use serde::{Deserialize, Serialize};

use crate::embeddings::SequenceMatrix;
use crate::Real;

pub(crate) fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

pub(crate) fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub(crate) fn relu<T: Real>(x: T) -> T {
    if x > T::zero() { x } else { T::zero() }
}

#[inline]
pub(crate) fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Fully connected layer `y = W x + b` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![T::zero(); inputs * outputs], bias: vec![T::zero(); outputs] }
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.inputs);
        (0..self.outputs)
            .map(|o| self.bias[o] + dot(&self.weight[o * self.inputs..(o + 1) * self.inputs], x))
            .collect()
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Self) -> Vec<T> {
        let mut dx = vec![T::zero(); self.inputs];
        for o in 0..self.outputs {
            let g = dy[o];
            if g == T::zero() {
                continue;
            }
            grad.bias[o] += g;
            let row = o * self.inputs..(o + 1) * self.inputs;
            axpy(g, x, &mut grad.weight[row.clone()]);
            axpy(g, &self.weight[row], &mut dx);
        }
        dx
    }
}

/// One convolution per filter width, max-pooled over time, followed by a
/// ReLU fully connected layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnBranch<T> {
    pub dim: usize,
    pub filters: usize,
    pub widths: Vec<usize>,
    /// Per width: kernel `[filters, width, dim]`.
    pub kernels: Vec<Vec<T>>,
    pub conv_bias: Vec<Vec<T>>,
    pub fc: Dense<T>,
}

#[derive(Debug, Clone)]
pub struct CnnCache<T> {
    /// Per width and filter: winning window start and its pre-activation.
    argmax: Vec<Vec<(usize, T)>>,
    pooled: Vec<T>,
    fc_pre: Vec<T>,
}

impl<T: Real> CnnBranch<T> {
    pub fn zeros(dim: usize, filters: usize, widths: &[usize], fc_out: usize) -> Self {
        Self {
            dim,
            filters,
            widths: widths.to_vec(),
            kernels: widths.iter().map(|w| vec![T::zero(); filters * w * dim]).collect(),
            conv_bias: widths.iter().map(|_| vec![T::zero(); filters]).collect(),
            fc: Dense::zeros(filters * widths.len(), fc_out),
        }
    }

    /// Number of window positions for a width: the valid positions within the
    /// true length, and a single zero-padded window when the sequence is
    /// shorter than the filter. Padding beyond that never enters the result.
    fn windows(true_length: usize, width: usize) -> usize {
        if true_length >= width { true_length - width + 1 } else { 1 }
    }

    pub fn forward(&self, seq: &SequenceMatrix<T>) -> (Vec<T>, CnnCache<T>) {
        assert_eq!(seq.dim(), self.dim, "embedding width");
        let mut pooled = Vec::with_capacity(self.filters * self.widths.len());
        let mut argmax = Vec::with_capacity(self.widths.len());
        for (wi, &w) in self.widths.iter().enumerate() {
            assert!(w <= seq.max_len(), "filter width exceeds sequence length");
            let span = w * self.dim;
            let kernel = &self.kernels[wi];
            let n = Self::windows(seq.true_length(), w);
            let mut best = Vec::with_capacity(self.filters);
            for f in 0..self.filters {
                let k = &kernel[f * span..(f + 1) * span];
                let mut arg = (0, T::neg_infinity());
                for t in 0..n {
                    let window = window(seq, t, span);
                    let a = self.conv_bias[wi][f] + dot(k, window);
                    if a > arg.1 {
                        arg = (t, a);
                    }
                }
                pooled.push(relu(arg.1));
                best.push(arg);
            }
            argmax.push(best);
        }
        let fc_pre = self.fc.forward(&pooled);
        let out = fc_pre.iter().map(|&x| relu(x)).collect();
        (out, CnnCache { argmax, pooled, fc_pre })
    }

    pub fn backward(&self, seq: &SequenceMatrix<T>, cache: &CnnCache<T>, dout: &[T], grad: &mut Self) {
        let dpre: Vec<T> = dout
            .iter()
            .zip(&cache.fc_pre)
            .map(|(&d, &z)| if z > T::zero() { d } else { T::zero() })
            .collect();
        let dpooled = self.fc.backward(&cache.pooled, &dpre, &mut grad.fc);
        for (wi, &w) in self.widths.iter().enumerate() {
            let span = w * self.dim;
            for f in 0..self.filters {
                let (t, a) = cache.argmax[wi][f];
                let d = dpooled[wi * self.filters + f];
                if a <= T::zero() || d == T::zero() {
                    continue;
                }
                grad.conv_bias[wi][f] += d;
                axpy(d, window(seq, t, span), &mut grad.kernels[wi][f * span..(f + 1) * span]);
            }
        }
    }

    pub(crate) fn params(&self) -> Vec<(String, &Vec<T>)> {
        let mut out = Vec::new();
        for (wi, w) in self.widths.iter().enumerate() {
            out.push((format!("conv{w}.kernel"), &self.kernels[wi]));
            out.push((format!("conv{w}.bias"), &self.conv_bias[wi]));
        }
        out.push(("fc.weight".into(), &self.fc.weight));
        out.push(("fc.bias".into(), &self.fc.bias));
        out
    }

    pub(crate) fn params_mut(&mut self) -> Vec<(String, &mut Vec<T>)> {
        let mut out = Vec::new();
        for ((w, k), b) in self.widths.iter().zip(self.kernels.iter_mut()).zip(self.conv_bias.iter_mut()) {
            out.push((format!("conv{w}.kernel"), k));
            out.push((format!("conv{w}.bias"), b));
        }
        out.push(("fc.weight".into(), &mut self.fc.weight));
        out.push(("fc.bias".into(), &mut self.fc.bias));
        out
    }
}

/// Rows `t..t + span / dim` as one slice (rows are zero past the true length).
fn window<T: Real>(seq: &SequenceMatrix<T>, t: usize, span: usize) -> &[T] {
    seq.rows(t, span / seq.dim())
}

/// Single LSTM direction. Gate blocks are stacked `[input, forget, cell,
/// output]`, each `hidden` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmDirection<T> {
    pub dim: usize,
    pub hidden: usize,
    /// `[4 * hidden, dim]`
    pub w_input: Vec<T>,
    /// `[4 * hidden, hidden]`
    pub w_recurrent: Vec<T>,
    /// `[4 * hidden]`
    pub bias: Vec<T>,
}

#[derive(Debug, Clone)]
struct LstmStep<T> {
    row: usize,
    gates: Vec<T>,
    c_prev: Vec<T>,
    h_prev: Vec<T>,
    tanh_c: Vec<T>,
}

impl<T: Real> LstmDirection<T> {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            dim,
            hidden,
            w_input: vec![T::zero(); 4 * hidden * dim],
            w_recurrent: vec![T::zero(); 4 * hidden * hidden],
            bias: vec![T::zero(); 4 * hidden],
        }
    }

    /// Runs over `rows` in the given order; returns hidden states in that
    /// order.
    fn forward(&self, seq: &SequenceMatrix<T>, rows: impl Iterator<Item = usize>) -> (Vec<Vec<T>>, Vec<LstmStep<T>>) {
        let h = self.hidden;
        let mut h_prev = vec![T::zero(); h];
        let mut c_prev = vec![T::zero(); h];
        let mut states = Vec::new();
        let mut steps = Vec::new();
        for row in rows {
            let x = seq.row(row);
            let mut gates = Vec::with_capacity(4 * h);
            for g in 0..4 * h {
                let a = self.bias[g]
                    + dot(&self.w_input[g * self.dim..(g + 1) * self.dim], x)
                    + dot(&self.w_recurrent[g * h..(g + 1) * h], &h_prev);
                gates.push(if (2 * h..3 * h).contains(&g) { a.tanh() } else { sigmoid(a) });
            }
            let mut c = vec![T::zero(); h];
            let mut tanh_c = vec![T::zero(); h];
            let mut hidden = vec![T::zero(); h];
            for k in 0..h {
                c[k] = gates[h + k] * c_prev[k] + gates[k] * gates[2 * h + k];
                tanh_c[k] = c[k].tanh();
                hidden[k] = gates[3 * h + k] * tanh_c[k];
            }
            steps.push(LstmStep { row, gates, c_prev, h_prev, tanh_c });
            states.push(hidden.clone());
            h_prev = hidden;
            c_prev = c;
        }
        (states, steps)
    }

    /// Backpropagation through time. `dh_out[s]` is the loss gradient
    /// w.r.t. the hidden state emitted at processing step `s`.
    fn backward(&self, seq: &SequenceMatrix<T>, steps: &[LstmStep<T>], dh_out: &[Vec<T>], grad: &mut Self) {
        let h = self.hidden;
        let mut dh_next = vec![T::zero(); h];
        let mut dc_next = vec![T::zero(); h];
        let mut da = vec![T::zero(); 4 * h];
        for (s, step) in steps.iter().enumerate().rev() {
            let g = &step.gates;
            for k in 0..h {
                let dh = dh_out[s][k] + dh_next[k];
                let (i, f, c_hat, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let tc = step.tanh_c[k];
                let d_o = dh * tc;
                let dc = dh * o * (T::one() - tc * tc) + dc_next[k];
                da[k] = dc * c_hat * i * (T::one() - i);
                da[h + k] = dc * step.c_prev[k] * f * (T::one() - f);
                da[2 * h + k] = dc * i * (T::one() - c_hat * c_hat);
                da[3 * h + k] = d_o * o * (T::one() - o);
                dc_next[k] = dc * f;
            }
            let x = seq.row(step.row);
            dh_next.iter_mut().for_each(|v| *v = T::zero());
            for (gi, &d) in da.iter().enumerate() {
                if d == T::zero() {
                    continue;
                }
                grad.bias[gi] += d;
                axpy(d, x, &mut grad.w_input[gi * self.dim..(gi + 1) * self.dim]);
                axpy(d, &step.h_prev, &mut grad.w_recurrent[gi * h..(gi + 1) * h]);
                axpy(d, &self.w_recurrent[gi * h..(gi + 1) * h], &mut dh_next);
            }
        }
    }
}

/// Bidirectional LSTM whose output is the mean, over the true length, of the
/// per-step `[forward; backward]` hidden states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiLstmBranch<T> {
    pub forward: LstmDirection<T>,
    pub backward: LstmDirection<T>,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache<T> {
    fwd: Vec<LstmStep<T>>,
    bwd: Vec<LstmStep<T>>,
}

impl<T: Real> BiLstmBranch<T> {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self { forward: LstmDirection::zeros(dim, hidden), backward: LstmDirection::zeros(dim, hidden) }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden
    }

    /// Per-position concatenated hidden states `[h_fwd(t); h_bwd(t)]`, in
    /// sequence order.
    pub fn step_states(&self, seq: &SequenceMatrix<T>) -> Vec<Vec<T>> {
        let n = seq.true_length();
        let (fwd, _) = self.forward.forward(seq, 0..n);
        let (mut bwd, _) = self.backward.forward(seq, (0..n).rev());
        bwd.reverse();
        fwd.into_iter().zip(bwd).map(|(mut f, b)| {
            f.extend(b);
            f
        }).collect()
    }

    /// Requires `true_length >= 1`.
    pub fn forward(&self, seq: &SequenceMatrix<T>) -> (Vec<T>, BiLstmCache<T>) {
        let n = seq.true_length();
        assert!(n >= 1, "BiLSTM input must have at least one step");
        let hidden = self.hidden();
        let (fwd_states, fwd) = self.forward.forward(seq, 0..n);
        let (bwd_states, bwd) = self.backward.forward(seq, (0..n).rev());
        let scale = T::one() / T::from_usize(n).unwrap();
        let mut out = vec![T::zero(); 2 * hidden];
        for s in fwd_states.iter() {
            axpy(scale, s, &mut out[..hidden]);
        }
        for s in bwd_states.iter() {
            axpy(scale, s, &mut out[hidden..]);
        }
        (out, BiLstmCache { fwd, bwd })
    }

    pub fn backward(&self, seq: &SequenceMatrix<T>, cache: &BiLstmCache<T>, dout: &[T], grad: &mut Self) {
        let hidden = self.hidden();
        let n = cache.fwd.len();
        let scale = T::one() / T::from_usize(n).unwrap();
        let dh_f: Vec<T> = dout[..hidden].iter().map(|&d| d * scale).collect();
        let dh_b: Vec<T> = dout[hidden..].iter().map(|&d| d * scale).collect();
        self.forward.backward(seq, &cache.fwd, &vec![dh_f; n], &mut grad.forward);
        self.backward.backward(seq, &cache.bwd, &vec![dh_b; n], &mut grad.backward);
    }

    pub(crate) fn params(&self) -> Vec<(String, &Vec<T>)> {
        let mut out = Vec::new();
        for (name, d) in [("fwd", &self.forward), ("bwd", &self.backward)] {
            out.push((format!("{name}.w_input"), &d.w_input));
            out.push((format!("{name}.w_recurrent"), &d.w_recurrent));
            out.push((format!("{name}.bias"), &d.bias));
        }
        out
    }

    pub(crate) fn params_mut(&mut self) -> Vec<(String, &mut Vec<T>)> {
        let mut out = Vec::new();
        for (name, d) in [("fwd", &mut self.forward), ("bwd", &mut self.backward)] {
            out.push((format!("{name}.w_input"), &mut d.w_input));
            out.push((format!("{name}.w_recurrent"), &mut d.w_recurrent));
            out.push((format!("{name}.bias"), &mut d.bias));
        }
        out
    }
}
