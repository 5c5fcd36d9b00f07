//! Single-layer LSTM with exact backpropagation through time.
//!
//! Every gate reads the concatenation `z = [h_{t-1}, x_t]`:
//!
//! ```text
//! i_t  = σ(W_i z + b_i)          input gate
//! f_t  = σ(W_f z + b_f)          forget gate
//! o_t  = σ(W_o z + b_o)          output gate
//! C̃_t  = tanh(W_C z + b_C)       candidate state
//! C_t  = f_t ⊙ C_{t-1} + i_t ⊙ C̃_t
//! h_t  = o_t ⊙ tanh(C_t)
//! ```
//!
//! A linear [`Head`] turns hidden outputs into either per-step regression
//! outputs or final-step class logits.

mod checkpoint;
mod matrix;
mod train;

pub use checkpoint::{load_model, save_model, Model};
pub use matrix::Matrix;
pub use train::{
    initial_weights, split_groups, train, train_with, EpochLog, LabeledSequence, TrainConfig,
    TrainLog,
};

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LstmError {
    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("empty sequence")]
    EmptySequence,
    #[error("dataset is empty or has fewer than two sequences")]
    EmptyDataset,
    #[error("dataset has {0} distinct groups; a train/validation split needs at least two")]
    TooFewGroups(usize),
    #[error("sequence {index}: {message}")]
    DimensionMismatch { index: usize, message: String },
    #[error("head kind does not match targets")]
    HeadMismatch,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("checkpoint checksum mismatch")]
    ChecksumMismatch,
}

fn check(what: &'static str, expected: usize, found: usize) -> Result<(), LstmError> {
    if expected == found {
        Ok(())
    } else {
        Err(LstmError::ShapeMismatch {
            what,
            expected,
            found,
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Gate weights `H x (H + D)` and biases `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_i: Matrix,
    pub w_f: Matrix,
    pub w_o: Matrix,
    pub w_c: Matrix,
    pub b_i: Vec<f64>,
    pub b_f: Vec<f64>,
    pub b_o: Vec<f64>,
    pub b_c: Vec<f64>,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, hidden_dim + input_dim);
        let b = || vec![0.0; hidden_dim];
        Self {
            input_dim,
            hidden_dim,
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_c: w(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    /// Weights uniform in `±1/√H`, biases zero except the forget gate at 1.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let cols = hidden_dim + input_dim;
        Self {
            input_dim,
            hidden_dim,
            w_i: Matrix::uniform(hidden_dim, cols, bound, rng),
            w_f: Matrix::uniform(hidden_dim, cols, bound, rng),
            w_o: Matrix::uniform(hidden_dim, cols, bound, rng),
            w_c: Matrix::uniform(hidden_dim, cols, bound, rng),
            b_i: vec![0.0; hidden_dim],
            b_f: vec![1.0; hidden_dim],
            b_o: vec![0.0; hidden_dim],
            b_c: vec![0.0; hidden_dim],
        }
    }

    pub fn tensors(&self) -> [&[f64]; 8] {
        [
            self.w_i.as_slice(),
            self.w_f.as_slice(),
            self.w_o.as_slice(),
            self.w_c.as_slice(),
            &self.b_i,
            &self.b_f,
            &self.b_o,
            &self.b_c,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 8] {
        [
            self.w_i.as_mut_slice(),
            self.w_f.as_mut_slice(),
            self.w_o.as_mut_slice(),
            self.w_c.as_mut_slice(),
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }

    pub const TENSOR_NAMES: [&'static str; 8] =
        ["w_i", "w_f", "w_o", "w_c", "b_i", "b_f", "b_o", "b_c"];
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        Self {
            c: vec![0.0; hidden_dim],
            h: vec![0.0; hidden_dim],
        }
    }
}

/// Everything one step needs for its backward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    pub i: Vec<f64>,
    pub f: Vec<f64>,
    pub o: Vec<f64>,
    pub candidate: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
}

impl StepCache {
    fn z(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.h_prev.len() + self.x.len());
        z.extend_from_slice(&self.h_prev);
        z.extend_from_slice(&self.x);
        z
    }
}

/// One LSTM step from `prev` on input `x`.
pub fn cell_forward(
    p: &LstmParams,
    prev: &LstmState,
    x: &[f64],
) -> Result<(LstmState, StepCache), LstmError> {
    let h = p.hidden_dim;
    check("input", p.input_dim, x.len())?;
    check("previous h", h, prev.h.len())?;
    check("previous C", h, prev.c.len())?;
    let mut z = Vec::with_capacity(h + x.len());
    z.extend_from_slice(&prev.h);
    z.extend_from_slice(x);

    let mut i = vec![0.0; h];
    let mut f = vec![0.0; h];
    let mut o = vec![0.0; h];
    let mut g = vec![0.0; h];
    p.w_i.affine(&z, &p.b_i, &mut i);
    p.w_f.affine(&z, &p.b_f, &mut f);
    p.w_o.affine(&z, &p.b_o, &mut o);
    p.w_c.affine(&z, &p.b_c, &mut g);
    for k in 0..h {
        i[k] = sigmoid(i[k]);
        f[k] = sigmoid(f[k]);
        o[k] = sigmoid(o[k]);
        g[k] = g[k].tanh();
    }
    let c: Vec<f64> = (0..h).map(|k| f[k] * prev.c[k] + i[k] * g[k]).collect();
    let h_out: Vec<f64> = (0..h).map(|k| o[k] * c[k].tanh()).collect();
    let state = LstmState {
        c: c.clone(),
        h: h_out.clone(),
    };
    let cache = StepCache {
        x: x.to_vec(),
        h_prev: prev.h.clone(),
        c_prev: prev.c.clone(),
        i,
        f,
        o,
        candidate: g,
        c,
        h: h_out,
    };
    Ok((state, cache))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    Regression,
    Classification,
}

/// Linear read-out `y = W_y h + b_y`.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Applied at every step.
    Regression { w: Matrix, b: Vec<f64> },
    /// Softmax logits from the final step only.
    Classification { w: Matrix, b: Vec<f64> },
}

impl Head {
    pub fn zeros(kind: HeadKind, outputs: usize, hidden_dim: usize) -> Self {
        let (w, b) = (Matrix::zeros(outputs, hidden_dim), vec![0.0; outputs]);
        match kind {
            HeadKind::Regression => Head::Regression { w, b },
            HeadKind::Classification => Head::Classification { w, b },
        }
    }

    pub fn init<R: Rng + ?Sized>(
        kind: HeadKind,
        outputs: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Self {
        let w = Matrix::uniform(outputs, hidden_dim, 1.0 / (hidden_dim as f64).sqrt(), rng);
        let b = vec![0.0; outputs];
        match kind {
            HeadKind::Regression => Head::Regression { w, b },
            HeadKind::Classification => Head::Classification { w, b },
        }
    }

    pub fn kind(&self) -> HeadKind {
        match self {
            Head::Regression { .. } => HeadKind::Regression,
            Head::Classification { .. } => HeadKind::Classification,
        }
    }

    pub fn weights(&self) -> (&Matrix, &Vec<f64>) {
        match self {
            Head::Regression { w, b } | Head::Classification { w, b } => (w, b),
        }
    }

    pub fn weights_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        match self {
            Head::Regression { w, b } | Head::Classification { w, b } => (w, b),
        }
    }

    pub fn outputs(&self) -> usize {
        self.weights().1.len()
    }

    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        let (w, b) = self.weights();
        let mut y = vec![0.0; b.len()];
        w.affine(h, b, &mut y);
        y
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outputs {
    PerStep(Vec<Vec<f64>>),
    Final(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    PerStep(Vec<Vec<f64>>),
    Class(usize),
}

/// Runs the sequence from a zero state.
pub fn sequence_forward(
    p: &LstmParams,
    head: &Head,
    xs: &[Vec<f64>],
) -> Result<(Outputs, Vec<StepCache>), LstmError> {
    if xs.is_empty() {
        return Err(LstmError::EmptySequence);
    }
    let (w, _) = head.weights();
    check("head input", p.hidden_dim, w.cols())?;
    let mut state = LstmState::zeros(p.hidden_dim);
    let mut caches = Vec::with_capacity(xs.len());
    for x in xs {
        let (next, cache) = cell_forward(p, &state, x)?;
        state = next;
        caches.push(cache);
    }
    let outputs = match head {
        Head::Regression { .. } => {
            Outputs::PerStep(caches.iter().map(|c| head.apply(&c.h)).collect())
        }
        Head::Classification { .. } => Outputs::Final(head.apply(&state.h)),
    };
    Ok((outputs, caches))
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Mean squared error over every step and component, or softmax
/// cross-entropy of the final logits.
pub fn loss(outputs: &Outputs, targets: &Targets) -> Result<f64, LstmError> {
    match (outputs, targets) {
        (Outputs::PerStep(ys), Targets::PerStep(ts)) => {
            check("target steps", ys.len(), ts.len())?;
            let mut sum = 0.0;
            let mut n = 0usize;
            for (y, t) in ys.iter().zip(ts) {
                check("target width", y.len(), t.len())?;
                sum += y.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                n += y.len();
            }
            if n == 0 {
                return Err(LstmError::EmptySequence);
            }
            Ok(sum / n as f64)
        }
        (Outputs::Final(logits), Targets::Class(k)) => {
            if *k >= logits.len() {
                return Err(LstmError::ShapeMismatch {
                    what: "class index",
                    expected: logits.len(),
                    found: *k,
                });
            }
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
            Ok(lse - logits[*k])
        }
        _ => Err(LstmError::HeadMismatch),
    }
}

/// Gradient with the same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub lstm: LstmParams,
    pub head: Head,
}

impl Gradients {
    pub fn zeros_like(p: &LstmParams, head: &Head) -> Self {
        Self {
            lstm: LstmParams::zeros(p.input_dim, p.hidden_dim),
            head: Head::zeros(head.kind(), head.outputs(), p.hidden_dim),
        }
    }

    pub fn slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.lstm.tensors().to_vec();
        let (w, b) = self.head.weights();
        v.push(w.as_slice());
        v.push(b);
        v
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let (w, b) = self.head.weights_mut();
        let mut v: Vec<&mut [f64]> = self.lstm.tensors_mut().into_iter().collect();
        v.push(w.as_mut_slice());
        v.push(b.as_mut_slice());
        v
    }

    pub fn add_assign(&mut self, o: &Gradients) {
        for (a, b) in self.slices_mut().into_iter().zip(o.slices()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.slices_mut() {
            for x in t.iter_mut() {
                *x *= s;
            }
        }
    }

    pub fn norm(&self) -> f64 {
        self.slices()
            .iter()
            .flat_map(|t| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }
}

/// Exact gradient of [`loss`] with respect to every parameter.
pub fn backward(
    p: &LstmParams,
    head: &Head,
    caches: &[StepCache],
    targets: &Targets,
) -> Result<Gradients, LstmError> {
    backward_scaled(p, head, caches, targets, 1.0)
}

/// Gradient of `scale * loss`.
pub fn backward_scaled(
    p: &LstmParams,
    head: &Head,
    caches: &[StepCache],
    targets: &Targets,
    scale: f64,
) -> Result<Gradients, LstmError> {
    let n = caches.len();
    if n == 0 {
        return Err(LstmError::EmptySequence);
    }
    let hd = p.hidden_dim;
    let mut grads = Gradients::zeros_like(p, head);
    let (w_y, _) = head.weights();
    check("head input", hd, w_y.cols())?;

    // dL/dh_t contributed directly by the head
    let mut dh_head: Vec<Vec<f64>> = vec![vec![0.0; hd]; n];
    match (head, targets) {
        (Head::Regression { .. }, Targets::PerStep(ts)) => {
            check("target steps", n, ts.len())?;
            let outs = head.outputs();
            let denom = (n * outs) as f64;
            let (gw, gb) = grads.head.weights_mut();
            for (t, (cache, target)) in caches.iter().zip(ts).enumerate() {
                check("target width", outs, target.len())?;
                let y = head.apply(&cache.h);
                let dy: Vec<f64> = y
                    .iter()
                    .zip(target)
                    .map(|(a, b)| scale * 2.0 * (a - b) / denom)
                    .collect();
                gw.add_outer(&dy, &cache.h);
                for (g, d) in gb.iter_mut().zip(&dy) {
                    *g += d;
                }
                w_y.add_transpose_mul(&dy, &mut dh_head[t]);
            }
        }
        (Head::Classification { .. }, Targets::Class(k)) => {
            let last = &caches[n - 1];
            let logits = head.apply(&last.h);
            if *k >= logits.len() {
                return Err(LstmError::ShapeMismatch {
                    what: "class index",
                    expected: logits.len(),
                    found: *k,
                });
            }
            let mut d = softmax(&logits);
            d[*k] -= 1.0;
            for v in &mut d {
                *v *= scale;
            }
            let (gw, gb) = grads.head.weights_mut();
            gw.add_outer(&d, &last.h);
            for (g, v) in gb.iter_mut().zip(&d) {
                *g += v;
            }
            w_y.add_transpose_mul(&d, &mut dh_head[n - 1]);
        }
        _ => return Err(LstmError::HeadMismatch),
    }

    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut da_i = vec![0.0; hd];
    let mut da_f = vec![0.0; hd];
    let mut da_o = vec![0.0; hd];
    let mut da_c = vec![0.0; hd];
    for t in (0..n).rev() {
        let s = &caches[t];
        for k in 0..hd {
            let dh = dh_head[t][k] + dh_next[k];
            let tc = s.c[k].tanh();
            let dc = dc_next[k] + dh * s.o[k] * (1.0 - tc * tc);
            da_o[k] = dh * tc * s.o[k] * (1.0 - s.o[k]);
            da_f[k] = dc * s.c_prev[k] * s.f[k] * (1.0 - s.f[k]);
            da_i[k] = dc * s.candidate[k] * s.i[k] * (1.0 - s.i[k]);
            da_c[k] = dc * s.i[k] * (1.0 - s.candidate[k] * s.candidate[k]);
            dc_next[k] = dc * s.f[k];
        }
        let z = s.z();
        let g = &mut grads.lstm;
        g.w_i.add_outer(&da_i, &z);
        g.w_f.add_outer(&da_f, &z);
        g.w_o.add_outer(&da_o, &z);
        g.w_c.add_outer(&da_c, &z);
        for k in 0..hd {
            g.b_i[k] += da_i[k];
            g.b_f[k] += da_f[k];
            g.b_o[k] += da_o[k];
            g.b_c[k] += da_c[k];
        }
        let mut dz = vec![0.0; z.len()];
        p.w_i.add_transpose_mul(&da_i, &mut dz);
        p.w_f.add_transpose_mul(&da_f, &mut dz);
        p.w_o.add_transpose_mul(&da_o, &mut dz);
        p.w_c.add_transpose_mul(&da_c, &mut dz);
        dh_next.copy_from_slice(&dz[..hd]);
    }
    Ok(grads)
}

/// Forward, loss and gradient for one sequence.
pub fn loss_and_gradient(
    p: &LstmParams,
    head: &Head,
    xs: &[Vec<f64>],
    targets: &Targets,
) -> Result<(f64, Gradients), LstmError> {
    let (out, caches) = sequence_forward(p, head, xs)?;
    let l = loss(&out, targets)?;
    let g = backward(p, head, &caches, targets)?;
    Ok((l, g))
}
