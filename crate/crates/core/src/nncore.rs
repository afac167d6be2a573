//! Minimal dense-network machinery: batched forward/backward passes through
//! MLP chains, Adam, and a reduce-on-plateau learning-rate schedule.
//!
//! Networks store all parameters in one flat vector so optimizers and
//! checkpoints can treat them uniformly. Layer `l` owns a row-major
//! `in × out` weight block followed by its `out` biases; a batch is a
//! row-major `batch × features` [`Tensor`] and each layer computes
//! `y = act(x·W + b)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("non-finite value in {0}")]
    NonFiniteValue(&'static str),
}

fn check_finite(values: &[f64], what: &'static str) -> Result<(), NnError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NnError::NonFiniteValue(what))
    }
}

/// Row-major 2-D array of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Tensor {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self, NnError> {
        if values.len() != rows * cols {
            return Err(NnError::ShapeMismatch {
                expected: vec![rows * cols],
                got: vec![values.len()],
            });
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, NnError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(NnError::ShapeMismatch {
                    expected: vec![cols],
                    got: vec![r.len()],
                });
            }
            values.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            values,
        })
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.cols.max(1)).take(self.rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Softplus,
    Sigmoid,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Softplus => softplus(x),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Softplus => sigmoid(x),
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
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

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x + (-x).exp()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Borrowed view of one layer's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs × outputs`.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
    pub activation: Activation,
}

/// A fully connected MLP chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
}

/// Intermediate values of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// `inputs[l]` is the input of layer `l`; the last entry is the output.
    activations: Vec<Tensor>,
    pre_activations: Vec<Tensor>,
}

impl Trace {
    pub fn output(&self) -> &Tensor {
        self.activations
            .last()
            .expect("trace holds the network input")
    }
}

/// Parameter gradients (same layout as [`DenseNet::params`]) and the
/// gradient with respect to the network input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<f64>,
    pub input: Tensor,
}

impl DenseNet {
    /// Fan-in scaled uniform weights `U(-1/√fan_in, 1/√fan_in)`, zero biases.
    pub fn new(dims: &[usize], activations: &[Activation], rng: &mut impl Rng) -> Self {
        let mut net = Self::zeros(dims, activations);
        for l in 0..net.n_layers() {
            let (w, _) = net.layer_ranges(l);
            let bound = 1.0 / (dims[l] as f64).sqrt();
            for p in &mut net.params[w] {
                *p = rng.random_range(-bound..bound);
            }
        }
        net
    }

    /// A network with every parameter zero.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Self {
        assert!(dims.len() >= 2, "a network needs at least one layer");
        assert_eq!(
            activations.len(),
            dims.len() - 1,
            "one activation per layer"
        );
        let n: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Self {
            dims: dims.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; n],
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn n_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("nonempty dims")
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layer_ranges(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let start: usize = self
            .dims
            .windows(2)
            .take(l)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (i, o) = (self.dims[l], self.dims[l + 1]);
        (start..start + i * o, start + i * o..start + i * o + o)
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let (w, b) = self.layer_ranges(l);
        LayerView {
            inputs: self.dims[l],
            outputs: self.dims[l + 1],
            weights: &self.params[w],
            bias: &self.params[b],
            activation: self.activations[l],
        }
    }

    pub fn layer_mut(&mut self, l: usize) -> (&mut [f64], &mut [f64]) {
        let (w, b) = self.layer_ranges(l);
        let (head, tail) = self.params.split_at_mut(b.start);
        (&mut head[w], &mut tail[..b.len()])
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut x = input.clone();
        self.check_input(&x)?;
        for l in 0..self.n_layers() {
            let mut pre = affine(self.layer(l), &x);
            let act = self.activations[l];
            if act != Activation::Identity {
                pre.values.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            x = pre;
        }
        check_finite(&x.values, "forward output")?;
        Ok(x)
    }

    pub fn forward_trace(&self, input: &Tensor) -> Result<Trace, NnError> {
        self.check_input(input)?;
        let mut activations = vec![input.clone()];
        let mut pre_activations = Vec::with_capacity(self.n_layers());
        for l in 0..self.n_layers() {
            let pre = affine(self.layer(l), activations.last().expect("nonempty"));
            let act = self.activations[l];
            let mut out = pre.clone();
            if act != Activation::Identity {
                out.values.iter_mut().for_each(|v| *v = act.apply(*v));
            }
            pre_activations.push(pre);
            activations.push(out);
        }
        check_finite(
            &activations.last().expect("nonempty").values,
            "forward output",
        )?;
        Ok(Trace {
            activations,
            pre_activations,
        })
    }

    /// Back-propagates `grad_output` (dLoss/dOutput, same shape as the
    /// output) through the traced pass.
    pub fn backward(&self, trace: &Trace, grad_output: &Tensor) -> Result<Gradients, NnError> {
        let out = trace.output();
        if grad_output.shape() != out.shape() {
            return Err(NnError::ShapeMismatch {
                expected: out.shape().to_vec(),
                got: grad_output.shape().to_vec(),
            });
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_output.clone();
        for l in (0..self.n_layers()).rev() {
            let layer = self.layer(l);
            let pre = &trace.pre_activations[l];
            let post = &trace.activations[l + 1];
            if layer.activation != Activation::Identity {
                for ((d, x), y) in delta.values.iter_mut().zip(&pre.values).zip(&post.values) {
                    *d *= layer.activation.derivative(*x, *y);
                }
            }
            let input = &trace.activations[l];
            let (wr, br) = self.layer_ranges(l);
            let (o, n) = (layer.outputs, layer.inputs);
            {
                let (gw_all, gb_all) = grads.split_at_mut(br.start);
                let gw = &mut gw_all[wr];
                let gb = &mut gb_all[..o];
                for r in 0..delta.rows {
                    let d = delta.row(r);
                    let x = input.row(r);
                    for (gb, dv) in gb.iter_mut().zip(d) {
                        *gb += dv;
                    }
                    for (i, xv) in x.iter().enumerate() {
                        if *xv == 0.0 {
                            continue;
                        }
                        let row = &mut gw[i * o..(i + 1) * o];
                        for (g, dv) in row.iter_mut().zip(d) {
                            *g += xv * dv;
                        }
                    }
                }
            }
            let mut next = Tensor::zeros(delta.rows, n);
            for r in 0..delta.rows {
                let d = delta.row(r);
                let dst = next.row_mut(r);
                for (i, dx) in dst.iter_mut().enumerate() {
                    let w = &layer.weights[i * o..(i + 1) * o];
                    *dx = w.iter().zip(d).map(|(a, b)| a * b).sum();
                }
            }
            delta = next;
        }
        check_finite(&grads, "parameter gradients")?;
        Ok(Gradients {
            params: grads,
            input: delta,
        })
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        if x.cols != self.input_dim() {
            return Err(NnError::ShapeMismatch {
                expected: vec![x.rows, self.input_dim()],
                got: x.shape().to_vec(),
            });
        }
        check_finite(&x.values, "network input")
    }
}

fn affine(layer: LayerView<'_>, x: &Tensor) -> Tensor {
    let o = layer.outputs;
    let mut y = Tensor::zeros(x.rows, o);
    for r in 0..x.rows {
        let dst = &mut y.values[r * o..(r + 1) * o];
        dst.copy_from_slice(layer.bias);
        for (i, xv) in x.row(r).iter().enumerate() {
            if *xv == 0.0 {
                continue;
            }
            let w = &layer.weights[i * o..(i + 1) * o];
            for (d, wv) in dst.iter_mut().zip(w) {
                *d += xv * wv;
            }
        }
    }
    y
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        assert!(lr > 0.0, "learning rate must be positive");
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), NnError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::ShapeMismatch {
                expected: vec![self.m.len()],
                got: vec![params.len(), grads.len()],
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Halves (by `factor`) the learning rate after `patience` consecutive
/// updates without improvement of a maximized metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauSchedule {
    pub lr: f64,
    pub factor: f64,
    pub patience: u32,
    pub min_lr: f64,
    pub best_metric: Option<f64>,
    pub wait: u32,
}

impl PlateauSchedule {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            factor: 0.5,
            patience: 200,
            min_lr: 1e-9,
            best_metric: None,
            wait: 0,
        }
    }

    /// Records one metric observation and returns the (possibly reduced) rate.
    pub fn update(&mut self, metric: f64) -> f64 {
        match self.best_metric {
            Some(best) if metric <= best + 1e-12 => {
                self.wait += 1;
                if self.wait >= self.patience {
                    self.lr = (self.lr * self.factor).max(self.min_lr);
                    self.wait = 0;
                }
            }
            _ => {
                self.best_metric = Some(metric);
                self.wait = 0;
            }
        }
        self.lr
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    const H: f64 = 1e-5;

    /// Norm-wise relative error: max |a - n| / max(max |a|, max |n|).
    fn rel_error(a: &[f64], n: &[f64]) -> f64 {
        let diff = a
            .iter()
            .zip(n)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        let scale = a.iter().chain(n).map(|x| x.abs()).fold(1e-12, f64::max);
        diff / scale
    }

    fn weighted_sum(net: &DenseNet, x: &Tensor, c: &Tensor) -> f64 {
        let y = net.forward(x).unwrap();
        y.values().iter().zip(c.values()).map(|(a, b)| a * b).sum()
    }

    fn random_tensor(rows: usize, cols: usize, rng: &mut SeededRng) -> Tensor {
        Tensor::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn linear_layer_gradients() {
        let mut net = DenseNet::zeros(&[3, 1], &[Activation::Identity]);
        net.params_mut().copy_from_slice(&[0.5, -1.0, 2.0, 0.25]);
        let x = Tensor::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let trace = net.forward_trace(&x).unwrap();
        assert_eq!(trace.output().values(), &[0.5 - 2.0 + 6.0 + 0.25]);
        let g = net
            .backward(&trace, &Tensor::from_rows(&[[1.0]]).unwrap())
            .unwrap();
        assert_eq!(g.params, vec![1.0, 2.0, 3.0, 1.0]);
        assert_eq!(g.input.values(), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn zero_input_zero_bias_linear_is_zero() {
        let mut rng = seeded_rng(1);
        let mut net = DenseNet::new(&[4, 5, 3], &[Activation::Identity; 2], &mut rng);
        assert!(net.layer(0).bias.iter().all(|b| *b == 0.0));
        for l in 0..2 {
            net.layer_mut(l).1.fill(0.0);
        }
        let y = net.forward(&Tensor::zeros(2, 4)).unwrap();
        assert!(y.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn shape_and_finiteness_errors() {
        let net = DenseNet::zeros(&[3, 2], &[Activation::Identity]);
        assert!(matches!(
            net.forward(&Tensor::zeros(1, 4)),
            Err(NnError::ShapeMismatch { .. })
        ));
        let bad = Tensor::from_rows(&[[f64::NAN, 0.0, 0.0]]).unwrap();
        assert!(matches!(net.forward(&bad), Err(NnError::NonFiniteValue(_))));
        let t = net.forward_trace(&Tensor::zeros(1, 3)).unwrap();
        assert!(net.backward(&t, &Tensor::zeros(2, 2)).is_err());
        assert!(Tensor::from_vec(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn gradient_check_dvae_shapes() {
        // The three network shapes the DVAE uses, shrunk hidden widths plus
        // the full-size ones.
        let acts = [
            Activation::Softplus,
            Activation::Softplus,
            Activation::Identity,
        ];
        let shapes: [&[usize]; 6] = [
            &[31, 100, 100, 4],
            &[3, 100, 100, 30],
            &[8, 100, 100, 1],
            &[31, 7, 5, 4],
            &[3, 6, 6, 30],
            &[8, 5, 4, 1],
        ];
        let mut rng = seeded_rng(7);
        let mut worst: f64 = 0.0;
        for draw in 0..100 {
            let dims = shapes[draw % shapes.len()];
            let net = DenseNet::new(dims, &acts, &mut rng);
            let x = random_tensor(2, dims[0], &mut rng);
            let c = random_tensor(2, *dims.last().unwrap(), &mut rng);
            let trace = net.forward_trace(&x).unwrap();
            let g = net.backward(&trace, &c).unwrap();
            // Check a strided subset of parameters on the large nets.
            let stride = (net.params().len() / 60).max(1);
            let idx: Vec<usize> = (0..net.params().len()).step_by(stride).collect();
            let mut numeric = Vec::new();
            let mut analytic = Vec::new();
            for &i in &idx {
                let mut p = net.clone();
                p.params_mut()[i] += H;
                let up = weighted_sum(&p, &x, &c);
                p.params_mut()[i] -= 2.0 * H;
                let down = weighted_sum(&p, &x, &c);
                numeric.push((up - down) / (2.0 * H));
                analytic.push(g.params[i]);
            }
            worst = worst.max(rel_error(&analytic, &numeric));
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = seeded_rng(3);
        let acts = [Activation::Tanh, Activation::Sigmoid, Activation::Identity];
        let net = DenseNet::new(&[4, 6, 5, 3], &acts, &mut rng);
        let x = random_tensor(3, 4, &mut rng);
        let c = random_tensor(3, 3, &mut rng);
        let g = net.backward(&net.forward_trace(&x).unwrap(), &c).unwrap();
        let mut numeric = Vec::new();
        for i in 0..x.values().len() {
            let mut xp = x.clone();
            xp.values_mut()[i] += H;
            let up = weighted_sum(&net, &xp, &c);
            xp.values_mut()[i] -= 2.0 * H;
            numeric.push((up - weighted_sum(&net, &xp, &c)) / (2.0 * H));
        }
        assert!(rel_error(g.input.values(), &numeric) < 1e-5);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut adam = AdamState::new(1, 0.01);
        let mut w = [1.0];
        adam.step(&mut w, &[3.0]).unwrap();
        assert!((w[0] - (1.0 - 0.01)).abs() < 1e-9);
        let mut adam = AdamState::new(2, 0.01);
        let mut w = [1.0, -2.0];
        adam.step(&mut w, &[0.0, 0.0]).unwrap();
        assert_eq!(w, [1.0, -2.0]);
        assert_eq!(adam.step, 1);
        assert!(adam.step(&mut w, &[0.0]).is_err());
    }

    /// Independent scalar Adam used as the reference trajectory.
    fn scalar_adam(w0: f64, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> Vec<f64> {
        let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
        let (mut m, mut v, mut w) = (0.0, 0.0, w0);
        let mut out = Vec::new();
        for t in 1..=steps {
            let g = grad(w);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t as i32));
            let vh = v / (1.0 - b2.powi(t as i32));
            w -= lr * mh / (vh.sqrt() + eps);
            out.push(w);
        }
        out
    }

    #[test]
    fn adam_on_quadratic_matches_reference() {
        let grad = |w: f64| 2.0 * (w - 3.0);
        let reference = scalar_adam(0.0, 0.1, 100, grad);
        let mut adam = AdamState::new(1, 0.1);
        let mut w = [0.0];
        let mut losses = Vec::new();
        for r in &reference {
            let g = [grad(w[0])];
            adam.step(&mut w, &g).unwrap();
            assert!((w[0] - r).abs() < 1e-12);
            losses.push((w[0] - 3.0).powi(2));
        }
        assert!(losses[99] < losses[0]);
        assert!(w[0] > 2.0 && w[0] < 4.0, "{}", w[0]);
        // The approach phase (before the first overshoot) is monotone.
        let first_over = reference.iter().position(|w| *w > 3.0).unwrap_or(100);
        assert!(losses[..first_over].windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn plateau_schedule() {
        let mut s = PlateauSchedule::new(1e-4);
        for i in 0..1000 {
            assert_eq!(s.update(i as f64), 1e-4);
        }
        let mut s = PlateauSchedule::new(1e-4);
        s.update(0.5);
        for _ in 0..199 {
            s.update(0.5);
        }
        assert_eq!(s.lr, 1e-4);
        s.update(0.4);
        assert_eq!(s.lr, 0.5e-4);
        s.update(0.6);
        assert_eq!(s.wait, 0);
        let mut s = PlateauSchedule::new(1e-4);
        s.min_lr = 0.3e-4;
        for _ in 0..2000 {
            s.update(0.0);
        }
        assert_eq!(s.lr, 0.3e-4);
    }

    #[test]
    fn flat_metric_halving_counts() {
        // First observation sets the best; 200 flat updates afterwards halve once.
        let mut s = PlateauSchedule::new(1.0);
        s.update(0.9);
        for _ in 0..200 {
            s.update(0.9);
        }
        assert_eq!(s.lr, 0.5);
        for _ in 0..200 {
            s.update(0.9);
        }
        assert_eq!(s.lr, 0.25);
    }

    #[test]
    fn determinism_per_seed() {
        let acts = [Activation::Softplus, Activation::Identity];
        let a = DenseNet::new(&[5, 8, 2], &acts, &mut seeded_rng(42));
        let b = DenseNet::new(&[5, 8, 2], &acts, &mut seeded_rng(42));
        let c = DenseNet::new(&[5, 8, 2], &acts, &mut seeded_rng(43));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(v in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
            let p = softmax(&v);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x > 0.0));
            let lp = log_softmax(&v);
            for (a, b) in p.iter().zip(&lp) {
                prop_assert!((a.ln() - b).abs() < 1e-9);
            }
        }

        #[test]
        fn sigmoid_stable(x in -800.0f64..800.0) {
            let s = sigmoid(x);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!(log_sigmoid(x).is_finite());
        }
    }
}
