//! Dense feed-forward networks with hand-derived backward passes.
//!
//! A layer computes `activation(W x + b)` with `W` stored row-major as
//! `(out_dim, in_dim)`. [`Mlp::forward`] records a [`Tape`] holding every
//! intermediate needed by [`Mlp::backward`], which returns the exact gradient
//! of `output · grad_output` with respect to all weights, biases and the input.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative given the pre-activation `z` and the activation value `a`.
    #[inline]
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    in_dim: usize,
    out_dim: usize,
    /// Row-major `(out_dim, in_dim)`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidParams("layer dims must be > 0".into()));
        }
        if weights.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch {
                context: "layer weights",
                expected: in_dim * out_dim,
                actual: weights.len(),
            });
        }
        if bias.len() != out_dim {
            return Err(Error::DimensionMismatch {
                context: "layer bias",
                expected: out_dim,
                actual: bias.len(),
            });
        }
        Ok(Self {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    /// Uniform fan-in initialization `U(-1/sqrt(in), 1/sqrt(in))`, zero bias.
    pub fn init<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = 1.0 / (in_dim.max(1) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Self::from_parts(in_dim, out_dim, weights, vec![0.0; out_dim], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    fn pre_activation(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }
}

/// Stack of dense layers. Used for the shared extractor, the per-domain heads
/// and the relation network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Cached intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    /// `values[0]` is the input, `values[k + 1]` the output of layer `k`.
    values: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn input(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn output(&self) -> &[f64] {
        self.values.last().expect("tape holds at least the input")
    }
}

impl Mlp {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParams("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    context: "layer chaining",
                    expected: pair[0].out_dim,
                    actual: pair[1].in_dim,
                });
            }
        }
        let net = Self { layers };
        if !net.is_finite() {
            return Err(Error::NonFinite("network parameters"));
        }
        Ok(net)
    }

    /// Builds a network with layer widths `dims` (input first) and one
    /// activation per layer.
    pub fn init<R: Rng + ?Sized>(
        dims: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::InvalidParams(format!(
                "{} widths need {} activations, got {}",
                dims.len(),
                dims.len().saturating_sub(1),
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Dense::init(w[0], w[1], act, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(layers)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    /// Same shape, all parameters zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let layers = self
            .layers
            .iter()
            .map(|l| Dense {
                weights: vec![0.0; l.weights.len()],
                bias: vec![0.0; l.bias.len()],
                ..l.clone()
            })
            .collect();
        Self { layers }
    }

    pub fn zero_last_layer(&mut self) {
        let last = self.layers.last_mut().expect("non-empty");
        last.weights.fill(0.0);
        last.bias.fill(0.0);
    }

    pub fn same_shape(&self, other: &Mlp) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.in_dim == b.in_dim && a.out_dim == b.out_dim)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            let act = layer.activation;
            h = layer
                .pre_activation(&h)
                .into_iter()
                .map(|z| act.apply(z))
                .collect();
        }
        Ok(h)
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(x)?;
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        let mut pre = Vec::with_capacity(self.layers.len());
        values.push(x.to_vec());
        for layer in &self.layers {
            let z = layer.pre_activation(values.last().expect("non-empty"));
            let a = z.iter().map(|&zi| layer.activation.apply(zi)).collect();
            pre.push(z);
            values.push(a);
        }
        let out = values.last().expect("non-empty").clone();
        Ok((out, Tape { values, pre }))
    }

    /// Gradients of `output · grad_output`, freshly allocated.
    pub fn backward(&self, tape: &Tape, grad_output: &[f64]) -> Result<(Mlp, Vec<f64>)> {
        let mut grads = self.zeros_like();
        let gx = self.backward_into(tape, grad_output, &mut grads)?;
        Ok((grads, gx))
    }

    /// Like [`Mlp::backward`] but accumulates into `grads`.
    pub fn backward_into(&self, tape: &Tape, grad_output: &[f64], grads: &mut Mlp) -> Result<Vec<f64>> {
        self.check_tape(tape)?;
        if grad_output.len() != self.out_dim() {
            return Err(Error::DimensionMismatch {
                context: "grad_output",
                expected: self.out_dim(),
                actual: grad_output.len(),
            });
        }
        if !self.same_shape(grads) {
            return Err(Error::InvalidParams("gradient accumulator shape".into()));
        }
        let mut upstream = grad_output.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &tape.values[k];
            let out = &tape.values[k + 1];
            let delta: Vec<f64> = upstream
                .iter()
                .zip(&tape.pre[k])
                .zip(out)
                .map(|((g, &z), &a)| g * layer.activation.derivative(z, a))
                .collect();
            let acc = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                acc.bias[o] += d;
                let row = &mut acc.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (w, &xi) in row.iter_mut().zip(input) {
                    *w += d * xi;
                }
            }
            let mut down = vec![0.0; layer.in_dim];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (g, &w) in down.iter_mut().zip(row) {
                    *g += d * w;
                }
            }
            upstream = down;
        }
        Ok(upstream)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "network input",
                expected: self.in_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn check_tape(&self, tape: &Tape) -> Result<()> {
        if tape.pre.len() != self.layers.len() || tape.values.len() != self.layers.len() + 1 {
            return Err(Error::StaleTape(format!(
                "tape has {} layers, network has {}",
                tape.pre.len(),
                self.layers.len()
            )));
        }
        for (k, layer) in self.layers.iter().enumerate() {
            if tape.values[k].len() != layer.in_dim || tape.pre[k].len() != layer.out_dim {
                return Err(Error::StaleTape(format!("layer {k} shape differs")));
            }
        }
        Ok(())
    }
}

impl Parameters for Mlp {
    fn visit(&self, f: &mut dyn FnMut(&[f64])) {
        for l in &self.layers {
            f(&l.weights);
            f(&l.bias);
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [f64])) {
        for l in &mut self.layers {
            f(&mut l.weights);
            f(&mut l.bias);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{flatten, grad_check, rng::stream, Purpose};

    fn single(w: Vec<f64>, act: Activation) -> Mlp {
        let dim = (w.len() as f64).sqrt() as usize;
        Mlp::from_layers(vec![Dense::from_parts(dim, dim, w, vec![0.0; dim], act).unwrap()]).unwrap()
    }

    #[test]
    fn identity_layer_passes_input_through() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], Activation::Identity);
        let (y, _) = net.forward(&[1.0, 2.0]).unwrap();
        assert_eq!(y, vec![1.0, 2.0]);
    }

    #[test]
    fn relu_layer_clips_negative() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], Activation::Relu);
        let (y, _) = net.forward(&[-1.0, 2.0]).unwrap();
        assert_eq!(y, vec![0.0, 2.0]);
    }

    #[test]
    fn forward_matches_straight_line_evaluation() {
        let mut rng = stream(3, Purpose::Init, 0);
        let net = Mlp::init(&[3, 4, 2], &[Activation::Tanh, Activation::Identity], &mut rng).unwrap();
        let x = [0.3, -1.2, 0.7];
        let (y, _) = net.forward(&x).unwrap();

        let l0 = &net.layers()[0];
        let l1 = &net.layers()[1];
        let mut hidden = [0.0; 4];
        for o in 0..4 {
            let mut z = l0.bias()[o];
            for i in 0..3 {
                z += l0.weight(o, i) * x[i];
            }
            hidden[o] = z.tanh();
        }
        for o in 0..2 {
            let mut z = l1.bias()[o];
            for i in 0..4 {
                z += l1.weight(o, i) * hidden[i];
            }
            assert_eq!(y[o], z);
        }
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = single(vec![1.0, 0.0, 0.0, 1.0], Activation::Identity);
        assert!(matches!(net.forward(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn linear_backward_is_outer_product_and_transpose() {
        let w = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let net = Mlp::from_layers(vec![Dense::from_parts(3, 2, w, vec![0.0; 2], Activation::Identity).unwrap()])
            .unwrap();
        let x = [1.0, -1.0, 2.0];
        let g = [0.5, -2.0];
        let (_, tape) = net.forward(&x).unwrap();
        let (grads, gx) = net.backward(&tape, &g).unwrap();
        let gw = grads.layers()[0].weights();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(gw[o * 3 + i], g[o] * x[i]);
            }
        }
        assert_eq!(grads.layers()[0].bias(), &g);
        // W^T g
        assert_eq!(gx, vec![1.0 * 0.5 + 4.0 * -2.0, 2.0 * 0.5 + 5.0 * -2.0, 3.0 * 0.5 + 6.0 * -2.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = stream(5, Purpose::Init, 0);
        let net = Mlp::init(&[2, 5, 3], &[Activation::Relu, Activation::Identity], &mut rng).unwrap();
        let (_, tape) = net.forward(&[0.4, -0.9]).unwrap();
        let (grads, gx) = net.backward(&tape, &[0.0; 3]).unwrap();
        assert!(flatten(&grads).iter().all(|&v| v == 0.0));
        assert!(gx.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stale_tape_is_rejected() {
        let mut rng = stream(5, Purpose::Init, 0);
        let a = Mlp::init(&[2, 5, 3], &[Activation::Relu, Activation::Identity], &mut rng).unwrap();
        let b = Mlp::init(&[2, 4, 3], &[Activation::Relu, Activation::Identity], &mut rng).unwrap();
        let (_, tape) = b.forward(&[0.4, -0.9]).unwrap();
        assert!(matches!(a.backward(&tape, &[1.0; 3]), Err(Error::StaleTape(_))));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = stream(11, Purpose::Init, 0);
        let net = Mlp::init(
            &[3, 6, 5, 2],
            &[Activation::Tanh, Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let x = [0.7, -0.2, 1.3];
        let g = [0.9, -1.4];
        let (_, tape) = net.forward(&x).unwrap();
        let (grads, gx) = net.backward(&tape, &g).unwrap();

        let objective = |n: &Mlp, input: &[f64]| -> f64 {
            let y = n.predict(input).unwrap();
            y.iter().zip(&g).map(|(a, b)| a * b).sum()
        };
        let params = flatten(&net);
        let report = grad_check(
            |p: &[f64]| {
                let mut n = net.clone();
                crate::numerics::assign(&mut n, p);
                objective(&n, &x)
            },
            &params,
            &flatten(&grads),
        );
        assert!(report.max_rel_error < 1e-5, "{report:?}");

        let input_report = grad_check(|p: &[f64]| objective(&net, p), &x, &gx);
        assert!(input_report.max_rel_error < 1e-5, "{input_report:?}");
    }

    #[test]
    fn chaining_is_validated() {
        let a = Dense::from_parts(2, 3, vec![0.0; 6], vec![0.0; 3], Activation::Relu).unwrap();
        let b = Dense::from_parts(4, 1, vec![0.0; 4], vec![0.0; 1], Activation::Identity).unwrap();
        assert!(Mlp::from_layers(vec![a, b]).is_err());
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let a = Dense::from_parts(1, 1, vec![f64::NAN], vec![0.0], Activation::Relu).unwrap();
        assert!(matches!(Mlp::from_layers(vec![a]), Err(Error::NonFinite(_))));
    }
}
