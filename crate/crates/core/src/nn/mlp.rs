//! Feed-forward stack with rectifier hidden layers and an identity output,
//! plus exact reverse-mode gradients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::standard_normal;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One dense layer: row-major `out x in` weights plus a bias per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Layer {
    rows: usize,
    cols: usize,
    weights: Vec<f64>,
    biases: Vec<f64>,
    activation: Activation,
}

impl Layer {
    fn forward(&self, input: &[f64], pre: &mut Vec<f64>, post: &mut Vec<f64>) {
        pre.clear();
        post.clear();
        for r in 0..self.rows {
            let row = &self.weights[r * self.cols..(r + 1) * self.cols];
            let mut acc = self.biases[r];
            for (w, x) in row.iter().zip(input) {
                acc += w * x;
            }
            pre.push(acc);
            post.push(self.activation.apply(acc));
        }
    }
}

/// The full network. Hidden layers use the rectifier, the output layer is
/// linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    layers: Vec<Layer>,
}

impl Mlp {
    /// He-style seeded initialization: weights scaled by sqrt(2 / fan_in),
    /// biases zero.
    pub fn new(sizes: &[usize], seed_value: u64) -> Result<Self> {
        Self::build(sizes, |rng, fan_in| standard_normal(rng) * (2.0 / fan_in as f64).sqrt(), seed_value)
    }

    /// All parameters zero (useful for tests and fixed points).
    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        Self::build(sizes, |_, _| 0.0, 0)
    }

    fn build(
        sizes: &[usize],
        mut init: impl FnMut(&mut seed::Rng, usize) -> f64,
        seed_value: u64,
    ) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Shape("a network needs at least an input size".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Shape("zero-width layer".into()));
        }
        let mut rng = seed::rng(seed_value, "mlp/init");
        let n_layers = sizes.len() - 1;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (cols, rows) = (sizes[l], sizes[l + 1]);
            let activation = if l + 1 == n_layers { Activation::Identity } else { Activation::Relu };
            let weights = (0..rows * cols).map(|_| init(&mut rng, cols)).collect();
            layers.push(Layer { rows, cols, weights, biases: vec![0.0; rows], activation });
        }
        Ok(Self { sizes: sizes.to_vec(), layers })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Plain inference.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.output().to_vec())
    }

    /// Forward pass that caches the per-layer pre-activations needed by
    /// `backward`.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_size() {
            return Err(Error::Shape(format!(
                "input length {} does not match first layer size {}",
                input.len(),
                self.input_size()
            )));
        }
        let mut pres = Vec::with_capacity(self.layers.len());
        let mut posts = Vec::with_capacity(self.layers.len());
        let mut current: Vec<f64> = input.to_vec();
        for layer in &self.layers {
            let mut pre = Vec::new();
            let mut post = Vec::new();
            layer.forward(&current, &mut pre, &mut post);
            current = post.clone();
            pres.push(pre);
            posts.push(post);
        }
        if current.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite activation".into()));
        }
        Ok(Trace { input: input.to_vec(), pres, posts, sizes: self.sizes.clone() })
    }

    /// Exact reverse-mode gradients of a scalar loss with respect to every
    /// parameter, given the loss gradient at the network output.
    #[allow(clippy::needless_range_loop)]
    pub fn backward(&self, trace: &Trace, output_grad: &[f64]) -> Result<GradientTape> {
        if trace.sizes != self.sizes {
            return Err(Error::Lifecycle(
                "trace does not belong to this network (shape mismatch)".into(),
            ));
        }
        if output_grad.len() != self.output_size() {
            return Err(Error::Shape("output gradient length mismatch".into()));
        }
        let mut tape = GradientTape::zeros_like(self);
        // delta starts as dL/d(post) of the last layer.
        let mut delta: Vec<f64> = output_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &trace.pres[l];
            // dL/d(pre) = dL/d(post) * act'(pre)
            for (d, p) in delta.iter_mut().zip(pre) {
                *d *= layer.activation.derivative(*p);
            }
            let below: &[f64] = if l == 0 { &trace.input } else { &trace.posts[l - 1] };
            let (dw, db) = (&mut tape.weights[l], &mut tape.biases[l]);
            for r in 0..layer.rows {
                db[r] += delta[r];
                let row = &mut dw[r * layer.cols..(r + 1) * layer.cols];
                for (slot, x) in row.iter_mut().zip(below) {
                    *slot += delta[r] * x;
                }
            }
            if l > 0 {
                let mut next = vec![0.0; layer.cols];
                for r in 0..layer.rows {
                    let row = &layer.weights[r * layer.cols..(r + 1) * layer.cols];
                    for (n, w) in next.iter_mut().zip(row) {
                        *n += delta[r] * w;
                    }
                }
                delta = next;
            }
        }
        Ok(tape)
    }

    /// Iterate over all parameters mutably (weights before biases per layer).
    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.biases.iter()))
    }

    pub(crate) fn layer_data(&self) -> Vec<(Vec<f64>, Vec<f64>, Activation)> {
        self.layers
            .iter()
            .map(|l| (l.weights.clone(), l.biases.clone(), l.activation))
            .collect()
    }

    pub(crate) fn from_layer_data(
        sizes: Vec<usize>,
        data: Vec<(Vec<f64>, Vec<f64>, Activation)>,
    ) -> Result<Self> {
        if sizes.len() != data.len() + 1 {
            return Err(Error::Shape("layer count does not match sizes".into()));
        }
        let mut layers = Vec::with_capacity(data.len());
        for (l, (weights, biases, activation)) in data.into_iter().enumerate() {
            let (cols, rows) = (sizes[l], sizes[l + 1]);
            if weights.len() != rows * cols || biases.len() != rows {
                return Err(Error::Shape(format!("layer {l} parameter shape mismatch")));
            }
            layers.push(Layer { rows, cols, weights, biases, activation });
        }
        Ok(Self { sizes, layers })
    }

    /// Overwrite a single parameter by flat index (test support for the
    /// finite-difference check).
    pub fn nudge_param(&mut self, index: usize, delta: f64) {
        let slot = self.params_mut().nth(index).expect("parameter index in range");
        *slot += delta;
    }
}

/// Cached activations from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    input: Vec<f64>,
    pres: Vec<Vec<f64>>,
    posts: Vec<Vec<f64>>,
    sizes: Vec<usize>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.posts.last().map(|v| v.as_slice()).unwrap_or(&self.input)
    }
}

/// Per-parameter partials of a scalar loss, same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientTape {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientTape {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn add(&mut self, other: &GradientTape) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.weights.iter_mut().chain(self.biases.iter_mut()) {
            for x in v.iter_mut() {
                *x *= factor;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values().all(|x| x.is_finite())
    }

    /// Flat iteration in the same order as `Mlp::params`.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| w.iter_mut().chain(b.iter_mut()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_net_maps_everything_to_zero() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        let out = net.forward(&[1.0, -2.0, 3.0]).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn identity_single_layer_returns_its_input() {
        // weights = I, bias = 0, identity output activation.
        let data = vec![(vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0], Activation::Identity)];
        let net = Mlp::from_layer_data(vec![2, 2], data).unwrap();
        let out = net.forward(&[0.3, -0.7]).unwrap();
        assert_eq!(out, vec![0.3, -0.7]);
    }

    #[test]
    fn hand_set_rectifier_arithmetic() {
        // One hidden unit: h = relu(2x - 1), out = 3h + 0.5.
        let data = vec![
            (vec![2.0], vec![-1.0], Activation::Relu),
            (vec![3.0], vec![0.5], Activation::Identity),
        ];
        let net = Mlp::from_layer_data(vec![1, 1, 1], data).unwrap();
        assert_eq!(net.forward(&[1.0]).unwrap(), vec![3.5]); // h = 1
        assert_eq!(net.forward(&[0.25]).unwrap(), vec![0.5]); // h clipped at 0
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let net = Mlp::zeros(&[3, 2]).unwrap();
        assert!(matches!(net.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn foreign_trace_is_a_lifecycle_error() {
        let a = Mlp::zeros(&[2, 2]).unwrap();
        let b = Mlp::zeros(&[3, 2]).unwrap();
        let trace = a.forward_trace(&[0.1, 0.2]).unwrap();
        assert!(matches!(b.backward(&trace, &[1.0, 0.0]), Err(Error::Lifecycle(_))));
    }

    #[test]
    fn linear_net_gradient_matches_closed_form() {
        // out = w x + b, loss = (out - y)^2 => dL/dw = 2 (w x + b - y) x.
        let data = vec![(vec![0.7], vec![0.2], Activation::Identity)];
        let net = Mlp::from_layer_data(vec![1, 1], data).unwrap();
        let (x, y) = (1.3, -0.4);
        let trace = net.forward_trace(&[x]).unwrap();
        let out = trace.output()[0];
        let tape = net.backward(&trace, &[2.0 * (out - y)]).unwrap();
        let expected_dw = 2.0 * (0.7 * x + 0.2 - y) * x;
        let expected_db = 2.0 * (0.7 * x + 0.2 - y);
        assert!((tape.weights[0][0] - expected_dw).abs() < 1e-12);
        assert!((tape.biases[0][0] - expected_db).abs() < 1e-12);
    }

    #[test]
    fn loss_independent_parameters_get_zero_gradient() {
        // Output 0 of a 2-output linear layer; parameters of output 1 are
        // untouched by a loss that only reads output 0.
        let data = vec![(vec![0.5, 0.5, 0.5, 0.5], vec![0.0, 0.0], Activation::Identity)];
        let net = Mlp::from_layer_data(vec![2, 2], data).unwrap();
        let trace = net.forward_trace(&[1.0, 2.0]).unwrap();
        let tape = net.backward(&trace, &[1.0, 0.0]).unwrap();
        assert_eq!(tape.weights[0][2], 0.0);
        assert_eq!(tape.weights[0][3], 0.0);
        assert_eq!(tape.biases[0][1], 0.0);
    }

    #[test]
    fn seeded_initialization_is_deterministic() {
        let a = Mlp::new(&[4, 8, 3], 99).unwrap();
        let b = Mlp::new(&[4, 8, 3], 99).unwrap();
        assert_eq!(a, b);
        let c = Mlp::new(&[4, 8, 3], 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn finite_inputs_stay_finite() {
        let net = Mlp::new(&[6, 32, 32, 4], 5).unwrap();
        let out = net.forward(&[1e6, -1e6, 0.0, 1.0, -1.0, 0.5]).unwrap();
        assert!(out.iter().all(|x| x.is_finite()));
    }
}
