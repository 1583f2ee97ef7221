//! Adaptive-moment gradient descent over an [`Mlp`]'s parameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::mlp::{GradientTape, Mlp};

/// First/second moment accumulators plus the step counter. One state per
/// optimized network; updates are deterministic given the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &Mlp) -> Self {
        Self::with_moments(net, 0.9, 0.999)
    }

    pub fn with_moments(net: &Mlp, beta1: f64, beta2: f64) -> Self {
        let n = net.param_count();
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0, beta1, beta2, epsilon: 1e-8 }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One descent step along `tape` at learning rate `lr`.
    pub fn step(&mut self, net: &mut Mlp, tape: &GradientTape, lr: f64) -> Result<()> {
        if tape.values().count() != self.m.len() {
            return Err(Error::Shape("gradient tape does not match optimizer state".into()));
        }
        self.step += 1;
        let b1t = 1.0 - self.beta1.powi(self.step as i32);
        let b2t = 1.0 - self.beta2.powi(self.step as i32);
        for ((param, grad), (m, v)) in net
            .params_mut()
            .zip(tape.values())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * grad;
            *v = self.beta2 * *v + (1.0 - self.beta2) * grad * grad;
            let m_hat = *m / b1t;
            let v_hat = *v / b2t;
            *param -= lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::Mlp;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut net = Mlp::new(&[2, 3, 1], 1).unwrap();
        let before: Vec<f64> = net.params().cloned().collect();
        let tape = GradientTape::zeros_like(&net);
        let mut adam = AdamState::new(&net);
        for _ in 0..5 {
            adam.step(&mut net, &tape, 0.01).unwrap();
        }
        for (a, b) in net.params().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_gradient_moves_parameters_against_its_sign() {
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        let mut tape = GradientTape::zeros_like(&net);
        for g in tape.values_mut() {
            *g = 0.5;
        }
        let mut adam = AdamState::new(&net);
        for _ in 0..10 {
            adam.step(&mut net, &tape, 0.01).unwrap();
        }
        for p in net.params() {
            assert!(*p < 0.0, "positive gradient should push the parameter down, got {p}");
        }
    }

    #[test]
    fn quadratic_loss_converges() {
        // out = w + b at input 1; minimize (out - 3)^2 from zero init.
        let mut net = Mlp::zeros(&[1, 1]).unwrap();
        let mut adam = AdamState::new(&net);
        let target = 3.0;
        let mut steps = 0;
        for _ in 0..2000 {
            let trace = net.forward_trace(&[1.0]).unwrap();
            let out = trace.output()[0];
            if (out - target).abs() < 1e-3 {
                break;
            }
            let tape = net.backward(&trace, &[2.0 * (out - target)]).unwrap();
            adam.step(&mut net, &tape, 0.01).unwrap();
            steps += 1;
        }
        let out = net.forward(&[1.0]).unwrap()[0];
        assert!((out - target).abs() < 1e-3, "after {steps} steps out = {out}");
    }

    #[test]
    fn updates_are_deterministic() {
        let run = || {
            let mut net = Mlp::new(&[2, 4, 1], 7).unwrap();
            let mut adam = AdamState::new(&net);
            for i in 0..50 {
                let x = [i as f64 * 0.1, 1.0 - i as f64 * 0.05];
                let trace = net.forward_trace(&x).unwrap();
                let out = trace.output()[0];
                let tape = net.backward(&trace, &[2.0 * (out - 1.0)]).unwrap();
                adam.step(&mut net, &tape, 0.005).unwrap();
            }
            net
        };
        assert_eq!(run(), run());
    }
}
