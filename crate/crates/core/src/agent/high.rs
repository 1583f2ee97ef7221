//! The portfolio-weight policy.
//!
//! The network maps the flattened feature window plus current weights to one
//! logit per constituent; the softmax of those logits is the policy mean.
//! Training-time actions are Dirichlet draws centered on that mean with
//! concentration `kappa`, which gives the exact log-density the policy
//! gradient needs. Updates follow the entropy-augmented episodic policy
//! gradient with a batch-mean baseline.

use serde::{Deserialize, Serialize};

use crate::accounting::PortfolioWeights;
use crate::error::{Error, Result};
use crate::market::{FeatureWindow, FEATURES_PER_BAR};
use crate::nn::{AdamState, GradientTape, Mlp};
use crate::seed::Rng;

use super::dirichlet::Dirichlet;

/// What the policy sees at a decision point: the normalized feature window
/// and the current (post-drift) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct HighState {
    pub features: FeatureWindow,
    pub weights: PortfolioWeights,
}

impl HighState {
    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.features.as_slice().len() + self.weights.len());
        v.extend_from_slice(self.features.as_slice());
        v.extend_from_slice(self.weights.as_slice());
        v
    }
}

/// The new target weights for the next holding period.
pub type HighAction = PortfolioWeights;

/// Acting mode: sample during training, take the mean for backtests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    Sample,
    Deterministic,
}

/// Training hyperparameters for the weight policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighTrainConfig {
    pub gamma: f64,
    /// Entropy bonus coefficient.
    pub eta: f64,
    pub learning_rate: f64,
    /// Dirichlet concentration scale.
    pub kappa: f64,
    pub episodes: usize,
    pub batch_size: usize,
}

impl Default for HighTrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            eta: 0.05,
            learning_rate: 0.01,
            kappa: 50.0,
            episodes: 400,
            batch_size: 8,
        }
    }
}

impl HighTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must be in (0, 1]".into()));
        }
        if self.eta < 0.0 {
            return Err(Error::Config("eta must be >= 0".into()));
        }
        if self.kappa <= 0.0 {
            return Err(Error::Config("kappa must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// One recorded decision.
#[derive(Debug, Clone, PartialEq)]
pub struct HighStep {
    pub input: Vec<f64>,
    pub action: Vec<f64>,
    pub log_density: f64,
    pub reward: f64,
    pub entropy: f64,
}

/// One episode of decisions, in order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HighTrajectory {
    pub steps: Vec<HighStep>,
}

impl HighTrajectory {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    pub fn mean_entropy(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.entropy).sum::<f64>() / self.steps.len() as f64
    }
}

/// The weight policy: network plus the sampling concentration.
#[derive(Debug, Clone, PartialEq)]
pub struct HighPolicy {
    net: Mlp,
    pub kappa: f64,
    assets: usize,
    window: usize,
}

impl HighPolicy {
    /// Input layout: `assets * window * 5` features plus `assets + 1`
    /// current weights; output: one logit per constituent.
    pub fn new(assets: usize, window: usize, hidden: &[usize], kappa: f64, seed: u64) -> Result<Self> {
        let input = assets * window * FEATURES_PER_BAR + assets + 1;
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(assets + 1);
        Ok(Self { net: Mlp::new(&sizes, seed)?, kappa, assets, window })
    }

    pub fn from_net(net: Mlp, assets: usize, window: usize, kappa: f64) -> Result<Self> {
        let expected = assets * window * FEATURES_PER_BAR + assets + 1;
        if net.input_size() != expected || net.output_size() != assets + 1 {
            return Err(Error::Shape(format!(
                "network {}->{} does not fit {} assets with window {}",
                net.input_size(),
                net.output_size(),
                assets,
                window
            )));
        }
        Ok(Self { net, assets, window, kappa })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn logits(&self, input: &[f64]) -> Result<Vec<f64>> {
        let logits = self.net.forward(input)?;
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite policy logits".into()));
        }
        Ok(logits)
    }

    /// The deterministic policy output: softmax of the logits.
    pub fn policy_mean(&self, state: &HighState) -> Result<PortfolioWeights> {
        let mean = softmax(&self.logits(&state.flatten())?);
        PortfolioWeights::new(mean)
    }

    /// Act on a state: a Dirichlet draw around the mean in `Sample` mode, the
    /// mean itself in `Deterministic` mode. Returns the action and its exact
    /// log-density under the sampling distribution.
    pub fn act(
        &self,
        state: &HighState,
        mode: PolicyMode,
        rng: &mut Rng,
    ) -> Result<(HighAction, f64)> {
        let input = state.flatten();
        self.act_on_input(&input, mode, rng)
    }

    pub fn act_on_input(
        &self,
        input: &[f64],
        mode: PolicyMode,
        rng: &mut Rng,
    ) -> Result<(HighAction, f64)> {
        let mean = softmax(&self.logits(input)?);
        let dist = Dirichlet::new(mean.iter().map(|m| self.kappa * m).collect())?;
        match mode {
            PolicyMode::Sample => {
                let w = dist.sample(rng);
                let log_density = dist.log_pdf(&w);
                Ok((PortfolioWeights::new(normalize(w))?, log_density))
            }
            PolicyMode::Deterministic => {
                let log_density = dist.log_pdf(&mean);
                Ok((PortfolioWeights::new(mean)?, log_density))
            }
        }
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Renormalize a near-simplex vector exactly (guards sampler rounding).
fn normalize(w: Vec<f64>) -> Vec<f64> {
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Shannon entropy of a weight vector in nats, with 0 * ln 0 = 0.
pub fn entropy(weights: &PortfolioWeights) -> f64 {
    weights
        .as_slice()
        .iter()
        .map(|w| if *w > 0.0 { -w * w.ln() } else { 0.0 })
        .sum()
}

/// Entropy-augmented returns-to-go: G_t = sum_{j>=t} gamma^(j-t) (r_j + eta
/// H_j), computed by backward recursion.
pub fn returns_to_go(trajectory: &HighTrajectory, gamma: f64, eta: f64) -> Vec<f64> {
    let mut g = vec![0.0; trajectory.steps.len()];
    let mut acc = 0.0;
    for (i, step) in trajectory.steps.iter().enumerate().rev() {
        acc = step.reward + eta * step.entropy + gamma * acc;
        g[i] = acc;
    }
    g
}

/// Diagnostics from one policy-gradient update.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReinforceStats {
    pub mean_return: f64,
    pub mean_entropy: f64,
    pub grad_norm: f64,
    /// True when a non-finite gradient forced the update to be skipped.
    pub skipped: bool,
}

/// One policy-gradient step over a batch of trajectories: per-step gradient
/// `gamma^t * (G_t - baseline) * d log pi / d theta`, baseline the batch
/// mean of G, maximized via one Adam step on the negated objective.
pub fn reinforce_update(
    policy: &mut HighPolicy,
    adam: &mut AdamState,
    batch: &[HighTrajectory],
    config: &HighTrainConfig,
) -> Result<ReinforceStats> {
    config.validate()?;
    let mut stats = ReinforceStats::default();
    if batch.is_empty() {
        return Ok(stats);
    }
    let all_returns: Vec<Vec<f64>> =
        batch.iter().map(|t| returns_to_go(t, config.gamma, config.eta)).collect();
    let flat: Vec<f64> = all_returns.iter().flatten().cloned().collect();
    if flat.is_empty() {
        return Ok(stats);
    }
    let baseline = flat.iter().sum::<f64>() / flat.len() as f64;

    let mut tape = GradientTape::zeros_like(&policy.net);
    for (trajectory, returns) in batch.iter().zip(&all_returns) {
        let mut discount = 1.0;
        for (step, g) in trajectory.steps.iter().zip(returns) {
            let advantage = g - baseline;
            if advantage != 0.0 {
                let trace = policy.net.forward_trace(&step.input)?;
                let logits = trace.output();
                let mean = softmax(logits);
                let dist = Dirichlet::new(mean.iter().map(|m| policy.kappa * m).collect())?;
                let dlog_dalpha = dist.dlogpdf_dalpha(&step.action);
                // Chain through alpha = kappa * softmax(z):
                // dlog/dz_j = kappa * s_j * (g_j - sum_i g_i s_i).
                let weighted: f64 =
                    dlog_dalpha.iter().zip(&mean).map(|(g_i, s_i)| g_i * s_i).sum();
                let dlog_dz: Vec<f64> = dlog_dalpha
                    .iter()
                    .zip(&mean)
                    .map(|(g_j, s_j)| policy.kappa * s_j * (g_j - weighted))
                    .collect();
                // Minimized surrogate: -(discount * advantage) * log pi.
                let scale = -(discount * advantage);
                let out_grad: Vec<f64> = dlog_dz.iter().map(|d| scale * d).collect();
                tape.add(&policy.net.backward(&trace, &out_grad)?);
            }
            discount *= config.gamma;
        }
    }
    tape.scale(1.0 / batch.len() as f64);

    stats.mean_return = batch.iter().map(|t| t.total_reward()).sum::<f64>() / batch.len() as f64;
    stats.mean_entropy =
        batch.iter().map(|t| t.mean_entropy()).sum::<f64>() / batch.len() as f64;
    stats.grad_norm = tape.values().map(|g| g * g).sum::<f64>().sqrt();
    if !tape.is_finite() {
        stats.skipped = true;
        return Ok(stats);
    }
    adam.step(&mut policy.net, &tape, config.learning_rate)?;
    Ok(stats)
}
