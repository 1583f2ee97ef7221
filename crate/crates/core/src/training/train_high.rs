//! High-level training: repeated hierarchical episodes through the frozen
//! bank, batched policy-gradient updates, and a best-evaluation checkpoint.

use serde::{Deserialize, Serialize};

use crate::agent::high::{reinforce_update, HighPolicy, HighTrainConfig, HighTrajectory, PolicyMode};
use crate::error::{Error, Result};
use crate::nn::AdamState;
use crate::seed;

use super::bank::PolicyBank;
use super::episode::{run_episode, EpisodeConfig, ExecutionStyle, MarketData, PolicyStrategy};

/// One logged epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainCurvePoint {
    pub epoch: usize,
    pub episodes_seen: usize,
    pub mean_return: f64,
    pub mean_entropy: f64,
    pub grad_norm: f64,
    /// Deterministic-policy return when this epoch ran an evaluation.
    pub eval_return: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainHighResult {
    /// Parameters at the best deterministic evaluation.
    pub best_policy: HighPolicy,
    /// Parameters at the end of training.
    pub final_policy: HighPolicy,
    pub curve: Vec<TrainCurvePoint>,
    pub best_eval_return: f64,
}

/// Deterministic-policy episode return (total trajectory reward, in units of
/// the initial value).
pub fn evaluate_policy(
    policy: &HighPolicy,
    bank: &PolicyBank,
    data: &MarketData,
    config: &EpisodeConfig,
    seed_root: u64,
) -> Result<f64> {
    let mut strategy = PolicyStrategy { policy, mode: PolicyMode::Deterministic };
    let mut rng = seed::rng(seed_root, "high/eval");
    let result =
        run_episode(&mut strategy, &ExecutionStyle::Banked(bank), data, config, &mut rng)?;
    Ok(result.trajectory.total_reward())
}

/// Train a weight policy on top of a frozen bank. The bank is read-only
/// throughout; episodes and updates all derive from `seed_root`.
pub fn train_high(
    data: &MarketData,
    bank: &PolicyBank,
    episode_config: &EpisodeConfig,
    train_config: &HighTrainConfig,
    hidden: &[usize],
    seed_root: u64,
) -> Result<TrainHighResult> {
    train_config.validate()?;
    bank.check_complete(&data.ids())?;
    let mut policy = HighPolicy::new(
        data.assets(),
        episode_config.feature_window,
        hidden,
        train_config.kappa,
        seed::split(seed_root, "high/net"),
    )?;
    let mut adam = AdamState::new(policy.net());

    let batch = train_config.batch_size;
    let epochs = train_config.episodes.div_ceil(batch).max(1);
    let eval_every = (epochs / 10).max(1);

    let mut curve = Vec::with_capacity(epochs);
    let mut best_policy = policy.clone();
    let mut best_eval = f64::NEG_INFINITY;
    let mut episodes_seen = 0;

    for epoch in 0..epochs {
        let mut batch_trajectories: Vec<HighTrajectory> = Vec::with_capacity(batch);
        for b in 0..batch {
            let mut rng = seed::rng(seed_root, &format!("high/episode/{}", epoch * batch + b));
            let mut strategy = PolicyStrategy { policy: &policy, mode: PolicyMode::Sample };
            let result = run_episode(
                &mut strategy,
                &ExecutionStyle::Banked(bank),
                data,
                episode_config,
                &mut rng,
            )?;
            batch_trajectories.push(result.trajectory);
            episodes_seen += 1;
        }
        let stats = reinforce_update(&mut policy, &mut adam, &batch_trajectories, train_config)?;
        if policy.net().params().any(|p| !p.is_finite()) {
            return Err(Error::Divergence(format!("non-finite policy parameters at epoch {epoch}")));
        }

        let eval_return = if epoch % eval_every == eval_every - 1 || epoch == epochs - 1 {
            let value = evaluate_policy(&policy, bank, data, episode_config, seed_root)?;
            if value > best_eval {
                best_eval = value;
                best_policy = policy.clone();
            }
            Some(value)
        } else {
            None
        };
        curve.push(TrainCurvePoint {
            epoch,
            episodes_seen,
            mean_return: stats.mean_return,
            mean_entropy: stats.mean_entropy,
            grad_norm: stats.grad_norm,
            eval_return,
        });
    }
    if best_eval == f64::NEG_INFINITY {
        best_policy = policy.clone();
        best_eval = evaluate_policy(&policy, bank, data, episode_config, seed_root)?;
    }
    Ok(TrainHighResult { best_policy, final_policy: policy, curve, best_eval_return: best_eval })
}
