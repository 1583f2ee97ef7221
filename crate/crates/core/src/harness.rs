//! Small, deterministic experiment harnesses shared by the test suites:
//! a stateless two-arm allocation bandit for the policy-gradient sanity
//! checks, a scripted-book execution task small enough to enumerate, and
//! the dominant-asset market sweep that exercises the entropy bonus
//! end-to-end. Production code does not depend on anything here.

use crate::accounting::PortfolioWeights;
use crate::agent::high::{
    reinforce_update, HighPolicy, HighTrainConfig, HighStep, HighTrajectory, PolicyMode,
};
use crate::agent::low::{to_limit_order, ActionGrid, LowAgent, LowTrainConfig};
use crate::error::Result;
use crate::exchange::{Direction, ExecutionEnv, ExecutionTask};
use crate::market::{LobLevel, LobSnapshot, SyntheticMarketConfig};
use crate::nn::AdamState;
use crate::seed;

/// Outcome of one bandit training run.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditOutcome {
    /// Policy-mean weight on the rewarded arm after training.
    pub weight_on_a: f64,
    /// Entropy of the terminal policy mean.
    pub terminal_entropy: f64,
}

/// A stateless two-arm bandit: cash (arm B, reward 0) versus one risky slot
/// (arm A, reward equal to its weight). One decision per episode.
///
/// The input layout matches a 1-asset, 1-day feature window so the policy is
/// exercised exactly as in the full engine.
pub fn bandit_trial(seed_root: u64, episodes: usize, eta: f64) -> Result<BanditOutcome> {
    let assets = 1;
    let window = 1;
    let config = HighTrainConfig {
        gamma: 1.0,
        eta,
        learning_rate: 0.05,
        kappa: 50.0,
        episodes,
        batch_size: 20,
    };
    let mut policy =
        HighPolicy::new(assets, window, &[16], config.kappa, seed::split(seed_root, "bandit/net"))?;
    let mut adam = AdamState::new(policy.net());
    let mut rng = seed::rng(seed_root, "bandit/episodes");

    // Constant state: flat features, all-cash weights.
    let input: Vec<f64> = {
        let mut v = vec![1.0; assets * window * 5];
        v.extend_from_slice(PortfolioWeights::all_cash(assets).as_slice());
        v
    };

    let updates = episodes / config.batch_size;
    for _ in 0..updates {
        let mut batch = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let (action, log_density) = policy.act_on_input(&input, PolicyMode::Sample, &mut rng)?;
            let reward = action.as_slice()[1];
            let entropy = crate::agent::high::entropy(&action);
            batch.push(HighTrajectory {
                steps: vec![HighStep {
                    input: input.clone(),
                    action: action.as_slice().to_vec(),
                    log_density,
                    reward,
                    entropy,
                }],
            });
        }
        reinforce_update(&mut policy, &mut adam, &batch, &config)?;
    }

    let mean = {
        let logits_input = input.clone();
        let (action, _) = policy.act_on_input(&logits_input, PolicyMode::Deterministic, &mut rng)?;
        action
    };
    Ok(BanditOutcome {
        weight_on_a: mean.as_slice()[1],
        terminal_entropy: crate::agent::high::entropy(&mean),
    })
}

/// Scripted three-step book for the enumerable execution task: flat at 10,
/// a one-step rally to 10.30 in the middle, then back. Selling into the
/// rally is clearly optimal.
pub fn toy_stream() -> Vec<LobSnapshot> {
    let mids = [10.0, 10.0, 10.0, 10.30, 10.0, 10.0, 10.0, 10.0];
    mids.iter()
        .enumerate()
        .map(|(i, mid)| LobSnapshot {
            step: i as u64,
            bids: vec![
                LobLevel { price: mid - 0.05, volume: 40.0 },
                LobLevel { price: mid - 0.10, volume: 40.0 },
                LobLevel { price: mid - 0.15, volume: 1000.0 },
            ],
            asks: vec![
                LobLevel { price: mid + 0.05, volume: 40.0 },
                LobLevel { price: mid + 0.10, volume: 40.0 },
                LobLevel { price: mid + 0.15, volume: 1000.0 },
            ],
        })
        .collect()
}

/// The toy task paired with [`toy_stream`]: sell 60 shares in 3 steps
/// starting at position 2, reference price 10.
pub fn toy_task() -> ExecutionTask {
    ExecutionTask {
        asset: "TOY".into(),
        direction: Direction::Sell,
        quantity: 60.0,
        window: 3,
        reference_price: 10.0,
    }
}

pub const TOY_GRID: fn() -> ActionGrid =
    || ActionGrid { price_offsets: vec![-1, 0, 1], quantity_props: vec![0.0, 0.5, 1.0] };
pub const TOY_TICK: f64 = 0.05;
pub const TOY_LOB_WINDOW: usize = 2;
pub const TOY_START: usize = 2;

/// Deterministic open-loop rollout of a fixed action sequence on the toy
/// task; returns the total episode reward.
pub fn toy_rollout(actions: &[(usize, usize)]) -> Result<f64> {
    let stream = toy_stream();
    let grid = TOY_GRID();
    let (mut env, mut state) =
        ExecutionEnv::new(toy_task(), &stream, TOY_START, TOY_LOB_WINDOW, 0.0)?;
    let mut total = 0.0;
    for action in actions {
        if env.is_done() {
            break;
        }
        let order = to_limit_order(*action, &state, env.current_snapshot(), &grid, TOY_TICK);
        let outcome = env.step(order)?;
        total += outcome.reward;
        state = outcome.state;
    }
    Ok(total)
}

/// Exhaustive enumeration of every open-loop action sequence on the toy
/// task; the optimum is the benchmark the trained policy must reach.
pub fn toy_enumerate_optimum() -> Result<f64> {
    let grid = TOY_GRID();
    let n = grid.n_price() * grid.n_qty();
    let window = toy_task().window;
    let mut best = f64::NEG_INFINITY;
    let total = n.pow(window as u32);
    for code in 0..total {
        let mut c = code;
        let mut actions = Vec::with_capacity(window);
        for _ in 0..window {
            let a = c % n;
            c /= n;
            actions.push((a / grid.n_qty(), a % grid.n_qty()));
        }
        best = best.max(toy_rollout(&actions)?);
    }
    Ok(best)
}

/// Train a fresh agent on the toy task; returns the greedy episode reward
/// after at most `max_steps` environment steps (with periodic early exit
/// once the target is met).
pub fn toy_train(seed_root: u64, max_steps: usize, target: f64) -> Result<f64> {
    let stream = toy_stream();
    let grid = TOY_GRID();
    let config = LowTrainConfig {
        gamma: 1.0,
        epsilon_start: 1.0,
        epsilon_end: 0.05,
        epsilon_decay_steps: max_steps / 3,
        batch_size: 32,
        target_sync_interval: 200,
        learning_rate: 2e-3,
        replay_capacity: 20_000,
        hidden: vec![32, 32],
    };
    let mut agent = LowAgent::new(
        LowAgent::input_size(TOY_LOB_WINDOW, 3),
        grid,
        TOY_TICK,
        config,
        seed::split(seed_root, "toy/net"),
    )?;
    let mut rng = seed::rng(seed_root, "toy/train");
    let mut best_greedy = f64::NEG_INFINITY;
    while agent.env_steps() < max_steps {
        let (mut env, _) = ExecutionEnv::new(toy_task(), &stream, TOY_START, TOY_LOB_WINDOW, 0.0)?;
        agent.train_episode(&mut env, &mut rng)?;
        if agent.env_steps() % 300 < 3 {
            let (mut eval_env, _) =
                ExecutionEnv::new(toy_task(), &stream, TOY_START, TOY_LOB_WINDOW, 0.0)?;
            let greedy = agent.greedy_episode(&mut eval_env)?;
            best_greedy = best_greedy.max(greedy);
            if best_greedy >= target {
                return Ok(best_greedy);
            }
        }
    }
    let (mut eval_env, _) = ExecutionEnv::new(toy_task(), &stream, TOY_START, TOY_LOB_WINDOW, 0.0)?;
    Ok(best_greedy.max(agent.greedy_episode(&mut eval_env)?))
}

/// Synthetic market with one clearly dominant asset, used by the entropy
/// sweep: asset 0 drifts strongly upward, the rest sit flat.
pub fn dominant_market_config(seed: u64, assets: usize) -> SyntheticMarketConfig {
    let mut drift = vec![0.0; assets];
    drift[0] = 0.012;
    SyntheticMarketConfig {
        assets,
        days: 36,
        steps_per_day: 8,
        seed,
        drift,
        volatility: vec![0.004],
        initial_price: vec![100.0],
        depth: 5,
        level_spacing: 1,
        tick: 0.05,
        base_level_volume: 2000.0,
    }
}

/// Outcome of one dominant-asset training run.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Mean entropy of the deterministic policy's actions over one
    /// evaluation episode.
    pub terminal_entropy: f64,
    /// Mean weight placed on the dominant asset over the same episode.
    pub dominant_weight: f64,
}

/// Full small-scale pipeline on the dominant-asset market for one
/// (seed, eta) pair: quick pre-training, high-level training, then one
/// deterministic evaluation episode.
pub fn entropy_sweep_trial(seed_root: u64, eta: f64) -> Result<SweepOutcome> {
    use crate::agent::high::PolicyMode as _PM;
    use crate::training::{
        pretrain_low, run_episode, EpisodeConfig, ExecutionStyle, MarketData, PolicyStrategy,
        PretrainConfig,
    };

    let market_config = dominant_market_config(seed::split(seed_root, "sweep/market"), 3);
    let (bars, books) = crate::market::gen_synthetic_market(&market_config)?;
    let data = MarketData {
        bars,
        books,
        tick: market_config.tick,
        steps_per_day: market_config.steps_per_day,
    };
    let episode = EpisodeConfig {
        holding_days: 3,
        trading_days: 1,
        feature_window: 3,
        lob_window: 4,
        horizon: 6,
        t_window: 7,
        lambda: 0.002,
        initial_value: 10_000.0,
        bankruptcy_floor: 1e-3,
    };
    let pretrain = PretrainConfig {
        q_max: 60.0,
        t_max: 7,
        episodes_per_cell: 1,
        quantity_lattice_points: 5,
        cycles: 1,
        eval_episodes: 4,
        ..Default::default()
    };
    let low = LowTrainConfig {
        epsilon_decay_steps: 150,
        hidden: vec![32, 32],
        batch_size: 16,
        ..Default::default()
    };
    let grid = ActionGrid::default();
    let (bank, _) = pretrain_low(
        &data,
        &pretrain,
        &low,
        &grid,
        episode.lob_window,
        episode.lambda,
        seed::split(seed_root, "sweep/pretrain"),
        1,
    )?;
    let high = HighTrainConfig {
        gamma: 0.99,
        eta,
        learning_rate: 0.006,
        kappa: 30.0,
        episodes: 1600,
        batch_size: 8,
    };
    let result = crate::training::train_high(
        &data,
        &bank,
        &episode,
        &high,
        &[32, 32],
        seed::split(seed_root, "sweep/high"),
    )?;
    let mut strategy =
        PolicyStrategy { policy: &result.final_policy, mode: _PM::Deterministic };
    let mut rng = seed::rng(seed_root, "sweep/eval");
    let eval =
        run_episode(&mut strategy, &ExecutionStyle::Banked(&bank), &data, &episode, &mut rng)?;
    let steps = eval.trajectory.steps.len().max(1) as f64;
    let terminal_entropy = eval.trajectory.mean_entropy();
    let dominant_weight =
        eval.trajectory.steps.iter().map(|s| s.action[1]).sum::<f64>() / steps;
    Ok(SweepOutcome { terminal_entropy, dominant_weight })
}

/// A deliberately thin book relative to typical order sizes: market orders
/// walk several levels, so slippage dwarfs the commission.
pub fn thin_book_market_config(seed: u64) -> SyntheticMarketConfig {
    SyntheticMarketConfig {
        assets: 2,
        days: 60,
        steps_per_day: 8,
        seed,
        drift: vec![0.0005],
        volatility: vec![0.01],
        initial_price: vec![100.0],
        depth: 5,
        level_spacing: 2,
        tick: 0.10,
        base_level_volume: 40.0,
    }
}
