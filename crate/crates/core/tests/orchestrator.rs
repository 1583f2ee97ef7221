//! Integration tests for the period engine and the two-timescale training
//! loop: no-trade fixed points, a cash-ledger replay oracle over full
//! episodes, the event-log timescale audit, and frozen-bank purity.

// Oracles below stay in deliberately longhand indexed style.
#![allow(clippy::needless_range_loop)]

use hiertrade::accounting::PortfolioWeights;
use hiertrade::agent::high::HighTrainConfig;
use hiertrade::agent::low::{ActionGrid, LowTrainConfig};
use hiertrade::exchange::Direction;
use hiertrade::harness;
use hiertrade::market::{gen_synthetic_market, SyntheticMarketConfig};
use hiertrade::seed;
use hiertrade::training::{
    iterate_tasks, max_horizon, pretrain_low, run_episode, start_day, train_high, Decision,
    DecisionContext, EpisodeConfig, ExecutionStyle, FixedWeights, HoldCurrent, MarketData,
    PolicyBank, PretrainConfig, WeightPolicy,
};

fn market(seed: u64, assets: usize, days: usize) -> MarketData {
    let config = SyntheticMarketConfig {
        assets,
        days,
        steps_per_day: 8,
        seed,
        drift: vec![0.001],
        volatility: vec![0.015],
        ..Default::default()
    };
    let (bars, books) = gen_synthetic_market(&config).unwrap();
    MarketData { bars, books, tick: config.tick, steps_per_day: config.steps_per_day }
}

fn episode_config(horizon: usize) -> EpisodeConfig {
    EpisodeConfig {
        holding_days: 3,
        trading_days: 1,
        feature_window: 3,
        lob_window: 4,
        horizon,
        t_window: 7,
        lambda: 0.002,
        initial_value: 10_000.0,
        bankruptcy_floor: 1e-3,
    }
}

#[test]
fn hold_policy_never_trades_and_tracks_pure_drift() {
    let data = market(21, 2, 40);
    let config = episode_config(5);
    let mut strategy = HoldCurrent;
    let mut rng = seed::rng(1, "hold");
    let result =
        run_episode(&mut strategy, &ExecutionStyle::MarketOrder, &data, &config, &mut rng).unwrap();
    for ledger in &result.ledgers {
        assert_eq!(ledger.c_com, 0.0);
        assert_eq!(ledger.c_slippage, 0.0);
    }
    assert!(result.audits.is_empty(), "no execution tasks should have run");
    // All-cash start with no trades: the drift product is exactly 1.
    assert!((result.final_value - config.initial_value).abs() < 1e-9);
}

#[test]
fn all_cash_on_a_flat_market_is_a_fixed_point() {
    let config = SyntheticMarketConfig {
        assets: 2,
        days: 30,
        steps_per_day: 8,
        seed: 5,
        drift: vec![0.0],
        volatility: vec![0.0],
        ..Default::default()
    };
    let (bars, books) = gen_synthetic_market(&config).unwrap();
    let data = MarketData { bars, books, tick: config.tick, steps_per_day: config.steps_per_day };
    let mut strategy = FixedWeights(PortfolioWeights::all_cash(2));
    let mut rng = seed::rng(2, "cash");
    let result = run_episode(
        &mut strategy,
        &ExecutionStyle::MarketOrder,
        &data,
        &episode_config(4),
        &mut rng,
    )
    .unwrap();
    for step in &result.trajectory.steps {
        assert_eq!(step.reward, 0.0);
    }
    for (_, v) in &result.curve {
        assert!((v - 10_000.0).abs() < 1e-9);
    }
}

/// Cash-ledger oracle: replay every recorded fill into a flat cash+shares
/// ledger, charging commission on executed notional, and mark at each
/// period's settle close. Completely independent of the accounting module.
fn cash_ledger_replay(
    data: &MarketData,
    config: &EpisodeConfig,
    result: &hiertrade::training::EpisodeResult,
) -> f64 {
    let m = data.assets();
    let start = start_day(config);
    let span = config.holding_days + config.trading_days;
    let mut cash = config.initial_value;
    let mut shares = vec![0.0f64; m];
    let ids = data.ids();
    let mut final_value = config.initial_value;
    for (t, _ledger) in result.ledgers.iter().enumerate() {
        for audit in result.audits.iter().filter(|a| a.period == t) {
            let asset = ids.iter().position(|id| *id == audit.asset).unwrap();
            let sign = match audit.direction {
                Direction::Buy => 1.0,
                Direction::Sell => -1.0,
            };
            for record in &audit.fill_log {
                let notional = record.price * record.quantity;
                cash -= sign * notional;
                cash -= config.lambda * notional;
                shares[asset] += sign * record.quantity;
            }
        }
        let settle_day = (start + t * span + config.holding_days - 1 + config.trading_days) as u32;
        let mut value = cash;
        for i in 0..m {
            value += shares[i] * data.bars[i].bar_at(settle_day).unwrap().close;
        }
        final_value = value;
    }
    final_value
}

#[test]
fn episode_value_matches_the_cash_ledger_replay() {
    // A scripted two-asset strategy that actually trades both directions.
    struct Script;
    impl WeightPolicy for Script {
        fn decide(&mut self, ctx: &DecisionContext<'_>, _rng: &mut seed::Rng) -> hiertrade::Result<Decision> {
            let w = match ctx.period % 2 {
                0 => vec![0.2, 0.5, 0.3],
                _ => vec![0.5, 0.1, 0.4],
            };
            Ok(Decision { weights: PortfolioWeights::new(w)?, log_density: 0.0 })
        }
    }
    let data = market(33, 2, 40);
    let config = episode_config(2);
    let mut rng = seed::rng(3, "script");
    let result =
        run_episode(&mut Script, &ExecutionStyle::MarketOrder, &data, &config, &mut rng).unwrap();
    // The replay reads raw exchange fill logs, so it is only valid when no
    // cash-feasibility scaling touched the buys.
    assert!(result.ledgers.iter().all(|l| l.buys_scaled.is_none()));
    let replayed = cash_ledger_replay(&data, &config, &result);
    let settled = result.ledgers.last().unwrap().v_after;
    assert!(
        (settled - replayed).abs() <= 1e-8 * config.initial_value,
        "settled {settled} vs cash-ledger {replayed}"
    );
}

#[test]
fn longer_episodes_also_match_the_replay_oracle() {
    let data = market(57, 3, 60);
    let config = EpisodeConfig { horizon: 8, ..episode_config(8) };
    let mut strategy = hiertrade::eval::BaselineStrategy { kind: hiertrade::eval::BaselineKind::Ucrp };
    let mut rng = seed::rng(4, "ucrp-replay");
    let result =
        run_episode(&mut strategy, &ExecutionStyle::MarketOrder, &data, &config, &mut rng).unwrap();
    assert!(result.ledgers.iter().all(|l| l.buys_scaled.is_none()));
    let replayed = cash_ledger_replay(&data, &config, &result);
    let settled = result.ledgers.last().unwrap().v_after;
    assert!(
        (settled - replayed).abs() <= 1e-8 * config.initial_value,
        "settled {settled} vs cash-ledger {replayed}"
    );
}

#[test]
fn timescale_audit_one_decision_per_period_and_bounded_low_steps() {
    let data = market(71, 2, 40);
    let config = episode_config(5);
    let mut strategy = hiertrade::eval::BaselineStrategy { kind: hiertrade::eval::BaselineKind::Ucrp };
    let mut rng = seed::rng(5, "audit");
    let result =
        run_episode(&mut strategy, &ExecutionStyle::MarketOrder, &data, &config, &mut rng).unwrap();
    assert_eq!(result.trajectory.steps.len(), config.horizon, "one decision per period");
    for audit in &result.audits {
        assert!(
            audit.env_steps <= config.t_window,
            "{} period {}: {} low-level steps exceed the window {}",
            audit.asset,
            audit.period,
            audit.env_steps,
            config.t_window
        );
    }
    // Each (period, asset, direction) task appears at most once.
    let mut seen = std::collections::BTreeSet::new();
    for audit in &result.audits {
        assert!(seen.insert((audit.period, audit.asset.clone(), audit.direction)));
    }
}

fn quick_bank(data: &MarketData, seed_root: u64) -> PolicyBank {
    let pretrain = PretrainConfig {
        q_max: 60.0,
        t_max: 7,
        episodes_per_cell: 1,
        quantity_lattice_points: 3,
        cycles: 1,
        eval_episodes: 2,
        ..Default::default()
    };
    let low = LowTrainConfig { hidden: vec![16, 16], ..Default::default() };
    let (bank, _) = pretrain_low(
        data,
        &pretrain,
        &low,
        &ActionGrid::default(),
        4,
        0.002,
        seed_root,
        1,
    )
    .unwrap();
    bank
}

#[test]
fn bank_parameters_are_bit_identical_after_high_level_training() {
    let data = market(90, 2, 40);
    let bank = quick_bank(&data, 9);
    let before = format!("{bank:?}");
    let config = episode_config(4);
    let high = HighTrainConfig { episodes: 16, batch_size: 4, ..Default::default() };
    train_high(&data, &bank, &config, &high, &[16], 13).unwrap();
    assert_eq!(before, format!("{bank:?}"), "frozen bank must not change");
}

#[test]
fn zero_learning_rate_returns_the_initialized_policy() {
    let data = market(91, 2, 40);
    let bank = quick_bank(&data, 10);
    let config = episode_config(4);
    let high =
        HighTrainConfig { episodes: 8, batch_size: 4, learning_rate: 0.0, ..Default::default() };
    let result = train_high(&data, &bank, &config, &high, &[16], 14).unwrap();
    use hiertrade::agent::high::HighPolicy;
    let fresh = HighPolicy::new(
        data.assets(),
        config.feature_window,
        &[16],
        high.kappa,
        seed::split(14, "high/net"),
    )
    .unwrap();
    assert_eq!(result.final_policy.net(), fresh.net());
}

#[test]
fn incomplete_bank_is_reported_with_the_missing_pairs() {
    let data = market(92, 2, 40);
    let bank = PolicyBank::new();
    let config = episode_config(4);
    let high = HighTrainConfig { episodes: 4, batch_size: 2, ..Default::default() };
    let err = train_high(&data, &bank, &config, &high, &[16], 15).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("missing"));
    assert!(msg.contains("A00") && msg.contains("buy") && msg.contains("sell"));
}

#[test]
fn pretrained_banks_round_trip_and_are_seed_deterministic() {
    let data = market(93, 1, 40);
    let bank_a = quick_bank(&data, 77);
    let bank_b = quick_bank(&data, 77);
    assert_eq!(bank_a, bank_b, "same seed, same bank");
    let other = quick_bank(&data, 78);
    assert_ne!(bank_a, other, "different seed, different bank");

    let dir = std::env::temp_dir().join("hiertrade-bank-roundtrip");
    let _ = std::fs::remove_dir_all(&dir);
    bank_a.save(&dir).unwrap();
    let loaded = PolicyBank::load(&dir).unwrap();
    assert_eq!(bank_a, loaded, "bank files reload bit-identically");
}

#[test]
fn pretraining_is_identical_at_any_worker_count() {
    let data = market(95, 2, 40);
    let pretrain = PretrainConfig {
        q_max: 80.0,
        t_max: 6,
        episodes_per_cell: 1,
        quantity_lattice_points: 3,
        cycles: 1,
        eval_episodes: 2,
        ..Default::default()
    };
    let low = LowTrainConfig { hidden: vec![8], ..Default::default() };
    let run = |jobs| {
        pretrain_low(&data, &pretrain, &low, &ActionGrid::default(), 4, 0.002, 5, jobs).unwrap()
    };
    let (bank_serial, reports_serial) = run(1);
    let (bank_parallel, reports_parallel) = run(4);
    assert_eq!(bank_serial, bank_parallel);
    assert_eq!(reports_serial, reports_parallel);
}

#[test]
fn task_stream_respects_a_horizon_cap() {
    let data = market(94, 1, 40);
    let config = episode_config(1);
    let cap = max_horizon(&data, &config);
    assert!(cap >= 1);
    let too_long = EpisodeConfig { horizon: cap + 1, ..config };
    let mut strategy = HoldCurrent;
    let mut rng = seed::rng(6, "cap");
    assert!(run_episode(&mut strategy, &ExecutionStyle::Ideal, &data, &too_long, &mut rng).is_err());
}

#[test]
fn pretrain_grid_bound_to_episodes_stays_in_range() {
    let pretrain = PretrainConfig {
        q_max: 500.0,
        t_max: 4,
        episodes_per_cell: 1,
        quantity_lattice_points: 4,
        cycles: 2,
        ..Default::default()
    };
    let mut count = 0;
    for cell in iterate_tasks(&pretrain, seed::rng(8, "bounds")).take(32) {
        assert!(cell.quantity <= 500.0 && cell.window <= 4 && cell.window >= 1);
        count += 1;
    }
    assert_eq!(count, 32);
}

#[test]
fn training_return_improves_on_the_dominant_market() {
    // Stationary dominant-asset market: the smoothed training return over
    // the last window must not fall below the first window.
    let config = harness::dominant_market_config(411, 2);
    let (bars, books) = gen_synthetic_market(&config).unwrap();
    let data = MarketData { bars, books, tick: config.tick, steps_per_day: config.steps_per_day };
    let bank = quick_bank(&data, 30);
    let econfig = EpisodeConfig { horizon: 6, ..episode_config(6) };
    let high = HighTrainConfig {
        episodes: 600,
        batch_size: 8,
        learning_rate: 0.006,
        kappa: 30.0,
        eta: 0.0,
        ..Default::default()
    };
    let result = train_high(&data, &bank, &econfig, &high, &[32, 32], 31).unwrap();
    let returns: Vec<f64> = result.curve.iter().map(|p| p.mean_return).collect();
    // 50-episode smoothing windows at batch 8 span ~6 epochs.
    let window = 6.min(returns.len() / 2).max(1);
    let first: f64 = returns[..window].iter().sum::<f64>() / window as f64;
    let last: f64 = returns[returns.len() - window..].iter().sum::<f64>() / window as f64;
    assert!(
        last >= first,
        "smoothed training return fell: first {first:.5}, last {last:.5}"
    );
}
