//! The period engine: drift over the holding span, one weight decision, the
//! trading-day execution dispatch (sells before buys, cash-feasibility
//! scaling), settlement, and daily equity marks. Hierarchical training and
//! every backtest strategy run through this one code path.

use serde::{Deserialize, Serialize};

use crate::accounting::{
    drift, high_reward, settle, target_quantities, trading_cost, AssetFills, PeriodLedger,
    PortfolioState, PortfolioWeights, PriceVector, SettleOutcome, TargetOrderSet,
};
use crate::agent::high::{entropy, HighPolicy, HighState, HighStep, HighTrajectory, PolicyMode};
use crate::error::{Error, Result};
use crate::exchange::{Direction, ExecutionEnv, ExecutionTask, FillLogRecord, LimitOrderAction};
use crate::market::{make_feature_window, BarSeries, FeatureWindow, LobSeries};
use crate::seed::Rng;

use super::bank::PolicyBank;

/// All market inputs for one run: aligned bar series and book streams, plus
/// the grid constants the execution side needs.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub bars: Vec<BarSeries>,
    pub books: Vec<LobSeries>,
    pub tick: f64,
    pub steps_per_day: usize,
}

impl MarketData {
    pub fn assets(&self) -> usize {
        self.bars.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.bars.iter().map(|s| s.asset.clone()).collect()
    }

    pub fn days(&self) -> usize {
        self.bars.iter().map(|s| s.len()).min().unwrap_or(0)
    }

    /// Closing prices (cash slot included) at a day.
    pub fn closes(&self, day: u32) -> Result<PriceVector> {
        let mut prices = Vec::with_capacity(self.bars.len());
        for s in &self.bars {
            let bar = s
                .bar_at(day)
                .ok_or_else(|| Error::Data(format!("{}: no bar at day {day}", s.asset)))?;
            prices.push(bar.close);
        }
        PriceVector::from_assets(&prices)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bars.is_empty() {
            return Err(Error::Data("no bar series".into()));
        }
        if self.bars.len() != self.books.len() {
            return Err(Error::Data("bar and book series counts differ".into()));
        }
        if self.tick <= 0.0 || self.steps_per_day < 2 {
            return Err(Error::Data("tick and steps_per_day must be positive".into()));
        }
        for (bars, books) in self.bars.iter().zip(&self.books) {
            if bars.first_day() != 0 {
                return Err(Error::Data(format!("{}: bars must start at day 0", bars.asset)));
            }
            if books.snapshots()[0].step != 0 {
                return Err(Error::Data(format!("{}: books must start at step 0", books.asset)));
            }
            let expected = bars.len() * self.steps_per_day;
            if books.len() < expected {
                return Err(Error::Data(format!(
                    "{}: {} snapshots but {} days x {} steps expected",
                    bars.asset,
                    books.len(),
                    bars.len(),
                    self.steps_per_day
                )));
            }
        }
        Ok(())
    }
}

/// Period structure and cost constants for one episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub holding_days: usize,
    pub trading_days: usize,
    /// High-level feature window in days.
    pub feature_window: usize,
    /// Low-level book window in steps.
    pub lob_window: usize,
    /// Number of holding+trading periods per episode.
    pub horizon: usize,
    /// Low-level steps per execution task; 0 means steps_per_day - 1.
    pub t_window: usize,
    /// Commission rate.
    pub lambda: f64,
    pub initial_value: f64,
    /// Terminal value floor applied when an episode goes bankrupt.
    pub bankruptcy_floor: f64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            holding_days: 5,
            trading_days: 1,
            feature_window: 10,
            lob_window: 10,
            horizon: 10,
            t_window: 0,
            lambda: 0.002,
            initial_value: 100_000.0,
            bankruptcy_floor: 1e-3,
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self, data: &MarketData) -> Result<()> {
        if self.holding_days < 1 || self.trading_days < 1 || self.horizon < 1 {
            return Err(Error::Config("periods and horizon must be >= 1".into()));
        }
        if self.feature_window < 1 || self.lob_window < 1 {
            return Err(Error::Config("windows must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::Config("lambda must be in [0, 1)".into()));
        }
        if self.initial_value <= 0.0 {
            return Err(Error::Config("initial value must be positive".into()));
        }
        let t_window = self.t_window_for(data);
        if t_window + 1 > data.steps_per_day * self.trading_days {
            return Err(Error::Config(format!(
                "t_window {} does not fit {} trading day(s) of {} steps",
                t_window, self.trading_days, data.steps_per_day
            )));
        }
        if self.lob_window > data.steps_per_day {
            return Err(Error::Config("lob_window must not exceed steps_per_day".into()));
        }
        let needed = required_days(self);
        if data.days() < needed {
            return Err(Error::Config(format!(
                "horizon {} needs {} days of data, have {}",
                self.horizon,
                needed,
                data.days()
            )));
        }
        Ok(())
    }

    pub fn t_window_for(&self, data: &MarketData) -> usize {
        if self.t_window == 0 {
            data.steps_per_day - 1
        } else {
            self.t_window
        }
    }
}

/// First holding day of period 0: late enough that the feature window exists
/// at the first decision day and a prior close exists for opening prices.
pub fn start_day(config: &EpisodeConfig) -> usize {
    let by_features = config.feature_window.saturating_sub(config.holding_days);
    by_features.max(1)
}

fn required_days(config: &EpisodeConfig) -> usize {
    start_day(config) + config.horizon * (config.holding_days + config.trading_days)
}

/// Largest horizon the data supports under `config`'s period structure.
pub fn max_horizon(data: &MarketData, config: &EpisodeConfig) -> usize {
    let span = config.holding_days + config.trading_days;
    data.days().saturating_sub(start_day(config)) / span
}

/// What a strategy sees at a decision point.
pub struct DecisionContext<'a> {
    pub period: usize,
    pub features: &'a FeatureWindow,
    /// Post-drift weights at the decision day.
    pub weights: &'a PortfolioWeights,
    /// Post-drift portfolio value.
    pub value: f64,
    /// Decision-day closing prices per period so far, including today's.
    pub close_history: &'a [PriceVector],
}

/// A strategy's answer: the target weights, and the log-density of the
/// decision when it was sampled from a distribution.
pub struct Decision {
    pub weights: PortfolioWeights,
    pub log_density: f64,
}

/// Anything that can steer the portfolio once per period.
pub trait WeightPolicy {
    fn decide(&mut self, ctx: &DecisionContext<'_>, rng: &mut Rng) -> Result<Decision>;
}

/// The learned policy as a strategy.
pub struct PolicyStrategy<'a> {
    pub policy: &'a HighPolicy,
    pub mode: PolicyMode,
}

impl WeightPolicy for PolicyStrategy<'_> {
    fn decide(&mut self, ctx: &DecisionContext<'_>, rng: &mut Rng) -> Result<Decision> {
        let state =
            HighState { features: ctx.features.clone(), weights: ctx.weights.clone() };
        let (weights, log_density) = self.policy.act(&state, self.mode, rng)?;
        Ok(Decision { weights, log_density })
    }
}

/// Always rebalance to the same target.
pub struct FixedWeights(pub PortfolioWeights);

impl WeightPolicy for FixedWeights {
    fn decide(&mut self, _ctx: &DecisionContext<'_>, _rng: &mut Rng) -> Result<Decision> {
        Ok(Decision { weights: self.0.clone(), log_density: 0.0 })
    }
}

/// Never trade: the target is whatever the drift produced.
pub struct HoldCurrent;

impl WeightPolicy for HoldCurrent {
    fn decide(&mut self, ctx: &DecisionContext<'_>, _rng: &mut Rng) -> Result<Decision> {
        Ok(Decision { weights: ctx.weights.clone(), log_density: 0.0 })
    }
}

/// Buy-and-hold proxy for a market index: uniform over the risky assets at
/// the first decision, untouched afterwards.
pub struct IndexProxy {
    started: bool,
}

impl IndexProxy {
    pub fn new() -> Self {
        Self { started: false }
    }
}

impl Default for IndexProxy {
    fn default() -> Self {
        Self::new()
    }
}

impl WeightPolicy for IndexProxy {
    fn decide(&mut self, ctx: &DecisionContext<'_>, _rng: &mut Rng) -> Result<Decision> {
        if self.started {
            return Ok(Decision { weights: ctx.weights.clone(), log_density: 0.0 });
        }
        self.started = true;
        let m = ctx.weights.assets();
        let mut w = vec![1.0 / m as f64; m + 1];
        w[0] = 0.0;
        Ok(Decision { weights: PortfolioWeights::new(w)?, log_density: 0.0 })
    }
}

/// How execution tasks are worked off during the trading period.
pub enum ExecutionStyle<'a> {
    /// Fill everything at the decision-day close; only commission applies.
    Ideal,
    /// Cross the book for all remaining quantity every step.
    MarketOrder,
    /// Greedy rollouts of the frozen banked policies.
    Banked(&'a PolicyBank),
}

impl ExecutionStyle<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            ExecutionStyle::Ideal => "ideal",
            ExecutionStyle::MarketOrder => "market-order",
            ExecutionStyle::Banked(_) => "simulated",
        }
    }
}

/// Per-task audit record: how many environment steps the execution of one
/// asset's task took in one period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecAudit {
    pub period: usize,
    pub asset: String,
    pub direction: Direction,
    pub env_steps: usize,
    pub fill_log: Vec<FillLogRecord>,
}

/// Everything one episode produces.
#[derive(Debug, Clone)]
pub struct EpisodeResult {
    pub trajectory: HighTrajectory,
    pub ledgers: Vec<PeriodLedger>,
    /// Daily `(day, value)` marks from the day before the first period to
    /// the last settlement.
    pub curve: Vec<(u32, f64)>,
    pub final_value: f64,
    pub bankrupt: bool,
    pub audits: Vec<ExecAudit>,
}

/// Run one full episode of `config.horizon` periods (or until bankruptcy).
/// Rewards recorded in the trajectory are scaled by the initial value.
pub fn run_episode(
    strategy: &mut dyn WeightPolicy,
    execution: &ExecutionStyle<'_>,
    data: &MarketData,
    config: &EpisodeConfig,
    rng: &mut Rng,
) -> Result<EpisodeResult> {
    data.validate()?;
    config.validate(data)?;
    let start = start_day(config);
    let span = config.holding_days + config.trading_days;
    let t_window = config.t_window_for(data);

    let mut state = PortfolioState::new(
        PortfolioWeights::all_cash(data.assets()),
        config.initial_value,
        data.closes((start - 1) as u32)?,
        0,
    )?;
    let mut result = EpisodeResult {
        trajectory: HighTrajectory::default(),
        ledgers: Vec::with_capacity(config.horizon),
        curve: vec![((start - 1) as u32, state.value)],
        final_value: state.value,
        bankrupt: false,
        audits: Vec::new(),
    };
    let mut close_history: Vec<PriceVector> = Vec::with_capacity(config.horizon);

    for period in 0..config.horizon {
        let period_start = start + period * span;
        let decision_day = (period_start + config.holding_days - 1) as u32;
        let settle_day = decision_day + config.trading_days as u32;

        // Mark the holding days to their closes.
        for day in period_start as u32..=decision_day {
            let marks = data.closes(day)?;
            let (v_mark, _) = drift(&state, &marks)?;
            result.curve.push((day, v_mark));
        }

        let decision_closes = data.closes(decision_day)?;
        let (value_drifted, weights_drifted) = drift(&state, &decision_closes)?;
        close_history.push(decision_closes.clone());

        let features = make_feature_window(&data.bars, decision_day, config.feature_window)?;
        let ctx = DecisionContext {
            period,
            features: &features,
            weights: &weights_drifted,
            value: value_drifted,
            close_history: &close_history,
        };
        let decision = strategy.decide(&ctx, rng)?;
        let action_entropy = entropy(&decision.weights);

        let orders =
            target_quantities(value_drifted, &weights_drifted, &decision.weights, &decision_closes)?;
        let next_prices = data.closes(settle_day)?;
        let (mut fills, mut audits) = execute_targets(
            &orders,
            data,
            (decision_day + 1) as usize,
            t_window,
            config.lob_window,
            config.lambda,
            execution,
            &next_prices,
            period,
        )?;
        let scaled = enforce_cash_feasibility(&mut fills, &state, config.lambda);
        result.audits.append(&mut audits);

        let cost = trading_cost(&fills, config.lambda);
        let outcome = settle(&state, &fills, &next_prices, config.lambda)?;
        let (value_after, next_state) = match outcome {
            SettleOutcome::Next(next) => (next.value, Some(next)),
            SettleOutcome::Bankrupt { value } => (value.max(config.bankruptcy_floor), None),
        };

        let reward = high_reward(state.value, value_after) / config.initial_value;
        result.trajectory.steps.push(HighStep {
            input: HighState { features, weights: weights_drifted.clone() }.flatten(),
            action: decision.weights.as_slice().to_vec(),
            log_density: decision.log_density,
            reward,
            entropy: action_entropy,
        });
        result.ledgers.push(PeriodLedger {
            t: period,
            v_before: state.value,
            v_after: value_after,
            c_com: cost.commission,
            c_slippage: cost.slippage,
            weights: next_state
                .as_ref()
                .map(|s| s.weights.as_slice().to_vec())
                .unwrap_or_default(),
            buys_scaled: scaled,
        });
        result.curve.push((settle_day, value_after));
        result.final_value = value_after;

        match next_state {
            Some(next) => state = next,
            None => {
                result.bankrupt = true;
                break;
            }
        }
    }
    Ok(result)
}

/// Work off one period's orders: sells first so proceeds fund the buys, then
/// buys, each through the selected execution style.
#[allow(clippy::too_many_arguments)]
fn execute_targets(
    orders: &TargetOrderSet,
    data: &MarketData,
    trading_day: usize,
    t_window: usize,
    lob_window: usize,
    lambda: f64,
    execution: &ExecutionStyle<'_>,
    next_prices: &PriceVector,
    period: usize,
) -> Result<(Vec<AssetFills>, Vec<ExecAudit>)> {
    let mut fills = Vec::new();
    let mut audits = Vec::new();
    let sells = orders.shares.iter().enumerate().filter(|(_, q)| **q < 0.0);
    let buys = orders.shares.iter().enumerate().filter(|(_, q)| **q > 0.0);
    for (asset, signed) in sells.chain(buys) {
        let direction = if *signed > 0.0 { Direction::Buy } else { Direction::Sell };
        let quantity = signed.abs();
        let reference_price = next_prices.asset(asset);
        match execution {
            ExecutionStyle::Ideal => {
                let price = orders.prices[asset];
                fills.push(AssetFills {
                    asset,
                    direction,
                    reference_price,
                    step_fills: vec![crate::exchange::FillReport {
                        executed: quantity,
                        avg_price: Some(price),
                        fills: vec![(price, quantity)],
                        exhausted_depth: false,
                    }],
                });
            }
            style => {
                let task = ExecutionTask {
                    asset: data.bars[asset].asset.clone(),
                    direction,
                    quantity,
                    window: t_window,
                    reference_price,
                };
                let stream = data.books[asset].snapshots();
                let start_pos = trading_day * data.steps_per_day;
                let (mut env, _) = ExecutionEnv::new(task, stream, start_pos, lob_window, lambda)?;
                match style {
                    ExecutionStyle::MarketOrder => run_market_order_policy(&mut env)?,
                    ExecutionStyle::Banked(bank) => {
                        let frozen = bank.get(&data.bars[asset].asset, direction)?;
                        frozen.run_greedy(&mut env)?;
                    }
                    ExecutionStyle::Ideal => unreachable!(),
                }
                audits.push(ExecAudit {
                    period,
                    asset: data.bars[asset].asset.clone(),
                    direction,
                    env_steps: env.fill_log().iter().map(|r| r.step).max().map_or(0, |s| s + 1),
                    fill_log: env.fill_log().to_vec(),
                });
                fills.push(AssetFills {
                    asset,
                    direction,
                    reference_price,
                    step_fills: env.step_fills().to_vec(),
                });
            }
        }
    }
    Ok((fills, audits))
}

/// Submit the full remaining quantity at a price crossing every visible
/// level, every step, until done.
fn run_market_order_policy(env: &mut ExecutionEnv<'_>) -> Result<()> {
    while !env.is_done() {
        let private = env.private();
        if private.remaining_qty == 0.0 {
            env.step(LimitOrderAction::skip())?;
            continue;
        }
        let snap = env.current_snapshot();
        let price = match private.direction {
            Direction::Buy => snap.asks.last().map(|l| l.price).unwrap_or(snap.best_ask()),
            Direction::Sell => snap.bids.last().map(|l| l.price).unwrap_or(snap.best_bid()),
        };
        env.step(LimitOrderAction {
            price,
            signed_qty: private.direction.sign() * private.remaining_qty,
        })?;
    }
    Ok(())
}

/// If the period's buys cost more cash than sells and holdings free up,
/// scale every buy fill down pro rata; returns the factor when it fired.
fn enforce_cash_feasibility(
    fills: &mut [AssetFills],
    state: &PortfolioState,
    lambda: f64,
) -> Option<f64> {
    let mut available = state.value * state.weights.cash();
    let mut buy_need = 0.0;
    for af in fills.iter() {
        let notional = af.notional();
        match af.direction {
            Direction::Sell => available += notional - lambda * notional,
            Direction::Buy => buy_need += notional + lambda * notional,
        }
    }
    if buy_need <= available || buy_need == 0.0 {
        return None;
    }
    let factor = (available / buy_need).max(0.0);
    for af in fills.iter_mut() {
        if af.direction == Direction::Buy {
            for report in af.step_fills.iter_mut() {
                for (_, qty) in report.fills.iter_mut() {
                    *qty *= factor;
                }
                let executed: f64 = report.fills.iter().map(|(_, q)| q).sum();
                let notional: f64 = report.fills.iter().map(|(p, q)| p * q).sum();
                report.executed = executed;
                report.avg_price = if executed > 0.0 { Some(notional / executed) } else { None };
            }
        }
    }
    Some(factor)
}
