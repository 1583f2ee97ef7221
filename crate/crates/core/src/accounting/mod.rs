//! Portfolio accounting: simplex weights over cash plus risky assets, value
//! drift across a holding period, target share quantities for a rebalance,
//! trading-cost aggregation, and cost-adjusted settlement.
//!
//! Settlement is computed through the explicit cash/assets decomposition
//! (cash pays signed notional plus commission on unsigned notional; asset
//! values reprice held-plus-traded shares). The compact form — drift to the
//! new prices minus total trading cost — is exposed separately so the two
//! routes can be checked against each other.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{fill_cost, Direction, FillReport};

/// Weight tolerance for the simplex invariant.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Fractions of wealth per constituent; index 0 is cash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights(Vec<f64>);

impl PortfolioWeights {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(Error::Validation("weights need at least the cash entry".into()));
        }
        if w.iter().any(|x| !x.is_finite() || *x < -SIMPLEX_TOL) {
            return Err(Error::Validation(format!("negative or non-finite weight in {w:?}")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Validation(format!("weights sum to {sum}, expected 1")));
        }
        let w = w.into_iter().map(|x| x.max(0.0)).collect();
        Ok(Self(w))
    }

    /// Everything in cash.
    pub fn all_cash(assets: usize) -> Self {
        let mut w = vec![0.0; assets + 1];
        w[0] = 1.0;
        Self(w)
    }

    /// Uniform over cash and all assets.
    pub fn uniform(assets: usize) -> Self {
        Self(vec![1.0 / (assets + 1) as f64; assets + 1])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn cash(&self) -> f64 {
        self.0[0]
    }

    /// Number of risky assets (M).
    pub fn assets(&self) -> usize {
        self.0.len() - 1
    }
}

/// Prices per constituent; index 0 is cash, pinned at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceVector(Vec<f64>);

impl PriceVector {
    /// Build from risky-asset prices; the cash slot is added automatically.
    pub fn from_assets(prices: &[f64]) -> Result<Self> {
        let mut v = Vec::with_capacity(prices.len() + 1);
        v.push(1.0);
        for p in prices {
            if !p.is_finite() || *p <= 0.0 {
                return Err(Error::Validation(format!("non-positive price {p}")));
            }
            v.push(*p);
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Price of risky asset `i` (1-based slot `i`).
    pub fn asset(&self, i: usize) -> f64 {
        self.0[i + 1]
    }
}

/// Portfolio snapshot at the start of a holding period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub weights: PortfolioWeights,
    pub value: f64,
    pub prices: PriceVector,
    pub period: usize,
}

impl PortfolioState {
    pub fn new(weights: PortfolioWeights, value: f64, prices: PriceVector, period: usize) -> Result<Self> {
        if value <= 0.0 || !value.is_finite() {
            return Err(Error::Validation(format!("portfolio value must be positive, got {value}")));
        }
        if weights.len() != prices.len() {
            return Err(Error::Shape(format!(
                "weights ({}) and prices ({}) disagree",
                weights.len(),
                prices.len()
            )));
        }
        Ok(Self { weights, value, prices, period })
    }
}

/// Drift the portfolio across a holding period to closing prices: returns
/// the end-of-period value and weights.
///
/// Computed as a component sum (shares held times new price, cash first) —
/// the same association `settle` uses, so a zero-fill settlement at these
/// prices reproduces the drift bit for bit.
pub fn drift(state: &PortfolioState, closing: &PriceVector) -> Result<(f64, PortfolioWeights)> {
    if closing.len() != state.prices.len() {
        return Err(Error::Shape("price vector length mismatch".into()));
    }
    let w = state.weights.as_slice();
    let p = state.prices.as_slice();
    let q = closing.as_slice();
    let components: Vec<f64> = (0..w.len()).map(|i| state.value * w[i] / p[i] * q[i]).collect();
    let value: f64 = components.iter().sum();
    let weights = PortfolioWeights::new(components.iter().map(|c| c / value).collect())?;
    Ok((value, weights))
}

/// Signed target share quantities for moving from `current` to `target`
/// weights at value `value` and prices `closing` (buys positive). Cash has
/// no order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetOrderSet {
    /// Signed shares per risky asset (index 0 = asset 1).
    pub shares: Vec<f64>,
    /// The prices used to translate weight gaps into shares.
    pub prices: Vec<f64>,
}

impl TargetOrderSet {
    pub fn direction(&self, asset: usize) -> Option<Direction> {
        let q = self.shares[asset];
        if q > 0.0 {
            Some(Direction::Buy)
        } else if q < 0.0 {
            Some(Direction::Sell)
        } else {
            None
        }
    }
}

pub fn target_quantities(
    value: f64,
    current: &PortfolioWeights,
    target: &PortfolioWeights,
    closing: &PriceVector,
) -> Result<TargetOrderSet> {
    if current.len() != target.len() || current.len() != closing.len() {
        return Err(Error::Shape("weight/price lengths disagree".into()));
    }
    let m = current.assets();
    let mut shares = Vec::with_capacity(m);
    let mut prices = Vec::with_capacity(m);
    for i in 0..m {
        let gap = target.as_slice()[i + 1] - current.as_slice()[i + 1];
        let price = closing.asset(i);
        shares.push(value * gap / price);
        prices.push(price);
    }
    Ok(TargetOrderSet { shares, prices })
}

/// The executed side of one asset's rebalance: every per-step fill report
/// from its execution episode, in step order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetFills {
    /// Risky-asset index (0-based).
    pub asset: usize,
    pub direction: Direction,
    pub reference_price: f64,
    pub step_fills: Vec<FillReport>,
}

impl AssetFills {
    pub fn executed(&self) -> f64 {
        self.step_fills.iter().map(|f| f.executed).sum()
    }

    pub fn notional(&self) -> f64 {
        self.step_fills.iter().map(|f| f.notional()).sum()
    }
}

/// Commission, slippage, and their sum for one trading period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradingCostReport {
    pub commission: f64,
    pub slippage: f64,
    pub total: f64,
    /// `(asset, commission, slippage)` per traded asset.
    pub per_asset: Vec<(usize, f64, f64)>,
}

/// Aggregate the trading cost of a period from per-asset fills. Sums the
/// same per-step cost terms the execution reward negates.
pub fn trading_cost(fills: &[AssetFills], lambda: f64) -> TradingCostReport {
    let mut commission = 0.0;
    let mut slippage = 0.0;
    let mut per_asset = Vec::with_capacity(fills.len());
    for af in fills {
        let mut com_i = 0.0;
        let mut slip_i = 0.0;
        for f in &af.step_fills {
            let (c, s) = fill_cost(f, af.reference_price, lambda, af.direction);
            com_i += c;
            slip_i += s;
        }
        commission += com_i;
        slippage += slip_i;
        per_asset.push((af.asset, com_i, slip_i));
    }
    TradingCostReport { commission, slippage, total: commission + slippage, per_asset }
}

/// Result of settling a trading period.
#[derive(Debug, Clone, PartialEq)]
pub enum SettleOutcome {
    Next(PortfolioState),
    /// Value fell to or below zero; the episode must terminate.
    Bankrupt { value: f64 },
}

/// Settle a trading period through the cash/assets decomposition: cash pays
/// the signed executed notional plus commission on unsigned notional; each
/// asset's held-plus-traded shares are repriced at the new prices. New
/// weights are the component values over the new total.
pub fn settle(
    state: &PortfolioState,
    fills: &[AssetFills],
    next_prices: &PriceVector,
    lambda: f64,
) -> Result<SettleOutcome> {
    if next_prices.len() != state.prices.len() {
        return Err(Error::Shape("price vector length mismatch".into()));
    }
    let m = state.weights.assets();
    let w = state.weights.as_slice();
    let p = state.prices.as_slice();

    let mut signed_shares = vec![0.0; m];
    let mut cash = state.value * w[0];
    for af in fills {
        if af.asset >= m {
            return Err(Error::Shape(format!("fill for unknown asset {}", af.asset)));
        }
        let notional = af.notional();
        cash -= af.direction.sign() * notional;
        cash -= lambda * notional;
        signed_shares[af.asset] += af.direction.sign() * af.executed();
    }
    if cash < -SIMPLEX_TOL * state.value.max(1.0) {
        return Err(Error::InfeasibleRebalance(format!(
            "cash {cash} after settling buys (value {})",
            state.value
        )));
    }
    cash = cash.max(0.0);

    let mut components = Vec::with_capacity(m + 1);
    components.push(cash);
    for i in 0..m {
        let held = state.value * w[i + 1] / p[i + 1];
        let shares = held + signed_shares[i];
        components.push(shares * next_prices.asset(i));
    }
    let value: f64 = components.iter().sum();
    if value <= 0.0 {
        return Ok(SettleOutcome::Bankrupt { value });
    }
    let weights = PortfolioWeights::new(components.iter().map(|c| c.max(0.0) / value).collect())?;
    let next = PortfolioState::new(weights, value, next_prices.clone(), state.period + 1)?;
    Ok(SettleOutcome::Next(next))
}

/// The compact settlement route: drift the untouched portfolio to the new
/// prices and subtract the period's trading cost.
pub fn settle_compact_value(
    state: &PortfolioState,
    fills: &[AssetFills],
    next_prices: &PriceVector,
    lambda: f64,
) -> f64 {
    let w = state.weights.as_slice();
    let p = state.prices.as_slice();
    let q = next_prices.as_slice();
    let drifted: f64 = (0..w.len()).map(|i| state.value * w[i] * q[i] / p[i]).sum();
    drifted - trading_cost(fills, lambda).total
}

/// High-level reward: the change in portfolio value over the period.
pub fn high_reward(value_before: f64, value_after: f64) -> f64 {
    value_after - value_before
}

/// One JSONL ledger record per settled period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodLedger {
    pub t: usize,
    pub v_before: f64,
    pub v_after: f64,
    pub c_com: f64,
    pub c_slippage: f64,
    pub weights: Vec<f64>,
    /// Set when buy fills were scaled down to keep cash non-negative.
    #[serde(default)]
    pub buys_scaled: Option<f64>,
}
