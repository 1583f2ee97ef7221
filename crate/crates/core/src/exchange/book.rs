//! Price-priority matching against a snapshot book, forced liquidation, and
//! the execution reward. The cost fields computed here are the single source
//! shared with portfolio accounting, so the cumulative execution cost equals
//! the negated reward sum by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{LobLevel, LobSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    Buy,
    Sell,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Buy => 1.0,
            Direction::Sell => -1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Direction::Buy => "buy",
            Direction::Sell => "sell",
        }
    }
}

/// A limit order: target price and signed quantity (buy positive). A zero
/// quantity means "skip this step".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitOrderAction {
    pub price: f64,
    pub signed_qty: f64,
}

impl LimitOrderAction {
    pub fn skip() -> Self {
        Self { price: 0.0, signed_qty: 0.0 }
    }

    pub fn new(price: f64, signed_qty: f64) -> Result<Self> {
        if signed_qty != 0.0 && (!price.is_finite() || price <= 0.0) {
            return Err(Error::Validation(format!(
                "limit order with quantity {signed_qty} needs a positive price, got {price}"
            )));
        }
        if !signed_qty.is_finite() {
            return Err(Error::Validation("non-finite order quantity".into()));
        }
        Ok(Self { price, signed_qty })
    }

    pub fn direction(&self) -> Option<Direction> {
        if self.signed_qty > 0.0 {
            Some(Direction::Buy)
        } else if self.signed_qty < 0.0 {
            Some(Direction::Sell)
        } else {
            None
        }
    }

    pub fn qty(&self) -> f64 {
        self.signed_qty.abs()
    }
}

/// Result of matching one order (or one forced cleanup): the partial fills in
/// price-priority order, their total, and the volume-weighted average price.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FillReport {
    pub executed: f64,
    /// Volume-weighted average paid price; `None` when nothing executed.
    pub avg_price: Option<f64>,
    /// `(price, quantity)` partial fills, best price first.
    pub fills: Vec<(f64, f64)>,
    /// Set when forced liquidation ran out of book depth and priced the
    /// remainder at the worst quoted level.
    pub exhausted_depth: bool,
}

impl FillReport {
    pub fn empty() -> Self {
        Self::default()
    }

    fn from_fills(fills: Vec<(f64, f64)>, exhausted_depth: bool) -> Self {
        let executed: f64 = fills.iter().map(|(_, q)| q).sum();
        let notional: f64 = fills.iter().map(|(p, q)| p * q).sum();
        let avg_price = if executed > 0.0 { Some(notional / executed) } else { None };
        Self { executed, avg_price, fills, exhausted_depth }
    }

    /// Total paid notional, accumulated in fill order.
    pub fn notional(&self) -> f64 {
        self.fills.iter().map(|(p, q)| p * q).sum()
    }

    /// Concatenate another report's fills after this one's.
    pub fn merge(&mut self, other: &FillReport) {
        self.fills.extend_from_slice(&other.fills);
        self.exhausted_depth |= other.exhausted_depth;
        let executed: f64 = self.fills.iter().map(|(_, q)| q).sum();
        let notional: f64 = self.fills.iter().map(|(p, q)| p * q).sum();
        self.executed = executed;
        self.avg_price = if executed > 0.0 { Some(notional / executed) } else { None };
    }
}

/// An unfilled remainder resting in the book for exactly one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestingOrder {
    pub price: f64,
    pub signed_qty: f64,
}

/// A mutable working book built from one snapshot, plus the slot for the
/// agent's single resting order.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderBook {
    pub bids: Vec<LobLevel>,
    pub asks: Vec<LobLevel>,
    pub resting: Option<RestingOrder>,
}

impl OrderBook {
    pub fn from_snapshot(snap: &LobSnapshot) -> Self {
        Self { bids: snap.bids.clone(), asks: snap.asks.clone(), resting: None }
    }

    pub fn best_bid(&self) -> Option<f64> {
        self.bids.first().map(|l| l.price)
    }

    pub fn best_ask(&self) -> Option<f64> {
        self.asks.first().map(|l| l.price)
    }
}

/// Walk the opposing ladder in price priority, filling while the level price
/// crosses `limit`, consuming at most `qty` shares. Levels are consumed in
/// place; emptied levels are dropped.
fn walk_levels(levels: &mut Vec<LobLevel>, limit: f64, qty: f64, buy: bool) -> Vec<(f64, f64)> {
    let mut remaining = qty;
    let mut fills = Vec::new();
    let mut consumed = 0usize;
    for lv in levels.iter_mut() {
        if remaining <= 0.0 {
            break;
        }
        let crosses = if buy { lv.price <= limit } else { lv.price >= limit };
        if !crosses {
            break;
        }
        let take = remaining.min(lv.volume);
        if take > 0.0 {
            fills.push((lv.price, take));
            lv.volume -= take;
            remaining -= take;
        }
        if lv.volume <= 0.0 {
            consumed += 1;
        } else {
            break;
        }
    }
    levels.drain(..consumed);
    fills
}

/// Match a limit order against the book. Fills cross the opposing side best
/// price first; any unfilled remainder is left resting in the agent slot
/// (the environment cancels it after one step).
pub fn match_limit_order(book: &mut OrderBook, order: &LimitOrderAction) -> FillReport {
    let Some(direction) = order.direction() else {
        return FillReport::empty();
    };
    let fills = match direction {
        Direction::Buy => walk_levels(&mut book.asks, order.price, order.qty(), true),
        Direction::Sell => walk_levels(&mut book.bids, order.price, order.qty(), false),
    };
    let report = FillReport::from_fills(fills, false);
    let leftover = order.qty() - report.executed;
    book.resting = if leftover > 0.0 {
        Some(RestingOrder { price: order.price, signed_qty: direction.sign() * leftover })
    } else {
        None
    };
    report
}

/// Market-order cleanup: consume levels in priority order until `qty` is
/// filled. If the book runs out of depth, the remainder fills at the worst
/// quoted level's price and the report is flagged.
pub fn forced_liquidation(book: &mut OrderBook, qty: f64, direction: Direction) -> Result<FillReport> {
    if qty <= 0.0 {
        return Ok(FillReport::empty());
    }
    let levels = match direction {
        Direction::Buy => &mut book.asks,
        Direction::Sell => &mut book.bids,
    };
    if levels.is_empty() {
        return Err(Error::Liquidity(format!(
            "forced {} of {qty} shares against an empty book side",
            direction.label()
        )));
    }
    let worst = levels[levels.len() - 1].price;
    let limit = match direction {
        Direction::Buy => f64::INFINITY,
        Direction::Sell => 0.0,
    };
    let mut fills = walk_levels(levels, limit, qty, direction == Direction::Buy);
    let filled: f64 = fills.iter().map(|(_, q)| q).sum();
    let mut exhausted = false;
    if filled < qty {
        fills.push((worst, qty - filled));
        exhausted = true;
    }
    Ok(FillReport::from_fills(fills, exhausted))
}

/// Commission and slippage of one fill against the period-end reference
/// price: `(lambda * notional, sign * (notional - reference * executed))`.
/// This is the formula the execution reward negates, so accounting and
/// rewards cannot drift apart.
pub fn fill_cost(fill: &FillReport, reference: f64, lambda: f64, direction: Direction) -> (f64, f64) {
    if fill.executed == 0.0 {
        return (0.0, 0.0);
    }
    let notional = fill.notional();
    let commission = lambda * notional;
    let slippage = direction.sign() * (notional - reference * fill.executed);
    (commission, slippage)
}

/// Per-step execution reward: the negated trading cost of the step's fill.
/// Paying above the reference on a buy or selling below it are both negative;
/// a zero fill earns exactly zero.
pub fn low_reward(fill: &FillReport, reference: f64, lambda: f64, direction: Direction) -> f64 {
    let (commission, slippage) = fill_cost(fill, reference, lambda, direction);
    -(commission + slippage)
}
