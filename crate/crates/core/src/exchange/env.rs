//! The execution environment: one task, one snapshot stream, one limit order
//! per step.
//!
//! Step mechanics: the incoming order matches against the current snapshot;
//! the stream then advances, and any unfilled remainder gets a single
//! crossing check against the arriving snapshot before it is cancelled.
//! When the window closes with quantity still open, a forced market order
//! walks the arriving book and its cost lands in the final step's reward.
//! Book mutations never leak into later steps — every step starts from a
//! fresh stream snapshot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{make_lob_window, LobSnapshot, LobWindow};

use super::book::{
    forced_liquidation, low_reward, match_limit_order, Direction, FillReport, LimitOrderAction,
    OrderBook,
};

/// One rebalancing subtask: fill `quantity` shares within `window` steps,
/// with slippage measured against the period-end `reference_price`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTask {
    pub asset: String,
    pub direction: Direction,
    pub quantity: f64,
    pub window: usize,
    pub reference_price: f64,
}

impl ExecutionTask {
    pub fn validate(&self) -> Result<()> {
        if self.quantity < 0.0 || !self.quantity.is_finite() {
            return Err(Error::Validation("task quantity must be >= 0".into()));
        }
        if self.window < 1 {
            return Err(Error::Validation("task window must be >= 1".into()));
        }
        if self.reference_price <= 0.0 {
            return Err(Error::Validation("reference price must be positive".into()));
        }
        Ok(())
    }
}

/// What the agent privately knows: time left, quantity left, direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionPrivateState {
    pub remaining_steps: usize,
    pub remaining_qty: f64,
    pub direction: Direction,
}

/// Full low-level state: private progress plus the normalized book window.
#[derive(Debug, Clone, PartialEq)]
pub struct LowState {
    pub private: ExecutionPrivateState,
    pub market: LobWindow,
}

/// Everything `step` returns.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: LowState,
    pub reward: f64,
    pub done: bool,
    /// Fills from the submitted order (aggressive match plus the crossing
    /// check on the arriving snapshot).
    pub fill: FillReport,
    /// Forced cleanup at window end, when it ran.
    pub forced: Option<FillReport>,
}

/// One JSONL record per fill event, as emitted in per-episode logs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FillLogRecord {
    pub step: usize,
    pub price: f64,
    pub quantity: f64,
    pub reward: f64,
    pub forced: bool,
}

/// An isolated execution episode over a borrowed snapshot stream.
#[derive(Debug, Clone)]
pub struct ExecutionEnv<'a> {
    task: ExecutionTask,
    stream: &'a [LobSnapshot],
    lambda: f64,
    lob_window: usize,
    pos: usize,
    remaining_steps: usize,
    remaining_qty: f64,
    /// Left-to-right sum of reported fill quantities; the remainder is always
    /// recomputed as `quantity - executed_total` so that the episode's fill
    /// quantities telescope back to the task quantity exactly.
    executed_total: f64,
    step_index: usize,
    done: bool,
    fill_log: Vec<FillLogRecord>,
    step_fills: Vec<FillReport>,
}

impl<'a> ExecutionEnv<'a> {
    /// Start an episode. `start_pos` indexes the snapshot the first order
    /// will match against; the `lob_window` snapshots before it form the
    /// initial market state, and the stream must extend `window` snapshots
    /// past the start.
    pub fn new(
        task: ExecutionTask,
        stream: &'a [LobSnapshot],
        start_pos: usize,
        lob_window: usize,
        lambda: f64,
    ) -> Result<(Self, LowState)> {
        task.validate()?;
        if start_pos < lob_window {
            return Err(Error::Stream(format!(
                "need {lob_window} warm-up snapshots before position {start_pos}"
            )));
        }
        if start_pos + task.window >= stream.len() {
            return Err(Error::Stream(format!(
                "stream of {} snapshots too short for window {} from position {start_pos}",
                stream.len(),
                task.window
            )));
        }
        let env = Self {
            remaining_steps: task.window,
            remaining_qty: task.quantity,
            executed_total: 0.0,
            task,
            stream,
            lambda,
            lob_window,
            pos: start_pos,
            step_index: 0,
            done: false,
            fill_log: Vec::new(),
            step_fills: Vec::new(),
        };
        let state = env.state()?;
        Ok((env, state))
    }

    pub fn task(&self) -> &ExecutionTask {
        &self.task
    }

    pub fn private(&self) -> ExecutionPrivateState {
        ExecutionPrivateState {
            remaining_steps: self.remaining_steps,
            remaining_qty: self.remaining_qty,
            direction: self.task.direction,
        }
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// The snapshot the next submitted order will match against.
    pub fn current_snapshot(&self) -> &LobSnapshot {
        &self.stream[self.pos]
    }

    pub fn fill_log(&self) -> &[FillLogRecord] {
        &self.fill_log
    }

    /// Per-step fill reports accumulated so far (forced cleanup included as
    /// its own report); accounting consumes these.
    pub fn step_fills(&self) -> &[FillReport] {
        &self.step_fills
    }

    pub fn state(&self) -> Result<LowState> {
        Ok(LowState {
            private: self.private(),
            market: make_lob_window(self.stream, self.pos, self.lob_window)?,
        })
    }

    /// Submit one limit order and advance one step.
    pub fn step(&mut self, action: LimitOrderAction) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::Lifecycle("step called on a finished episode".into()));
        }
        if let Some(dir) = action.direction() {
            if dir != self.task.direction {
                return Err(Error::Validation(format!(
                    "order direction {} does not match task direction {}",
                    dir.label(),
                    self.task.direction.label()
                )));
            }
        }
        if action.qty() > self.remaining_qty {
            return Err(Error::Validation(format!(
                "order for {} exceeds remaining quantity {}",
                action.qty(),
                self.remaining_qty
            )));
        }

        let reference = self.task.reference_price;
        let direction = self.task.direction;

        // Aggressive match against the current snapshot.
        let mut book = OrderBook::from_snapshot(&self.stream[self.pos]);
        let mut fill = match_limit_order(&mut book, &action);
        let resting = book.resting.take();

        // The stream advances; the leftover gets one crossing check against
        // the arriving snapshot, then dies.
        self.pos += 1;
        let mut arriving = OrderBook::from_snapshot(&self.stream[self.pos]);
        if let Some(rest) = resting {
            let late = match_limit_order(
                &mut arriving,
                &LimitOrderAction { price: rest.price, signed_qty: rest.signed_qty },
            );
            arriving.resting = None;
            fill.merge(&late);
        }

        self.remaining_steps -= 1;
        if fill.executed > 0.0 {
            self.executed_total += fill.executed;
        }
        self.remaining_qty = (self.task.quantity - self.executed_total).max(0.0);

        let mut reward = low_reward(&fill, reference, self.lambda, direction);
        if fill.executed > 0.0 {
            self.log_fill(&fill, reward, false);
            self.step_fills.push(fill.clone());
        }

        // Forced cleanup when time runs out with quantity still open.
        let mut forced = None;
        if self.remaining_steps == 0 && self.remaining_qty > 0.0 {
            let cleanup = match forced_liquidation(&mut arriving, self.remaining_qty, direction) {
                Ok(fill) => fill,
                // Our own fills drained the arriving book this step; the
                // remainder prices at the snapshot's worst quoted level,
                // flagged as depth exhaustion.
                Err(Error::Liquidity(_)) => {
                    let snap = &self.stream[self.pos];
                    let worst = match direction {
                        Direction::Buy => snap.asks[snap.asks.len() - 1].price,
                        Direction::Sell => snap.bids[snap.bids.len() - 1].price,
                    };
                    FillReport {
                        executed: self.remaining_qty,
                        avg_price: Some(worst),
                        fills: vec![(worst, self.remaining_qty)],
                        exhausted_depth: true,
                    }
                }
                Err(e) => return Err(e),
            };
            let cleanup_reward = low_reward(&cleanup, reference, self.lambda, direction);
            reward += cleanup_reward;
            self.log_fill(&cleanup, cleanup_reward, true);
            self.step_fills.push(cleanup.clone());
            self.executed_total += cleanup.executed;
            self.remaining_qty = 0.0;
            forced = Some(cleanup);
        }

        self.done = self.remaining_steps == 0 || self.remaining_qty == 0.0;
        self.step_index += 1;
        Ok(StepOutcome { state: self.state()?, reward, done: self.done, fill, forced })
    }

    fn log_fill(&mut self, fill: &FillReport, reward: f64, forced: bool) {
        self.fill_log.push(FillLogRecord {
            step: self.step_index,
            price: fill.avg_price.unwrap_or(0.0),
            quantity: fill.executed,
            reward,
            forced,
        });
    }
}
