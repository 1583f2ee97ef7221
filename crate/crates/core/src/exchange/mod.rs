//! The execution-level environment: an order-book matcher driven by a
//! snapshot stream, one limit order per step, one-step resting orders, and
//! forced market-order cleanup at the end of the window.

mod book;
mod env;

pub use book::{fill_cost, forced_liquidation, low_reward, match_limit_order, Direction, FillReport, LimitOrderAction, OrderBook};
pub use env::{ExecutionEnv, ExecutionPrivateState, ExecutionTask, FillLogRecord, LowState, StepOutcome};
