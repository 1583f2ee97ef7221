//! Evaluation: equity-curve metrics, classical rebalancing baselines, and
//! the backtest harness that runs every strategy through the same period
//! engine.

mod backtest;
mod baselines;
mod metrics;

pub use backtest::{comparison_table, render_table, run_backtest, BacktestOutput, ReportRow, StrategySpec};
pub use baselines::{baseline_weights, simplex_project, BaselineKind, BaselineStrategy};
pub use metrics::{arr, asr, ddr, mdd, EquityCurve, MetricsReport};
