//! The two-timescale orchestration layer: the shared period engine that both
//! training and backtesting run on, the pre-training task grid, the frozen
//! policy bank, and high-level training on top of it.

mod bank;
mod episode;
mod pretrain;
mod train_high;

pub use bank::{FrozenPolicy, PolicyBank};
pub use episode::{
    max_horizon, run_episode, start_day, Decision, DecisionContext, EpisodeConfig, EpisodeResult,
    ExecAudit, ExecutionStyle, FixedWeights, HoldCurrent, IndexProxy, MarketData, PolicyStrategy,
    WeightPolicy,
};
pub use pretrain::{
    iterate_tasks, market_order_cost, pretrain_low, task_grid, PretrainConfig, PretrainReport,
    TaskCell, TaskIter,
};
pub use train_high::{train_high, TrainCurvePoint, TrainHighResult};
