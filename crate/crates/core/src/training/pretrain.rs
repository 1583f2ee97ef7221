//! Pre-training of execution policies over the augmented task grid: target
//! quantities on a quantized lattice crossed with every window length, every
//! cell visited the configured number of times per cycle in shuffled order.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::agent::low::{ActionGrid, LowAgent, LowTrainConfig};
use crate::error::{Error, Result};
use crate::exchange::{forced_liquidation, low_reward, Direction, ExecutionEnv, ExecutionTask, OrderBook};
use crate::market::LobSnapshot;
use crate::seed::{self, Rng};

use super::bank::{FrozenPolicy, PolicyBank};
use super::episode::MarketData;

/// Grid and budget for pre-training one market's policies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainConfig {
    /// Largest task quantity on the lattice.
    pub q_max: f64,
    /// Largest task window in steps.
    pub t_max: usize,
    /// Episodes per grid cell within one cycle.
    pub episodes_per_cell: usize,
    /// Total lattice points for the quantity axis, zero included.
    pub quantity_lattice_points: usize,
    /// Full passes over the grid.
    pub cycles: usize,
    /// Low-level decision interval in seconds (metadata; 30 in the default
    /// daily setup).
    pub step_interval_secs: u32,
    /// Fraction of each stream reserved for held-out evaluation.
    pub holdout_fraction: f64,
    /// Held-out episodes used for the cost comparison.
    pub eval_episodes: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            q_max: 1000.0,
            t_max: 8,
            episodes_per_cell: 2,
            quantity_lattice_points: 9,
            cycles: 4,
            step_interval_secs: 30,
            holdout_fraction: 0.2,
            eval_episodes: 20,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.q_max <= 0.0 {
            return Err(Error::Config("q_max must be positive".into()));
        }
        if self.t_max < 1 {
            return Err(Error::Config("t_max must be >= 1".into()));
        }
        if self.quantity_lattice_points < 2 {
            return Err(Error::Config("quantity lattice needs at least {0, q_max}".into()));
        }
        if self.episodes_per_cell < 1 || self.cycles < 1 {
            return Err(Error::Config("episodes_per_cell and cycles must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.holdout_fraction) {
            return Err(Error::Config("holdout_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// One grid cell: a target quantity and a window length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskCell {
    pub quantity: f64,
    pub window: usize,
}

/// The full lattice: evenly spaced quantities from 0 to q_max crossed with
/// windows 1..=t_max.
pub fn task_grid(config: &PretrainConfig) -> Vec<TaskCell> {
    let n = config.quantity_lattice_points;
    let mut cells = Vec::with_capacity(n * config.t_max);
    for qi in 0..n {
        let quantity = config.q_max * qi as f64 / (n - 1) as f64;
        for window in 1..=config.t_max {
            cells.push(TaskCell { quantity, window });
        }
    }
    cells
}

/// Endless shuffled traversal of the grid: every cell appears exactly
/// `episodes_per_cell` times per cycle, reshuffled each cycle.
pub struct TaskIter {
    cells: Vec<TaskCell>,
    episodes_per_cell: usize,
    queue: Vec<TaskCell>,
    rng: Rng,
}

impl TaskIter {
    fn refill(&mut self) {
        self.queue.clear();
        for cell in &self.cells {
            for _ in 0..self.episodes_per_cell {
                self.queue.push(*cell);
            }
        }
        self.queue.shuffle(&mut self.rng);
        self.queue.reverse();
    }

    /// Tasks per full cycle.
    pub fn cycle_len(&self) -> usize {
        self.cells.len() * self.episodes_per_cell
    }
}

impl Iterator for TaskIter {
    type Item = TaskCell;

    fn next(&mut self) -> Option<TaskCell> {
        if self.queue.is_empty() {
            self.refill();
        }
        self.queue.pop()
    }
}

/// The augmented-task stream for pre-training.
pub fn iterate_tasks(config: &PretrainConfig, rng: Rng) -> TaskIter {
    let mut it = TaskIter {
        cells: task_grid(config),
        episodes_per_cell: config.episodes_per_cell,
        queue: Vec::new(),
        rng,
    };
    it.refill();
    it
}

/// Cost of dumping `quantity` via an immediate market order against the
/// snapshot at `pos` (the all-at-once baseline).
pub fn market_order_cost(
    stream: &[LobSnapshot],
    pos: usize,
    quantity: f64,
    direction: Direction,
    reference: f64,
    lambda: f64,
) -> Result<f64> {
    let mut book = OrderBook::from_snapshot(&stream[pos]);
    let fill = forced_liquidation(&mut book, quantity, direction)?;
    Ok(-low_reward(&fill, reference, lambda, direction))
}

/// Convergence summary for one banked policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub asset: String,
    pub direction: Direction,
    pub episodes: usize,
    pub env_steps: usize,
    /// Mean greedy cost on held-out episodes.
    pub eval_cost: f64,
    /// Mean all-at-once market-order cost on the same episodes.
    pub baseline_cost: f64,
    /// Set when the policy failed to beat the baseline (banked anyway).
    pub flagged: bool,
}

fn episode_reference(stream: &[LobSnapshot], start: usize, window: usize) -> f64 {
    stream[start + window].mid()
}

#[allow(clippy::too_many_arguments)]
fn train_one(
    data: &MarketData,
    asset: usize,
    direction: Direction,
    config: &PretrainConfig,
    low: &LowTrainConfig,
    grid: &ActionGrid,
    lob_window: usize,
    lambda: f64,
    seed_root: u64,
) -> Result<(FrozenPolicy, PretrainReport)> {
    let id = data.bars[asset].asset.clone();
    let label = format!("pretrain/{id}/{}", direction.label());
    let mut task_rng = seed::rng(seed_root, &format!("{label}/tasks"));
    let mut agent = LowAgent::new(
        LowAgent::input_size(lob_window, data.books[asset].snapshots()[0].bids.len()),
        grid.clone(),
        data.tick,
        low.clone(),
        seed::split(seed_root, &format!("{label}/net")),
    )?;
    let stream = data.books[asset].snapshots();
    let split_at = ((stream.len() as f64) * (1.0 - config.holdout_fraction)) as usize;
    let train_end = split_at.max(lob_window + config.t_max + 2);

    let tasks = iterate_tasks(config, seed::rng(seed_root, &format!("{label}/grid")));
    let total = tasks.cycle_len() * config.cycles;
    let mut episodes = 0;
    for cell in tasks.take(total) {
        let max_start = train_end.saturating_sub(cell.window + 1);
        if max_start <= lob_window {
            return Err(Error::Stream(format!("{id}: stream too short for pre-training")));
        }
        let start = task_rng.gen_range(lob_window..max_start);
        let task = ExecutionTask {
            asset: id.clone(),
            direction,
            quantity: cell.quantity,
            window: cell.window,
            reference_price: episode_reference(stream, start, cell.window),
        };
        let (mut env, _) = ExecutionEnv::new(task, stream, start, lob_window, lambda)?;
        agent.train_episode(&mut env, &mut task_rng)?;
        episodes += 1;
    }

    // Held-out comparison against the all-at-once market order.
    let mut eval_rng = seed::rng(seed_root, &format!("{label}/eval"));
    let eval_lo = split_at.max(lob_window + 1);
    let eval_hi = stream.len().saturating_sub(config.t_max + 1);
    let mut eval_cost = 0.0;
    let mut baseline_cost = 0.0;
    let mut evaluated = 0;
    for _ in 0..config.eval_episodes {
        if eval_hi <= eval_lo {
            break;
        }
        let start = eval_rng.gen_range(eval_lo..eval_hi);
        let reference = episode_reference(stream, start, config.t_max);
        let task = ExecutionTask {
            asset: id.clone(),
            direction,
            quantity: config.q_max,
            window: config.t_max,
            reference_price: reference,
        };
        let (mut env, _) = ExecutionEnv::new(task, stream, start, lob_window, lambda)?;
        eval_cost += -agent.greedy_episode(&mut env)?;
        baseline_cost += market_order_cost(stream, start, config.q_max, direction, reference, lambda)?;
        evaluated += 1;
    }
    if evaluated > 0 {
        eval_cost /= evaluated as f64;
        baseline_cost /= evaluated as f64;
    }

    let report = PretrainReport {
        asset: id,
        direction,
        episodes,
        env_steps: agent.env_steps(),
        eval_cost,
        baseline_cost,
        flagged: evaluated > 0 && eval_cost > baseline_cost,
    };
    let frozen = FrozenPolicy {
        net: agent.online.clone(),
        grid: grid.clone(),
        tick: data.tick,
        t_window: config.t_max,
        lob_window,
    };
    Ok((frozen, report))
}

/// Train one policy per (asset, direction) and freeze them into a bank.
/// `jobs` caps the number of worker threads; every worker derives its own
/// seeds, so the result does not depend on scheduling.
#[allow(clippy::too_many_arguments)]
pub fn pretrain_low(
    data: &MarketData,
    config: &PretrainConfig,
    low: &LowTrainConfig,
    grid: &ActionGrid,
    lob_window: usize,
    lambda: f64,
    seed_root: u64,
    jobs: usize,
) -> Result<(PolicyBank, Vec<PretrainReport>)> {
    data.validate()?;
    config.validate()?;
    low.validate()?;
    grid.validate()?;
    let mut work: Vec<(usize, Direction)> = Vec::new();
    for asset in 0..data.assets() {
        for direction in [Direction::Buy, Direction::Sell] {
            work.push((asset, direction));
        }
    }
    let jobs = jobs.max(1).min(work.len().max(1));
    let results: Vec<Result<(usize, Direction, FrozenPolicy, PretrainReport)>> =
        if jobs == 1 {
            work.iter()
                .map(|(asset, direction)| {
                    train_one(data, *asset, *direction, config, low, grid, lob_window, lambda, seed_root)
                        .map(|(p, r)| (*asset, *direction, p, r))
                })
                .collect()
        } else {
            std::thread::scope(|scope| {
                let chunks: Vec<Vec<(usize, Direction)>> =
                    work.chunks(work.len().div_ceil(jobs)).map(|c| c.to_vec()).collect();
                let handles: Vec<_> = chunks
                    .into_iter()
                    .map(|chunk| {
                        scope.spawn(move || {
                            chunk
                                .into_iter()
                                .map(|(asset, direction)| {
                                    train_one(
                                        data, asset, direction, config, low, grid, lob_window,
                                        lambda, seed_root,
                                    )
                                    .map(|(p, r)| (asset, direction, p, r))
                                })
                                .collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
            })
        };

    let mut bank = PolicyBank::new();
    let mut reports = Vec::with_capacity(results.len());
    let mut collected: Vec<(usize, Direction, FrozenPolicy, PretrainReport)> = Vec::new();
    for r in results {
        collected.push(r?);
    }
    collected.sort_by_key(|(asset, direction, _, _)| (*asset, *direction));
    for (asset, direction, policy, report) in collected {
        bank.insert(data.bars[asset].asset.clone(), direction, policy);
        let _ = asset;
        reports.push(report);
    }
    Ok((bank, reports))
}
