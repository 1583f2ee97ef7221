//! The execution policy: a branching dueling Q-network over a discrete
//! `(price offset, quantity proportion)` grid, trained by one-step double-Q
//! temporal differences from uniform replay.
//!
//! The network is one trunk whose output splits into a state-value scalar
//! and one advantage vector per branch; per-branch Q-values subtract the
//! branch's advantage mean, so adding a constant to a branch's advantages
//! changes nothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exchange::{Direction, ExecutionEnv, LimitOrderAction, LowState, StepOutcome};
use crate::market::{LobSnapshot, LobWindow};
use crate::nn::{AdamState, GradientTape, Mlp};
use crate::seed::Rng;

use super::replay::{ReplayBuffer, Transition};

/// The discrete action grid: signed tick offsets from the best same-side
/// quote, and proportions of the remaining quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub price_offsets: Vec<i32>,
    pub quantity_props: Vec<f64>,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self {
            price_offsets: vec![-2, -1, 0, 1, 2],
            quantity_props: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        }
    }
}

impl ActionGrid {
    pub fn validate(&self) -> Result<()> {
        if self.price_offsets.is_empty() {
            return Err(Error::Config("need at least one price offset".into()));
        }
        if self.quantity_props.len() < 2 {
            return Err(Error::Config("need at least two quantity proportions".into()));
        }
        if !self.quantity_props.contains(&0.0) || !self.quantity_props.contains(&1.0) {
            return Err(Error::Config("quantity proportions must include 0 and 1".into()));
        }
        if self.quantity_props.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("quantity proportions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn n_price(&self) -> usize {
        self.price_offsets.len()
    }

    pub fn n_qty(&self) -> usize {
        self.quantity_props.len()
    }
}

/// Trunk network with a combined output head: slot 0 is V(s), then the
/// price-branch advantages, then the quantity-branch advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingQNet {
    net: Mlp,
    n_price: usize,
    n_qty: usize,
}

impl BranchingQNet {
    pub fn new(input: usize, hidden: &[usize], grid: &ActionGrid, seed: u64) -> Result<Self> {
        grid.validate()?;
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(1 + grid.n_price() + grid.n_qty());
        Ok(Self { net: Mlp::new(&sizes, seed)?, n_price: grid.n_price(), n_qty: grid.n_qty() })
    }

    pub fn zeros_like(other: &BranchingQNet) -> Result<Self> {
        Ok(Self {
            net: Mlp::zeros(other.net.sizes())?,
            n_price: other.n_price,
            n_qty: other.n_qty,
        })
    }

    pub fn from_net(net: Mlp, n_price: usize, n_qty: usize) -> Result<Self> {
        if net.output_size() != 1 + n_price + n_qty {
            return Err(Error::Shape(format!(
                "output size {} does not fit 1 + {n_price} + {n_qty}",
                net.output_size()
            )));
        }
        Ok(Self { net, n_price, n_qty })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn input_size(&self) -> usize {
        self.net.input_size()
    }

    fn split<'a>(&self, raw: &'a [f64]) -> (f64, &'a [f64], &'a [f64]) {
        let value = raw[0];
        let adv_p = &raw[1..1 + self.n_price];
        let adv_q = &raw[1 + self.n_price..];
        (value, adv_p, adv_q)
    }

    fn aggregate(value: f64, adv: &[f64]) -> Vec<f64> {
        let mean: f64 = adv.iter().sum::<f64>() / adv.len() as f64;
        adv.iter().map(|a| value + (a - mean)).collect()
    }

    /// Per-branch Q-values with the mean-subtracted aggregation.
    pub fn q_values(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let raw = self.net.forward(input)?;
        if raw.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite Q-network output".into()));
        }
        let (value, adv_p, adv_q) = self.split(&raw);
        Ok((Self::aggregate(value, adv_p), Self::aggregate(value, adv_q)))
    }

    /// Greedy action pair (ties break to the lowest index).
    pub fn greedy(&self, input: &[f64]) -> Result<(usize, usize)> {
        let (qp, qq) = self.q_values(input)?;
        Ok((argmax(&qp), argmax(&qq)))
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy selection: each branch independently explores with
/// probability `epsilon`.
pub fn select_action(
    net: &BranchingQNet,
    input: &[f64],
    epsilon: f64,
    rng: &mut Rng,
) -> Result<(usize, usize)> {
    let (greedy_p, greedy_q) = net.greedy(input)?;
    let p = if rand::Rng::gen::<f64>(rng) < epsilon {
        rand::Rng::gen_range(rng, 0..net.n_price)
    } else {
        greedy_p
    };
    let q = if rand::Rng::gen::<f64>(rng) < epsilon {
        rand::Rng::gen_range(rng, 0..net.n_qty)
    } else {
        greedy_q
    };
    Ok((p, q))
}

/// Translate a grid action into a limit order at the current book.
///
/// Offsets move away from the touch on the passive side: a sell prices at
/// best ask + offset ticks, a buy at best bid - offset ticks, so positive
/// offsets are patient and negative offsets cross toward the other side.
/// Prices that would drop to zero clamp to one tick.
pub fn to_limit_order(
    action: (usize, usize),
    state: &LowState,
    book: &LobSnapshot,
    grid: &ActionGrid,
    tick: f64,
) -> LimitOrderAction {
    let proportion = grid.quantity_props[action.1];
    let qty = proportion * state.private.remaining_qty;
    if qty == 0.0 {
        return LimitOrderAction::skip();
    }
    let offset = grid.price_offsets[action.0] as f64 * tick;
    let price = match state.private.direction {
        Direction::Sell => book.best_ask() + offset,
        Direction::Buy => book.best_bid() - offset,
    };
    let price = if price <= 0.0 { tick } else { price };
    LimitOrderAction { price, signed_qty: state.private.direction.sign() * qty }
}

/// Double-Q targets for a batch: the online net picks each branch's argmax
/// at the next state, the target net evaluates it; terminal transitions use
/// the reward alone.
pub fn td_targets(
    online: &BranchingQNet,
    target: &BranchingQNet,
    batch: &[&Transition],
    gamma: f64,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(batch.len());
    for t in batch {
        if t.done {
            out.push((t.reward, t.reward));
            continue;
        }
        let (online_p, online_q) = online.q_values(&t.next_state)?;
        let (target_p, target_q) = target.q_values(&t.next_state)?;
        let yp = t.reward + gamma * target_p[argmax(&online_p)];
        let yq = t.reward + gamma * target_q[argmax(&online_q)];
        out.push((yp, yq));
    }
    Ok(out)
}

/// Mean over the batch of the branch-averaged squared TD error, and its
/// gradient tape. Gradients flow only through the taken action of each
/// branch (value head and branch means included via the aggregation).
pub fn bdq_loss(
    online: &BranchingQNet,
    batch: &[&Transition],
    targets: &[(f64, f64)],
    tape: &mut GradientTape,
) -> Result<f64> {
    let mut loss = 0.0;
    let scale = 1.0 / batch.len() as f64;
    for (t, (yp, yq)) in batch.iter().zip(targets) {
        let trace = online.net.forward_trace(&t.state)?;
        let raw = trace.output().to_vec();
        let (value, adv_p, adv_q) = online.split(&raw);
        let qp = BranchingQNet::aggregate(value, adv_p);
        let qq = BranchingQNet::aggregate(value, adv_q);
        let err_p = qp[t.action.0] - yp;
        let err_q = qq[t.action.1] - yq;
        loss += scale * 0.5 * (err_p * err_p + err_q * err_q);

        // d loss / d Q_d(taken) = scale * err_d / N with N = 2 branches;
        // Q_d = V + Adv_d[a] - mean(Adv_d) distributes onto the raw outputs.
        let mut out_grad = vec![0.0; raw.len()];
        let gp = scale * err_p;
        let gq = scale * err_q;
        out_grad[0] += gp + gq;
        let np = online.n_price as f64;
        for (j, slot) in out_grad.iter_mut().enumerate().take(1 + online.n_price).skip(1) {
            let indicator = if j - 1 == t.action.0 { 1.0 } else { 0.0 };
            *slot += gp * (indicator - 1.0 / np);
        }
        let nq = online.n_qty as f64;
        for (j, slot) in out_grad.iter_mut().enumerate().skip(1 + online.n_price) {
            let indicator = if j - 1 - online.n_price == t.action.1 { 1.0 } else { 0.0 };
            *slot += gq * (indicator - 1.0 / nq);
        }
        tape.add(&online.net.backward(&trace, &out_grad)?);
    }
    Ok(loss)
}

/// Training hyperparameters for the execution policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowTrainConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    pub batch_size: usize,
    pub target_sync_interval: usize,
    pub learning_rate: f64,
    pub replay_capacity: usize,
    pub hidden: Vec<usize>,
}

impl Default for LowTrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 10_000,
            batch_size: 32,
            target_sync_interval: 1000,
            learning_rate: 1e-3,
            replay_capacity: 100_000,
            hidden: vec![64, 64],
        }
    }
}

impl LowTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config("gamma must be in (0, 1]".into()));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::Config("epsilon must be in [0, 1]".into()));
            }
        }
        if self.batch_size == 0 || self.target_sync_interval == 0 {
            return Err(Error::Config("batch size and sync interval must be >= 1".into()));
        }
        Ok(())
    }

    fn epsilon_at(&self, step: usize) -> f64 {
        if self.epsilon_decay_steps == 0 {
            return self.epsilon_end;
        }
        let frac = (step as f64 / self.epsilon_decay_steps as f64).min(1.0);
        self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)
    }
}

/// Summary of one training episode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeStats {
    pub reward: f64,
    pub cost: f64,
    pub steps: usize,
    pub updates: usize,
    pub mean_loss: f64,
}

/// The execution agent: online and target networks, replay, optimizer, and
/// the bookkeeping counters.
#[derive(Debug, Clone)]
pub struct LowAgent {
    pub online: BranchingQNet,
    target: BranchingQNet,
    pub grid: ActionGrid,
    pub tick: f64,
    pub config: LowTrainConfig,
    adam: AdamState,
    buffer: ReplayBuffer,
    env_steps: usize,
    updates: usize,
}

impl LowAgent {
    pub fn new(input: usize, grid: ActionGrid, tick: f64, config: LowTrainConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let online = BranchingQNet::new(input, &config.hidden, &grid, seed)?;
        let target = online.clone();
        let adam = AdamState::new(online.net());
        let buffer = ReplayBuffer::new(config.replay_capacity);
        Ok(Self { online, target, grid, tick, config, adam, buffer, env_steps: 0, updates: 0 })
    }

    pub fn env_steps(&self) -> usize {
        self.env_steps
    }

    /// Normalized network input: the flattened book window plus remaining
    /// time / window and remaining quantity / task quantity, both in [0, 1].
    pub fn flatten_state(state: &LowState, task_window: usize, task_qty: f64) -> Vec<f64> {
        let market = state.market.as_slice();
        let mut v = Vec::with_capacity(market.len() + 2);
        v.extend_from_slice(market);
        v.push(state.private.remaining_steps as f64 / task_window.max(1) as f64);
        let qty_norm = if task_qty > 0.0 {
            (state.private.remaining_qty / task_qty).min(1.0)
        } else {
            0.0
        };
        v.push(qty_norm);
        v
    }

    pub fn input_size(window: usize, levels: usize) -> usize {
        LobWindow::flat_len(window, levels) + 2
    }

    /// Reward scale used during learning: per share per tick, so Q-values
    /// stay O(1) across the task grid.
    fn reward_scale(&self, task_qty: f64) -> f64 {
        1.0 / (self.tick * task_qty.max(1.0))
    }

    /// Run one training episode on an environment, updating after every
    /// step once the buffer holds a full batch.
    pub fn train_episode(&mut self, env: &mut ExecutionEnv, rng: &mut Rng) -> Result<EpisodeStats> {
        let task_window = env.task().window;
        let task_qty = env.task().quantity;
        let scale = self.reward_scale(task_qty);
        let mut stats = EpisodeStats::default();
        let mut state = env.state()?;
        let mut loss_sum = 0.0;
        while !env.is_done() {
            let input = Self::flatten_state(&state, task_window, task_qty);
            let epsilon = self.config.epsilon_at(self.env_steps);
            let action = select_action(&self.online, &input, epsilon, rng)?;
            let order = to_limit_order(action, &state, env.current_snapshot(), &self.grid, self.tick);
            let outcome: StepOutcome = env.step(order)?;
            let next_input = Self::flatten_state(&outcome.state, task_window, task_qty);
            self.buffer.push(Transition {
                state: input,
                action,
                reward: outcome.reward * scale,
                next_state: next_input,
                done: outcome.done,
            });
            stats.reward += outcome.reward;
            stats.steps += 1;
            self.env_steps += 1;
            if self.buffer.len() >= self.config.batch_size {
                loss_sum += self.update_once(rng)?;
                stats.updates += 1;
            }
            state = outcome.state;
        }
        stats.cost = -stats.reward;
        stats.mean_loss = if stats.updates > 0 { loss_sum / stats.updates as f64 } else { 0.0 };
        Ok(stats)
    }

    /// One sampled batch update plus the periodic hard target sync.
    fn update_once(&mut self, rng: &mut Rng) -> Result<f64> {
        let batch = self.buffer.sample(self.config.batch_size, rng);
        let targets = td_targets(&self.online, &self.target, &batch, self.config.gamma)?;
        let mut tape = GradientTape::zeros_like(self.online.net());
        let loss = bdq_loss(&self.online, &batch, &targets, &mut tape)?;
        if !tape.is_finite() || !loss.is_finite() {
            return Err(Error::Divergence("non-finite TD loss".into()));
        }
        self.adam.step(self.online.net_mut(), &tape, self.config.learning_rate)?;
        self.updates += 1;
        if self.updates.is_multiple_of(self.config.target_sync_interval) {
            self.target = self.online.clone();
        }
        Ok(loss)
    }

    /// Deterministic greedy rollout on an environment; returns the episode
    /// reward (no learning, no exploration).
    pub fn greedy_episode(&self, env: &mut ExecutionEnv) -> Result<f64> {
        let task_window = env.task().window;
        let task_qty = env.task().quantity;
        let mut reward = 0.0;
        let mut state = env.state()?;
        while !env.is_done() {
            let input = Self::flatten_state(&state, task_window, task_qty);
            let action = self.online.greedy(&input)?;
            let order = to_limit_order(action, &state, env.current_snapshot(), &self.grid, self.tick);
            let outcome = env.step(order)?;
            reward += outcome.reward;
            state = outcome.state;
        }
        Ok(reward)
    }
}
