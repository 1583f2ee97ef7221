//! The frozen policy bank: one trained execution policy per (asset,
//! direction), with file round-tripping in the checkpoint + sidecar layout.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::low::{to_limit_order, ActionGrid, BranchingQNet, LowAgent};
use crate::error::{Error, Result};
use crate::exchange::{Direction, ExecutionEnv};
use crate::nn::{load_checkpoint, save_checkpoint};

/// A trained, read-only execution policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FrozenPolicy {
    pub net: BranchingQNet,
    pub grid: ActionGrid,
    pub tick: f64,
    pub t_window: usize,
    pub lob_window: usize,
}

impl FrozenPolicy {
    /// Greedy rollout to episode end.
    pub fn run_greedy(&self, env: &mut ExecutionEnv<'_>) -> Result<f64> {
        let task_window = env.task().window;
        let task_qty = env.task().quantity;
        let mut reward = 0.0;
        let mut state = env.state()?;
        while !env.is_done() {
            let input = LowAgent::flatten_state(&state, task_window, task_qty);
            let action = self.net.greedy(&input)?;
            let order = to_limit_order(action, &state, env.current_snapshot(), &self.grid, self.tick);
            let outcome = env.step(order)?;
            reward += outcome.reward;
            state = outcome.state;
        }
        Ok(reward)
    }
}

/// Sidecar metadata stored next to each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankSidecar {
    pub asset: String,
    pub direction: Direction,
    pub grid: ActionGrid,
    pub tick: f64,
    pub t_window: usize,
    pub lob_window: usize,
    /// Private-state normalization convention.
    pub normalization: String,
}

/// Map from (asset, direction) to its frozen policy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PolicyBank {
    entries: BTreeMap<(String, Direction), FrozenPolicy>,
}

impl PolicyBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, asset: impl Into<String>, direction: Direction, policy: FrozenPolicy) {
        self.entries.insert((asset.into(), direction), policy);
    }

    pub fn get(&self, asset: &str, direction: Direction) -> Result<&FrozenPolicy> {
        self.entries.get(&(asset.to_string(), direction)).ok_or_else(|| {
            Error::Data(format!("no banked policy for ({asset}, {})", direction.label()))
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &(String, Direction)> {
        self.entries.keys()
    }

    /// Every asset in `ids` must have both directions banked.
    pub fn check_complete(&self, ids: &[String]) -> Result<()> {
        let mut missing = Vec::new();
        for id in ids {
            for direction in [Direction::Buy, Direction::Sell] {
                if !self.entries.contains_key(&(id.clone(), direction)) {
                    missing.push(format!("({id}, {})", direction.label()));
                }
            }
        }
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::Data(format!("bank incomplete; missing {}", missing.join(", "))))
        }
    }

    /// Write `bank/<asset>_<direction>.ckpt` plus `.meta.json` sidecars.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        for ((asset, direction), policy) in &self.entries {
            let stem = format!("{asset}_{}", direction.label());
            save_checkpoint(policy.net.net(), dir.join(format!("{stem}.ckpt")))?;
            let sidecar = BankSidecar {
                asset: asset.clone(),
                direction: *direction,
                grid: policy.grid.clone(),
                tick: policy.tick,
                t_window: policy.t_window,
                lob_window: policy.lob_window,
                normalization: "remaining_steps/t_window, remaining_qty/task_qty".into(),
            };
            fs::write(
                dir.join(format!("{stem}.meta.json")),
                serde_json::to_string_pretty(&sidecar)?,
            )?;
        }
        Ok(())
    }

    /// Load every `*.meta.json` + checkpoint pair in a directory.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut bank = Self::new();
        let mut metas: Vec<_> = fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".meta.json")))
            .collect();
        metas.sort();
        for meta_path in metas {
            let sidecar: BankSidecar = serde_json::from_str(&fs::read_to_string(&meta_path)?)?;
            let stem = format!("{}_{}", sidecar.asset, sidecar.direction.label());
            let net = load_checkpoint(dir.join(format!("{stem}.ckpt")))?;
            let net = BranchingQNet::from_net(net, sidecar.grid.n_price(), sidecar.grid.n_qty())?;
            bank.insert(
                sidecar.asset.clone(),
                sidecar.direction,
                FrozenPolicy {
                    net,
                    grid: sidecar.grid,
                    tick: sidecar.tick,
                    t_window: sidecar.t_window,
                    lob_window: sidecar.lob_window,
                },
            );
        }
        if bank.is_empty() {
            return Err(Error::Data(format!("no bank entries under {}", dir.display())));
        }
        Ok(bank)
    }
}
