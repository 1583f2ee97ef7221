//! The flat run configuration: one `key = value` file drives the whole
//! pipeline. Unknown keys are rejected, every knob has a default, and the
//! canonical serialization feeds the config hash recorded in every artifact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::high::HighTrainConfig;
use crate::agent::low::{ActionGrid, LowTrainConfig};
use crate::error::{Error, Result};
use crate::market::SyntheticMarketConfig;
use crate::numeric::fnv1a64;
use crate::training::{EpisodeConfig, PretrainConfig};

/// Parse a flat `key = value` file (# comments, blank lines allowed).
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::Parse { line, msg: format!("expected key = value, got {trimmed:?}") });
        };
        let key = key.trim().to_string();
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate key {key:?}") });
        }
    }
    Ok(map)
}

/// Where market data comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DataSource {
    Synthetic,
    Csv,
}

/// Every knob of a run, flattened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data_source: DataSource,
    /// Directory holding `<asset>.ohlcv.csv` / `<asset>.lob.csv` in CSV mode.
    pub data_dir: String,
    /// Asset ids for CSV mode (comma list).
    pub asset_ids: Vec<String>,
    pub synthetic: SyntheticMarketConfig,
    pub episode: EpisodeConfig,
    pub pretrain: PretrainConfig,
    pub low: LowTrainConfig,
    pub high: HighTrainConfig,
    pub grid: ActionGrid,
    pub high_hidden: Vec<usize>,
    pub seed: u64,
    pub out_dir: String,
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_source: DataSource::Synthetic,
            data_dir: String::new(),
            asset_ids: Vec::new(),
            synthetic: SyntheticMarketConfig::default(),
            episode: EpisodeConfig::default(),
            pretrain: PretrainConfig::default(),
            low: LowTrainConfig::default(),
            high: HighTrainConfig::default(),
            grid: ActionGrid::default(),
            high_hidden: vec![64, 64],
            seed: 1,
            out_dir: "run".into(),
            jobs: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|part| parse_num::<T>(key, part.trim())).collect()
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Config(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_flat_text(&text)
    }

    pub fn from_flat_text(text: &str) -> Result<Self> {
        let map = parse_flat(text)?;
        Self::from_map(map)
    }

    /// Apply `key = value` pairs over the defaults; unknown keys error.
    pub fn from_map(map: BTreeMap<String, String>) -> Result<Self> {
        let mut c = Self::default();
        for (key, value) in &map {
            let v = value.as_str();
            match key.as_str() {
                "data_source" => {
                    c.data_source = match v {
                        "synthetic" => DataSource::Synthetic,
                        "csv" => DataSource::Csv,
                        other => {
                            return Err(Error::Config(format!(
                                "data_source must be synthetic or csv, got {other:?}"
                            )))
                        }
                    }
                }
                "data_dir" => c.data_dir = v.to_string(),
                "asset_ids" => {
                    c.asset_ids =
                        v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
                }
                "assets" => c.synthetic.assets = parse_num(key, v)?,
                "days" => c.synthetic.days = parse_num(key, v)?,
                "steps_per_day" => c.synthetic.steps_per_day = parse_num(key, v)?,
                "drift" => c.synthetic.drift = parse_list(key, v)?,
                "volatility" => c.synthetic.volatility = parse_list(key, v)?,
                "initial_price" => c.synthetic.initial_price = parse_list(key, v)?,
                "depth" => c.synthetic.depth = parse_num(key, v)?,
                "level_spacing" => c.synthetic.level_spacing = parse_num(key, v)?,
                "tick" => c.synthetic.tick = parse_num(key, v)?,
                "base_level_volume" => c.synthetic.base_level_volume = parse_num(key, v)?,
                "holding_days" => c.episode.holding_days = parse_num(key, v)?,
                "trading_days" => c.episode.trading_days = parse_num(key, v)?,
                "feature_window" => c.episode.feature_window = parse_num(key, v)?,
                "lob_window" => c.episode.lob_window = parse_num(key, v)?,
                "horizon" => c.episode.horizon = parse_num(key, v)?,
                "t_window" => c.episode.t_window = parse_num(key, v)?,
                "lambda" => c.episode.lambda = parse_num(key, v)?,
                "initial_value" => c.episode.initial_value = parse_num(key, v)?,
                "bankruptcy_floor" => c.episode.bankruptcy_floor = parse_num(key, v)?,
                "q_max" => c.pretrain.q_max = parse_num(key, v)?,
                "t_max" => c.pretrain.t_max = parse_num(key, v)?,
                "episodes_per_cell" => c.pretrain.episodes_per_cell = parse_num(key, v)?,
                "quantity_lattice_points" => {
                    c.pretrain.quantity_lattice_points = parse_num(key, v)?
                }
                "cycles" => c.pretrain.cycles = parse_num(key, v)?,
                "step_interval_secs" => c.pretrain.step_interval_secs = parse_num(key, v)?,
                "holdout_fraction" => c.pretrain.holdout_fraction = parse_num(key, v)?,
                "eval_episodes" => c.pretrain.eval_episodes = parse_num(key, v)?,
                "low_gamma" => c.low.gamma = parse_num(key, v)?,
                "epsilon_start" => c.low.epsilon_start = parse_num(key, v)?,
                "epsilon_end" => c.low.epsilon_end = parse_num(key, v)?,
                "epsilon_decay_steps" => c.low.epsilon_decay_steps = parse_num(key, v)?,
                "low_batch_size" => c.low.batch_size = parse_num(key, v)?,
                "target_sync_interval" => c.low.target_sync_interval = parse_num(key, v)?,
                "low_learning_rate" => c.low.learning_rate = parse_num(key, v)?,
                "replay_capacity" => c.low.replay_capacity = parse_num(key, v)?,
                "low_hidden" => c.low.hidden = parse_list(key, v)?,
                "gamma" => c.high.gamma = parse_num(key, v)?,
                "eta" => c.high.eta = parse_num(key, v)?,
                "high_learning_rate" => c.high.learning_rate = parse_num(key, v)?,
                "kappa" => c.high.kappa = parse_num(key, v)?,
                "episodes" => c.high.episodes = parse_num(key, v)?,
                "high_batch_size" => c.high.batch_size = parse_num(key, v)?,
                "high_hidden" => c.high_hidden = parse_list(key, v)?,
                "price_offsets" => c.grid.price_offsets = parse_list(key, v)?,
                "quantity_props" => c.grid.quantity_props = parse_list(key, v)?,
                "seed" => c.seed = parse_num(key, v)?,
                "out_dir" => c.out_dir = v.to_string(),
                "jobs" => c.jobs = parse_num(key, v)?,
                unknown => return Err(Error::Config(format!("unknown key {unknown:?}"))),
            }
        }
        c.synthetic.seed = crate::seed::split(c.seed, "synthetic");
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_source == DataSource::Csv {
            if self.data_dir.is_empty() {
                return Err(Error::Config("csv mode needs data_dir".into()));
            }
            if self.asset_ids.is_empty() {
                return Err(Error::Config("csv mode needs asset_ids".into()));
            }
        }
        self.synthetic.validate()?;
        self.pretrain.validate()?;
        self.low.validate()?;
        self.high.validate()?;
        self.grid.validate()?;
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        Ok(())
    }

    /// Canonical flat rendering: sorted keys, every field spelled out.
    pub fn to_canonical_string(&self) -> String {
        let join = |xs: &[f64]| {
            xs.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
        };
        let join_us = |xs: &[usize]| {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
        };
        let mut pairs: Vec<(String, String)> = vec![
            (
                "data_source".into(),
                match self.data_source {
                    DataSource::Synthetic => "synthetic".into(),
                    DataSource::Csv => "csv".into(),
                },
            ),
            ("data_dir".into(), self.data_dir.clone()),
            ("asset_ids".into(), self.asset_ids.join(",")),
            ("assets".into(), self.synthetic.assets.to_string()),
            ("days".into(), self.synthetic.days.to_string()),
            ("steps_per_day".into(), self.synthetic.steps_per_day.to_string()),
            ("drift".into(), join(&self.synthetic.drift)),
            ("volatility".into(), join(&self.synthetic.volatility)),
            ("initial_price".into(), join(&self.synthetic.initial_price)),
            ("depth".into(), self.synthetic.depth.to_string()),
            ("level_spacing".into(), self.synthetic.level_spacing.to_string()),
            ("tick".into(), self.synthetic.tick.to_string()),
            ("base_level_volume".into(), self.synthetic.base_level_volume.to_string()),
            ("holding_days".into(), self.episode.holding_days.to_string()),
            ("trading_days".into(), self.episode.trading_days.to_string()),
            ("feature_window".into(), self.episode.feature_window.to_string()),
            ("lob_window".into(), self.episode.lob_window.to_string()),
            ("horizon".into(), self.episode.horizon.to_string()),
            ("t_window".into(), self.episode.t_window.to_string()),
            ("lambda".into(), self.episode.lambda.to_string()),
            ("initial_value".into(), self.episode.initial_value.to_string()),
            ("bankruptcy_floor".into(), self.episode.bankruptcy_floor.to_string()),
            ("q_max".into(), self.pretrain.q_max.to_string()),
            ("t_max".into(), self.pretrain.t_max.to_string()),
            ("episodes_per_cell".into(), self.pretrain.episodes_per_cell.to_string()),
            (
                "quantity_lattice_points".into(),
                self.pretrain.quantity_lattice_points.to_string(),
            ),
            ("cycles".into(), self.pretrain.cycles.to_string()),
            ("step_interval_secs".into(), self.pretrain.step_interval_secs.to_string()),
            ("holdout_fraction".into(), self.pretrain.holdout_fraction.to_string()),
            ("eval_episodes".into(), self.pretrain.eval_episodes.to_string()),
            ("low_gamma".into(), self.low.gamma.to_string()),
            ("epsilon_start".into(), self.low.epsilon_start.to_string()),
            ("epsilon_end".into(), self.low.epsilon_end.to_string()),
            ("epsilon_decay_steps".into(), self.low.epsilon_decay_steps.to_string()),
            ("low_batch_size".into(), self.low.batch_size.to_string()),
            ("target_sync_interval".into(), self.low.target_sync_interval.to_string()),
            ("low_learning_rate".into(), self.low.learning_rate.to_string()),
            ("replay_capacity".into(), self.low.replay_capacity.to_string()),
            ("low_hidden".into(), join_us(&self.low.hidden)),
            ("gamma".into(), self.high.gamma.to_string()),
            ("eta".into(), self.high.eta.to_string()),
            ("high_learning_rate".into(), self.high.learning_rate.to_string()),
            ("kappa".into(), self.high.kappa.to_string()),
            ("episodes".into(), self.high.episodes.to_string()),
            ("high_batch_size".into(), self.high.batch_size.to_string()),
            ("high_hidden".into(), join_us(&self.high_hidden)),
            (
                "price_offsets".into(),
                self.grid.price_offsets.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("quantity_props".into(), join(&self.grid.quantity_props)),
            ("seed".into(), self.seed.to_string()),
            ("out_dir".into(), self.out_dir.clone()),
            ("jobs".into(), self.jobs.to_string()),
        ];
        pairs.sort();
        let mut out = String::new();
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Stable hash of the canonical rendering, minus run-local fields that
    /// do not affect results (output directory, worker count).
    pub fn config_hash(&self) -> u64 {
        let canonical: String = self
            .to_canonical_string()
            .lines()
            .filter(|l| !l.starts_with("out_dir") && !l.starts_with("jobs"))
            .collect::<Vec<_>>()
            .join("\n");
        fnv1a64(canonical.as_bytes())
    }
}
