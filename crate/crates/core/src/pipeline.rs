//! File-level pipeline commands behind the CLI: data generation, policy
//! pre-training, high-level training, backtesting, and report merging.
//! Everything below a run directory is reproducible from the flat config
//! and its seed; no artifact embeds wall-clock state.
//!
//! Run directory layout:
//!
//! ```text
//! <out_dir>/
//!   config.resolved          canonical flat config
//!   data/<asset>.ohlcv.csv   bar data (synthetic export or copies)
//!   data/<asset>.lob.csv     book data
//!   data/market.meta.json    tick size, steps per day
//!   bank/<asset>_<dir>.ckpt  frozen execution policies + .meta.json
//!   high.ckpt, high.meta.json
//!   logs/*.jsonl             pretraining stats, training curve, ledgers
//!   reports/*.report.json    one per strategy, plus comparison.{json,txt}
//!   reports/<s>.curve.csv    daily equity curves
//!   reports/curves_long.csv  long-format curve table for plotting
//! ```

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::high::HighPolicy;
use crate::config::{DataSource, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{
    comparison_table, render_table, run_backtest, BacktestOutput, BaselineKind, ReportRow,
    StrategySpec,
};
use crate::market::{gen_synthetic_market, load_lob, load_ohlcv, save_lob, save_ohlcv};
use crate::nn::{load_checkpoint, save_checkpoint};
use crate::training::{
    max_horizon, pretrain_low, train_high, ExecutionStyle, MarketData, PolicyBank, PretrainReport,
    TrainHighResult,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MarketMeta {
    tick: f64,
    steps_per_day: usize,
    assets: Vec<String>,
}

/// Sidecar stored next to `high.ckpt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighSidecar {
    pub assets: usize,
    pub feature_window: usize,
    pub kappa: f64,
    pub eta: f64,
    pub gamma: f64,
    pub normalization: String,
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// Write the canonical config into the run directory. A run directory is
/// bound to one config hash: resuming with a different config refuses
/// rather than silently mixing artifacts.
fn write_config(config: &RunConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let path = out.join("config.resolved");
    if path.is_file() {
        let existing = RunConfig::from_flat_text(&fs::read_to_string(&path)?)?;
        if existing.config_hash() != config.config_hash() {
            return Err(Error::Config(format!(
                "run directory {} was created with config hash {:016x}, current is {:016x}; \
                 use a fresh out_dir",
                out.display(),
                existing.config_hash(),
                config.config_hash()
            )));
        }
    }
    fs::write(path, config.to_canonical_string())?;
    Ok(())
}

/// Materialize the run's market data in memory: synthetic mode regenerates
/// deterministically from the seed; CSV mode loads from `data_dir`.
pub fn load_market(config: &RunConfig) -> Result<MarketData> {
    match config.data_source {
        DataSource::Synthetic => {
            let (bars, books) = gen_synthetic_market(&config.synthetic)?;
            Ok(MarketData {
                bars,
                books,
                tick: config.synthetic.tick,
                steps_per_day: config.synthetic.steps_per_day,
            })
        }
        DataSource::Csv => {
            let dir = Path::new(&config.data_dir);
            let mut bars = Vec::new();
            let mut books = Vec::new();
            for id in &config.asset_ids {
                bars.push(load_ohlcv(dir.join(format!("{id}.ohlcv.csv")), id.clone())?);
                books.push(load_lob(dir.join(format!("{id}.lob.csv")), id.clone())?);
            }
            Ok(MarketData {
                bars,
                books,
                tick: config.synthetic.tick,
                steps_per_day: config.synthetic.steps_per_day,
            })
        }
    }
}

/// `gen-data`: write the run's market as CSV files; returns the paths.
pub fn cmd_gen_data(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let out = Path::new(&config.out_dir);
    write_config(config, out)?;
    let data_dir = out.join("data");
    ensure_dir(&data_dir)?;
    let market = load_market(config)?;
    let mut written = Vec::new();
    for (bars, books) in market.bars.iter().zip(&market.books) {
        let ohlcv = data_dir.join(format!("{}.ohlcv.csv", bars.asset));
        save_ohlcv(bars, &ohlcv)?;
        let lob = data_dir.join(format!("{}.lob.csv", bars.asset));
        save_lob(books, &lob)?;
        written.push(ohlcv);
        written.push(lob);
    }
    let meta = MarketMeta {
        tick: market.tick,
        steps_per_day: market.steps_per_day,
        assets: market.ids(),
    };
    let meta_path = data_dir.join("market.meta.json");
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)?;
    written.push(meta_path);
    Ok(written)
}

fn append_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    ensure_dir(path.parent().unwrap())?;
    let mut f = fs::File::create(path)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

/// `pretrain`: train and freeze one execution policy per (asset, direction).
pub fn cmd_pretrain(config: &RunConfig) -> Result<(PolicyBank, Vec<PretrainReport>)> {
    let out = Path::new(&config.out_dir);
    write_config(config, out)?;
    let market = load_market(config)?;
    let (bank, reports) = pretrain_low(
        &market,
        &config.pretrain,
        &config.low,
        &config.grid,
        config.episode.lob_window,
        config.episode.lambda,
        config.seed,
        config.jobs,
    )?;
    bank.save(out.join("bank"))?;
    append_jsonl(&out.join("logs").join("pretrain.jsonl"), &reports)?;
    Ok((bank, reports))
}

/// `train`: fit the weight policy on top of the frozen bank.
pub fn cmd_train(config: &RunConfig) -> Result<TrainHighResult> {
    let out = Path::new(&config.out_dir);
    write_config(config, out)?;
    let market = load_market(config)?;
    let bank = PolicyBank::load(out.join("bank"))
        .map_err(|e| Error::Data(format!("pretrained bank required: {e}")))?;
    bank.check_complete(&market.ids())?;
    let result = train_high(
        &market,
        &bank,
        &config.episode,
        &config.high,
        &config.high_hidden,
        config.seed,
    )?;
    save_checkpoint(result.best_policy.net(), out.join("high.ckpt"))?;
    let sidecar = HighSidecar {
        assets: market.assets(),
        feature_window: config.episode.feature_window,
        kappa: config.high.kappa,
        eta: config.high.eta,
        gamma: config.high.gamma,
        normalization: "prices/first-window-close, volume/first-window-volume".into(),
    };
    fs::write(out.join("high.meta.json"), serde_json::to_string_pretty(&sidecar)?)?;
    append_jsonl(&out.join("logs").join("train_curve.jsonl"), &result.curve)?;
    Ok(result)
}

/// Which strategies `backtest` runs.
pub fn resolve_strategies(selector: &str) -> Result<Vec<String>> {
    let known = ["policy", "UCRP", "Winner", "Loser", "OLMAR", "WMAMR", "index-proxy", "AllCash"];
    if selector == "all" {
        return Ok(known.iter().map(|s| s.to_string()).collect());
    }
    let mut out = Vec::new();
    for part in selector.split(',') {
        let name = part.trim();
        if !known.contains(&name) {
            return Err(Error::Config(format!(
                "unknown strategy {name:?}; known: {}",
                known.join(", ")
            )));
        }
        out.push(name.to_string());
    }
    Ok(out)
}

fn baseline_by_name(name: &str) -> Option<BaselineKind> {
    match name {
        "UCRP" => Some(BaselineKind::Ucrp),
        "Winner" => Some(BaselineKind::Winner),
        "Loser" => Some(BaselineKind::Loser { strict_worst: false }),
        "OLMAR" => Some(BaselineKind::olmar_default()),
        "WMAMR" => Some(BaselineKind::wmamr_default()),
        _ => None,
    }
}

/// `backtest`: run the selected strategies and write per-strategy reports
/// plus the merged comparison table. `ideal_baselines` keeps baseline fills
/// at the decision close (commission only); otherwise baselines cross the
/// simulated book with immediate market orders.
pub fn cmd_backtest(
    config: &RunConfig,
    selector: &str,
    ideal_baselines: bool,
) -> Result<Vec<ReportRow>> {
    let out = Path::new(&config.out_dir);
    write_config(config, out)?;
    let market = load_market(config)?;
    let episode = config.episode.clone();
    let cap = max_horizon(&market, &episode);
    if episode.horizon > cap {
        return Err(Error::Data(format!(
            "horizon {} exceeds data ({} periods available)",
            episode.horizon, cap
        )));
    }
    let names = resolve_strategies(selector)?;

    // The learned policy needs its checkpoint and bank.
    let policy_assets = market.assets();
    let mut policy: Option<HighPolicy> = None;
    let mut bank: Option<PolicyBank> = None;
    if names.iter().any(|n| n == "policy") {
        let net = load_checkpoint(out.join("high.ckpt"))
            .map_err(|e| Error::Data(format!("trained policy required: {e}")))?;
        policy = Some(HighPolicy::from_net(
            net,
            policy_assets,
            episode.feature_window,
            config.high.kappa,
        )?);
        let loaded = PolicyBank::load(out.join("bank"))?;
        loaded.check_complete(&market.ids())?;
        bank = Some(loaded);
    }

    let baseline_style =
        if ideal_baselines { ExecutionStyle::Ideal } else { ExecutionStyle::MarketOrder };
    let reports_dir = out.join("reports");
    ensure_dir(&reports_dir)?;

    let mut outputs: Vec<BacktestOutput> = Vec::new();
    for name in &names {
        let spec = match name.as_str() {
            "policy" => StrategySpec::Policy {
                policy: policy.as_ref().unwrap(),
                bank: bank.as_ref().unwrap(),
            },
            "index-proxy" => StrategySpec::IndexProxy,
            "AllCash" => StrategySpec::AllCash,
            other => StrategySpec::Baseline(
                baseline_by_name(other)
                    .ok_or_else(|| Error::Config(format!("unknown strategy {other}")))?,
            ),
        };
        let output = run_backtest(&spec, &market, &episode, &baseline_style, config.seed)?;
        write_strategy_files(&reports_dir, &output, config.config_hash())?;
        outputs.push(output);
    }

    let rows = comparison_table(&outputs, config.config_hash());
    fs::write(reports_dir.join("comparison.json"), serde_json::to_string_pretty(&rows)?)?;
    fs::write(reports_dir.join("comparison.txt"), render_table(&rows))?;
    write_long_curves(&reports_dir, &outputs)?;
    Ok(rows)
}

fn write_strategy_files(dir: &Path, output: &BacktestOutput, config_hash: u64) -> Result<()> {
    let row = ReportRow::from_output(output, config_hash);
    fs::write(
        dir.join(format!("{}.report.json", output.strategy)),
        serde_json::to_string_pretty(&row)?,
    )?;
    let mut curve = String::from("day,value\n");
    for (day, value) in output.curve.points() {
        curve.push_str(&format!("{day},{value}\n"));
    }
    fs::write(dir.join(format!("{}.curve.csv", output.strategy)), curve)?;
    append_jsonl(&dir.join(format!("{}.ledger.jsonl", output.strategy)), &output.ledgers)?;
    // Per-fill execution log: one line per fill event, tagged with its
    // period and task.
    let mut fills = fs::File::create(dir.join(format!("{}.fills.jsonl", output.strategy)))?;
    for audit in &output.episode.audits {
        for record in &audit.fill_log {
            let mut line = serde_json::to_value(record)?;
            line["period"] = audit.period.into();
            line["asset"] = audit.asset.clone().into();
            line["direction"] = audit.direction.label().into();
            writeln!(fills, "{line}")?;
        }
    }
    Ok(())
}

fn write_long_curves(dir: &Path, outputs: &[BacktestOutput]) -> Result<()> {
    let mut long = String::from("strategy,day,value\n");
    for output in outputs {
        for (day, value) in output.curve.points() {
            long.push_str(&format!("{},{day},{value}\n", output.strategy));
        }
    }
    fs::write(dir.join("curves_long.csv"), long)?;
    Ok(())
}

/// `report`: merge every `*.report.json` under `<run>/reports` into one
/// table sorted by ARR (text + JSON). An empty directory yields the header
/// only.
pub fn cmd_report(run_dir: impl AsRef<Path>) -> Result<(Vec<ReportRow>, String)> {
    let reports_dir = run_dir.as_ref().join("reports");
    let mut rows: Vec<ReportRow> = Vec::new();
    if reports_dir.is_dir() {
        let mut paths: Vec<PathBuf> = fs::read_dir(&reports_dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".report.json")))
            .collect();
        paths.sort();
        for path in paths {
            rows.push(serde_json::from_str(&fs::read_to_string(&path)?)?);
        }
    }
    rows.sort_by(|a, b| b.arr.partial_cmp(&a.arr).unwrap());
    let text = render_table(&rows);
    Ok((rows, text))
}
