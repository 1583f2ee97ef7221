//! CSV ingestion and emission for bar and order-book data.
//!
//! Formats:
//! - OHLCV: header `day,open,high,low,close,volume`, day a non-negative
//!   integer, decimal prices.
//! - LOB: header `step,side,level,price,volume`, side `B` or `A`, level 0 the
//!   best quote on its side.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

use super::types::{Bar, BarSeries, LobLevel, LobSeries, LobSnapshot};

const OHLCV_HEADER: &str = "day,open,high,low,close,volume";
const LOB_HEADER: &str = "step,side,level,price,volume";

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, name: &str) -> Result<T> {
    field.trim().parse::<T>().map_err(|_| Error::Parse {
        line,
        msg: format!("bad {name}: {field:?}"),
    })
}

/// Load one asset's OHLCV CSV into a gap-filled bar series.
pub fn load_ohlcv(path: impl AsRef<Path>, asset: impl Into<String>) -> Result<BarSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyInput(format!("{}", path.display())))?;
    if header.1.trim() != OHLCV_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("expected header {OHLCV_HEADER:?}") });
    }
    let mut bars = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse { line, msg: format!("expected 6 fields, got {}", fields.len()) });
        }
        bars.push(Bar {
            day: parse_field(fields[0], line, "day")?,
            open: parse_field(fields[1], line, "open")?,
            high: parse_field(fields[2], line, "high")?,
            low: parse_field(fields[3], line, "low")?,
            close: parse_field(fields[4], line, "close")?,
            volume: parse_field(fields[5], line, "volume")?,
        });
    }
    if bars.is_empty() {
        return Err(Error::EmptyInput(format!("{}", path.display())));
    }
    BarSeries::new(asset, bars)
}

pub fn save_ohlcv(series: &BarSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(OHLCV_HEADER);
    out.push('\n');
    for b in series.bars() {
        out.push_str(&format!("{},{},{},{},{},{}\n", b.day, b.open, b.high, b.low, b.close, b.volume));
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Load one asset's LOB CSV into a step-ordered snapshot stream.
pub fn load_lob(path: impl AsRef<Path>, asset: impl Into<String>) -> Result<LobSeries> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| Error::EmptyInput(format!("{}", path.display())))?;
    if header.1.trim() != LOB_HEADER {
        return Err(Error::Parse { line: 1, msg: format!("expected header {LOB_HEADER:?}") });
    }
    // step -> (bids by level, asks by level)
    type SideMaps = (BTreeMap<u32, LobLevel>, BTreeMap<u32, LobLevel>);
    let mut by_step: BTreeMap<u64, SideMaps> = BTreeMap::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Parse { line, msg: format!("expected 5 fields, got {}", fields.len()) });
        }
        let step: u64 = parse_field(fields[0], line, "step")?;
        let side = fields[1].trim();
        let level: u32 = parse_field(fields[2], line, "level")?;
        let lv = LobLevel {
            price: parse_field(fields[3], line, "price")?,
            volume: parse_field(fields[4], line, "volume")?,
        };
        let entry = by_step.entry(step).or_default();
        let side_map = match side {
            "B" => &mut entry.0,
            "A" => &mut entry.1,
            other => {
                return Err(Error::Parse { line, msg: format!("side must be B or A, got {other:?}") })
            }
        };
        if side_map.insert(level, lv).is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate level {level} for step {step}") });
        }
    }
    if by_step.is_empty() {
        return Err(Error::EmptyInput(format!("{}", path.display())));
    }
    let mut snapshots = Vec::with_capacity(by_step.len());
    for (step, (bids, asks)) in by_step {
        snapshots.push(LobSnapshot {
            step,
            bids: contiguous_levels(bids, step, "bid")?,
            asks: contiguous_levels(asks, step, "ask")?,
        });
    }
    LobSeries::new(asset, snapshots)
}

fn contiguous_levels(map: BTreeMap<u32, LobLevel>, step: u64, side: &str) -> Result<Vec<LobLevel>> {
    for (want, have) in map.keys().enumerate() {
        if *have != want as u32 {
            return Err(Error::Validation(format!(
                "step {step}: {side} levels not contiguous from 0"
            )));
        }
    }
    Ok(map.into_values().collect())
}

pub fn save_lob(series: &LobSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from(LOB_HEADER);
    out.push('\n');
    for s in series.snapshots() {
        for (level, lv) in s.bids.iter().enumerate() {
            out.push_str(&format!("{},B,{},{},{}\n", s.step, level, lv.price, lv.volume));
        }
        for (level, lv) in s.asks.iter().enumerate() {
            out.push_str(&format!("{},A,{},{},{}\n", s.step, level, lv.price, lv.volume));
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}
