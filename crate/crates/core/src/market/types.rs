//! Bar and order-book snapshot types with their validity rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One day of OHLCV data. `day` is a trading-day index, not a calendar date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bar {
    pub day: u32,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    pub fn validate(&self) -> Result<()> {
        let prices = [self.open, self.high, self.low, self.close];
        if prices.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::Validation(format!(
                "day {}: prices must be positive and finite",
                self.day
            )));
        }
        if !self.volume.is_finite() || self.volume < 0.0 {
            return Err(Error::Validation(format!("day {}: negative volume", self.day)));
        }
        if self.low > self.open.min(self.close) {
            return Err(Error::Validation(format!(
                "day {}: low {} above min(open, close)",
                self.day, self.low
            )));
        }
        if self.high < self.open.max(self.close) {
            return Err(Error::Validation(format!(
                "day {}: high {} below max(open, close)",
                self.day, self.high
            )));
        }
        Ok(())
    }
}

/// A per-asset bar series with strictly increasing, gap-free day indices.
///
/// Gap filling carries the previous close forward (open = high = low = close)
/// and sets volume to zero on the filled day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarSeries {
    pub asset: String,
    bars: Vec<Bar>,
}

impl BarSeries {
    /// Build a series from validated bars. Bars must be sorted by day with no
    /// duplicates; gaps are filled here.
    pub fn new(asset: impl Into<String>, mut bars: Vec<Bar>) -> Result<Self> {
        let asset = asset.into();
        if bars.is_empty() {
            return Err(Error::EmptyInput(format!("bar series for {asset}")));
        }
        bars.sort_by_key(|b| b.day);
        for b in &bars {
            b.validate()?;
        }
        for w in bars.windows(2) {
            if w[0].day == w[1].day {
                return Err(Error::Validation(format!(
                    "{asset}: duplicate day {}",
                    w[0].day
                )));
            }
        }
        Ok(Self { asset, bars: gap_fill(bars) })
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn first_day(&self) -> u32 {
        self.bars[0].day
    }

    pub fn last_day(&self) -> u32 {
        self.bars[self.bars.len() - 1].day
    }

    /// Bar at an absolute day index, if in range.
    pub fn bar_at(&self, day: u32) -> Option<&Bar> {
        if day < self.first_day() || day > self.last_day() {
            return None;
        }
        Some(&self.bars[(day - self.first_day()) as usize])
    }
}

fn gap_fill(bars: Vec<Bar>) -> Vec<Bar> {
    let mut filled = Vec::with_capacity(bars.len());
    for bar in bars {
        while let Some(prev) = filled.last() {
            let prev: &Bar = prev;
            if prev.day + 1 >= bar.day {
                break;
            }
            let c = prev.close;
            filled.push(Bar { day: prev.day + 1, open: c, high: c, low: c, close: c, volume: 0.0 });
        }
        filled.push(bar);
    }
    filled
}

/// One price level: price and total resting volume at that price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LobLevel {
    pub price: f64,
    pub volume: f64,
}

/// An order-book snapshot: bid and ask ladders, best level first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobSnapshot {
    /// Intra-day step index (global across days for generated streams).
    pub step: u64,
    pub bids: Vec<LobLevel>,
    pub asks: Vec<LobLevel>,
}

impl LobSnapshot {
    pub fn validate(&self) -> Result<()> {
        if self.bids.is_empty() || self.asks.is_empty() {
            return Err(Error::Validation(format!("step {}: empty book side", self.step)));
        }
        for lv in self.bids.iter().chain(&self.asks) {
            if !lv.price.is_finite() || lv.price <= 0.0 {
                return Err(Error::Validation(format!("step {}: non-positive price", self.step)));
            }
            if !lv.volume.is_finite() || lv.volume <= 0.0 {
                return Err(Error::Validation(format!("step {}: non-positive volume", self.step)));
            }
        }
        if self.bids.windows(2).any(|w| w[1].price >= w[0].price) {
            return Err(Error::Validation(format!(
                "step {}: bid prices not strictly decreasing",
                self.step
            )));
        }
        if self.asks.windows(2).any(|w| w[1].price <= w[0].price) {
            return Err(Error::Validation(format!(
                "step {}: ask prices not strictly increasing",
                self.step
            )));
        }
        if self.bids[0].price >= self.asks[0].price {
            return Err(Error::Validation(format!("step {}: crossed book", self.step)));
        }
        Ok(())
    }

    pub fn best_bid(&self) -> f64 {
        self.bids[0].price
    }

    pub fn best_ask(&self) -> f64 {
        self.asks[0].price
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.best_bid() + self.best_ask())
    }

    /// Sum of all level volumes on both sides.
    pub fn total_volume(&self) -> f64 {
        self.bids.iter().chain(&self.asks).map(|l| l.volume).sum()
    }
}

/// A per-asset stream of snapshots with strictly increasing step indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobSeries {
    pub asset: String,
    snapshots: Vec<LobSnapshot>,
}

impl LobSeries {
    /// Build a stream from validated snapshots. Missing steps between the
    /// first and last are filled by carrying the previous snapshot forward.
    pub fn new(asset: impl Into<String>, mut snapshots: Vec<LobSnapshot>) -> Result<Self> {
        let asset = asset.into();
        if snapshots.is_empty() {
            return Err(Error::EmptyInput(format!("lob series for {asset}")));
        }
        snapshots.sort_by_key(|s| s.step);
        for s in &snapshots {
            s.validate()?;
        }
        for w in snapshots.windows(2) {
            if w[0].step == w[1].step {
                return Err(Error::Validation(format!("{asset}: duplicate step {}", w[0].step)));
            }
        }
        let mut filled: Vec<LobSnapshot> = Vec::with_capacity(snapshots.len());
        for snap in snapshots {
            while let Some(prev) = filled.last() {
                if prev.step + 1 >= snap.step {
                    break;
                }
                let mut carried = prev.clone();
                carried.step = prev.step + 1;
                filled.push(carried);
            }
            filled.push(snap);
        }
        Ok(Self { asset, snapshots: filled })
    }

    pub fn snapshots(&self) -> &[LobSnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_bar(day: u32, close: f64, volume: f64) -> Bar {
        Bar { day, open: close, high: close, low: close, close, volume }
    }

    #[test]
    fn bar_rejects_high_below_low() {
        let bar = Bar { day: 0, open: 10.0, high: 9.0, low: 11.0, close: 10.0, volume: 1.0 };
        assert!(matches!(bar.validate(), Err(Error::Validation(_))));
    }

    #[test]
    fn series_fills_gaps_with_carried_close_and_zero_volume() {
        let bars = vec![flat_bar(0, 10.0, 5.0), flat_bar(1, 11.0, 5.0), flat_bar(3, 12.0, 5.0)];
        let s = BarSeries::new("x", bars).unwrap();
        assert_eq!(s.len(), 4);
        let filled = s.bar_at(2).unwrap();
        assert_eq!(filled.close, 11.0);
        assert_eq!(filled.open, 11.0);
        assert_eq!(filled.volume, 0.0);
    }

    #[test]
    fn gap_fill_is_idempotent() {
        let bars = vec![flat_bar(0, 10.0, 5.0), flat_bar(1, 11.0, 5.0), flat_bar(3, 12.0, 5.0)];
        let s = BarSeries::new("x", bars).unwrap();
        let refilled = BarSeries::new("x", s.bars().to_vec()).unwrap();
        assert_eq!(s, refilled);
    }

    #[test]
    fn series_rejects_duplicate_days() {
        let bars = vec![flat_bar(0, 10.0, 5.0), flat_bar(0, 11.0, 5.0)];
        assert!(BarSeries::new("x", bars).is_err());
    }

    fn snap(step: u64, mid: f64) -> LobSnapshot {
        LobSnapshot {
            step,
            bids: vec![LobLevel { price: mid - 0.5, volume: 10.0 }],
            asks: vec![LobLevel { price: mid + 0.5, volume: 10.0 }],
        }
    }

    #[test]
    fn snapshot_rejects_crossed_book() {
        let s = LobSnapshot {
            step: 0,
            bids: vec![LobLevel { price: 10.0, volume: 1.0 }],
            asks: vec![LobLevel { price: 9.9, volume: 1.0 }],
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn lob_series_carries_missing_steps_forward() {
        let s = LobSeries::new("x", vec![snap(0, 10.0), snap(3, 12.0)]).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.snapshots()[1].mid(), 10.0);
        assert_eq!(s.snapshots()[2].mid(), 10.0);
        assert_eq!(s.snapshots()[3].mid(), 12.0);
    }
}
