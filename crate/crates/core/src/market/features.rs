//! Normalized feature windows for the two policy levels.
//!
//! Daily windows divide every price by the asset's close on the window's
//! first day (so the first normalized close is exactly 1) and volume by the
//! first day's volume. Book windows divide prices by the first snapshot's
//! mid and volumes by its total resting volume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::types::{BarSeries, LobSnapshot};

/// Features per bar: open, high, low, close, volume.
pub const FEATURES_PER_BAR: usize = 5;

/// A `(assets, window, 5)` tensor of window-normalized daily features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub assets: usize,
    pub window: usize,
    data: Vec<f64>,
}

impl FeatureWindow {
    pub fn get(&self, asset: usize, day: usize, feature: usize) -> f64 {
        self.data[(asset * self.window + day) * FEATURES_PER_BAR + feature]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Build the high-level feature window ending at day `end_day` (inclusive),
/// spanning `window` days.
pub fn make_feature_window(
    series: &[BarSeries],
    end_day: u32,
    window: usize,
) -> Result<FeatureWindow> {
    if window == 0 {
        return Err(Error::Window("window length must be >= 1".into()));
    }
    if (end_day as usize + 1) < window {
        return Err(Error::Window(format!(
            "end day {end_day} has fewer than {window} days of history"
        )));
    }
    let start_day = end_day + 1 - window as u32;
    let mut data = Vec::with_capacity(series.len() * window * FEATURES_PER_BAR);
    for s in series {
        let anchor = s.bar_at(start_day).ok_or_else(|| {
            Error::Window(format!("{}: no bar at day {start_day}", s.asset))
        })?;
        let price_div = anchor.close;
        let volume_div = if anchor.volume == 0.0 { 1.0 } else { anchor.volume };
        for day in start_day..=end_day {
            let bar = s
                .bar_at(day)
                .ok_or_else(|| Error::Window(format!("{}: no bar at day {day}", s.asset)))?;
            data.push(bar.open / price_div);
            data.push(bar.high / price_div);
            data.push(bar.low / price_div);
            data.push(bar.close / price_div);
            data.push(bar.volume / volume_div);
        }
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite feature value".into()));
    }
    Ok(FeatureWindow { assets: series.len(), window, data })
}

/// A `(window, levels, 2 sides, 2 channels)` tensor of normalized book state.
/// Channel 0 is price, channel 1 volume; side 0 is bids, side 1 asks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LobWindow {
    pub window: usize,
    pub levels: usize,
    data: Vec<f64>,
}

impl LobWindow {
    pub fn get(&self, step: usize, level: usize, side: usize, channel: usize) -> f64 {
        self.data[((step * self.levels + level) * 2 + side) * 2 + channel]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn flat_len(window: usize, levels: usize) -> usize {
        window * levels * 4
    }
}

/// Build the low-level market window from the `window` snapshots strictly
/// before `end_step` (an index into `snapshots`).
pub fn make_lob_window(
    snapshots: &[LobSnapshot],
    end_step: usize,
    window: usize,
) -> Result<LobWindow> {
    if window == 0 {
        return Err(Error::Window("window length must be >= 1".into()));
    }
    if end_step < window || end_step > snapshots.len() {
        return Err(Error::Window(format!(
            "window of {window} snapshots before index {end_step} unavailable (have {})",
            snapshots.len()
        )));
    }
    let slice = &snapshots[end_step - window..end_step];
    let levels = slice[0].bids.len().min(slice[0].asks.len());
    let price_div = slice[0].mid();
    let raw_volume = slice[0].total_volume();
    let volume_div = if raw_volume == 0.0 { 1.0 } else { raw_volume };
    let mut data = Vec::with_capacity(LobWindow::flat_len(window, levels));
    for snap in slice {
        if snap.bids.len() < levels || snap.asks.len() < levels {
            return Err(Error::Window(format!(
                "step {}: fewer than {levels} levels per side",
                snap.step
            )));
        }
        for level in 0..levels {
            for side in [&snap.bids, &snap.asks] {
                data.push(side[level].price / price_div);
                data.push(side[level].volume / volume_div);
            }
        }
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite book feature".into()));
    }
    Ok(LobWindow { window, levels, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::types::{Bar, LobLevel};

    fn flat_series(asset: &str, closes: &[f64]) -> BarSeries {
        let bars = closes
            .iter()
            .enumerate()
            .map(|(d, c)| Bar { day: d as u32, open: *c, high: *c, low: *c, close: *c, volume: 100.0 })
            .collect();
        BarSeries::new(asset, bars).unwrap()
    }

    #[test]
    fn constant_series_normalizes_to_one() {
        let s = flat_series("x", &[50.0; 12]);
        let w = make_feature_window(std::slice::from_ref(&s), 11, 10).unwrap();
        for day in 0..10 {
            assert_eq!(w.get(0, day, 3), 1.0);
        }
    }

    #[test]
    fn closes_divide_by_first_close() {
        let s = flat_series("x", &[100.0, 110.0]);
        let w = make_feature_window(std::slice::from_ref(&s), 1, 2).unwrap();
        assert!((w.get(0, 0, 3) - 1.0).abs() < 1e-15);
        assert!((w.get(0, 1, 3) - 1.1).abs() < 1e-15);
    }

    #[test]
    fn first_day_normalized_close_is_exactly_one() {
        let s = flat_series("x", &[37.4, 41.0, 39.2, 44.8]);
        for end in 1..4u32 {
            let w = make_feature_window(std::slice::from_ref(&s), end, 2).unwrap();
            assert_eq!(w.get(0, 0, 3), 1.0);
        }
    }

    #[test]
    fn insufficient_history_is_a_window_error() {
        let s = flat_series("x", &[100.0, 110.0, 120.0]);
        // end day k-2 = 0 with k = 2 is fine; end day below that is not.
        assert!(make_feature_window(std::slice::from_ref(&s), 0, 2).is_err());
    }

    #[test]
    fn zero_volume_anchor_divides_by_one() {
        // Gap-filled day at the window start has volume 0.
        let bars = vec![
            Bar { day: 0, open: 10.0, high: 10.0, low: 10.0, close: 10.0, volume: 100.0 },
            Bar { day: 2, open: 10.0, high: 10.0, low: 10.0, close: 10.0, volume: 80.0 },
        ];
        let s = BarSeries::new("x", bars).unwrap();
        let w = make_feature_window(std::slice::from_ref(&s), 2, 2).unwrap();
        // Day 1 is the gap-filled anchor with volume 0; divisor becomes 1.
        assert_eq!(w.get(0, 0, 4), 0.0);
        assert_eq!(w.get(0, 1, 4), 80.0);
    }

    fn snap(step: u64, mid: f64, levels: usize) -> LobSnapshot {
        LobSnapshot {
            step,
            bids: (0..levels).map(|l| LobLevel { price: mid - 0.5 - l as f64, volume: 10.0 }).collect(),
            asks: (0..levels).map(|l| LobLevel { price: mid + 0.5 + l as f64, volume: 10.0 }).collect(),
        }
    }

    #[test]
    fn constant_book_normalizes_prices_by_initial_mid() {
        let snaps: Vec<LobSnapshot> = (0..6).map(|i| snap(i, 10.0, 2)).collect();
        let w = make_lob_window(&snaps, 5, 4).unwrap();
        for step in 0..4 {
            assert!((w.get(step, 0, 0, 0) - 9.5 / 10.0).abs() < 1e-15);
            assert!((w.get(step, 0, 1, 0) - 10.5 / 10.0).abs() < 1e-15);
        }
    }

    #[test]
    fn single_snapshot_window_is_the_normalized_last_snapshot() {
        let snaps: Vec<LobSnapshot> = vec![snap(0, 20.0, 1), snap(1, 24.0, 1)];
        let w = make_lob_window(&snaps, 2, 1).unwrap();
        assert_eq!(w.window, 1);
        assert!((w.get(0, 0, 0, 0) - 23.5 / 24.0).abs() < 1e-15);
    }

    #[test]
    fn doubling_mid_shows_up_as_two() {
        let snaps: Vec<LobSnapshot> = vec![snap(0, 10.0, 1), snap(1, 15.0, 1), snap(2, 20.0, 1)];
        let w = make_lob_window(&snaps, 3, 3).unwrap();
        let last_mid = 0.5 * (w.get(2, 0, 0, 0) + w.get(2, 0, 1, 0));
        assert!((last_mid - 2.0).abs() < 1e-12);
    }

    #[test]
    fn short_history_is_a_window_error() {
        let snaps: Vec<LobSnapshot> = vec![snap(0, 10.0, 1)];
        assert!(make_lob_window(&snaps, 1, 2).is_err());
    }
}
