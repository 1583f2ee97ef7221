//! The four performance metrics over a daily equity curve.
//!
//! Conventions: ARR is the simple (non-compounded) annualization of total
//! return; ASR divides ARR by the sample standard deviation of daily simple
//! returns scaled by sqrt(T_year), risk-free rate zero; DDR divides ARR by
//! the annualized downside deviation with MAR zero, where the downside mean
//! runs over all days. Degenerate denominators report as absent rather than
//! infinities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sample_std;

pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// Daily `(day, value)` points, strictly increasing days, positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    points: Vec<(u32, f64)>,
    pub t_year: f64,
}

impl EquityCurve {
    pub fn new(points: Vec<(u32, f64)>) -> Result<Self> {
        Self::with_t_year(points, TRADING_DAYS_PER_YEAR)
    }

    pub fn with_t_year(points: Vec<(u32, f64)>, t_year: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("equity curve".into()));
        }
        if points.iter().any(|(_, v)| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Validation("curve values must be positive".into()));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Validation("curve days must strictly increase".into()));
        }
        Ok(Self { points, t_year })
    }

    pub fn points(&self) -> &[(u32, f64)] {
        &self.points
    }

    pub fn first(&self) -> (u32, f64) {
        self.points[0]
    }

    pub fn last(&self) -> (u32, f64) {
        *self.points.last().unwrap()
    }

    /// Simple returns between consecutive points.
    pub fn daily_returns(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[1].1 / w[0].1 - 1.0).collect()
    }

    /// Days elapsed between the first and last point.
    pub fn elapsed_days(&self) -> f64 {
        (self.last().0 - self.first().0) as f64
    }
}

/// Annual rate of return: total return scaled by T_year / T_all.
pub fn arr(curve: &EquityCurve) -> Result<f64> {
    if curve.points().len() < 2 {
        return Err(Error::Validation("ARR needs at least 2 points".into()));
    }
    let (_, v_i) = curve.first();
    let (_, v_f) = curve.last();
    Ok((v_f - v_i) / v_i * curve.t_year / curve.elapsed_days())
}

/// Annualized Sharpe ratio at zero risk-free rate; absent when the daily
/// volatility is zero.
pub fn asr(curve: &EquityCurve) -> Result<Option<f64>> {
    if curve.points().len() < 3 {
        return Err(Error::Validation("ASR needs at least 3 points".into()));
    }
    let vol = sample_std(&curve.daily_returns()) * curve.t_year.sqrt();
    if vol == 0.0 {
        return Ok(None);
    }
    Ok(Some(arr(curve)? / vol))
}

/// Maximum drawdown: the largest peak-to-trough loss fraction, single pass.
pub fn mdd(curve: &EquityCurve) -> f64 {
    let mut peak = f64::MIN;
    let mut worst = 0.0f64;
    for (_, v) in curve.points() {
        peak = peak.max(*v);
        worst = worst.max((peak - v) / peak);
    }
    worst
}

/// Downside deviation ratio at MAR zero: ARR over the annualized root mean
/// square of below-MAR daily returns (mean over all days). Absent when no
/// day falls below the MAR.
pub fn ddr(curve: &EquityCurve, mar: f64) -> Result<Option<f64>> {
    if curve.points().len() < 3 {
        return Err(Error::Validation("DDR needs at least 3 points".into()));
    }
    let returns = curve.daily_returns();
    if !returns.iter().any(|r| *r < mar) {
        return Ok(None);
    }
    let mean_sq = returns
        .iter()
        .map(|r| {
            let d = (r - mar).min(0.0);
            d * d
        })
        .sum::<f64>()
        / returns.len() as f64;
    let downside = mean_sq.sqrt() * curve.t_year.sqrt();
    Ok(Some(arr(curve)? / downside))
}

/// One strategy's metric row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub arr: f64,
    pub asr: Option<f64>,
    pub mdd: f64,
    pub ddr: Option<f64>,
    pub mar: f64,
}

impl MetricsReport {
    pub fn from_curve(curve: &EquityCurve) -> Result<Self> {
        Ok(Self {
            arr: arr(curve)?,
            asr: asr(curve)?,
            mdd: mdd(curve),
            ddr: ddr(curve, 0.0)?,
            mar: 0.0,
        })
    }
}
