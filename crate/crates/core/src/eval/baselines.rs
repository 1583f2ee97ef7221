//! Classical rebalancing baselines over the same period structure as the
//! learned policy: uniform constant rebalancing, momentum (winner) and
//! contrarian (loser) allocation, and the two passive-aggressive moving
//! average reversion strategies with simplex-projected updates.

use serde::{Deserialize, Serialize};

use crate::accounting::{PortfolioWeights, PriceVector};
use crate::error::Result;
use crate::seed::Rng;
use crate::training::{Decision, DecisionContext, WeightPolicy};

/// Which baseline, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BaselineKind {
    Ucrp,
    Winner,
    Loser {
        /// One-hot on the single worst performer instead of the bottom half.
        strict_worst: bool,
    },
    Olmar {
        window: usize,
        epsilon: f64,
    },
    Wmamr {
        window: usize,
        epsilon: f64,
    },
}

impl BaselineKind {
    pub fn name(&self) -> &'static str {
        match self {
            BaselineKind::Ucrp => "UCRP",
            BaselineKind::Winner => "Winner",
            BaselineKind::Loser { .. } => "Loser",
            BaselineKind::Olmar { .. } => "OLMAR",
            BaselineKind::Wmamr { .. } => "WMAMR",
        }
    }

    pub fn olmar_default() -> Self {
        BaselineKind::Olmar { window: 5, epsilon: 10.0 }
    }

    pub fn wmamr_default() -> Self {
        BaselineKind::Wmamr { window: 5, epsilon: 10.0 }
    }
}

/// Euclidean projection onto the probability simplex: descending scan for
/// the largest support whose threshold keeps every kept entry positive.
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Per-period price relatives of the last two decision-day closes (cash
/// slot yields exactly 1).
fn last_relatives(history: &[PriceVector]) -> Option<Vec<f64>> {
    if history.len() < 2 {
        return None;
    }
    let prev = &history[history.len() - 2];
    let cur = &history[history.len() - 1];
    Some(
        cur.as_slice()
            .iter()
            .zip(prev.as_slice())
            .map(|(c, p)| c / p)
            .collect(),
    )
}

/// Compute the baseline's target weights from the close history at decision
/// time. Returns the current weights when the history is too short.
pub fn baseline_weights(
    kind: &BaselineKind,
    history: &[PriceVector],
    current: &PortfolioWeights,
) -> Result<PortfolioWeights> {
    let m = current.assets();
    match kind {
        BaselineKind::Ucrp => Ok(PortfolioWeights::uniform(m)),
        BaselineKind::Winner => {
            let Some(rel) = last_relatives(history) else {
                return Ok(current.clone());
            };
            // Best risky asset by last-period return; all weight on it.
            let mut best = 1;
            for i in 2..=m {
                if rel[i] > rel[best] {
                    best = i;
                }
            }
            let mut w = vec![0.0; m + 1];
            w[best] = 1.0;
            PortfolioWeights::new(w)
        }
        BaselineKind::Loser { strict_worst } => {
            let Some(rel) = last_relatives(history) else {
                return Ok(current.clone());
            };
            let mut order: Vec<usize> = (1..=m).collect();
            order.sort_by(|a, b| rel[*a].partial_cmp(&rel[*b]).unwrap());
            let take = if *strict_worst { 1 } else { (m / 2).max(1) };
            let mut w = vec![0.0; m + 1];
            for i in &order[..take] {
                w[*i] = 1.0 / take as f64;
            }
            PortfolioWeights::new(w)
        }
        BaselineKind::Olmar { window, epsilon } => {
            if history.len() < *window {
                return Ok(current.clone());
            }
            // Predicted relative: window-mean of closes over today's close.
            let cur = history[history.len() - 1].as_slice();
            let mut predicted = vec![1.0; m + 1];
            for (i, slot) in predicted.iter_mut().enumerate().skip(1) {
                let mean: f64 = history[history.len() - window..]
                    .iter()
                    .map(|p| p.as_slice()[i])
                    .sum::<f64>()
                    / *window as f64;
                *slot = mean / cur[i];
            }
            passive_aggressive_update(current, &predicted, *epsilon)
        }
        BaselineKind::Wmamr { window, epsilon } => {
            if history.len() < window + 1 {
                return Ok(current.clone());
            }
            // Predicted relative: equal-weighted mean of the last `window`
            // per-period price relatives.
            let mut predicted = vec![1.0; m + 1];
            for (i, slot) in predicted.iter_mut().enumerate().skip(1) {
                let mut acc = 0.0;
                for j in 0..*window {
                    let cur = history[history.len() - 1 - j].as_slice()[i];
                    let prev = history[history.len() - 2 - j].as_slice()[i];
                    acc += cur / prev;
                }
                *slot = acc / *window as f64;
            }
            passive_aggressive_update(current, &predicted, *epsilon)
        }
    }
}

/// The shared passive-aggressive mean-reversion step: move toward the
/// predicted relatives until the expected growth clears `epsilon`, then
/// project back onto the simplex.
fn passive_aggressive_update(
    current: &PortfolioWeights,
    predicted: &[f64],
    epsilon: f64,
) -> Result<PortfolioWeights> {
    let w = current.as_slice();
    let mean: f64 = predicted.iter().sum::<f64>() / predicted.len() as f64;
    let centered: Vec<f64> = predicted.iter().map(|x| x - mean).collect();
    let denom: f64 = centered.iter().map(|x| x * x).sum();
    let expected: f64 = w.iter().zip(predicted).map(|(wi, xi)| wi * xi).sum();
    let tau = if denom > 0.0 { ((epsilon - expected) / denom).max(0.0) } else { 0.0 };
    let raw: Vec<f64> = w.iter().zip(&centered).map(|(wi, ci)| wi + tau * ci).collect();
    PortfolioWeights::new(simplex_project(&raw))
}

/// Baseline as a period-engine strategy.
pub struct BaselineStrategy {
    pub kind: BaselineKind,
}

impl WeightPolicy for BaselineStrategy {
    fn decide(&mut self, ctx: &DecisionContext<'_>, _rng: &mut Rng) -> Result<Decision> {
        let weights = baseline_weights(&self.kind, ctx.close_history, ctx.weights)?;
        Ok(Decision { weights, log_density: 0.0 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prices(rows: &[&[f64]]) -> Vec<PriceVector> {
        rows.iter().map(|r| PriceVector::from_assets(r).unwrap()).collect()
    }

    #[test]
    fn ucrp_is_uniform_over_cash_and_assets() {
        let w = baseline_weights(&BaselineKind::Ucrp, &[], &PortfolioWeights::all_cash(23)).unwrap();
        for x in w.as_slice() {
            assert!((x - 1.0 / 24.0).abs() < 1e-15);
        }
    }

    #[test]
    fn winner_goes_all_in_on_the_best_performer() {
        let history = prices(&[&[10.0, 20.0, 30.0], &[10.0, 22.0, 30.0]]);
        let current = PortfolioWeights::uniform(3);
        let w = baseline_weights(&BaselineKind::Winner, &history, &current).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn loser_spreads_over_the_bottom_half() {
        let history = prices(&[&[10.0, 20.0, 30.0, 40.0], &[11.0, 20.0, 29.0, 40.0]]);
        let current = PortfolioWeights::uniform(4);
        let w = baseline_weights(&BaselineKind::Loser { strict_worst: false }, &history, &current)
            .unwrap();
        // Asset 3 fell, asset 2 was flat; they are the bottom two of four.
        assert_eq!(w.as_slice()[3], 0.5);
        assert_eq!(w.as_slice()[2], 0.5);
        assert_eq!(w.as_slice()[1], 0.0);

        let w = baseline_weights(&BaselineKind::Loser { strict_worst: true }, &history, &current)
            .unwrap();
        assert_eq!(w.as_slice()[3], 1.0);
    }

    #[test]
    fn short_history_holds_current_weights() {
        let current = PortfolioWeights::new(vec![0.2, 0.8]).unwrap();
        for kind in [
            BaselineKind::Winner,
            BaselineKind::olmar_default(),
            BaselineKind::wmamr_default(),
        ] {
            let w = baseline_weights(&kind, &prices(&[&[10.0]]), &current).unwrap();
            assert_eq!(w.as_slice(), current.as_slice());
        }
    }

    #[test]
    fn projection_fixed_point_and_vertex() {
        let already = vec![0.25, 0.25, 0.5];
        let p = simplex_project(&already);
        for (a, b) in p.iter().zip(&already) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = simplex_project(&[2.0, 0.0]);
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert_eq!(p[1], 0.0);
    }

    #[test]
    fn projection_matches_brute_force_kkt() {
        // Brute force: for every support size k over the sorted entries,
        // theta = (sum of top-k - 1) / k; valid when all kept entries stay
        // positive and discarded ones would not.
        fn brute(v: &[f64]) -> Vec<f64> {
            let mut sorted = v.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            for k in (1..=v.len()).rev() {
                let theta = (sorted[..k].iter().sum::<f64>() - 1.0) / k as f64;
                if sorted[k - 1] - theta > 0.0 {
                    return v.iter().map(|x| (x - theta).max(0.0)).collect();
                }
            }
            unreachable!()
        }
        let mut rng = crate::seed::rng(17, "proj");
        for _ in 0..500 {
            let v: Vec<f64> = (0..5).map(|_| rand::Rng::gen_range(&mut rng, -2.0..2.0)).collect();
            let fast = simplex_project(&v);
            let slow = brute(&v);
            let sum: f64 = fast.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "{fast:?} vs {slow:?} on {v:?}");
            }
        }
    }

    /// Straight-line re-implementation of the passive-aggressive reversion
    /// update, kept deliberately separate from the production code path.
    #[allow(clippy::needless_range_loop)]
    fn olmar_oracle(history: &[Vec<f64>], w: &[f64], window: usize, eps: f64) -> Vec<f64> {
        let n = w.len();
        let t = history.len() - 1;
        let mut xt = vec![1.0f64; n];
        for i in 1..n {
            let mut ma = 0.0;
            for j in 0..window {
                ma += history[t - j][i];
            }
            ma /= window as f64;
            xt[i] = ma / history[t][i];
        }
        let xbar: f64 = xt.iter().sum::<f64>() / n as f64;
        let mut denom = 0.0;
        for i in 0..n {
            denom += (xt[i] - xbar) * (xt[i] - xbar);
        }
        let dot: f64 = (0..n).map(|i| w[i] * xt[i]).sum();
        let tau = if denom > 0.0 { ((eps - dot) / denom).max(0.0) } else { 0.0 };
        let raw: Vec<f64> = (0..n).map(|i| w[i] + tau * (xt[i] - xbar)).collect();
        simplex_project(&raw)
    }

    #[test]
    fn olmar_matches_the_independent_reimplementation() {
        // 20-period toy series of two assets with mean-reverting prices.
        let mut history: Vec<Vec<f64>> = Vec::new();
        for t in 0..20 {
            let a = 10.0 + (t as f64 * 0.9).sin();
            let b = 20.0 - (t as f64 * 0.7).cos() * 2.0;
            history.push(vec![1.0, a, b]);
        }
        let window = 5;
        let eps = 10.0;
        let mut w = PortfolioWeights::uniform(2);
        for t in window..20 {
            let pv: Vec<PriceVector> = history[..=t]
                .iter()
                .map(|r| PriceVector::from_assets(&r[1..]).unwrap())
                .collect();
            let produced =
                baseline_weights(&BaselineKind::Olmar { window, epsilon: eps }, &pv, &w).unwrap();
            let expected = olmar_oracle(&history[..=t], w.as_slice(), window, eps);
            for (a, b) in produced.as_slice().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-8, "period {t}: {produced:?} vs {expected:?}");
            }
            w = produced;
        }
    }

    /// Independent WMAMR-style oracle: predicted relatives are equal-weight
    /// means of past relatives, then the same PA step.
    fn wmamr_oracle(history: &[Vec<f64>], w: &[f64], window: usize, eps: f64) -> Vec<f64> {
        let n = w.len();
        let t = history.len() - 1;
        let mut xt = vec![1.0f64; n];
        for i in 1..n {
            let mut acc = 0.0;
            for j in 0..window {
                acc += history[t - j][i] / history[t - j - 1][i];
            }
            xt[i] = acc / window as f64;
        }
        let xbar: f64 = xt.iter().sum::<f64>() / n as f64;
        let denom: f64 = xt.iter().map(|x| (x - xbar) * (x - xbar)).sum();
        let dot: f64 = (0..n).map(|i| w[i] * xt[i]).sum();
        let tau = if denom > 0.0 { ((eps - dot) / denom).max(0.0) } else { 0.0 };
        let raw: Vec<f64> = (0..n).map(|i| w[i] + tau * (xt[i] - xbar)).collect();
        simplex_project(&raw)
    }

    #[test]
    fn wmamr_matches_the_independent_reimplementation() {
        let mut history: Vec<Vec<f64>> = Vec::new();
        for t in 0..20 {
            let a = 50.0 * (1.0 + 0.05 * (t as f64 * 1.1).sin());
            let b = 30.0 * (1.0 + 0.04 * (t as f64 * 0.5).cos());
            history.push(vec![1.0, a, b]);
        }
        let window = 5;
        let eps = 10.0;
        let mut w = PortfolioWeights::new(vec![0.4, 0.3, 0.3]).unwrap();
        for t in (window + 1)..20 {
            let pv: Vec<PriceVector> = history[..=t]
                .iter()
                .map(|r| PriceVector::from_assets(&r[1..]).unwrap())
                .collect();
            let produced =
                baseline_weights(&BaselineKind::Wmamr { window, epsilon: eps }, &pv, &w).unwrap();
            let expected = wmamr_oracle(&history[..=t], w.as_slice(), window, eps);
            for (a, b) in produced.as_slice().iter().zip(&expected) {
                assert!((a - b).abs() < 1e-8, "period {t}");
            }
            w = produced;
        }
    }

    #[test]
    fn baseline_outputs_are_always_simplex() {
        let mut rng = crate::seed::rng(23, "baseline-simplex");
        let mut history: Vec<PriceVector> = Vec::new();
        let mut w = PortfolioWeights::uniform(3);
        for t in 0..40 {
            let row: Vec<f64> =
                (0..3).map(|_| 20.0 + rand::Rng::gen_range(&mut rng, -5.0..5.0)).collect();
            history.push(PriceVector::from_assets(&row).unwrap());
            for kind in [
                BaselineKind::Ucrp,
                BaselineKind::Winner,
                BaselineKind::Loser { strict_worst: false },
                BaselineKind::olmar_default(),
                BaselineKind::wmamr_default(),
            ] {
                let out = baseline_weights(&kind, &history, &w).unwrap();
                let sum: f64 = out.as_slice().iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "{} at {t}", kind.name());
            }
            w = baseline_weights(&BaselineKind::olmar_default(), &history, &w).unwrap();
        }
    }
}
