//! Central finite-difference verification of the analytic gradients.

use super::mlp::{GradientTape, Mlp};
use crate::error::Result;

const FD_STEP: f64 = 1e-6;
// Relative-error denominator floor: keeps near-zero gradients from
// amplifying quadrature noise into spurious mismatches.
const DENOM_FLOOR: f64 = 1e-3;

/// Squared-error batch loss: 0.5 * sum over the batch of |f(x) - y|^2.
pub fn squared_error_loss(net: &Mlp, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let mut loss = 0.0;
    for (x, y) in batch {
        let out = net.forward(x)?;
        for (o, t) in out.iter().zip(y) {
            loss += 0.5 * (o - t) * (o - t);
        }
    }
    Ok(loss)
}

fn analytic_tape(net: &Mlp, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<GradientTape> {
    let mut total = GradientTape::zeros_like(net);
    for (x, y) in batch {
        let trace = net.forward_trace(x)?;
        let grad: Vec<f64> = trace.output().iter().zip(y).map(|(o, t)| o - t).collect();
        total.add(&net.backward(&trace, &grad)?);
    }
    Ok(total)
}

/// Max relative error of backprop against central differences over every
/// parameter, on the squared-error loss. Returns 0 for a parameterless net.
pub fn grad_check(net: &Mlp, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    let tape = analytic_tape(net, batch)?;
    grad_check_tape(net, batch, &tape)
}

/// Same comparison for a caller-supplied tape, so deliberately corrupted
/// gradients can be detected.
pub fn grad_check_tape(
    net: &Mlp,
    batch: &[(Vec<f64>, Vec<f64>)],
    tape: &GradientTape,
) -> Result<f64> {
    let mut probe = net.clone();
    let mut max_err: f64 = 0.0;
    for (idx, analytic) in tape.values().enumerate() {
        probe.nudge_param(idx, FD_STEP);
        let plus = squared_error_loss(&probe, batch)?;
        probe.nudge_param(idx, -2.0 * FD_STEP);
        let minus = squared_error_loss(&probe, batch)?;
        probe.nudge_param(idx, FD_STEP);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let err = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(DENOM_FLOOR);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}
