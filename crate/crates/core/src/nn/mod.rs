//! A minimal double-precision feed-forward approximator shared by both
//! agents: explicit reverse-mode gradients on a fixed layer stack, an Adam
//! optimizer, JSON checkpoints, and a finite-difference gradient check.

mod adam;
mod checkpoint;
mod gradcheck;
mod mlp;

pub use adam::AdamState;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use gradcheck::{grad_check, grad_check_tape, squared_error_loss};
pub use mlp::{Activation, GradientTape, Mlp, Trace};
