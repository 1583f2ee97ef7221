//! Two-level trading engine.
//!
//! The library splits trading into a slow portfolio loop and a fast execution
//! loop. A stochastic weight policy reallocates wealth across assets once per
//! holding period; the share gaps it creates become execution tasks that a
//! branching Q-network works off inside a simulated limit order book, one
//! limit order per step. Settlement charges the realized commission and
//! slippage back to the portfolio, so the weight policy learns net of real
//! trading costs rather than assuming free instant rebalances.
//!
//! Module map:
//!
//! - [`market`] — bar/order-book data types, CSV ingestion, seeded synthetic
//!   market generation, normalized feature windows.
//! - [`exchange`] — the order-book matching engine and the per-task execution
//!   environment (limit orders, one-step resting, forced cleanup).
//! - [`accounting`] — portfolio weights, value drift, target quantities,
//!   trading-cost aggregation, and cost-adjusted settlement.
//! - [`nn`] — a small feed-forward approximator with explicit backprop, an
//!   Adam optimizer, and finite-difference gradient verification.
//! - [`agent`] — the high-level weight policy (softmax mean, Dirichlet
//!   sampling, entropy-augmented policy gradient) and the low-level
//!   branching dueling Q-network.
//! - [`training`] — pre-training over the task grid, the two-timescale
//!   episode loop, and high-level training on a frozen policy bank.
//! - [`eval`] — equity-curve metrics, classical rebalancing baselines, and
//!   the backtest harness.
//! - [`pipeline`] — file-level commands (data generation, training,
//!   backtesting, reporting) shared by the CLI and the test suites.
//!
//! The mdbook under `book/` walks through the same modules with runnable
//! snippets; `cargo test -p hiertrade-book --doc` keeps them honest.

pub mod accounting;
pub mod agent;
pub mod config;
pub mod error;
pub mod eval;
pub mod exchange;
pub mod harness;
pub mod market;
pub mod nn;
pub mod numeric;
pub mod pipeline;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
