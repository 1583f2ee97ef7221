//! The book's code blocks, run as doctests.
//!
//! mdbook cannot execute Rust snippets against a local crate, so each
//! chapter is included here as a module doc comment and `cargo test --doc
//! -p hiertrade-book` runs every fenced block. A failing chapter points at
//! its module name.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/market-data.md")]
pub mod market_data {}

#[doc = include_str!("../../../book/src/accounting.md")]
pub mod accounting {}

#[doc = include_str!("../../../book/src/execution.md")]
pub mod execution {}

#[doc = include_str!("../../../book/src/approximator.md")]
pub mod approximator {}

#[doc = include_str!("../../../book/src/agents.md")]
pub mod agents {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
