//! Market data: daily bars, order-book snapshots, CSV ingestion, synthetic
//! market generation, and the normalized feature windows both policy levels
//! consume.
//!
//! All types here are immutable once constructed; loaders and generators are
//! the only writers.

mod csv;
mod features;
mod synthetic;
mod types;

pub use csv::{load_lob, load_ohlcv, save_lob, save_ohlcv};
pub use features::{make_feature_window, make_lob_window, FeatureWindow, LobWindow, FEATURES_PER_BAR};
pub use synthetic::{gen_synthetic_market, SyntheticMarketConfig};
pub use types::{Bar, BarSeries, LobLevel, LobSnapshot, LobSeries};
