//! Behavioral model of a capacitor gain-cell analog content-addressable
//! memory (aCAM) macro, together with an attention head that uses the
//! macro's match-count similarity in place of scaled dot products.
//!
//! The crate is organised bottom-up:
//!
//! * [`cell`] - a single window-match cell: write, droop, compare.
//! * [`macro_array`] - an N x M array with row writes, broadcast search,
//!   match-line summation and ADC readout.
//! * [`variation`] - Monte Carlo sampling of per-cell offsets, confusion
//!   matrices and match-line current distributions.
//! * [`metrics`] - the energy/latency ledger and closed-form cost model.
//! * [`attention`] - hard (macro-backed) and soft (differentiable) aCAM
//!   attention, plus the scaled dot-product baseline.
//! * [`harness`] - a synthetic regression task and a training loop that
//!   compares the two similarity functions.

// Negated float comparisons are used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod cell;
pub mod config;
pub mod error;
pub mod harness;
pub mod macro_array;
pub mod metrics;
pub mod rng;
pub mod time;
pub mod variation;

pub use attention::{
    AttentionHead, HardwareModel, Normalization, QuantizerCalibration, ScoreMatrix, ScoreMode,
    SdpHead,
};
pub use cell::{CellState, DeviceConstants, LevelSet, Window, VDD};
pub use config::MacroFile;
pub use error::{Error, Result};
pub use macro_array::{Macro, MacroConfig, SearchResult};
pub use metrics::{EnergyLedger, LedgerEvent, LedgerReport};
pub use time::SimTime;
pub use variation::{ConfusionMatrix, VariationSpec};
