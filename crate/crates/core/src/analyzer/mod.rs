//! Offline adversaries over replay output: a timing-only eavesdropper and
//! coalitions of honest-but-curious authorities.

pub mod collusion;
pub mod timing;

pub use collusion::{collusion_view, CollusionReport, LedgerSet, LEDGER_NAMES};
pub use timing::{timing_link, Observation, TimingReport, Transcript};
