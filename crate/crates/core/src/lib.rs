//! Outcome-resolved information balances for photon-counting weak
//! measurements on decaying Fock-state systems, with an independent Monte
//! Carlo photon-escape oracle for every closed-form probability.
//!
//! Time is measured throughout in the rescaled unit `tau = 2 gamma t`.

pub mod detection;
pub mod error;
pub mod identity;
pub mod infotheory;
pub mod oracle;
pub mod reversal;
pub mod state;
pub mod sweep;
pub mod verify;

pub use detection::{DetectionContext, Distribution, Outcome};
pub use error::{Error, Result};
pub use identity::{BalanceIdentity, IdentityRegistry, Selection};
pub use infotheory::{InfoLedger, InfoValue, LedgerRow, RESIDUAL_TOL};
pub use oracle::{OracleConfig, OracleEstimate};
pub use reversal::ReversalReport;
pub use state::{make_prior, AmplitudeVector, PriorState};
pub use sweep::{GridSpec, PeakReport, Spacing, TimeSeries};
pub use verify::{CheckFamily, VerifyConfig, VerifyRegistry, VerifyReport};
