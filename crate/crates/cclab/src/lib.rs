//! Finite classical probability spaces and the machinery to build and audit
//! common-cause explanations of two-wing spin-correlation experiments.
//!
//! The crate has three layers:
//!
//! * [`prob`] — finite measure spaces, event algebra, extensions and
//!   measure-preserving relabelings, generic over exact-rational or float
//!   arithmetic ([`scalar::Scalar`]).
//! * [`rpcc`], [`bell`], [`quantum`] — the Reichenbach screening-off
//!   criterion, Bell-type condition checkers (factorizability, outcome /
//!   parameter / measurement independence, CHSH, Wigner) and an independent
//!   singlet-state oracle.
//! * [`model`], [`sim`] — synthesis of an explicit measurement-dependent
//!   common-cause measure reproducing singlet statistics, a full audit of it,
//!   and seeded Monte-Carlo verification.
//!
//! The `cclab` binary exposes all of it as subcommands; see the README.

pub mod bell;
pub mod cli;
pub mod dict;
pub mod io;
pub mod model;
pub mod prob;
pub mod quantum;
pub mod rpcc;
pub mod scalar;
pub mod sim;
pub mod solver;

/// Crate-wide error type.
///
/// The CLI maps these onto its exit-code contract: input and IO problems are
/// exit 3, solver infeasibility is exit 2. Criterion failures are verdicts,
/// not errors, and never surface here.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unknown atom name: {0}")]
    UnknownAtom(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("conditioning event has zero probability: {0}")]
    NullConditioning(String),

    #[error("degenerate common-cause candidate ({0}): p(C) must lie strictly between 0 and 1")]
    DegenerateCause(String),

    #[error("space too large for exhaustive search: {atoms} atoms (limit {limit})")]
    SpaceTooLarge { atoms: usize, limit: usize },

    #[error("feasibility search failed: {detail} (best residual {best_residual:.3e})")]
    Infeasible { best_residual: f64, detail: String },

    #[error("sample does not cover a required setting pair: {0}")]
    Coverage(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
