//! Simulation and numerics laboratory for the open-boundary asymmetric
//! simple exclusion process (ASEP).
//!
//! The crate is organised in six modules:
//!
//! - [`params`]: effective boundary constants `A, B, C, D`, phase
//!   classification, inversion of `(A, C)` targets into boundary rates, and
//!   the scaling family used near the triple point.
//! - [`engine`]: event-driven continuous-time simulation of the exclusion
//!   process on a finite segment with open boundaries, on half-line and
//!   full-line windows, with per-bond current ledgers, multi-species
//!   dynamics, and second-class particle tracking.
//! - [`coupling`]: shared-clock couplings of several chains — the basic
//!   coupling, the two-species disagreement process on the integers together
//!   with its pathwise current identity, the partially ordered multi-chain
//!   process and its diminished projection, censored runs, and coalescence
//!   times of extremal starts.
//! - [`exact`]: exact finite-`N` linear algebra — generator assembly,
//!   stationary distribution, exact stationary current, uniformized time
//!   evolution, total-variation distance and mixing times, plus structural
//!   checks (product-form stationarity, reversibility of blocking measures).
//! - [`specialfn`]: special functions — the infinite q-Pochhammer symbol,
//!   the complex log-Gamma function, the contour-integral representation of
//!   the stationary current, and the fluctuation-coefficient integrals used
//!   in the crossover asymptotics.
//! - [`harness`]: experiment drivers behind the `asep` binary — parameter
//!   sweeps, replica fan-out, least-squares fits, and CSV reporting.

pub mod coupling;
pub mod engine;
pub mod exact;
pub mod harness;
pub mod params;
pub mod specialfn;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
    #[error("convergence failure: {0}")]
    Convergence(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
