//! Excited random walks on Z^d.
//!
//! The walk steps from a freshly visited site with a bias `p` towards `+e1` and
//! uniformly from an already visited site. This crate simulates it, couples it
//! with a simple random walk, detects its regeneration times, estimates its
//! speed and diffusion constant, and computes exact small-horizon laws to check
//! all of the above against.

pub mod coupling;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod lattice;
pub mod oracle;
pub mod regeneration;
pub mod rng;
pub mod scalar;
pub mod walk;

pub use coupling::{coupled_step, run_coupled, CoupledRun, CoupledState, TanTracker, Violations};
pub use error::{Error, Result};
pub use estimators::{
    estimate_sigma_direct, estimate_v_direct, estimate_v_sigma_regen, tail_curve, EstimateSummary,
    Method, RegenOptions, SeMethod, TailCurve,
};
pub use lattice::LatticeVector;
pub use oracle::{exact_distribution, exact_tan_distribution, mc_vs_oracle, Outcome, Statistic};
pub use regeneration::{
    extract_blocks, find_regenerations, RegenBlock, RegenRecord, RegenTracker, Return,
};
pub use rng::RandomSource;
pub use scalar::{parse_decimal, Exact, Real, Scalar};
pub use walk::{make_step_law, run_walk, sample_step, walk_step, Recording, StepLaw, WalkState};

/// Step laws with `f64` probabilities, as used by the simulator.
pub type FloatStepLaw = StepLaw<f64>;
/// Step laws with exact rational probabilities, as used by the oracle.
pub type ExactStepLaw = StepLaw<Exact>;
/// Estimates in double precision.
pub type Summary = EstimateSummary<f64>;
pub type FloatTailCurve = TailCurve<f64>;
pub type ExactDistribution = oracle::Distribution<Exact>;
pub type FloatDistribution = oracle::Distribution<f64>;
