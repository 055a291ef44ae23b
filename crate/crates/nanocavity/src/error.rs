//! Error type shared by the simulation and analysis modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A design or profile violated a structural invariant.
    #[error("invalid design: {0}")]
    InvalidDesign(String),

    /// An operation argument was outside its documented domain.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// No reflection dip below the detection threshold in the window.
    #[error("no dip found in window [{lo} nm, {hi} nm]")]
    NoDipFound { lo: f64, hi: f64 },

    /// The nonlinear fit did not converge within the iteration budget.
    #[error("fit did not converge after {iterations} iterations (last step {last_step:.3e})")]
    FitDidNotConverge { iterations: usize, last_step: f64 },

    /// The fitted linewidth is below twice the local grid step.
    #[error("fit is grid-limited: fitted width {delta_lambda_nm:.3e} nm < 2 * grid step {grid_step_nm:.3e} nm")]
    GridLimited {
        delta_lambda_nm: f64,
        grid_step_nm: f64,
    },

    /// Intensity profile has no interior maximum; no confined mode.
    #[error("no confined mode: intensity maximum sits on the stack boundary")]
    NoConfinedMode,

    /// Lossless degenerate resonance: the round-trip denominator vanished.
    #[error("divergent idealization: |1 - rL*rR| = {magnitude:.3e} < 1e-12")]
    DegenerateResonance { magnitude: f64 },

    /// Loss calibration target not bracketed by the search interval.
    #[error("calibration target unreachable: kappa_sc({lo:.1e}) = {f_lo:.3} GHz, kappa_sc({hi:.1e}) = {f_hi:.3} GHz, target {target:.3} GHz")]
    CalibrationUnreachable {
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
        target: f64,
    },

    /// Finite-difference oracle failed its grid-refinement consistency check.
    #[error("oracle not converged: successive refinements differ by {delta:.3e} (tolerance {tol:.1e})")]
    OracleNotConverged { delta: f64, tol: f64 },

    /// Transfer-matrix element underflow; should not happen for passive stacks.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
