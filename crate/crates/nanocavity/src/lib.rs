//! Simulation and analysis toolkit for one-sided composite nanofiber cavities.
//!
//! A composite cavity made of a nanofiber and an asymmetric defect-mode
//! grating is reduced to a one-dimensional layered stack of complex
//! effective indices. On top of that stack the crate provides:
//!
//! - a complex 2×2 transfer-matrix engine for reflection/transmission
//!   spectra and intracavity field profiles ([`tmm`]),
//! - dipole-emission observables (Purcell factor, one-sided channeling
//!   efficiency) from the two-mirror decomposition, cross-checked against a
//!   finite-difference point-source solver ([`emission`], [`helmholtz`]),
//! - Lorentzian dip fitting, coupling-regime classification and the
//!   scattering-rate free-parameter fit ([`analysis`]),
//! - closed-form cavity-QED relations (Q, finesse, one-pass loss,
//!   cooperativity, coupling rate) and loss calibration ([`cqed`]),
//! - deterministic parameter sweeps over mirror slat counts ([`sweep`]).
//!
//! All lengths are nanometres unless a name says otherwise; rates are
//! ordinary frequencies in Hz. Fields evolve as `exp(-i omega t)`, so
//! passive loss means `Im(n) > 0`.

pub mod analysis;
pub mod constants;
pub mod cqed;
pub mod design;
pub mod emission;
pub mod error;
mod grid;
pub mod helmholtz;
pub mod io;
pub mod sweep;
pub mod tmm;

pub use analysis::{classify_regime, find_dip, fit_kappa_sc, fit_lorentzian, CouplingRegime, DipGuess, KappaScFit, Regime, ResonanceFit};
pub use cqed::{calibrate_slat_loss, coupling_rate, finesse_sc, one_pass_loss, q_sc, r0_on_resonance, CqedReport, LossCalibration};
pub use design::{build_stack, detune_design, effective_indices, CavityDesign, EffectiveIndexProfile, Layer, LayerStack, Polarization};
pub use emission::{effective_length, emission_spectrum, emit, helmholtz_oracle, EmissionResult};
pub use error::Error;
pub use sweep::{design_point, optimize_one_sided, resonance_wavelength, sweep_n_in, sweep_n_out, sweep_reflection, DesignSpace, RowStatus, SweepRow, SweepTable};
pub use tmm::{intensity_profile, mirror_coefficients, reflection_spectrum, rt_left_incidence, stack_matrix, MirrorCoefficients, Spectrum, TransferMatrix};
