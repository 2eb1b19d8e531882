//! Intensity-noise engine for a three-level laser coherently pumped by a
//! two-level laser.
//!
//! The photon-number fluctuations of both cavities form a linear Langevin
//! system driven by white sources with a prescribed — and, for the coupled
//! pair, indefinite — covariance. Shot-normalized photocurrent spectra come
//! out two independent ways:
//!
//! * analytically, by propagating the covariance through the transfer
//!   matrix `M(omega) = C (-i omega I - A)^{-1} B + E`
//!   ([`spectra::transfer_spectrum`]), checked term by term against the
//!   closed-form spectra ([`spectra::closed_form`]);
//! * numerically, by Euler-Maruyama integration ([`montecarlo::simulate`])
//!   — with complex trajectories where the covariance is indefinite — and
//!   spectral estimation of the sampled currents ([`dsp`]).
//!
//! [`sweep`] quantifies the regime where the three-level output duplicates
//! the pump laser's photon statistics, and the feedback builders in
//! [`system`] model the pump laser inside an optoelectronic feedback loop.

pub mod dsp;
pub mod error;
pub mod io;
pub mod model;
pub mod montecarlo;
pub mod spectra;
pub mod sweep;
pub mod system;
pub mod tolerances;
pub mod validation;

pub use dsp::{ensemble_spectrum, welch_ensemble, welch_psd, PsdEstimate, TransformOpts, WelchOpts, Window};
pub use error::{Error, Result};
pub use model::{
    kappa0_from_micro, steady_state, xi_from_pump, LaserParams, MicroParams, PumpClass, SteadyState,
};
pub use montecarlo::{
    factor_covariance, simulate, FactorMode, NoiseFactorization, SimOptions, TrajectoryEnsemble,
};
pub use spectra::{
    closed_form, cross_spectrum, transfer_spectrum, transfer_spectrum_with, validate_engine,
    ClosedFormKind, EngineReport, SpectrumCurve,
};
pub use sweep::{
    fano_zero, ips_distance, run_sweep, DistanceNorm, SweepParameter, SweepResult, SweepSpec,
};
pub use system::{
    build_coupled, build_feedback_coupled, build_feedback_isolated, build_isolated_2l,
    psd_classify, Configuration, CovarianceClass, LinearNoiseSystem,
};
