//! Numerical thresholds used throughout the crate, kept in one place so the
//! validation suites and the library agree on every bound.

/// Engine vs. closed-form spectra on exact pairs: max relative deviation.
/// Both routes are algebraically identical; 1e-10 leaves two orders of
/// margin over accumulated f64 rounding in the 2x2 complex solves.
pub const EXACT_PAIR_REL: f64 = 1e-10;

/// Noise covariance symmetry, |D - D^T| relative to max(1, |D|).
pub const COV_SYMMETRY_REL: f64 = 1e-14;

/// Eigenvalues above `-PSD_EIGEN_REL * max|eig|` count as nonnegative when
/// classifying a covariance.
pub const PSD_EIGEN_REL: f64 = 1e-12;

/// Noise factor reconstruction: max|L L^T - D| <= this * max(1, max|D|).
pub const FACTOR_RESIDUAL_REL: f64 = 1e-12;

/// Imaginary residue allowed on a transfer-spectrum diagonal, relative to
/// max(|value|, shot level). Larger residues indicate a broken engine.
pub const SPECTRUM_IMAG_REL: f64 = 1e-10;

/// Steady-state balance identities, relative.
pub const STEADY_IDENTITY_REL: f64 = 1e-12;

/// Consistency demanded between a caller-supplied steady state and the
/// parameters it was derived from.
pub const STEADY_CONSISTENCY_REL: f64 = 1e-9;

/// Warn when a mean intracavity photon number drops below this; the
/// linearized fluctuation model assumes large photon numbers.
pub const PHOTON_NUMBER_WARN: f64 = 100.0;

/// Micro-parameter validity: gamma2_tilde / gamma1_tilde must not exceed
/// this (default; callers may tighten or relax).
pub const MICRO_GAMMA_RATIO_MAX: f64 = 0.1;

/// Integrator step bound: dt <= EM_DT_SAFETY / spectral radius of the drift.
pub const EM_DT_SAFETY: f64 = 0.01;

/// Burn-in discarded before recording, in units of the slowest relaxation
/// time of the drift.
pub const MC_BURN_IN_RELAX_TIMES: f64 = 10.0;

/// Warn when the recorded duration is shorter than this many relaxation
/// times.
pub const MC_RELAX_TIMES_WARN: f64 = 50.0;

/// Shot-floor check: normalized spectra must be within this of 1 when
/// evaluated at SHOT_FLOOR_OMEGA_FACTOR times the largest rate.
pub const SHOT_FLOOR_REL: f64 = 0.01;
pub const SHOT_FLOOR_OMEGA_FACTOR: f64 = 1e3;
