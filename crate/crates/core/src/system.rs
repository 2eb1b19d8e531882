//! Concrete linear stochastic systems for all four laser configurations.
//!
//! Every configuration is reduced to the same object: fluctuation equations
//! stored as real matrices under the convention
//!
//! ```text
//!   -i omega x = A x + B f        (Fourier domain)
//!   delta_i    = C x + E f        (photocurrent channels)
//!   <f f^T>    = D delta(t - t')  (white-noise covariance, may be indefinite)
//! ```
//!
//! The spectral engine then forms `(-i omega I - A)^{-1}` and propagates D;
//! the time-domain integrator drives `x' = A x + B f` with the same sources.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{LaserParams, SteadyState};
use crate::tolerances;

/// Serializes matrices as plain row-major nested arrays.
pub(crate) mod mat_serde {
    use nalgebra::DMatrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(serde::de::Error::custom("ragged matrix rows"));
        }
        Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
    }
}

/// Names of the state variables, noise sources, and photocurrent channels,
/// in matrix order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemLabels {
    pub states: Vec<String>,
    pub sources: Vec<String>,
    pub channels: Vec<String>,
}

impl SystemLabels {
    fn new(states: &[&str], sources: &[&str], channels: &[&str]) -> Self {
        SystemLabels {
            states: states.iter().map(|s| s.to_string()).collect(),
            sources: sources.iter().map(|s| s.to_string()).collect(),
            channels: channels.iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Index of a source by name.
    pub fn source_index(&self, name: &str) -> Option<usize> {
        self.sources.iter().position(|s| s == name)
    }
}

/// A linear fluctuation model: drift, noise-input map, output map,
/// detection feedthrough, and white-noise covariance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearNoiseSystem {
    pub state_dim: usize,
    pub noise_dim: usize,
    /// Drift matrix A (s x s).
    #[serde(with = "mat_serde")]
    pub drift: DMatrix<f64>,
    /// Noise-input map B (s x m).
    #[serde(with = "mat_serde")]
    pub input_map: DMatrix<f64>,
    /// Output map C (c x s).
    #[serde(with = "mat_serde")]
    pub output_map: DMatrix<f64>,
    /// Direct detection-noise feedthrough E (c x m).
    #[serde(with = "mat_serde")]
    pub feedthrough: DMatrix<f64>,
    /// Symmetric noise covariance D (m x m); may be indefinite.
    #[serde(with = "mat_serde")]
    pub noise_cov: DMatrix<f64>,
    /// Mean currents used for shot normalization, one per channel.
    pub shot_levels: Vec<f64>,
    pub labels: SystemLabels,
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

impl LinearNoiseSystem {
    /// Validating constructor; every builder funnels through here.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        drift: DMatrix<f64>,
        input_map: DMatrix<f64>,
        output_map: DMatrix<f64>,
        feedthrough: DMatrix<f64>,
        noise_cov: DMatrix<f64>,
        shot_levels: Vec<f64>,
        labels: SystemLabels,
    ) -> Result<Self> {
        let s = drift.nrows();
        let m = noise_cov.nrows();
        let c = output_map.nrows();
        if drift.ncols() != s || noise_cov.ncols() != m {
            return Err(Error::InvalidParams("drift and noise_cov must be square".into()));
        }
        if input_map.shape() != (s, m) {
            return Err(Error::InvalidParams(format!(
                "input_map must be {s}x{m}, got {:?}",
                input_map.shape()
            )));
        }
        if output_map.ncols() != s || feedthrough.shape() != (c, m) {
            return Err(Error::InvalidParams("output/feedthrough dimensions inconsistent".into()));
        }
        for (name, mat) in [
            ("drift", &drift),
            ("input_map", &input_map),
            ("output_map", &output_map),
            ("feedthrough", &feedthrough),
            ("noise_cov", &noise_cov),
        ] {
            if mat.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} contains non-finite entries")));
            }
        }
        let asym = max_abs(&(&noise_cov - noise_cov.transpose()));
        if asym > tolerances::COV_SYMMETRY_REL * max_abs(&noise_cov).max(1.0) {
            return Err(Error::InvalidParams(format!("noise_cov asymmetric by {asym:e}")));
        }
        if shot_levels.len() != c {
            return Err(Error::InvalidParams("one shot level per channel required".into()));
        }
        if shot_levels.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidParams(
                "shot levels must be strictly positive (every channel detects a mean current)".into(),
            ));
        }
        if labels.states.len() != s || labels.sources.len() != m || labels.channels.len() != c {
            return Err(Error::InvalidParams("label counts must match matrix dimensions".into()));
        }
        Ok(LinearNoiseSystem {
            state_dim: s,
            noise_dim: m,
            drift,
            input_map,
            output_map,
            feedthrough,
            noise_cov,
            shot_levels,
            labels,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.output_map.nrows()
    }

    /// Stable content hash of the serialized system, for ensemble metadata.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("system serialization cannot fail");
        let digest = Sha256::digest(&bytes);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn psd_class(&self) -> CovarianceClass {
        psd_classify(&self.noise_cov).expect("constructor enforced symmetry")
    }
}

/// Definiteness of a noise covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceClass {
    Psd,
    Indefinite,
}

/// Classifies a symmetric matrix as positive semidefinite or indefinite.
/// Eigenvalues within `-1e-12 * max|eig|` of zero count as nonnegative.
pub fn psd_classify(d: &DMatrix<f64>) -> Result<CovarianceClass> {
    if d.nrows() != d.ncols() {
        return Err(Error::InvalidInput("matrix must be square".into()));
    }
    let asym = max_abs(&(d - d.transpose()));
    if asym > tolerances::COV_SYMMETRY_REL * max_abs(d).max(1.0) {
        return Err(Error::InvalidInput(format!("matrix asymmetric by {asym:e}")));
    }
    let sym = (d + d.transpose()) * 0.5;
    let eigvals = sym.symmetric_eigenvalues();
    let scale = eigvals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let floor = -tolerances::PSD_EIGEN_REL * scale;
    if eigvals.iter().all(|v| *v >= floor) {
        Ok(CovarianceClass::Psd)
    } else {
        Ok(CovarianceClass::Indefinite)
    }
}

fn check_no_feedback(params: &LaserParams) -> Result<()> {
    if params.lambda_fb != 0.0 {
        return Err(Error::InvalidParams(format!(
            "configuration has no feedback path; lambda_fb = {} (use a fb_* builder)",
            params.lambda_fb
        )));
    }
    Ok(())
}

fn check_steady(params: &LaserParams, steady: &SteadyState) -> Result<()> {
    let tol = tolerances::STEADY_CONSISTENCY_REL;
    let lhs1 = params.kappa_tilde * steady.n_tilde;
    let rhs1 = params.kappa0 * steady.n;
    if (lhs1 - rhs1).abs() > tol * lhs1.abs().max(rhs1.abs()).max(1.0) {
        return Err(Error::InconsistentSteadyState(format!(
            "kappa_tilde*n_tilde = {lhs1} but kappa0*n = {rhs1}"
        )));
    }
    let lhs2 = (params.kappa + params.kappa0) * steady.n;
    if (lhs2 - params.pump_rate).abs() > tol * lhs2.abs().max(params.pump_rate).max(1.0) {
        return Err(Error::InconsistentSteadyState(format!(
            "(kappa+kappa0)*n = {lhs2} but R = {}",
            params.pump_rate
        )));
    }
    Ok(())
}

/// Covariance of the pair (F, F_tilde, S, S_tilde) for the coupled model.
fn coupled_noise_cov(params: &LaserParams, steady: &SteadyState) -> DMatrix<f64> {
    let kt_nt = params.kappa_tilde * steady.n_tilde;
    let mut d = DMatrix::zeros(4, 4);
    d[(0, 0)] = 2.0 * params.xi * (params.kappa + params.kappa0) * steady.n;
    d[(1, 1)] = -2.0 * kt_nt;
    d[(0, 1)] = kt_nt;
    d[(1, 0)] = kt_nt;
    d[(2, 2)] = params.kappa * steady.n;
    d[(3, 3)] = kt_nt;
    d
}

/// Both lasers coupled, no feedback (s = 2, sources F, F_tilde, S, S_tilde,
/// channels i and i_tilde).
pub fn build_coupled(params: &LaserParams, steady: &SteadyState) -> Result<LinearNoiseSystem> {
    params.validate()?;
    check_no_feedback(params)?;
    check_steady(params, steady)?;
    build_coupled_matrices(params, steady, 0.0)
}

/// Coupled pair with the 2-laser pump rate driven by its own photocurrent.
/// The detection source S enters the state equation with weight
/// -lambda (1 + kappa0/kappa) and still reaches channel i through E.
pub fn build_feedback_coupled(params: &LaserParams, steady: &SteadyState) -> Result<LinearNoiseSystem> {
    params.validate()?;
    check_steady(params, steady)?;
    build_coupled_matrices(params, steady, params.lambda_fb)
}

fn build_coupled_matrices(
    params: &LaserParams,
    steady: &SteadyState,
    lambda: f64,
) -> Result<LinearNoiseSystem> {
    let (k, kt, k0) = (params.kappa, params.kappa_tilde, params.kappa0);
    let drift = DMatrix::from_row_slice(2, 2, &[-(k + k0) * (1.0 + lambda), kt, k0, -2.0 * kt]);
    let mut input_map = DMatrix::zeros(2, 4);
    input_map[(0, 0)] = 1.0;
    input_map[(1, 1)] = 1.0;
    input_map[(0, 2)] = -lambda * (1.0 + k0 / k);
    let output_map = DMatrix::from_row_slice(2, 2, &[k, 0.0, 0.0, kt]);
    let mut feedthrough = DMatrix::zeros(2, 4);
    feedthrough[(0, 2)] = 1.0;
    feedthrough[(1, 3)] = 1.0;
    LinearNoiseSystem::new(
        drift,
        input_map,
        output_map,
        feedthrough,
        coupled_noise_cov(params, steady),
        vec![steady.i_bar, steady.i_tilde_bar],
        SystemLabels::new(
            &["eps", "eps_tilde"],
            &["F", "F_tilde", "S", "S_tilde"],
            &["i", "i_tilde"],
        ),
    )
}

/// The 2-laser alone (kappa0 = kappa_tilde = 0 reduction): s = 1,
/// sources F and S, channel i.
pub fn build_isolated_2l(params: &LaserParams, steady: &SteadyState) -> Result<LinearNoiseSystem> {
    params.validate()?;
    check_no_feedback(params)?;
    build_isolated_matrices(params, steady, 0.0)
}

/// The isolated 2-laser inside the feedback loop.
pub fn build_feedback_isolated(params: &LaserParams, steady: &SteadyState) -> Result<LinearNoiseSystem> {
    params.validate()?;
    build_isolated_matrices(params, steady, params.lambda_fb)
}

fn build_isolated_matrices(
    params: &LaserParams,
    steady: &SteadyState,
    lambda: f64,
) -> Result<LinearNoiseSystem> {
    let k = params.kappa;
    let n = steady.n;
    if n <= 0.0 {
        return Err(Error::InvalidParams("steady state has n <= 0".into()));
    }
    let drift = DMatrix::from_row_slice(1, 1, &[-k * (1.0 + lambda)]);
    let input_map = DMatrix::from_row_slice(1, 2, &[1.0, -lambda]);
    let output_map = DMatrix::from_row_slice(1, 1, &[k]);
    let feedthrough = DMatrix::from_row_slice(1, 2, &[0.0, 1.0]);
    let noise_cov = DMatrix::from_row_slice(2, 2, &[2.0 * params.xi * k * n, 0.0, 0.0, k * n]);
    LinearNoiseSystem::new(
        drift,
        input_map,
        output_map,
        feedthrough,
        noise_cov,
        vec![k * n],
        SystemLabels::new(&["eps"], &["F", "S"], &["i"]),
    )
}

/// The four built-in configurations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Configuration {
    Coupled,
    Isolated2l,
    FbIsolated,
    FbCoupled,
}

impl Configuration {
    pub const ALL: [Configuration; 4] = [
        Configuration::Coupled,
        Configuration::Isolated2l,
        Configuration::FbIsolated,
        Configuration::FbCoupled,
    ];

    pub fn build(&self, params: &LaserParams, steady: &SteadyState) -> Result<LinearNoiseSystem> {
        match self {
            Configuration::Coupled => build_coupled(params, steady),
            Configuration::Isolated2l => build_isolated_2l(params, steady),
            Configuration::FbIsolated => build_feedback_isolated(params, steady),
            Configuration::FbCoupled => build_feedback_coupled(params, steady),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Configuration::Coupled => "coupled",
            Configuration::Isolated2l => "isolated_2l",
            Configuration::FbIsolated => "fb_isolated",
            Configuration::FbCoupled => "fb_coupled",
        }
    }
}

impl std::fmt::Display for Configuration {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(Configuration::Coupled),
            "isolated_2l" => Ok(Configuration::Isolated2l),
            "fb_isolated" => Ok(Configuration::FbIsolated),
            "fb_coupled" => Ok(Configuration::FbCoupled),
            other => Err(Error::InvalidInput(format!(
                "unknown configuration '{other}' (expected coupled | isolated_2l | fb_isolated | fb_coupled)"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::steady_state;
    use approx::assert_relative_eq;

    fn symmetric_params() -> (LaserParams, SteadyState) {
        let p = LaserParams::new(1.0, 1.0, 1.0, 0.0, 1000.0);
        let s = steady_state(&p).unwrap();
        (p, s)
    }

    #[test]
    fn coupled_drift_at_symmetric_point() {
        let (p, s) = symmetric_params();
        let sys = build_coupled(&p, &s).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        assert_eq!(sys.drift, expected);
        assert_eq!(sys.state_dim, 2);
        assert_eq!(sys.noise_dim, 4);
        assert_eq!(sys.labels.sources, vec!["F", "F_tilde", "S", "S_tilde"]);
    }

    #[test]
    fn poissonian_pump_kills_pump_noise() {
        let (p, s) = symmetric_params();
        let sys = build_coupled(&p, &s).unwrap();
        assert_eq!(sys.noise_cov[(0, 0)], 0.0);
    }

    #[test]
    fn tilde_source_correlators_ratio() {
        // <F~F~> = -2 kappa_tilde n_tilde while <F F~> = +kappa_tilde n_tilde.
        for (xi, k0) in [(0.3, 2.0), (-0.5, 0.7), (1.0, 5.0)] {
            let p = LaserParams::new(1.0, 2.0, k0, xi, 500.0);
            let s = steady_state(&p).unwrap();
            let sys = build_coupled(&p, &s).unwrap();
            assert_relative_eq!(sys.noise_cov[(1, 1)], -2.0 * sys.noise_cov[(0, 1)]);
        }
    }

    #[test]
    fn isolated_matrices() {
        let p = LaserParams::new(1.0, 0.0, 0.0, 0.5, 100.0);
        let s = steady_state(&p).unwrap();
        let sys = build_isolated_2l(&p, &s).unwrap();
        assert_eq!(sys.drift, DMatrix::from_row_slice(1, 1, &[-1.0]));
        assert_relative_eq!(sys.noise_cov[(0, 0)], 100.0); // 2 xi kappa n
        assert_relative_eq!(sys.noise_cov[(1, 1)], 100.0); // kappa n
    }

    #[test]
    fn feedback_isolated_matrices() {
        let p = LaserParams::new(1.0, 0.0, 0.0, 0.0, 100.0).with_feedback(1.0);
        let s = steady_state(&p).unwrap();
        let sys = build_feedback_isolated(&p, &s).unwrap();
        assert_eq!(sys.drift[(0, 0)], -2.0);
        let s_idx = sys.labels.source_index("S").unwrap();
        assert_eq!(sys.input_map[(0, s_idx)], -1.0);
        assert_eq!(sys.feedthrough[(0, s_idx)], 1.0);

        let p10 = LaserParams::new(1.0, 0.0, 0.0, 0.0, 100.0).with_feedback(10.0);
        let sys10 = build_feedback_isolated(&p10, &steady_state(&p10).unwrap()).unwrap();
        assert_eq!(sys10.drift[(0, 0)], -11.0);
    }

    #[test]
    fn feedback_off_equals_plain_builders() {
        let (p, s) = symmetric_params();
        assert_eq!(build_feedback_coupled(&p, &s).unwrap(), build_coupled(&p, &s).unwrap());

        let pi = LaserParams::new(1.0, 0.0, 0.0, 0.3, 100.0);
        let si = steady_state(&pi).unwrap();
        assert_eq!(
            build_feedback_isolated(&pi, &si).unwrap(),
            build_isolated_2l(&pi, &si).unwrap()
        );
    }

    #[test]
    fn feedback_coupled_strong_coupling() {
        let p = LaserParams::new(1.0, 1.0, 100.0, 0.0, 1000.0).with_feedback(1.0);
        let s = steady_state(&p).unwrap();
        let sys = build_feedback_coupled(&p, &s).unwrap();
        assert_relative_eq!(sys.drift[(0, 0)], -202.0);
        let s_idx = sys.labels.source_index("S").unwrap();
        assert_relative_eq!(sys.input_map[(0, s_idx)], -101.0);

        // The eps_tilde row carries no feedback term.
        let p0 = LaserParams::new(1.0, 1.0, 100.0, 0.0, 1000.0);
        let sys0 = build_coupled(&p0, &steady_state(&p0).unwrap()).unwrap();
        assert_eq!(sys.drift.row(1), sys0.drift.row(1));
        assert_eq!(sys.input_map.row(1), sys0.input_map.row(1));
    }

    #[test]
    fn coupled_covariance_is_indefinite() {
        let (p, s) = symmetric_params();
        let sys = build_coupled(&p, &s).unwrap();
        assert_eq!(sys.psd_class(), CovarianceClass::Indefinite);
    }

    #[test]
    fn isolated_covariance_classes() {
        let p = LaserParams::new(1.0, 0.0, 0.0, 0.5, 1000.0);
        let s = steady_state(&p).unwrap();
        assert_eq!(build_isolated_2l(&p, &s).unwrap().psd_class(), CovarianceClass::Psd);

        let p = LaserParams::new(1.0, 0.0, 0.0, -0.5, 1000.0);
        let s = steady_state(&p).unwrap();
        assert_eq!(
            build_isolated_2l(&p, &s).unwrap().psd_class(),
            CovarianceClass::Indefinite
        );
    }

    #[test]
    fn plain_builders_reject_feedback_params() {
        let p = LaserParams::new(1.0, 1.0, 1.0, 0.0, 1000.0).with_feedback(2.0);
        let s = steady_state(&p).unwrap();
        assert!(build_coupled(&p, &s).is_err());
    }

    #[test]
    fn inconsistent_steady_state_rejected() {
        let (p, s) = symmetric_params();
        let bad = SteadyState { n: s.n * 2.0, ..s };
        assert!(matches!(build_coupled(&p, &bad), Err(Error::InconsistentSteadyState(_))));
    }

    #[test]
    fn json_round_trip_row_major() {
        let (p, s) = symmetric_params();
        let sys = build_coupled(&p, &s).unwrap();
        let json = serde_json::to_value(&sys).unwrap();
        assert_eq!(json["drift"][0][1], serde_json::json!(1.0));
        assert_eq!(json["drift"][1][0], serde_json::json!(1.0));
        let back: LinearNoiseSystem = serde_json::from_value(json).unwrap();
        assert_eq!(back, sys);
    }
}
