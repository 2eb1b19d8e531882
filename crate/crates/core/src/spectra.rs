//! Shot-normalized photocurrent spectra.
//!
//! Two independent routes are provided. [`transfer_spectrum`] propagates the
//! noise covariance of any [`LinearNoiseSystem`] through its frequency-domain
//! transfer matrix `M(omega) = C (-i omega I - A)^{-1} B + E`, returning the
//! diagonal of `M D M^dagger` per channel. [`closed_form`] evaluates the
//! literal closed-form spectra of the underlying model, including the
//! small/large coupling limits and the feedback limits, so the engine can be
//! checked against them term by term ([`validate_engine`]).
//!
//! All spectra are two-sided (coefficients of `delta(omega + omega')`) and
//! divided by the channel shot level unless stated otherwise.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LaserParams, SteadyState};
use crate::system::{
    build_coupled, build_feedback_coupled, build_feedback_isolated, build_isolated_2l,
    LinearNoiseSystem,
};
use crate::tolerances;

/// A frequency grid with one shot-normalized spectral curve per channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCurve {
    /// Frequencies, in units of kappa.
    pub omega: Vec<f64>,
    /// values[channel][grid index].
    pub values: Vec<Vec<f64>>,
    pub channel_labels: Vec<String>,
    /// Present on limit formulas: what the formula assumes and how well the
    /// parameters satisfy it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validity: Option<ValidityNote>,
}

/// Assumptions behind a limit formula plus the measured smallness ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityNote {
    pub assumptions: Vec<String>,
    pub ratios: BTreeMap<String, f64>,
}

impl SpectrumCurve {
    pub fn channel(&self, label: &str) -> Option<&[f64]> {
        self.channel_labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.values[i].as_slice())
    }
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `M(omega) = C (-i omega I - A)^{-1} B + E`, solved by partial-pivot
/// elimination on the (at most 2x2) complex resolvent.
pub fn transfer_matrix(sys: &LinearNoiseSystem, omega: f64) -> Result<DMatrix<Complex64>> {
    let s = sys.state_dim;
    let mut resolvent = DMatrix::<Complex64>::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            let im = if i == j { -omega } else { 0.0 };
            resolvent[(i, j)] = Complex64::new(-sys.drift[(i, j)], im);
        }
    }
    let lu = nalgebra::linalg::LU::new(resolvent);
    let x = lu
        .solve(&complexify(&sys.input_map))
        .ok_or(Error::SingularResolvent { omega })?;
    if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::SingularResolvent { omega });
    }
    Ok(complexify(&sys.output_map) * x + complexify(&sys.feedthrough))
}

/// One spectral point: the diagonal of `M D M^dagger`, real part per channel
/// with the imaginary residue tracked separately.
fn spectral_diagonal(sys: &LinearNoiseSystem, m: &DMatrix<Complex64>, omega: f64) -> Result<Vec<f64>> {
    let channels = sys.n_channels();
    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        let mut re = 0.0;
        let mut im = 0.0;
        for j in 0..sys.noise_dim {
            for k in 0..sys.noise_dim {
                let d = sys.noise_cov[(j, k)];
                if d == 0.0 {
                    continue;
                }
                let prod = m[(c, j)] * m[(c, k)].conj();
                re += d * prod.re;
                im += d * prod.im;
            }
        }
        let scale = re.abs().max(sys.shot_levels[c]);
        if im.abs() > tolerances::SPECTRUM_IMAG_REL * scale {
            return Err(Error::NumericalConsistency(format!(
                "spectral diagonal not real at omega = {omega}, channel {}: imag {im:e} vs scale {scale:e}",
                sys.labels.channels[c]
            )));
        }
        out.push(re);
    }
    Ok(out)
}

/// Exact spectrum of a linear noise system on a frequency grid, divided by
/// the channel shot levels. Grid points are evaluated independently (and in
/// parallel); the output order follows the input grid.
pub fn transfer_spectrum(sys: &LinearNoiseSystem, grid: &[f64]) -> Result<SpectrumCurve> {
    transfer_spectrum_with(sys, grid, true)
}

/// Like [`transfer_spectrum`] with optional shot normalization.
pub fn transfer_spectrum_with(
    sys: &LinearNoiseSystem,
    grid: &[f64],
    normalize: bool,
) -> Result<SpectrumCurve> {
    if grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidInput("grid contains non-finite frequencies".into()));
    }
    let rows: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&omega| {
            let m = transfer_matrix(sys, omega)?;
            spectral_diagonal(sys, &m, omega)
        })
        .collect::<Result<_>>()?;
    let channels = sys.n_channels();
    let mut values = vec![Vec::with_capacity(grid.len()); channels];
    for row in rows {
        for (c, v) in row.into_iter().enumerate() {
            let v = if normalize { v / sys.shot_levels[c] } else { v };
            values[c].push(v);
        }
    }
    Ok(SpectrumCurve {
        omega: grid.to_vec(),
        values,
        channel_labels: sys.labels.channels.clone(),
        validity: None,
    })
}

/// Full cross-channel spectral matrices `M D M^dagger` per grid point,
/// normalized by `sqrt(shot_c shot_c')`.
pub struct CrossSpectra {
    pub omega: Vec<f64>,
    pub matrices: Vec<DMatrix<Complex64>>,
    pub channel_labels: Vec<String>,
}

pub fn cross_spectrum(sys: &LinearNoiseSystem, grid: &[f64]) -> Result<CrossSpectra> {
    let d = complexify(&sys.noise_cov);
    let matrices: Vec<DMatrix<Complex64>> = grid
        .par_iter()
        .map(|&omega| {
            let m = transfer_matrix(sys, omega)?;
            let mut full = &m * &d * m.adjoint();
            for i in 0..full.nrows() {
                for j in 0..full.ncols() {
                    full[(i, j)] /= Complex64::new((sys.shot_levels[i] * sys.shot_levels[j]).sqrt(), 0.0);
                }
            }
            Ok(full)
        })
        .collect::<Result<_>>()?;
    Ok(CrossSpectra {
        omega: grid.to_vec(),
        matrices,
        channel_labels: sys.labels.channels.clone(),
    })
}

/// The closed-form spectra of the model, as literal transcriptions.
///
/// `*_3l` kinds describe the three-level channel (i_tilde), `*_2l` kinds and
/// the isolated forms the two-level channel (i). Limit kinds attach a
/// [`ValidityNote`] instead of silently taking the limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormKind {
    /// Coupled pair, 3L channel, arbitrary rates.
    Coupled3l,
    /// Coupled pair, 2L channel, arbitrary rates.
    Coupled2l,
    /// Isolated 2-laser (kappa0 = kappa_tilde = 0 reduction).
    Isolated2l,
    /// 3L channel in the weak-excitation limit kappa0 << kappa.
    LowPump3l,
    /// 3L channel in the induced-statistics limit kappa0 >> kappa,
    /// kappa = kappa_tilde, before the final Lorentzian reduction.
    IpsLimit3l,
    /// Final Lorentzian form of the induced-statistics limit (identical in
    /// shape to the isolated 2-laser spectrum).
    IpsLorentzian3l,
    /// Isolated 2-laser in the feedback loop (Poissonian pump).
    FbIsolated,
    /// Feedback pair, 2L channel, kappa0 >> kappa, kappa = kappa_tilde, xi = 0.
    FbCoupled2l,
    /// Feedback pair, 3L channel, same limit.
    FbCoupled3l,
    /// Feedback pair, 3L channel, additionally lambda >> 1.
    FbCoupled3lHighLambda,
}

impl ClosedFormKind {
    pub const ALL: [ClosedFormKind; 10] = [
        ClosedFormKind::Coupled3l,
        ClosedFormKind::Coupled2l,
        ClosedFormKind::Isolated2l,
        ClosedFormKind::LowPump3l,
        ClosedFormKind::IpsLimit3l,
        ClosedFormKind::IpsLorentzian3l,
        ClosedFormKind::FbIsolated,
        ClosedFormKind::FbCoupled2l,
        ClosedFormKind::FbCoupled3l,
        ClosedFormKind::FbCoupled3lHighLambda,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ClosedFormKind::Coupled3l => "coupled_3l",
            ClosedFormKind::Coupled2l => "coupled_2l",
            ClosedFormKind::Isolated2l => "isolated_2l",
            ClosedFormKind::LowPump3l => "low_pump_3l",
            ClosedFormKind::IpsLimit3l => "ips_limit_3l",
            ClosedFormKind::IpsLorentzian3l => "ips_lorentzian_3l",
            ClosedFormKind::FbIsolated => "fb_isolated",
            ClosedFormKind::FbCoupled2l => "fb_coupled_2l",
            ClosedFormKind::FbCoupled3l => "fb_coupled_3l",
            ClosedFormKind::FbCoupled3lHighLambda => "fb_coupled_3l_high_lambda",
        }
    }

    /// Photocurrent channel the formula describes.
    pub fn channel(&self) -> &'static str {
        match self {
            ClosedFormKind::Coupled2l
            | ClosedFormKind::Isolated2l
            | ClosedFormKind::FbIsolated
            | ClosedFormKind::FbCoupled2l => "i",
            _ => "i_tilde",
        }
    }
}

impl std::fmt::Display for ClosedFormKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClosedFormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ClosedFormKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| Error::InvalidInput(format!("unknown closed form '{s}'")))
    }
}

/// Evaluates a closed-form spectrum on a grid. The steady state never enters:
/// after shot normalization every formula depends on rate ratios and xi only.
pub fn closed_form(kind: ClosedFormKind, params: &LaserParams, grid: &[f64]) -> Result<SpectrumCurve> {
    params.validate()?;
    let (k, kt, k0, xi, lam) = (
        params.kappa,
        params.kappa_tilde,
        params.kappa0,
        params.xi,
        params.lambda_fb,
    );

    use ClosedFormKind::*;
    match kind {
        Coupled3l | Coupled2l => {
            if kt <= 0.0 {
                return Err(Error::InvalidParams(format!(
                    "{kind} requires kappa_tilde > 0"
                )));
            }
        }
        LowPump3l => {
            if kt <= 0.0 {
                return Err(Error::InvalidParams("low_pump_3l requires kappa_tilde > 0".into()));
            }
        }
        IpsLimit3l | IpsLorentzian3l | FbCoupled2l | FbCoupled3l | FbCoupled3lHighLambda => {
            if k0 <= 0.0 {
                return Err(Error::InvalidParams(format!("{kind} requires kappa0 > 0")));
            }
        }
        Isolated2l | FbIsolated => {}
    }

    let eval = |w: f64| -> f64 {
        let w2 = w * w;
        match kind {
            Coupled3l => {
                let denom = sq(w2 - kt * (2.0 * k + k0)) + w2 * sq(2.0 * kt + k + k0);
                1.0 - 2.0 * kt * kt * (w2 + (k + k0) * (k - k0 * xi)) / denom
            }
            Coupled2l => {
                let denom = sq(w2 - kt * (2.0 * k + k0)) + w2 * sq(2.0 * kt + k + k0);
                1.0 + 2.0 * k * (k0 * kt * kt + xi * (k + k0) * (w2 + 4.0 * kt * kt)) / denom
            }
            Isolated2l | IpsLorentzian3l => 1.0 + 2.0 * xi * k * k / (w2 + k * k),
            LowPump3l => {
                let denom = sq(w2 - 2.0 * kt * k) + w2 * sq(2.0 * kt + k);
                1.0 - 2.0 * kt * kt * (w2 + k * k) / denom
            }
            IpsLimit3l => {
                let denom = sq(w2 - k * k0) + w2 * k0 * k0;
                1.0 + 2.0 * xi * k * k * (w2 + k0 * k0) / denom
            }
            FbIsolated => {
                let one_l = 1.0 + lam;
                1.0 - k * k * (one_l * one_l - 1.0) / (w2 + one_l * one_l * k * k)
            }
            FbCoupled2l => {
                let denom = w2 * sq(1.0 + lam) + k * k * sq(1.0 + 2.0 * lam);
                1.0 + (k * k / (k0 * k0)) * (-2.0 * k * k + 4.0 * lam * lam * k0 * k0) / denom
            }
            FbCoupled3l => {
                let denom = w2 * sq(1.0 + lam) + k * k * sq(1.0 + 2.0 * lam);
                1.0 - (k / k0) * (2.0 * k * k + 2.0 * lam * k * k0 - lam * lam * k0 * k0) / denom
            }
            FbCoupled3lHighLambda => 1.0 + k * k0 / (w2 + 4.0 * k * k),
        }
    };

    let values = vec![grid.iter().map(|&w| eval(w)).collect::<Vec<f64>>()];
    Ok(SpectrumCurve {
        omega: grid.to_vec(),
        values,
        channel_labels: vec![kind.channel().to_string()],
        validity: validity_note(kind, params),
    })
}

fn sq(x: f64) -> f64 {
    x * x
}

fn validity_note(kind: ClosedFormKind, params: &LaserParams) -> Option<ValidityNote> {
    let (k, kt, k0, lam) = (params.kappa, params.kappa_tilde, params.kappa0, params.lambda_fb);
    let mut ratios = BTreeMap::new();
    use ClosedFormKind::*;
    let assumptions: Vec<String> = match kind {
        Coupled3l | Coupled2l | Isolated2l | FbIsolated => return None,
        LowPump3l => {
            ratios.insert("kappa0/kappa".into(), k0 / k);
            vec!["kappa0 << kappa".into()]
        }
        IpsLimit3l => {
            ratios.insert("kappa/kappa0".into(), k / k0);
            ratios.insert("kappa_tilde/kappa".into(), kt / k);
            vec!["kappa0 >> kappa".into(), "kappa = kappa_tilde".into()]
        }
        IpsLorentzian3l => {
            ratios.insert("kappa/kappa0".into(), k / k0);
            ratios.insert("kappa_tilde/kappa".into(), kt / k);
            vec![
                "kappa0 >> kappa".into(),
                "kappa = kappa_tilde".into(),
                "omega^2 < kappa^2 << kappa*kappa0".into(),
            ]
        }
        FbCoupled2l | FbCoupled3l => {
            ratios.insert("kappa/kappa0".into(), k / k0);
            ratios.insert("kappa_tilde/kappa".into(), kt / k);
            ratios.insert("xi".into(), params.xi);
            vec![
                "kappa0 >> kappa".into(),
                "kappa = kappa_tilde".into(),
                "xi = 0 (Poissonian pump)".into(),
            ]
        }
        FbCoupled3lHighLambda => {
            ratios.insert("kappa/kappa0".into(), k / k0);
            ratios.insert("1/lambda".into(), if lam > 0.0 { 1.0 / lam } else { f64::INFINITY });
            vec![
                "kappa0 >> kappa".into(),
                "kappa = kappa_tilde".into(),
                "xi = 0 (Poissonian pump)".into(),
                "lambda >> 1".into(),
            ]
        }
    };
    Some(ValidityNote { assumptions, ratios })
}

/// One engine-vs-closed-form comparison.
#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub name: String,
    /// Exact pairs must agree to [`tolerances::EXACT_PAIR_REL`]; limit pairs
    /// report their deviation against the validity ratio instead.
    pub exact: bool,
    pub tolerance: Option<f64>,
    pub max_rel_dev: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validity_ratio: Option<(String, f64)>,
    /// Some(pass/fail) for exact pairs, None for informational limit pairs.
    pub passed: Option<bool>,
}

/// Result of cross-checking the transfer engine against every applicable
/// closed form at one parameter point.
#[derive(Clone, Debug, Serialize)]
pub struct EngineReport {
    pub checks: Vec<PairCheck>,
}

impl EngineReport {
    pub fn all_exact_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed.unwrap_or(true))
    }

    /// Folds another report in, keeping the worst deviation per pair name.
    pub fn merge_worst(&mut self, other: EngineReport) {
        for check in other.checks {
            match self.checks.iter_mut().find(|c| c.name == check.name) {
                Some(existing) => {
                    if check.max_rel_dev > existing.max_rel_dev {
                        *existing = check;
                    }
                }
                None => self.checks.push(check),
            }
        }
    }
}

impl std::fmt::Display for EngineReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in &self.checks {
            let status = match c.passed {
                Some(true) => "pass",
                Some(false) => "FAIL",
                None => "info",
            };
            write!(f, "{status}  {:<58} max rel dev {:>12.4e}", c.name, c.max_rel_dev)?;
            if let Some(tol) = c.tolerance {
                write!(f, "  (tol {tol:.1e})")?;
            }
            if let Some((name, v)) = &c.validity_ratio {
                write!(f, "  [{name} = {v:.3e}]")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Deviation relative to the shot-normalized scale: spectra live on an O(1)
/// scale after normalization, so the denominator is floored at 1 to keep the
/// metric meaningful where a curve crosses zero.
pub fn shot_relative_deviation(engine: &[f64], reference: &[f64]) -> f64 {
    engine
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max)
}

/// Cross-checks [`transfer_spectrum`] against every closed form applicable
/// at these parameters. Exact pairs must agree to 1e-10 relative; limit
/// pairs (weak/strong coupling, high feedback) are reported together with
/// their validity ratio.
pub fn validate_engine(params: &LaserParams, steady: &SteadyState, grid: &[f64]) -> Result<EngineReport> {
    validate_engine_with_fault(params, steady, grid, 0.0)
}

/// Test hook behind [`validate_engine`]: perturbs the (0,0) drift entry of
/// every built system by the given relative amount before comparing, so the
/// sensitivity of the exact pairs can be demonstrated.
pub fn validate_engine_with_fault(
    params: &LaserParams,
    steady: &SteadyState,
    grid: &[f64],
    drift_perturb: f64,
) -> Result<EngineReport> {
    let mut checks = Vec::new();
    let k = params.kappa;
    let k0 = params.kappa0;
    let kappa_matched = (params.kappa - params.kappa_tilde).abs() <= 1e-9 * params.kappa;

    let engine_channel = |sys: &mut LinearNoiseSystem, label: &str| -> Result<Vec<f64>> {
        if drift_perturb != 0.0 {
            sys.drift[(0, 0)] *= 1.0 + drift_perturb;
        }
        let curve = transfer_spectrum(sys, grid)?;
        Ok(curve.channel(label).expect("channel exists").to_vec())
    };

    let mut push_exact = |name: String, engine: &[f64], closed: &SpectrumCurve| {
        let dev = shot_relative_deviation(engine, &closed.values[0]);
        checks.push(PairCheck {
            name,
            exact: true,
            tolerance: Some(tolerances::EXACT_PAIR_REL),
            max_rel_dev: dev,
            validity_ratio: None,
            passed: Some(dev <= tolerances::EXACT_PAIR_REL),
        });
    };

    // Exact pairs: the closed forms are algebraic rearrangements of the
    // engine output, so agreement is machine-precision or the engine is broken.
    let params_nofb = LaserParams { lambda_fb: 0.0, ..params.clone() };
    if params.kappa_tilde > 0.0 && steady.i_tilde_bar > 0.0 {
        let mut sys = build_coupled(&params_nofb, steady)?;
        let e_3l = engine_channel(&mut sys, "i_tilde")?;
        let e_2l = sys_channel(&sys, grid, "i")?;
        push_exact(
            "engine(coupled).i_tilde vs closed(coupled_3l)".into(),
            &e_3l,
            &closed_form(ClosedFormKind::Coupled3l, &params_nofb, grid)?,
        );
        push_exact(
            "engine(coupled).i vs closed(coupled_2l)".into(),
            &e_2l,
            &closed_form(ClosedFormKind::Coupled2l, &params_nofb, grid)?,
        );
    }
    {
        let iso_params = LaserParams { kappa0: 0.0, kappa_tilde: 0.0, ..params_nofb.clone() };
        let iso_steady = crate::model::steady_state(&iso_params)?;
        let mut sys = build_isolated_2l(&iso_params, &iso_steady)?;
        let e = engine_channel(&mut sys, "i")?;
        push_exact(
            "engine(isolated_2l).i vs closed(isolated_2l)".into(),
            &e,
            &closed_form(ClosedFormKind::Isolated2l, &iso_params, grid)?,
        );
    }
    {
        // The feedback spectrum of the isolated laser is derived for a
        // Poissonian pump; the exact comparison pins xi = 0.
        let fb_params = LaserParams {
            kappa0: 0.0,
            kappa_tilde: 0.0,
            xi: 0.0,
            ..params.clone()
        };
        let fb_steady = crate::model::steady_state(&fb_params)?;
        let mut sys = build_feedback_isolated(&fb_params, &fb_steady)?;
        let e = engine_channel(&mut sys, "i")?;
        push_exact(
            "engine(fb_isolated, xi=0).i vs closed(fb_isolated)".into(),
            &e,
            &closed_form(ClosedFormKind::FbIsolated, &fb_params, grid)?,
        );
    }

    let mut push_limit = |name: String, engine: &[f64], closed: &SpectrumCurve, ratio: (String, f64)| {
        let dev = shot_relative_deviation(engine, &closed.values[0]);
        checks.push(PairCheck {
            name,
            exact: false,
            tolerance: None,
            max_rel_dev: dev,
            validity_ratio: Some(ratio),
            passed: None,
        });
    };

    // Limit pairs, informational: deviation should scale with the ratio.
    if params.kappa_tilde > 0.0 && steady.i_tilde_bar > 0.0 {
        let mut sys = build_coupled(&params_nofb, steady)?;
        let e_3l = engine_channel(&mut sys, "i_tilde")?;
        push_limit(
            "engine(coupled).i_tilde vs closed(low_pump_3l)".into(),
            &e_3l,
            &closed_form(ClosedFormKind::LowPump3l, &params_nofb, grid)?,
            ("kappa0/kappa".into(), k0 / k),
        );
        if kappa_matched && k0 > 0.0 {
            push_limit(
                "engine(coupled).i_tilde vs closed(ips_limit_3l)".into(),
                &e_3l,
                &closed_form(ClosedFormKind::IpsLimit3l, &params_nofb, grid)?,
                ("kappa/kappa0".into(), k / k0),
            );
            push_limit(
                "engine(coupled).i_tilde vs closed(ips_lorentzian_3l)".into(),
                &e_3l,
                &closed_form(ClosedFormKind::IpsLorentzian3l, &params_nofb, grid)?,
                ("kappa/kappa0".into(), k / k0),
            );
        }
    }
    if kappa_matched && k0 > 0.0 && params.kappa_tilde > 0.0 && steady.i_tilde_bar > 0.0 {
        let fb_params = LaserParams { xi: 0.0, ..params.clone() };
        let fb_steady = crate::model::steady_state(&fb_params)?;
        let mut sys = build_feedback_coupled(&fb_params, &fb_steady)?;
        let e_2l = engine_channel(&mut sys, "i")?;
        let e_3l = sys_channel(&sys, grid, "i_tilde")?;
        push_limit(
            "engine(fb_coupled, xi=0).i vs closed(fb_coupled_2l)".into(),
            &e_2l,
            &closed_form(ClosedFormKind::FbCoupled2l, &fb_params, grid)?,
            ("kappa/kappa0".into(), k / k0),
        );
        push_limit(
            "engine(fb_coupled, xi=0).i_tilde vs closed(fb_coupled_3l)".into(),
            &e_3l,
            &closed_form(ClosedFormKind::FbCoupled3l, &fb_params, grid)?,
            ("kappa/kappa0".into(), k / k0),
        );
        if params.lambda_fb > 0.0 {
            push_limit(
                "engine(fb_coupled, xi=0).i_tilde vs closed(fb_coupled_3l_high_lambda)".into(),
                &e_3l,
                &closed_form(ClosedFormKind::FbCoupled3lHighLambda, &fb_params, grid)?,
                ("1/lambda".into(), 1.0 / params.lambda_fb),
            );
        }
    }

    Ok(EngineReport { checks })
}

fn sys_channel(sys: &LinearNoiseSystem, grid: &[f64], label: &str) -> Result<Vec<f64>> {
    let curve = transfer_spectrum(sys, grid)?;
    Ok(curve.channel(label).expect("channel exists").to_vec())
}
