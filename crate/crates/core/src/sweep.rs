//! Parameter scans quantifying the induced-photon-statistics effect, the
//! Poissonization of the pump channel, and the feedback contrast.

use serde::{Deserialize, Serialize};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{steady_state, LaserParams};
use crate::spectra::{closed_form, transfer_spectrum, ClosedFormKind, SpectrumCurve};
use crate::system::{build_coupled, Configuration};

/// Norm used for the duplication distance. The claim being tested is
/// pointwise spectral duplication, so the sup norm is the default; RMS is
/// available as a softer alternative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceNorm {
    Sup,
    L2,
}

#[derive(Clone, Debug)]
pub struct IpsOptions {
    pub norm: DistanceNorm,
    /// Downgrade the kappa = kappa_tilde precondition to a warning.
    pub allow_kappa_mismatch: bool,
}

impl Default for IpsOptions {
    fn default() -> Self {
        IpsOptions { norm: DistanceNorm::Sup, allow_kappa_mismatch: false }
    }
}

/// Distance between the three-level channel of the coupled pair and the
/// spectrum of the isolated pump laser, over the given grid (which should
/// sit inside [0, 3 kappa] where the duplication claim lives).
pub fn ips_distance(params: &LaserParams, grid: &[f64]) -> Result<f64> {
    ips_distance_with(params, grid, &IpsOptions::default())
}

pub fn ips_distance_with(params: &LaserParams, grid: &[f64], opts: &IpsOptions) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty grid".into()));
    }
    let mismatch = (params.kappa - params.kappa_tilde).abs() > 1e-9 * params.kappa;
    if mismatch && !opts.allow_kappa_mismatch {
        return Err(Error::InvalidParams(format!(
            "duplication distance requires kappa = kappa_tilde (got {} vs {})",
            params.kappa, params.kappa_tilde
        )));
    }
    let max_omega = 3.0 * params.kappa * (1.0 + 1e-9);
    if grid.iter().any(|w| *w < 0.0 || *w > max_omega) {
        return Err(Error::InvalidInput(
            "duplication grid must lie inside [0, 3 kappa]".into(),
        ));
    }

    let steady = steady_state(params)?;
    let sys = build_coupled(&LaserParams { lambda_fb: 0.0, ..params.clone() }, &steady)?;
    let engine = transfer_spectrum(&sys, grid)?;
    let three_level = engine.channel("i_tilde").expect("coupled system has i_tilde");
    let reference = closed_form(ClosedFormKind::Isolated2l, params, grid)?;
    let diffs = three_level
        .iter()
        .zip(&reference.values[0])
        .map(|(a, b)| (a - b).abs());
    Ok(match opts.norm {
        DistanceNorm::Sup => diffs.fold(0.0, f64::max),
        DistanceNorm::L2 => {
            let sum_sq: f64 = diffs.map(|d| d * d).sum();
            (sum_sq / grid.len() as f64).sqrt()
        }
    })
}

/// Shot-normalized zero-frequency spectrum of every channel of a
/// configuration: the zero-frequency Fano factors.
pub fn fano_zero(params: &LaserParams, configuration: Configuration) -> Result<Vec<(String, f64)>> {
    let steady = steady_state(params)?;
    let params = match configuration {
        Configuration::Coupled | Configuration::Isolated2l => {
            LaserParams { lambda_fb: 0.0, ..params.clone() }
        }
        _ => params.clone(),
    };
    let sys = configuration.build(&params, &steady)?;
    let curve = transfer_spectrum(&sys, &[0.0])?;
    Ok(curve
        .channel_labels
        .iter()
        .cloned()
        .zip(curve.values.iter().map(|v| v[0]))
        .collect())
}

/// Which parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    Kappa0,
    LambdaFb,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::Kappa0 => "kappa0",
            SweepParameter::LambdaFb => "lambda_fb",
        }
    }

    fn apply(&self, base: &LaserParams, value: f64) -> LaserParams {
        match self {
            SweepParameter::Kappa0 => LaserParams { kappa0: value, ..base.clone() },
            SweepParameter::LambdaFb => LaserParams { lambda_fb: value, ..base.clone() },
        }
    }
}

impl std::str::FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kappa0" => Ok(SweepParameter::Kappa0),
            "lambda_fb" => Ok(SweepParameter::LambdaFb),
            other => Err(Error::InvalidInput(format!(
                "unknown sweep parameter '{other}' (expected kappa0 | lambda_fb)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    pub configuration: Configuration,
    /// Grid for the duplication distance and the optional attached curves.
    pub grid: Vec<f64>,
    pub include_curves: bool,
    pub norm: DistanceNorm,
}

impl SweepSpec {
    pub fn new(parameter: SweepParameter, values: Vec<f64>, configuration: Configuration) -> Self {
        SweepSpec {
            parameter,
            values,
            configuration,
            grid: Vec::new(),
            include_curves: false,
            norm: DistanceNorm::Sup,
        }
    }
}

/// One sweep point: the scalar metrics at a single parameter value.
#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    /// (channel label, zero-frequency Fano factor).
    pub fano: Vec<(String, f64)>,
    /// Duplication distance, for coupled configurations with kappa = kappa_tilde.
    pub ips_distance: Option<f64>,
    pub kappa0_over_kappa: f64,
    pub lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve: Option<SpectrumCurve>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepResult {
    pub parameter: String,
    pub configuration: Configuration,
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Channel labels shared by all points (from the first point).
    pub fn channel_labels(&self) -> Vec<String> {
        self.points
            .first()
            .map(|p| p.fano.iter().map(|(l, _)| l.clone()).collect())
            .unwrap_or_default()
    }
}

/// Runs a scan; sweep points are independent and evaluated in parallel.
pub fn run_sweep(base: &LaserParams, spec: &SweepSpec) -> Result<SweepResult> {
    if spec.values.is_empty() {
        return Err(Error::InvalidInput("sweep needs at least one value".into()));
    }
    let ips_grid: Vec<f64> = if spec.grid.is_empty() {
        default_ips_grid(base.kappa)
    } else {
        spec.grid.clone()
    };
    let points: Vec<SweepPoint> = spec
        .values
        .par_iter()
        .map(|&value| -> Result<SweepPoint> {
            let params = spec.parameter.apply(base, value);
            let fano = fano_zero(&params, spec.configuration)?;
            for (label, v) in &fano {
                if !v.is_finite() {
                    return Err(Error::NumericalConsistency(format!(
                        "non-finite Fano factor on channel {label} at {} = {value}",
                        spec.parameter.name()
                    )));
                }
            }
            let kappa_matched =
                (params.kappa - params.kappa_tilde).abs() <= 1e-9 * params.kappa;
            let ips = if spec.configuration == Configuration::Coupled
                && kappa_matched
                && params.kappa0 > 0.0
            {
                Some(ips_distance_with(
                    &params,
                    &ips_grid,
                    &IpsOptions { norm: spec.norm, allow_kappa_mismatch: false },
                )?)
            } else {
                None
            };
            let curve = if spec.include_curves {
                let steady = steady_state(&params)?;
                let build_params = match spec.configuration {
                    Configuration::Coupled | Configuration::Isolated2l => {
                        LaserParams { lambda_fb: 0.0, ..params.clone() }
                    }
                    _ => params.clone(),
                };
                let sys = spec.configuration.build(&build_params, &steady)?;
                Some(transfer_spectrum(&sys, &ips_grid)?)
            } else {
                None
            };
            Ok(SweepPoint {
                value,
                fano,
                ips_distance: ips,
                kappa0_over_kappa: params.kappa0 / params.kappa,
                lambda: params.lambda_fb,
                curve,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        parameter: spec.parameter.name().to_string(),
        configuration: spec.configuration,
        points,
    })
}

/// 301 points on [0, 3 kappa], the window of the duplication claim.
pub fn default_ips_grid(kappa: f64) -> Vec<f64> {
    (0..=300).map(|i| 3.0 * kappa * i as f64 / 300.0).collect()
}
