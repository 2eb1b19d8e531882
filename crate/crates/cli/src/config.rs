//! TOML run configuration and its resolution against command-line overrides.
//!
//! Documented keys (all rates in units of kappa):
//!
//! ```toml
//! kappa = 1.0          # optional, defaults to the time unit 1.0
//! kappa_tilde = 1.0
//! kappa0 = 1.0         # or derive it from [micro]
//! xi = 0.0             # exactly one of xi / p, or both if p = -2 xi
//! # p = 0.0
//! pump_rate = 2000.0
//! lambda_fb = 0.0
//!
//! [micro]              # optional; kappa0 = gamma2_tilde (g13/g12)^2 N_tilde / n_tilde
//! gamma2_tilde = 0.1
//! gamma1_tilde = 10.0
//! g13_tilde = 1.0
//! g12_tilde = 1.0
//! N_tilde = 1000.0
//! n_tilde = 100.0
//!
//! [grid]
//! omega_min = 0.0
//! omega_max = 10.0
//! n_points = 512
//! scale = "linear"     # or "log"
//!
//! [mc]
//! dt = 0.01
//! t_max = 1000.0
//! n_traj = 64
//! seed = 1
//! record_stride = 1
//!
//! [sweep]
//! parameter = "kappa0"         # or "lambda_fb"
//! values = [10.0, 100.0, 1000.0]
//! configuration = "coupled"
//!
//! [output]
//! dir = "out"
//! one_sided = false
//! emit_plot_script = false
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use lumispec::{kappa0_from_micro, Configuration, LaserParams, MicroParams, SweepParameter};

/// A configuration problem; always maps to exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kappa: Option<f64>,
    pub kappa_tilde: Option<f64>,
    pub kappa0: Option<f64>,
    pub xi: Option<f64>,
    pub p: Option<f64>,
    pub pump_rate: Option<f64>,
    pub lambda_fb: Option<f64>,
    pub micro: Option<MicroParams>,
    pub grid: Option<GridConfig>,
    pub mc: Option<McConfig>,
    pub sweep: Option<SweepConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    pub scale: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub n_traj: Option<usize>,
    pub seed: Option<u64>,
    pub record_stride: Option<usize>,
    pub record_states: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
    pub configuration: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub one_sided: Option<bool>,
    pub emit_plot_script: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    /// Builds the laser parameters, enforcing the xi/p and kappa0/micro
    /// exclusivity rules.
    pub fn laser_params(&self) -> Result<LaserParams, ConfigError> {
        let xi = match (self.xi, self.p) {
            (Some(xi), None) => xi,
            (None, Some(p)) => -p / 2.0,
            (Some(xi), Some(p)) => {
                if (p + 2.0 * xi).abs() > 1e-9 * p.abs().max(2.0 * xi.abs()).max(1.0) {
                    return Err(ConfigError(format!(
                        "xi = {xi} and p = {p} are inconsistent (p must equal -2 xi)"
                    )));
                }
                xi
            }
            (None, None) => {
                return Err(ConfigError("one of xi or p is required".into()));
            }
        };
        let kappa0 = match (self.kappa0, &self.micro) {
            (Some(k0), None) => k0,
            (None, Some(micro)) => kappa0_from_micro(micro)
                .map_err(|e| ConfigError(format!("cannot derive kappa0 from micro: {e}")))?,
            (Some(k0), Some(micro)) => {
                let derived = kappa0_from_micro(micro)
                    .map_err(|e| ConfigError(format!("cannot derive kappa0 from micro: {e}")))?;
                if (derived - k0).abs() > 1e-6 * k0.abs().max(derived.abs()) {
                    return Err(ConfigError(format!(
                        "kappa0 = {k0} disagrees with the micro-derived value {derived}"
                    )));
                }
                k0
            }
            (None, None) => 0.0,
        };
        let pump_rate = self
            .pump_rate
            .ok_or_else(|| ConfigError("pump_rate is required".into()))?;
        let mut params = LaserParams::new(
            self.kappa.unwrap_or(1.0),
            self.kappa_tilde.unwrap_or(0.0),
            kappa0,
            xi,
            pump_rate,
        )
        .with_feedback(self.lambda_fb.unwrap_or(0.0));
        params.micro = self.micro.clone();
        params
            .validate()
            .map_err(|e| ConfigError(format!("invalid parameters: {e}")))?;
        Ok(params)
    }
}

/// Frequency grid specification; the CLI syntax is `min:max:n[:log]`.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_points: usize,
    pub log: bool,
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_points < 2 {
            return Err(ConfigError("grid needs n_points >= 2".into()));
        }
        if !(self.omega_min.is_finite() && self.omega_max.is_finite()) {
            return Err(ConfigError("grid bounds must be finite".into()));
        }
        if self.omega_min < 0.0 || self.omega_max <= self.omega_min {
            return Err(ConfigError(
                "grid requires omega_max > omega_min >= 0".into(),
            ));
        }
        if self.log && self.omega_min <= 0.0 {
            return Err(ConfigError("log grids need omega_min > 0".into()));
        }
        Ok(())
    }

    pub fn build(&self) -> Vec<f64> {
        let n = self.n_points;
        if self.log {
            let (a, b) = (self.omega_min.ln(), self.omega_max.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        } else {
            (0..n)
                .map(|i| {
                    self.omega_min
                        + (self.omega_max - self.omega_min) * i as f64 / (n - 1) as f64
                })
                .collect()
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "{}:{}:{}{}",
            self.omega_min,
            self.omega_max,
            self.n_points,
            if self.log { ":log" } else { "" }
        )
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { omega_min: 0.0, omega_max: 10.0, n_points: 512, log: false }
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 && parts.len() != 4 {
            return Err(format!("grid '{s}' must be min:max:n[:log]"));
        }
        let omega_min: f64 = parts[0].parse().map_err(|e| format!("bad omega_min: {e}"))?;
        let omega_max: f64 = parts[1].parse().map_err(|e| format!("bad omega_max: {e}"))?;
        let n_points: usize = parts[2].parse().map_err(|e| format!("bad n_points: {e}"))?;
        let log = match parts.get(3) {
            None => false,
            Some(&"log") => true,
            Some(other) => return Err(format!("unknown grid scale '{other}' (expected log)")),
        };
        Ok(GridSpec { omega_min, omega_max, n_points, log })
    }
}

impl From<&GridConfig> for GridSpec {
    fn from(g: &GridConfig) -> Self {
        GridSpec {
            omega_min: g.omega_min,
            omega_max: g.omega_max,
            n_points: g.n_points,
            log: matches!(g.scale.as_deref(), Some("log")),
        }
    }
}

pub fn parse_configuration(s: &str) -> Result<Configuration, ConfigError> {
    Configuration::from_str(s).map_err(|e| ConfigError(e.to_string()))
}

pub fn parse_sweep_parameter(s: &str) -> Result<SweepParameter, ConfigError> {
    SweepParameter::from_str(s).map_err(|e| ConfigError(e.to_string()))
}

/// Ensures the output directory exists and is writable before any
/// computation starts.
pub fn prepare_out_dir(dir: &Path) -> Result<(), ConfigError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| ConfigError(format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".write_probe");
    std::fs::write(&probe, b"ok")
        .map_err(|e| ConfigError(format!("{} is not writable: {e}", dir.display())))?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

/// Echo of the effective physical parameters for provenance blocks.
pub fn params_echo(params: &LaserParams) -> BTreeMap<String, String> {
    let mut map = BTreeMap::new();
    map.insert("kappa".into(), params.kappa.to_string());
    map.insert("kappa_tilde".into(), params.kappa_tilde.to_string());
    map.insert("kappa0".into(), params.kappa0.to_string());
    map.insert("xi".into(), params.xi.to_string());
    map.insert("p".into(), params.p().to_string());
    map.insert("pump_rate".into(), params.pump_rate.to_string());
    map.insert("lambda_fb".into(), params.lambda_fb.to_string());
    if let Some(micro) = &params.micro {
        map.insert("micro.gamma2_tilde".into(), micro.gamma2_tilde.to_string());
        map.insert("micro.gamma1_tilde".into(), micro.gamma1_tilde.to_string());
        map.insert("micro.g13_tilde".into(), micro.g13_tilde.to_string());
        map.insert("micro.g12_tilde".into(), micro.g12_tilde.to_string());
        map.insert("micro.N_tilde".into(), micro.atom_count.to_string());
        map.insert("micro.n_tilde".into(), micro.n_tilde.to_string());
    }
    map
}
