pub mod simulate;
pub mod spectrum;
pub mod sweep;
pub mod validate;

use std::path::PathBuf;

use lumispec::io::Provenance;
use lumispec::{LaserParams, PsdEstimate, SpectrumCurve};

use crate::config::{params_echo, prepare_out_dir, ConfigError, FileConfig, GridSpec};
use crate::CommonArgs;

/// Exit-code contract: 0 success, 1 validation failure, 2 config error,
/// 3 numerical error.
pub const EXIT_VALIDATION_FAILURE: u8 = 1;
pub const EXIT_CONFIG_ERROR: u8 = 2;
pub const EXIT_NUMERICAL_ERROR: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Core(lumispec::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG_ERROR,
            CliError::Core(e) => match e {
                lumispec::Error::SingularResolvent { .. }
                | lumispec::Error::NumericalConsistency(_)
                | lumispec::Error::UnstableDrift(_) => EXIT_NUMERICAL_ERROR,
                _ => EXIT_CONFIG_ERROR,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<lumispec::Error> for CliError {
    fn from(e: lumispec::Error) -> Self {
        CliError::Core(e)
    }
}

/// Settings shared by all commands after merging the config file with the
/// command-line overrides (flags win).
pub(crate) struct RunContext {
    pub file: FileConfig,
    pub params: Option<LaserParams>,
    pub out_dir: PathBuf,
    /// None when neither a flag nor the file specified a grid; each command
    /// picks its own default then.
    pub grid: Option<GridSpec>,
    pub one_sided: bool,
    pub emit_plot_script: bool,
}

pub(crate) fn resolve(common: &CommonArgs, require_config: bool) -> Result<RunContext, CliError> {
    let file = match &common.config {
        Some(path) => FileConfig::load(path)?,
        None if require_config => {
            return Err(ConfigError("--config PATH is required for this command".into()).into());
        }
        None => FileConfig::default(),
    };
    let params = if common.config.is_some() {
        let params = file.laser_params()?;
        for warning in params.validate().unwrap_or_default() {
            eprintln!("warning: {warning}");
        }
        Some(params)
    } else {
        None
    };
    let out_dir = common
        .out
        .clone()
        .or_else(|| file.output.as_ref().and_then(|o| o.dir.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    prepare_out_dir(&out_dir)?;
    let grid = match (&common.grid, &file.grid) {
        (Some(spec), _) => Some(spec.clone()),
        (None, Some(g)) => Some(GridSpec::from(g)),
        (None, None) => None,
    };
    if let Some(spec) = &grid {
        spec.validate()?;
    }
    let one_sided = common.one_sided
        || file.output.as_ref().and_then(|o| o.one_sided).unwrap_or(false);
    let emit_plot_script = common.emit_plot_script
        || file.output.as_ref().and_then(|o| o.emit_plot_script).unwrap_or(false);
    Ok(RunContext { file, params, out_dir, grid, one_sided, emit_plot_script })
}

pub(crate) fn provenance(params: Option<&LaserParams>, seed: Option<u64>) -> Provenance {
    let command: Vec<String> = std::env::args().collect();
    let mut prov = Provenance::new("lumispec", env!("CARGO_PKG_VERSION"))
        .with_command(&command.join(" "));
    if let Some(seed) = seed {
        prov = prov.with_seed(seed);
    }
    if let Some(p) = params {
        prov.config.extend(params_echo(p));
    }
    prov
}

/// Doubles the omega > 0 values of a curve evaluated on a nonnegative grid.
pub(crate) fn fold_curve_one_sided(curve: &mut SpectrumCurve) {
    for (i, &w) in curve.omega.iter().enumerate() {
        if w > 0.0 {
            for channel in curve.values.iter_mut() {
                channel[i] *= 2.0;
            }
        }
    }
}

/// Keeps only the bins selected by `pred`, preserving order.
pub(crate) fn retain_psd_bins(est: &mut PsdEstimate, pred: impl Fn(f64) -> bool) {
    let keep: Vec<usize> = est
        .omega
        .iter()
        .enumerate()
        .filter(|(_, w)| pred(**w))
        .map(|(i, _)| i)
        .collect();
    let pick = |v: &Vec<f64>| -> Vec<f64> { keep.iter().map(|&i| v[i]).collect() };
    est.omega = pick(&est.omega);
    for series in [&mut est.mean, &mut est.stderr] {
        for channel in series.iter_mut() {
            *channel = pick(channel);
        }
    }
    for series in [&mut est.imag_mean, &mut est.imag_stderr].into_iter().flatten() {
        for channel in series.iter_mut() {
            *channel = pick(channel);
        }
    }
}

/// One-sided fold for estimates on two-sided grids: drop omega < 0, double
/// omega > 0.
pub(crate) fn fold_psd_one_sided(est: &mut PsdEstimate) {
    retain_psd_bins(est, |w| w >= 0.0);
    for (i, &w) in est.omega.clone().iter().enumerate() {
        if w > 0.0 {
            for series in [&mut est.mean, &mut est.stderr] {
                for channel in series.iter_mut() {
                    channel[i] *= 2.0;
                }
            }
            for series in [&mut est.imag_mean, &mut est.imag_stderr].into_iter().flatten() {
                for channel in series.iter_mut() {
                    channel[i] *= 2.0;
                }
            }
        }
    }
}
