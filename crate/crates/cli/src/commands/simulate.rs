use std::fs::File;
use std::io::BufWriter;

use serde::Serialize;

use lumispec::dsp::{ensemble_spectrum, welch_ensemble, TransformOpts, WelchOpts, Window};
use lumispec::io::{psd_csv, write_json};
use lumispec::montecarlo::EnsembleMeta;
use lumispec::{
    simulate, steady_state, FactorMode, LinearNoiseSystem, PsdEstimate, SimOptions,
};

use super::{fold_psd_one_sided, provenance, resolve, retain_psd_bins, CliError};
use crate::config::{parse_configuration, ConfigError, GridSpec};
use crate::{plot, SimulateArgs};

#[derive(Serialize)]
struct SimulateDoc {
    configuration: String,
    estimator: String,
    normalized: bool,
    one_sided: bool,
    budget: SimOptions,
    estimate: PsdEstimate,
    ensemble: EnsembleMeta,
    system: LinearNoiseSystem,
}

fn default_mc_grid() -> GridSpec {
    GridSpec { omega_min: 0.0, omega_max: 3.0, n_points: 61, log: false }
}

pub fn run(args: &SimulateArgs) -> Result<u8, CliError> {
    let ctx = resolve(&args.common, true)?;
    let params = ctx.params.clone().expect("config required");
    let configuration = parse_configuration(&args.configuration)?;
    let steady = steady_state(&params)?;
    for warning in steady.validity_warnings() {
        eprintln!("warning: {warning}");
    }
    let system = configuration.build(&params, &steady)?;

    let mc = ctx.file.mc.as_ref();
    let dt = args.dt.or(mc.and_then(|m| m.dt)).unwrap_or(1e-3);
    let t_max = args.t_max.or(mc.and_then(|m| m.t_max)).unwrap_or(1000.0);
    let n_traj = args.n_traj.or(mc.and_then(|m| m.n_traj)).unwrap_or(64);
    let seed = args.common.seed.or(mc.and_then(|m| m.seed)).unwrap_or(1);
    let stride = args.record_stride.or(mc.and_then(|m| m.record_stride)).unwrap_or(1);
    let record_states = mc
        .and_then(|m| m.record_states)
        .unwrap_or(args.dump_trajectories.is_some());

    let mut opts = SimOptions::new(dt, t_max, n_traj, seed).with_stride(stride);
    opts.record_states = record_states;
    let ensemble = simulate(&system, &opts)?;
    for warning in &ensemble.meta.warnings {
        eprintln!("warning: {warning}");
    }

    let normalize = !args.raw;
    let grid_spec = ctx.grid.clone().unwrap_or_else(default_mc_grid);
    let nyquist = std::f64::consts::PI / ensemble.meta.dt_record;

    let estimator = match args.estimator.as_str() {
        "auto" => match ensemble.meta.mode {
            FactorMode::Real => "welch",
            FactorMode::Complex => "transform",
        },
        "welch" | "transform" => args.estimator.as_str(),
        other => {
            return Err(ConfigError(format!(
                "unknown estimator '{other}' (expected auto | welch | transform)"
            ))
            .into());
        }
    };

    let mut estimate = match estimator {
        "welch" => {
            let n_rec = ensemble.n_recorded();
            let segment_len = args
                .segment_len
                .unwrap_or_else(|| (n_rec / 8).clamp(16, 4096).min(n_rec));
            let opts = WelchOpts { segment_len, overlap: 0.5, window: Window::Hann };
            let mut est = welch_ensemble(&ensemble, &opts, normalize)?;
            retain_psd_bins(&mut est, |w| w.abs() <= grid_spec.omega_max);
            est
        }
        _ => {
            let mut grid = grid_spec.build();
            let len_before = grid.len();
            grid.retain(|w| *w < nyquist);
            if grid.len() < len_before {
                eprintln!(
                    "warning: dropped {} grid points beyond the recorded Nyquist frequency {nyquist:.3}",
                    len_before - grid.len()
                );
            }
            if grid.is_empty() {
                return Err(ConfigError("grid lies entirely beyond Nyquist".into()).into());
            }
            let opts = TransformOpts {
                segments: args.segments.unwrap_or(8),
                overlap: 0.5,
                window: Window::Hann,
            };
            ensemble_spectrum(&ensemble, &grid, &opts, normalize)?
        }
    };
    if ctx.one_sided {
        fold_psd_one_sided(&mut estimate);
    }

    let mut prov = provenance(Some(&params), Some(seed));
    prov.set("configuration", configuration);
    prov.set("estimator", estimator);
    prov.set("dt", dt);
    prov.set("t_max", t_max);
    prov.set("n_traj", n_traj);
    prov.set("record_stride", stride);
    prov.set("normalized", normalize);
    prov.set("one_sided", ctx.one_sided);

    let csv_path = ctx.out_dir.join("mc_spectrum.csv");
    psd_csv(&mut BufWriter::new(File::create(&csv_path)?), Some(&prov), &estimate)?;

    if let Some(n) = args.dump_trajectories {
        for k in 0..n.min(ensemble.meta.n_traj) {
            let path = ctx.out_dir.join(format!("trajectory_{k:03}.csv"));
            ensemble.dump_trajectory_csv(k, &mut BufWriter::new(File::create(path)?))?;
        }
    }

    let doc = SimulateDoc {
        configuration: configuration.name().into(),
        estimator: estimator.into(),
        normalized: normalize,
        one_sided: ctx.one_sided,
        budget: opts,
        estimate: estimate.clone(),
        ensemble: ensemble.meta.clone(),
        system,
    };
    write_json(
        &mut BufWriter::new(File::create(ctx.out_dir.join("mc_spectrum.json"))?),
        &prov,
        &doc,
    )?;

    if ctx.emit_plot_script {
        let mut columns = Vec::new();
        for label in &estimate.channel_labels {
            columns.push(label.clone());
            columns.push(format!("{label}_stderr"));
        }
        if estimate.imag_mean.is_some() {
            for label in &estimate.channel_labels {
                columns.push(format!("{label}_imag"));
                columns.push(format!("{label}_imag_stderr"));
            }
        }
        let script = plot::line_plot_script(
            "mc_spectrum.csv",
            &format!("{configuration} Monte Carlo spectra ({estimator})"),
            "omega [kappa]",
            &columns,
        );
        std::fs::write(ctx.out_dir.join("plot_mc_spectrum.gp"), script)?;
    }

    println!(
        "simulate: {} trajectories x {} samples ({:?} mode, {estimator}) -> {}",
        ensemble.meta.n_traj,
        ensemble.n_recorded(),
        ensemble.meta.mode,
        csv_path.display()
    );
    Ok(0)
}
