use std::fs::File;
use std::io::BufWriter;

use lumispec::io::{sweep_csv, write_json};
use lumispec::sweep::DistanceNorm;
use lumispec::{run_sweep, Configuration, SweepSpec};

use super::{provenance, resolve, CliError};
use crate::config::{parse_configuration, parse_sweep_parameter, ConfigError};
use crate::{plot, SweepArgs};

pub fn run(args: &SweepArgs) -> Result<u8, CliError> {
    let ctx = resolve(&args.common, true)?;
    let params = ctx.params.clone().expect("config required");
    let sweep_file = ctx.file.sweep.as_ref();

    let parameter_name = args
        .parameter
        .clone()
        .or_else(|| sweep_file.map(|s| s.parameter.clone()))
        .ok_or_else(|| ConfigError("sweep needs --parameter or a [sweep] block".into()))?;
    let parameter = parse_sweep_parameter(&parameter_name)?;
    let values = if !args.values.is_empty() {
        args.values.clone()
    } else {
        sweep_file.map(|s| s.values.clone()).unwrap_or_default()
    };
    if values.is_empty() {
        return Err(ConfigError("sweep needs --values or [sweep].values".into()).into());
    }
    let configuration: Configuration = match (
        &args.configuration,
        sweep_file.and_then(|s| s.configuration.as_deref()),
    ) {
        (Some(name), _) => parse_configuration(name)?,
        (None, Some(name)) => parse_configuration(name)?,
        (None, None) => Configuration::Coupled,
    };

    let mut spec = SweepSpec::new(parameter, values, configuration);
    if let Some(grid) = &ctx.grid {
        spec.grid = grid.build();
    }
    spec.include_curves = args.curves;
    spec.norm = DistanceNorm::Sup;

    let result = run_sweep(&params, &spec)?;

    let mut prov = provenance(Some(&params), None);
    prov.set("sweep_parameter", &result.parameter);
    prov.set("configuration", configuration);
    prov.set(
        "sweep_values",
        spec.values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" "),
    );

    let csv_path = ctx.out_dir.join("sweep.csv");
    sweep_csv(&mut BufWriter::new(File::create(&csv_path)?), Some(&prov), &result)?;
    write_json(
        &mut BufWriter::new(File::create(ctx.out_dir.join("sweep.json"))?),
        &prov,
        &result,
    )?;

    if ctx.emit_plot_script {
        let mut columns: Vec<String> =
            result.channel_labels().iter().map(|c| format!("fano_{c}")).collect();
        columns.push("ips_distance".into());
        let spans_decades = spec.values.iter().all(|v| *v > 0.0)
            && spec.values.iter().fold(f64::INFINITY, |a, v| a.min(*v)) * 100.0
                <= spec.values.iter().fold(0.0_f64, |a, v| a.max(*v));
        let script = if spans_decades {
            plot::logx_plot_script("sweep.csv", "parameter sweep", &result.parameter, &columns)
        } else {
            plot::line_plot_script("sweep.csv", "parameter sweep", &result.parameter, &columns)
        };
        std::fs::write(ctx.out_dir.join("plot_sweep.gp"), script)?;
    }

    println!(
        "sweep: {} over {} points -> {}",
        result.parameter,
        result.points.len(),
        csv_path.display()
    );
    Ok(0)
}
