use std::fs::File;
use std::io::BufWriter;
use std::str::FromStr;

use serde::Serialize;

use lumispec::io::{spectrum_csv, write_json};
use lumispec::{
    closed_form, steady_state, transfer_spectrum_with, ClosedFormKind, LinearNoiseSystem,
    SpectrumCurve,
};

use super::{fold_curve_one_sided, provenance, resolve, CliError};
use crate::config::{parse_configuration, ConfigError, GridSpec};
use crate::{plot, SpectrumArgs};

#[derive(Serialize)]
struct ClosedEntry {
    kind: String,
    curve: SpectrumCurve,
}

#[derive(Serialize)]
struct SpectrumDoc {
    configuration: String,
    normalized: bool,
    one_sided: bool,
    grid: String,
    engine: SpectrumCurve,
    closed_forms: Vec<ClosedEntry>,
    system: LinearNoiseSystem,
}

pub fn run(args: &SpectrumArgs) -> Result<u8, CliError> {
    let ctx = resolve(&args.common, true)?;
    let params = ctx.params.clone().expect("config required");
    let configuration = parse_configuration(&args.configuration)?;
    if args.raw && !args.closed_forms.is_empty() {
        return Err(ConfigError(
            "closed forms are shot-normalized; drop --raw or the --closed-form flags".into(),
        )
        .into());
    }

    let steady = steady_state(&params)?;
    for warning in steady.validity_warnings() {
        eprintln!("warning: {warning}");
    }
    let grid_spec = ctx.grid.clone().unwrap_or_default();
    let grid = grid_spec.build();

    let system = configuration.build(&params, &steady)?;
    let mut engine = transfer_spectrum_with(&system, &grid, !args.raw)?;
    let mut extras = Vec::new();
    for kind_name in &args.closed_forms {
        let kind = ClosedFormKind::from_str(kind_name).map_err(CliError::Core)?;
        extras.push((kind, closed_form(kind, &params, &grid)?));
    }
    if ctx.one_sided {
        fold_curve_one_sided(&mut engine);
        for (_, curve) in extras.iter_mut() {
            fold_curve_one_sided(curve);
        }
    }

    let mut prov = provenance(Some(&params), None);
    prov.set("configuration", configuration);
    prov.set("grid", grid_spec.describe());
    prov.set("normalized", !args.raw);
    prov.set("one_sided", ctx.one_sided);

    let csv_path = ctx.out_dir.join("spectrum.csv");
    let extra_curves: Vec<(String, &SpectrumCurve)> = extras
        .iter()
        .map(|(kind, curve)| (kind.name().to_string(), curve))
        .collect();
    spectrum_csv(
        &mut BufWriter::new(File::create(&csv_path)?),
        Some(&prov),
        &engine,
        &extra_curves,
    )?;

    let doc = SpectrumDoc {
        configuration: configuration.name().into(),
        normalized: !args.raw,
        one_sided: ctx.one_sided,
        grid: grid_spec.describe(),
        engine: engine.clone(),
        closed_forms: extras
            .into_iter()
            .map(|(kind, curve)| ClosedEntry { kind: kind.name().into(), curve })
            .collect(),
        system,
    };
    write_json(
        &mut BufWriter::new(File::create(ctx.out_dir.join("spectrum.json"))?),
        &prov,
        &doc,
    )?;

    if ctx.emit_plot_script {
        let mut columns = engine.channel_labels.clone();
        columns.extend(doc.closed_forms.iter().map(|e| e.kind.clone()));
        let script = plot::line_plot_script(
            "spectrum.csv",
            &format!("{configuration} photocurrent spectra"),
            "omega [kappa]",
            &columns,
        );
        std::fs::write(ctx.out_dir.join("plot_spectrum.gp"), script)?;
    }

    println!(
        "spectrum: {} points, configuration {configuration} -> {}",
        grid.len(),
        csv_path.display()
    );
    Ok(0)
}
