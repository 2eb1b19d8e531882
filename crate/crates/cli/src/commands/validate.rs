use std::fs::File;
use std::io::BufWriter;

use serde::Serialize;

use lumispec::io::write_json;
use lumispec::spectra::validate_engine_with_fault;
use lumispec::validation::{
    mc_complex_check, mc_psd_check, random_draw_report_with_fault, standard_grid, McCheck,
};
use lumispec::{steady_state, EngineReport};

use super::{provenance, resolve, CliError, EXIT_VALIDATION_FAILURE};
use crate::ValidateArgs;

#[derive(Serialize)]
struct ValidationDoc {
    draws: usize,
    seed: u64,
    fault_injected: bool,
    draw_report: EngineReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    point_report: Option<EngineReport>,
    mc_checks: Vec<McCheck>,
    passed: bool,
}

pub fn run(args: &ValidateArgs) -> Result<u8, CliError> {
    let ctx = resolve(&args.common, false)?;
    let fault = if args.inject_fault { 0.01 } else { 0.0 };
    let seed = args.common.seed.unwrap_or(12345);
    let draws = args.draws.max(1);

    println!("engine vs closed forms, worst case over {draws} random parameter draws:");
    let draw_report = random_draw_report_with_fault(draws, seed, fault)?;
    print!("{draw_report}");

    let point_report = match &ctx.params {
        Some(params) => {
            let steady = steady_state(params)?;
            println!("\nengine vs closed forms at the configured parameter point:");
            let report = validate_engine_with_fault(params, &steady, &standard_grid(), fault)?;
            print!("{report}");
            Some(report)
        }
        None => None,
    };

    let mut mc_checks = Vec::new();
    if args.mc {
        println!("\nMonte Carlo cross-checks:");
        for check in [mc_psd_check(seed)?, mc_complex_check(seed.wrapping_add(1))?] {
            println!(
                "{}  {:<55} zero-freq {:.4} vs {:.4} (rel {:.2e}), max |z| {:.2}{} [{:.1} s]",
                if check.passed { "pass" } else { "FAIL" },
                check.name,
                check.zero_freq_mc,
                check.zero_freq_analytic,
                check.zero_freq_rel_err,
                check.max_abs_z,
                check
                    .imag_max_abs_z
                    .map(|z| format!(", imag |z| {z:.2}"))
                    .unwrap_or_default(),
                check.elapsed_s,
            );
            mc_checks.push(check);
        }
    }

    let passed = draw_report.all_exact_passed()
        && point_report.as_ref().map_or(true, EngineReport::all_exact_passed)
        && mc_checks.iter().all(|c| c.passed);

    let mut prov = provenance(ctx.params.as_ref(), Some(seed));
    prov.set("draws", draws);
    prov.set("mc", args.mc);
    let doc = ValidationDoc {
        draws,
        seed,
        fault_injected: args.inject_fault,
        draw_report,
        point_report,
        mc_checks,
        passed,
    };
    write_json(
        &mut BufWriter::new(File::create(ctx.out_dir.join("validation.json"))?),
        &prov,
        &doc,
    )?;

    if passed {
        println!("\nvalidation PASSED");
        Ok(0)
    } else {
        println!("\nvalidation FAILED");
        Ok(EXIT_VALIDATION_FAILURE)
    }
}
