//! CSV and JSON writers with embedded run provenance.
//!
//! CSV files are gnuplot-ready: `#` provenance comments, a header row, comma
//! separators, '.' decimal points, LF line endings. Floats print in Rust's
//! shortest round-trip form, so identical values give identical bytes.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::dsp::PsdEstimate;
use crate::error::{Error, Result};
use crate::spectra::SpectrumCurve;
use crate::sweep::SweepResult;

/// Full reproduction record for an output file: tool version, seed, and the
/// effective configuration, echoed key by key.
#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(tool: &str, version: &str) -> Self {
        Provenance {
            tool: tool.into(),
            version: version.into(),
            command: None,
            seed: None,
            config: BTreeMap::new(),
        }
    }

    pub fn with_command(mut self, command: &str) -> Self {
        self.command = Some(command.into());
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) {
        self.config.insert(key.into(), value.to_string());
    }

    fn comment_lines(&self) -> Vec<String> {
        let mut lines = vec![format!("# tool: {} {}", self.tool, self.version)];
        if let Some(cmd) = &self.command {
            lines.push(format!("# command: {cmd}"));
        }
        if let Some(seed) = self.seed {
            lines.push(format!("# seed: {seed}"));
        }
        for (k, v) in &self.config {
            lines.push(format!("# {k}: {v}"));
        }
        lines
    }
}

/// Writes a plain numeric table.
pub fn write_csv<W: Write>(
    w: &mut W,
    prov: Option<&Provenance>,
    header: &[String],
    columns: &[&[f64]],
) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::InvalidInput("one header per column required".into()));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::InvalidInput("column length mismatch".into()));
    }
    if let Some(p) = prov {
        for line in p.comment_lines() {
            writeln!(w, "{line}")?;
        }
    }
    writeln!(w, "{}", header.join(","))?;
    let mut line = String::new();
    for r in 0..rows {
        line.clear();
        for (i, col) in columns.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&format!("{}", col[r]));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Wraps a serializable payload as `{"provenance": ..., "data": ...}`.
pub fn write_json<W: Write, T: Serialize>(w: &mut W, prov: &Provenance, data: &T) -> Result<()> {
    let doc = serde_json::json!({ "provenance": prov, "data": data });
    serde_json::to_writer_pretty(&mut *w, &doc)?;
    writeln!(w)?;
    Ok(())
}

/// One CSV table from several curves sharing a grid: the engine curve's
/// channels first, then one column per extra (closed-form) curve.
pub fn spectrum_csv<W: Write>(
    w: &mut W,
    prov: Option<&Provenance>,
    engine: &SpectrumCurve,
    extras: &[(String, &SpectrumCurve)],
) -> Result<()> {
    let mut header = vec!["omega".to_string()];
    let mut columns: Vec<&[f64]> = vec![&engine.omega];
    for (label, values) in engine.channel_labels.iter().zip(&engine.values) {
        header.push(label.clone());
        columns.push(values);
    }
    for (name, curve) in extras {
        if curve.omega != engine.omega {
            return Err(Error::InvalidInput(format!(
                "curve '{name}' evaluated on a different grid"
            )));
        }
        header.push(name.clone());
        columns.push(&curve.values[0]);
    }
    write_csv(w, prov, &header, &columns)
}

/// PSD table: omega, then mean and stderr per channel, then the imaginary
/// diagnostics when present.
pub fn psd_csv<W: Write>(w: &mut W, prov: Option<&Provenance>, est: &PsdEstimate) -> Result<()> {
    let mut header = vec!["omega".to_string()];
    let mut columns: Vec<&[f64]> = vec![&est.omega];
    for (c, label) in est.channel_labels.iter().enumerate() {
        header.push(label.clone());
        columns.push(&est.mean[c]);
        header.push(format!("{label}_stderr"));
        columns.push(&est.stderr[c]);
    }
    if let (Some(im), Some(im_se)) = (&est.imag_mean, &est.imag_stderr) {
        for (c, label) in est.channel_labels.iter().enumerate() {
            header.push(format!("{label}_imag"));
            columns.push(&im[c]);
            header.push(format!("{label}_imag_stderr"));
            columns.push(&im_se[c]);
        }
    }
    write_csv(w, prov, &header, &columns)
}

/// Sweep table, one row per point. The duplication-distance field is empty
/// where the metric does not apply.
pub fn sweep_csv<W: Write>(w: &mut W, prov: Option<&Provenance>, result: &SweepResult) -> Result<()> {
    if let Some(p) = prov {
        for line in p.comment_lines() {
            writeln!(w, "{line}")?;
        }
    }
    let channels = result.channel_labels();
    let mut header = vec![result.parameter.clone()];
    header.extend(channels.iter().map(|c| format!("fano_{c}")));
    header.push("ips_distance".into());
    header.push("kappa0_over_kappa".into());
    header.push("lambda".into());
    writeln!(w, "{}", header.join(","))?;
    for point in &result.points {
        let mut fields = vec![format!("{}", point.value)];
        for (_, v) in &point.fano {
            fields.push(format!("{v}"));
        }
        fields.push(point.ips_distance.map_or(String::new(), |d| format!("{d}")));
        fields.push(format!("{}", point.kappa0_over_kappa));
        fields.push(format!("{}", point.lambda));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut prov = Provenance::new("lumispec", "0.1.0").with_seed(7);
        prov.set("kappa", 1.0);
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            Some(&prov),
            &["omega".into(), "i".into()],
            &[&[0.0, 0.5], &[1.25, 1.5]],
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "# tool: lumispec 0.1.0\n# seed: 7\n# kappa: 1\nomega,i\n0,1.25\n0.5,1.5\n"
        );
    }

    #[test]
    fn mismatched_columns_rejected() {
        let mut buf = Vec::new();
        let err = write_csv(&mut buf, None, &["a".into(), "b".into()], &[&[0.0], &[1.0, 2.0]]);
        assert!(err.is_err());
    }
}
