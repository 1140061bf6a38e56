//! JSON and CSV encodings of run records, and atomic file output.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;

use crate::config::Format;
use crate::record::{Payload, RunRecord};
use crate::CliError;

/// Compact JSON whose floats carry 17 significant digits.
#[derive(Debug, Clone, Copy, Default)]
pub struct LosslessFormatter;

impl Formatter for LosslessFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, LosslessFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| CliError::Output(format!("json encoding failed: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

fn real(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

/// The serde name of a unit enum variant.
fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

fn opt_real(v: Option<f64>) -> String {
    v.map(real).unwrap_or_default()
}

/// Header row plus one row per payload entry.
pub fn to_csv(payload: &Payload) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Output(format!("csv encoding failed: {e}"));
    match payload {
        Payload::Eigen(r) => {
            w.write_record([
                "lambda",
                "residual",
                "stationarity",
                "iterations",
                "converged",
                "ray_dependent",
                "best_restart",
            ])
            .map_err(err)?;
            w.write_record([
                real(r.lambda),
                real(r.residual),
                real(r.stationarity),
                r.iterations.to_string(),
                r.converged.to_string(),
                r.ray_dependent.to_string(),
                r.best_restart.to_string(),
            ])
            .map_err(err)?;
        }
        Payload::Scan(s) => {
            w.write_record(["radius", "quotient"]).map_err(err)?;
            for (r, q) in &s.samples {
                w.write_record([real(*r), real(*q)]).map_err(err)?;
            }
        }
        Payload::Relations(list) => {
            w.write_record([
                "name",
                "lhs",
                "rhs",
                "relation",
                "tolerance",
                "tolerance_kind",
                "passed",
                "converged",
                "p",
                "p0",
                "p1",
            ])
            .map_err(err)?;
            for r in list {
                w.write_record([
                    r.name.clone(),
                    real(r.lhs),
                    real(r.rhs),
                    label(&r.relation),
                    real(r.tolerance),
                    label(&r.tolerance_kind),
                    r.passed.to_string(),
                    r.converged.to_string(),
                    real(r.provenance.p),
                    opt_real(r.provenance.p0),
                    opt_real(r.provenance.p1),
                ])
                .map_err(err)?;
            }
        }
        Payload::Solve(r) => {
            w.write_record(["lambda", "rhs_tag", "converged", "residual", "iterations"])
                .map_err(err)?;
            w.write_record([
                real(r.lambda),
                r.rhs_tag.clone(),
                r.converged.to_string(),
                real(r.residual),
                r.iterations.to_string(),
            ])
            .map_err(err)?;
        }
        Payload::Sweep(t) => {
            w.write_record(["lambda", "converged", "residual", "iterations"])
                .map_err(err)?;
            for r in &t.rows {
                w.write_record([
                    real(r.lambda),
                    r.converged.to_string(),
                    real(r.residual),
                    r.iterations.to_string(),
                ])
                .map_err(err)?;
            }
        }
        Payload::Report(r) => {
            w.write_record([
                "role",
                "spec",
                "operator_degree",
                "pairing_degree",
                "natural_norm_exponent",
                "energy_order",
                "classification",
            ])
            .map_err(err)?;
            let class = label(&r.classification);
            for (role, e) in [("F", &r.f), ("G", &r.g)] {
                w.write_record([
                    role.to_string(),
                    e.spec.clone(),
                    real(e.operator_degree),
                    real(e.pairing_degree),
                    real(e.natural_norm_exponent),
                    e.energy_order.to_string(),
                    class.clone(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.into_inner()
        .map_err(|e| CliError::Output(format!("csv encoding failed: {e}")))
}

pub fn emit(record: &RunRecord, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Json => to_json(record),
        Format::Csv => to_csv(&record.results),
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let io_err = |e: io::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    tmp.flush().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nlspec_core::solver::{SweepMeta, SweepRow};
    use nlspec_core::{Mesh, SweepTable};

    fn sweep() -> SweepTable {
        SweepTable {
            rows: (0..3)
                .map(|k| SweepRow {
                    lambda: 0.1 * k as f64 + 1.0 / 3.0,
                    converged: true,
                    residual: 1e-12 * (k as f64 + 1.0),
                    iterations: k,
                })
                .collect(),
            metadata: SweepMeta {
                p: 2.0,
                p0: 2.0,
                p1: 0.0,
                mesh: Mesh::unit_interval(8).unwrap(),
                rhs_tag: "constant, \"quoted\"".into(),
                rhs_norm: 1.0,
                lambda_disc: std::f64::consts::PI,
                margin: 0.05,
                required_ok: true,
            },
        }
    }

    #[test]
    fn csv_has_header_plus_rows() {
        let out = String::from_utf8(to_csv(&Payload::Sweep(sweep())).unwrap()).unwrap();
        assert_eq!(out.lines().count(), 4);
        assert!(out.starts_with("lambda,converged,residual,iterations"));
    }

    #[test]
    fn json_reals_round_trip_exactly() {
        let table = sweep();
        let bytes = to_json(&table).unwrap();
        let back: SweepTable = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back, table);
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("3.1415926535897931e0"), "{text}");
    }

    #[test]
    fn empty_relation_list_is_an_empty_array() {
        let bytes = to_json(&Payload::Relations(Vec::new())).unwrap();
        assert_eq!(bytes, b"[]\n");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
