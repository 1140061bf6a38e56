//! Run records: config echo, provenance and the command payload.

use serde::Serialize;

use nlspec_core::operators::{OperatorKind, OperatorSpec};
use nlspec_core::relations::RelationReport;
use nlspec_core::scaling::classify_pair;
use nlspec_core::{EigenResult, PairClass, ScalingReport, SolveReport, SweepTable};

use crate::config::{Command, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize)]
pub struct Timestamp {
    pub started_utc: String,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorEntry {
    pub spec: String,
    #[serde(flatten)]
    pub kind: OperatorKind,
    pub operator_degree: f64,
    pub pairing_degree: f64,
    pub natural_norm_exponent: f64,
    pub energy_order: u8,
    pub divergence_form: bool,
    pub dominates: bool,
}

impl OperatorEntry {
    pub fn new(spec: &OperatorSpec) -> Self {
        let d = spec.homogeneity_degree();
        OperatorEntry {
            spec: spec.to_string(),
            kind: spec.kind,
            operator_degree: d.operator_degree,
            pairing_degree: d.pairing_degree,
            natural_norm_exponent: spec.natural_norm_exponent(),
            energy_order: spec.energy_order(),
            divergence_form: spec.is_divergence_form(),
            dominates: spec.dominates,
        }
    }
}

/// Degrees and scaling class of an operator pair.
#[derive(Debug, Clone, Serialize)]
pub struct OperatorReport {
    pub f: OperatorEntry,
    pub g: OperatorEntry,
    pub classification: PairClass,
    /// `s` in `Q(r u) = r^s Q(u)`.
    pub quotient_exponent: f64,
    /// Exponent of the eigenvalue along a ray, `-s`.
    pub eigen_radius_exponent: f64,
    pub element_independent: bool,
}

impl OperatorReport {
    pub fn new(f: &OperatorSpec, g: &OperatorSpec) -> Self {
        let s = f.homogeneity_degree().pairing_degree - g.homogeneity_degree().pairing_degree;
        OperatorReport {
            f: OperatorEntry::new(f),
            g: OperatorEntry::new(g),
            classification: classify_pair(f, g),
            quotient_exponent: s,
            eigen_radius_exponent: -s,
            element_independent: s == 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Payload {
    Eigen(EigenResult),
    Scan(ScalingReport),
    Relations(Vec<RelationReport>),
    Solve(SolveReport),
    Sweep(SweepTable),
    Report(OperatorReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub schema: u32,
    pub command: Command,
    pub version: String,
    pub config: RunConfig,
    /// Excluded from the determinism contract.
    pub timestamp: Timestamp,
    pub results: Payload,
}

impl RunRecord {
    pub fn new(config: RunConfig, timestamp: Timestamp, results: Payload) -> Self {
        RunRecord {
            schema: SCHEMA_VERSION,
            command: config.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            timestamp,
            results,
        }
    }
}
