//! Line coverage and variable availability of optimized traces relative
//! to their `-O0` siblings.

mod aggregate;

use std::collections::BTreeSet;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::buildmatrix::OptLevel;
use crate::dbgtrace::DebugTrace;

pub use aggregate::{aggregate, heat_grid, heat_grid_csv, Aggregate, AggregateRow};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("reference trace has no records")]
    EmptyReference,
    #[error("no line is stepped in both traces")]
    NoCommonLines,
    #[error("cannot convert count to the scalar type")]
    Conversion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord<F> {
    pub program_id: String,
    pub toolchain: String,
    #[serde(default)]
    pub version: String,
    pub opt_level: OptLevel,
    pub line_coverage: F,
    /// Absent when no line with available `-O0` variables is stepped in both traces.
    pub availability: Option<F>,
    pub product: Option<F>,
    /// Sum of per-line ratios behind `availability`, for pooled averages.
    pub ratio_sum: F,
    pub ratio_lines: usize,
}

fn cast<F: Float>(n: usize) -> Result<F, MetricsError> {
    F::from(n).ok_or(MetricsError::Conversion)
}

fn lines(t: &DebugTrace) -> BTreeSet<(&str, u32)> {
    t.records.iter().map(|r| (r.file.as_str(), r.line)).collect()
}

/// Fraction of the reference's stepped lines also stepped in `opt`.
pub fn line_coverage<F: Float>(opt: &DebugTrace, o0: &DebugTrace) -> Result<F, MetricsError> {
    let reference = lines(o0);
    if reference.is_empty() {
        return Err(MetricsError::EmptyReference);
    }
    let hit = lines(opt).intersection(&reference).count();
    Ok(cast::<F>(hit)? / cast::<F>(reference.len())?)
}

/// Per-line ratios of variables available in both traces over those
/// available at `-O0`, for lines stepped in both. Lines without any
/// available reference variable are skipped.
pub fn availability_ratios<F: Float>(opt: &DebugTrace, o0: &DebugTrace) -> Result<Vec<F>, MetricsError> {
    let mut out = Vec::new();
    for r0 in &o0.records {
        let Some(ro) = opt.records.iter().find(|r| r.line == r0.line && r.file == r0.file) else {
            continue;
        };
        let avail0: BTreeSet<&String> = r0
            .observations
            .iter()
            .filter(|(_, s)| s.is_available())
            .map(|(n, _)| n)
            .collect();
        if avail0.is_empty() {
            continue;
        }
        let both = avail0
            .iter()
            .filter(|n| ro.observations.get(**n).is_some_and(|s| s.is_available()))
            .count();
        out.push(cast::<F>(both)? / cast::<F>(avail0.len())?);
    }
    if out.is_empty() {
        return Err(MetricsError::NoCommonLines);
    }
    Ok(out)
}

pub fn variable_availability<F: Float>(opt: &DebugTrace, o0: &DebugTrace) -> Result<F, MetricsError> {
    let ratios = availability_ratios::<F>(opt, o0)?;
    let sum = ratios.iter().fold(F::zero(), |a, &b| a + b);
    Ok(sum / cast::<F>(ratios.len())?)
}

pub fn compute_record<F: Float>(
    program_id: &str,
    version: &str,
    opt: &DebugTrace,
    o0: &DebugTrace,
) -> Result<MetricsRecord<F>, MetricsError> {
    let line_coverage = line_coverage::<F>(opt, o0)?;
    let (availability, ratio_sum, ratio_lines) = match availability_ratios::<F>(opt, o0) {
        Ok(r) => {
            let sum = r.iter().fold(F::zero(), |a, &b| a + b);
            (Some(sum / cast::<F>(r.len())?), sum, r.len())
        }
        Err(MetricsError::NoCommonLines) => (None, F::zero(), 0),
        Err(e) => return Err(e),
    };
    Ok(MetricsRecord {
        program_id: program_id.to_string(),
        toolchain: opt.toolchain_id.clone(),
        version: version.to_string(),
        opt_level: opt.config.opt_level,
        line_coverage,
        availability,
        product: availability.map(|a| a * line_coverage),
        ratio_sum,
        ratio_lines,
    })
}
