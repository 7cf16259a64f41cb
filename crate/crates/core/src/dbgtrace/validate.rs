use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{tracer_for, SteppableLineSet, Tracer};
use crate::buildmatrix::BuiltArtifact;
use crate::conjectures::Violation;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub confirmed_in: Vec<String>,
    pub refuted_in: Vec<String>,
    /// Debuggers that could not be consulted, with the reason.
    #[serde(default)]
    pub skipped: Vec<(String, String)>,
    /// Set by an analyst to assert the DIE data is wrong despite no refutation.
    #[serde(default)]
    pub manual_override: bool,
}

impl ValidationOutcome {
    pub fn refuted(&self) -> bool {
        !self.refuted_in.is_empty()
    }
}

/// Re-collect the violating line under each alternate debugger.
pub fn cross_validate(
    violation: &Violation,
    artifact: &BuiltArtifact,
    alternates: &[PathBuf],
    timeout: Duration,
) -> ValidationOutcome {
    let mut outcome = ValidationOutcome::default();
    let mut tracers: Vec<Box<dyn Tracer>> = Vec::new();
    for path in alternates {
        if crate::corpus::is_executable(path) {
            tracers.push(tracer_for(path));
        } else {
            outcome
                .skipped
                .push((path.display().to_string(), "skipped: not installed".into()));
        }
    }
    let refs: Vec<&dyn Tracer> = tracers.iter().map(|t| t.as_ref()).collect();
    let more = cross_validate_with(violation, artifact, &refs, timeout);
    outcome.confirmed_in = more.confirmed_in;
    outcome.refuted_in = more.refuted_in;
    outcome.skipped.extend(more.skipped);
    outcome
}

pub fn cross_validate_with(
    violation: &Violation,
    artifact: &BuiltArtifact,
    tracers: &[&dyn Tracer],
    timeout: Duration,
) -> ValidationOutcome {
    let mut outcome = ValidationOutcome::default();
    let lines = SteppableLineSet::only(&violation.file, violation.line);
    for t in tracers {
        let id = t.id();
        match t.collect(artifact, &lines, timeout) {
            Ok(trace) => match trace.record_at(violation.line) {
                Some(rec) => {
                    let alt = rec.state(&violation.variable);
                    if alt.is_available() && !violation.observed.is_available() {
                        outcome.refuted_in.push(id);
                    } else {
                        outcome.confirmed_in.push(id);
                    }
                }
                None => outcome.skipped.push((id, "line not reached".into())),
            },
            Err(e) => outcome.skipped.push((id, e.to_string())),
        }
    }
    outcome
}
