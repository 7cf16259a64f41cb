//! Attributing violations to the optimization behind them.

mod bisect;
mod flags;
mod group;
mod probe;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use bisect::{parse_bisect_log, triage_bisect, BisectEntry};
pub use flags::{triage_flags, FlagRanking, FlagSearch};
pub use group::{group_by_culprit, groups_csv, groups_text, CulpritGroup, CulpritKey};
pub use probe::{BuildProbe, LineSource, ProbeSetup, Variant, ViolationProbe};

#[derive(Debug, thiserror::Error)]
pub enum TriageError {
    #[error("baseline no longer shows the violation")]
    ReverifyFailed,
    #[error("recompile budget of {0} exhausted")]
    BudgetExhausted(usize),
    #[error("violation presence is not monotone in the pass limit")]
    NonMonotonic,
    #[error(transparent)]
    Build(#[from] crate::buildmatrix::BuildError),
    #[error(transparent)]
    Trace(#[from] crate::dbgtrace::TraceError),
    #[error("cannot check violation: {0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttributionKind {
    GccFlagSet,
    ClangPass,
    Unattributed,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClangPass {
    pub index: u32,
    pub pass_name: String,
    pub target_function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CulpritAttribution {
    pub kind: AttributionKind,
    /// Flags in ranking order; inlining-related flags come last.
    #[serde(default)]
    pub gcc_flags: Option<Vec<String>>,
    #[serde(default)]
    pub clang_pass: Option<ClangPass>,
    #[serde(default)]
    pub reason: Option<String>,
    /// Recompile-and-retrace runs spent.
    #[serde(default)]
    pub recompiles: usize,
    /// Outcome of the confirming rebuilds: (baseline present, culprit-disabled absent).
    #[serde(default)]
    pub verification: Option<(bool, bool)>,
}

impl CulpritAttribution {
    pub fn unattributed(reason: &str, recompiles: usize) -> Self {
        CulpritAttribution {
            kind: AttributionKind::Unattributed,
            gcc_flags: None,
            clang_pass: None,
            reason: Some(reason.to_string()),
            recompiles,
            verification: None,
        }
    }

    pub fn flags(flags: Vec<String>, recompiles: usize, verification: (bool, bool)) -> Self {
        CulpritAttribution {
            kind: AttributionKind::GccFlagSet,
            gcc_flags: Some(flags),
            clang_pass: None,
            reason: None,
            recompiles,
            verification: Some(verification),
        }
    }

    pub fn pass(pass: ClangPass, recompiles: usize, verification: (bool, bool)) -> Self {
        CulpritAttribution {
            kind: AttributionKind::ClangPass,
            gcc_flags: None,
            clang_pass: Some(pass),
            reason: None,
            recompiles,
            verification: Some(verification),
        }
    }

    pub fn is_attributed(&self) -> bool {
        self.kind != AttributionKind::Unattributed
    }

    /// Flags that disable the culprit when appended to the level's flags.
    pub fn disabling_flags(&self) -> Option<Vec<String>> {
        match (&self.gcc_flags, &self.clang_pass) {
            (Some(f), _) => Some(f.clone()),
            (None, Some(p)) => Some(bisect::limit_flags(p.index as i64 - 1)),
            _ => None,
        }
    }

    pub fn flag_set(&self) -> Option<BTreeSet<String>> {
        self.gcc_flags.as_ref().map(|f| f.iter().cloned().collect())
    }
}
