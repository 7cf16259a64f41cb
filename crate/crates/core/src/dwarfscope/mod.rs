//! Variable DIE lookup, manifestation classification and DIE diffs.

mod diff;
mod lookup;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dbgtrace::ValidationOutcome;
use crate::elfdwarf::DwarfLoadError;

pub use diff::{die_diff, DieDiff};
pub use lookup::{lookup_var_die, lookup_var_die_in};

#[derive(Debug, thiserror::Error)]
pub enum DwarfError {
    #[error(transparent)]
    Load(#[from] DwarfLoadError),
    #[error("malformed DWARF: {0}")]
    MalformedDwarf(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<gimli::Error> for DwarfError {
    fn from(e: gimli::Error) -> Self {
        DwarfError::MalformedDwarf(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScopeKind {
    Subprogram,
    InlinedSubroutine,
    LexicalBlock,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarDieInfo {
    pub die_offset: u64,
    pub has_location: bool,
    pub has_const_value: bool,
    /// Half-open `[lo, hi)` address intervals where a location is described.
    pub location_ranges: Vec<(u64, u64)>,
    pub scope_kind: ScopeKind,
    pub abstract_origin_present: bool,
}

impl VarDieInfo {
    pub fn covers(&self, pc: u64) -> bool {
        self.location_ranges.iter().any(|&(lo, hi)| lo <= pc && pc < hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DieTag {
    Missing,
    Hollow,
    Incomplete,
    Incorrect,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DieVerdict {
    pub tag: DieTag,
    pub note: String,
}

/// Decide how a confirmed violation manifests in the variable's DIE.
pub fn classify_die(
    die: Option<&VarDieInfo>,
    stop_pc: u64,
    validation: &ValidationOutcome,
) -> DieVerdict {
    let verdict = |tag, note: String| DieVerdict { tag, note };
    let Some(die) = die else {
        return verdict(DieTag::Missing, "no DIE for the variable in the enclosing function".into());
    };
    if !die.has_location && !die.has_const_value {
        let note = if die.abstract_origin_present {
            "DIE carries neither location nor constant value (only in abstract origin)"
        } else {
            "DIE carries neither location nor constant value"
        };
        return verdict(DieTag::Hollow, note.into());
    }
    if die.has_location && !die.covers(stop_pc) {
        return verdict(
            DieTag::Incomplete,
            format!("location ranges do not cover pc {stop_pc:#x}"),
        );
    }
    if validation.refuted() {
        return verdict(
            DieTag::Incorrect,
            format!(
                "DIE covers pc {stop_pc:#x} and {} showed a value",
                validation.refuted_in.join(", ")
            ),
        );
    }
    if validation.manual_override {
        return verdict(
            DieTag::Incorrect,
            "DIE covers the pc; marked wrong by manual review".into(),
        );
    }
    verdict(
        DieTag::Complete,
        format!("DIE covers pc {stop_pc:#x}; likely debugger-side"),
    )
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DieReport {
    pub violation: String,
    pub function: String,
    pub variable: String,
    pub stop_pc: u64,
    /// `stop_pc` with the load bias removed.
    pub static_pc: u64,
    pub die: Option<VarDieInfo>,
    pub verdict: DieVerdict,
}

impl DieReport {
    pub fn render_text(&self) -> String {
        let mut s = format!(
            "violation {}\nfunction {} variable {}\npc {:#x} (static {:#x})\nverdict {:?}: {}\n",
            self.violation,
            self.function,
            self.variable,
            self.stop_pc,
            self.static_pc,
            self.verdict.tag,
            self.verdict.note
        );
        match &self.die {
            None => s.push_str("die: none\n"),
            Some(d) => {
                s.push_str(&format!(
                    "die {:#x} scope {:?} location {} const_value {} abstract_origin {}\n",
                    d.die_offset, d.scope_kind, d.has_location, d.has_const_value, d.abstract_origin_present
                ));
                for (lo, hi) in &d.location_ranges {
                    s.push_str(&format!("  [{lo:#x}, {hi:#x})\n"));
                }
            }
        }
        s
    }

    /// Write `die_report.json` and `die_report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        crate::store::write_json(&dir.join("die_report.json"), self)?;
        crate::store::write_atomic(&dir.join("die_report.txt"), self.render_text().as_bytes())
    }
}
