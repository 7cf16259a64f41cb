//! Static source facts and the three availability conjectures.

mod check;
mod dedupe;
mod facts;
mod fold;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::buildmatrix::OptLevel;
use crate::dbgtrace::{AvailabilityState, ValidationOutcome};
use crate::dwarfscope::DieVerdict;

pub use check::{check_c1, check_c2, check_c3, CheckOutcome, SkipNote};
pub use dedupe::{dedupe, per_level_counts, venn_regions, Dedupe};
pub use facts::analyze_source;
pub use fold::{fold, Folded};

#[derive(Debug, thiserror::Error)]
pub enum ConjectureError {
    #[error("unsupported syntax: {0}")]
    UnsupportedSyntax(#[from] crate::csource::ParseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConjectureId {
    C1,
    C2,
    C3,
}

impl ConjectureId {
    pub const ALL: [ConjectureId; 3] = [ConjectureId::C1, ConjectureId::C2, ConjectureId::C3];
}

impl fmt::Display for ConjectureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl std::str::FromStr for ConjectureId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "C1" | "c1" => Ok(ConjectureId::C1),
            "C2" | "c2" => Ok(ConjectureId::C2),
            "C3" | "c3" => Ok(ConjectureId::C3),
            _ => Err(format!("unknown conjecture `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LhsStorage {
    GlobalVar,
    GlobalArrayElem,
    VolatileGlobal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstituentClass {
    ConstantValued,
    Unalterable,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constituent {
    pub name: String,
    pub klass: ConstituentClass,
    pub evidence: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlobalAssign {
    pub line: u32,
    pub function: String,
    pub lhs_storage: LhsStorage,
    pub constituents: Vec<Constituent>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub assign_line: u32,
    pub scope_end_line: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarInstances {
    pub function: String,
    pub variable: String,
    pub instances: Vec<Instance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub name: String,
    pub start_line: u32,
    pub end_line: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFacts {
    pub global_assign_lines: Vec<GlobalAssign>,
    /// Global assignments excluded because folding drops a constituent.
    pub simplifiable_lines: Vec<u32>,
    pub var_instances: Vec<VarInstances>,
    pub opaque_calls: Vec<crate::corpus::OpaqueCallSite>,
    pub functions: Vec<FunctionSpan>,
}

impl SourceFacts {
    /// Innermost function whose body spans `line`.
    pub fn function_at(&self, line: u32) -> Option<&str> {
        self.functions
            .iter()
            .filter(|f| f.start_line <= line && line <= f.end_line)
            .min_by_key(|f| f.end_line - f.start_line)
            .map(|f| f.name.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConfigKey {
    pub toolchain: String,
    pub opt_level: OptLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IdentityKey {
    pub program_id: String,
    pub conjecture: ConjectureId,
    pub line: u32,
    pub variable: String,
}

impl fmt::Display for IdentityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}:{}", self.program_id, self.conjecture, self.line, self.variable)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub program_id: String,
    pub conjecture: ConjectureId,
    pub file: String,
    pub line: u32,
    pub variable: String,
    pub observed: AvailabilityState,
    pub expected: String,
    pub configs: BTreeSet<ConfigKey>,
    #[serde(default)]
    pub validation: ValidationOutcome,
    #[serde(default)]
    pub die_verdict: Option<DieVerdict>,
    /// Function the line belongs to in the source.
    pub function: String,
    /// Frame the debugger reported at the stop.
    pub frame_function: String,
    pub stop_pc: u64,
    /// Line in the program before opaque-call injection, when it differs.
    #[serde(default)]
    pub original_line: Option<u32>,
}

impl Violation {
    pub fn key(&self) -> IdentityKey {
        IdentityKey {
            program_id: self.program_id.clone(),
            conjecture: self.conjecture,
            line: self.line,
            variable: self.variable.clone(),
        }
    }
}
