//! Debugger-driven collection of per-line variable availability traces.

mod gdb;
mod lines;
mod lldb;
mod mi;
mod normalize;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::buildmatrix::{BuildConfig, BuiltArtifact};
use crate::elfdwarf::DwarfLoadError;

pub use gdb::{parse_console_vars, GdbTracer};
pub use lines::extract_steppable_lines;
pub use lldb::{parse_lldb_output, LldbTracer};
pub use normalize::{mask_addresses, normalize_value};
pub use validate::{cross_validate, cross_validate_with, ValidationOutcome};

pub const TRACE_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("debugger crashed: {0}")]
    DebuggerCrashed(String),
    #[error("breakpoint setup failed: {0}")]
    BreakpointSetupFailed(String),
    #[error("debugger not available: {0}")]
    DebuggerMissing(String),
    #[error("trace schema {found} is not supported")]
    Schema { found: u32 },
    #[error(transparent)]
    Dwarf(#[from] DwarfLoadError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum AvailabilityState {
    AvailableWithValue { value: String },
    VisibleOptimizedOut,
    NotVisible,
}

impl AvailabilityState {
    pub fn available(value: impl Into<String>) -> Self {
        AvailabilityState::AvailableWithValue {
            value: value.into(),
        }
    }

    pub fn rank(&self) -> u8 {
        match self {
            AvailabilityState::AvailableWithValue { .. } => 2,
            AvailabilityState::VisibleOptimizedOut => 1,
            AvailabilityState::NotVisible => 0,
        }
    }

    pub fn is_available(&self) -> bool {
        self.rank() == 2
    }

    pub fn tag(&self) -> &'static str {
        match self {
            AvailabilityState::AvailableWithValue { .. } => "available",
            AvailabilityState::VisibleOptimizedOut => "optimized_out",
            AvailabilityState::NotVisible => "not_visible",
        }
    }

    pub fn value_text(&self) -> Option<&str> {
        match self {
            AvailabilityState::AvailableWithValue { value } => Some(value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRecord {
    pub file: String,
    pub line: u32,
    #[serde(rename = "pc")]
    pub stop_pc: u64,
    #[serde(rename = "frame")]
    pub frame_function: String,
    #[serde(rename = "vars")]
    pub observations: BTreeMap<String, AvailabilityState>,
}

impl LineRecord {
    pub fn state(&self, var: &str) -> AvailabilityState {
        self.observations
            .get(var)
            .cloned()
            .unwrap_or(AvailabilityState::NotVisible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceExit {
    RanToCompletion,
    Timeout,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DebugTrace {
    pub schema: u32,
    pub program_id: String,
    #[serde(rename = "toolchain")]
    pub toolchain_id: String,
    pub config: BuildConfig,
    pub debugger_id: String,
    pub exit_status: TraceExit,
    /// Runtime address minus static address of the executable image.
    #[serde(default)]
    pub load_bias: u64,
    pub records: Vec<LineRecord>,
}

impl DebugTrace {
    pub fn new(artifact: &BuiltArtifact, debugger_id: &str) -> Self {
        DebugTrace {
            schema: TRACE_SCHEMA,
            program_id: artifact.program_id.clone(),
            toolchain_id: artifact.toolchain_id.clone(),
            config: artifact.config.clone(),
            debugger_id: debugger_id.to_string(),
            exit_status: TraceExit::RanToCompletion,
            load_bias: 0,
            records: Vec::new(),
        }
    }

    pub fn record_at(&self, line: u32) -> Option<&LineRecord> {
        self.records.iter().find(|r| r.line == line)
    }

    /// Append unless the line was already recorded (first-hit rule).
    pub fn push_first_hit(&mut self, rec: LineRecord) -> bool {
        if self
            .records
            .iter()
            .any(|r| r.line == rec.line && r.file == rec.file)
        {
            return false;
        }
        self.records.push(rec);
        true
    }

    pub fn stepped_lines(&self) -> BTreeSet<(String, u32)> {
        self.records
            .iter()
            .map(|r| (r.file.clone(), r.line))
            .collect()
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        crate::store::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, TraceError> {
        let t: DebugTrace = crate::store::read_json(path)?;
        if t.schema != TRACE_SCHEMA {
            return Err(TraceError::Schema { found: t.schema });
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SteppableLineSet {
    pub lines: BTreeSet<(String, u32)>,
    pub source: String,
}

impl SteppableLineSet {
    pub fn contains(&self, file: &str, line: u32) -> bool {
        self.lines.contains(&(file.to_string(), line))
    }

    pub fn only(file: &str, line: u32) -> Self {
        SteppableLineSet {
            lines: [(file.to_string(), line)].into_iter().collect(),
            source: "LineTable".into(),
        }
    }
}

/// A source-level debugger that can produce first-hit traces.
pub trait Tracer: Send + Sync {
    fn id(&self) -> String;
    fn collect(
        &self,
        artifact: &BuiltArtifact,
        lines: &SteppableLineSet,
        timeout: Duration,
    ) -> Result<DebugTrace, TraceError>;
}

/// Convenience wrapper matching the one-call shape used by the pipeline.
pub fn collect_trace(
    tracer: &dyn Tracer,
    artifact: &BuiltArtifact,
    lines: &SteppableLineSet,
    timeout: Duration,
) -> Result<DebugTrace, TraceError> {
    tracer.collect(artifact, lines, timeout)
}

/// Pick a driver by the debugger binary's name.
pub fn tracer_for(path: &Path) -> Box<dyn Tracer> {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().to_string())
        .unwrap_or_default();
    if name.contains("lldb") {
        Box::new(LldbTracer::new(path))
    } else {
        Box::new(GdbTracer::new(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_are_ordered() {
        assert!(AvailabilityState::available("1").rank() > AvailabilityState::VisibleOptimizedOut.rank());
        assert!(AvailabilityState::VisibleOptimizedOut.rank() > AvailabilityState::NotVisible.rank());
    }

    #[test]
    fn state_json_shape() {
        let s = serde_json::to_string(&AvailabilityState::available("3")).unwrap();
        assert_eq!(s, r#"{"state":"available_with_value","value":"3"}"#);
        let s = serde_json::to_string(&AvailabilityState::NotVisible).unwrap();
        assert_eq!(s, r#"{"state":"not_visible"}"#);
    }

    #[test]
    fn first_hit_only() {
        let a = BuiltArtifact {
            executable_path: "a.out".into(),
            build_log: String::new(),
            exit_status: 0,
            asm_hash: String::new(),
            program_id: "p".into(),
            toolchain_id: "t".into(),
            config: BuildConfig::new(crate::buildmatrix::OptLevel::O0),
            requested_level: None,
        };
        let mut t = DebugTrace::new(&a, "gdb");
        let rec = LineRecord {
            file: "p.c".into(),
            line: 3,
            stop_pc: 1,
            frame_function: "main".into(),
            observations: BTreeMap::new(),
        };
        assert!(t.push_first_hit(rec.clone()));
        assert!(!t.push_first_hit(rec));
        assert_eq!(t.records.len(), 1);
        assert_eq!(t.records[0].state("x"), AvailabilityState::NotVisible);
    }
}
