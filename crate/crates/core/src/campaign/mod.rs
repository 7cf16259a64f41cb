//! Campaign configuration, scheduling, the resumable run store and reports.

mod commands;
mod compare;
mod filter;
mod report;
mod run;
mod store;

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use commands::{cmd_metrics, cmd_reduce, cmd_triage, ReduceRequest, TriageRun};
pub use compare::{cmd_compare, CompareReport, ConjectureDelta};
pub use filter::ViolationFilter;
pub use report::{cmd_report, render_summary, summarize, CampaignSummary, ToolchainTable};
pub use run::{cmd_campaign, cmd_generate, SlotRecord};
pub use store::{RunStore, Stage, StageMarker, StageStatus, StoredViolations};

use crate::buildmatrix::{Family, OptLevel, ToolchainSpec};
use crate::conjectures::ConjectureId;

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("environment error: {0}")]
    Environment(String),
    #[error("stores ran different corpora ({only_a} programs only in the first, {only_b} only in the second)")]
    CorpusMismatch { only_a: usize, only_b: usize },
    #[error("stage `{stage}` missing for {what}")]
    MissingStage { stage: String, what: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Build(#[from] crate::buildmatrix::BuildError),
    #[error(transparent)]
    Trace(#[from] crate::dbgtrace::TraceError),
    #[error(transparent)]
    Triage(#[from] crate::triage::TriageError),
    #[error(transparent)]
    Reduce(#[from] crate::reducer::ReduceError),
}

impl CampaignError {
    /// 1 for usage and configuration problems, 2 for the environment.
    pub fn exit_code(&self) -> i32 {
        match self {
            CampaignError::Config(_)
            | CampaignError::CorpusMismatch { .. }
            | CampaignError::MissingStage { .. } => 1,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolchainEntry {
    pub id: String,
    pub family: Family,
    pub compiler_path: PathBuf,
    pub debugger_path: PathBuf,
    #[serde(default)]
    pub alt_debugger_paths: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timeouts {
    #[serde(default = "d_generate")]
    pub generate_s: u64,
    #[serde(default = "d_compile")]
    pub compile_s: u64,
    #[serde(default = "d_trace")]
    pub trace_s: u64,
}

fn d_generate() -> u64 {
    30
}
fn d_compile() -> u64 {
    120
}
fn d_trace() -> u64 {
    60
}

impl Default for Timeouts {
    fn default() -> Self {
        Timeouts { generate_s: d_generate(), compile_s: d_compile(), trace_s: d_trace() }
    }
}

impl Timeouts {
    pub fn compile(&self) -> Duration {
        Duration::from_secs(self.compile_s)
    }
    pub fn trace(&self) -> Duration {
        Duration::from_secs(self.trace_s)
    }
}

fn d_parallelism() -> usize {
    std::thread::available_parallelism().map(|n| n.get().saturating_sub(1).max(1)).unwrap_or(1)
}
fn d_max_lines() -> usize {
    600
}
fn d_conjectures() -> Vec<ConjectureId> {
    ConjectureId::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema: u32,
    pub toolchains: Vec<ToolchainEntry>,
    pub levels: Vec<OptLevel>,
    #[serde(default = "d_conjectures")]
    pub conjectures: Vec<ConjectureId>,
    pub program_count: usize,
    #[serde(default)]
    pub seed: u64,
    /// Generator option sets cycled over program slots; all bundled sets when absent.
    #[serde(default)]
    pub option_sets: Option<Vec<u16>>,
    #[serde(default = "d_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub timeouts: Timeouts,
    pub store_root: PathBuf,
    pub generator_path: PathBuf,
    #[serde(default)]
    pub reducer_path: Option<PathBuf>,
    #[serde(default)]
    pub analyzer_path: Option<PathBuf>,
    #[serde(default = "d_max_lines")]
    pub max_source_lines: usize,
    /// Attribute every unique violation as part of the campaign.
    #[serde(default)]
    pub triage: bool,
}

impl CampaignConfig {
    pub fn from_toml(text: &str) -> Result<Self, CampaignError> {
        toml::from_str(text).map_err(|e| CampaignError::Config(e.to_string()))
    }

    /// Read a config file; relative paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CampaignError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.store_root);
        fix(&mut cfg.generator_path);
        cfg.reducer_path.iter_mut().for_each(fix);
        cfg.analyzer_path.iter_mut().for_each(fix);
        for t in &mut cfg.toolchains {
            fix(&mut t.compiler_path);
            fix(&mut t.debugger_path);
            t.alt_debugger_paths.iter_mut().for_each(fix);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        let bad = |m: &str| Err(CampaignError::Config(m.to_string()));
        if self.schema != CONFIG_SCHEMA {
            return bad(&format!("unsupported schema {} (expected {CONFIG_SCHEMA})", self.schema));
        }
        if self.program_count == 0 {
            return bad("program_count must be at least 1");
        }
        if self.toolchains.is_empty() {
            return bad("no toolchains configured");
        }
        if self.levels.is_empty() || self.levels.contains(&OptLevel::O0) {
            return bad("levels must be non-empty and exclude O0 (O0 is always built as the reference)");
        }
        if self.conjectures.is_empty() {
            return bad("no conjectures selected");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        let mut ids: Vec<&str> = self.toolchains.iter().map(|t| t.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.toolchains.len() {
            return bad("toolchain ids must be unique");
        }
        if ids.iter().any(|i| i.is_empty() || i.contains('/')) {
            return bad("toolchain ids must be non-empty and contain no `/`");
        }
        Ok(())
    }

    /// Check every referenced binary and probe compiler versions.
    pub fn probe(&self) -> Result<Vec<ToolchainSpec>, CampaignError> {
        let need = |p: &Path, what: &str| {
            if crate::corpus::is_executable(p) {
                Ok(())
            } else {
                Err(CampaignError::Environment(format!("{what} not executable: {}", p.display())))
            }
        };
        need(&self.generator_path, "generator")?;
        if let Some(r) = &self.reducer_path {
            need(r, "reducer")?;
        }
        if let Some(a) = &self.analyzer_path {
            need(a, "analyzer")?;
        }
        self.toolchains
            .iter()
            .map(|t| {
                need(&t.compiler_path, "compiler")?;
                need(&t.debugger_path, "debugger")?;
                let mut spec = ToolchainSpec::probe(&t.id, t.family, &t.compiler_path, &t.debugger_path)
                    .map_err(|e| CampaignError::Environment(e.to_string()))?;
                spec.alt_debugger_paths = t.alt_debugger_paths.clone();
                Ok(spec)
            })
            .collect()
    }

    pub fn store(&self) -> RunStore {
        RunStore::new(&self.store_root)
    }
}
