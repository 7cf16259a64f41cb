//! Culprit-preserving test-case reduction and report bundles.

mod bundle;
mod predicate;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use bundle::{collect_bundle_inputs, emit_report_bundle, BundleInputs};
pub use predicate::{locate_call, Predicate, Verdict};

use crate::buildmatrix::{OptLevel, ToolchainSpec};
use crate::conjectures::IdentityKey;
use crate::corpus::ScreenTool;
use crate::process;
use crate::triage::CulpritAttribution;

#[derive(Debug, thiserror::Error)]
pub enum ReduceError {
    #[error("invalid interestingness spec: {0}")]
    InvalidSpec(String),
    #[error("original program is not interesting: {0}")]
    PreconditionFlaky(String),
    #[error("reducer failed: {0}")]
    ReducerFailed(String),
    #[error("reduced program attributes to a different culprit")]
    VerificationRegressed,
    #[error("bundle requires a verified reduction")]
    NotVerified,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Triage(#[from] crate::triage::TriageError),
}

fn default_true() -> bool {
    true
}

fn default_compile_s() -> u64 {
    120
}

fn default_trace_s() -> u64 {
    60
}

/// Everything the interestingness predicate needs, serialized next to the script.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestingnessSpec {
    pub key: IdentityKey,
    /// Name the reducer gives the candidate file.
    pub file_name: String,
    pub toolchain: ToolchainSpec,
    pub opt_level: OptLevel,
    pub culprit: CulpritAttribution,
    #[serde(default = "default_true")]
    pub require_ub_clean: bool,
    #[serde(default)]
    pub screen_tools: Vec<ScreenTool>,
    /// Callee of the injected call, for C1.
    #[serde(default)]
    pub opaque_callee: Option<String>,
    #[serde(default)]
    pub stub_source: Option<String>,
    #[serde(default = "default_compile_s")]
    pub compile_timeout_s: u64,
    #[serde(default = "default_trace_s")]
    pub trace_timeout_s: u64,
}

impl InterestingnessSpec {
    pub fn validate(&self) -> Result<(), ReduceError> {
        if !self.culprit.is_attributed() || self.culprit.disabling_flags().is_none() {
            return Err(ReduceError::InvalidSpec("culprit is unattributed".into()));
        }
        if self.file_name.is_empty() || self.file_name.contains('/') {
            return Err(ReduceError::InvalidSpec(format!("bad file name `{}`", self.file_name)));
        }
        Ok(())
    }
}

/// Paths of a written interestingness test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub dir: PathBuf,
    pub script: PathBuf,
    pub spec: PathBuf,
}

impl Manifest {
    /// Predicate invocations so far, one line each.
    pub fn calls_log(&self) -> PathBuf {
        self.dir.join("calls.log")
    }

    pub fn work_dir(&self) -> PathBuf {
        self.dir.join("work")
    }
}

/// Write `interesting.sh` and `spec.json` into `dir`; the script calls `driver interesting`.
pub fn make_interestingness_test(
    spec: &InterestingnessSpec,
    dir: &Path,
    driver: &Path,
) -> Result<Manifest, ReduceError> {
    spec.validate()?;
    std::fs::create_dir_all(dir)?;
    let dir = dir.canonicalize()?;
    let spec_path = dir.join("spec.json");
    crate::store::write_json(&spec_path, spec)?;
    let script = dir.join("interesting.sh");
    let text = format!(
        "#!/bin/sh\n# exit status 0 means the candidate is interesting\nexec {} interesting --spec {} \"${{1:-{}}}\"\n",
        process::shell_quote(&driver.display().to_string()),
        process::shell_quote(&spec_path.display().to_string()),
        spec.file_name,
    );
    crate::store::write_atomic(&script, text.as_bytes())?;
    set_executable(&script)?;
    Ok(Manifest { dir: dir.clone(), script, spec: spec_path })
}

fn set_executable(path: &Path) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    std::fs::set_permissions(path, std::fs::Permissions::from_mode(0o755))
}

/// Evaluate a candidate for the `interesting` subcommand and log the call.
pub fn run_predicate_cli(spec_path: &Path, candidate: &Path) -> Result<Verdict, ReduceError> {
    let spec: InterestingnessSpec = crate::store::read_json(spec_path)?;
    let dir = spec_path.parent().unwrap_or(Path::new("."));
    let predicate = Predicate::new(spec, dir.join("work"))?;
    let source = std::fs::read_to_string(candidate)?;
    let verdict = predicate.evaluate(&source)?;
    use std::io::Write;
    let mut log = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("calls.log"))?;
    writeln!(log, "{}", serde_json::to_string(&verdict)?)?;
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionResult {
    pub reduced_source: String,
    /// Predicate invocations made by the reducer.
    pub iterations: usize,
    pub final_verification: bool,
    pub final_verdict: Verdict,
    pub original_lines: usize,
    pub reduced_lines: usize,
    /// Set when the reduced program triages to a different culprit.
    pub label: Option<String>,
    pub bundle_path: Option<PathBuf>,
}

/// Run `reducer <script> <file>` in a scratch copy and verify what comes back.
///
/// `retriage`, when given, re-attributes the reduced program; a different culprit
/// labels the result instead of discarding it.
pub fn run_reduction(
    source: &str,
    predicate: &Predicate,
    manifest: &Manifest,
    reducer: &[String],
    wall_budget: Duration,
    retriage: Option<&dyn Fn(&str) -> Result<CulpritAttribution, ReduceError>>,
) -> Result<ReductionResult, ReduceError> {
    let first = predicate.evaluate(source)?;
    if !first.interesting {
        return Err(ReduceError::PreconditionFlaky(first.reason));
    }
    let (prog, args) = reducer
        .split_first()
        .ok_or_else(|| ReduceError::ReducerFailed("no reducer command".into()))?;
    let scratch = manifest.dir.join("reduce");
    std::fs::create_dir_all(&scratch)?;
    let file = scratch.join(&predicate.spec().file_name);
    std::fs::write(&file, source)?;
    let _ = std::fs::remove_file(manifest.calls_log());

    let mut cmd = Command::new(prog);
    cmd.args(args)
        .arg(&manifest.script)
        .arg(&predicate.spec().file_name)
        .current_dir(&scratch);
    let out = process::run(&mut cmd, wall_budget)?;
    if !out.success() && !out.timed_out {
        return Err(ReduceError::ReducerFailed(format!("{}{}", out.stdout, out.stderr).trim().to_string()));
    }
    if out.timed_out {
        log::warn!("reducer hit the wall budget of {wall_budget:?}; keeping its best candidate");
    }
    let reduced = std::fs::read_to_string(&file)?;
    let iterations = std::fs::read_to_string(manifest.calls_log())
        .map(|t| t.lines().count())
        .unwrap_or(0);
    let verdict = predicate.evaluate(&reduced)?;
    let mut label = None;
    if verdict.interesting {
        if let Some(f) = retriage {
            let again = f(&reduced)?;
            if crate::triage::CulpritKey::of(&again) != crate::triage::CulpritKey::of(&predicate.spec().culprit) {
                label = Some(ReduceError::VerificationRegressed.to_string());
            }
        }
    }
    Ok(ReductionResult {
        original_lines: source.lines().count(),
        reduced_lines: reduced.lines().count(),
        reduced_source: reduced,
        iterations,
        final_verification: verdict.interesting,
        final_verdict: verdict,
        label,
        bundle_path: None,
    })
}
