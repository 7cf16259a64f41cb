use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Duration;

use super::bisect::{limit_flags, parse_bisect_log, BisectEntry};
use super::TriageError;
use crate::buildmatrix::{compile, BuildConfig, BuiltArtifact, CompileOptions, OptLevel, ToolchainSpec};
use crate::conjectures::{check_c1, check_c2, check_c3, ConjectureId, SourceFacts, Violation};
use crate::corpus::TestProgram;
use crate::dbgtrace::{extract_steppable_lines, SteppableLineSet, TraceError, Tracer};

/// A build variant probed during triage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Variant {
    Baseline,
    Flags(Vec<String>),
    /// Stop the pass pipeline after pass `n`; negative runs everything.
    BisectLimit(i64),
}

impl Variant {
    pub fn extra_flags(&self) -> Vec<String> {
        match self {
            Variant::Baseline => Vec::new(),
            Variant::Flags(f) => f.clone(),
            Variant::BisectLimit(n) => limit_flags(*n),
        }
    }
}

/// Answers whether the violation under triage shows up in a build variant.
pub trait ViolationProbe: Sync {
    fn present(&self, variant: &Variant) -> Result<bool, TriageError>;

    /// Pass pipeline as logged by a build with no pass limit.
    fn pipeline(&self) -> Result<Vec<BisectEntry>, TriageError>;
}

pub type LineSource = dyn Fn(&Path, &str) -> Result<SteppableLineSet, TraceError> + Send + Sync;

/// Everything needed to rebuild and retrace one program.
pub struct ProbeSetup<'a> {
    pub program: &'a TestProgram,
    pub facts: Option<&'a SourceFacts>,
    pub toolchain: &'a ToolchainSpec,
    pub opt_level: OptLevel,
    pub tracer: &'a dyn Tracer,
    pub work_dir: PathBuf,
    pub stub_object: Option<PathBuf>,
    pub compile_timeout: Duration,
    pub trace_timeout: Duration,
}

/// Probe that really compiles and traces.
pub struct BuildProbe<'a> {
    setup: ProbeSetup<'a>,
    violation: Violation,
    lines: Box<LineSource>,
    fast_path: bool,
    runs: AtomicUsize,
}

impl<'a> BuildProbe<'a> {
    pub fn new(setup: ProbeSetup<'a>, violation: &Violation) -> Self {
        BuildProbe {
            setup,
            violation: violation.clone(),
            lines: Box::new(extract_steppable_lines),
            fast_path: true,
            runs: AtomicUsize::new(0),
        }
    }

    /// Replace the DWARF line-table reader, e.g. for synthetic executables.
    pub fn with_line_source(mut self, lines: Box<LineSource>) -> Self {
        self.lines = lines;
        self
    }

    /// Always trace every steppable line, e.g. when the violating line may move.
    pub fn without_fast_path(mut self) -> Self {
        self.fast_path = false;
        self
    }

    pub fn runs(&self) -> usize {
        self.runs.load(Ordering::SeqCst)
    }

    pub fn build(&self, variant: &Variant) -> Result<BuiltArtifact, TriageError> {
        let n = self.runs.fetch_add(1, Ordering::SeqCst);
        let s = &self.setup;
        let config = BuildConfig::new(s.opt_level)
            .with_flags(variant.extra_flags())
            .with_stub(s.stub_object.is_some());
        let mut opts = CompileOptions::new(s.work_dir.join(format!("probe-{n:04}")));
        opts.timeout = s.compile_timeout;
        opts.stub_object = s.stub_object.clone();
        Ok(compile(s.program, s.toolchain, &config, &opts)?)
    }

    /// Violations of the probed conjecture in a fresh build of `variant`.
    pub fn violations(&self, variant: &Variant) -> Result<Vec<Violation>, TriageError> {
        let artifact = self.build(variant)?;
        self.check(&artifact)
    }

    fn check(&self, artifact: &BuiltArtifact) -> Result<Vec<Violation>, TriageError> {
        let s = &self.setup;
        let v = &self.violation;
        let file = s.program.file_name();
        let all = (self.lines)(&artifact.executable_path, &file)?;
        // C1 and C2 only look at one line; C3 needs the whole instance
        let lines = if self.fast_path && v.conjecture != ConjectureId::C3 && all.contains(&file, v.line) {
            SteppableLineSet::only(&file, v.line)
        } else {
            all
        };
        let trace = s.tracer.collect(artifact, &lines, s.trace_timeout)?;
        let found = match v.conjecture {
            ConjectureId::C1 => {
                let call = s
                    .program
                    .injected_call
                    .as_ref()
                    .ok_or_else(|| TriageError::Unsupported("program has no opaque call".into()))?;
                check_c1(&trace, call)
            }
            ConjectureId::C2 | ConjectureId::C3 => {
                let facts = s
                    .facts
                    .ok_or_else(|| TriageError::Unsupported("no source facts".into()))?;
                if v.conjecture == ConjectureId::C2 {
                    check_c2(&trace, facts)
                } else {
                    check_c3(&trace, facts)
                }
            }
        };
        Ok(found.violations)
    }
}

impl ViolationProbe for BuildProbe<'_> {
    fn present(&self, variant: &Variant) -> Result<bool, TriageError> {
        let v = &self.violation;
        Ok(self
            .violations(variant)?
            .iter()
            .any(|x| x.line == v.line && x.variable == v.variable))
    }

    fn pipeline(&self) -> Result<Vec<BisectEntry>, TriageError> {
        let artifact = self.build(&Variant::BisectLimit(-1))?;
        Ok(parse_bisect_log(&artifact.build_log))
    }
}
