use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{InterestingnessSpec, ReduceError};
use crate::buildmatrix::{build_stub, BuildError};
use crate::conjectures::{analyze_source, ConjectureId, Violation};
use crate::corpus::{screen_undefined_behavior, OpaqueCallSite, TestProgram, DEFAULT_CALLEE};
use crate::dbgtrace::{tracer_for, SteppableLineSet, TraceError, Tracer};
use crate::triage::{BuildProbe, ProbeSetup, TriageError, Variant};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub interesting: bool,
    pub reason: String,
    /// Line of the reproduced violation in the candidate.
    pub matched_line: Option<u32>,
    /// The violation moved away from the recorded line.
    pub fuzzy: bool,
}

impl Verdict {
    fn no(reason: impl Into<String>) -> Self {
        Verdict { interesting: false, reason: reason.into(), matched_line: None, fuzzy: false }
    }
}

type SharedLines = Arc<dyn Fn(&std::path::Path, &str) -> Result<SteppableLineSet, TraceError> + Send + Sync>;

/// The in-process interestingness test.
pub struct Predicate {
    spec: InterestingnessSpec,
    tracer: Box<dyn Tracer>,
    lines: Option<SharedLines>,
    work_dir: PathBuf,
    stub: Mutex<Option<PathBuf>>,
}

/// Find the injected call in `source`: the last call of `callee` on a line that is not its prototype.
pub fn locate_call(program: &TestProgram, callee: &str) -> Option<OpaqueCallSite> {
    for (i, text) in program.source_text.lines().enumerate() {
        let mut found = None;
        let mut from = 0;
        while let Some(pos) = text[from..].find(callee) {
            let at = from + pos;
            from = at + callee.len();
            let before = text[..at].trim_end();
            let boundary = text[..at].chars().last().map_or(true, |c| !(c.is_alphanumeric() || c == '_'));
            let rest = text[from..].trim_start();
            if boundary && rest.starts_with('(') && !before.ends_with("void") {
                found = Some(rest);
            }
        }
        let Some(rest) = found else { continue };
        let line = i as u32 + 1;
        let function = program
            .functions
            .iter()
            .find(|f| f.body_start <= line && line <= f.body_end)
            .map(|f| f.name.clone())
            .unwrap_or_default();
        return Some(OpaqueCallSite {
            line,
            callee: callee.to_string(),
            argument_vars: call_args(rest),
            function,
        });
    }
    None
}

/// Identifier arguments of `( ... )`, with leading casts dropped.
fn call_args(rest: &str) -> Vec<String> {
    let mut depth = 0;
    let mut args = vec![String::new()];
    for c in rest.chars() {
        match c {
            '(' => {
                depth += 1;
                if depth == 1 {
                    continue;
                }
            }
            ')' => {
                depth -= 1;
                if depth == 0 {
                    break;
                }
            }
            ',' if depth == 1 => {
                args.push(String::new());
                continue;
            }
            _ => {}
        }
        if let Some(a) = args.last_mut() {
            a.push(c);
        }
    }
    args.iter()
        .filter_map(|a| {
            let mut a = a.trim();
            while a.starts_with('(') {
                a = a[a.find(')')? + 1..].trim_start();
            }
            let ident = !a.is_empty()
                && a.chars().all(|c| c.is_alphanumeric() || c == '_')
                && !a.starts_with(|c: char| c.is_ascii_digit());
            ident.then(|| a.to_string())
        })
        .collect()
}

impl Predicate {
    pub fn new(spec: InterestingnessSpec, work_dir: impl Into<PathBuf>) -> Result<Self, ReduceError> {
        spec.validate()?;
        let tracer = tracer_for(&spec.toolchain.debugger_path);
        Ok(Predicate { spec, tracer, lines: None, work_dir: work_dir.into(), stub: Mutex::new(None) })
    }

    pub fn with_tracer(mut self, tracer: Box<dyn Tracer>) -> Self {
        self.tracer = tracer;
        self
    }

    pub fn with_line_source(mut self, lines: SharedLines) -> Self {
        self.lines = Some(lines);
        self
    }

    pub fn spec(&self) -> &InterestingnessSpec {
        &self.spec
    }

    pub fn tracer(&self) -> &dyn Tracer {
        self.tracer.as_ref()
    }

    fn stub_object(&self) -> Result<Option<PathBuf>, BuildError> {
        let Some(src) = &self.spec.stub_source else { return Ok(None) };
        let mut guard = self.stub.lock().expect("stub lock");
        if guard.is_none() {
            *guard = Some(build_stub(&self.spec.toolchain, src, &self.work_dir.join("stub"))?);
        }
        Ok(guard.clone())
    }

    /// Candidate program with its opaque call located again.
    pub fn program(&self, source: &str) -> Result<TestProgram, Verdict> {
        let mut program = TestProgram::new(source.to_string(), PathBuf::from(&self.spec.file_name));
        if self.spec.key.conjecture == ConjectureId::C1 {
            let callee = self.spec.opaque_callee.as_deref().unwrap_or(DEFAULT_CALLEE);
            match locate_call(&program, callee) {
                Some(c) => program.injected_call = Some(c),
                None => return Err(Verdict::no("opaque call removed")),
            }
        }
        Ok(program)
    }

    /// Build a probe for `program` rooted in a fresh directory.
    pub(crate) fn with_probe<T>(
        &self,
        program: &TestProgram,
        f: impl FnOnce(&BuildProbe<'_>) -> Result<T, ReduceError>,
    ) -> Result<Result<T, Verdict>, ReduceError> {
        let facts = match analyze_source(program) {
            Ok(f) => Some(f),
            Err(_) if self.spec.key.conjecture == ConjectureId::C1 => None,
            Err(e) => return Ok(Err(Verdict::no(format!("unparsable: {e}")))),
        };
        let stub_object = match self.stub_object() {
            Ok(s) => s,
            Err(e) => return Err(TriageError::Build(e).into()),
        };
        std::fs::create_dir_all(&self.work_dir)?;
        let scratch = tempfile::Builder::new().prefix("cand-").tempdir_in(&self.work_dir)?;
        let setup = ProbeSetup {
            program,
            facts: facts.as_ref(),
            toolchain: &self.spec.toolchain,
            opt_level: self.spec.opt_level,
            tracer: self.tracer.as_ref(),
            work_dir: scratch.path().to_path_buf(),
            stub_object,
            compile_timeout: Duration::from_secs(self.spec.compile_timeout_s),
            trace_timeout: Duration::from_secs(self.spec.trace_timeout_s),
        };
        let mut probe = BuildProbe::new(setup, &self.placeholder()).without_fast_path();
        if let Some(lines) = &self.lines {
            let lines = lines.clone();
            probe = probe.with_line_source(Box::new(move |p, f| lines(p, f)));
        }
        Ok(Ok(f(&probe)?))
    }

    fn placeholder(&self) -> Violation {
        let k = &self.spec.key;
        Violation {
            program_id: k.program_id.clone(),
            conjecture: k.conjecture,
            file: self.spec.file_name.clone(),
            line: k.line,
            variable: k.variable.clone(),
            observed: crate::dbgtrace::AvailabilityState::NotVisible,
            expected: String::new(),
            configs: Default::default(),
            validation: Default::default(),
            die_verdict: None,
            function: String::new(),
            frame_function: String::new(),
            stop_pc: 0,
            original_line: None,
        }
    }

    /// Violation of the same conjecture and variable nearest to the recorded line.
    pub fn nearest(&self, found: &[Violation]) -> Option<u32> {
        let k = &self.spec.key;
        found
            .iter()
            .filter(|v| v.conjecture == k.conjecture && v.variable == k.variable)
            .map(|v| v.line)
            .min_by_key(|l| ((*l as i64 - k.line as i64).abs(), *l))
    }

    /// Interesting iff the violation reproduces, disappears with the culprit disabled,
    /// and the candidate passes the UB screen when required.
    pub fn evaluate(&self, source: &str) -> Result<Verdict, ReduceError> {
        let program = match self.program(source) {
            Ok(p) => p,
            Err(v) => return Ok(v),
        };
        let disable = self.spec.culprit.disabling_flags().unwrap_or_default();
        let outcome = self.with_probe(&program, |probe| {
            let base = match probe.violations(&Variant::Baseline) {
                Ok(v) => v,
                Err(TriageError::Build(e)) => return Ok(Verdict::no(format!("does not compile: {}", first_line(&e.to_string())))),
                Err(e) => return Err(e.into()),
            };
            let Some(line) = self.nearest(&base) else {
                return Ok(Verdict::no("violation does not reproduce"));
            };
            let disabled = match probe.violations(&Variant::Flags(disable)) {
                Ok(v) => v,
                Err(TriageError::Build(e)) => return Ok(Verdict::no(format!("culprit-disabled build fails: {}", first_line(&e.to_string())))),
                Err(e) => return Err(e.into()),
            };
            let k = &self.spec.key;
            if disabled.iter().any(|v| v.conjecture == k.conjecture && v.variable == k.variable && v.line == line) {
                return Ok(Verdict::no("violation survives with the culprit disabled"));
            }
            Ok(Verdict {
                interesting: true,
                reason: "reproduces and depends on the culprit".into(),
                matched_line: Some(line),
                fuzzy: line != k.line,
            })
        })?;
        let verdict = match outcome {
            Ok(v) => v,
            Err(v) => return Ok(v),
        };
        if verdict.interesting && self.spec.require_ub_clean && !self.spec.screen_tools.is_empty() {
            let screen = screen_undefined_behavior(&program, &self.spec.screen_tools)
                .map_err(|e| ReduceError::InvalidSpec(format!("screen failed to run: {e}")))?;
            if !screen.clean {
                return Ok(Verdict::no("fails the undefined-behavior screen"));
            }
        }
        Ok(verdict)
    }
}

fn first_line(s: &str) -> String {
    s.lines().next().unwrap_or("").to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_call_after_prototype() {
        let src = "int main(void) {\n  int a = 1, b = 2;\n  extern void sink(int, int); sink((int)a, (unsigned char)b);\n  return 0;\n}\n";
        let p = TestProgram::new(src.into(), "p.c".into());
        let c = locate_call(&p, "sink").unwrap();
        assert_eq!(c.line, 3);
        assert_eq!(c.argument_vars, vec!["a".to_string(), "b".to_string()]);
        assert_eq!(c.function, "main");
        assert!(locate_call(&p, "other").is_none());
    }

    #[test]
    fn literal_arguments_are_skipped() {
        assert_eq!(call_args("(x, 0, (int)y, 3 + z)"), vec!["x".to_string(), "y".to_string()]);
    }
}
