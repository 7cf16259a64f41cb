//! Wrapper compilers with a planted culprit, wired into triage probes.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use super::fake::{self, ReplayTracer};
use dbgcomplete::buildmatrix::{Family, OptLevel, ToolchainSpec};
use dbgcomplete::conjectures::{check_c1, ConjectureId, Violation};
use dbgcomplete::corpus::{OpaqueCallSite, TestProgram};
use dbgcomplete::dbgtrace::{AvailabilityState, Tracer};
use dbgcomplete::triage::{BuildProbe, ProbeSetup, Variant, ViolationProbe};

pub const CALL_LINE: u32 = 5;

pub struct Harness {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub toolchain: ToolchainSpec,
    pub program: TestProgram,
}

impl Harness {
    pub fn new(family: Family, plant: &str) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let toolchain = fake::install(&root, family, plant);
        let src = "int main(void) {\n  int x = 1;\n  x = x * 3;\n  int y = x;\n  opaque(x);\n  return 0;\n}\n";
        let mut program = TestProgram::new(src.into(), root.join("prog.c"));
        program.injected_call = Some(OpaqueCallSite {
            line: CALL_LINE,
            callee: "opaque".into(),
            argument_vars: vec!["x".into()],
            function: "main".into(),
        });
        Harness { _dir: dir, root, toolchain, program }
    }

    pub fn probe<'a>(&'a self, tracer: &'a ReplayTracer, violation: &Violation) -> BuildProbe<'a> {
        let setup = ProbeSetup {
            program: &self.program,
            facts: None,
            toolchain: &self.toolchain,
            opt_level: OptLevel::O2,
            tracer,
            work_dir: self.root.join("work"),
            stub_object: None,
            compile_timeout: Duration::from_secs(30),
            trace_timeout: Duration::from_secs(30),
        };
        BuildProbe::new(setup, violation).with_line_source(Box::new(fake::lines))
    }

    /// Build the baseline once and extract the violation from it.
    pub fn violation(&self, tracer: &ReplayTracer) -> Violation {
        let placeholder = Violation {
            program_id: self.program.id.clone(),
            conjecture: ConjectureId::C1,
            file: "prog.c".into(),
            line: CALL_LINE,
            variable: "x".into(),
            observed: AvailabilityState::VisibleOptimizedOut,
            expected: String::new(),
            configs: BTreeSet::new(),
            validation: Default::default(),
            die_verdict: None,
            function: "main".into(),
            frame_function: "main".into(),
            stop_pc: 0,
            original_line: None,
        };
        let probe = self.probe(tracer, &placeholder);
        let art = probe.build(&Variant::Baseline).unwrap();
        let set = fake::lines(&art.executable_path, "prog.c").unwrap();
        let trace = tracer.collect(&art, &set, Duration::from_secs(5)).unwrap();
        let found = check_c1(&trace, self.program.injected_call.as_ref().unwrap());
        assert_eq!(found.violations.len(), 1, "baseline must violate");
        found.violations[0].clone()
    }
}

pub fn catalog() -> Vec<String> {
    let mut c: Vec<String> = [
        "-fno-early-inlining",
        "-fno-tree-ccp",
        "-fno-toplevel-reorder",
        "-fno-ipa-sra",
        "-fno-inline-small-functions",
        "-fno-tree-vrp",
        "-fno-tree-fre",
        "-fno-tree-pta",
        "-fno-schedule-insns2",
        "-fno-tree-dse",
        "-fno-tree-ch",
        "-fno-tree-dce",
        "-fno-ipa-pure-const",
        "-fno-inline-functions-called-once",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    c.extend((0..16).map(|i| format!("-fno-pass-{i}")));
    c
}

/// Exhaustive oracle: the smallest limit at which the violation shows.
pub fn linear_scan(probe: &dyn ViolationProbe, total: i64) -> Option<i64> {
    (0..=total).find(|&n| probe.present(&Variant::BisectLimit(n)).unwrap())
}
