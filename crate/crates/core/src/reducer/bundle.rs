use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Predicate, ReduceError, ReductionResult};
use crate::buildmatrix::BuiltArtifact;
use crate::conjectures::Violation;
use crate::dbgtrace::{DebugTrace, SteppableLineSet};
use crate::dwarfscope::{die_diff, DieDiff, DieVerdict};
use crate::store::{write_atomic, write_json};
use crate::triage::Variant;

/// Material gathered from the two builds of a reduced program.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BundleInputs {
    pub compiler_version: String,
    pub debugger_version: String,
    pub baseline_log: String,
    pub disabled_log: String,
    pub baseline_asm: String,
    pub disabled_asm: String,
    /// Trace records at the violating line, one per build.
    pub trace_excerpt: Vec<String>,
    pub violation: Option<Violation>,
    pub die_verdict: Option<DieVerdict>,
    pub die_diff: Option<DieDiff>,
    pub asm_diff: String,
    pub same_code: bool,
    /// How the debugger cross-check came out, when it ran.
    pub cross_validation: Option<String>,
}

fn excerpt(label: &str, trace: &DebugTrace, line: u32) -> String {
    match trace.record_at(line) {
        None => format!("{label}: line {line} not reached"),
        Some(r) => {
            let obs: Vec<String> = r.observations.iter().map(|(k, v)| format!("{k}={}", v.value_text().unwrap_or(v.tag()))).collect();
            format!("{label}: {}:{} pc={:#x} frame={} {}", r.file, r.line, r.stop_pc, r.frame_function, obs.join(" "))
        }
    }
}

fn trace_all(predicate: &Predicate, art: &BuiltArtifact, file: &str) -> Result<DebugTrace, ReduceError> {
    let lines = crate::dbgtrace::extract_steppable_lines(&art.executable_path, file)
        .unwrap_or_else(|_| SteppableLineSet::default());
    let timeout = Duration::from_secs(predicate.spec().trace_timeout_s);
    predicate
        .tracer()
        .collect(art, &lines, timeout)
        .map_err(|e| crate::triage::TriageError::Trace(e).into())
}

/// Rebuild `source` with and without the culprit and collect what a report needs.
pub fn collect_bundle_inputs(predicate: &Predicate, source: &str) -> Result<BundleInputs, ReduceError> {
    let program = predicate.program(source).map_err(|v| ReduceError::PreconditionFlaky(v.reason))?;
    let spec = predicate.spec();
    let disable = spec.culprit.disabling_flags().unwrap_or_default();
    let out = predicate.with_probe(&program, |probe| {
        let base = probe.build(&Variant::Baseline)?;
        let off = probe.build(&Variant::Flags(disable))?;
        let found = probe.violations(&Variant::Baseline)?;
        let line = predicate.nearest(&found).unwrap_or(spec.key.line);
        let violation = found
            .into_iter()
            .find(|v| v.line == line && v.variable == spec.key.variable);
        let t_base = trace_all(predicate, &base, &spec.file_name)?;
        let t_off = trace_all(predicate, &off, &spec.file_name)?;
        let function = violation.as_ref().map(|v| v.function.clone()).unwrap_or_default();
        let diff = die_diff(&base, &off, &function, &spec.key.variable).ok();
        let read = |a: &BuiltArtifact| {
            std::fs::read_to_string(a.executable_path.with_file_name("asm.s")).unwrap_or_default()
        };
        let (asm_a, asm_b) = (read(&base), read(&off));
        let asm_diff = match &diff {
            Some(d) => d.asm_diff.clone(),
            None => similar::TextDiff::from_lines(
                &crate::buildmatrix::normalize_asm(&asm_a),
                &crate::buildmatrix::normalize_asm(&asm_b),
            )
            .unified_diff()
            .header("baseline", "culprit-disabled")
            .to_string(),
        };
        Ok(BundleInputs {
            compiler_version: spec.toolchain.version_string.clone(),
            debugger_version: predicate.tracer().id(),
            baseline_log: base.build_log.clone(),
            disabled_log: off.build_log.clone(),
            baseline_asm: asm_a,
            disabled_asm: asm_b,
            trace_excerpt: vec![excerpt("baseline", &t_base, line), excerpt("culprit-disabled", &t_off, line)],
            die_verdict: violation.as_ref().and_then(|v| v.die_verdict.clone()),
            violation,
            die_diff: diff,
            asm_diff,
            same_code: base.asm_hash == off.asm_hash,
            cross_validation: None,
        })
    })?;
    out.map_err(|v| ReduceError::PreconditionFlaky(v.reason))
}

/// Write `report/` under `dir` and return its path.
pub fn emit_report_bundle(
    result: &mut ReductionResult,
    predicate: &Predicate,
    inputs: &BundleInputs,
    dir: &Path,
) -> Result<PathBuf, ReduceError> {
    if !result.final_verification {
        return Err(ReduceError::NotVerified);
    }
    let spec = predicate.spec();
    let report = dir.join("report");
    std::fs::create_dir_all(&report)?;
    write_atomic(&report.join(&spec.file_name), result.reduced_source.as_bytes())?;
    write_atomic(
        &report.join("versions.txt"),
        format!("compiler: {}\ndebugger: {}\n", inputs.compiler_version, inputs.debugger_version).as_bytes(),
    )?;
    write_atomic(
        &report.join("commands.txt"),
        format!("# baseline\n{}\n# culprit disabled\n{}", inputs.baseline_log, inputs.disabled_log).as_bytes(),
    )?;
    write_atomic(&report.join("trace.txt"), (inputs.trace_excerpt.join("\n") + "\n").as_bytes())?;
    write_json(&report.join("attribution.json"), &spec.culprit)?;
    write_json(&report.join("spec.json"), spec)?;
    write_atomic(&report.join("asm.diff"), inputs.asm_diff.as_bytes())?;
    write_atomic(&report.join("baseline.s"), inputs.baseline_asm.as_bytes())?;
    write_atomic(&report.join("disabled.s"), inputs.disabled_asm.as_bytes())?;
    if let Some(d) = &inputs.die_diff {
        write_atomic(&report.join("die.txt"), d.render_text().as_bytes())?;
    }
    let summary = serde_json::json!({
        "key": spec.key.to_string(),
        "same_code": inputs.same_code,
        "die_verdict": inputs.die_verdict,
        "cross_validation": inputs.cross_validation,
        "matched_line": result.final_verdict.matched_line,
        "fuzzy_line": result.final_verdict.fuzzy,
        "label": result.label,
        "iterations": result.iterations,
        "lines": [result.original_lines, result.reduced_lines],
    });
    write_json(&report.join("summary.json"), &summary)?;
    let rerun = format!(
        "#!/bin/sh\n# reproduce: exits 0 when the violation still shows and depends on the culprit\ncd \"$(dirname \"$0\")\"\nexec \"${{DBGCOMPLETE:-dbgcomplete}}\" interesting --spec spec.json {}\n",
        spec.file_name
    );
    write_atomic(&report.join("rerun.sh"), rerun.as_bytes())?;
    super::set_executable(&report.join("rerun.sh"))?;
    write_atomic(&report.join("README"), readme(result, predicate, inputs).as_bytes())?;
    result.bundle_path = Some(report.clone());
    Ok(report)
}

fn readme(result: &ReductionResult, predicate: &Predicate, inputs: &BundleInputs) -> String {
    let spec = predicate.spec();
    let mut s = String::new();
    let _ = writeln!(s, "Debug information loss: {}", spec.key);
    let _ = writeln!(s, "\nCompiler: {}\nDebugger: {}", inputs.compiler_version, inputs.debugger_version);
    let _ = writeln!(s, "Optimization level: {}", spec.opt_level);
    if let Some(flags) = spec.culprit.disabling_flags() {
        let _ = writeln!(s, "The loss disappears when adding: {}", flags.join(" "));
    }
    if let Some(l) = &result.label {
        let _ = writeln!(s, "\nNOTE: {l}");
    }
    if result.final_verdict.fuzzy {
        let _ = writeln!(
            s,
            "\nThe violation was re-identified at line {} after reduction (recorded line {}).",
            result.final_verdict.matched_line.unwrap_or(0),
            spec.key.line
        );
    }
    let _ = writeln!(s, "\nSame code with and without the culprit: {}", inputs.same_code);
    match (&inputs.die_diff, &inputs.cross_validation) {
        (Some(_), _) => {
            let _ = writeln!(s, "DIE comparison: die.txt");
        }
        (None, Some(cv)) => {
            let _ = writeln!(s, "No DIE comparison; debugger cross-check: {cv}");
        }
        (None, None) => {
            let _ = writeln!(s, "No DIE comparison.");
        }
    }
    s.push_str(
        "\nFiles\n\
         \x20 <source>          reduced program\n\
         \x20 versions.txt      compiler and debugger versions\n\
         \x20 commands.txt      build command lines and logs\n\
         \x20 trace.txt         debugger view of the violating line in both builds\n\
         \x20 attribution.json  culprit optimization\n\
         \x20 asm.diff          normalized assembly diff, baseline vs culprit disabled\n\
         \x20 die.txt           variable DIE differences, when available\n\
         \x20 summary.json      machine-readable summary\n\
         \x20 rerun.sh          re-checks the violation end to end\n",
    );
    s
}
