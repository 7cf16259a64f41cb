//! Acceptance run: one PASS/FAIL line per criterion.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use common::criteria::{self, Verdict};

const PROGRAMS: usize = 50;
const WORKERS: usize = 4;
const BUDGET: Duration = Duration::from_secs(30 * 60);

fn generator() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/gen_programs.py")
}

fn write_config(dir: &Path, store: &Path) -> PathBuf {
    let text = format!(
        r#"schema = 1
levels = ["O1", "O2"]
conjectures = ["C1", "C2", "C3"]
program_count = {PROGRAMS}
seed = 2024
parallelism = {WORKERS}
store_root = "{store}"
generator_path = "{gen}"

[[toolchains]]
id = "gcc"
family = "gcc"
compiler_path = "/usr/bin/gcc"
debugger_path = "/usr/bin/gdb"
"#,
        store = store.display(),
        gen = generator().display()
    );
    let path = dir.join(format!("{}.toml", store.file_name().unwrap().to_string_lossy()));
    std::fs::write(&path, text).unwrap();
    path
}

fn campaign_cmd(config: &Path) -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_dbgcomplete"));
    cmd.arg("campaign").arg("--config").arg(config).stdout(Stdio::null()).stderr(Stdio::piped());
    cmd
}

fn campaign_tools() -> Result<(), String> {
    for (tool, path) in [("gcc", "/usr/bin/gcc"), ("gdb", "/usr/bin/gdb")] {
        if !Path::new(path).exists() {
            return Err(format!("{tool} not installed at {path}"));
        }
    }
    if !common::have("python3") {
        return Err("python3 not installed".into());
    }
    Ok(())
}

/// Uninterrupted campaign; returns the verdict and the store it filled.
fn throughput(work: &Path) -> (Verdict, Option<PathBuf>) {
    if let Err(e) = campaign_tools() {
        return (Verdict::Skip(e), None);
    }
    let store = work.join("uninterrupted");
    let config = write_config(work, &store);
    let start = Instant::now();
    let out = campaign_cmd(&config).output().unwrap();
    let took = start.elapsed();
    if !out.status.success() {
        let err = String::from_utf8_lossy(&out.stderr).into_owned();
        return (Verdict::Fail(format!("campaign exited {}: {err}", out.status)), None);
    }
    let summary = std::fs::read_to_string(store.join("summary.json")).unwrap_or_default();
    let generated = serde_json::from_str::<serde_json::Value>(&summary)
        .ok()
        .and_then(|v| v["generated_programs"].as_u64())
        .unwrap_or(0);
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let detail = format!(
        "{PROGRAMS} programs x 3 conjectures x 2 levels, {WORKERS} workers on {cores} core(s): {:.0}s ({:.1}s/program, {generated} generated)",
        took.as_secs_f64(),
        took.as_secs_f64() / PROGRAMS as f64
    );
    let v = if took <= BUDGET { Verdict::Pass(detail) } else { Verdict::Fail(format!("{detail}, over {BUDGET:?}")) };
    (v, Some(store))
}

/// Kill the process group hard, as a crash or power loss would.
fn kill_group(child: &mut std::process::Child) {
    let _ = Command::new("kill").args(["-KILL", "--", &format!("-{}", child.id())]).status();
    let _ = child.wait();
}

fn resumability(work: &Path, reference: Option<&Path>, reference_time: Duration) -> Verdict {
    let Some(reference) = reference else {
        return Verdict::Skip("needs the uninterrupted campaign".into());
    };
    let store = work.join("interrupted");
    let config = write_config(work, &store);
    let mut kills = 0;
    for fraction in [0.15, 0.35] {
        let mut child = campaign_cmd(&config).process_group(0).spawn().unwrap();
        std::thread::sleep(reference_time.mul_f64(fraction));
        if child.try_wait().unwrap().is_none() {
            kill_group(&mut child);
            kills += 1;
        }
    }
    let out = campaign_cmd(&config).output().unwrap();
    if !out.status.success() {
        return Verdict::Fail(format!("resumed campaign failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let a = std::fs::read(reference.join("violations.json")).unwrap_or_default();
    let b = std::fs::read(store.join("violations.json")).unwrap_or_default();
    let n = serde_json::from_slice::<serde_json::Value>(&a)
        .ok()
        .and_then(|v| v["violations"].as_array().map(|x| x.len()))
        .unwrap_or(0);
    if kills == 0 {
        Verdict::Fail("campaign finished before it could be interrupted".into())
    } else if a.is_empty() || a != b {
        Verdict::Fail(format!("violations.json differs after {kills} kills ({} vs {} bytes)", a.len(), b.len()))
    } else {
        Verdict::Pass(format!("{kills} SIGKILLs then resume: violations.json byte-identical ({n} violations, {} bytes)", a.len()))
    }
}

fn report(n: usize, name: &str, v: &Verdict) {
    let (tag, detail) = match v {
        Verdict::Pass(d) => ("PASS", d),
        Verdict::Fail(d) => ("FAIL", d),
        Verdict::Skip(d) => ("SKIP", d),
    };
    println!("{tag} criterion {n:>2} {name}: {detail}");
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from other targets
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let work = tempfile::tempdir().unwrap();
    let mut results = vec![
        (1, "conjecture fixture suite", criteria::fixture_suite()),
        (2, "C3 oracle equivalence", criteria::c3_oracle(1000, 2024)),
        (3, "dedupe and Venn counts", criteria::dedupe_venn(1000, 2024)),
        (4, "triage planted culprits", criteria::triage_oracle()),
        (5, "DIE classifier", criteria::die_classifier()),
        (6, "metrics identities", criteria::metrics_identities()),
        (7, "end-to-end smoke", criteria::end_to_end_smoke()),
    ];
    for (n, name, v) in &results {
        report(*n, name, v);
    }
    let start = Instant::now();
    let (v8, store) = throughput(work.path());
    let t8 = start.elapsed();
    report(8, "campaign throughput", &v8);
    let v9 = resumability(work.path(), store.as_deref(), t8);
    report(9, "kill and resume", &v9);
    let v10 = criteria::predicate_triple();
    report(10, "reduction predicate", &v10);
    results.extend([(8, "", v8), (9, "", v9), (10, "", v10)]);

    let failed = results.iter().filter(|(_, _, v)| matches!(v, Verdict::Fail(_))).count();
    let passed = results.iter().filter(|(_, _, v)| v.is_pass()).count();
    println!("acceptance: {passed} passed, {failed} failed, {} skipped", results.len() - passed - failed);
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
