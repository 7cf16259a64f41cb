//! Acceptance checks shared by the per-crate tests and the acceptance target.
//!
//! Each check returns a [`Verdict`] instead of panicking so the acceptance
//! runner can report every criterion even when an earlier one fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use dbgcomplete::buildmatrix::{compile, BuildConfig, CompileOptions, Family, OptLevel, ToolchainSpec};
use dbgcomplete::conjectures::{
    analyze_source, check_c1, check_c2, check_c3, dedupe, per_level_counts, venn_regions, CheckOutcome,
    ConjectureId, IdentityKey, Instance, SourceFacts, VarInstances,
};
use dbgcomplete::corpus::{OpaqueCallSite, TestProgram};
use dbgcomplete::dbgtrace::{
    collect_trace, extract_steppable_lines, tracer_for, AvailabilityState, DebugTrace, LineRecord, ValidationOutcome,
};
use dbgcomplete::dwarfscope::{classify_die, lookup_var_die, DieTag, VarDieInfo};
use dbgcomplete::metrics::{aggregate, compute_record, line_coverage, variable_availability};
use dbgcomplete::reducer::{InterestingnessSpec, Predicate};
use dbgcomplete::triage::{triage_bisect, triage_flags, AttributionKind, CulpritAttribution, FlagSearch};
use dbgcomplete::MetricsRecord64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use super::fake::{self, ReplayTracer};
use super::harness::{catalog, linear_scan, Harness};
use super::{fixture, record, trace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass(String),
    Fail(String),
    /// Preconditions (tools) missing; nothing was checked.
    Skip(String),
}

impl Verdict {
    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass(_))
    }

    /// Panic unless passed; a skip is accepted.
    pub fn expect_ok(self) {
        if let Verdict::Fail(why) = self {
            panic!("{why}");
        }
    }
}

fn verdict(failures: Vec<String>, detail: String) -> Verdict {
    if failures.is_empty() {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(failures.join("; "))
    }
}

fn timed(limit: Duration, start: Instant, failures: &mut Vec<String>) -> Duration {
    let took = start.elapsed();
    if took > limit {
        failures.push(format!("took {took:.2?}, limit {limit:?}"));
    }
    took
}

// ---------------------------------------------------------------- fixtures

#[derive(Deserialize)]
pub struct Cases {
    pub case: Vec<Case>,
}

#[derive(Deserialize)]
pub struct Call {
    line: u32,
    callee: String,
    function: String,
    args: Vec<String>,
}

#[derive(Deserialize)]
pub struct Case {
    pub name: String,
    file: Option<String>,
    source: Option<String>,
    call: Option<Call>,
    records: Vec<String>,
    pub expect: Vec<String>,
    #[serde(default)]
    pub skips: Option<usize>,
}

pub fn load_cases() -> Cases {
    let text = std::fs::read_to_string(fixture("conjecture_cases.toml")).unwrap();
    toml::from_str(&text).unwrap()
}

/// Run all three checkers over one case; violations as `C:line:var:state`.
pub fn run_case(case: &Case) -> (BTreeSet<String>, CheckOutcome) {
    let source = match (&case.file, &case.source) {
        (Some(f), _) => std::fs::read_to_string(fixture(&format!("programs/{f}"))).unwrap(),
        (None, Some(s)) => s.trim_start_matches('\n').to_string(),
        _ => panic!("{}: no source", case.name),
    };
    let mut program = TestProgram::new(source, "prog.c".into());
    if let Some(c) = &case.call {
        program.injected_call = Some(OpaqueCallSite {
            line: c.line,
            callee: c.callee.clone(),
            argument_vars: c.args.clone(),
            function: c.function.clone(),
        });
    }
    let facts = analyze_source(&program).unwrap_or_else(|e| panic!("{}: {e}", case.name));
    let records = case.records.iter().map(|r| record(r, "prog.c")).collect();
    let trace = trace(&program.id, OptLevel::O2, records);
    let mut out = CheckOutcome::default();
    if let Some(call) = &program.injected_call {
        out.extend(check_c1(&trace, call));
    }
    out.extend(check_c2(&trace, &facts));
    out.extend(check_c3(&trace, &facts));
    let got = out
        .violations
        .iter()
        .map(|v| format!("{}:{}:{}:{}", v.conjecture, v.line, v.variable, v.observed.tag()))
        .collect();
    (got, out)
}

/// Shapes of the four published case studies, by fixture name.
pub const CASE_STUDIES: [&str; 4] = [
    "constant multiplicand optimized out in array access",
    "argument optimized out at the call",
    "induction variable lost at the second store",
    "pointer reappears at the call after its assignment",
];

pub fn fixture_suite() -> Verdict {
    let start = Instant::now();
    let cases = load_cases();
    let mut failures = Vec::new();
    if cases.case.len() < 30 {
        failures.push(format!("only {} cases", cases.case.len()));
    }
    for name in CASE_STUDIES {
        if !cases.case.iter().any(|c| c.name == name) {
            failures.push(format!("case study `{name}` missing"));
        }
    }
    for case in &cases.case {
        let (got, out) = run_case(case);
        let want: BTreeSet<String> = case.expect.iter().cloned().collect();
        if got != want {
            failures.push(format!("{}: want {want:?}, got {got:?}", case.name));
        }
        if let Some(n) = case.skips {
            if out.skipped.len() != n {
                failures.push(format!("{}: {} skips, want {n}", case.name, out.skipped.len()));
            }
        }
    }
    let took = timed(Duration::from_secs(5), start, &mut failures);
    verdict(failures, format!("{} cases exact in {took:.2?}", cases.case.len()))
}

// ---------------------------------------------------------------- C3 oracle

pub fn var(i: usize) -> String {
    format!("v{i}")
}

pub fn state(code: u8) -> Option<AvailabilityState> {
    match code % 4 {
        0 => None,
        1 => Some(AvailabilityState::NotVisible),
        2 => Some(AvailabilityState::VisibleOptimizedOut),
        _ => Some(AvailabilityState::available("1")),
    }
}

/// All-pairs scan: the first record in each window that outranks some
/// earlier record in the same window.
pub fn brute_c3(records: &[LineRecord], facts: &SourceFacts) -> BTreeSet<(u32, String)> {
    let mut out = BTreeSet::new();
    for vi in &facts.var_instances {
        for (k, inst) in vi.instances.iter().enumerate() {
            let next = vi.instances.get(k + 1).map_or(u32::MAX, |n| n.assign_line);
            let after = records
                .iter()
                .position(|r| r.line == inst.assign_line)
                .map_or(0, |p| p + 1);
            let window: Vec<&LineRecord> = records
                .iter()
                .skip(after)
                .filter(|r| r.frame_function == vi.function)
                .filter(|r| r.line > inst.assign_line && r.line < next && r.line <= inst.scope_end_line)
                .collect();
            let rank = |r: &LineRecord| r.state(&vi.variable).rank();
            'scan: for j in 0..window.len() {
                for i in 0..j {
                    if rank(window[i]) < rank(window[j]) {
                        out.insert((window[j].line, vi.variable.clone()));
                        break 'scan;
                    }
                }
            }
        }
    }
    out
}

fn random_c3_case(rng: &mut ChaCha8Rng) -> (Vec<LineRecord>, SourceFacts) {
    let nvars = rng.gen_range(1..=10);
    let mut lines: Vec<u32> = (1..=50).filter(|_| rng.gen_bool(0.6)).collect();
    // stop order differs from line order now and then
    for i in (1..lines.len()).rev() {
        if rng.gen_bool(0.1) {
            let j = rng.gen_range(0..=i);
            lines.swap(i, j);
        }
    }
    let records = lines
        .iter()
        .map(|&line| LineRecord {
            file: "prog.c".into(),
            line,
            stop_pc: line as u64,
            frame_function: if rng.gen_ratio(1, 10) { "other".into() } else { "main".into() },
            observations: (0..nvars).filter_map(|v| state(rng.gen()).map(|s| (var(v), s))).collect(),
        })
        .collect();
    let var_instances = (0..nvars)
        .map(|v| {
            let mut assigns: BTreeSet<u32> = BTreeSet::new();
            for _ in 0..rng.gen_range(1..5) {
                assigns.insert(rng.gen_range(1..=50));
            }
            let end = (*assigns.iter().max().unwrap() + rng.gen_range(0..=40)).min(50);
            VarInstances {
                function: "main".into(),
                variable: var(v),
                instances: assigns.into_iter().map(|l| Instance { assign_line: l, scope_end_line: end }).collect(),
            }
        })
        .collect();
    (records, SourceFacts { var_instances, ..Default::default() })
}

pub fn c3_oracle(cases: usize, seed: u64) -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let mut found = 0;
    for n in 0..cases {
        let (records, facts) = random_c3_case(&mut rng);
        let t = trace("p", OptLevel::O2, records.clone());
        let got: BTreeSet<(u32, String)> =
            check_c3(&t, &facts).violations.into_iter().map(|v| (v.line, v.variable)).collect();
        let want = brute_c3(&records, &facts);
        found += want.len();
        if got != want && failures.len() < 3 {
            failures.push(format!("case {n}: got {got:?}, oracle {want:?}"));
        }
    }
    let took = timed(Duration::from_secs(30), start, &mut failures);
    verdict(failures, format!("{cases}/{cases} cases agree ({found} violations) in {took:.2?}"))
}

// ---------------------------------------------------------------- dedupe / Venn

#[derive(Deserialize)]
struct LevelEntry {
    program_id: String,
    line: u32,
    variable: String,
    level: OptLevel,
}

fn c1_violation(program: &str, line: u32, variable: &str, level: OptLevel) -> dbgcomplete::conjectures::Violation {
    let t = trace(program, level, vec![record(&format!("{line} main"), "prog.c")]);
    let call = OpaqueCallSite {
        line,
        callee: "sink".into(),
        argument_vars: vec![variable.to_string()],
        function: "main".into(),
    };
    check_c1(&t, &call).violations.remove(0)
}

/// The recorded clang C1 per-level table: per-level counts and the unique count.
pub fn clang_level_table() -> (BTreeMap<OptLevel, usize>, usize, usize) {
    let text = std::fs::read_to_string(fixture("clang_c1_levels.json")).unwrap();
    let entries: Vec<LevelEntry> = serde_json::from_str(&text).unwrap();
    let d = dedupe(entries.iter().map(|e| c1_violation(&e.program_id, e.line, &e.variable, e.level)));
    let regions = venn_regions(&d.level_matrix).values().sum();
    (per_level_counts(&d.level_matrix), d.unique.len(), regions)
}

pub fn dedupe_venn(rounds: usize, seed: u64) -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    let levels = [OptLevel::Og, OptLevel::O1, OptLevel::O2, OptLevel::O3, OptLevel::Os];
    for n in 0..rounds {
        let mut all = Vec::new();
        let mut union: BTreeSet<String> = BTreeSet::new();
        for &level in &levels {
            for _ in 0..rng.gen_range(0..30) {
                let (p, line, v) = (format!("p{}", rng.gen_range(0..5)), rng.gen_range(1..20), var(rng.gen_range(0..4)));
                union.insert(IdentityKey { program_id: p.clone(), conjecture: ConjectureId::C1, line, variable: v.clone() }.to_string());
                all.push(c1_violation(&p, line, &v, level));
            }
        }
        let d = dedupe(all);
        let regions: usize = venn_regions(&d.level_matrix).values().sum();
        if d.unique.len() != union.len() || regions != union.len() {
            failures.push(format!("round {n}: unique {} regions {regions}, union {}", d.unique.len(), union.len()));
            break;
        }
    }
    let (counts, unique, regions) = clang_level_table();
    let want = BTreeMap::from([(OptLevel::Og, 71), (OptLevel::O2, 51), (OptLevel::O3, 51), (OptLevel::Os, 73), (OptLevel::Oz, 74)]);
    if counts != want {
        failures.push(format!("per-level counts {counts:?}"));
    }
    if unique != 84 || regions != 84 {
        failures.push(format!("table replay unique {unique}, regions {regions}; want 84"));
    }
    verdict(failures, format!("{rounds} random rounds match set union; table replay unique={unique}"))
}

// ---------------------------------------------------------------- triage

pub fn triage_oracle() -> Verdict {
    let start = Instant::now();
    let cat = catalog();
    let tracer = ReplayTracer;
    let mut failures = Vec::new();
    let mut gcc_ok = 0;
    for k in 0..20 {
        let planted = &cat[(k * 7 + 1) % cat.len()];
        let h = Harness::new(Family::Gcc, &format!("flags {planted}"));
        let v = h.violation(&tracer);
        let a = triage_flags(&h.probe(&tracer, &v), &cat, FlagSearch::default());
        match a {
            Ok(a) if a.gcc_flags.as_deref() == Some(&[planted.clone()][..]) && a.verification == Some((true, true)) => gcc_ok += 1,
            other => failures.push(format!("plant {planted}: {other:?}")),
        }
    }
    let mut clang_ok = 0;
    for k in 0..20u32 {
        let total = 12 + k * 3;
        let at = 1 + (k * 11) % total;
        let h = Harness::new(Family::Clang, &format!("bisect {at} {total}"));
        let v = h.violation(&tracer);
        let probe = h.probe(&tracer, &v);
        let found = triage_bisect(&probe).ok().and_then(|a| a.clang_pass).map(|p| p.index);
        let minimal = linear_scan(&probe, total as i64);
        if found == Some(at) && minimal == Some(at as i64) {
            clang_ok += 1;
        } else {
            failures.push(format!("bisect plant {at}/{total}: found {found:?}, linear scan {minimal:?}"));
        }
    }
    let took = timed(Duration::from_secs(120), start, &mut failures);
    verdict(failures, format!("gcc {gcc_ok}/20, clang {clang_ok}/20 in {took:.1?}"))
}

// ---------------------------------------------------------------- DIE classifier

#[derive(Deserialize)]
struct Snapshot {
    issue: String,
    stop_pc: u64,
    die: Option<VarDieInfo>,
    validation: ValidationOutcome,
    category: String,
}

/// Category counts from replaying the bundled DIE snapshots; mismatching issues listed.
pub fn snapshot_split() -> (BTreeMap<DieTag, usize>, usize, Vec<String>) {
    let text = std::fs::read_to_string(fixture("die_snapshots.json")).unwrap();
    let snaps: Vec<Snapshot> = serde_json::from_str(&text).unwrap();
    let mut counts = BTreeMap::new();
    let mut wrong = Vec::new();
    for s in &snaps {
        let v = classify_die(s.die.as_ref(), s.stop_pc, &s.validation);
        if format!("{:?}", v.tag) != s.category {
            wrong.push(s.issue.clone());
        }
        *counts.entry(v.tag).or_insert(0) += 1;
    }
    (counts, snaps.len(), wrong)
}

pub fn die_classifier() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let exe = super::crafted::crafted(dir.path());
    let none = ValidationOutcome::default();
    let refuted = ValidationOutcome { refuted_in: vec!["alt".into()], ..Default::default() };
    let look = |v: &str, pc: u64| lookup_var_die(&exe, "main", v, pc).ok().flatten();
    let cases: [(&str, u64, &ValidationOutcome, DieTag); 5] = [
        ("gone", 0x1050, &none, DieTag::Missing),
        ("hollow", 0x1050, &none, DieTag::Hollow),
        ("partial", 0x1070, &none, DieTag::Incomplete),
        ("spilled", 0x10f0, &refuted, DieTag::Incorrect),
        ("spilled", 0x10f0, &none, DieTag::Complete),
    ];
    let mut failures = Vec::new();
    for (var, pc, val, want) in cases {
        let got = classify_die(look(var, pc).as_ref(), pc, val).tag;
        if got != want {
            failures.push(format!("{var}@{pc:#x}: {got:?}, want {want:?}"));
        }
    }
    let (counts, n, wrong) = snapshot_split();
    let want: BTreeMap<DieTag, usize> =
        [(DieTag::Missing, 4), (DieTag::Hollow, 16), (DieTag::Incomplete, 12), (DieTag::Incorrect, 3)].into();
    if n != 35 || counts != want || !wrong.is_empty() {
        failures.push(format!("snapshot split {counts:?} over {n}, mismatched {wrong:?}"));
    }
    verdict(failures, format!("5/5 crafted verdicts; snapshot split {counts:?} over {n}"))
}

// ---------------------------------------------------------------- metrics

fn tr(level: OptLevel, recs: &[&str]) -> DebugTrace {
    trace("p", level, recs.iter().map(|r| record(r, "prog.c")).collect())
}

/// Mean of the optional per-record values, computed from scratch.
fn brute_mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn metrics_identities() -> Verdict {
    let mut failures = Vec::new();
    let t = tr(OptLevel::O0, &["3 main i=1 j=2", "4 main i=1 j=opt", "5 main"]);
    if line_coverage::<f64>(&t, &t) != Ok(1.0) || variable_availability::<f64>(&t, &t) != Ok(1.0) {
        failures.push("self-comparison is not exactly 1.0".into());
    }
    let o0 = tr(OptLevel::O0, &["7 main i=0 j=1 k=2"]);
    let opt = tr(OptLevel::O2, &["7 main i=0 j=opt k=2"]);
    let a: f64 = variable_availability(&opt, &o0).unwrap_or(f64::NAN);
    if (a - 2.0 / 3.0).abs() >= 1e-12 {
        failures.push(format!("two of three gives {a}"));
    }

    let o0 = tr(OptLevel::O0, &["1 main a=1 b=2", "2 main a=1 b=2 c=3", "3 main a=1", "4 main"]);
    let variants = [
        ("11", vec!["1 main a=1 b=opt", "2 main a=1 b=2 c=opt"]),
        ("11", vec!["1 main a=1 b=2", "3 main a=opt", "4 main"]),
        ("12", vec!["2 main a=opt b=opt c=opt"]),
        ("12", vec!["1 main a=1 b=2", "2 main a=1 b=2 c=3", "3 main a=1", "4 main"]),
    ];
    let records: Vec<MetricsRecord64> = variants
        .iter()
        .enumerate()
        .map(|(i, (ver, recs))| compute_record(&format!("p{i}"), ver, &tr(OptLevel::O2, recs), &o0).unwrap())
        .collect();
    let agg = aggregate(&records);
    for row in &agg.rows {
        let mine: Vec<&MetricsRecord64> = records.iter().filter(|r| r.version == row.version).collect();
        let lc = brute_mean(mine.iter().map(|r| Some(r.line_coverage)));
        let av = brute_mean(mine.iter().map(|r| r.availability));
        if Some(row.line_coverage) != lc || row.availability != av {
            failures.push(format!("aggregate row {} differs from recomputation", row.version));
        }
    }
    verdict(failures, format!("identities exact; {} aggregate rows match recomputation", agg.rows.len()))
}

// ---------------------------------------------------------------- live smoke

pub fn live_gcc() -> Option<ToolchainSpec> {
    if !super::have("gcc") || !super::have("gdb") {
        return None;
    }
    ToolchainSpec::probe("gcc", Family::Gcc, Path::new("gcc"), Path::new("gdb")).ok()
}

/// The constant-multiplicand listing at `-O1`: C2 violation for `j`, DIE verdict Hollow.
pub fn end_to_end_smoke() -> Verdict {
    let Some(tc) = live_gcc() else {
        return Verdict::Skip("gcc or gdb not installed".into());
    };
    let src = std::fs::read_to_string(fixture("programs/loop_index.c")).unwrap();
    let program = TestProgram::new(src, "loop_index.c".into());
    let dir = tempfile::tempdir().unwrap();
    let run = || -> Result<Option<(String, DieTag)>, String> {
        let art = compile(&program, &tc, &BuildConfig::new(OptLevel::O1), &CompileOptions::new(dir.path()))
            .map_err(|e| e.to_string())?;
        let lines = extract_steppable_lines(&art.executable_path, "loop_index.c").map_err(|e| e.to_string())?;
        let tracer = tracer_for(Path::new("gdb"));
        let t = collect_trace(tracer.as_ref(), &art, &lines, Duration::from_secs(60)).map_err(|e| e.to_string())?;
        let facts = analyze_source(&program).map_err(|e| e.to_string())?;
        let Some(j) = check_c2(&t, &facts).violations.into_iter().find(|v| v.variable == "j" && v.line == 8) else {
            return Ok(None);
        };
        let pc = j.stop_pc - t.load_bias;
        let die = lookup_var_die(&art.executable_path, "main", "j", pc).map_err(|e| e.to_string())?;
        Ok(Some((j.observed.tag().to_string(), classify_die(die.as_ref(), pc, &Default::default()).tag)))
    };
    let affected = tc.version_string.contains(" 11.") || tc.version_string.contains(" 12.");
    match run() {
        Err(e) => Verdict::Fail(e),
        Ok(Some((obs, DieTag::Hollow))) if affected => {
            Verdict::Pass(format!("{}: j at line 8 {obs}, DIE Hollow", tc.version_string))
        }
        Ok(None) if !affected => Verdict::Pass(format!("{}: fixed compiler, no violation", tc.version_string)),
        Ok(other) => Verdict::Fail(format!("{}: unexpected outcome {other:?}", tc.version_string)),
    }
}

// ---------------------------------------------------------------- predicate

pub fn planted_source(plant: &str) -> String {
    format!("/* plant: {plant} */\nint main(void) {{\n  int x = 1;\n  x = x * 3;\n  opaque(x);\n  return 0;\n}}\n")
}

pub fn planted_spec(dir: &Path, culprit: CulpritAttribution, family: Family) -> InterestingnessSpec {
    InterestingnessSpec {
        key: IdentityKey { program_id: "p".into(), conjecture: ConjectureId::C1, line: 5, variable: "x".into() },
        file_name: "prog.c".into(),
        toolchain: fake::install(dir, family, "never"),
        opt_level: OptLevel::O2,
        culprit,
        require_ub_clean: true,
        screen_tools: vec![],
        opaque_callee: Some("opaque".into()),
        stub_source: None,
        compile_timeout_s: 30,
        trace_timeout_s: 30,
    }
}

pub fn planted_predicate(spec: InterestingnessSpec, dir: &Path) -> Predicate {
    Predicate::new(spec, dir.join("work"))
        .unwrap()
        .with_tracer(Box::new(ReplayTracer))
        .with_line_source(Arc::new(fake::lines))
}

/// Original interesting; culprit-disabled behavior and a different-culprit mutant are not.
pub fn predicate_triple() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let culprit = CulpritAttribution::flags(vec!["-fno-tree-ccp".into()], 0, (true, true));
    debug_assert_eq!(culprit.kind, AttributionKind::GccFlagSet);
    let p = planted_predicate(planted_spec(dir.path(), culprit, Family::Gcc), dir.path());
    let eval = |plant: &str| p.evaluate(&planted_source(plant)).map(|v| v.interesting).map_err(|e| e.to_string());
    let got = [eval("flags -fno-tree-ccp"), eval("never"), eval("flags -fno-tree-vrp")];
    let want = [true, false, false];
    if got.iter().zip(want).all(|(g, w)| g.as_ref().ok() == Some(&w)) {
        Verdict::Pass("original interesting; disabled-culprit and mutant not interesting".into())
    } else {
        Verdict::Fail(format!("verdicts {got:?}, want {want:?}"))
    }
}
