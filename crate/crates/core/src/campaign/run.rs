use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::store::{unit_dirs, RunStore, Stage, StageMarker, StageStatus, StoredViolations, STORE_SCHEMA};
use super::{report, CampaignConfig, CampaignError, CampaignSummary};
use crate::buildmatrix::{
    build_stub, compile, probe_version, BuildConfig, BuiltArtifact, CompileOptions, OptLevel, ToolchainSpec,
};
use crate::conjectures::{
    analyze_source, check_c1, check_c2, check_c3, dedupe, CheckOutcome, ConjectureId, SkipNote, Violation,
};
use crate::corpus::{
    emit_stub_module, generate_program, inject_opaque_call, screen_undefined_behavior, Assortments,
    GenerateOptions, GenerationRecipe, InjectOptions, O0Check, ScreenTool, ScreenVerdict, TestProgram,
    DEFAULT_ARITY, DEFAULT_CALLEE,
};
use crate::dbgtrace::{cross_validate, extract_steppable_lines, tracer_for, DebugTrace};
use crate::dwarfscope::{classify_die, lookup_var_die};
use crate::store::{read_json, write_json};

/// Per-slot generation record, `slot.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: usize,
    pub seed: u64,
    pub option_set: u16,
    pub program_id: String,
    #[serde(default)]
    pub injected_id: Option<String>,
    #[serde(default)]
    pub inject_error: Option<String>,
    pub screen: ScreenVerdict,
}

struct Slot {
    index: usize,
    program: TestProgram,
    injected: Option<TestProgram>,
}

#[derive(Serialize, Deserialize, PartialEq)]
struct CampaignFile {
    schema: u32,
    fingerprint: serde_json::Value,
    toolchains: Vec<ToolchainSpec>,
}

fn campaign_file(store: &RunStore) -> Result<CampaignFile, CampaignError> {
    read_json(&store.root.join("campaign.json")).map_err(|_| CampaignError::MissingStage {
        stage: "campaign".into(),
        what: store.root.display().to_string(),
    })
}

/// Toolchains probed when the store was created.
pub(crate) fn load_toolchains(store: &RunStore) -> Result<Vec<ToolchainSpec>, CampaignError> {
    Ok(campaign_file(store)?.toolchains)
}

/// Optimized levels the store was run at.
pub(crate) fn load_levels(store: &RunStore) -> Result<Vec<OptLevel>, CampaignError> {
    let f = campaign_file(store)?;
    serde_json::from_value(f.fingerprint["levels"].clone()).map_err(CampaignError::from)
}

/// Fields that decide what the store contains; scheduling knobs are left out.
fn fingerprint(cfg: &CampaignConfig) -> serde_json::Value {
    serde_json::json!({
        "toolchains": cfg.toolchains,
        "levels": cfg.levels,
        "conjectures": cfg.conjectures,
        "seed": cfg.seed,
        "option_sets": cfg.option_sets,
        "generator": cfg.generator_path,
        "analyzer": cfg.analyzer_path,
        "max_source_lines": cfg.max_source_lines,
    })
}

/// Probe toolchains, reusing a matching earlier probe recorded in the store.
fn toolchains(cfg: &CampaignConfig, store: &RunStore) -> Result<Vec<ToolchainSpec>, CampaignError> {
    let path = store.root.join("campaign.json");
    let fp = fingerprint(cfg);
    if let Ok(old) = read_json::<CampaignFile>(&path) {
        if old.fingerprint != fp {
            return Err(CampaignError::Config(format!(
                "store {} belongs to a campaign with a different configuration",
                store.root.display()
            )));
        }
        for t in &old.toolchains {
            let v = probe_version(&t.compiler_path).map_err(|e| CampaignError::Environment(e.to_string()))?;
            if v != t.version_string {
                return Err(CampaignError::Environment(format!(
                    "{} changed version since the store was created ({} -> {v})",
                    t.id, t.version_string
                )));
            }
            if !crate::corpus::is_executable(&t.debugger_path) {
                return Err(CampaignError::Environment(format!("debugger missing: {}", t.debugger_path.display())));
            }
        }
        if !crate::corpus::is_executable(&cfg.generator_path) {
            return Err(CampaignError::Environment(format!("generator missing: {}", cfg.generator_path.display())));
        }
        return Ok(old.toolchains);
    }
    let specs = cfg.probe()?;
    write_json(&path, &CampaignFile { schema: STORE_SCHEMA, fingerprint: fp, toolchains: specs.clone() })?;
    Ok(specs)
}

fn seed_for(cfg: &CampaignConfig, slot: usize) -> u64 {
    cfg.seed.wrapping_add(slot as u64 * 1000)
}

fn generate_slot(
    cfg: &CampaignConfig,
    store: &RunStore,
    tcs: &[ToolchainSpec],
    assortments: &Assortments,
    slot: usize,
) -> Result<Option<Slot>, CampaignError> {
    let dir = store.slot_dir(slot);
    match RunStore::marker(&dir, Stage::Generated) {
        Some(m) if m.status == StageStatus::Done => {
            let program: TestProgram = read_json(&dir.join("program.json"))?;
            let injected = read_json(&dir.join("injected.json")).ok();
            return Ok(Some(Slot { index: slot, program, injected }));
        }
        Some(_) => return Ok(None),
        None => {}
    }
    let sets: Vec<u16> = cfg
        .option_sets
        .clone()
        .unwrap_or_else(|| assortments.sets.iter().map(|s| s.id).collect());
    let option_set = sets[slot % sets.len().max(1)];
    let seed = seed_for(cfg, slot);
    let mut recipe = match GenerationRecipe::new(seed, option_set, assortments) {
        Ok(r) => r,
        Err(e) => return Err(CampaignError::Config(e.to_string())),
    };
    recipe.max_source_lines = cfg.max_source_lines;
    let check = O0Check { compiler: tcs[0].compiler_path.clone(), flags: vec![] };
    let mut opts = GenerateOptions::new(dir.join("gen"));
    opts.timeout = Duration::from_secs(cfg.timeouts.generate_s);
    opts.o0_check = Some(check.clone());
    let program = match generate_program(&recipe, &cfg.generator_path, &opts) {
        Ok(p) => p,
        Err(e) => {
            RunStore::mark(&dir, &StageMarker::failed(Stage::Generated, &e))?;
            return Ok(None);
        }
    };
    let mut tools: Vec<ScreenTool> = tcs
        .iter()
        .map(|t| ScreenTool::Compiler { id: t.id.clone(), path: t.compiler_path.clone() })
        .collect();
    if let Some(a) = &cfg.analyzer_path {
        tools.push(ScreenTool::Analyzer { id: "analyzer".into(), path: a.clone(), args: vec![] });
    }
    let screen = match screen_undefined_behavior(&program, &tools) {
        Ok(s) => s,
        Err(e) => {
            RunStore::mark(&dir, &StageMarker::failed(Stage::Generated, format!("screen: {e}")))?;
            return Ok(None);
        }
    };
    let mut record = SlotRecord {
        slot,
        seed,
        option_set,
        program_id: program.id.clone(),
        injected_id: None,
        inject_error: None,
        screen: screen.clone(),
    };
    if !screen.clean {
        write_json(&dir.join("slot.json"), &record)?;
        let first = screen.findings.iter().find(|f| f.blocking).map(|f| f.text.clone()).unwrap_or_default();
        RunStore::mark(&dir, &StageMarker::failed(Stage::Generated, format!("screen: {first}")))?;
        return Ok(None);
    }
    let mut injected = None;
    if cfg.conjectures.contains(&ConjectureId::C1) {
        let opts = InjectOptions { compile_check: Some(check), ..Default::default() };
        match inject_opaque_call(&program, seed, &opts) {
            Ok(p) => {
                record.injected_id = Some(p.id.clone());
                write_json(&dir.join("injected.json"), &p)?;
                injected = Some(p);
            }
            Err(e) => record.inject_error = Some(e.to_string()),
        }
    }
    write_json(&dir.join("program.json"), &program)?;
    write_json(&dir.join("slot.json"), &record)?;
    RunStore::mark(&dir, &StageMarker::done(Stage::Generated))?;
    Ok(Some(Slot { index: slot, program, injected }))
}

struct Env<'a> {
    cfg: &'a CampaignConfig,
    store: &'a RunStore,
    stubs: BTreeMap<String, PathBuf>,
}

fn build_one(
    env: &Env<'_>,
    program: &TestProgram,
    tc: &ToolchainSpec,
    config: &BuildConfig,
    dir: PathBuf,
) -> Result<BuiltArtifact, CampaignError> {
    let mut opts = CompileOptions::new(dir);
    opts.timeout = env.cfg.timeouts.compile();
    opts.stub_object = env.stubs.get(&tc.id).cloned();
    let art = compile(program, tc, config, &opts)?;
    write_json(&opts.out_dir.join("artifact.json"), &art)?;
    Ok(art)
}

fn trace_one(env: &Env<'_>, tc: &ToolchainSpec, art: &BuiltArtifact, file: &str) -> Result<DebugTrace, CampaignError> {
    let lines = extract_steppable_lines(&art.executable_path, file)
        .map_err(|e| CampaignError::Environment(e.to_string()))?;
    let tracer = tracer_for(&tc.debugger_path);
    tracer
        .collect(art, &lines, env.cfg.timeouts.trace())
        .map_err(CampaignError::from)
}

/// Attach the DIE verdict and any cross-debugger validation.
fn annotate(env: &Env<'_>, tc: &ToolchainSpec, v: &mut Violation, art: &BuiltArtifact, trace: &DebugTrace) {
    if !tc.alt_debugger_paths.is_empty() {
        v.validation = cross_validate(v, art, &tc.alt_debugger_paths, env.cfg.timeouts.trace());
    }
    let pc = v.stop_pc.wrapping_sub(trace.load_bias);
    if let Ok(die) = lookup_var_die(&art.executable_path, &v.function, &v.variable, pc) {
        v.die_verdict = Some(classify_die(die.as_ref(), pc, &v.validation));
    }
}

fn run_unit(env: &Env<'_>, slot: &Slot, tc: &ToolchainSpec, level: OptLevel) -> Result<(), CampaignError> {
    let cfg = env.cfg;
    let config = BuildConfig::new(level);
    let dir = env.store.unit_dir(slot.index, &tc.id, level, &config.hash());
    let with_c1 = level != OptLevel::O0 && cfg.conjectures.contains(&ConjectureId::C1);
    let injected = slot.injected.as_ref().filter(|_| with_c1);
    let file = slot.program.file_name();

    let done = |s| RunStore::marker(&dir, s).map(|m| m.status);
    match done(Stage::Built) {
        Some(StageStatus::Failed) => return Ok(()),
        Some(_) => {}
        None => {
            let r = build_one(env, &slot.program, tc, &config, dir.join("base")).and_then(|_| match injected {
                Some(p) => build_one(env, p, tc, &config.clone().with_stub(true), dir.join("inj")).map(|_| ()),
                None => Ok(()),
            });
            if let Err(e) = r {
                RunStore::mark(&dir, &StageMarker::failed(Stage::Built, e))?;
                return Ok(());
            }
            RunStore::mark(&dir, &StageMarker::done(Stage::Built))?;
        }
    }
    let base: BuiltArtifact = read_json(&dir.join("base/artifact.json"))?;
    let inj: Option<BuiltArtifact> = match injected {
        Some(_) => Some(read_json(&dir.join("inj/artifact.json"))?),
        None => None,
    };

    match done(Stage::Traced) {
        Some(StageStatus::Failed) => return Ok(()),
        Some(_) => {}
        None => {
            let r = trace_one(env, tc, &base, &file).and_then(|t| {
                t.save(&dir.join("trace-base.json"))?;
                if let (Some(a), Some(p)) = (&inj, injected) {
                    trace_one(env, tc, a, &p.file_name())?.save(&dir.join("trace-inj.json"))?;
                }
                Ok(())
            });
            if let Err(e) = r {
                RunStore::mark(&dir, &StageMarker::failed(Stage::Traced, e))?;
                return Ok(());
            }
            RunStore::mark(&dir, &StageMarker::done(Stage::Traced))?;
        }
    }

    if done(Stage::Checked).is_some() {
        return Ok(());
    }
    if level == OptLevel::O0 {
        RunStore::mark(&dir, &StageMarker::skipped(Stage::Checked, "reference level"))?;
        return Ok(());
    }
    let load = |name: &str| DebugTrace::load(&dir.join(name)).map_err(|e| CampaignError::Environment(e.to_string()));
    let base_trace = load("trace-base.json")?;
    let mut outcome = CheckOutcome::default();
    let wants = |c| cfg.conjectures.contains(&c);
    if wants(ConjectureId::C2) || wants(ConjectureId::C3) {
        match analyze_source(&slot.program) {
            Ok(facts) => {
                let mut found = CheckOutcome::default();
                if wants(ConjectureId::C2) {
                    found.extend(check_c2(&base_trace, &facts));
                }
                if wants(ConjectureId::C3) {
                    found.extend(check_c3(&base_trace, &facts));
                }
                for v in &mut found.violations {
                    annotate(env, tc, v, &base, &base_trace);
                }
                outcome.extend(found);
            }
            Err(e) => {
                for c in [ConjectureId::C2, ConjectureId::C3].into_iter().filter(|c| wants(*c)) {
                    outcome.skipped.push(SkipNote { conjecture: c, line: 0, reason: e.to_string() });
                }
            }
        }
    }
    if let (Some(p), Some(art)) = (injected, &inj) {
        let trace = load("trace-inj.json")?;
        let call = p.injected_call.as_ref().expect("injected program has a call");
        let mut found = check_c1(&trace, call);
        for v in &mut found.violations {
            annotate(env, tc, v, art, &trace);
        }
        outcome.extend(found);
    } else if with_c1 {
        outcome.skipped.push(SkipNote { conjecture: ConjectureId::C1, line: 0, reason: "no injected program".into() });
    }
    write_json(&dir.join("check.json"), &outcome)?;
    RunStore::mark(&dir, &StageMarker::done(Stage::Checked))?;
    Ok(())
}

/// Program-level marker summarizing the per-unit markers of `stage`.
fn roll_up(dir: &Path, stage: Stage) -> std::io::Result<()> {
    let failed: Vec<String> = unit_dirs(dir)
        .iter()
        .filter_map(|u| {
            let m = RunStore::marker(u, stage)?;
            (m.status == StageStatus::Failed).then(|| {
                let name = u.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                format!("{name}: {}", m.detail.unwrap_or_default().lines().next().unwrap_or(""))
            })
        })
        .collect();
    let marker = if failed.is_empty() {
        StageMarker::done(stage)
    } else {
        StageMarker::failed(stage, failed.join("; "))
    };
    RunStore::mark(dir, &marker)
}

/// Gather per-unit outcomes, dedupe, and write the store-level outputs.
fn collect(env: &Env<'_>, slots: &[Slot], tcs: &[ToolchainSpec]) -> Result<StoredViolations, CampaignError> {
    let mut all = Vec::new();
    for slot in slots {
        for tc in tcs {
            for &level in &env.cfg.levels {
                let dir = env.store.unit_dir(slot.index, &tc.id, level, &BuildConfig::new(level).hash());
                if let Ok(o) = read_json::<CheckOutcome>(&dir.join("check.json")) {
                    all.extend(o.violations);
                }
            }
        }
    }
    let mut unique = dedupe(all).unique;
    unique.sort_by_key(|v| v.key());
    let stored = StoredViolations { schema: STORE_SCHEMA, violations: unique };
    write_json(&env.store.violations_path(), &stored)?;
    let ids: Vec<&str> = slots.iter().map(|s| s.program.id.as_str()).collect();
    write_json(&env.store.root.join("programs.json"), &ids)?;
    Ok(stored)
}

fn pool(cfg: &CampaignConfig) -> Result<rayon::ThreadPool, CampaignError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.parallelism)
        .build()
        .map_err(|e| CampaignError::Environment(e.to_string()))
}

/// Generate, screen and inject the corpus only; later stages are left for `cmd_campaign`.
pub fn cmd_generate(cfg: &CampaignConfig) -> Result<Vec<SlotRecord>, CampaignError> {
    cfg.validate()?;
    let store = cfg.store();
    std::fs::create_dir_all(&store.root)?;
    let tcs = toolchains(cfg, &store)?;
    let assortments = Assortments::builtin();
    pool(cfg)?.install(|| {
        (0..cfg.program_count)
            .into_par_iter()
            .map(|i| generate_slot(cfg, &store, &tcs, &assortments, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(report::slot_records(&store).into_iter().map(|(_, r)| r).collect())
}

/// Run or resume a campaign described by `cfg`.
pub fn cmd_campaign(cfg: &CampaignConfig) -> Result<CampaignSummary, CampaignError> {
    cfg.validate()?;
    let store = cfg.store();
    std::fs::create_dir_all(&store.root)?;
    let tcs = toolchains(cfg, &store)?;
    let assortments = Assortments::builtin();
    let pool = pool(cfg)?;

    let slots: Vec<Slot> = pool.install(|| {
        (0..cfg.program_count)
            .into_par_iter()
            .map(|i| generate_slot(cfg, &store, &tcs, &assortments, i))
            .collect::<Result<Vec<_>, _>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    let mut stubs = BTreeMap::new();
    if cfg.conjectures.contains(&ConjectureId::C1) {
        for tc in &tcs {
            let dir = store.stub_dir(&tc.id);
            let obj = dir.join("stub.o");
            if !obj.exists() {
                build_stub(tc, &emit_stub_module(DEFAULT_ARITY, DEFAULT_CALLEE), &dir)?;
            }
            stubs.insert(tc.id.clone(), obj);
        }
    }
    let env = Env { cfg, store: &store, stubs };

    let mut levels = vec![OptLevel::O0];
    levels.extend(cfg.levels.iter().copied());
    let units: Vec<(&Slot, &ToolchainSpec, OptLevel)> = slots
        .iter()
        .flat_map(|s| {
            let levels = &levels;
            tcs.iter().flat_map(move |t| levels.iter().map(move |&l| (s, t, l)))
        })
        .collect();
    pool.install(|| {
        units
            .par_iter()
            .map(|(s, t, l)| run_unit(&env, s, t, *l))
            .collect::<Result<Vec<_>, _>>()
    })?;

    for slot in &slots {
        let dir = store.slot_dir(slot.index);
        for stage in [Stage::Built, Stage::Traced, Stage::Checked] {
            roll_up(&dir, stage)?;
        }
    }
    let stored = collect(&env, &slots, &tcs)?;

    if cfg.triage {
        super::commands::triage_all(cfg, &store, &tcs, &stored.violations, &pool)?;
    }
    for slot in &slots {
        let dir = store.slot_dir(slot.index);
        if !cfg.triage && RunStore::marker(&dir, Stage::Triaged).is_none() {
            RunStore::mark(&dir, &StageMarker::skipped(Stage::Triaged, "triage disabled in config"))?;
        }
        if RunStore::marker(&dir, Stage::Reduced).is_none() {
            RunStore::mark(&dir, &StageMarker::skipped(Stage::Reduced, "reduction runs per violation via `reduce`"))?;
        }
    }
    let summary = report::summarize(&store, cfg, &tcs)?;
    write_json(&store.root.join("summary.json"), &summary)?;
    crate::store::write_atomic(&store.root.join("summary.txt"), report::render_summary(&summary).as_bytes())?;
    write_json(&store.root.join("venn.json"), &summary.venn_json())?;
    Ok(summary)
}
