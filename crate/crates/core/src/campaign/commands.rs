use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::report::{locate, slot_records};
use super::run::load_toolchains;
use super::store::{RunStore, Stage, StageMarker, StageStatus, STORE_SCHEMA};
use super::{CampaignConfig, CampaignError, ViolationFilter};
use crate::buildmatrix::{enumerate_optflags, BuildConfig, Family, OptLevel, ToolchainSpec};
use crate::conjectures::{analyze_source, ConjectureId, Violation};
use crate::corpus::{emit_stub_module, ScreenTool, TestProgram, DEFAULT_ARITY, DEFAULT_CALLEE};
use crate::dbgtrace::{tracer_for, DebugTrace};
use crate::metrics::{aggregate, compute_record, Aggregate, MetricsRecord};
use crate::reducer::{
    collect_bundle_inputs, emit_report_bundle, make_interestingness_test, run_reduction, InterestingnessSpec,
    Predicate, ReductionResult,
};
use crate::store::{read_json, write_atomic, write_json};
use crate::triage::{
    group_by_culprit, groups_csv, groups_text, triage_bisect, triage_flags, BuildProbe, CulpritAttribution,
    CulpritGroup, FlagSearch, ProbeSetup,
};

#[derive(Debug, Clone)]
pub struct TriageRun {
    pub filter: ViolationFilter,
    pub search: FlagSearch,
    pub jobs: usize,
    pub compile_timeout: Duration,
    pub trace_timeout: Duration,
}

impl TriageRun {
    pub fn new(filter: ViolationFilter) -> Self {
        TriageRun {
            filter,
            search: FlagSearch::default(),
            jobs: 1,
            compile_timeout: Duration::from_secs(120),
            trace_timeout: Duration::from_secs(60),
        }
    }
}

fn program_for(store: &RunStore, v: &Violation) -> Result<(usize, TestProgram), CampaignError> {
    let (dir, rec, inj) = locate(store, v).ok_or_else(|| CampaignError::MissingStage {
        stage: Stage::Generated.to_string(),
        what: v.program_id.clone(),
    })?;
    let file = if inj { "injected.json" } else { "program.json" };
    Ok((rec.slot, read_json(&dir.join(file))?))
}

fn toolchain_for<'a>(tcs: &'a [ToolchainSpec], v: &Violation) -> Result<(&'a ToolchainSpec, OptLevel), CampaignError> {
    let first = v.configs.iter().next().ok_or_else(|| CampaignError::Config(format!("{} has no configuration", v.key())))?;
    let tc = tcs
        .iter()
        .find(|t| t.id == first.toolchain)
        .ok_or_else(|| CampaignError::Config(format!("unknown toolchain {}", first.toolchain)))?;
    Ok((tc, first.opt_level))
}

fn triage_one(store: &RunStore, tcs: &[ToolchainSpec], v: &Violation, run: &TriageRun) -> Result<CulpritAttribution, CampaignError> {
    let (_, program) = program_for(store, v)?;
    let (tc, level) = toolchain_for(tcs, v)?;
    let facts = if v.conjecture == ConjectureId::C1 { None } else { analyze_source(&program).ok() };
    let work = store.key_dir("triage", &v.key().to_string()).join("work");
    let stub = store.stub_dir(&tc.id).join("stub.o");
    let tracer = tracer_for(&tc.debugger_path);
    let setup = ProbeSetup {
        program: &program,
        facts: facts.as_ref(),
        toolchain: tc,
        opt_level: level,
        tracer: tracer.as_ref(),
        work_dir: work.clone(),
        stub_object: (v.conjecture == ConjectureId::C1).then_some(stub),
        compile_timeout: run.compile_timeout,
        trace_timeout: run.trace_timeout,
    };
    let probe = BuildProbe::new(setup, v);
    let attribution = match tc.family {
        Family::Gcc => {
            let catalog = enumerate_optflags(tc, level)?;
            triage_flags(&probe, &catalog.flags, run.search)?
        }
        Family::Clang => triage_bisect(&probe)?,
    };
    let _ = std::fs::remove_dir_all(&work);
    Ok(attribution)
}

/// Attribute every selected violation that has no attribution yet, then regroup.
pub(crate) fn triage_violations(
    store: &RunStore,
    tcs: &[ToolchainSpec],
    violations: &[Violation],
    run: &TriageRun,
    pool: &rayon::ThreadPool,
) -> Result<Vec<CulpritGroup>, CampaignError> {
    let selected: Vec<&Violation> = violations.iter().filter(|v| run.filter.matches(v)).collect();
    let results: Vec<Result<(), CampaignError>> = pool.install(|| {
        selected
            .par_iter()
            .map(|v| {
                let path = store.key_dir("triage", &v.key().to_string()).join("attribution.json");
                if path.exists() {
                    return Ok(());
                }
                let a = match triage_one(store, tcs, v, run) {
                    Ok(a) => a,
                    Err(e) => CulpritAttribution::unattributed(&format!("error: {e}"), 0),
                };
                write_json(&path, &a)?;
                Ok(())
            })
            .collect()
    });
    results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut pairs = Vec::new();
    for v in &selected {
        let key = v.key();
        let path = store.key_dir("triage", &key.to_string()).join("attribution.json");
        pairs.push((key, read_json::<CulpritAttribution>(&path)?));
    }
    let groups = group_by_culprit(pairs.iter().map(|(k, a)| (k, a)));
    write_atomic(&store.root.join("triage/groups.csv"), groups_csv(&groups).as_bytes())?;
    write_atomic(&store.root.join("triage/groups.txt"), groups_text(&groups).as_bytes())?;
    for (dir, rec) in slot_records(store) {
        let ids = [Some(rec.program_id.as_str()), rec.injected_id.as_deref()];
        let touched = selected.iter().any(|v| ids.contains(&Some(v.program_id.as_str())));
        let done = matches!(RunStore::marker(&dir, Stage::Triaged), Some(m) if m.status == StageStatus::Done);
        if touched && !done {
            RunStore::mark(&dir, &StageMarker::done(Stage::Triaged))?;
        }
    }
    Ok(groups)
}

pub(crate) fn triage_all(
    cfg: &CampaignConfig,
    store: &RunStore,
    tcs: &[ToolchainSpec],
    violations: &[Violation],
    pool: &rayon::ThreadPool,
) -> Result<Vec<CulpritGroup>, CampaignError> {
    let mut run = TriageRun::new(ViolationFilter::default());
    run.compile_timeout = cfg.timeouts.compile();
    run.trace_timeout = cfg.timeouts.trace();
    triage_violations(store, tcs, violations, &run, pool)
}

/// Triage the violations of a finished campaign selected by `run.filter`.
pub fn cmd_triage(store: &RunStore, run: &TriageRun) -> Result<Vec<CulpritGroup>, CampaignError> {
    let tcs = load_toolchains(store)?;
    let stored = store.load_violations()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.jobs.max(1))
        .build()
        .map_err(|e| CampaignError::Environment(e.to_string()))?;
    triage_violations(store, &tcs, &stored.violations, run, &pool)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReduceRequest {
    pub key: String,
    pub wall_budget: Duration,
    /// Reducer command; the script and file name are appended.
    pub reducer: Vec<String>,
    /// Binary providing the `interesting` subcommand.
    pub driver: PathBuf,
    #[serde(default)]
    pub analyzer: Option<PathBuf>,
}

/// Reduce one triaged violation and write its report bundle.
pub fn cmd_reduce(store: &RunStore, req: &ReduceRequest) -> Result<ReductionResult, CampaignError> {
    let tcs = load_toolchains(store)?;
    let stored = store.load_violations()?;
    let v = stored
        .violations
        .iter()
        .find(|v| v.key().to_string() == req.key)
        .ok_or_else(|| CampaignError::Config(format!("no violation with key {}", req.key)))?;
    let culprit: CulpritAttribution = read_json(&store.key_dir("triage", &req.key).join("attribution.json"))
        .map_err(|_| CampaignError::MissingStage { stage: Stage::Triaged.to_string(), what: req.key.clone() })?;
    if !culprit.is_attributed() {
        return Err(CampaignError::Config(format!("{} has no culprit to preserve", req.key)));
    }
    let (slot, program) = program_for(store, v)?;
    let (tc, level) = toolchain_for(&tcs, v)?;
    let mut screen_tools = vec![ScreenTool::Compiler { id: tc.id.clone(), path: tc.compiler_path.clone() }];
    if let Some(a) = &req.analyzer {
        screen_tools.push(ScreenTool::Analyzer { id: "analyzer".into(), path: a.clone(), args: vec![] });
    }
    let c1 = v.conjecture == ConjectureId::C1;
    let spec = InterestingnessSpec {
        key: v.key(),
        file_name: program.file_name(),
        toolchain: tc.clone(),
        opt_level: level,
        culprit,
        require_ub_clean: true,
        screen_tools,
        opaque_callee: c1.then(|| DEFAULT_CALLEE.to_string()),
        stub_source: c1.then(|| emit_stub_module(DEFAULT_ARITY, DEFAULT_CALLEE)),
        compile_timeout_s: 120,
        trace_timeout_s: 60,
    };
    let dir = store.key_dir("reduce", &req.key);
    let manifest = make_interestingness_test(&spec, &dir, &req.driver)?;
    let predicate = Predicate::new(spec, manifest.work_dir())?;
    let mut result = run_reduction(&program.source_text, &predicate, &manifest, &req.reducer, req.wall_budget, None)?;
    if result.final_verification {
        let inputs = collect_bundle_inputs(&predicate, &result.reduced_source)?;
        emit_report_bundle(&mut result, &predicate, &inputs, &dir)?;
    }
    write_json(&dir.join("result.json"), &result)?;
    let marker = if result.final_verification {
        StageMarker::done(Stage::Reduced)
    } else {
        StageMarker::failed(Stage::Reduced, &result.final_verdict.reason)
    };
    RunStore::mark(&store.slot_dir(slot), &marker)?;
    Ok(result)
}

/// Line coverage and availability of every optimized trace against its O0 trace.
pub fn cmd_metrics(store: &RunStore) -> Result<Aggregate<f64>, CampaignError> {
    let tcs = load_toolchains(store)?;
    let levels = super::run::load_levels(store)?;
    let mut records: Vec<MetricsRecord<f64>> = Vec::new();
    for (_, rec) in slot_records(store) {
        for tc in &tcs {
            let trace = |level: OptLevel| {
                let dir = store.unit_dir(rec.slot, &tc.id, level, &BuildConfig::new(level).hash());
                DebugTrace::load(&dir.join("trace-base.json"))
            };
            let Ok(o0) = trace(OptLevel::O0) else {
                if store.unit_dir(rec.slot, &tc.id, levels[0], &BuildConfig::new(levels[0]).hash()).exists() {
                    return Err(CampaignError::MissingStage {
                        stage: Stage::Traced.to_string(),
                        what: format!("O0 trace of {} ({})", rec.program_id, tc.id),
                    });
                }
                continue;
            };
            for &level in &levels {
                let Ok(t) = trace(level) else { continue };
                match compute_record::<f64>(&rec.program_id, &tc.version_string, &t, &o0) {
                    Ok(r) => records.push(r),
                    Err(e) => log::info!("{} {} -{level}: {e}", rec.program_id, tc.id),
                }
            }
        }
    }
    if records.is_empty() {
        return Err(CampaignError::MissingStage { stage: Stage::Traced.to_string(), what: "any program".into() });
    }
    let agg = aggregate(&records);
    write_json(
        &store.root.join("metrics/records.json"),
        &serde_json::json!({ "schema": STORE_SCHEMA, "records": records }),
    )?;
    write_atomic(&store.root.join("metrics/aggregate.csv"), agg.to_csv().as_bytes())?;
    write_atomic(&store.root.join("metrics/aggregate.dat"), agg.gnuplot_series().as_bytes())?;
    Ok(agg)
}
