use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::filter::ViolationFilter;
use super::run::SlotRecord;
use super::store::{RunStore, Stage, StageStatus};
use super::{CampaignConfig, CampaignError};
use crate::buildmatrix::{BuildConfig, OptLevel, ToolchainSpec};
use crate::conjectures::{ConjectureId, Violation};
use crate::dbgtrace::DebugTrace;
use crate::store::{read_json, write_atomic};
use crate::triage::CulpritAttribution;

/// Per-toolchain violation counts in the layout of a levels-by-conjecture table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolchainTable {
    pub toolchain: String,
    pub levels: Vec<OptLevel>,
    /// Per conjecture, violations reproducing at each level (same order as `levels`).
    pub per_level: BTreeMap<ConjectureId, Vec<usize>>,
    pub unique: BTreeMap<ConjectureId, usize>,
    /// Level sets and the number of violations reproducing at exactly those levels.
    pub venn: Vec<(Vec<OptLevel>, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub schema: u32,
    pub requested_programs: usize,
    pub generated_programs: usize,
    /// `slot-NNNN stage: detail` for every failed stage.
    pub failures: Vec<String>,
    pub tables: Vec<ToolchainTable>,
    pub unique: BTreeMap<ConjectureId, usize>,
    /// Programs checked for a conjecture that showed no violation of it.
    pub clean_programs: BTreeMap<ConjectureId, usize>,
}

impl CampaignSummary {
    pub fn venn_json(&self) -> serde_json::Value {
        let mut out = serde_json::Map::new();
        for t in &self.tables {
            let regions: Vec<_> = t
                .venn
                .iter()
                .map(|(levels, count)| serde_json::json!({"levels": levels, "count": count}))
                .collect();
            out.insert(t.toolchain.clone(), serde_json::Value::Array(regions));
        }
        serde_json::Value::Object(out)
    }
}

pub(crate) fn slot_records(store: &RunStore) -> Vec<(PathBuf, SlotRecord)> {
    store
        .slots()
        .into_iter()
        .filter_map(|(_, dir)| {
            let rec = read_json(&dir.join("slot.json")).ok()?;
            Some((dir, rec))
        })
        .collect()
}

/// Recompute the campaign summary from `violations.json` and the stage markers.
pub fn summarize(
    store: &RunStore,
    cfg: &CampaignConfig,
    tcs: &[ToolchainSpec],
) -> Result<CampaignSummary, CampaignError> {
    let stored = store.load_violations()?;
    let vs = &stored.violations;
    let mut failures = Vec::new();
    for (_, dir) in store.slots() {
        let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        for stage in Stage::ALL {
            if let Some(m) = RunStore::marker(&dir, stage) {
                if m.status == StageStatus::Failed {
                    let detail = m.detail.unwrap_or_default();
                    failures.push(format!("{name} {stage}: {}", detail.lines().next().unwrap_or("")));
                }
            }
        }
    }
    let tables = tcs
        .iter()
        .map(|tc| {
            let mut per_level: BTreeMap<ConjectureId, Vec<usize>> = BTreeMap::new();
            let mut unique: BTreeMap<ConjectureId, usize> = BTreeMap::new();
            let mut venn: BTreeMap<Vec<OptLevel>, usize> = BTreeMap::new();
            for c in &cfg.conjectures {
                per_level.insert(*c, vec![0; cfg.levels.len()]);
                unique.insert(*c, 0);
            }
            for v in vs {
                let levels: BTreeSet<OptLevel> =
                    v.configs.iter().filter(|k| k.toolchain == tc.id).map(|k| k.opt_level).collect();
                if levels.is_empty() {
                    continue;
                }
                *unique.entry(v.conjecture).or_default() += 1;
                let row = per_level.entry(v.conjecture).or_insert_with(|| vec![0; cfg.levels.len()]);
                for (i, l) in cfg.levels.iter().enumerate() {
                    if levels.contains(l) {
                        row[i] += 1;
                    }
                }
                *venn.entry(levels.into_iter().collect()).or_default() += 1;
            }
            ToolchainTable {
                toolchain: tc.id.clone(),
                levels: cfg.levels.clone(),
                per_level,
                unique,
                venn: venn.into_iter().collect(),
            }
        })
        .collect();
    let mut unique: BTreeMap<ConjectureId, usize> = cfg.conjectures.iter().map(|c| (*c, 0)).collect();
    for v in vs {
        *unique.entry(v.conjecture).or_default() += 1;
    }
    let records = slot_records(store);
    let generated: Vec<&SlotRecord> = records
        .iter()
        .filter(|(dir, _)| matches!(RunStore::marker(dir, Stage::Generated), Some(m) if m.status == StageStatus::Done))
        .map(|(_, r)| r)
        .collect();
    let mut clean_programs = BTreeMap::new();
    for c in &cfg.conjectures {
        let hit: BTreeSet<&str> =
            vs.iter().filter(|v| v.conjecture == *c).map(|v| v.program_id.as_str()).collect();
        let n = generated
            .iter()
            .filter_map(|r| match c {
                ConjectureId::C1 => r.injected_id.as_deref(),
                _ => Some(r.program_id.as_str()),
            })
            .filter(|id| !hit.contains(id))
            .count();
        clean_programs.insert(*c, n);
    }
    Ok(CampaignSummary {
        schema: super::store::STORE_SCHEMA,
        requested_programs: cfg.program_count,
        generated_programs: generated.len(),
        failures,
        tables,
        unique,
        clean_programs,
    })
}

pub fn render_summary(s: &CampaignSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "programs: {} generated of {} requested", s.generated_programs, s.requested_programs);
    for t in &s.tables {
        let _ = writeln!(out, "\n{}", t.toolchain);
        let _ = write!(out, "{:<6}", "");
        for l in &t.levels {
            let _ = write!(out, "{:>7}", format!("-{l}"));
        }
        let _ = writeln!(out, "{:>8}", "Unique");
        for (c, row) in &t.per_level {
            let _ = write!(out, "{:<6}", c.to_string());
            for n in row {
                let _ = write!(out, "{n:>7}");
            }
            let _ = writeln!(out, "{:>8}", t.unique.get(c).copied().unwrap_or(0));
        }
    }
    let conj: Vec<String> = s.clean_programs.keys().map(|c| c.to_string()).collect();
    let counts: Vec<String> = s.clean_programs.values().map(|n| n.to_string()).collect();
    let _ = writeln!(
        out,
        "\nno violations in ({}) programs for {}",
        counts.join(", "),
        conj.join(", ")
    );
    if !s.failures.is_empty() {
        let _ = writeln!(out, "\n{} stage failures:", s.failures.len());
        for f in &s.failures {
            let _ = writeln!(out, "  {f}");
        }
    }
    out
}

/// Slot directory and program for a violation's program id.
pub(crate) fn locate(store: &RunStore, v: &Violation) -> Option<(PathBuf, SlotRecord, bool)> {
    slot_records(store).into_iter().find_map(|(dir, r)| {
        if r.program_id == v.program_id {
            Some((dir, r, false))
        } else if r.injected_id.as_deref() == Some(v.program_id.as_str()) {
            Some((dir, r, true))
        } else {
            None
        }
    })
}

fn excerpt(source: &str, line: u32, radius: u32) -> String {
    let lo = line.saturating_sub(radius).max(1);
    source
        .lines()
        .enumerate()
        .map(|(i, l)| (i as u32 + 1, l))
        .filter(|(n, _)| *n >= lo && *n <= line + radius)
        .map(|(n, l)| format!("{}{n:>5} | {l}", if n == line { ">" } else { " " }))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Write one dossier per selected violation under `reports/`.
pub fn cmd_report(store: &RunStore, filter: &ViolationFilter) -> Result<Vec<PathBuf>, CampaignError> {
    let stored = store.load_violations()?;
    let mut written = Vec::new();
    for v in stored.violations.iter().filter(|v| filter.matches(v)) {
        let key = v.key().to_string();
        let mut s = String::new();
        let _ = writeln!(s, "# {key}\n");
        let _ = writeln!(s, "observed: {}  expected: {}", v.observed.tag(), v.expected);
        let configs: Vec<String> = v.configs.iter().map(|c| format!("{}/-{}", c.toolchain, c.opt_level)).collect();
        let _ = writeln!(s, "configurations: {}", configs.join(" "));
        let _ = writeln!(s, "function: {}  frame: {}  pc: {:#x}", v.function, v.frame_function, v.stop_pc);
        if let Some(o) = v.original_line {
            let _ = writeln!(s, "opaque call at line {}", o);
        }
        if let Some((dir, rec, inj)) = locate(store, v) {
            let file = if inj { "injected.json" } else { "program.json" };
            if let Ok(p) = read_json::<crate::corpus::TestProgram>(&dir.join(file)) {
                let _ = writeln!(s, "\n## Source\n\n```c\n{}\n```", excerpt(&p.source_text, v.line, 4));
            }
            if let Some(first) = v.configs.iter().next() {
                let unit = store.unit_dir(
                    rec.slot,
                    &first.toolchain,
                    first.opt_level,
                    &BuildConfig::new(first.opt_level).hash(),
                );
                let trace = unit.join(if inj { "trace-inj.json" } else { "trace-base.json" });
                if let Ok(t) = DebugTrace::load(&trace) {
                    if let Some(r) = t.record_at(v.line) {
                        let _ = writeln!(s, "\n## Trace at line {} ({}/-{})\n", v.line, first.toolchain, first.opt_level);
                        for (name, st) in &r.observations {
                            let _ = writeln!(s, "  {name} = {}", st.value_text().unwrap_or(st.tag()));
                        }
                    }
                }
            }
        }
        let _ = writeln!(s, "\n## Attribution\n");
        match read_json::<CulpritAttribution>(&store.key_dir("triage", &key).join("attribution.json")) {
            Ok(a) => {
                let _ = writeln!(s, "{}", serde_json::to_string_pretty(&a)?);
            }
            Err(_) => {
                let _ = writeln!(s, "not triaged");
            }
        }
        let _ = writeln!(s, "\n## DIE verdict\n");
        match &v.die_verdict {
            Some(d) => {
                let _ = writeln!(s, "{:?}: {}", d.tag, d.note);
            }
            None => {
                let _ = writeln!(s, "not classified");
            }
        }
        let bundle = store.key_dir("reduce", &key).join("report");
        if bundle.exists() {
            let _ = writeln!(s, "\n## Reduction\n\nbundle: {}", bundle.display());
        }
        let path = store.key_dir("reports", &key).with_extension("md");
        write_atomic(&path, s.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
