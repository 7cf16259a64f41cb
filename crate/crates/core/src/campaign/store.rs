use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CampaignError;
use crate::buildmatrix::OptLevel;
use crate::conjectures::{CheckOutcome, Violation};
use crate::store::{read_json, write_json};

pub const STORE_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Generated,
    Built,
    Traced,
    Checked,
    Triaged,
    Reduced,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Generated, Stage::Built, Stage::Traced, Stage::Checked, Stage::Triaged, Stage::Reduced];
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from));
        f.write_str(&s.unwrap_or_default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Done,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageMarker {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(default)]
    pub detail: Option<String>,
}

impl StageMarker {
    pub fn done(stage: Stage) -> Self {
        StageMarker { stage, status: StageStatus::Done, detail: None }
    }
    pub fn skipped(stage: Stage, why: &str) -> Self {
        StageMarker { stage, status: StageStatus::Skipped, detail: Some(why.into()) }
    }
    pub fn failed(stage: Stage, why: impl fmt::Display) -> Self {
        StageMarker { stage, status: StageStatus::Failed, detail: Some(why.to_string()) }
    }
}

/// Top-level `violations.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredViolations {
    pub schema: u32,
    pub violations: Vec<Violation>,
}

/// Directory layout of a campaign:
///
/// ```text
/// campaign.json                  config and probed toolchains
/// programs.json                  ids of programs that passed generation
/// violations.json venn.json summary.json summary.txt
/// stubs/<toolchain>/stub.o
/// programs/slot-NNNN/            one generated program
///   .stages/<stage>.json
///   program.json injected.json slot.json
///   units/<toolchain>/<level>-<config hash>/
///     .stages/{built,traced,checked}.json
///     base/ inj/                 build directories
///     trace-base.json trace-inj.json check.json
/// triage/<key>/attribution.json
/// reduce/<key>/report/
/// ```
#[derive(Debug, Clone)]
pub struct RunStore {
    pub root: PathBuf,
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunStore { root: root.into() }
    }

    pub fn slot_dir(&self, slot: usize) -> PathBuf {
        self.root.join("programs").join(format!("slot-{slot:04}"))
    }

    pub fn unit_dir(&self, slot: usize, toolchain: &str, level: OptLevel, config_hash: &str) -> PathBuf {
        self.slot_dir(slot).join("units").join(toolchain).join(format!("{level}-{config_hash}"))
    }

    pub fn stub_dir(&self, toolchain: &str) -> PathBuf {
        self.root.join("stubs").join(toolchain)
    }

    pub fn key_dir(&self, kind: &str, key: &str) -> PathBuf {
        let slug: String = key
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' })
            .collect();
        self.root.join(kind).join(slug)
    }

    fn marker_path(dir: &Path, stage: Stage) -> PathBuf {
        dir.join(".stages").join(format!("{stage}.json"))
    }

    pub fn marker(dir: &Path, stage: Stage) -> Option<StageMarker> {
        read_json(&Self::marker_path(dir, stage)).ok()
    }

    pub fn mark(dir: &Path, marker: &StageMarker) -> std::io::Result<()> {
        write_json(&Self::marker_path(dir, marker.stage), marker)
    }

    pub fn violations_path(&self) -> PathBuf {
        self.root.join("violations.json")
    }

    pub fn load_violations(&self) -> Result<StoredViolations, CampaignError> {
        let p = self.violations_path();
        if !p.exists() {
            return Err(CampaignError::MissingStage {
                stage: Stage::Checked.to_string(),
                what: self.root.display().to_string(),
            });
        }
        Ok(read_json(&p)?)
    }

    pub fn program_ids(&self) -> Result<Vec<String>, CampaignError> {
        let p = self.root.join("programs.json");
        if !p.exists() {
            return Err(CampaignError::MissingStage {
                stage: Stage::Generated.to_string(),
                what: self.root.display().to_string(),
            });
        }
        Ok(read_json(&p)?)
    }

    /// Slot directories present in the store, in slot order.
    pub fn slots(&self) -> Vec<(usize, PathBuf)> {
        let mut out: Vec<(usize, PathBuf)> = std::fs::read_dir(self.root.join("programs"))
            .into_iter()
            .flatten()
            .flatten()
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                let n = name.strip_prefix("slot-")?.parse().ok()?;
                Some((n, e.path()))
            })
            .collect();
        out.sort();
        out
    }

    /// Every completed marker must have its outputs on disk and parseable.
    pub fn check_integrity(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (_, dir) in self.slots() {
            if let Some(m) = Self::marker(&dir, Stage::Generated) {
                if m.status == StageStatus::Done {
                    for f in ["program.json", "slot.json"] {
                        if read_json::<serde_json::Value>(&dir.join(f)).is_err() {
                            problems.push(format!("{}: {f} missing or invalid", dir.display()));
                        }
                    }
                }
            }
            for unit in unit_dirs(&dir) {
                let done = |s| matches!(Self::marker(&unit, s), Some(m) if m.status == StageStatus::Done);
                if done(Stage::Traced) && read_json::<serde_json::Value>(&unit.join("trace-base.json")).is_err() {
                    problems.push(format!("{}: trace-base.json missing", unit.display()));
                }
                if done(Stage::Checked) && read_json::<CheckOutcome>(&unit.join("check.json")).is_err() {
                    problems.push(format!("{}: check.json missing", unit.display()));
                }
            }
        }
        problems
    }
}

pub(crate) fn unit_dirs(slot_dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for tc in std::fs::read_dir(slot_dir.join("units")).into_iter().flatten().flatten() {
        for u in std::fs::read_dir(tc.path()).into_iter().flatten().flatten() {
            out.push(u.path());
        }
    }
    out.sort();
    out
}
