use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AttributionKind, CulpritAttribution};
use crate::conjectures::{ConjectureId, IdentityKey};

/// What a group of violations is blamed on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CulpritKey {
    Flags(BTreeSet<String>),
    Pass(String),
    Unattributed(String),
}

impl fmt::Display for CulpritKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CulpritKey::Flags(s) => {
                let names: Vec<&str> = s.iter().map(|x| x.trim_start_matches("-fno-")).collect();
                write!(f, "{}", names.join("+"))
            }
            CulpritKey::Pass(p) => write!(f, "{p}"),
            CulpritKey::Unattributed(r) => write!(f, "unattributed ({r})"),
        }
    }
}

impl CulpritKey {
    pub fn of(a: &CulpritAttribution) -> Self {
        match a.kind {
            AttributionKind::GccFlagSet => CulpritKey::Flags(a.flag_set().unwrap_or_default()),
            AttributionKind::ClangPass => CulpritKey::Pass(
                a.clang_pass.as_ref().map(|p| p.pass_name.clone()).unwrap_or_default(),
            ),
            AttributionKind::Unattributed => {
                CulpritKey::Unattributed(a.reason.clone().unwrap_or_default())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CulpritGroup {
    pub conjecture: ConjectureId,
    pub culprit: CulpritKey,
    pub count: usize,
}

/// Count unique violations per culprit, per conjecture, most frequent first.
pub fn group_by_culprit<'a>(
    attributions: impl IntoIterator<Item = (&'a IdentityKey, &'a CulpritAttribution)>,
) -> Vec<CulpritGroup> {
    let mut seen: BTreeMap<(ConjectureId, CulpritKey), BTreeSet<&IdentityKey>> = BTreeMap::new();
    for (key, a) in attributions {
        seen.entry((key.conjecture, CulpritKey::of(a))).or_default().insert(key);
    }
    let mut rows: Vec<CulpritGroup> = seen
        .into_iter()
        .map(|((conjecture, culprit), keys)| CulpritGroup { conjecture, culprit, count: keys.len() })
        .collect();
    rows.sort_by(|a, b| {
        a.conjecture
            .cmp(&b.conjecture)
            .then(b.count.cmp(&a.count))
            .then(a.culprit.cmp(&b.culprit))
    });
    rows
}

pub fn groups_csv(rows: &[CulpritGroup]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["conjecture", "culprit", "count"]);
    for r in rows {
        let _ = w.write_record([r.conjecture.to_string(), r.culprit.to_string(), r.count.to_string()]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

pub fn groups_text(rows: &[CulpritGroup]) -> String {
    let mut out = String::new();
    let mut last = None;
    for r in rows {
        if last != Some(r.conjecture) {
            out.push_str(&format!("{}\n", r.conjecture));
            last = Some(r.conjecture);
        }
        out.push_str(&format!("  {:<40} {:>6}\n", r.culprit.to_string(), r.count));
    }
    out
}
