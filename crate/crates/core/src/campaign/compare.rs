use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{CampaignError, RunStore};
use crate::conjectures::{ConjectureId, IdentityKey};
use crate::metrics::{heat_grid, heat_grid_csv};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjectureDelta {
    pub conjecture: ConjectureId,
    pub count_a: usize,
    pub count_b: usize,
    pub delta: i64,
    /// Keys present only in the second store.
    pub appeared: Vec<String>,
    /// Keys present only in the first store.
    pub disappeared: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompareReport {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ConjectureDelta>,
    /// Unique violations per program, in corpus order, wrapped `per_row` to a line.
    pub heat_a: Vec<Vec<u8>>,
    pub heat_b: Vec<Vec<u8>>,
}

impl CompareReport {
    /// Rows C1..C3, one column per store.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6}{:>14}{:>14}{:>8}", "", self.label_a, self.label_b, "delta");
        for r in &self.rows {
            let _ = writeln!(s, "{:<6}{:>14}{:>14}{:>+8}", r.conjecture.to_string(), r.count_a, r.count_b, r.delta);
        }
        for r in &self.rows {
            if !r.disappeared.is_empty() {
                let _ = writeln!(s, "\n{} disappeared in {}:", r.conjecture, self.label_b);
                for k in &r.disappeared {
                    let _ = writeln!(s, "  {k}");
                }
            }
            if !r.appeared.is_empty() {
                let _ = writeln!(s, "\n{} new in {}:", r.conjecture, self.label_b);
                for k in &r.appeared {
                    let _ = writeln!(s, "  {k}");
                }
            }
        }
        let _ = writeln!(s, "\nviolations per program ({} | {}):", self.label_a, self.label_b);
        for (a, b) in self.heat_a.iter().zip(&self.heat_b) {
            let row = |r: &[u8]| r.iter().map(|n| format!("{n:>3}")).collect::<String>();
            let _ = writeln!(s, "{}   |{}", row(a), row(b));
        }
        s
    }

    pub fn heat_csv(&self) -> (String, String) {
        (heat_grid_csv(&self.heat_a), heat_grid_csv(&self.heat_b))
    }
}

/// Compare two stores built from the same program corpus.
pub fn cmd_compare(
    a: &RunStore,
    b: &RunStore,
    labels: (&str, &str),
    per_row: usize,
) -> Result<CompareReport, CampaignError> {
    let ids_a = a.program_ids()?;
    let ids_b = b.program_ids()?;
    let (sa, sb): (BTreeSet<&String>, BTreeSet<&String>) = (ids_a.iter().collect(), ids_b.iter().collect());
    if sa != sb {
        return Err(CampaignError::CorpusMismatch {
            only_a: sa.difference(&sb).count(),
            only_b: sb.difference(&sa).count(),
        });
    }
    let va = a.load_violations()?.violations;
    let vb = b.load_violations()?.violations;
    // injected programs carry their own ids; attribute them to the base program
    let owner_a = owners(a);
    let owner_b = owners(b);
    let keys = |vs: &[crate::conjectures::Violation], owners: &BTreeMap<String, String>| -> BTreeSet<IdentityKey> {
        vs.iter()
            .map(|v| {
                let mut k = v.key();
                if let Some(o) = owners.get(&k.program_id) {
                    k.program_id = o.clone();
                }
                k
            })
            .collect()
    };
    let (ka, kb) = (keys(&va, &owner_a), keys(&vb, &owner_b));
    let rows = ConjectureId::ALL
        .iter()
        .map(|c| {
            let pick = |s: &BTreeSet<IdentityKey>| s.iter().filter(|k| k.conjecture == *c).cloned().collect::<BTreeSet<_>>();
            let (ca, cb) = (pick(&ka), pick(&kb));
            ConjectureDelta {
                conjecture: *c,
                count_a: ca.len(),
                count_b: cb.len(),
                delta: cb.len() as i64 - ca.len() as i64,
                appeared: cb.difference(&ca).map(|k| k.to_string()).collect(),
                disappeared: ca.difference(&cb).map(|k| k.to_string()).collect(),
            }
        })
        .collect();
    let per_program = |ks: &BTreeSet<IdentityKey>| -> Vec<u8> {
        ids_a
            .iter()
            .map(|id| ks.iter().filter(|k| &k.program_id == id).count().min(u8::MAX as usize) as u8)
            .collect()
    };
    Ok(CompareReport {
        label_a: labels.0.to_string(),
        label_b: labels.1.to_string(),
        rows,
        heat_a: heat_grid(&per_program(&ka), per_row),
        heat_b: heat_grid(&per_program(&kb), per_row),
    })
}

fn owners(store: &RunStore) -> BTreeMap<String, String> {
    super::report::slot_records(store)
        .into_iter()
        .filter_map(|(_, r)| Some((r.injected_id?, r.program_id)))
        .collect()
}
