use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{ClangPass, CulpritAttribution, TriageError, Variant, ViolationProbe};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BisectEntry {
    pub index: u32,
    pub pass_name: String,
    pub target: String,
    pub ran: bool,
}

pub(crate) fn limit_flags(n: i64) -> Vec<String> {
    vec!["-mllvm".into(), format!("-opt-bisect-limit={n}")]
}

/// Parse `BISECT: [NOT ]running pass (N) NAME on TARGET` lines.
pub fn parse_bisect_log(log: &str) -> Vec<BisectEntry> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r"BISECT: (NOT )?running pass \((\d+)\) (.+?) on (.*)$").expect("valid regex")
    });
    log.lines()
        .filter_map(|l| {
            let c = re.captures(l.trim_end())?;
            Some(BisectEntry {
                index: c[2].parse().ok()?,
                pass_name: c[3].to_string(),
                target: c[4].to_string(),
                ran: c.get(1).is_none(),
            })
        })
        .collect()
}

/// Find the smallest pass limit at which the violation appears.
pub fn triage_bisect(probe: &dyn ViolationProbe) -> Result<CulpritAttribution, TriageError> {
    let runs = std::cell::Cell::new(0usize);
    let present = |n: i64| -> Result<bool, TriageError> {
        runs.set(runs.get() + 1);
        probe.present(&Variant::BisectLimit(n))
    };
    if !present(-1)? {
        return Ok(CulpritAttribution::unattributed("flaky", runs.get()));
    }
    let pipeline = probe.pipeline()?;
    runs.set(runs.get() + 1);
    let total = pipeline.iter().map(|e| e.index as i64).max().unwrap_or(0);
    if present(0)? {
        return Ok(CulpritAttribution::unattributed("pre-pipeline", runs.get()));
    }
    let found = if present(total)? {
        // absent at lo, present at hi
        let (mut lo, mut hi) = (0i64, total);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if present(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Some(hi)
    } else {
        None
    };
    let n = match found {
        Some(n) => n,
        None => {
            // the full pipeline disagrees with an unlimited build: scan linearly
            let mut first = None;
            for n in 1..=total {
                if present(n)? {
                    first = Some(n);
                    break;
                }
            }
            match first {
                Some(n) => n,
                None => return Ok(CulpritAttribution::unattributed("nonmonotonic", runs.get())),
            }
        }
    };
    let entry = pipeline.iter().find(|e| e.index as i64 == n);
    let pass = ClangPass {
        index: n as u32,
        pass_name: entry.map(|e| e.pass_name.clone()).unwrap_or_else(|| "?".into()),
        target_function: entry.map(|e| e.target.clone()).unwrap_or_default(),
    };
    Ok(CulpritAttribution::pass(pass, runs.get(), (true, true)))
}
