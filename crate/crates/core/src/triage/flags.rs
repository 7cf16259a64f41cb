use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CulpritAttribution, TriageError, Variant, ViolationProbe};

/// Catalog flags in probing order with their weights; higher goes first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRanking {
    pub ranked: Vec<(String, u32)>,
}

fn is_inlining(flag: &str) -> bool {
    flag.contains("inline") || flag.contains("inlining")
}

impl FlagRanking {
    /// Keep catalog order but push inlining-related flags to the end.
    pub fn new(catalog: &[String]) -> Self {
        let mut ranked: Vec<(String, u32)> = catalog
            .iter()
            .map(|f| (f.clone(), if is_inlining(f) { 0 } else { 1 }))
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1));
        FlagRanking { ranked }
    }

    pub fn flags(&self) -> impl Iterator<Item = &str> {
        self.ranked.iter().map(|(f, _)| f.as_str())
    }

    /// Sort `flags` by this ranking.
    pub fn order(&self, flags: &mut [String]) {
        let pos = |f: &String| self.ranked.iter().position(|(r, _)| r == f).unwrap_or(usize::MAX);
        flags.sort_by_key(pos);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSearch {
    /// Maximum number of single-flag probes.
    pub budget: usize,
    /// Pair probes among the top 16 ranked flags; 0 disables the pair search.
    pub pair_budget: usize,
}

impl Default for FlagSearch {
    fn default() -> Self {
        FlagSearch { budget: 400, pair_budget: 0 }
    }
}

const PAIR_POOL: usize = 16;

/// A variant that fails to build cannot show the violation gone.
fn present_or_broken(probe: &dyn ViolationProbe, v: &Variant) -> Result<bool, TriageError> {
    match probe.present(v) {
        Err(TriageError::Build(e)) => {
            log::debug!("{v:?} does not build: {e}");
            Ok(true)
        }
        r => r,
    }
}

/// Disable catalog flags one at a time and keep those that make the violation vanish.
pub fn triage_flags(
    probe: &dyn ViolationProbe,
    catalog: &[String],
    search: FlagSearch,
) -> Result<CulpritAttribution, TriageError> {
    let mut runs = 1;
    if !probe.present(&Variant::Baseline)? {
        return Ok(CulpritAttribution::unattributed("flaky", runs));
    }
    if catalog.is_empty() {
        return Ok(CulpritAttribution::unattributed("empty-catalog", runs));
    }
    let ranking = FlagRanking::new(catalog);
    let singles: Vec<&str> = ranking.flags().take(search.budget).collect();
    runs += singles.len();
    let results: Vec<(String, bool)> = singles
        .par_iter()
        .map(|f| {
            let present = present_or_broken(probe, &Variant::Flags(vec![f.to_string()]))?;
            Ok((f.to_string(), present))
        })
        .collect::<Result<_, TriageError>>()?;
    let mut found: Vec<String> = results
        .into_iter()
        .filter(|(_, present)| !present)
        .map(|(f, _)| f)
        .collect();

    if found.is_empty() && search.pair_budget > 0 {
        let pool: Vec<&str> = ranking.flags().take(PAIR_POOL).collect();
        let pairs: Vec<Vec<String>> = pool
            .iter()
            .enumerate()
            .flat_map(|(i, a)| pool[i + 1..].iter().map(move |b| vec![a.to_string(), b.to_string()]))
            .take(search.pair_budget)
            .collect();
        runs += pairs.len();
        let hit = pairs
            .par_iter()
            .map(|p| Ok((p.clone(), present_or_broken(probe, &Variant::Flags(p.clone()))?)))
            .collect::<Result<Vec<_>, TriageError>>()?
            .into_iter()
            .find(|(_, present)| !present);
        if let Some((p, _)) = hit {
            found = p;
        }
    }
    if found.is_empty() {
        return Ok(CulpritAttribution::unattributed("uncontrollable-by-flags", runs));
    }
    ranking.order(&mut found);

    // confirming rebuilds, recorded alongside the result
    let confirm = if found.len() == 1 {
        vec![found.clone()]
    } else {
        found.iter().map(|f| vec![f.clone()]).collect()
    };
    let baseline = probe.present(&Variant::Baseline)?;
    runs += 1;
    let mut absent = true;
    for flags in confirm {
        runs += 1;
        absent &= !probe.present(&Variant::Flags(flags))?;
    }
    Ok(CulpritAttribution::flags(found, runs, (baseline, absent)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inlining_flags_rank_last() {
        let cat: Vec<String> = ["-fno-inline-small-functions", "-fno-tree-ccp", "-fno-early-inlining", "-fno-ipa-sra"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let r = FlagRanking::new(&cat);
        let order: Vec<&str> = r.flags().collect();
        assert_eq!(
            order,
            ["-fno-tree-ccp", "-fno-ipa-sra", "-fno-inline-small-functions", "-fno-early-inlining"]
        );
        assert_eq!(r.ranked.len(), cat.len());
    }
}
