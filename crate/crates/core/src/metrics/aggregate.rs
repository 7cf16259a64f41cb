use std::collections::BTreeMap;
use std::fmt::Display;

use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::MetricsRecord;
use crate::buildmatrix::OptLevel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow<F> {
    pub toolchain: String,
    pub version: String,
    pub opt_level: OptLevel,
    pub programs: usize,
    pub line_coverage: F,
    /// Mean of per-program availability means.
    pub availability: Option<F>,
    /// Mean over every counted line of every program.
    pub availability_pooled: Option<F>,
    pub product: Option<F>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate<F> {
    pub rows: Vec<AggregateRow<F>>,
}

fn mean<F: Float>(xs: impl Iterator<Item = F>) -> Option<F> {
    let (sum, n) = xs.fold((F::zero(), 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / F::from(n).expect("count fits"))
}

/// Global means per (toolchain, version, level).
pub fn aggregate<F: Float>(records: &[MetricsRecord<F>]) -> Aggregate<F> {
    let mut groups: BTreeMap<(String, String, OptLevel), Vec<&MetricsRecord<F>>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.toolchain.clone(), r.version.clone(), r.opt_level))
            .or_default()
            .push(r);
    }
    let rows = groups
        .into_iter()
        .map(|((toolchain, version, opt_level), rs)| {
            let lines: usize = rs.iter().map(|r| r.ratio_lines).sum();
            let pooled = (lines > 0).then(|| {
                rs.iter().fold(F::zero(), |a, r| a + r.ratio_sum) / F::from(lines).expect("count fits")
            });
            AggregateRow {
                toolchain,
                version,
                opt_level,
                programs: rs.len(),
                line_coverage: mean(rs.iter().map(|r| r.line_coverage)).unwrap_or_else(F::zero),
                availability: mean(rs.iter().filter_map(|r| r.availability)),
                availability_pooled: pooled,
                product: mean(rs.iter().filter_map(|r| r.product)),
            }
        })
        .collect();
    Aggregate { rows }
}

fn opt<F: Display>(v: &Option<F>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl<F: Float + Display> Aggregate<F> {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "toolchain",
            "version",
            "opt_level",
            "programs",
            "line_coverage",
            "availability",
            "availability_pooled",
            "product",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record([
                r.toolchain.clone(),
                r.version.clone(),
                r.opt_level.to_string(),
                r.programs.to_string(),
                r.line_coverage.to_string(),
                opt(&r.availability),
                opt(&r.availability_pooled),
                opt(&r.product),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Gnuplot data blocks, one per metric, with a column per series
    /// (`toolchain-version`) and a row per level.
    pub fn gnuplot_series(&self) -> String {
        let mut series: Vec<String> = self
            .rows
            .iter()
            .map(|r| format!("{}-{}", r.toolchain, r.version))
            .collect();
        series.dedup();
        let mut levels: Vec<OptLevel> = self.rows.iter().map(|r| r.opt_level).collect();
        levels.sort();
        levels.dedup();
        let mut out = String::new();
        let metrics: [(&str, fn(&AggregateRow<F>) -> Option<F>); 3] = [
            ("line_coverage", |r| Some(r.line_coverage)),
            ("availability", |r| r.availability),
            ("product", |r| r.product),
        ];
        for (name, get) in metrics {
            out.push_str(&format!("# {name}\nlevel {}\n", series.join(" ")));
            for l in &levels {
                let cells: Vec<String> = series
                    .iter()
                    .map(|s| {
                        self.rows
                            .iter()
                            .find(|r| r.opt_level == *l && &format!("{}-{}", r.toolchain, r.version) == s)
                            .and_then(get)
                            .map(|v| v.to_string())
                            .unwrap_or_else(|| "?".into())
                    })
                    .collect();
                out.push_str(&format!("{l} {}\n", cells.join(" ")));
            }
            out.push_str("\n\n");
        }
        out
    }
}

/// Lay out per-program violated-conjecture counts `per_row` to a row,
/// in the given program order.
pub fn heat_grid(counts: &[u8], per_row: usize) -> Vec<Vec<u8>> {
    counts.chunks(per_row.max(1)).map(|c| c.to_vec()).collect()
}

pub fn heat_grid_csv(grid: &[Vec<u8>]) -> String {
    let mut out = String::new();
    for row in grid {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}
