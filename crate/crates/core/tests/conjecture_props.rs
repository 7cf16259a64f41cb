mod common;

use std::collections::{BTreeMap, BTreeSet};

use dbgcomplete::buildmatrix::OptLevel;
use dbgcomplete::conjectures::{
    check_c1, check_c2, check_c3, dedupe, per_level_counts, ConfigKey, Constituent,
    ConstituentClass, GlobalAssign, Instance, LhsStorage, SourceFacts, VarInstances, Violation,
};
use dbgcomplete::corpus::OpaqueCallSite;
use dbgcomplete::dbgtrace::LineRecord;
use common::criteria::{brute_c3, c3_oracle, state, var};
use proptest::prelude::*;

/// Records with distinct lines in a random stop order.
fn records_strategy(nvars: usize) -> impl Strategy<Value = Vec<LineRecord>> {
    (
        proptest::sample::subsequence((1u32..=50).collect::<Vec<_>>(), 0..=50).prop_shuffle(),
        proptest::collection::vec(proptest::collection::vec(any::<u8>(), nvars), 50),
        proptest::collection::vec(0u8..10, 50),
    )
        .prop_map(move |(lines, states, frames)| {
            lines
                .iter()
                .enumerate()
                .map(|(k, &line)| LineRecord {
                    file: "prog.c".into(),
                    line,
                    stop_pc: line as u64,
                    frame_function: if frames[k] == 0 { "other".into() } else { "main".into() },
                    observations: states[k]
                        .iter()
                        .enumerate()
                        .filter_map(|(v, &c)| state(c).map(|s| (var(v), s)))
                        .collect(),
                })
                .collect()
        })
}

fn instances_strategy(nvars: usize) -> impl Strategy<Value = Vec<VarInstances>> {
    proptest::collection::vec(
        (proptest::collection::btree_set(1u32..=50, 1..5), 0u32..=10),
        nvars,
    )
    .prop_map(|vars| {
        vars.into_iter()
            .enumerate()
            .map(|(v, (lines, extra))| {
                let end = (*lines.iter().max().unwrap() + extra * 4).min(50);
                VarInstances {
                    function: "main".into(),
                    variable: var(v),
                    instances: lines
                        .into_iter()
                        .map(|l| Instance { assign_line: l, scope_end_line: end })
                        .collect(),
                }
            })
            .collect()
    })
}

fn sample_violation(program: &str, line: u32, var: &str, level: OptLevel) -> Violation {
    let rec = common::record(&format!("{line} main"), "prog.c");
    let trace = common::trace(program, level, vec![rec]);
    let call = OpaqueCallSite {
        line,
        callee: "sink".into(),
        argument_vars: vec![var.to_string()],
        function: "main".into(),
    };
    check_c1(&trace, &call).violations.remove(0)
}

#[test]
fn c3_agrees_with_oracle_on_seeded_corpus() {
    c3_oracle(1000, 7).expect_ok();
}

proptest! {
    #[test]
    fn c3_matches_brute_force(
        (records, instances) in (1usize..=10).prop_flat_map(|n| (records_strategy(n), instances_strategy(n)))
    ) {
        let facts = SourceFacts { var_instances: instances, ..Default::default() };
        let trace = common::trace("p", OptLevel::O2, records.clone());
        let got: BTreeSet<(u32, String)> = check_c3(&trace, &facts)
            .violations
            .into_iter()
            .map(|v| (v.line, v.variable))
            .collect();
        prop_assert_eq!(got, brute_c3(&records, &facts));
    }

    #[test]
    fn c1_only_reports_call_arguments(
        records in records_strategy(10),
        args in proptest::sample::subsequence((0..10).collect::<Vec<_>>(), 0..=10),
        line in 1u32..=50,
    ) {
        let call = OpaqueCallSite {
            line,
            callee: "sink".into(),
            argument_vars: args.iter().map(|&i| var(i)).collect(),
            function: "main".into(),
        };
        let trace = common::trace("p", OptLevel::O2, records);
        let out = check_c1(&trace, &call);
        for v in &out.violations {
            prop_assert!(call.argument_vars.contains(&v.variable));
            prop_assert!(!v.observed.is_available());
        }
        prop_assert_eq!(out.violations.is_empty() && !out.skipped.is_empty(), trace.record_at(line).is_none());
    }

    #[test]
    fn c2_never_checks_other_constituents(
        records in records_strategy(6),
        assigns in proptest::collection::vec((1u32..=50, proptest::collection::vec(0u8..3, 6)), 0..8),
    ) {
        let classes = [ConstituentClass::ConstantValued, ConstituentClass::Unalterable, ConstituentClass::Other];
        let facts = SourceFacts {
            global_assign_lines: assigns
                .iter()
                .map(|(line, ks)| GlobalAssign {
                    line: *line,
                    function: "main".into(),
                    lhs_storage: LhsStorage::GlobalVar,
                    constituents: ks
                        .iter()
                        .enumerate()
                        .map(|(i, k)| Constituent { name: var(i), klass: classes[*k as usize], evidence: String::new() })
                        .collect(),
                })
                .collect(),
            ..Default::default()
        };
        let trace = common::trace("p", OptLevel::O2, records);
        for v in check_c2(&trace, &facts).violations {
            let ga = facts.global_assign_lines.iter().filter(|g| g.line == v.line);
            prop_assert!(ga.flat_map(|g| g.constituents.iter()).any(|c| c.name == v.variable && c.klass != ConstituentClass::Other));
        }
    }

    #[test]
    fn dedupe_counts_distinct_keys_and_is_idempotent(
        items in proptest::collection::vec((0u8..3, 1u32..6, 0usize..3, 0usize..7), 0..40)
    ) {
        let violations: Vec<Violation> = items
            .iter()
            .map(|&(p, line, v, l)| sample_violation(&format!("p{p}"), line, &var(v), OptLevel::ALL[l]))
            .collect();
        let keys: BTreeSet<_> = violations.iter().map(|v| v.key()).collect();
        let d = dedupe(violations.clone());
        prop_assert_eq!(d.unique.len(), keys.len());
        let again = dedupe(d.unique.clone());
        prop_assert_eq!(&again.unique, &d.unique);
        let total: usize = per_level_counts(&d.level_matrix).values().sum();
        prop_assert!(d.unique.len() <= total);
        for u in &d.unique {
            let expected: BTreeSet<ConfigKey> = violations
                .iter()
                .filter(|v| v.key() == u.key())
                .flat_map(|v| v.configs.iter().cloned())
                .collect();
            prop_assert_eq!(&u.configs, &expected);
        }
    }
}

#[test]
fn dedupe_merges_levels_into_one_record() {
    let a = sample_violation("p", 4, "x", OptLevel::Og);
    let b = sample_violation("p", 4, "x", OptLevel::O1);
    let d = dedupe(vec![a, b]);
    assert_eq!(d.unique.len(), 1);
    let levels: Vec<OptLevel> = d.level_matrix.values().next().unwrap().iter().copied().collect();
    assert_eq!(levels, vec![OptLevel::Og, OptLevel::O1]);
    let _: BTreeMap<_, _> = d.level_matrix;
}
