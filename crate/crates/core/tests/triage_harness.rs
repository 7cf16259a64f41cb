//! Triage against wrapper compilers whose culprit is planted in advance.

mod common;

use common::fake::ReplayTracer;
use common::harness::{catalog, linear_scan, Harness};
use dbgcomplete::buildmatrix::Family;
use dbgcomplete::conjectures::{ConjectureId, IdentityKey};
use dbgcomplete::triage::{
    group_by_culprit, triage_bisect, triage_flags, AttributionKind, ClangPass, CulpritAttribution, CulpritKey,
    FlagSearch,
};

#[test]
fn planted_gcc_flags_are_recovered() {
    let cat = catalog();
    let tracer = ReplayTracer;
    for k in 0..20 {
        let planted = &cat[(k * 7 + 1) % cat.len()];
        let h = Harness::new(Family::Gcc, &format!("flags {planted}"));
        let v = h.violation(&tracer);
        let probe = h.probe(&tracer, &v);
        let a = triage_flags(&probe, &cat, FlagSearch::default()).unwrap();
        assert_eq!(a.kind, AttributionKind::GccFlagSet, "plant {planted}");
        assert_eq!(a.gcc_flags.as_deref(), Some(&[planted.clone()][..]));
        assert_eq!(a.verification, Some((true, true)));
        assert!(a.clang_pass.is_none());
        // baseline check, one probe per flag, two confirming rebuilds
        assert!(probe.runs() <= 1 + cat.len() + 3, "{} runs", probe.runs());
    }
}

#[test]
fn tree_ccp_plant_gives_that_single_flag() {
    let tracer = ReplayTracer;
    let h = Harness::new(Family::Gcc, "flags -fno-tree-ccp");
    let v = h.violation(&tracer);
    let a = triage_flags(&h.probe(&tracer, &v), &catalog(), FlagSearch::default()).unwrap();
    assert_eq!(a.flag_set(), Some(["-fno-tree-ccp".to_string()].into_iter().collect()));
}

#[test]
fn inlining_enabler_is_reported_last() {
    let tracer = ReplayTracer;
    let h = Harness::new(Family::Gcc, "flags -fno-early-inlining -fno-tree-vrp");
    let v = h.violation(&tracer);
    let a = triage_flags(&h.probe(&tracer, &v), &catalog(), FlagSearch::default()).unwrap();
    assert_eq!(
        a.gcc_flags.unwrap(),
        vec!["-fno-tree-vrp".to_string(), "-fno-early-inlining".to_string()]
    );
}

#[test]
fn flag_triage_edge_cases() {
    let tracer = ReplayTracer;
    let h = Harness::new(Family::Gcc, "flags -fno-not-in-catalog");
    let v = h.violation(&tracer);
    let probe = h.probe(&tracer, &v);
    let a = triage_flags(&probe, &[], FlagSearch::default()).unwrap();
    assert_eq!(a.kind, AttributionKind::Unattributed);

    let a = triage_flags(&probe, &catalog(), FlagSearch::default()).unwrap();
    assert_eq!(a.reason.as_deref(), Some("uncontrollable-by-flags"));

    let small: Vec<String> = catalog().into_iter().take(5).collect();
    let before = probe.runs();
    let a = triage_flags(&probe, &small, FlagSearch { budget: 5, pair_budget: 4 }).unwrap();
    assert!(!a.is_attributed());
    assert!(probe.runs() - before <= 1 + 5 + 4);

    // the baseline stops violating between detection and triage
    std::fs::write(h.root.join("plant.txt"), "never").unwrap();
    let a = triage_flags(&probe, &catalog(), FlagSearch::default()).unwrap();
    assert_eq!(a.reason.as_deref(), Some("flaky"));
}

#[test]
fn planted_bisect_indices_are_recovered() {
    let tracer = ReplayTracer;
    for k in 0..20u32 {
        let total = 12 + k * 3;
        let at = 1 + (k * 11) % total;
        let h = Harness::new(Family::Clang, &format!("bisect {at} {total}"));
        let v = h.violation(&tracer);
        let probe = h.probe(&tracer, &v);
        let a = triage_bisect(&probe).unwrap();
        let pass = a.clang_pass.clone().expect("attributed to a pass");
        assert_eq!(pass.index, at);
        assert_eq!(pass.pass_name, format!("Pass{at}"));
        assert_eq!(pass.target_function, "main");
        let log2 = (total as f64).log2().ceil() as usize;
        assert!(a.recompiles <= log2 + 4, "{} recompiles for {total} passes", a.recompiles);
        assert_eq!(linear_scan(&probe, total as i64), Some(at as i64));
        assert_eq!(a.disabling_flags().unwrap(), vec!["-mllvm".to_string(), format!("-opt-bisect-limit={}", at - 1)]);
    }
}

#[test]
fn twelve_pass_pipeline_with_loss_at_seven() {
    let tracer = ReplayTracer;
    let h = Harness::new(Family::Clang, "bisect 7 12");
    let v = h.violation(&tracer);
    let a = triage_bisect(&h.probe(&tracer, &v)).unwrap();
    assert_eq!(a.clang_pass.unwrap(), ClangPass { index: 7, pass_name: "Pass7".into(), target_function: "main".into() });
}

#[test]
fn bisect_boundaries() {
    let tracer = ReplayTracer;
    let h = Harness::new(Family::Clang, "bisect 0 12");
    let v = h.violation(&tracer);
    let a = triage_bisect(&h.probe(&tracer, &v)).unwrap();
    assert_eq!(a.reason.as_deref(), Some("pre-pipeline"));

    // loss appears at 4 but the full pipeline hides it again: linear scan recovers 4
    let h = Harness::new(Family::Clang, "bisect 4 12 9 12");
    let v = h.violation(&tracer);
    let probe = h.probe(&tracer, &v);
    let a = triage_bisect(&probe).unwrap();
    assert_eq!(a.clang_pass.unwrap().index, 4);
    assert_eq!(linear_scan(&probe, 12), Some(4));

    // only the unlimited build loses the value
    let h = Harness::new(Family::Clang, "bisect 1 12 1 12");
    let v = h.violation(&tracer);
    let a = triage_bisect(&h.probe(&tracer, &v)).unwrap();
    assert_eq!(a.reason.as_deref(), Some("nonmonotonic"));
}

fn key(n: usize, c: ConjectureId) -> IdentityKey {
    IdentityKey { program_id: format!("p{n}"), conjecture: c, line: 10 + n as u32, variable: "v".into() }
}

fn gcc(flags: &[&str]) -> CulpritAttribution {
    CulpritAttribution::flags(flags.iter().map(|s| s.to_string()).collect(), 0, (true, true))
}

fn clang(name: &str) -> CulpritAttribution {
    CulpritAttribution::pass(ClangPass { index: 1, pass_name: name.into(), target_function: "f".into() }, 0, (true, true))
}

#[test]
fn grouping_reproduces_published_rankings() {
    let mut gcc_rows: Vec<(IdentityKey, CulpritAttribution)> = Vec::new();
    let mut n = 0;
    let mut add = |rows: &mut Vec<_>, c: ConjectureId, a: CulpritAttribution, count: usize| {
        for _ in 0..count {
            rows.push((key(n, c), a.clone()));
            n += 1;
        }
    };
    add(&mut gcc_rows, ConjectureId::C1, gcc(&["-fno-tree-ccp"]), 17);
    add(&mut gcc_rows, ConjectureId::C1, gcc(&["-fno-ipa-sra"]), 24);
    add(&mut gcc_rows, ConjectureId::C1, gcc(&["-fno-tree-fre", "-fno-tree-pta"]), 6);
    add(&mut gcc_rows, ConjectureId::C1, gcc(&["-fno-tree-pta", "-fno-tree-fre"]), 5);
    add(&mut gcc_rows, ConjectureId::C1, gcc(&["-fno-toplevel-reorder"]), 57);
    add(&mut gcc_rows, ConjectureId::C1, gcc(&["-fno-tree-vrp"]), 15);
    let groups = group_by_culprit(gcc_rows.iter().map(|(k, a)| (k, a)));
    let table: Vec<(String, usize)> = groups.iter().map(|g| (g.culprit.to_string(), g.count)).collect();
    assert_eq!(
        table,
        vec![
            ("toplevel-reorder".to_string(), 57),
            ("ipa-sra".to_string(), 24),
            ("tree-ccp".to_string(), 17),
            ("tree-vrp".to_string(), 15),
            ("tree-fre+tree-pta".to_string(), 11),
        ]
    );

    let mut clang_rows = Vec::new();
    for (name, count) in [("InstCombine", 85), ("Loop Strength Reduction", 454), ("IPSCCP", 53), ("Merge contiguous icmps", 5)] {
        add(&mut clang_rows, ConjectureId::C2, clang(name), count);
    }
    // duplicates of an identity key count once
    let dup = clang_rows[0].clone();
    clang_rows.push(dup);
    let groups = group_by_culprit(clang_rows.iter().map(|(k, a)| (k, a)));
    assert_eq!(groups[0].culprit, CulpritKey::Pass("Loop Strength Reduction".into()));
    assert_eq!(groups[0].count, 454);
    assert_eq!(groups.iter().map(|g| g.count).sum::<usize>(), 454 + 85 + 53 + 5);

    assert!(group_by_culprit(std::iter::empty()).is_empty());
}
