mod common;

use std::collections::BTreeMap;

use common::criteria::{clang_level_table, dedupe_venn};
use dbgcomplete::buildmatrix::OptLevel;

#[test]
fn clang_c1_level_table_merges_to_unique_count() {
    let (counts, unique, regions) = clang_level_table();
    let expected = BTreeMap::from([
        (OptLevel::Og, 71),
        (OptLevel::O2, 51),
        (OptLevel::O3, 51),
        (OptLevel::Os, 73),
        (OptLevel::Oz, 74),
    ]);
    assert_eq!(counts, expected);
    assert_eq!(unique, 84);
    assert!(unique <= counts.values().sum());
    assert_eq!(regions, 84);
}

#[test]
fn unique_counts_equal_set_union() {
    dedupe_venn(300, 3).expect_ok();
}
