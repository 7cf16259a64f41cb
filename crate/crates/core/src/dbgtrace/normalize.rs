use regex::Regex;
use std::sync::OnceLock;

use super::AvailabilityState;

const UNAVAILABLE: &[&str] = &[
    "<optimized out>",
    "<variable not available>",
    "<no location, value may have been optimized out>",
    "<unavailable>",
];

fn hex_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"0x[0-9a-fA-F]+").unwrap())
}

pub fn mask_addresses(value: &str) -> String {
    hex_re().replace_all(value, "<addr>").into_owned()
}

/// Map a debugger's rendering of a listed variable to an availability state.
pub fn normalize_value(raw: &str) -> AvailabilityState {
    let v = raw.trim();
    if UNAVAILABLE.iter().any(|u| v == *u) || v.starts_with("<error:") || v.is_empty() {
        return AvailabilityState::VisibleOptimizedOut;
    }
    AvailabilityState::available(mask_addresses(v))
}
