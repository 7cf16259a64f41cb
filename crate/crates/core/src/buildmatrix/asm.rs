use std::collections::{HashMap, HashSet};

use regex::Regex;
use sha2::{Digest, Sha256};

const DROPPED_DIRECTIVES: &[&str] = &[
    ".file", ".loc", ".loc_mark_labels", ".ident", ".addrsig", ".addrsig_sym",
];

fn strip_comment(line: &str) -> &str {
    let mut in_str = false;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        match c {
            _ if escaped => escaped = false,
            '\\' if in_str => escaped = true,
            '"' => in_str = !in_str,
            '#' if !in_str => return &line[..i],
            _ => {}
        }
    }
    line
}

fn section_name(line: &str) -> Option<&str> {
    let mut words = line.split_whitespace();
    match words.next()? {
        ".section" | ".pushsection" => words.next().map(|w| w.trim_end_matches(',')),
        ".text" => Some(".text"),
        ".data" => Some(".data"),
        ".bss" => Some(".bss"),
        _ => None,
    }
}

/// Normalize compiler assembly so that builds differing only in debug metadata compare equal.
pub fn normalize_asm(text: &str) -> String {
    let mut kept: Vec<String> = Vec::new();
    let mut in_debug = false;
    for raw in text.lines() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(sec) = section_name(line) {
            in_debug = sec.starts_with(".debug") || sec.starts_with(".zdebug");
            if in_debug {
                continue;
            }
        }
        if in_debug {
            continue;
        }
        let first = line.split_whitespace().next().unwrap_or("");
        if first.starts_with(".cfi_") || DROPPED_DIRECTIVES.contains(&first) {
            continue;
        }
        kept.push(line.split_whitespace().collect::<Vec<_>>().join(" "));
    }

    let label = Regex::new(r"\.L[A-Za-z0-9_$.]+").unwrap();
    let is_def = |l: &str| l.starts_with(".L") && l.ends_with(':') && !l.contains(' ');
    let mut referenced: HashSet<String> = HashSet::new();
    for l in kept.iter().filter(|l| !is_def(l)) {
        for m in label.find_iter(l) {
            referenced.insert(m.as_str().to_string());
        }
    }
    kept.retain(|l| !is_def(l) || referenced.contains(l.trim_end_matches(':')));

    // section switches with no content behind them, or repeating the current section
    let mut compact: Vec<String> = Vec::with_capacity(kept.len());
    let mut current = String::new();
    for (i, l) in kept.iter().enumerate() {
        if section_name(l).is_some() {
            let next_is_switch = kept.get(i + 1).map_or(true, |n| section_name(n).is_some());
            if next_is_switch || *l == current {
                continue;
            }
            current = l.clone();
        }
        compact.push(l.clone());
    }
    let kept = compact;

    let mut names: HashMap<String, usize> = HashMap::new();
    let mut out = String::new();
    for l in &kept {
        let renamed = label.replace_all(l, |c: &regex::Captures| {
            let next = names.len();
            let n = *names.entry(c[0].to_string()).or_insert(next);
            format!(".L{n}")
        });
        out.push_str(&renamed);
        out.push('\n');
    }
    out
}

pub fn asm_hash(normalized: &str) -> String {
    hex::encode(Sha256::digest(normalized.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn debug_metadata_is_ignored() {
        let plain = "\t.text\nmain:\n.L2:\n\tmovl (%rax), %edx # load\n\tjne .L2\n\tret\n";
        let debug = "\t.file \"t.c\"\n\t.text\n.Ltext0:\nmain:\n.LFB0:\n\t.loc 1 3 12 view -0\n\t.cfi_startproc\n.L7:\n\tmovl\t(%rax),   %edx\n\t.loc 1 8 9\n\tjne\t.L7\n\tret\n\t.section\t.debug_info,\"\",@progbits\n.Ldebug_info0:\n\t.long .LFB0\n\t.text\n";
        assert_eq!(normalize_asm(plain), normalize_asm(debug));
    }

    #[test]
    fn strings_keep_hashes() {
        let n = normalize_asm("\t.string \"a#b\" # comment\n");
        assert_eq!(n, ".string \"a#b\"\n");
    }

    #[test]
    fn code_changes_are_visible() {
        assert_ne!(
            normalize_asm("main:\n\tmovl $1, %eax\n"),
            normalize_asm("main:\n\tmovl $2, %eax\n")
        );
    }
}
