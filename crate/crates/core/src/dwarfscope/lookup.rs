use std::collections::HashMap;
use std::path::Path;

use gimli::{AttributeValue, DwTag, UnitOffset};

use super::{DwarfError, ScopeKind, VarDieInfo};
use crate::elfdwarf::{self, Reader};

#[derive(Debug, Clone)]
enum Loc {
    Absent,
    Expr,
    List(Vec<(u64, u64)>),
}

#[derive(Debug)]
struct Node {
    offset: u64,
    tag: DwTag,
    parent: Option<usize>,
    name: Option<String>,
    origin: Option<UnitOffset>,
    specification: Option<UnitOffset>,
    ranges: Vec<(u64, u64)>,
    loc: Loc,
    const_value: bool,
}

struct UnitModel {
    nodes: Vec<Node>,
    by_offset: HashMap<UnitOffset, usize>,
}

fn build_unit(dwarf: &gimli::Dwarf<Reader>, unit: &gimli::Unit<Reader>) -> Result<UnitModel, DwarfError> {
    let mut nodes: Vec<Node> = Vec::new();
    let mut by_offset = HashMap::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut depth: isize = 0;
    let mut entries = unit.entries();
    while let Some((delta, entry)) = entries.next_dfs()? {
        depth += delta;
        stack.truncate(depth.max(0) as usize);
        let parent = stack.last().copied();
        let unit_ref = |v: Option<AttributeValue<Reader>>| match v {
            Some(AttributeValue::UnitRef(o)) => Some(o),
            _ => None,
        };
        let name = entry
            .attr_value(gimli::DW_AT_name)?
            .and_then(|v| elfdwarf::attr_string(dwarf, unit, v));
        let mut ranges = Vec::new();
        if matches!(
            entry.tag(),
            gimli::DW_TAG_subprogram | gimli::DW_TAG_inlined_subroutine | gimli::DW_TAG_lexical_block
        ) {
            let mut iter = dwarf.die_ranges(unit, entry)?;
            while let Some(r) = iter.next()? {
                if r.begin < r.end {
                    ranges.push((r.begin, r.end));
                }
            }
        }
        let loc = match entry.attr_value(gimli::DW_AT_location)? {
            None => Loc::Absent,
            Some(AttributeValue::Exprloc(e)) if e.0.is_empty() => Loc::Absent,
            Some(AttributeValue::Exprloc(_)) | Some(AttributeValue::Block(_)) => Loc::Expr,
            Some(v) => {
                let mut out = Vec::new();
                if let Some(mut iter) = dwarf.attr_locations(unit, v)? {
                    while let Some(e) = iter.next()? {
                        if e.range.begin < e.range.end && !e.data.0.is_empty() {
                            out.push((e.range.begin, e.range.end));
                        }
                    }
                }
                Loc::List(out)
            }
        };
        let offset = entry
            .offset()
            .to_debug_info_offset(&unit.header)
            .map(|o| o.0 as u64)
            .unwrap_or(entry.offset().0 as u64);
        let idx = nodes.len();
        by_offset.insert(entry.offset(), idx);
        nodes.push(Node {
            offset,
            tag: entry.tag(),
            parent,
            name,
            origin: unit_ref(entry.attr_value(gimli::DW_AT_abstract_origin)?),
            specification: unit_ref(entry.attr_value(gimli::DW_AT_specification)?),
            ranges,
            loc,
            const_value: entry.attr_value(gimli::DW_AT_const_value)?.is_some(),
        });
        if entry.has_children() {
            stack.push(idx);
        }
    }
    Ok(UnitModel { nodes, by_offset })
}

impl UnitModel {
    fn origin_of(&self, i: usize) -> Option<usize> {
        let n = &self.nodes[i];
        n.origin
            .or(n.specification)
            .and_then(|o| self.by_offset.get(&o).copied())
    }

    fn name(&self, mut i: usize) -> Option<&str> {
        for _ in 0..4 {
            if let Some(n) = &self.nodes[i].name {
                return Some(n);
            }
            i = self.origin_of(i)?;
        }
        None
    }

    fn contains(&self, i: usize, pc: u64) -> bool {
        self.nodes[i].ranges.iter().any(|&(lo, hi)| lo <= pc && pc < hi)
    }

    fn is_scope_root(tag: DwTag) -> bool {
        tag == gimli::DW_TAG_subprogram || tag == gimli::DW_TAG_inlined_subroutine
    }

    /// Ancestors of `i` up to (excluding) `root`, or `None` if `root` is not
    /// the nearest function-like ancestor.
    fn chain_to(&self, i: usize, root: usize) -> Option<Vec<usize>> {
        let mut chain = Vec::new();
        let mut cur = self.nodes[i].parent?;
        while cur != root {
            if Self::is_scope_root(self.nodes[cur].tag) {
                return None;
            }
            chain.push(cur);
            cur = self.nodes[cur].parent?;
        }
        Some(chain)
    }

    fn find_var(&self, root: usize, variable: &str, pc: Option<u64>) -> Option<(usize, Vec<usize>)> {
        let mut best: Option<(usize, Vec<usize>, bool)> = None;
        for i in root + 1..self.nodes.len() {
            let n = &self.nodes[i];
            if n.tag != gimli::DW_TAG_variable && n.tag != gimli::DW_TAG_formal_parameter {
                continue;
            }
            if self.name(i) != Some(variable) {
                continue;
            }
            let Some(chain) = self.chain_to(i, root) else {
                continue;
            };
            let inside = match pc {
                Some(pc) => chain.iter().all(|&b| self.nodes[b].ranges.is_empty() || self.contains(b, pc)),
                None => true,
            };
            let better = match &best {
                None => true,
                Some((_, c, ins)) => (inside && !ins) || (inside == *ins && chain.len() > c.len()),
            };
            if better {
                best = Some((i, chain, inside));
            }
        }
        best.map(|(i, c, _)| (i, c))
    }

    fn scope_kind(&self, idx: usize) -> ScopeKind {
        match self.nodes[idx].tag {
            gimli::DW_TAG_lexical_block => ScopeKind::LexicalBlock,
            gimli::DW_TAG_inlined_subroutine => ScopeKind::InlinedSubroutine,
            _ => ScopeKind::Subprogram,
        }
    }

    fn info(&self, var: usize, chain: &[usize], root: usize) -> VarDieInfo {
        let n = &self.nodes[var];
        let origin = self.origin_of(var);
        let const_value = n.const_value || origin.is_some_and(|o| self.nodes[o].const_value);
        let scope = chain.first().copied().unwrap_or(root);
        let location_ranges = match &n.loc {
            Loc::Absent => Vec::new(),
            Loc::List(r) => r.clone(),
            Loc::Expr => chain
                .iter()
                .copied()
                .chain(std::iter::once(root))
                .map(|s| self.nodes[s].ranges.clone())
                .find(|r| !r.is_empty())
                .unwrap_or_default(),
        };
        VarDieInfo {
            die_offset: n.offset,
            has_location: !matches!(n.loc, Loc::Absent),
            has_const_value: const_value,
            location_ranges,
            scope_kind: self.scope_kind(scope),
            abstract_origin_present: n.origin.is_some(),
        }
    }

    fn lookup(&self, function: &str, variable: &str, pc: Option<u64>) -> Option<VarDieInfo> {
        let roots: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| {
                let n = &self.nodes[i];
                Self::is_scope_root(n.tag) && !n.ranges.is_empty() && self.name(i) == Some(function)
            })
            .collect();
        let root = pc
            .and_then(|pc| {
                roots
                    .iter()
                    .copied()
                    .filter(|&r| self.contains(r, pc))
                    // innermost instance wins when inlined copies nest
                    .max()
            })
            .or_else(|| roots.first().copied())?;
        if let Some((var, chain)) = self.find_var(root, variable, pc) {
            return Some(self.info(var, &chain, root));
        }
        // the variable may exist only in the abstract origin
        let abs = self.origin_of(root)?;
        let (var, _) = self.find_var(abs, variable, None)?;
        let n = &self.nodes[var];
        Some(VarDieInfo {
            die_offset: n.offset,
            has_location: false,
            has_const_value: n.const_value,
            location_ranges: Vec::new(),
            scope_kind: self.scope_kind(root),
            abstract_origin_present: true,
        })
    }
}

/// Find the DIE of `variable` lexically enclosing `pc` (static address)
/// within `function`, including inlined instances of it.
pub fn lookup_var_die_in(
    dwarf: &gimli::Dwarf<Reader>,
    function: &str,
    variable: &str,
    pc: Option<u64>,
) -> Result<Option<VarDieInfo>, DwarfError> {
    let mut units = dwarf.units();
    let mut fallback = None;
    while let Some(header) = units.next()? {
        let unit = dwarf.unit(header)?;
        let model = build_unit(dwarf, &unit)?;
        if let Some(info) = model.lookup(function, variable, pc) {
            let covers_pc = pc.map_or(true, |pc| {
                model
                    .nodes
                    .iter()
                    .enumerate()
                    .any(|(i, n)| UnitModel::is_scope_root(n.tag) && model.name(i) == Some(function) && model.contains(i, pc))
            });
            if covers_pc {
                return Ok(Some(info));
            }
            fallback.get_or_insert(info);
        }
    }
    Ok(fallback)
}

pub fn lookup_var_die(
    executable: &Path,
    function: &str,
    variable: &str,
    pc: u64,
) -> Result<Option<VarDieInfo>, DwarfError> {
    let dwarf = elfdwarf::load(executable)?;
    lookup_var_die_in(&dwarf, function, variable, Some(pc))
}
