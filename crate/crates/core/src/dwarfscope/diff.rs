use serde::{Deserialize, Serialize};
use similar::TextDiff;

use super::{lookup_var_die_in, DwarfError, VarDieInfo};
use crate::buildmatrix::{normalize_asm, BuiltArtifact};
use crate::elfdwarf;

/// Side-by-side view of one variable's DIE in two builds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DieDiff {
    pub function: String,
    pub variable: String,
    pub die_a: Option<VarDieInfo>,
    pub die_b: Option<VarDieInfo>,
    /// One line per differing attribute, `name: a -> b`.
    pub attribute_diff: Vec<String>,
    /// Unified diff of the normalized assembly.
    pub asm_diff: String,
    pub same_code: bool,
}

impl DieDiff {
    pub fn is_empty(&self) -> bool {
        self.attribute_diff.is_empty() && self.asm_diff.is_empty()
    }

    pub fn render_text(&self) -> String {
        let mut s = format!(
            "{} in {}: same code {}\n",
            self.variable, self.function, self.same_code
        );
        for line in &self.attribute_diff {
            s.push_str(line);
            s.push('\n');
        }
        s.push_str(&self.asm_diff);
        s
    }
}

fn fmt_ranges(r: &[(u64, u64)]) -> String {
    let parts: Vec<String> = r.iter().map(|(lo, hi)| format!("[{lo:#x},{hi:#x})")).collect();
    parts.join(" ")
}

pub(crate) fn attribute_diff(a: Option<&VarDieInfo>, b: Option<&VarDieInfo>) -> Vec<String> {
    let mut out = Vec::new();
    match (a, b) {
        (None, None) => {}
        (Some(_), None) => out.push("die: present -> absent".into()),
        (None, Some(_)) => out.push("die: absent -> present".into()),
        (Some(a), Some(b)) => {
            let mut cmp = |name: &str, x: String, y: String| {
                if x != y {
                    out.push(format!("{name}: {x} -> {y}"));
                }
            };
            cmp("location", a.has_location.to_string(), b.has_location.to_string());
            cmp("const_value", a.has_const_value.to_string(), b.has_const_value.to_string());
            cmp("ranges", fmt_ranges(&a.location_ranges), fmt_ranges(&b.location_ranges));
            cmp("scope", format!("{:?}", a.scope_kind), format!("{:?}", b.scope_kind));
            cmp(
                "abstract_origin",
                a.abstract_origin_present.to_string(),
                b.abstract_origin_present.to_string(),
            );
        }
    }
    out
}

fn read_asm(artifact: &BuiltArtifact) -> String {
    std::fs::read_to_string(artifact.executable_path.with_file_name("asm.s"))
        .map(|s| normalize_asm(&s))
        .unwrap_or_default()
}

/// Compare the variable's DIE and the assembly of two builds of one program.
pub fn die_diff(
    a: &BuiltArtifact,
    b: &BuiltArtifact,
    function: &str,
    variable: &str,
) -> Result<DieDiff, DwarfError> {
    let die_a = lookup_var_die_in(&elfdwarf::load(&a.executable_path)?, function, variable, None)?;
    let die_b = lookup_var_die_in(&elfdwarf::load(&b.executable_path)?, function, variable, None)?;
    let (asm_a, asm_b) = (read_asm(a), read_asm(b));
    let asm_diff = if asm_a == asm_b {
        String::new()
    } else {
        TextDiff::from_lines(&asm_a, &asm_b)
            .unified_diff()
            .header("a.s", "b.s")
            .to_string()
    };
    Ok(DieDiff {
        function: function.to_string(),
        variable: variable.to_string(),
        attribute_diff: attribute_diff(die_a.as_ref(), die_b.as_ref()),
        die_a,
        die_b,
        asm_diff,
        same_code: a.asm_hash == b.asm_hash,
    })
}
