use std::str::FromStr;

use super::CampaignError;
use crate::buildmatrix::OptLevel;
use crate::conjectures::{ConjectureId, Violation};

/// Selects violations by identity-key fields.
///
/// Either a full key `program:C1:7:var`, or comma-separated `field=value` terms
/// over `program` (prefix match), `conjecture`, `line`, `variable`, `toolchain`
/// and `level`. The empty filter selects everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ViolationFilter {
    key: Option<String>,
    program: Option<String>,
    conjecture: Option<ConjectureId>,
    line: Option<u32>,
    variable: Option<String>,
    toolchain: Option<String>,
    level: Option<OptLevel>,
}

impl FromStr for ViolationFilter {
    type Err = CampaignError;

    fn from_str(s: &str) -> Result<Self, CampaignError> {
        let s = s.trim();
        let mut f = ViolationFilter::default();
        if s.is_empty() {
            return Ok(f);
        }
        if !s.contains('=') && s.matches(':').count() == 3 {
            f.key = Some(s.to_string());
            return Ok(f);
        }
        let bad = |m: String| CampaignError::Config(format!("filter: {m}"));
        for term in s.split(',') {
            let (k, v) = term.split_once('=').ok_or_else(|| bad(format!("`{term}` is not field=value")))?;
            let v = v.trim();
            match k.trim() {
                "program" => f.program = Some(v.into()),
                "conjecture" => f.conjecture = Some(v.parse().map_err(bad)?),
                "line" => f.line = Some(v.parse().map_err(|_| bad(format!("bad line `{v}`")))?),
                "variable" => f.variable = Some(v.into()),
                "toolchain" => f.toolchain = Some(v.into()),
                "level" => f.level = Some(v.parse().map_err(bad)?),
                other => return Err(bad(format!("unknown field `{other}`"))),
            }
        }
        Ok(f)
    }
}

impl ViolationFilter {
    pub fn matches(&self, v: &Violation) -> bool {
        if let Some(k) = &self.key {
            return v.key().to_string() == *k;
        }
        self.program.as_ref().map_or(true, |p| v.program_id.starts_with(p.as_str()))
            && self.conjecture.map_or(true, |c| v.conjecture == c)
            && self.line.map_or(true, |l| v.line == l)
            && self.variable.as_ref().map_or(true, |x| v.variable == *x)
            && self.toolchain.as_ref().map_or(true, |t| v.configs.iter().any(|c| c.toolchain == *t))
            && self.level.map_or(true, |l| v.configs.iter().any(|c| c.opt_level == l))
    }
}
