//! The three conjecture checkers over a collected trace.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ConfigKey, ConjectureId, SourceFacts, Violation};
use crate::corpus::OpaqueCallSite;
use crate::dbgtrace::{AvailabilityState, DebugTrace, LineRecord, ValidationOutcome};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipNote {
    pub conjecture: ConjectureId,
    pub line: u32,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub violations: Vec<Violation>,
    pub skipped: Vec<SkipNote>,
}

impl CheckOutcome {
    pub fn extend(&mut self, other: CheckOutcome) {
        self.violations.extend(other.violations);
        self.skipped.extend(other.skipped);
    }
}

fn config_of(trace: &DebugTrace) -> BTreeSet<ConfigKey> {
    BTreeSet::from([ConfigKey {
        toolchain: trace.toolchain_id.clone(),
        opt_level: trace.config.opt_level,
    }])
}

/// A frame other than the source function means the debugger is not
/// showing this function's variables at all.
fn foreign(rec: &LineRecord, function: &str) -> bool {
    !function.is_empty() && !rec.frame_function.is_empty() && rec.frame_function != function
}

fn observe(rec: &LineRecord, function: &str, var: &str) -> AvailabilityState {
    if foreign(rec, function) {
        AvailabilityState::NotVisible
    } else {
        rec.state(var)
    }
}

fn violation(
    trace: &DebugTrace,
    conjecture: ConjectureId,
    rec: &LineRecord,
    function: &str,
    variable: &str,
    observed: AvailabilityState,
    expected: String,
) -> Violation {
    Violation {
        program_id: trace.program_id.clone(),
        conjecture,
        file: rec.file.clone(),
        line: rec.line,
        variable: variable.to_string(),
        observed,
        expected,
        configs: config_of(trace),
        validation: ValidationOutcome::default(),
        die_verdict: None,
        function: function.to_string(),
        frame_function: rec.frame_function.clone(),
        stop_pc: rec.stop_pc,
        original_line: None,
    }
}

/// Every argument of the opaque call must be available where the call is made.
pub fn check_c1(trace: &DebugTrace, call: &OpaqueCallSite) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    let Some(rec) = trace.record_at(call.line) else {
        out.skipped.push(SkipNote {
            conjecture: ConjectureId::C1,
            line: call.line,
            reason: "call line never reached".into(),
        });
        return out;
    };
    for var in &call.argument_vars {
        let state = observe(rec, &call.function, var);
        if !state.is_available() {
            let mut v = violation(
                trace,
                ConjectureId::C1,
                rec,
                &call.function,
                var,
                state,
                format!("available as argument of {}", call.callee),
            );
            v.original_line = Some(call.line);
            out.violations.push(v);
        }
    }
    out
}

/// Constant-valued and unalterable constituents of a global assignment
/// must be available on its line.
pub fn check_c2(trace: &DebugTrace, facts: &SourceFacts) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for ga in &facts.global_assign_lines {
        let checked: Vec<_> = ga
            .constituents
            .iter()
            .filter(|c| c.klass != super::ConstituentClass::Other)
            .collect();
        if checked.is_empty() {
            continue;
        }
        let Some(rec) = trace.record_at(ga.line) else {
            out.skipped.push(SkipNote {
                conjecture: ConjectureId::C2,
                line: ga.line,
                reason: "assignment line never reached".into(),
            });
            continue;
        };
        for c in checked {
            let state = observe(rec, &ga.function, &c.name);
            if !state.is_available() {
                out.violations.push(violation(
                    trace,
                    ConjectureId::C2,
                    rec,
                    &ga.function,
                    &c.name,
                    state,
                    format!("available ({:?}: {})", c.klass, c.evidence),
                ));
            }
        }
    }
    out
}

/// Within one assignment instance availability may only decrease.
pub fn check_c3(trace: &DebugTrace, facts: &SourceFacts) -> CheckOutcome {
    let mut out = CheckOutcome::default();
    for vi in &facts.var_instances {
        for (k, inst) in vi.instances.iter().enumerate() {
            let next = vi
                .instances
                .get(k + 1)
                .map(|n| n.assign_line)
                .unwrap_or(u32::MAX);
            let start = trace
                .records
                .iter()
                .position(|r| r.line == inst.assign_line)
                .map(|p| p + 1)
                .unwrap_or(0);
            let window = trace.records[start..].iter().filter(|r| {
                r.line > inst.assign_line
                    && r.line < next
                    && r.line <= inst.scope_end_line
                    && !foreign(r, &vi.function)
            });
            let mut lowest: Option<(u8, AvailabilityState)> = None;
            for rec in window {
                let state = rec.state(&vi.variable);
                let rank = state.rank();
                match &lowest {
                    Some((min, seen)) if rank > *min => {
                        out.violations.push(violation(
                            trace,
                            ConjectureId::C3,
                            rec,
                            &vi.function,
                            &vi.variable,
                            state,
                            format!(
                                "no better than {} (assigned at line {})",
                                seen.tag(),
                                inst.assign_line
                            ),
                        ));
                        break;
                    }
                    Some((min, _)) if rank >= *min => {}
                    _ => lowest = Some((rank, state)),
                }
            }
        }
    }
    out
}
