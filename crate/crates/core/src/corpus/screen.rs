use std::path::PathBuf;
use std::process::Command;
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Finding, ScreenVerdict, TestProgram};
use crate::process;

/// Warning options whose diagnostics indicate likely undefined behavior.
pub const BLOCKING_WARNINGS: &[&str] = &[
    "uninitialized",
    "maybe-uninitialized",
    "sometimes-uninitialized",
    "conditional-uninitialized",
    "sequence-point",
    "unsequenced",
    "array-bounds",
    "array-bounds-pointer-arithmetic",
    "overflow",
    "integer-overflow",
    "shift-count-overflow",
    "shift-count-negative",
    "shift-negative-value",
    "shift-overflow",
    "div-by-zero",
    "division-by-zero",
    "aggressive-loop-optimizations",
    "return-type",
    "null-dereference",
    "stringop-overflow",
    "implicit-function-declaration",
    "return-local-addr",
    "return-stack-address",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScreenTool {
    /// A compiler run with warnings enabled; diagnostics in the blocking list fail the screen.
    Compiler { id: String, path: PathBuf },
    /// An external analyzer invoked as `<path> <args...> <file>`; nonzero exit fails the screen.
    Analyzer {
        id: String,
        path: PathBuf,
        #[serde(default)]
        args: Vec<String>,
    },
}

fn diagnostic_re() -> Regex {
    Regex::new(r"^[^:]+:\d+:(?:\d+:)?\s*(warning|error):\s*(.*?)(?:\s*\[-W([\w-]+)(?:=\d+)?\])?\s*$")
        .unwrap()
}

/// Parse compiler stderr into findings, marking errors and blocking warnings.
pub fn parse_diagnostics(tool: &str, stderr: &str) -> Vec<Finding> {
    let re = diagnostic_re();
    stderr
        .lines()
        .filter_map(|l| {
            let c = re.captures(l)?;
            let blocking = &c[1] == "error"
                || c.get(3)
                    .map(|w| BLOCKING_WARNINGS.contains(&w.as_str()))
                    .unwrap_or(false);
            Some(Finding {
                tool: tool.to_string(),
                text: l.trim().to_string(),
                blocking,
            })
        })
        .collect()
}

pub fn screen_undefined_behavior(
    program: &TestProgram,
    tools: &[ScreenTool],
) -> Result<ScreenVerdict, CorpusError> {
    let dir = tempfile::tempdir()?;
    let src = dir.path().join(program.file_name());
    std::fs::write(&src, &program.source_text)?;
    let mut findings = Vec::new();
    for tool in tools {
        match tool {
            ScreenTool::Compiler { id, path } => {
                let mut cmd = Command::new(path);
                cmd.args(["-O1", "-c", "-Wall", "-Wextra", "-Wuninitialized"])
                    .arg(&src)
                    .arg("-o")
                    .arg(dir.path().join("screen.o"));
                let out = process::run(&mut cmd, Duration::from_secs(120))?;
                findings.extend(parse_diagnostics(id, &out.stderr));
                if !out.success() && !findings.iter().any(|f| f.tool == *id && f.blocking) {
                    findings.push(Finding {
                        tool: id.clone(),
                        text: format!("compiler exited with {:?}", out.code),
                        blocking: true,
                    });
                }
            }
            ScreenTool::Analyzer { id, path, args } => {
                if super::generate::check_executable(path).is_err() {
                    findings.push(Finding {
                        tool: id.clone(),
                        text: format!("skipped: {} not installed", path.display()),
                        blocking: false,
                    });
                    continue;
                }
                let mut cmd = Command::new(path);
                cmd.args(args).arg(&src);
                let out = process::run(&mut cmd, Duration::from_secs(300))?;
                if !out.success() {
                    let text = format!("{}{}", out.stdout, out.stderr);
                    findings.push(Finding {
                        tool: id.clone(),
                        text: text.trim().to_string(),
                        blocking: true,
                    });
                }
            }
        }
    }
    Ok(ScreenVerdict::from_findings(findings))
}
