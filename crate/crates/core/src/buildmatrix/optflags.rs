use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BuildError, Family, OptLevel, ToolchainSpec};
use crate::process;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagCatalog {
    pub version: String,
    pub opt_level: OptLevel,
    /// `-fno-…` negations in the compiler's own listing order.
    pub flags: Vec<String>,
    pub source: String,
}

/// Parse `gcc -Q --help=optimizers` output into `-fno-…` negations of enabled boolean flags.
pub fn parse_optimizer_dump(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| {
            let mut it = l.split_whitespace();
            let name = it.next()?;
            let state = it.next()?;
            if !name.starts_with("-f") || name.contains('=') || state != "[enabled]" {
                return None;
            }
            let base = name.trim_start_matches("-f");
            if base.starts_with("no-") {
                return None;
            }
            Some(format!("-fno-{base}"))
        })
        .collect()
}

/// Remove negations the driver refuses, e.g. `-fno-stack-protector-strong`.
fn drop_rejected(toolchain: &ToolchainSpec, level: OptLevel, flags: &mut Vec<String>) -> Result<(), BuildError> {
    let dir = tempfile::tempdir()?;
    std::fs::write(dir.path().join("e.c"), "int main(void) { return 0; }\n")?;
    let re = regex::Regex::new(r"unrecognized command-line option '(-f[^']+)'").expect("valid regex");
    for _ in 0..4 {
        let mut cmd = Command::new(&toolchain.compiler_path);
        cmd.current_dir(dir.path()).arg(level.flag()).args(flags.iter()).args(["-S", "e.c", "-o", "e.s"]);
        let out = process::run(&mut cmd, Duration::from_secs(60))?;
        if out.success() {
            return Ok(());
        }
        let bad: Vec<String> = re.captures_iter(&out.stderr).map(|c| c[1].to_string()).collect();
        if bad.is_empty() {
            return Ok(());
        }
        flags.retain(|f| !bad.contains(f));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CatalogFile {
    version: Option<String>,
    levels: std::collections::BTreeMap<String, Vec<String>>,
}

pub fn enumerate_optflags(
    toolchain: &ToolchainSpec,
    level: OptLevel,
) -> Result<FlagCatalog, BuildError> {
    if level == OptLevel::O0 {
        return Ok(FlagCatalog {
            version: toolchain.version_string.clone(),
            opt_level: level,
            flags: Vec::new(),
            source: "empty at O0".into(),
        });
    }
    if toolchain.family == Family::Gcc {
        let mut cmd = Command::new(&toolchain.compiler_path);
        cmd.arg(level.flag()).args(["-Q", "--help=optimizers"]);
        if let Ok(out) = process::run(&mut cmd, Duration::from_secs(60)) {
            let mut flags = parse_optimizer_dump(&out.stdout);
            if out.success() && !flags.is_empty() {
                drop_rejected(toolchain, level, &mut flags)?;
                return Ok(FlagCatalog {
                    version: toolchain.version_string.clone(),
                    opt_level: level,
                    flags,
                    source: "compiler dump".into(),
                });
            }
        }
    }
    let path = toolchain
        .flag_catalog_path
        .as_ref()
        .ok_or_else(|| BuildError::CatalogUnavailable(toolchain.id.clone()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|_| BuildError::CatalogUnavailable(path.display().to_string()))?;
    let file: CatalogFile = toml::from_str(&text)
        .map_err(|e| BuildError::CatalogUnavailable(format!("{}: {e}", path.display())))?;
    let flags = file
        .levels
        .get(&level.to_string())
        .cloned()
        .ok_or_else(|| BuildError::CatalogUnavailable(format!("{} has no {level}", path.display())))?;
    Ok(FlagCatalog {
        version: file.version.unwrap_or_else(|| toolchain.version_string.clone()),
        opt_level: level,
        flags,
        source: path.display().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dump() {
        let dump = "The following options control optimizations:\n\
  -faggressive-loop-optimizations \t[enabled]\n\
  -falign-functions=           \t\n\
  -fcompare-elim               \t[disabled]\n\
  -ftree-ccp                   \t[enabled]\n\
  -fvect-cost-model=[unlimited|dynamic|cheap|very-cheap] \tvery-cheap\n";
        assert_eq!(
            parse_optimizer_dump(dump),
            ["-fno-aggressive-loop-optimizations", "-fno-tree-ccp"]
        );
    }

    #[test]
    fn catalog_file_fallback() {
        let dir = tempfile::tempdir().unwrap();
        let cat = dir.path().join("cat.toml");
        std::fs::write(&cat, "version = \"x\"\n[levels]\nO2 = [\"-fno-a\", \"-fno-b\"]\n").unwrap();
        let tc = ToolchainSpec {
            id: "clangish".into(),
            family: Family::Clang,
            compiler_path: "/nonexistent".into(),
            version_string: "v".into(),
            debugger_path: "/nonexistent".into(),
            alt_debugger_paths: vec![],
            flag_catalog_path: Some(cat),
            og_is_o1: false,
        };
        let c = enumerate_optflags(&tc, OptLevel::O2).unwrap();
        assert_eq!(c.flags, ["-fno-a", "-fno-b"]);
        assert!(enumerate_optflags(&tc, OptLevel::O3).is_err());
        assert!(enumerate_optflags(&tc, OptLevel::O0).unwrap().flags.is_empty());
    }
}
