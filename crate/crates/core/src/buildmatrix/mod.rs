//! Compilation across the toolchain × optimization-level matrix.

mod asm;
mod compile;
mod optflags;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::process;

pub use asm::{asm_hash, normalize_asm};
pub use compile::{build_stub, compile, extract_assembly, CompileOptions};
pub use optflags::{enumerate_optflags, parse_optimizer_dump, FlagCatalog};

#[derive(Debug, thiserror::Error)]
pub enum BuildError {
    #[error("compile failed:\n{log}")]
    CompileFailed { log: String },
    #[error("compile timed out after {0:?}")]
    CompileTimeout(Duration),
    #[error("link failed:\n{log}")]
    LinkFailed { log: String },
    #[error("flag catalog unavailable for {0}")]
    CatalogUnavailable(String),
    #[error("invalid build config: {0}")]
    InvalidConfig(String),
    #[error("tool not found: {0}")]
    ToolMissing(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gcc,
    Clang,
}

impl FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gcc" => Ok(Family::Gcc),
            "clang" => Ok(Family::Clang),
            _ => Err(format!("unknown compiler family `{s}`")),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Gcc => "gcc",
            Family::Clang => "clang",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptLevel {
    O0,
    Og,
    O1,
    O2,
    O3,
    Os,
    Oz,
}

impl OptLevel {
    pub const ALL: [OptLevel; 7] = [
        OptLevel::O0,
        OptLevel::Og,
        OptLevel::O1,
        OptLevel::O2,
        OptLevel::O3,
        OptLevel::Os,
        OptLevel::Oz,
    ];

    pub fn flag(self) -> String {
        format!("-{self}")
    }
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for OptLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim_start_matches('-');
        OptLevel::ALL
            .iter()
            .copied()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| format!("unknown optimization level `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolchainSpec {
    /// Short label used in store paths and reports.
    pub id: String,
    pub family: Family,
    pub compiler_path: PathBuf,
    pub version_string: String,
    pub debugger_path: PathBuf,
    #[serde(default)]
    pub alt_debugger_paths: Vec<PathBuf>,
    #[serde(default)]
    pub flag_catalog_path: Option<PathBuf>,
    /// Set when the probed compiler emits identical code for `-Og` and `-O1`.
    #[serde(default)]
    pub og_is_o1: bool,
}

impl ToolchainSpec {
    /// Probe `compiler --version` and, for clang, whether `-Og` aliases `-O1`.
    pub fn probe(
        id: &str,
        family: Family,
        compiler_path: &Path,
        debugger_path: &Path,
    ) -> Result<Self, BuildError> {
        let version_string = probe_version(compiler_path)?;
        let mut spec = ToolchainSpec {
            id: id.to_string(),
            family,
            compiler_path: compiler_path.to_path_buf(),
            version_string,
            debugger_path: debugger_path.to_path_buf(),
            alt_debugger_paths: Vec::new(),
            flag_catalog_path: None,
            og_is_o1: false,
        };
        if family == Family::Clang {
            spec.og_is_o1 = compile::probe_og_alias(&spec)?;
        }
        Ok(spec)
    }

    /// Level actually built for `level`, following a detected alias.
    pub fn canonical_level(&self, level: OptLevel) -> OptLevel {
        if self.og_is_o1 && level == OptLevel::Og {
            OptLevel::O1
        } else {
            level
        }
    }
}

pub fn probe_version(compiler: &Path) -> Result<String, BuildError> {
    let mut cmd = Command::new(compiler);
    cmd.arg("--version");
    let out = process::run(&mut cmd, Duration::from_secs(30))
        .map_err(|_| BuildError::ToolMissing(compiler.to_path_buf()))?;
    if !out.success() {
        return Err(BuildError::ToolMissing(compiler.to_path_buf()));
    }
    Ok(out.stdout.lines().next().unwrap_or("").trim().to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BuildConfig {
    pub opt_level: OptLevel,
    #[serde(default)]
    pub extra_flags: Vec<String>,
    pub debug_flags: Vec<String>,
    pub link_stub: bool,
}

impl BuildConfig {
    pub fn new(opt_level: OptLevel) -> Self {
        BuildConfig {
            opt_level,
            extra_flags: Vec::new(),
            debug_flags: vec!["-g".into()],
            link_stub: false,
        }
    }

    pub fn with_flags(mut self, flags: impl IntoIterator<Item = String>) -> Self {
        self.extra_flags.extend(flags);
        self
    }

    pub fn with_stub(mut self, link_stub: bool) -> Self {
        self.link_stub = link_stub;
        self
    }

    pub fn validate(&self) -> Result<(), BuildError> {
        if !self.debug_flags.iter().any(|f| f == "-g") {
            return Err(BuildError::InvalidConfig("debug flags must include -g".into()));
        }
        if self.opt_level == OptLevel::O0
            && self
                .extra_flags
                .iter()
                .any(|f| f.starts_with("-fno-") || f.contains("opt-bisect-limit"))
        {
            return Err(BuildError::InvalidConfig(
                "O0 configs cannot carry optimization-disabling flags".into(),
            ));
        }
        Ok(())
    }

    /// Full compiler flag line, excluding inputs and outputs.
    pub fn flag_line(&self) -> Vec<String> {
        let mut v = vec![self.opt_level.flag()];
        v.extend(self.extra_flags.iter().cloned());
        v.extend(self.debug_flags.iter().cloned());
        v
    }

    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(canon.as_bytes())[..6])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuiltArtifact {
    pub executable_path: PathBuf,
    pub build_log: String,
    pub exit_status: i32,
    pub asm_hash: String,
    pub program_id: String,
    pub toolchain_id: String,
    pub config: BuildConfig,
    /// Level requested when it differs from the level built (alias).
    #[serde(default)]
    pub requested_level: Option<OptLevel>,
}
