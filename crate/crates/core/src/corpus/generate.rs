use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{CorpusError, GenerationRecipe, RetryNote, TestProgram};
use crate::process;

const BUILTIN_ASSORTMENTS: &str = include_str!("../../data/assortments.toml");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assortment {
    pub id: u16,
    pub options: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assortments {
    #[serde(rename = "assortment")]
    pub sets: Vec<Assortment>,
}

impl Assortments {
    pub fn builtin() -> Self {
        toml::from_str(BUILTIN_ASSORTMENTS).expect("bundled assortments parse")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn get(&self, id: u16) -> Option<&Assortment> {
        self.sets.iter().find(|s| s.id == id)
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Compiler used to reject generator output that does not build at `-O0`.
#[derive(Debug, Clone)]
pub struct O0Check {
    pub compiler: PathBuf,
    pub flags: Vec<String>,
}

impl O0Check {
    pub fn compiles(&self, source: &str) -> Result<(), String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let src = dir.path().join("check.c");
        std::fs::write(&src, source).map_err(|e| e.to_string())?;
        let mut cmd = Command::new(&self.compiler);
        cmd.args(["-O0", "-g", "-c"])
            .args(&self.flags)
            .arg(&src)
            .arg("-o")
            .arg(dir.path().join("check.o"));
        let out = process::run(&mut cmd, Duration::from_secs(60)).map_err(|e| e.to_string())?;
        if out.success() {
            Ok(())
        } else {
            Err(out.stderr)
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateOptions {
    pub out_dir: PathBuf,
    pub timeout: Duration,
    pub retry_budget: usize,
    pub o0_check: Option<O0Check>,
}

impl GenerateOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        GenerateOptions {
            out_dir: out_dir.into(),
            timeout: Duration::from_secs(30),
            retry_budget: 10,
            o0_check: None,
        }
    }
}

pub(crate) fn check_executable(path: &Path) -> Result<(), CorpusError> {
    use std::os::unix::fs::PermissionsExt;
    match std::fs::metadata(path) {
        Ok(m) if m.is_file() && m.permissions().mode() & 0o111 != 0 => Ok(()),
        _ => Err(CorpusError::ToolMissing(path.to_path_buf())),
    }
}

/// Run the generator as `<generator> --seed N <options...>` and capture the program from stdout.
pub fn generate_program(
    recipe: &GenerationRecipe,
    generator_path: &Path,
    opts: &GenerateOptions,
) -> Result<TestProgram, CorpusError> {
    check_executable(generator_path)?;
    let mut recipe = recipe.clone();
    recipe.retries.clear();
    let attempts = opts.retry_budget + 1;
    for attempt in 0..attempts {
        let seed = recipe.seed + attempt as u64;
        let mut cmd = Command::new(generator_path);
        cmd.arg("--seed").arg(seed.to_string());
        for opt in &recipe.generator_options {
            cmd.args(opt.split_whitespace());
        }
        let out = process::run(&mut cmd, opts.timeout)?;
        if out.timed_out {
            return Err(CorpusError::GeneratorFailed {
                seed,
                detail: "timeout".into(),
            });
        }
        if !out.success() {
            return Err(CorpusError::GeneratorFailed {
                seed,
                detail: format!("exit {:?}: {}", out.code, out.stderr.trim()),
            });
        }
        let lines = out.stdout.lines().count();
        if lines > recipe.max_source_lines {
            recipe.retries.push(RetryNote {
                seed,
                reason: format!("{lines} lines exceeds {}", recipe.max_source_lines),
            });
            continue;
        }
        if let Some(check) = &opts.o0_check {
            if let Err(log) = check.compiles(&out.stdout) {
                recipe.retries.push(RetryNote {
                    seed,
                    reason: format!("-O0 compile failed: {}", log.lines().next().unwrap_or("")),
                });
                continue;
            }
        }
        std::fs::create_dir_all(&opts.out_dir)?;
        let mut program = TestProgram::new(out.stdout, PathBuf::new());
        let path = opts.out_dir.join(format!("{}.c", program.id));
        crate::store::write_atomic(&path, program.source_text.as_bytes())?;
        program.source_path = path;
        recipe.final_seed = Some(seed);
        program.recipe = Some(recipe);
        return Ok(program);
    }
    Err(CorpusError::RetriesExhausted { attempts })
}
