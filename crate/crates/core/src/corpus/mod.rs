//! Test-program generation, undefined-behavior screening and opaque-call injection.

mod generate;
mod inject;
mod screen;
mod stub;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::csource::{self, Program, StmtKind};

pub use generate::{generate_program, Assortment, Assortments, GenerateOptions, O0Check};
pub use inject::{inject_opaque_call, InjectOptions};
pub use screen::{screen_undefined_behavior, ScreenTool, BLOCKING_WARNINGS};
pub use stub::{emit_stub_module, DEFAULT_ARITY, DEFAULT_CALLEE};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("generator failed for seed {seed}: {detail}")]
    GeneratorFailed { seed: u64, detail: String },
    #[error("generation retries exhausted after {attempts} attempts")]
    RetriesExhausted { attempts: usize },
    #[error("no statement boundary with an eligible in-scope local")]
    NoEligibleSite,
    #[error("injected program failed to compile at {attempts} sites: {last_log}")]
    PostInjectionCompileFailure { attempts: usize, last_log: String },
    #[error("program already carries an injected call")]
    AlreadyInjected,
    #[error("unsupported source: {0}")]
    Unsupported(#[from] csource::ParseError),
    #[error("unknown option set {0}")]
    UnknownOptionSet(u16),
    #[error("tool not executable: {0}")]
    ToolMissing(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryNote {
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecipe {
    pub seed: u64,
    pub option_set_id: u16,
    pub generator_options: Vec<String>,
    pub max_source_lines: usize,
    /// Seed that produced the accepted source.
    #[serde(default)]
    pub final_seed: Option<u64>,
    #[serde(default)]
    pub retries: Vec<RetryNote>,
}

impl GenerationRecipe {
    pub fn new(seed: u64, option_set_id: u16, assortments: &Assortments) -> Result<Self, CorpusError> {
        let set = assortments
            .get(option_set_id)
            .ok_or(CorpusError::UnknownOptionSet(option_set_id))?;
        Ok(GenerationRecipe {
            seed,
            option_set_id,
            generator_options: set.options.clone(),
            max_source_lines: 600,
            final_seed: None,
            retries: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionFacts {
    pub name: String,
    pub body_start: u32,
    pub body_end: u32,
    pub locals: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpaqueCallSite {
    pub line: u32,
    pub callee: String,
    pub argument_vars: Vec<String>,
    /// Function whose body received the call.
    pub function: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub tool: String,
    pub text: String,
    pub blocking: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScreenVerdict {
    pub clean: bool,
    pub findings: Vec<Finding>,
}

impl ScreenVerdict {
    pub fn from_findings(findings: Vec<Finding>) -> Self {
        ScreenVerdict {
            clean: !findings.iter().any(|f| f.blocking),
            findings,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestProgram {
    pub id: String,
    pub source_text: String,
    pub source_path: PathBuf,
    pub functions: Vec<FunctionFacts>,
    pub injected_call: Option<OpaqueCallSite>,
    pub recipe: Option<GenerationRecipe>,
    /// Id of the program this one was derived from by injection.
    #[serde(default)]
    pub parent_id: Option<String>,
}

pub fn is_executable(path: &std::path::Path) -> bool {
    generate::check_executable(path).is_ok()
}

pub fn content_id(source: &str) -> String {
    let digest = Sha256::digest(source.as_bytes());
    hex::encode(&digest[..8])
}

impl TestProgram {
    pub fn new(source_text: String, source_path: PathBuf) -> Self {
        let functions = csource::parse(&source_text)
            .map(|p| function_facts(&p))
            .unwrap_or_default();
        TestProgram {
            id: content_id(&source_text),
            source_text,
            source_path,
            functions,
            injected_call: None,
            recipe: None,
            parent_id: None,
        }
    }

    pub fn line_count(&self) -> usize {
        self.source_text.lines().count()
    }

    /// File name used for the source inside build directories.
    pub fn file_name(&self) -> String {
        self.source_path
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_else(|| "prog.c".into())
    }

    /// Map a line of this program to the line of the program it was derived from.
    pub fn original_line(&self, line: u32) -> u32 {
        match &self.injected_call {
            Some(c) if line > c.line => line - 1,
            _ => line,
        }
    }

    /// JSON sidecar `{id, recipe, injected_call, screen_verdict}`.
    pub fn sidecar(&self, verdict: Option<&ScreenVerdict>) -> serde_json::Value {
        serde_json::json!({
            "id": self.id,
            "recipe": self.recipe,
            "injected_call": self.injected_call,
            "screen_verdict": verdict,
        })
    }
}

fn function_facts(p: &Program) -> Vec<FunctionFacts> {
    fn collect(stmt: &csource::Stmt, out: &mut Vec<String>) {
        if let StmtKind::Decl(d) = &stmt.kind {
            out.extend(d.iter().map(|v| v.name.clone()));
        }
        for c in stmt.children() {
            collect(c, out);
        }
    }
    p.functions
        .iter()
        .map(|f| {
            let mut locals = Vec::new();
            for s in &f.body.stmts {
                collect(s, &mut locals);
            }
            FunctionFacts {
                name: f.name.clone(),
                body_start: f.body.open_line,
                body_end: f.body.close_line,
                locals,
            }
        })
        .collect()
}
