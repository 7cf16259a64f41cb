use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use super::{asm_hash, normalize_asm, BuildConfig, BuildError, BuiltArtifact, OptLevel, ToolchainSpec};
use crate::corpus::TestProgram;
use crate::process;

#[derive(Debug, Clone)]
pub struct CompileOptions {
    pub out_dir: PathBuf,
    pub timeout: Duration,
    /// Prebuilt stub object, linked when the config asks for it.
    pub stub_object: Option<PathBuf>,
    pub include_dirs: Vec<PathBuf>,
}

impl CompileOptions {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        CompileOptions {
            out_dir: out_dir.into(),
            timeout: Duration::from_secs(60),
            stub_object: None,
            include_dirs: Vec::new(),
        }
    }
}

struct Step<'a> {
    log: &'a mut String,
    deadline: Instant,
    timeout: Duration,
    cwd: &'a Path,
}

impl Step<'_> {
    fn run(&mut self, cmd: &mut Command) -> Result<process::Captured, BuildError> {
        cmd.current_dir(self.cwd);
        self.log.push_str("$ ");
        self.log.push_str(&process::render(cmd));
        self.log.push('\n');
        let left = self.deadline.saturating_duration_since(Instant::now());
        if left.is_zero() {
            return Err(BuildError::CompileTimeout(self.timeout));
        }
        let out = process::run(cmd, left)?;
        self.log.push_str(&out.stdout);
        self.log.push_str(&out.stderr);
        if out.timed_out {
            return Err(BuildError::CompileTimeout(self.timeout));
        }
        Ok(out)
    }
}

/// Compile to assembly, assemble, and link; the build log records every command line.
pub fn compile(
    program: &TestProgram,
    toolchain: &ToolchainSpec,
    config: &BuildConfig,
    opts: &CompileOptions,
) -> Result<BuiltArtifact, BuildError> {
    config.validate()?;
    let dir = &opts.out_dir;
    std::fs::create_dir_all(dir)?;
    let src_name = program.file_name();
    std::fs::write(dir.join(&src_name), &program.source_text)?;
    let mut log = String::new();
    let mut step = Step {
        log: &mut log,
        deadline: Instant::now() + opts.timeout,
        timeout: opts.timeout,
        cwd: dir,
    };

    let mut cc = Command::new(&toolchain.compiler_path);
    cc.args(config.flag_line());
    for inc in &opts.include_dirs {
        cc.arg("-I").arg(inc);
    }
    cc.args(["-S", &src_name, "-o", "asm.s"]);
    let out = step.run(&mut cc)?;
    if !out.success() {
        return Err(BuildError::CompileFailed { log });
    }

    let mut as_cmd = Command::new(&toolchain.compiler_path);
    as_cmd.args(["-c", "asm.s", "-o", "prog.o"]);
    let out = step.run(&mut as_cmd)?;
    if !out.success() {
        return Err(BuildError::CompileFailed { log });
    }

    let mut ld = Command::new(&toolchain.compiler_path);
    ld.arg("prog.o");
    if config.link_stub {
        match &opts.stub_object {
            Some(stub) => {
                ld.arg(stub);
            }
            None => {
                log.push_str("no stub object configured\n");
                return Err(BuildError::LinkFailed { log });
            }
        }
    }
    ld.args(["-o", "a.out"]);
    let out = step.run(&mut ld)?;
    if !out.success() {
        return Err(BuildError::LinkFailed { log });
    }

    let asm = std::fs::read_to_string(dir.join("asm.s"))?;
    Ok(BuiltArtifact {
        executable_path: dir.join("a.out"),
        build_log: log,
        exit_status: 0,
        asm_hash: asm_hash(&normalize_asm(&asm)),
        program_id: program.id.clone(),
        toolchain_id: toolchain.id.clone(),
        config: config.clone(),
        requested_level: None,
    })
}

/// Normalized assembly for `program` under `config`.
pub fn extract_assembly(
    program: &TestProgram,
    toolchain: &ToolchainSpec,
    config: &BuildConfig,
    timeout: Duration,
) -> Result<String, BuildError> {
    let dir = tempfile::tempdir()?;
    let src = dir.path().join(program.file_name());
    std::fs::write(&src, &program.source_text)?;
    let mut cmd = Command::new(&toolchain.compiler_path);
    cmd.args(&config.extra_flags)
        .arg(config.opt_level.flag())
        .args(&config.debug_flags)
        .arg("-S")
        .arg(&src)
        .arg("-o")
        .arg(dir.path().join("out.s"));
    let out = process::run(&mut cmd, timeout)?;
    if out.timed_out {
        return Err(BuildError::CompileTimeout(timeout));
    }
    if !out.success() {
        return Err(BuildError::CompileFailed {
            log: format!("$ {}\n{}", process::render(&cmd), out.stderr),
        });
    }
    Ok(normalize_asm(&std::fs::read_to_string(dir.path().join("out.s"))?))
}

/// Build the opaque stub once with optimizations off.
pub fn build_stub(
    toolchain: &ToolchainSpec,
    stub_source: &str,
    dir: &Path,
) -> Result<PathBuf, BuildError> {
    std::fs::create_dir_all(dir)?;
    let src = dir.join("stub.c");
    let obj = dir.join("stub.o");
    crate::store::write_atomic(&src, stub_source.as_bytes())?;
    let tmp = dir.join(format!("stub.{}.o", std::process::id()));
    let mut cmd = Command::new(&toolchain.compiler_path);
    cmd.args(["-O0", "-c"]).arg(&src).arg("-o").arg(&tmp);
    let out = process::run(&mut cmd, Duration::from_secs(60))?;
    if !out.success() {
        return Err(BuildError::CompileFailed { log: out.stderr });
    }
    std::fs::rename(&tmp, &obj)?;
    Ok(obj)
}

const ALIAS_PROBE: &str = "volatile int g;\nint a[16];\n\
static int f(int x) { int s = 0; for (int i = 0; i < x; i++) s += a[i] * i; return s; }\n\
int main(void) { for (int j = 0; j < 16; j++) a[j] = j ^ g; g = f(12); return 0; }\n";

/// Whether `-Og` and `-O1` produce identical code for a probe program.
pub(crate) fn probe_og_alias(toolchain: &ToolchainSpec) -> Result<bool, BuildError> {
    let p = TestProgram::new(ALIAS_PROBE.into(), PathBuf::from("probe.c"));
    let t = Duration::from_secs(60);
    let og = extract_assembly(&p, toolchain, &BuildConfig::new(OptLevel::Og), t)?;
    let o1 = extract_assembly(&p, toolchain, &BuildConfig::new(OptLevel::O1), t)?;
    Ok(og == o1)
}
