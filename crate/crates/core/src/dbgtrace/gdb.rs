use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use super::mi::{parse_record, MiRecord, MiValue};
use super::normalize::normalize_value;
use super::{DebugTrace, LineRecord, SteppableLineSet, TraceError, TraceExit, Tracer};
use crate::buildmatrix::BuiltArtifact;
use crate::{elfdwarf, process};

/// gdb driven over its machine interface.
pub struct GdbTracer {
    path: PathBuf,
    version: OnceLock<String>,
}

impl GdbTracer {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        GdbTracer {
            path: path.into(),
            version: OnceLock::new(),
        }
    }
}

enum Halt {
    Timeout,
    Eof(String),
    Setup(String),
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    rx: Receiver<String>,
    deadline: Instant,
    pending: VecDeque<MiRecord>,
}

impl Session {
    fn start(path: &Path, exe: &Path, deadline: Instant) -> Result<Self, TraceError> {
        let mut cmd = Command::new(path);
        cmd.args(["--interpreter=mi2", "-nx", "-q"])
            .arg(exe)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null());
        let mut child = process::spawn(&mut cmd)
            .map_err(|e| TraceError::DebuggerMissing(format!("{}: {e}", path.display())))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            rx,
            deadline,
            pending: VecDeque::new(),
        })
    }

    fn read(&mut self) -> Result<MiRecord, Halt> {
        let left = self.deadline.saturating_duration_since(Instant::now());
        match self.rx.recv_timeout(left) {
            Ok(line) => Ok(parse_record(&line)),
            Err(RecvTimeoutError::Timeout) => Err(Halt::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(Halt::Eof("gdb closed its output".into())),
        }
    }

    /// Send one command and wait for its result record, collecting console output.
    fn command(&mut self, cmd: &str) -> Result<(String, MiValue, String), Halt> {
        writeln!(self.stdin, "{cmd}").map_err(|e| Halt::Eof(e.to_string()))?;
        self.stdin.flush().map_err(|e| Halt::Eof(e.to_string()))?;
        let mut console = String::new();
        loop {
            match self.read()? {
                MiRecord::Result { class, body } => return Ok((class, body, console)),
                MiRecord::Stream { kind: '~', text } => console.push_str(&text),
                r @ MiRecord::Async { kind: '*', .. } => self.pending.push_back(r),
                _ => {}
            }
        }
    }

    fn console(&mut self, cmd: &str) -> Result<String, Halt> {
        let escaped = cmd.replace('\\', "\\\\").replace('"', "\\\"");
        let (_, _, text) = self.command(&format!("-interpreter-exec console \"{escaped}\""))?;
        Ok(text)
    }

    fn wait_stopped(&mut self) -> Result<MiValue, Halt> {
        loop {
            let rec = match self.pending.pop_front() {
                Some(r) => r,
                None => self.read()?,
            };
            if let MiRecord::Async { kind: '*', class, body } = rec {
                if class == "stopped" {
                    return Ok(body);
                }
            }
        }
    }

    fn finish(mut self) {
        let _ = writeln!(self.stdin, "-gdb-exit");
        let _ = self.stdin.flush();
        let end = Instant::now() + Duration::from_secs(2);
        while Instant::now() < end {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            std::thread::sleep(Duration::from_millis(20));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Parse `info args` / `info locals` console text into (name, raw value) pairs, first binding wins.
pub fn parse_console_vars(text: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = Vec::new();
    let mut current: Option<(String, String)> = None;
    for line in text.lines() {
        let is_binding = line
            .split_once(" = ")
            .filter(|(n, _)| {
                !n.is_empty()
                    && n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
                    && !n.starts_with(|c: char| c.is_ascii_digit())
            });
        match is_binding {
            Some((name, value)) => {
                if let Some(done) = current.take() {
                    out.push(done);
                }
                current = Some((name.to_string(), value.to_string()));
            }
            None if matches!(line.trim(), "No locals." | "No arguments." | "No symbol table info available.") => {
                if let Some(done) = current.take() {
                    out.push(done);
                }
            }
            None => {
                if let Some((_, v)) = current.as_mut() {
                    v.push(' ');
                    v.push_str(line.trim());
                }
            }
        }
    }
    if let Some(done) = current {
        out.push(done);
    }
    let mut seen = std::collections::HashSet::new();
    out.retain(|(n, _)| seen.insert(n.clone()));
    out
}

fn base_name(p: &str) -> String {
    Path::new(p)
        .file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.to_string())
}

fn parse_addr(s: &str) -> u64 {
    u64::from_str_radix(s.trim_start_matches("0x"), 16).unwrap_or(0)
}

impl Tracer for GdbTracer {
    fn id(&self) -> String {
        self.version
            .get_or_init(|| {
                let mut cmd = Command::new(&self.path);
                cmd.arg("--version");
                process::run(&mut cmd, Duration::from_secs(10))
                    .ok()
                    .and_then(|o| o.stdout.lines().next().map(|l| l.trim().to_string()))
                    .unwrap_or_else(|| "gdb".into())
            })
            .clone()
    }

    fn collect(
        &self,
        artifact: &BuiltArtifact,
        lines: &SteppableLineSet,
        timeout: Duration,
    ) -> Result<DebugTrace, TraceError> {
        let exe = &artifact.executable_path;
        let mut trace = DebugTrace::new(artifact, &self.id());
        let deadline = Instant::now() + timeout;
        let mut s = Session::start(&self.path, exe, deadline)?;
        let result = drive(&mut s, exe, lines, &mut trace);
        s.finish();
        match result {
            Ok(()) => Ok(trace),
            Err(Halt::Timeout) => {
                trace.exit_status = TraceExit::Timeout;
                Ok(trace)
            }
            Err(Halt::Eof(msg)) => Err(TraceError::DebuggerCrashed(msg)),
            Err(Halt::Setup(msg)) => Err(TraceError::BreakpointSetupFailed(msg)),
        }
    }
}

fn drive(
    s: &mut Session,
    exe: &Path,
    lines: &SteppableLineSet,
    trace: &mut DebugTrace,
) -> Result<(), Halt> {
    for setup in [
        "-gdb-set confirm off",
        "-gdb-set pagination off",
        "-gdb-set width 0",
        "-gdb-set disable-randomization on",
        "-inferior-tty-set /dev/null",
    ] {
        s.command(setup)?;
    }
    let mut bkpts: HashMap<String, (String, u32)> = HashMap::new();
    let mut failures = Vec::new();
    for (file, line) in &lines.lines {
        let (class, body, _) = s.command(&format!("-break-insert -t {file}:{line}"))?;
        match body.get("bkpt").and_then(|b| b.str_at("number")) {
            Some(n) if class == "done" => {
                bkpts.insert(n.to_string(), (file.clone(), *line));
            }
            _ => failures.push(format!("{file}:{line}: {}", body.str_at("msg").unwrap_or(&class))),
        }
    }
    if bkpts.is_empty() && !lines.lines.is_empty() {
        return Err(Halt::Setup(failures.join("; ")));
    }
    if lines.lines.is_empty() {
        return Ok(());
    }
    let (class, body, _) = s.command("-exec-run")?;
    if class == "error" {
        return Err(Halt::Setup(format!(
            "cannot run inferior: {}",
            body.str_at("msg").unwrap_or("")
        )));
    }
    let mut bias_known = false;
    loop {
        let stop = s.wait_stopped()?;
        match stop.str_at("reason").unwrap_or("") {
            "breakpoint-hit" => {
                let frame = stop.get("frame").cloned().unwrap_or(MiValue::Tuple(vec![]));
                let fallback = stop
                    .str_at("bkptno")
                    .and_then(|n| bkpts.get(n))
                    .cloned();
                let file = frame
                    .str_at("file")
                    .map(base_name)
                    .or_else(|| fallback.as_ref().map(|f| f.0.clone()))
                    .unwrap_or_default();
                let line = frame
                    .str_at("line")
                    .and_then(|l| l.parse().ok())
                    .or_else(|| fallback.as_ref().map(|f| f.1))
                    .unwrap_or(0);
                let pc = frame.str_at("addr").map(parse_addr).unwrap_or(0);
                if !bias_known {
                    bias_known = true;
                    let (_, v, _) = s.command("-data-evaluate-expression \"(long)&main\"")?;
                    let runtime = v.str_at("value").and_then(|x| x.parse::<i64>().ok());
                    if let (Some(rt), Some(st)) = (runtime, elfdwarf::symbol_address(exe, "main")) {
                        trace.load_bias = (rt as u64).wrapping_sub(st);
                    }
                }
                if lines.contains(&file, line) && trace.record_at(line).is_none() {
                    let mut text = s.console("info args")?;
                    text.push_str(&s.console("info locals")?);
                    let observations: BTreeMap<_, _> = parse_console_vars(&text)
                        .into_iter()
                        .map(|(n, v)| (n, normalize_value(&v)))
                        .collect();
                    trace.push_first_hit(LineRecord {
                        file,
                        line,
                        stop_pc: pc,
                        frame_function: frame.str_at("func").unwrap_or("").to_string(),
                        observations,
                    });
                }
            }
            "exited-normally" | "exited" => {
                trace.exit_status = TraceExit::RanToCompletion;
                return Ok(());
            }
            "exited-signalled" | "signal-received" => {
                trace.exit_status = TraceExit::Crashed;
                return Ok(());
            }
            _ => {}
        }
        let (class, body, _) = s.command("-exec-continue")?;
        if class == "error" {
            return Err(Halt::Eof(body.str_at("msg").unwrap_or("continue failed").to_string()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn console_vars() {
        let text = "i = 0\nj = <optimized out>\nk = 1\nNo arguments.\n";
        let v = parse_console_vars(text);
        assert_eq!(v.len(), 3);
        assert_eq!(v[1], ("j".to_string(), "<optimized out>".to_string()));
        assert_eq!(v[2], ("k".to_string(), "1".to_string()));
    }

    #[test]
    fn empty_section_marker_ends_a_value() {
        let v = parse_console_vars("d = <optimized out>\nNo locals.\n");
        assert_eq!(v, vec![("d".to_string(), "<optimized out>".to_string())]);
    }

    #[test]
    fn innermost_binding_wins_and_continuations_join() {
        let text = "x = 2\ns = {f0 = 1,\n  f1 = 2}\nx = 1\n";
        let v = parse_console_vars(text);
        assert_eq!(v, vec![
            ("x".to_string(), "2".to_string()),
            ("s".to_string(), "{f0 = 1, f1 = 2}".to_string()),
        ]);
    }
}
