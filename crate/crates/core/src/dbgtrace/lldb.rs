use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::Duration;

use regex::Regex;

use super::normalize::normalize_value;
use super::{DebugTrace, LineRecord, SteppableLineSet, TraceError, TraceExit, Tracer};
use crate::buildmatrix::BuiltArtifact;
use crate::process;

/// lldb driven through a generated batch script.
pub struct LldbTracer {
    path: PathBuf,
    version: OnceLock<String>,
}

impl LldbTracer {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        LldbTracer {
            path: path.into(),
            version: OnceLock::new(),
        }
    }
}

/// Batch script placing an auto-continuing one-shot breakpoint per line.
pub fn lldb_script(exe: &Path, lines: &SteppableLineSet) -> String {
    let mut s = String::from("settings set auto-confirm true\n");
    s.push_str(&format!("target create \"{}\"\n", exe.display()));
    let name = exe
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    s.push_str(&format!(
        "breakpoint set -n main -o true -G true -C \"image list -o -f {name}\"\n"
    ));
    for (file, line) in &lines.lines {
        s.push_str(&format!(
            "breakpoint set -o true -G true -f {file} -l {line} -C \"frame info\" -C \"frame variable\"\n"
        ));
    }
    s.push_str("process launch -o /dev/null -e /dev/null\n");
    s
}

pub struct LldbParse {
    pub records: Vec<LineRecord>,
    pub exit: TraceExit,
    pub load_bias: u64,
}

/// Parse the transcript of [`lldb_script`].
pub fn parse_lldb_output(text: &str) -> LldbParse {
    let frame_re =
        Regex::new(r"frame #0: (0x[0-9a-fA-F]+) [^`]*`([A-Za-z_][\w.]*)(?: \+ \d+)?(?: \[inlined\])? at ([^:\s]+):(\d+)").unwrap();
    let var_re = Regex::new(r"^\((.+?)\) ([A-Za-z_]\w*) = (.*)$").unwrap();
    let image_re = Regex::new(r"^\[\s*0\]\s+(0x[0-9a-fA-F]+)\s").unwrap();
    let mut records: Vec<LineRecord> = Vec::new();
    let mut current: Option<LineRecord> = None;
    let mut last_var: Option<String> = None;
    let mut exit = TraceExit::Crashed;
    let mut load_bias = 0;
    let flush = |cur: &mut Option<LineRecord>, out: &mut Vec<LineRecord>| {
        if let Some(r) = cur.take() {
            if !out.iter().any(|o| o.file == r.file && o.line == r.line) {
                out.push(r);
            }
        }
    };
    for line in text.lines() {
        let t = line.trim_end();
        if let Some(c) = frame_re.captures(t) {
            flush(&mut current, &mut records);
            last_var = None;
            let file = Path::new(&c[3])
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or_default();
            current = Some(LineRecord {
                file,
                line: c[4].parse().unwrap_or(0),
                stop_pc: u64::from_str_radix(c[1].trim_start_matches("0x"), 16).unwrap_or(0),
                frame_function: c[2].to_string(),
                observations: BTreeMap::new(),
            });
            continue;
        }
        if let Some(c) = image_re.captures(t.trim_start()) {
            load_bias = u64::from_str_radix(c[1].trim_start_matches("0x"), 16).unwrap_or(0);
            continue;
        }
        if t.contains("exited with status =") {
            exit = TraceExit::RanToCompletion;
            continue;
        }
        if t.starts_with("(lldb)") {
            last_var = None;
            continue;
        }
        if let Some(rec) = current.as_mut() {
            if let Some(c) = var_re.captures(t) {
                let name = c[2].to_string();
                if !rec.observations.contains_key(&name) {
                    rec.observations.insert(name.clone(), normalize_value(&c[3]));
                    last_var = Some(name);
                } else {
                    last_var = None;
                }
            } else if let Some(v) = &last_var {
                // continuation of a multi-line aggregate rendering
                if let Some(super::AvailabilityState::AvailableWithValue { value }) =
                    rec.observations.get_mut(v)
                {
                    value.push(' ');
                    value.push_str(t.trim());
                }
            }
        }
    }
    flush(&mut current, &mut records);
    LldbParse {
        records,
        exit,
        load_bias,
    }
}

impl Tracer for LldbTracer {
    fn id(&self) -> String {
        self.version
            .get_or_init(|| {
                let mut cmd = Command::new(&self.path);
                cmd.arg("--version");
                process::run(&mut cmd, Duration::from_secs(10))
                    .ok()
                    .and_then(|o| o.stdout.lines().next().map(|l| l.trim().to_string()))
                    .unwrap_or_else(|| "lldb".into())
            })
            .clone()
    }

    fn collect(
        &self,
        artifact: &BuiltArtifact,
        lines: &SteppableLineSet,
        timeout: Duration,
    ) -> Result<DebugTrace, TraceError> {
        let dir = tempfile::tempdir()?;
        let script = dir.path().join("trace.lldb");
        std::fs::write(&script, lldb_script(&artifact.executable_path, lines))?;
        let mut cmd = Command::new(&self.path);
        cmd.args(["--batch", "--no-lldbinit", "-s"]).arg(&script);
        let out = process::run(&mut cmd, timeout)
            .map_err(|e| TraceError::DebuggerMissing(format!("{}: {e}", self.path.display())))?;
        let parsed = parse_lldb_output(&out.stdout);
        let mut trace = DebugTrace::new(artifact, &self.id());
        trace.load_bias = parsed.load_bias;
        for r in parsed.records {
            if lines.contains(&r.file, r.line) {
                trace.push_first_hit(r);
            }
        }
        trace.exit_status = if out.timed_out {
            TraceExit::Timeout
        } else {
            parsed.exit
        };
        if !out.timed_out && out.code.is_none() {
            return Err(TraceError::DebuggerCrashed(out.stderr));
        }
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANNED: &str = "(lldb) target create \"a.out\"
Current executable set to '/tmp/a.out' (x86_64).
(lldb) image list -o -f a.out
[  0] 0x0000555555554000 /tmp/a.out
(lldb) frame info
frame #0: 0x0000555555555131 a.out`main at t.c:8:15
(lldb) frame variable
(int) i = 0
(int) j = <variable not available>

(int) k = <no location, value may have been optimized out>

(int *) p = 0x00007fffffffe3bc
(S0) s = {
  f0 = 1
  f1 = 2
}
(lldb) frame info
frame #0: 0x0000555555555150 a.out`b + 4 [inlined] at t.c:9:3
(lldb) frame variable
(short) v1 = 0
Process 4242 exited with status = 0 (0x00000000)
";

    #[test]
    fn parses_canned_transcript() {
        let p = parse_lldb_output(CANNED);
        assert_eq!(p.exit, TraceExit::RanToCompletion);
        assert_eq!(p.load_bias, 0x555555554000);
        assert_eq!(p.records.len(), 2);
        let r = &p.records[0];
        assert_eq!((r.file.as_str(), r.line, r.frame_function.as_str()), ("t.c", 8, "main"));
        assert_eq!(r.state("i"), super::super::AvailabilityState::available("0"));
        assert_eq!(r.state("j"), super::super::AvailabilityState::VisibleOptimizedOut);
        assert_eq!(r.state("k"), super::super::AvailabilityState::VisibleOptimizedOut);
        assert_eq!(r.state("p"), super::super::AvailabilityState::available("<addr>"));
        assert_eq!(r.state("s").value_text(), Some("{ f0 = 1 f1 = 2 }"));
        assert_eq!(p.records[1].frame_function, "b");
    }

    #[test]
    fn script_has_one_shot_breakpoints() {
        let lines = SteppableLineSet::only("t.c", 8);
        let s = lldb_script(Path::new("/tmp/a.out"), &lines);
        assert!(s.contains("breakpoint set -o true -G true -f t.c -l 8"));
        assert!(s.ends_with("process launch -o /dev/null -e /dev/null\n"));
    }
}
