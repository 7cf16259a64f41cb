#![allow(dead_code)]

pub mod crafted;
pub mod criteria;
pub mod fake;
pub mod harness;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use dbgcomplete::buildmatrix::{BuildConfig, OptLevel};
use dbgcomplete::dbgtrace::{AvailabilityState, DebugTrace, LineRecord, TraceExit};

pub fn fixture(name: &str) -> PathBuf {
    let here = Path::new(env!("CARGO_MANIFEST_DIR"));
    let own = here.join("tests/fixtures");
    let dir = if own.is_dir() { own } else { here.join("../core/tests/fixtures") };
    dir.join(name)
}

/// Parse `"LINE FRAME var=STATE ..."`.
pub fn record(spec: &str, file: &str) -> LineRecord {
    let mut parts = spec.split_whitespace();
    let line = parts.next().unwrap().parse().unwrap();
    let frame = parts.next().unwrap().to_string();
    let mut vars = BTreeMap::new();
    for p in parts {
        let (name, state) = p.split_once('=').unwrap();
        let state = match state {
            "opt" => AvailabilityState::VisibleOptimizedOut,
            "-" => AvailabilityState::NotVisible,
            v => AvailabilityState::available(v),
        };
        vars.insert(name.to_string(), state);
    }
    LineRecord {
        file: file.to_string(),
        line,
        stop_pc: 0x1000 + line as u64,
        frame_function: frame,
        observations: vars,
    }
}

pub fn trace(program_id: &str, level: OptLevel, records: Vec<LineRecord>) -> DebugTrace {
    DebugTrace {
        schema: 1,
        program_id: program_id.to_string(),
        toolchain_id: "gcc".into(),
        config: BuildConfig::new(level),
        debugger_id: "gdb".into(),
        exit_status: TraceExit::RanToCompletion,
        load_bias: 0,
        records,
    }
}

pub fn have(tool: &str) -> bool {
    std::process::Command::new("sh")
        .arg("-c")
        .arg(format!("command -v {tool}"))
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}
