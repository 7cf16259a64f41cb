//! A wrapper "compiler" with a planted culprit and a tracer that replays its verdict.
//!
//! The compiler writes `LOSS <line>` or `KEEP` as its assembly, where `<line>` is
//! the line of the `opaque(` call. The plant comes from a `/* plant: ... */`
//! comment in the source, else from `plant.txt` next to the compiler:
//!   flags F...                 loss unless one of the flags F is given
//!   never                      no loss
//!   bisect AT TOTAL [LO HI]    TOTAL logged passes, loss from pass AT on,
//!                              hidden again for limits in LO..=HI

use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use dbgcomplete::buildmatrix::{BuiltArtifact, Family, ToolchainSpec};
use dbgcomplete::dbgtrace::{
    AvailabilityState, DebugTrace, LineRecord, SteppableLineSet, TraceError, TraceExit, Tracer,
};

pub const FAKE_CC: &str = r#"#!/bin/sh
here=$(dirname "$0")
mode=link; out=a.out; flags=" "; limit=-1; src=
while [ $# -gt 0 ]; do
  case "$1" in
    -S) mode=asm ;;
    -c) mode=obj ;;
    -o) shift; out="$1" ;;
    -opt-bisect-limit=*) limit=${1#-opt-bisect-limit=} ;;
    -f*) flags="$flags$1 " ;;
    *.c) src="$1" ;;
  esac
  shift
done
case "$mode" in
  asm)
    if grep -q SYNTAX_ERROR "$src"; then echo "$src:1:1: error: expected ';'" >&2; exit 1; fi
    plant=$(sed -n 's|.*/\* plant: \(.*\) \*/.*|\1|p' "$src" | head -n 1)
    [ -n "$plant" ] || plant=$(cat "$here/plant.txt")
    set -- $plant
    loss=1
    case "$1" in
      flags)
        shift
        for f in "$@"; do
          case "$flags" in *" $f "*) loss=0 ;; esac
        done ;;
      never) loss=0 ;;
      bisect)
        at=$2; total=$3; lo=$4; hi=$5
        i=1
        while [ $i -le $total ]; do
          if [ $limit -lt 0 ] || [ $i -le $limit ]; then
            echo "BISECT: running pass ($i) Pass$i on main" >&2
          else
            echo "BISECT: NOT running pass ($i) Pass$i on main" >&2
          fi
          i=$((i+1))
        done
        if [ $limit -ge 0 ] && [ $limit -lt $at ]; then loss=0; fi
        if [ -n "$lo" ] && [ $limit -ge $lo ] && [ $limit -le $hi ]; then loss=0; fi ;;
    esac
    line=$(grep -n 'opaque(' "$src" | grep -v void | head -n 1 | cut -d: -f1)
    if [ $loss = 1 ]; then echo "LOSS $line" > "$out"; else echo KEEP > "$out"; fi ;;
  obj) cp asm.s "$out" ;;
  link) cp prog.o "$out" ;;
esac
"#;

/// Write the fake compiler and a default plant into `dir`.
pub fn install(dir: &Path, family: Family, plant: &str) -> ToolchainSpec {
    let cc = dir.join("cc");
    std::fs::write(&cc, FAKE_CC).unwrap();
    std::fs::set_permissions(&cc, std::fs::Permissions::from_mode(0o755)).unwrap();
    std::fs::write(dir.join("plant.txt"), plant).unwrap();
    ToolchainSpec {
        id: format!("fake-{family}"),
        family,
        compiler_path: cc,
        version_string: "fake 1.0".into(),
        debugger_path: PathBuf::from("replay"),
        alt_debugger_paths: vec![],
        flag_catalog_path: None,
        og_is_o1: false,
    }
}

/// Every line of the source copied next to the executable is steppable.
pub fn lines(exe: &Path, file: &str) -> Result<SteppableLineSet, TraceError> {
    let text = std::fs::read_to_string(exe.with_file_name(file))?;
    let mut set = SteppableLineSet::default();
    for n in 1..=text.lines().count() as u32 {
        set.lines.insert((file.to_string(), n));
    }
    Ok(set)
}

pub struct ReplayTracer;

impl Tracer for ReplayTracer {
    fn id(&self) -> String {
        "replay".into()
    }

    fn collect(
        &self,
        artifact: &BuiltArtifact,
        lines: &SteppableLineSet,
        _timeout: Duration,
    ) -> Result<DebugTrace, TraceError> {
        let body = std::fs::read_to_string(&artifact.executable_path)?;
        let lost: Option<u32> = body.strip_prefix("LOSS ").and_then(|l| l.trim().parse().ok());
        let mut trace = DebugTrace::new(artifact, &self.id());
        trace.exit_status = TraceExit::RanToCompletion;
        for (file, line) in &lines.lines {
            let state = if Some(*line) == lost {
                AvailabilityState::VisibleOptimizedOut
            } else {
                AvailabilityState::available("1")
            };
            trace.push_first_hit(LineRecord {
                file: file.clone(),
                line: *line,
                stop_pc: 0x401000 + *line as u64,
                frame_function: "main".into(),
                observations: [("x".to_string(), state)].into_iter().collect(),
            });
        }
        Ok(trace)
    }
}
