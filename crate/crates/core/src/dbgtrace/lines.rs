use std::collections::BTreeSet;
use std::path::Path;

use super::{SteppableLineSet, TraceError};
use crate::elfdwarf::{self, DwarfLoadError};

fn malformed(path: &Path, e: impl ToString) -> TraceError {
    TraceError::Dwarf(DwarfLoadError::MalformedDwarf {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Lines of `source_file` (matched by base name) that own at least one line-table address.
pub fn extract_steppable_lines(
    executable: &Path,
    source_file: &str,
) -> Result<SteppableLineSet, TraceError> {
    let dwarf = elfdwarf::load(executable)?;
    let mut lines = BTreeSet::new();
    let mut units = dwarf.units();
    while let Some(header) = units.next().map_err(|e| malformed(executable, e))? {
        let unit = dwarf.unit(header).map_err(|e| malformed(executable, e))?;
        let Some(program) = unit.line_program.clone() else {
            continue;
        };
        let mut rows = program.rows();
        while let Some((header, row)) = rows.next_row().map_err(|e| malformed(executable, e))? {
            if row.end_sequence() {
                continue;
            }
            let Some(line) = row.line() else { continue };
            let Some(file) = row.file(header) else { continue };
            let Some(name) = elfdwarf::attr_string(&dwarf, &unit, file.path_name()) else {
                continue;
            };
            let base = Path::new(&name)
                .file_name()
                .map(|f| f.to_string_lossy().into_owned())
                .unwrap_or(name);
            if base == source_file {
                lines.insert((base, line.get() as u32));
            }
        }
    }
    Ok(SteppableLineSet {
        lines,
        source: "LineTable".into(),
    })
}
