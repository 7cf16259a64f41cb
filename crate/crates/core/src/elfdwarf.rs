//! Loading DWARF sections from ELF executables and objects.

use std::borrow::Cow;
use std::path::Path;
use std::rc::Rc;

use gimli::Reader as _;
use object::{Object, ObjectSection, ObjectSymbol};

pub type Reader = gimli::EndianRcSlice<gimli::RunTimeEndian>;

#[derive(Debug, thiserror::Error)]
pub enum DwarfLoadError {
    #[error("malformed DWARF in {path}: {detail}")]
    MalformedDwarf { path: String, detail: String },
    #[error("split DWARF is not supported ({0})")]
    SplitDwarf(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn malformed(path: &Path, detail: impl ToString) -> DwarfLoadError {
    DwarfLoadError::MalformedDwarf {
        path: path.display().to_string(),
        detail: detail.to_string(),
    }
}

/// Parse `path` and load every DWARF section; a file without `.debug_info` is malformed.
pub fn load(path: &Path) -> Result<gimli::Dwarf<Reader>, DwarfLoadError> {
    let data = std::fs::read(path)?;
    let file = object::File::parse(&*data).map_err(|e| malformed(path, e))?;
    if file.section_by_name(".debug_info").is_none() {
        return Err(malformed(path, "no .debug_info section"));
    }
    let endian = if file.is_little_endian() {
        gimli::RunTimeEndian::Little
    } else {
        gimli::RunTimeEndian::Big
    };
    let load_section = |id: gimli::SectionId| -> Result<Reader, gimli::Error> {
        let bytes: Cow<[u8]> = match file.section_by_name(id.name()) {
            Some(s) => s.uncompressed_data().unwrap_or(Cow::Borrowed(&[])),
            None => Cow::Borrowed(&[]),
        };
        Ok(gimli::EndianRcSlice::new(Rc::from(&*bytes), endian))
    };
    let dwarf = gimli::Dwarf::load(load_section).map_err(|e| malformed(path, e))?;
    let mut units = dwarf.units();
    while let Some(header) = units.next().map_err(|e| malformed(path, e))? {
        if matches!(header.type_(), gimli::UnitType::Skeleton(_) | gimli::UnitType::SplitCompilation(_)) {
            return Err(DwarfLoadError::SplitDwarf(path.display().to_string()));
        }
        let unit = dwarf.unit(header).map_err(|e| malformed(path, e))?;
        let mut entries = unit.entries();
        if let Some((_, root)) = entries.next_dfs().map_err(|e| malformed(path, e))? {
            if root.attr(gimli::DW_AT_dwo_name).ok().flatten().is_some()
                || root.attr(gimli::DW_AT_GNU_dwo_name).ok().flatten().is_some()
            {
                return Err(DwarfLoadError::SplitDwarf(path.display().to_string()));
            }
        }
    }
    Ok(dwarf)
}

/// Static address of a symbol in the file's symbol table.
pub fn symbol_address(path: &Path, name: &str) -> Option<u64> {
    let data = std::fs::read(path).ok()?;
    let file = object::File::parse(&*data).ok()?;
    file.symbols()
        .find(|s| s.name() == Ok(name))
        .map(|s| s.address())
}

/// Display string of an attribute value, resolving string-section references.
pub fn attr_string(
    dwarf: &gimli::Dwarf<Reader>,
    unit: &gimli::Unit<Reader>,
    value: gimli::AttributeValue<Reader>,
) -> Option<String> {
    dwarf
        .attr_string(unit, value)
        .ok()
        .and_then(|s| s.to_string_lossy().ok().map(|c| c.into_owned()))
}
