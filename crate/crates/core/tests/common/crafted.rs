//! Hand-assembled DWARF objects for DIE lookup tests.

use std::path::{Path, PathBuf};

use gimli::write::{
    Address, AttributeValue, DwarfUnit, EndianVec, Expression, Location, LocationList, Sections,
    UnitEntryId,
};

struct Builder {
    dwarf: DwarfUnit,
}

impl Builder {
    fn new() -> Self {
        let encoding = gimli::Encoding {
            format: gimli::Format::Dwarf32,
            version: 5,
            address_size: 8,
        };
        Builder { dwarf: DwarfUnit::new(encoding) }
    }

    fn add(&mut self, parent: UnitEntryId, tag: gimli::DwTag, name: Option<&str>) -> UnitEntryId {
        let id = self.dwarf.unit.add(parent, tag);
        if let Some(n) = name {
            self.set(id, gimli::DW_AT_name, AttributeValue::String(n.as_bytes().to_vec()));
        }
        id
    }

    fn set(&mut self, id: UnitEntryId, at: gimli::DwAt, v: AttributeValue) {
        self.dwarf.unit.get_mut(id).set(at, v);
    }

    fn pc_range(&mut self, id: UnitEntryId, lo: u64, hi: u64) {
        self.set(id, gimli::DW_AT_low_pc, AttributeValue::Address(Address::Constant(lo)));
        self.set(id, gimli::DW_AT_high_pc, AttributeValue::Udata(hi - lo));
    }

    fn exprloc(&mut self, id: UnitEntryId) {
        let mut e = Expression::new();
        e.op_fbreg(-20);
        self.set(id, gimli::DW_AT_location, AttributeValue::Exprloc(e));
    }

    fn loclist(&mut self, id: UnitEntryId, ranges: &[(u64, u64)]) {
        let list = LocationList(
            ranges
                .iter()
                .map(|&(lo, hi)| {
                    let mut e = Expression::new();
                    e.op_reg(gimli::Register(3));
                    Location::StartEnd {
                        begin: Address::Constant(lo),
                        end: Address::Constant(hi),
                        data: e,
                    }
                })
                .collect(),
        );
        let lid = self.dwarf.unit.locations.add(list);
        self.set(id, gimli::DW_AT_location, AttributeValue::LocationListRef(lid));
    }

    fn write(mut self, path: &Path) {
        let mut sections = Sections::new(EndianVec::new(gimli::LittleEndian));
        self.dwarf.write(&mut sections).unwrap();
        let mut obj = object::write::Object::new(
            object::BinaryFormat::Elf,
            object::Architecture::X86_64,
            object::Endianness::Little,
        );
        sections
            .for_each(|id, data| {
                if !data.slice().is_empty() {
                    let sid = obj.add_section(Vec::new(), id.name().as_bytes().to_vec(), object::SectionKind::Debug);
                    obj.append_section_data(sid, data.slice(), 1);
                }
                Ok::<(), gimli::Error>(())
            })
            .unwrap();
        std::fs::write(path, obj.write().unwrap()).unwrap();
    }
}

/// main [0x1000,0x1100) with assorted variables, an abstract `callee`
/// and its inlined copy inside `caller` [0x2000,0x2100).
pub fn crafted(dir: &Path) -> PathBuf {
    let mut b = Builder::new();
    let root = b.dwarf.unit.root();
    let main = b.add(root, gimli::DW_TAG_subprogram, Some("main"));
    b.pc_range(main, 0x1000, 0x1100);
    let v = b.add(main, gimli::DW_TAG_variable, Some("spilled"));
    b.exprloc(v);
    b.add(main, gimli::DW_TAG_variable, Some("hollow"));
    let v = b.add(main, gimli::DW_TAG_variable, Some("partial"));
    b.loclist(v, &[(0x1040, 0x1060)]);
    let v = b.add(main, gimli::DW_TAG_variable, Some("konst"));
    b.set(v, gimli::DW_AT_const_value, AttributeValue::Sdata(0));
    let v = b.add(main, gimli::DW_TAG_variable, Some("x"));
    b.loclist(v, &[(0x1000, 0x1010)]);
    let blk = b.add(main, gimli::DW_TAG_lexical_block, None);
    b.pc_range(blk, 0x1080, 0x10c0);
    let v = b.add(blk, gimli::DW_TAG_variable, Some("x"));
    b.exprloc(v);

    let callee = b.add(root, gimli::DW_TAG_subprogram, Some("callee"));
    b.set(callee, gimli::DW_AT_inline, AttributeValue::Inline(gimli::DW_INL_inlined));
    let a = b.add(callee, gimli::DW_TAG_formal_parameter, Some("a"));
    b.add(callee, gimli::DW_TAG_variable, Some("t"));

    let caller = b.add(root, gimli::DW_TAG_subprogram, Some("caller"));
    b.pc_range(caller, 0x2000, 0x2100);
    let inl = b.add(caller, gimli::DW_TAG_inlined_subroutine, None);
    b.set(inl, gimli::DW_AT_abstract_origin, AttributeValue::UnitRef(callee));
    b.pc_range(inl, 0x2010, 0x2040);
    let pa = b.add(inl, gimli::DW_TAG_formal_parameter, None);
    b.set(pa, gimli::DW_AT_abstract_origin, AttributeValue::UnitRef(a));
    b.exprloc(pa);

    let path = dir.join("crafted.o");
    b.write(&path);
    path
}

