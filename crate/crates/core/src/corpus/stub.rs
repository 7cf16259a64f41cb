pub const DEFAULT_ARITY: usize = 8;
pub const DEFAULT_CALLEE: &str = "dbgc_opaque_sink";

/// C translation unit defining the opaque callee. It prints every parameter.
pub fn emit_stub_module(arity: usize, callee: &str) -> String {
    let arity = arity.max(1);
    let params: Vec<String> = (0..arity).map(|i| format!("int p{i}")).collect();
    let fmt = vec!["%d"; arity].join(" ");
    let args: Vec<String> = (0..arity).map(|i| format!("p{i}")).collect();
    format!(
        "#include <stdio.h>\n\nvoid {callee}({}) {{\n  printf(\"{fmt}\\n\", {});\n}}\n",
        params.join(", "),
        args.join(", ")
    )
}

/// Prototype matching [`emit_stub_module`].
pub(crate) fn prototype(arity: usize, callee: &str) -> String {
    format!("extern void {callee}({});", vec!["int"; arity.max(1)].join(", "))
}
