//! Parser for the C subset emitted by random program generators.

pub mod ast;
pub mod lexer;
mod parser;

pub use ast::*;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: u32,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: u32, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            msg: msg.into(),
        }
    }
}

pub fn parse(src: &str) -> Result<Program, ParseError> {
    parser::parse_program(src)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LISTING: &str = "volatile int a;
int b[10][2];
int main() {
  int i = 0, j, k;
  for (; i < 10; i++) {
    j = k = 0;
    for (; k < 1; k++)
      a = b[i][(j)*k];
  }
}
";

    #[test]
    fn parses_nested_loops() {
        let p = parse(LISTING).unwrap();
        assert_eq!(p.globals.len(), 2);
        assert!(p.globals[0].ty.volatile);
        assert_eq!(p.globals[1].ty.array_dims, 2);
        let main = p.function("main").unwrap();
        assert_eq!(main.body.close_line, 10);
        match &main.body.stmts[0].kind {
            StmtKind::Decl(d) => {
                let names: Vec<_> = d.iter().map(|v| v.name.as_str()).collect();
                assert_eq!(names, ["i", "j", "k"]);
            }
            other => panic!("{other:?}"),
        }
        let f = &main.body.stmts[1];
        assert!(f.is_loop());
        assert_eq!((f.line, f.end_line), (5, 9));
    }

    #[test]
    fn typedefs_structs_and_casts() {
        let src = "typedef unsigned char uc;
struct S0 { int f0; uc f1; };
static struct S0 g = {1, 2};
static int * volatile p;
int f(uc x, int y[]) { return (int)(uc)x + y[0] + sizeof(struct S0) + g.f0; }
";
        let p = parse(src).unwrap();
        assert_eq!(p.globals[0].ty.base, "struct S0");
        assert!(p.globals[1].ty.volatile && p.globals[1].ty.pointers == 1);
        let f = p.function("f").unwrap();
        assert_eq!(f.params[0].ty.base, "uc");
        assert!(f.params[1].ty.is_pointer());
    }

    #[test]
    fn labels_and_goto() {
        let src = "char a;\nint main() {\n  int *v1 = 0;\nf:  if (a)\n    goto f;\n  return 0;\n}\n";
        let p = parse(src).unwrap();
        let body = &p.function("main").unwrap().body;
        assert!(matches!(body.stmts[1].kind, StmtKind::Label(..)));
        assert_eq!(body.stmts[1].line, 4);
    }

    #[test]
    fn rejects_function_pointers() {
        assert!(parse("int (*fp)(int);").is_err());
    }
}
