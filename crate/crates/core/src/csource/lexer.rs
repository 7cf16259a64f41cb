use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Char(String),
    Punct(&'static str),
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
}

const PUNCTS: &[&str] = &[
    "<<=", ">>=", "...", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=",
    "-=", "*=", "/=", "%=", "&=", "^=", "|=", "{", "}", "[", "]", "(", ")", "<", ">", ";", ",",
    ":", "?", ".", "+", "-", "*", "/", "%", "&", "|", "^", "!", "~", "=",
];

/// Tokenize C source. Preprocessor directives and comments are dropped.
pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut at_line_start = true;
    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            at_line_start = true;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        if c == b'#' && at_line_start {
            // directive, honoring backslash continuations
            while i < bytes.len() && bytes[i] != b'\n' {
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
                    line += 1;
                    i += 2;
                    continue;
                }
                i += 1;
            }
            continue;
        }
        at_line_start = false;
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c == b'/' && i + 1 < bytes.len() && bytes[i + 1] == b'*' {
            i += 2;
            loop {
                if i + 1 >= bytes.len() {
                    return Err(ParseError::new(line, "unterminated comment"));
                }
                if bytes[i] == b'\n' {
                    line += 1;
                }
                if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                    i += 2;
                    break;
                }
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            toks.push(Token {
                tok: Tok::Ident(src[start..i].to_string()),
                line,
            });
            continue;
        }
        if c.is_ascii_digit() || (c == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit())
        {
            let start = i;
            while i < bytes.len() {
                let b = bytes[i];
                let exp_sign = (b == b'+' || b == b'-')
                    && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')
                    && !src[start..i].starts_with("0x");
                if b.is_ascii_alphanumeric() || b == b'.' || b == b'_' || exp_sign {
                    i += 1;
                } else {
                    break;
                }
            }
            toks.push(Token {
                tok: Tok::Num(src[start..i].to_string()),
                line,
            });
            continue;
        }
        if c == b'"' || c == b'\'' {
            let quote = c;
            let start = i;
            i += 1;
            while i < bytes.len() && bytes[i] != quote {
                if bytes[i] == b'\\' {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'\n' {
                    return Err(ParseError::new(line, "newline in literal"));
                }
                i += 1;
            }
            if i >= bytes.len() {
                return Err(ParseError::new(line, "unterminated literal"));
            }
            i += 1;
            let text = src[start..i].to_string();
            toks.push(Token {
                tok: if quote == b'"' {
                    Tok::Str(text)
                } else {
                    Tok::Char(text)
                },
                line,
            });
            continue;
        }
        let rest = &src[i..];
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                toks.push(Token {
                    tok: Tok::Punct(p),
                    line,
                });
                i += p.len();
            }
            None => {
                return Err(ParseError::new(
                    line,
                    format!("unexpected character {:?}", c as char),
                ))
            }
        }
    }
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn skips_directives_and_comments() {
        let toks = tokenize("#include <stdio.h>\n/* a\n b */ int x; // c\n").unwrap();
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[0].line, 3);
        assert_eq!(toks[0].tok, Tok::Ident("int".into()));
    }

    #[test]
    fn longest_punct_wins() {
        let toks = tokenize("a <<= b->c").unwrap();
        assert_eq!(toks[1].tok, Tok::Punct("<<="));
        assert_eq!(toks[3].tok, Tok::Punct("->"));
    }

    #[test]
    fn numbers_with_suffixes() {
        let toks = tokenize("0xFFUL 1.5e-3 7L").unwrap();
        assert_eq!(toks[0].tok, Tok::Num("0xFFUL".into()));
        assert_eq!(toks[1].tok, Tok::Num("1.5e-3".into()));
        assert_eq!(toks[2].tok, Tok::Num("7L".into()));
    }
}
