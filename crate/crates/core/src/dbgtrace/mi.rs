//! Parser for gdb/MI output records.

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MiValue {
    Const(String),
    Tuple(Vec<(String, MiValue)>),
    List(Vec<MiValue>),
}

impl MiValue {
    pub fn get(&self, key: &str) -> Option<&MiValue> {
        match self {
            MiValue::Tuple(items) => items.iter().find(|(k, _)| k == key).map(|(_, v)| v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            MiValue::Const(s) => Some(s),
            _ => None,
        }
    }

    pub fn str_at(&self, key: &str) -> Option<&str> {
        self.get(key).and_then(|v| v.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MiRecord {
    /// `^done`, `^running`, `^error`, ...
    Result { class: String, body: MiValue },
    /// `*stopped`, `=thread-created`, ...
    Async { kind: char, class: String, body: MiValue },
    /// `~"..."`, `@"..."`, `&"..."`
    Stream { kind: char, text: String },
    Prompt,
    Other(String),
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.s.get(self.i).copied()
    }

    fn cstring(&mut self) -> Option<String> {
        if self.peek()? != b'"' {
            return None;
        }
        self.i += 1;
        let mut out = Vec::new();
        while let Some(c) = self.peek() {
            self.i += 1;
            match c {
                b'"' => return Some(String::from_utf8_lossy(&out).into_owned()),
                b'\\' => {
                    let e = self.peek()?;
                    self.i += 1;
                    match e {
                        b'n' => out.push(b'\n'),
                        b't' => out.push(b'\t'),
                        b'r' => out.push(b'\r'),
                        b'0'..=b'7' => {
                            let mut v = (e - b'0') as u32;
                            for _ in 0..2 {
                                match self.peek() {
                                    Some(d @ b'0'..=b'7') => {
                                        v = v * 8 + (d - b'0') as u32;
                                        self.i += 1;
                                    }
                                    _ => break,
                                }
                            }
                            out.push(v as u8);
                        }
                        other => out.push(other),
                    }
                }
                other => out.push(other),
            }
        }
        None
    }

    fn ident(&mut self) -> String {
        let start = self.i;
        while let Some(c) = self.peek() {
            if c == b'=' || c == b',' || c == b'}' || c == b']' {
                break;
            }
            self.i += 1;
        }
        String::from_utf8_lossy(&self.s[start..self.i]).into_owned()
    }

    fn value(&mut self) -> Option<MiValue> {
        match self.peek()? {
            b'"' => self.cstring().map(MiValue::Const),
            b'{' => {
                self.i += 1;
                let items = self.results(b'}')?;
                Some(MiValue::Tuple(items))
            }
            b'[' => {
                self.i += 1;
                let mut items = Vec::new();
                loop {
                    match self.peek()? {
                        b']' => {
                            self.i += 1;
                            break;
                        }
                        b',' => self.i += 1,
                        b'"' | b'{' | b'[' => items.push(self.value()?),
                        _ => {
                            let k = self.ident();
                            if self.peek() == Some(b'=') {
                                self.i += 1;
                            }
                            let v = self.value()?;
                            items.push(MiValue::Tuple(vec![(k, v)]));
                        }
                    }
                }
                Some(MiValue::List(items))
            }
            _ => None,
        }
    }

    fn results(&mut self, close: u8) -> Option<Vec<(String, MiValue)>> {
        let mut items = Vec::new();
        loop {
            match self.peek() {
                None if close == 0 => return Some(items),
                None => return None,
                Some(c) if c == close => {
                    self.i += 1;
                    return Some(items);
                }
                Some(b',') => self.i += 1,
                // mi2 lists extra breakpoint locations as bare tuples after `bkpt`
                Some(b'{') => items.push((String::new(), self.value()?)),
                Some(_) => {
                    let k = self.ident();
                    if self.peek() != Some(b'=') {
                        return None;
                    }
                    self.i += 1;
                    let v = self.value()?;
                    items.push((k, v));
                }
            }
        }
    }
}

pub fn parse_record(line: &str) -> MiRecord {
    let line = line.trim_end_matches(['\r', '\n']);
    let rest = line.trim_start_matches(|c: char| c.is_ascii_digit());
    if rest.trim() == "(gdb)" {
        return MiRecord::Prompt;
    }
    let Some(first) = rest.chars().next() else {
        return MiRecord::Other(String::new());
    };
    match first {
        '~' | '@' | '&' => {
            let mut c = Cursor {
                s: rest[1..].as_bytes(),
                i: 0,
            };
            match c.cstring() {
                Some(text) => MiRecord::Stream { kind: first, text },
                None => MiRecord::Other(line.to_string()),
            }
        }
        '^' | '*' | '=' | '+' => {
            let body = &rest[1..];
            let (class, tail) = match body.find(',') {
                Some(i) => (&body[..i], &body[i + 1..]),
                None => (body, ""),
            };
            let mut c = Cursor {
                s: tail.as_bytes(),
                i: 0,
            };
            let items = c.results(0).unwrap_or_default();
            let body = MiValue::Tuple(items);
            if first == '^' {
                MiRecord::Result {
                    class: class.to_string(),
                    body,
                }
            } else {
                MiRecord::Async {
                    kind: first,
                    class: class.to_string(),
                    body,
                }
            }
        }
        _ => MiRecord::Other(line.to_string()),
    }
}
