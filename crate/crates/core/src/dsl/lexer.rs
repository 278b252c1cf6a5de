use crate::value::ObjectRef;

use super::DslError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Obj(ObjectRef),
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(_) => "string".into(),
            Tok::Obj(r) => format!("`{r}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

const SYMBOLS: &[&str] = &["!=", "<=", ">=", "{", "}", "(", ")", "[", "]", ",", ";", ":", "=", "<", ">", ".", "*"];

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits `src` into tokens. `#` starts a comment; identifiers may contain inner `-`.
pub fn lex(src: &str) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: String| DslError { line, col, message: msg };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        let advance = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            advance(1, &mut i, &mut col);
        } else if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if is_ident_start(c) {
            let start = i;
            while i < chars.len()
                && (is_ident_char(chars[i])
                    || (chars[i] == '-' && i + 1 < chars.len() && is_ident_char(chars[i + 1]) && i > start))
            {
                i += 1;
            }
            col += i - start;
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), line: tl, col: tc });
        } else if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(char::is_ascii_digit)) {
            let start = i;
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let text: String = chars[start..i].iter().collect();
            let n = text.parse::<i64>().map_err(|_| err(tl, tc, format!("integer `{text}` out of range")))?;
            out.push(Token { tok: Tok::Int(n), line: tl, col: tc });
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            col += 1;
            loop {
                let Some(&d) = chars.get(i) else {
                    return Err(err(tl, tc, "unterminated string".into()));
                };
                i += 1;
                col += 1;
                match d {
                    '"' => break,
                    '\n' => return Err(err(tl, tc, "unterminated string".into())),
                    '\\' => {
                        let e = chars.get(i).copied().ok_or_else(|| err(tl, tc, "unterminated string".into()))?;
                        i += 1;
                        col += 1;
                        s.push(match e {
                            'n' => '\n',
                            't' => '\t',
                            'r' => '\r',
                            '"' => '"',
                            '\\' => '\\',
                            other => return Err(err(line, col - 2, format!("unknown escape `\\{other}`"))),
                        });
                    }
                    d => s.push(d),
                }
            }
            out.push(Token { tok: Tok::Str(s), line: tl, col: tc });
        } else if c == '@' {
            // @LEVEL:ID
            let start = i;
            i += 1;
            let num = |i: &mut usize| {
                let s = *i;
                while *i < chars.len() && chars[*i].is_ascii_digit() {
                    *i += 1;
                }
                chars[s..*i].iter().collect::<String>().parse::<u64>().ok()
            };
            let level = num(&mut i);
            let colon = chars.get(i) == Some(&':');
            if colon {
                i += 1;
            }
            let id = num(&mut i);
            col += i - start;
            match (level, colon, id) {
                (Some(l), true, Some(id)) if l <= u32::MAX as u64 => {
                    out.push(Token { tok: Tok::Obj(ObjectRef { level: l as u32, id }), line: tl, col: tc })
                }
                _ => return Err(err(tl, tc, "malformed object literal, expected @LEVEL:ID".into())),
            }
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                return Err(err(tl, tc, format!("unexpected character `{c}`")));
            };
            advance(sym.len(), &mut i, &mut col);
            out.push(Token { tok: Tok::Sym(sym), line: tl, col: tc });
        }
    }
    out.push(Token { tok: Tok::Eof, line, col });
    Ok(out)
}
