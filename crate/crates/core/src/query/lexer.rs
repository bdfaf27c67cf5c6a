use super::parser::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(super) enum Tok {
    Slash,
    DoubleSlash,
    Star,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Colon,
    Minus,
    Plus,
    Approx,
    Ident(String),
    Number(u64),
    Str(String),
    Eof,
}

impl Tok {
    pub(super) fn describe(&self) -> String {
        match self {
            Tok::Slash => "`/`".into(),
            Tok::DoubleSlash => "`//`".into(),
            Tok::Star => "`*`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Approx => "`~=`".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(_) => "string".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub tok: Tok,
    pub offset: usize,
}

pub(super) fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let single = |tok| Token { tok, offset: start };
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'/' => {
                if bytes.get(i + 1) == Some(&b'/') {
                    out.push(single(Tok::DoubleSlash));
                    i += 2;
                } else {
                    out.push(single(Tok::Slash));
                    i += 1;
                }
            }
            b'~' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    out.push(single(Tok::Approx));
                    i += 2;
                } else {
                    return Err(ParseError::new(start, "`~` must be followed by `=`", &["`~=`"]));
                }
            }
            b'*' | b'[' | b']' | b'(' | b')' | b',' | b':' | b'-' | b'+' => {
                out.push(single(match c {
                    b'*' => Tok::Star,
                    b'[' => Tok::LBracket,
                    b']' => Tok::RBracket,
                    b'(' => Tok::LParen,
                    b')' => Tok::RParen,
                    b',' => Tok::Comma,
                    b':' => Tok::Colon,
                    b'-' => Tok::Minus,
                    _ => Tok::Plus,
                }));
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let n = src[start..i].parse::<u64>().map_err(|_| {
                    ParseError::new(start, "number too large", &["number"])
                })?;
                out.push(single(Tok::Number(n)));
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push(single(Tok::Ident(src[start..i].to_string())));
            }
            b'"' => {
                i += 1;
                let mut s = String::new();
                loop {
                    let Some(ch) = src[i..].chars().next() else {
                        return Err(ParseError::new(start, "unterminated string", &["`\"`"]));
                    };
                    i += ch.len_utf8();
                    match ch {
                        '"' => break,
                        '\\' => match src[i..].chars().next() {
                            Some(e @ ('"' | '\\')) => {
                                s.push(e);
                                i += 1;
                            }
                            _ => {
                                return Err(ParseError::new(
                                    i - 1,
                                    "invalid escape; only \\\" and \\\\ are allowed",
                                    &["`\\\"`", "`\\\\`"],
                                ))
                            }
                        },
                        _ => s.push(ch),
                    }
                }
                out.push(single(Tok::Str(s)));
            }
            _ => {
                return Err(ParseError::new(start, "unexpected character", &[]));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        offset: src.len(),
    });
    Ok(out)
}
