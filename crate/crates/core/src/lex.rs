//! Shared tokenizer for the model and property grammars.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    /// Decimal literal such as `0.9`, kept as the raw digit strings so the
    /// parser can build an exact rational from it.
    Decimal { int_part: String, frac_part: String },
    Str(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Colon,
    Semi,
    Comma,
    Arrow,
    Plus,
    Minus,
    Star,
    Slash,
    Prime,
    Amp,
    Pipe,
    Bang,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    DotDot,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Decimal { int_part, frac_part } => write!(f, "number `{int_part}.{frac_part}`"),
            Tok::Str(s) => write!(f, "string \"{s}\""),
            Tok::LBracket => write!(f, "`[`"),
            Tok::RBracket => write!(f, "`]`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Colon => write!(f, "`:`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
            Tok::Star => write!(f, "`*`"),
            Tok::Slash => write!(f, "`/`"),
            Tok::Prime => write!(f, "`'`"),
            Tok::Amp => write!(f, "`&`"),
            Tok::Pipe => write!(f, "`|`"),
            Tok::Bang => write!(f, "`!`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Ne => write!(f, "`!=`"),
            Tok::Lt => write!(f, "`<`"),
            Tok::Le => write!(f, "`<=`"),
            Tok::Gt => write!(f, "`>`"),
            Tok::Ge => write!(f, "`>=`"),
            Tok::DotDot => write!(f, "`..`"),
        }
    }
}

/// A token together with the 1-based line/column where it starts.
#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug, Clone)]
pub(crate) struct LexError {
    pub line: u32,
    pub col: u32,
    pub msg: String,
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>, LexError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($tok:expr, $len:expr) => {{
            out.push(Spanned { tok: $tok, line, col });
            i += $len;
            col += $len as u32;
        }};
    }

    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            '/' if bytes.get(i + 1) == Some(&b'/') => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            '/' => push!(Tok::Slash, 1),
            '[' => push!(Tok::LBracket, 1),
            ']' => push!(Tok::RBracket, 1),
            '(' => push!(Tok::LParen, 1),
            ')' => push!(Tok::RParen, 1),
            ':' => push!(Tok::Colon, 1),
            ';' => push!(Tok::Semi, 1),
            ',' => push!(Tok::Comma, 1),
            '+' => push!(Tok::Plus, 1),
            '*' => push!(Tok::Star, 1),
            '\'' => push!(Tok::Prime, 1),
            '&' => push!(Tok::Amp, 1),
            '|' => push!(Tok::Pipe, 1),
            '-' if bytes.get(i + 1) == Some(&b'>') => push!(Tok::Arrow, 2),
            '-' => push!(Tok::Minus, 1),
            '!' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Ne, 2),
            '!' => push!(Tok::Bang, 1),
            '<' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Le, 2),
            '<' => push!(Tok::Lt, 1),
            '>' if bytes.get(i + 1) == Some(&b'=') => push!(Tok::Ge, 2),
            '>' => push!(Tok::Gt, 1),
            '=' => push!(Tok::Eq, 1),
            '.' if bytes.get(i + 1) == Some(&b'.') => push!(Tok::DotDot, 2),
            '"' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] != b'"' && bytes[j] != b'\n' {
                    j += 1;
                }
                if j >= bytes.len() || bytes[j] != b'"' {
                    return Err(LexError { line, col, msg: "unterminated string".into() });
                }
                let s = text[start..j].to_string();
                let len = j + 1 - i;
                out.push(Spanned { tok: Tok::Str(s), line, col });
                i += len;
                col += len as u32;
            }
            _ if c.is_ascii_digit() => {
                let start = i;
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                // A decimal requires a digit after the dot; `0..1` stays `0 .. 1`.
                if j + 1 < bytes.len() && bytes[j] == b'.' && bytes[j + 1].is_ascii_digit() {
                    let int_part = text[start..j].to_string();
                    let fstart = j + 1;
                    let mut k = fstart;
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    let frac_part = text[fstart..k].to_string();
                    let len = k - start;
                    out.push(Spanned { tok: Tok::Decimal { int_part, frac_part }, line, col });
                    i += len;
                    col += len as u32;
                } else {
                    let raw = &text[start..j];
                    let n: i64 = raw.parse().map_err(|_| LexError {
                        line,
                        col,
                        msg: format!("integer literal `{raw}` out of range"),
                    })?;
                    let len = j - start;
                    out.push(Spanned { tok: Tok::Int(n), line, col });
                    i += len;
                    col += len as u32;
                }
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let s = text[start..j].to_string();
                let len = j - start;
                out.push(Spanned { tok: Tok::Ident(s), line, col });
                i += len;
                col += len as u32;
            }
            _ => {
                return Err(LexError { line, col, msg: format!("unexpected character `{c}`") });
            }
        }
    }
    Ok(out)
}
