use std::fmt;

/// Source position, 1-based. Compares equal to every other span so that
/// ASTs can be compared structurally.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::hash::Hash for Span {
    fn hash<H: std::hash::Hasher>(&self, _: &mut H) {}
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    /// Punctuation and operators, e.g. `->`, `==`, `(`.
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

// Longest first.
const SYMBOLS: &[&str] = &[
    "->", "<>", "==", "!=", "<=", ">=", "&&", "||", "<", ">", "!", ".", ",", ":", ";", "=", "+", "-", "*", "/", "(",
    ")", "[", "]", "{", "}", "|", "#",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexError {
    pub span: Span,
    pub message: String,
}

/// Splits `text` into tokens. `%` starts a comment running to end of line.
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let span = Span { line, col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '%' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < bytes.len()
                && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'\'')
            {
                i += 1;
            }
            col += (i - start) as u32;
            out.push(Token {
                tok: Tok::Ident(text[start..i].to_string()),
                span,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            col += (i - start) as u32;
            let n = text[start..i].parse::<i64>().map_err(|_| LexError {
                span,
                message: format!("integer literal {} too large", &text[start..i]),
            })?;
            out.push(Token { tok: Tok::Int(n), span });
            continue;
        }
        let Some(sym) = SYMBOLS.iter().find(|s| text[i..].starts_with(**s)) else {
            return Err(LexError {
                span,
                message: format!("unexpected character `{c}`"),
            });
        };
        i += sym.len();
        col += sym.len() as u32;
        out.push(Token {
            tok: Tok::Sym(sym),
            span,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        span: Span { line, col },
    });
    Ok(out)
}

/// Lines of the form `%@ key rest` carry metadata for tools.
pub fn pragmas(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.trim_start().strip_prefix("%@"))
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn operators_and_comments() {
        let toks = tokenize("c -> a.P <> b % tail\n x<=1").unwrap();
        let kinds: Vec<_> = toks.iter().map(|t| t.tok.clone()).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("c".into()),
                Tok::Sym("->"),
                Tok::Ident("a".into()),
                Tok::Sym("."),
                Tok::Ident("P".into()),
                Tok::Sym("<>"),
                Tok::Ident("b".into()),
                Tok::Ident("x".into()),
                Tok::Sym("<="),
                Tok::Int(1),
                Tok::Eof
            ]
        );
        assert_eq!(toks[7].span.line, 2);
    }

    #[test]
    fn pragma_lines() {
        let p = pragmas("%@ features s1,s2\n% plain\nsort A;");
        assert_eq!(p, vec!["features s1,s2".to_string()]);
    }
}
