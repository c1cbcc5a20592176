use std::fmt;

use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    /// `\forall`, `\separated`, `\written`, ... (stored without the backslash)
    Builtin(String),
    Int(i64),
    Punct(&'static str),
    /// Contents of a `/*@ ... */` comment.
    Annot(String),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Builtin(s) => write!(f, "`\\{s}`"),
            Tok::Int(i) => write!(f, "`{i}`"),
            Tok::Punct(p) => write!(f, "`{p}`"),
            Tok::Annot(_) => write!(f, "annotation"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
}

// Longest first.
const PUNCTS: &[&str] = &[
    "==>", "<==>", "..", "->", "++", "--", "+=", "-=", "&&", "||", "==", "!=", "<=", ">=", "<",
    ">", "=", "+", "-", "*", "/", "%", "!", "&", "(", ")", "{", "}", "[", "]", ";", ",", ".", ":",
];

/// Splits `src` into tokens. `line`/`col` give the position of the first
/// character, so annotation bodies can be re-lexed with accurate positions.
pub fn tokenize_at(src: &str, line: u32, col: u32) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = line;
    let mut col = col;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            continue;
        }
        let (tl, tc) = (line, col);
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let is_annot = chars.get(i + 2) == Some(&'@');
            bump!();
            bump!();
            if is_annot {
                bump!();
            }
            let start = i;
            let (al, ac) = (line, col);
            loop {
                if i + 1 >= chars.len() {
                    return Err(ParseError::new(tl, tc, "unterminated comment"));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    break;
                }
                bump!();
            }
            let body: String = chars[start..i].iter().collect();
            bump!();
            bump!();
            if is_annot {
                out.push(Token {
                    tok: Tok::Annot(body),
                    line: al,
                    col: ac,
                });
            }
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<i64>().map_err(|_| {
                ParseError::new(tl, tc, format!("integer literal `{text}` out of range"))
            })?;
            out.push(Token {
                tok: Tok::Int(v),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' || c == '\\' {
            let builtin = c == '\\';
            if builtin {
                bump!();
            }
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let text: String = chars[start..i].iter().collect();
            if text.is_empty() {
                return Err(ParseError::new(tl, tc, "stray `\\`"));
            }
            let tok = if builtin {
                Tok::Builtin(text)
            } else {
                Tok::Ident(text)
            };
            out.push(Token {
                tok,
                line: tl,
                col: tc,
            });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 4)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.len() {
                    bump!();
                }
                out.push(Token {
                    tok: Tok::Punct(p),
                    line: tl,
                    col: tc,
                });
            }
            None => {
                return Err(ParseError::new(
                    tl,
                    tc,
                    format!("unexpected character `{c}`"),
                ))
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    tokenize_at(src, 1, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ranges_and_implication() {
        assert_eq!(
            toks("0 .. N ==> x"),
            vec![
                Tok::Int(0),
                Tok::Punct(".."),
                Tok::Ident("N".into()),
                Tok::Punct("==>"),
                Tok::Ident("x".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_skipped_annotations_kept() {
        let t = toks("a // c\n /* d */ /*@ meta */ b");
        assert_eq!(t[1], Tok::Annot(" meta ".into()));
        assert_eq!(t.len(), 4);
    }

    #[test]
    fn annotation_position_points_at_body() {
        let t = tokenize("\n  /*@x*/").unwrap();
        assert_eq!((t[0].line, t[0].col), (2, 6));
    }

    #[test]
    fn builtin_words() {
        assert_eq!(toks("\\forall")[0], Tok::Builtin("forall".into()));
    }

    #[test]
    fn unterminated_comment_errors() {
        assert!(tokenize("/* abc").is_err());
    }
}
