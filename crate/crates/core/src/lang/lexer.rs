use super::ast::Span;
use super::error::{LangError, LangErrorKind};

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    /// Real literal; `int` is set when the text had no fraction or exponent.
    Num { value: f64, int: Option<u64> },
    /// Imaginary literal such as `2i` or `0.5i`.
    Imag(f64),
    /// `|content>` with an optional explicit dimension suffix `_d`.
    Ket { content: String, dim: Option<usize> },
    Sym(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Num { value, .. } => format!("number {value}"),
            Tok::Imag(v) => format!("imaginary number {v}i"),
            Tok::Ket { content, .. } => format!("ket |{content}>"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

const SYMBOLS: [&str; 17] = [":=", "==", "=", "{", "}", "(", ")", "[", "]", ";", ":", ",", "@", "*", "+", "-", "/"];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
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
        if c == '#' || (c == '/' && chars.get(i + 1) == Some(&'/')) {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        let span = Span { line, col };
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), span });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_int = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && chars[i] == '.' {
                is_int = false;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = (i, line, col);
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    is_int = false;
                    while i < j {
                        bump!();
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                } else {
                    (i, line, col) = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text.parse().map_err(|_| {
                LangError::new(LangErrorKind::Syntax, span, format!("malformed number `{text}`"))
            })?;
            let imag = i < chars.len()
                && chars[i] == 'i'
                && !chars.get(i + 1).is_some_and(|d| d.is_ascii_alphanumeric() || *d == '_');
            if imag {
                bump!();
                out.push(Token { tok: Tok::Imag(value), span });
            } else {
                let int = if is_int { text.parse::<u64>().ok() } else { None };
                out.push(Token { tok: Tok::Num { value, int }, span });
            }
            continue;
        }
        if c == '|' {
            bump!();
            let start = i;
            while i < chars.len() && chars[i] != '>' && chars[i] != '\n' {
                bump!();
            }
            if i >= chars.len() || chars[i] != '>' {
                return Err(LangError::new(LangErrorKind::Syntax, span, "unterminated ket, expected `>`"));
            }
            let content: String = chars[start..i].iter().filter(|c| !c.is_whitespace()).collect();
            bump!();
            let mut dim = None;
            if i + 1 < chars.len() && chars[i] == '_' && chars[i + 1].is_ascii_digit() {
                bump!();
                let s = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
                let text: String = chars[s..i].iter().collect();
                dim = Some(text.parse().map_err(|_| {
                    LangError::new(LangErrorKind::Syntax, span, format!("bad ket dimension `{text}`"))
                })?);
            }
            out.push(Token { tok: Tok::Ket { content, dim }, span });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        if let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            for _ in 0..sym.len() {
                bump!();
            }
            out.push(Token { tok: Tok::Sym(sym), span });
            continue;
        }
        return Err(LangError::new(LangErrorKind::Syntax, span, format!("unexpected character `{c}`")));
    }
    out.push(Token { tok: Tok::Eof, span: Span { line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_and_imaginary() {
        assert_eq!(
            toks("3 0.5 2i 1e-3 4e"),
            vec![
                Tok::Num { value: 3.0, int: Some(3) },
                Tok::Num { value: 0.5, int: None },
                Tok::Imag(2.0),
                Tok::Num { value: 1e-3, int: None },
                Tok::Num { value: 4.0, int: Some(4) },
                Tok::Ident("e".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn kets_and_symbols() {
        assert_eq!(
            toks("q := |0>; |01>|+> |12>_16"),
            vec![
                Tok::Ident("q".into()),
                Tok::Sym(":="),
                Tok::Ket { content: "0".into(), dim: None },
                Tok::Sym(";"),
                Tok::Ket { content: "01".into(), dim: None },
                Tok::Ket { content: "+".into(), dim: None },
                Tok::Ket { content: "12".into(), dim: Some(16) },
                Tok::Eof
            ]
        );
    }

    #[test]
    fn comments_and_positions() {
        let t = tokenize("# c\n  skip; // x\nskip").unwrap();
        assert_eq!(t[0].span, Span { line: 2, col: 3 });
        assert_eq!(t[2].span, Span { line: 3, col: 1 });
    }

    #[test]
    fn bad_character() {
        let e = tokenize("skip $").unwrap_err();
        assert_eq!(e.kind, LangErrorKind::Syntax);
        assert_eq!((e.span.line, e.span.col), (1, 6));
    }
}
