use super::{HdlError, Pos};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Number { width: Option<u32>, value: u64 },
    Kw(Kw),
    Sym(&'static str),
    /// `// @kind arg arg ...`
    Pragma { kind: String, args: Vec<String> },
    Eof,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kw {
    Module,
    Endmodule,
    Input,
    Output,
    Reg,
    Wire,
    Assign,
    Always,
    Posedge,
    Begin,
    End,
    If,
    Else,
}

impl Kw {
    fn from_str(s: &str) -> Option<Kw> {
        Some(match s {
            "module" => Kw::Module,
            "endmodule" => Kw::Endmodule,
            "input" => Kw::Input,
            "output" => Kw::Output,
            "reg" => Kw::Reg,
            "wire" => Kw::Wire,
            "assign" => Kw::Assign,
            "always" => Kw::Always,
            "posedge" => Kw::Posedge,
            "begin" => Kw::Begin,
            "end" => Kw::End,
            "if" => Kw::If,
            "else" => Kw::Else,
            _ => return None,
        })
    }
}

// Longest first so that `<=` wins over `<`.
const SYMBOLS: &[&str] = &[
    "<<", ">>", "<=", "==", "!=", "(", ")", "[", "]", "{", "}", ";", ",", ":", "=", "<", "+", "-",
    "*", "&", "|", "^", "~", "?", "@",
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(src: &str) -> Result<Vec<Token>, HdlError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;

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
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            let start = i + 2;
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            let body: String = chars[start..i].iter().collect();
            let body = body.trim();
            if let Some(rest) = body.strip_prefix('@') {
                let mut words = rest.split_whitespace();
                let kind = words.next().unwrap_or("").to_string();
                let args = words.map(str::to_string).collect();
                toks.push(Token { tok: Tok::Pragma { kind, args }, pos });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match Kw::from_str(&word) {
                Some(kw) => Tok::Kw(kw),
                None => Tok::Ident(word),
            };
            toks.push(Token { tok, pos });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '_') {
                bump!();
            }
            let digits: String = chars[start..i].iter().filter(|c| **c != '_').collect();
            if i < chars.len() && chars[i] == '\'' {
                bump!();
                let base = match chars.get(i).map(|c| c.to_ascii_lowercase()) {
                    Some('h') => 16,
                    Some('d') => 10,
                    Some('b') => 2,
                    Some('o') => 8,
                    _ => return Err(HdlError::Syntax { pos, msg: "expected base after `'`".into() }),
                };
                bump!();
                let vstart = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    bump!();
                }
                let vdigits: String = chars[vstart..i].iter().filter(|c| **c != '_').collect();
                let width: u32 = digits
                    .parse()
                    .map_err(|_| HdlError::Syntax { pos, msg: format!("bad literal width `{digits}`") })?;
                if width == 0 || width > 64 {
                    return Err(HdlError::Syntax { pos, msg: format!("literal width {width} outside 1..=64") });
                }
                let value = u64::from_str_radix(&vdigits, base).map_err(|_| HdlError::Syntax {
                    pos,
                    msg: format!("bad base-{base} literal `{vdigits}`"),
                })?;
                if width < 64 && value >> width != 0 {
                    return Err(HdlError::Syntax { pos, msg: format!("literal {value} does not fit {width} bits") });
                }
                toks.push(Token { tok: Tok::Number { width: Some(width), value }, pos });
            } else {
                let value: u64 = digits
                    .parse()
                    .map_err(|_| HdlError::Syntax { pos, msg: format!("literal `{digits}` too large") })?;
                toks.push(Token { tok: Tok::Number { width: None, value }, pos });
            }
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(sym) => {
                for _ in 0..sym.len() {
                    bump!();
                }
                toks.push(Token { tok: Tok::Sym(sym), pos });
            }
            None => return Err(HdlError::Lex { pos, ch: c }),
        }
    }
    toks.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(toks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sized_literals_and_symbols() {
        let t = lex("q <= 8'hFF + 4'b1010 << 2;").unwrap();
        let kinds: Vec<_> = t.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("q".into()),
                Tok::Sym("<="),
                Tok::Number { width: Some(8), value: 255 },
                Tok::Sym("+"),
                Tok::Number { width: Some(4), value: 10 },
                Tok::Sym("<<"),
                Tok::Number { width: None, value: 2 },
                Tok::Sym(";"),
                Tok::Eof,
            ]
        );
    }

    #[test]
    fn pragma_comments_are_tokens_plain_comments_are_not() {
        let t = lex("// plain\n// @secret k j\nx").unwrap();
        assert_eq!(t[0].tok, Tok::Pragma { kind: "secret".into(), args: vec!["k".into(), "j".into()] });
        assert_eq!(t[0].pos, Pos { line: 2, col: 1 });
        assert_eq!(t[1].tok, Tok::Ident("x".into()));
    }

    #[test]
    fn illegal_character_position() {
        match lex("a\n  #") {
            Err(HdlError::Lex { pos, ch }) => {
                assert_eq!((pos.line, pos.col, ch), (2, 3, '#'));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oversized_literal() {
        assert!(lex("4'h1F").is_err());
        assert!(lex("99999999999999999999999").is_err());
    }
}
