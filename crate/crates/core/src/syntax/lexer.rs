use super::ast::Span;
use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Num(u64),
    IdLit(u64),
    Meta(u32),
    Char(char),
    Lambda,
    BigLambda,
    Lolli,
    Arrow,
    Tensor,
    Plus,
    Diamond,
    Forall,
    Exists,
    Nu,
    At,
    FatArrow,
    Bar,
    Dot,
    Colon,
    Comma,
    Eq,
    LParen,
    RParen,
    LBrack,
    RBrack,
    UnitLit,
    StarLit,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::IdLit(n) => format!("`#{n}`"),
            Tok::Meta(n) => format!("`?{n}`"),
            Tok::Char(c) => format!("'{c}'"),
            Tok::Lambda => "`λ`".into(),
            Tok::BigLambda => "`Λ`".into(),
            Tok::Lolli => "`⊸`".into(),
            Tok::Arrow => "`→`".into(),
            Tok::Tensor => "`⊗`".into(),
            Tok::Plus => "`⊕`".into(),
            Tok::Diamond => "`◇`".into(),
            Tok::Forall => "`∀`".into(),
            Tok::Exists => "`∃`".into(),
            Tok::Nu => "`ν`".into(),
            Tok::At => "`@`".into(),
            Tok::FatArrow => "`=>`".into(),
            Tok::Bar => "`|`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrack => "`[`".into(),
            Tok::RBrack => "`]`".into(),
            Tok::UnitLit => "`⟨⟩`".into(),
            Tok::StarLit => "`⋆`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
}

fn is_ident_start(c: char) -> bool {
    (c.is_alphabetic() || c == '_') && !matches!(c, 'λ' | 'Λ' | 'ν')
}

fn is_ident_continue(c: char) -> bool {
    is_ident_start(c) || c.is_ascii_digit() || c == '\'' || c == '₀' || c == '₁' || c == '₂' || c == '₃' || c == '₄'
}

pub fn lex(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut line_start = 0usize;
    let byte_at = |k: usize| chars.get(k).map(|&(b, _)| b).unwrap_or(src.len());
    while i < chars.len() {
        let (b, c) = chars[i];
        let col = (src[line_start..b].chars().count() + 1) as u32;
        let span_from = |end_idx: usize| Span { start: b, end: byte_at(end_idx), line, col };
        if c == '\n' {
            i += 1;
            line += 1;
            line_start = b + 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let peek = |k: usize| chars.get(i + k).map(|&(_, ch)| ch);
        if c == '-' && peek(1) == Some('-') {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let (tok, len) = match c {
            'λ' | '\\' => (Tok::Lambda, 1),
            'Λ' => (Tok::BigLambda, 1),
            '/' if peek(1) == Some('\\') => (Tok::BigLambda, 2),
            '⊸' => (Tok::Lolli, 1),
            '-' if peek(1) == Some('o') && !peek(2).is_some_and(is_ident_continue) => (Tok::Lolli, 2),
            '→' => (Tok::Arrow, 1),
            '-' if peek(1) == Some('>') => (Tok::Arrow, 2),
            '⊗' | '*' => (Tok::Tensor, 1),
            '⊕' | '+' => (Tok::Plus, 1),
            '◇' => (Tok::Diamond, 1),
            '<' if peek(1) == Some('>') => (Tok::Diamond, 2),
            '∀' => (Tok::Forall, 1),
            '∃' => (Tok::Exists, 1),
            'ν' => (Tok::Nu, 1),
            '@' => (Tok::At, 1),
            '=' if peek(1) == Some('>') => (Tok::FatArrow, 2),
            '⇒' => (Tok::FatArrow, 1),
            '=' => (Tok::Eq, 1),
            '|' => (Tok::Bar, 1),
            '.' => (Tok::Dot, 1),
            ':' => (Tok::Colon, 1),
            ',' => (Tok::Comma, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBrack, 1),
            ']' => (Tok::RBrack, 1),
            '⟨' if peek(1) == Some('⟩') => (Tok::UnitLit, 2),
            '⋆' => (Tok::StarLit, 1),
            '\'' => {
                let ch = peek(1).ok_or_else(|| SyntaxError::new(span_from(i + 1), "unterminated character literal", vec![]))?;
                if peek(2) != Some('\'') {
                    return Err(SyntaxError::new(span_from(i + 2), "unterminated character literal", vec!["'".into()]));
                }
                (Tok::Char(ch), 3)
            }
            '#' | '?' => {
                let mut j = i + 1;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(SyntaxError::new(span_from(j), format!("expected digits after `{c}`"), vec!["number".into()]));
                }
                let digits = &src[byte_at(i + 1)..byte_at(j)];
                let n: u64 = digits
                    .parse()
                    .map_err(|_| SyntaxError::new(span_from(j), "number out of range", vec![]))?;
                let tok = if c == '#' { Tok::IdLit(n) } else { Tok::Meta(n as u32) };
                (tok, j - i)
            }
            d if d.is_ascii_digit() => {
                let mut j = i;
                while j < chars.len() && chars[j].1.is_ascii_digit() {
                    j += 1;
                }
                let n: u64 = src[b..byte_at(j)]
                    .parse()
                    .map_err(|_| SyntaxError::new(span_from(j), "number out of range", vec![]))?;
                (Tok::Num(n), j - i)
            }
            s if is_ident_start(s) => {
                let mut j = i + 1;
                while j < chars.len() && is_ident_continue(chars[j].1) {
                    j += 1;
                }
                let word = &src[b..byte_at(j)];
                let tok = match word {
                    "forall" => Tok::Forall,
                    "exists" => Tok::Exists,
                    "nu" => Tok::Nu,
                    "fun" => Tok::Lambda,
                    "star" => Tok::StarLit,
                    _ => Tok::Ident(word.to_string()),
                };
                (tok, j - i)
            }
            other => {
                return Err(SyntaxError::new(span_from(i + 1), format!("unexpected character `{other}`"), vec![]));
            }
        };
        out.push(Token { tok, span: span_from(i + len) });
        i += len;
    }
    let end = src.len();
    let col = (src[line_start..].chars().count() + 1) as u32;
    out.push(Token { tok: Tok::Eof, span: Span { start: end, end, line, col } });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        lex(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn ascii_and_unicode_spellings_agree() {
        assert_eq!(toks("λx. x ⊸ ◇A ⊗ B ⊕ C → D"), toks("\\x. x -o <>A * B + C -> D"));
        assert_eq!(toks("Λ ∀ ∃ ν ⋆"), toks("/\\ forall exists nu star"));
    }

    #[test]
    fn literals() {
        assert_eq!(toks("12 #3 ?4 'a' ⟨⟩"), vec![Tok::Num(12), Tok::IdLit(3), Tok::Meta(4), Tok::Char('a'), Tok::UnitLit, Tok::Eof]);
    }

    #[test]
    fn comments_and_positions() {
        let ts = lex("-- header\n  let x₁ = w' in\nx").unwrap();
        assert_eq!(ts[0].tok, Tok::Ident("let".into()));
        assert_eq!((ts[0].span.line, ts[0].span.col), (2, 3));
        assert_eq!(ts[1].tok, Tok::Ident("x₁".into()));
        assert_eq!(ts[3].tok, Tok::Ident("w'".into()));
        assert_eq!((ts[5].span.line, ts[5].span.col), (3, 1));
    }

    #[test]
    fn ascii_lollipop_needs_a_word_boundary() {
        assert_eq!(toks("A -o B"), vec![Tok::Ident("A".into()), Tok::Lolli, Tok::Ident("B".into()), Tok::Eof]);
        assert!(lex("A -oB").is_err());
    }

    #[test]
    fn errors_carry_positions() {
        let e = lex("x $").unwrap_err();
        assert_eq!((e.span.line, e.span.col), (1, 3));
        assert!(lex("'ab'").is_err());
        assert!(lex("#").is_err());
    }
}
