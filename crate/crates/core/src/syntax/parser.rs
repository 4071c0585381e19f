//! Recursive-descent parser for `.lw` source files.
//!
//! Binders are resolved while parsing: every binding site receives a fresh uid and
//! every occurrence points at the innermost binder of the same name. Names that are
//! not bound locally become [`TermKind::Global`] (builtins, colors resolve to literals).

use std::collections::HashMap;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::SyntaxError;

/// Parsed but not yet classified type.
#[derive(Debug, Clone)]
enum PTy {
    I,
    One,
    Base(BaseType),
    Var(Symbol),
    Tensor(Box<PTy>, Box<PTy>),
    Plus(Box<PTy>, Box<PTy>),
    Lolli(Box<PTy>, Box<PTy>),
    Arrow(Box<PTy>, Box<PTy>),
    Diamond(Box<PTy>),
    At(Box<PTy>, IndexTerm),
    F(Box<PTy>),
    G(Box<PTy>),
    Forall(Symbol, IndexSort, Box<PTy>),
    Exists(Symbol, IndexSort, Box<PTy>),
    Widget(IndexTerm),
    Prefix(IndexTerm, IndexTerm),
    Nu(Symbol, Box<PTy>),
}

impl PTy {
    fn is_cart(&self) -> bool {
        matches!(self, PTy::One | PTy::Base(_) | PTy::Arrow(..) | PTy::G(_))
    }

    fn subst_var(&self, name: &str, with: &PTy) -> PTy {
        let go = |t: &PTy| Box::new(t.subst_var(name, with));
        match self {
            PTy::Var(s) if s.uid == 0 && s.name == name => with.clone(),
            PTy::Tensor(a, b) => PTy::Tensor(go(a), go(b)),
            PTy::Plus(a, b) => PTy::Plus(go(a), go(b)),
            PTy::Lolli(a, b) => PTy::Lolli(go(a), go(b)),
            PTy::Arrow(a, b) => PTy::Arrow(go(a), go(b)),
            PTy::Diamond(a) => PTy::Diamond(go(a)),
            PTy::At(a, i) => PTy::At(go(a), i.clone()),
            PTy::F(a) => PTy::F(go(a)),
            PTy::G(a) => PTy::G(go(a)),
            PTy::Forall(s, o, a) => PTy::Forall(s.clone(), *o, go(a)),
            PTy::Exists(s, o, a) => PTy::Exists(s.clone(), *o, go(a)),
            PTy::Nu(s, a) => PTy::Nu(s.clone(), go(a)),
            other => other.clone(),
        }
    }
}

struct Alias {
    params: Vec<String>,
    body: PTy,
}

pub struct Parser {
    toks: Vec<Token>,
    pos: usize,
    next_uid: u32,
    terms: Vec<(String, u32)>,
    indices: Vec<(String, u32)>,
    tyvars: Vec<(String, u32)>,
    aliases: HashMap<String, Alias>,
}

const KEYWORDS: &[&str] = &[
    "def", "entry", "type", "let", "in", "evt", "select", "as", "case", "of", "inl", "inr", "fold",
    "unfold", "pack", "runG", "G", "F", "I", "Widget", "Prefix", "Id", "Time", "Color", "Char",
];

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    pub fn new(src: &str) -> PResult<Self> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            next_uid: 1,
            terms: Vec::new(),
            indices: Vec::new(),
            tyvars: Vec::new(),
            aliases: HashMap::new(),
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn prev_span(&self) -> Span {
        self.toks[self.pos.saturating_sub(1)].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &[&str]) -> PResult<T> {
        let found = self.peek().describe();
        Err(SyntaxError::new(
            self.span(),
            format!("unexpected {found}"),
            expected.iter().map(|s| s.to_string()).collect(),
        ))
    }

    fn expect(&mut self, tok: Tok) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().span)
        } else {
            let d = tok.describe();
            self.error(&[d.as_str()])
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.error(&[&format!("`{kw}`")])
        }
    }

    fn ident(&mut self) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let sp = self.bump().span;
                Ok((s, sp))
            }
            _ => self.error(&["identifier"]),
        }
    }

    fn fresh(&mut self, name: &str) -> Symbol {
        let uid = self.next_uid;
        self.next_uid += 1;
        Symbol::new(name, uid)
    }

    fn lookup(scope: &[(String, u32)], name: &str) -> Option<u32> {
        scope.iter().rev().find(|(n, _)| n == name).map(|&(_, u)| u)
    }

    // ---------------------------------------------------------------- program

    pub fn program(&mut self) -> PResult<SourceProgram> {
        let mut definitions: Vec<Definition> = Vec::new();
        let mut entry: Option<(String, Span)> = None;
        loop {
            if *self.peek() == Tok::Eof {
                break;
            }
            if self.is_kw("def") {
                let def = self.definition()?;
                if definitions.iter().any(|d| d.name == def.name) {
                    return Err(SyntaxError::new(def.span, format!("duplicate definition `{}`", def.name), vec![]));
                }
                definitions.push(def);
            } else if self.is_kw("entry") {
                self.bump();
                entry = Some(self.ident()?);
            } else if self.is_kw("type") {
                self.alias()?;
            } else {
                return self.error(&["`def`", "`entry`", "`type`"]);
            }
        }
        let entry = match entry {
            Some((name, sp)) => {
                if definitions.iter().all(|d| d.name != name) {
                    return Err(SyntaxError::new(sp, format!("entry `{name}` is not defined"), vec![]));
                }
                name
            }
            None => match definitions.iter().find(|d| d.name == "main").or(definitions.last()) {
                Some(d) => d.name.clone(),
                None => return Err(SyntaxError::new(self.span(), "program has no definitions", vec!["`def`".into()])),
            },
        };
        Ok(SourceProgram { definitions, entry })
    }

    fn alias(&mut self) -> PResult<()> {
        self.expect_kw("type")?;
        let (name, _) = self.ident()?;
        let mut params = Vec::new();
        while let Tok::Ident(_) = self.peek() {
            params.push(self.ident()?.0);
        }
        self.expect(Tok::Eq)?;
        let body = self.ty()?;
        self.aliases.insert(name, Alias { params, body });
        Ok(())
    }

    fn definition(&mut self) -> PResult<Definition> {
        let start = self.expect_kw("def")?;
        let (name, _) = self.ident()?;
        self.expect(Tok::Colon)?;
        let pty = self.ty()?;
        let ty = if pty.is_cart() { Type::Cart(self.to_cart(&pty)?) } else { Type::Lin(self.to_lin(&pty)?) };
        self.expect(Tok::Eq)?;
        // Leading quantifiers of the declared type scope over a body that omits its Λs.
        let saved = self.indices.len();
        if *self.peek() != Tok::BigLambda {
            if let Type::Lin(t) = &ty {
                let mut cur = t;
                while let LinType::Forall(s, _, body) = cur {
                    self.indices.push((s.name.clone(), s.uid));
                    cur = body;
                }
            }
        }
        let body = self.term()?;
        self.indices.truncate(saved);
        let span = start.to(self.prev_span());
        Ok(Definition { name, ty, body, span })
    }

    // ------------------------------------------------------------------ types

    pub fn lin_type(&mut self) -> PResult<LinType> {
        let t = self.ty()?;
        self.to_lin(&t)
    }

    pub fn cart_type(&mut self) -> PResult<CartType> {
        let t = self.ty()?;
        self.to_cart(&t)
    }

    fn sort(&mut self) -> PResult<IndexSort> {
        if self.is_kw("Id") {
            self.bump();
            Ok(IndexSort::Id)
        } else if self.is_kw("Time") {
            self.bump();
            Ok(IndexSort::Time)
        } else {
            self.error(&["`Id`", "`Time`"])
        }
    }

    /// `(i, j : Id)(t : Time)` groups; returns binders already pushed on the index scope.
    fn index_binders(&mut self) -> PResult<Vec<(Symbol, IndexSort)>> {
        let mut out = Vec::new();
        while *self.peek() == Tok::LParen {
            self.bump();
            let mut names = vec![self.ident()?.0];
            while *self.peek() == Tok::Comma {
                self.bump();
                names.push(self.ident()?.0);
            }
            self.expect(Tok::Colon)?;
            let sort = self.sort()?;
            self.expect(Tok::RParen)?;
            for n in names {
                let s = self.fresh(&n);
                self.indices.push((n, s.uid));
                out.push((s, sort));
            }
        }
        if out.is_empty() {
            return self.error(&["`(`"]);
        }
        Ok(out)
    }

    fn ty(&mut self) -> PResult<PTy> {
        match self.peek() {
            Tok::Forall | Tok::Exists => {
                let exists = *self.peek() == Tok::Exists;
                self.bump();
                let saved = self.indices.len();
                let binders = self.index_binders()?;
                self.expect(Tok::Dot)?;
                let mut body = self.ty()?;
                self.indices.truncate(saved);
                for (s, sort) in binders.into_iter().rev() {
                    body = if exists { PTy::Exists(s, sort, Box::new(body)) } else { PTy::Forall(s, sort, Box::new(body)) };
                }
                Ok(body)
            }
            Tok::Nu => {
                self.bump();
                let (name, _) = self.ident()?;
                let s = self.fresh(&name);
                self.expect(Tok::Dot)?;
                self.tyvars.push((name, s.uid));
                let body = self.ty();
                self.tyvars.pop();
                Ok(PTy::Nu(s, Box::new(body?)))
            }
            _ => {
                let lhs = self.ty_plus()?;
                match self.peek() {
                    Tok::Lolli => {
                        self.bump();
                        Ok(PTy::Lolli(Box::new(lhs), Box::new(self.ty()?)))
                    }
                    Tok::Arrow => {
                        self.bump();
                        Ok(PTy::Arrow(Box::new(lhs), Box::new(self.ty()?)))
                    }
                    _ => Ok(lhs),
                }
            }
        }
    }

    fn ty_plus(&mut self) -> PResult<PTy> {
        let lhs = self.ty_tensor()?;
        if *self.peek() == Tok::Plus {
            self.bump();
            let rhs = self.ty_plus()?;
            Ok(PTy::Plus(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn ty_tensor(&mut self) -> PResult<PTy> {
        let mut lhs = self.ty_at()?;
        while *self.peek() == Tok::Tensor {
            self.bump();
            let rhs = self.ty_at()?;
            lhs = PTy::Tensor(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ty_at(&mut self) -> PResult<PTy> {
        let mut t = self.ty_unary()?;
        while *self.peek() == Tok::At {
            self.bump();
            let i = self.index_atom()?;
            t = PTy::At(Box::new(t), i);
        }
        Ok(t)
    }

    fn ty_unary(&mut self) -> PResult<PTy> {
        match self.peek().clone() {
            Tok::Diamond => {
                self.bump();
                Ok(PTy::Diamond(Box::new(self.ty_unary()?)))
            }
            Tok::Ident(k) if k == "F" => {
                self.bump();
                Ok(PTy::F(Box::new(self.ty_unary()?)))
            }
            Tok::Ident(k) if k == "G" => {
                self.bump();
                Ok(PTy::G(Box::new(self.ty_unary()?)))
            }
            Tok::Ident(k) if k == "Widget" => {
                self.bump();
                Ok(PTy::Widget(self.index_atom()?))
            }
            Tok::Ident(k) if k == "Prefix" => {
                self.bump();
                let i = self.index_atom()?;
                let t = self.index_atom()?;
                Ok(PTy::Prefix(i, t))
            }
            Tok::Ident(k) if self.aliases.contains_key(&k) && Self::lookup(&self.tyvars, &k).is_none() => {
                self.bump();
                let n = self.aliases[&k].params.len();
                let mut args = Vec::with_capacity(n);
                for _ in 0..n {
                    args.push(self.ty_unary()?);
                }
                let alias = &self.aliases[&k];
                let mut body = alias.body.clone();
                for (p, a) in alias.params.iter().zip(&args) {
                    body = body.subst_var(p, a);
                }
                Ok(body)
            }
            _ => self.ty_atom(),
        }
    }

    fn ty_atom(&mut self) -> PResult<PTy> {
        match self.peek().clone() {
            Tok::Ident(k) if k == "I" => {
                self.bump();
                Ok(PTy::I)
            }
            Tok::Ident(k) if k == "Color" => {
                self.bump();
                Ok(PTy::Base(BaseType::Color))
            }
            Tok::Ident(k) if k == "Char" => {
                self.bump();
                Ok(PTy::Base(BaseType::Char))
            }
            Tok::Num(1) => {
                self.bump();
                Ok(PTy::One)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(_) => {
                let (name, _) = self.ident()?;
                let uid = Self::lookup(&self.tyvars, &name).unwrap_or(0);
                Ok(PTy::Var(Symbol::new(name, uid)))
            }
            _ => self.error(&["type"]),
        }
    }

    fn to_lin(&self, t: &PTy) -> PResult<LinType> {
        let b = |t: &PTy| self.to_lin(t).map(Box::new);
        Ok(match t {
            PTy::I => LinType::I,
            PTy::Var(s) => LinType::TyVar(s.clone()),
            PTy::Tensor(a, c) => LinType::Tensor(b(a)?, b(c)?),
            PTy::Plus(a, c) => LinType::Plus(b(a)?, b(c)?),
            PTy::Lolli(a, c) => LinType::Lolli(b(a)?, b(c)?),
            PTy::Diamond(a) => LinType::Diamond(b(a)?),
            PTy::At(a, i) => LinType::At(b(a)?, i.clone()),
            PTy::F(x) => LinType::F(Box::new(self.to_cart(x)?)),
            PTy::Forall(s, o, a) => LinType::Forall(s.clone(), *o, b(a)?),
            PTy::Exists(s, o, a) => LinType::Exists(s.clone(), *o, b(a)?),
            PTy::Widget(i) => LinType::Widget(i.clone()),
            PTy::Prefix(i, t) => LinType::Prefix(i.clone(), t.clone()),
            PTy::Nu(s, a) => LinType::Nu(s.clone(), b(a)?),
            PTy::One | PTy::Base(_) | PTy::Arrow(..) | PTy::G(_) => {
                return Err(SyntaxError::new(
                    self.prev_span(),
                    "Cartesian type used where a linear type is expected (wrap it in `F`)",
                    vec!["linear type".into()],
                ))
            }
        })
    }

    fn to_cart(&self, t: &PTy) -> PResult<CartType> {
        Ok(match t {
            PTy::One => CartType::Unit,
            PTy::Base(b) => CartType::Base(*b),
            PTy::Arrow(a, c) => CartType::Arrow(Box::new(self.to_cart(a)?), Box::new(self.to_cart(c)?)),
            PTy::G(a) => CartType::G(Box::new(self.to_lin(a)?)),
            _ => {
                return Err(SyntaxError::new(
                    self.prev_span(),
                    "linear type used where a Cartesian type is expected (wrap it in `G`)",
                    vec!["Cartesian type".into()],
                ))
            }
        })
    }

    fn annotation(&mut self) -> PResult<LinOrCart> {
        let t = self.ty()?;
        if t.is_cart() {
            Ok(LinOrCart::Cart(self.to_cart(&t)?))
        } else {
            Ok(LinOrCart::Lin(self.to_lin(&t)?))
        }
    }

    // ---------------------------------------------------------------- indices

    fn index_atom(&mut self) -> PResult<IndexTerm> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(IndexTerm::TimeLit(n))
            }
            Tok::IdLit(n) => {
                self.bump();
                Ok(IndexTerm::IdLit(n))
            }
            Tok::Meta(n) => {
                self.bump();
                Ok(IndexTerm::Meta(n))
            }
            Tok::LParen => {
                self.bump();
                let i = self.index_atom()?;
                self.expect(Tok::RParen)?;
                Ok(i)
            }
            Tok::Ident(_) => {
                let (name, _) = self.ident()?;
                let uid = Self::lookup(&self.indices, &name).unwrap_or(0);
                Ok(IndexTerm::Var(Symbol::new(name, uid)))
            }
            _ => self.error(&["index"]),
        }
    }

    // ------------------------------------------------------------------ terms

    pub fn term(&mut self) -> PResult<Term> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Lambda => {
                self.bump();
                let mut binders = Vec::new();
                loop {
                    match self.peek() {
                        Tok::LParen => {
                            self.bump();
                            let (name, _) = self.ident()?;
                            self.expect(Tok::Colon)?;
                            let ann = self.annotation()?;
                            self.expect(Tok::RParen)?;
                            binders.push((name, Some(ann)));
                        }
                        Tok::Ident(_) => {
                            let (name, _) = self.ident()?;
                            binders.push((name, None));
                        }
                        _ => break,
                    }
                }
                if binders.is_empty() {
                    return self.error(&["binder"]);
                }
                self.expect(Tok::Dot)?;
                let saved = self.terms.len();
                let syms: Vec<_> = binders
                    .into_iter()
                    .map(|(n, a)| {
                        let s = self.fresh(&n);
                        self.terms.push((n, s.uid));
                        (s, a)
                    })
                    .collect();
                let body = self.term();
                self.terms.truncate(saved);
                let mut body = body?;
                for (s, ann) in syms.into_iter().rev() {
                    let span = start.to(body.span);
                    body = Term::new(TermKind::Lam(s, ann, Box::new(body)), span);
                }
                Ok(body)
            }
            Tok::BigLambda => {
                self.bump();
                let saved = self.indices.len();
                let binders = self.index_binders()?;
                self.expect(Tok::Dot)?;
                let body = self.term();
                self.indices.truncate(saved);
                let mut body = body?;
                for (s, sort) in binders.into_iter().rev() {
                    let span = start.to(body.span);
                    body = Term::new(TermKind::IndexLam(s, sort, Box::new(body)), span);
                }
                Ok(body)
            }
            Tok::Ident(k) if k == "let" => self.let_term(),
            Tok::Ident(k) if k == "select" => self.select_term(),
            Tok::Ident(k) if k == "case" => self.case_term(),
            _ => self.at_term(),
        }
    }

    fn at_term(&mut self) -> PResult<Term> {
        let t = self.app_term()?;
        if *self.peek() == Tok::At {
            self.bump();
            let i = self.index_atom()?;
            let span = t.span.to(self.prev_span());
            Ok(Term::new(TermKind::At(Box::new(t), i), span))
        } else {
            Ok(t)
        }
    }

    fn starts_atom(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !KEYWORDS.contains(&s.as_str()) || s == "pack",
            Tok::LParen | Tok::UnitLit | Tok::StarLit | Tok::Char(_) | Tok::LBrack => true,
            _ => false,
        }
    }

    fn app_term(&mut self) -> PResult<Term> {
        let start = self.span();
        let prefix = match self.peek() {
            Tok::Ident(k) => match k.as_str() {
                "evt" | "fold" | "unfold" | "runG" | "G" | "F" | "inl" | "inr" => Some(k.clone()),
                _ => None,
            },
            _ => None,
        };
        let mut head = if let Some(kw) = prefix {
            self.bump();
            let arg = Box::new(self.atom()?);
            let span = start.to(arg.span);
            let kind = match kw.as_str() {
                "evt" => TermKind::Evt(arg),
                "fold" => TermKind::Fold(arg),
                "unfold" => TermKind::Unfold(arg),
                "runG" => TermKind::RunG(arg),
                "G" => TermKind::GIntro(arg),
                "F" => TermKind::FIntro(arg),
                "inl" => TermKind::Inl(arg),
                _ => TermKind::Inr(arg),
            };
            Term::new(kind, span)
        } else {
            self.atom()?
        };
        while self.starts_atom() {
            if *self.peek() == Tok::LBrack {
                self.bump();
                let i = self.index_atom()?;
                self.expect(Tok::RBrack)?;
                let span = head.span.to(self.prev_span());
                head = Term::new(TermKind::IndexApp(Box::new(head), i), span);
            } else {
                let arg = self.atom()?;
                let span = head.span.to(arg.span);
                head = Term::new(TermKind::App(Box::new(head), Box::new(arg)), span);
            }
        }
        Ok(head)
    }

    fn atom(&mut self) -> PResult<Term> {
        let start = self.span();
        match self.peek().clone() {
            Tok::UnitLit => {
                self.bump();
                Ok(Term::new(TermKind::Unit, start))
            }
            Tok::StarLit => {
                self.bump();
                Ok(Term::new(TermKind::Star, start))
            }
            Tok::Char(c) => {
                self.bump();
                Ok(Term::new(TermKind::CharLit(c), start))
            }
            Tok::Ident(k) if k == "pack" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let i = self.index_atom()?;
                self.expect(Tok::Comma)?;
                let t = self.term()?;
                let end = self.expect(Tok::RParen)?;
                Ok(Term::new(TermKind::Pack(i, Box::new(t)), start.to(end)))
            }
            Tok::LParen => {
                self.bump();
                if *self.peek() == Tok::RParen {
                    let end = self.bump().span;
                    return Ok(Term::new(TermKind::Unit, start.to(end)));
                }
                let t = self.term()?;
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                        let u = self.term()?;
                        let end = self.expect(Tok::RParen)?;
                        Ok(Term::new(TermKind::Pair(Box::new(t), Box::new(u)), start.to(end)))
                    }
                    Tok::Colon => {
                        self.bump();
                        let ann = self.annotation()?;
                        let end = self.expect(Tok::RParen)?;
                        Ok(Term::new(TermKind::Annot(Box::new(t), ann), start.to(end)))
                    }
                    _ => {
                        self.expect(Tok::RParen)?;
                        Ok(t)
                    }
                }
            }
            Tok::Ident(_) => {
                let (name, sp) = self.ident()?;
                if let Some(uid) = Self::lookup(&self.terms, &name) {
                    Ok(Term::new(TermKind::Var(Symbol::new(name, uid)), sp))
                } else if let Some(c) = Color::from_name(&name) {
                    Ok(Term::new(TermKind::ColorLit(c), sp))
                } else {
                    Ok(Term::new(TermKind::Global(name), sp))
                }
            }
            _ => self.error(&["term"]),
        }
    }

    fn select_term(&mut self) -> PResult<Term> {
        let start = self.expect_kw("select")?;
        let left = self.app_term()?;
        self.expect_kw("as")?;
        let (ln, _) = self.ident()?;
        self.expect(Tok::FatArrow)?;
        let left_bind = self.fresh(&ln);
        let left_body = self.scoped_term(&[&left_bind])?;
        self.expect(Tok::Bar)?;
        let right = self.app_term()?;
        self.expect_kw("as")?;
        let (rn, _) = self.ident()?;
        self.expect(Tok::FatArrow)?;
        let right_bind = self.fresh(&rn);
        let right_body = self.scoped_term(&[&right_bind])?;
        let span = start.to(right_body.span);
        Ok(Term::new(
            TermKind::Select(Box::new(SelectParts { left, left_bind, left_body, right, right_bind, right_body })),
            span,
        ))
    }

    fn case_term(&mut self) -> PResult<Term> {
        let start = self.expect_kw("case")?;
        let scrut = self.app_term()?;
        self.expect_kw("of")?;
        self.expect_kw("inl")?;
        let (ln, _) = self.ident()?;
        self.expect(Tok::FatArrow)?;
        let ls = self.fresh(&ln);
        let lb = self.scoped_term(&[&ls])?;
        self.expect(Tok::Bar)?;
        self.expect_kw("inr")?;
        let (rn, _) = self.ident()?;
        self.expect(Tok::FatArrow)?;
        let rs = self.fresh(&rn);
        let rb = self.scoped_term(&[&rs])?;
        let span = start.to(rb.span);
        Ok(Term::new(TermKind::Case(Box::new(scrut), ls, Box::new(lb), rs, Box::new(rb)), span))
    }

    fn scoped_term(&mut self, syms: &[&Symbol]) -> PResult<Term> {
        let saved = self.terms.len();
        for s in syms {
            self.terms.push((s.name.clone(), s.uid));
        }
        let t = self.term();
        self.terms.truncate(saved);
        t
    }

    fn let_term(&mut self) -> PResult<Term> {
        let start = self.expect_kw("let")?;
        let pat = self.pattern()?;
        self.expect(Tok::Eq)?;
        let rhs = self.term()?;
        self.expect_kw("in")?;
        // Bring pattern binders into scope for the body.
        let (saved_t, saved_i) = (self.terms.len(), self.indices.len());
        bind_pattern(&pat, &mut self.terms, &mut self.indices);
        let body = self.term();
        self.terms.truncate(saved_t);
        self.indices.truncate(saved_i);
        let body = body?;
        let span = start.to(body.span);
        let (rhs, body) = (Box::new(rhs), Box::new(body));
        let kind = match pat {
            Pattern::Var(x) => TermKind::Let(x, rhs, body),
            Pattern::Unit => TermKind::LetUnit(rhs, body),
            Pattern::F(x) => TermKind::LetF(x, rhs, body),
            Pattern::Evt(p) => match *p {
                Pattern::Var(x) => TermKind::LetEvt(x, rhs, body),
                p => TermKind::LetPat(Pattern::Evt(Box::new(p)), rhs, body),
            },
            Pattern::Pack(s, p) => match *p {
                Pattern::Var(x) => TermKind::LetPack(s, x, rhs, body),
                p => TermKind::LetPat(Pattern::Pack(s, Box::new(p)), rhs, body),
            },
            Pattern::Pair(a, b) => match (*a, *b) {
                (Pattern::Var(x), Pattern::Var(y)) => TermKind::LetPair(x, y, rhs, body),
                (a, b) => TermKind::LetPat(Pattern::Pair(Box::new(a), Box::new(b)), rhs, body),
            },
            Pattern::At(p, i) => match *p {
                Pattern::Var(x) => TermKind::LetAt(x, i, rhs, body),
                Pattern::Unit => TermKind::LetUnitAt(i, rhs, body),
                Pattern::Pair(a, b) => match (*a, *b) {
                    (Pattern::Var(x), Pattern::Var(y)) => TermKind::LetPairAt(x, y, i, rhs, body),
                    (a, b) => TermKind::LetPat(
                        Pattern::At(Box::new(Pattern::Pair(Box::new(a), Box::new(b))), i),
                        rhs,
                        body,
                    ),
                },
                p => TermKind::LetPat(Pattern::At(Box::new(p), i), rhs, body),
            },
        };
        Ok(Term::new(kind, span))
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        let p = self.pattern_atom()?;
        if *self.peek() == Tok::At {
            self.bump();
            let i = self.index_atom()?;
            Ok(Pattern::At(Box::new(p), i))
        } else {
            Ok(p)
        }
    }

    fn pattern_atom(&mut self) -> PResult<Pattern> {
        match self.peek().clone() {
            Tok::UnitLit => {
                self.bump();
                Ok(Pattern::Unit)
            }
            Tok::Ident(k) if k == "F" => {
                self.bump();
                let (n, _) = self.ident()?;
                Ok(Pattern::F(self.fresh(&n)))
            }
            Tok::Ident(k) if k == "evt" => {
                self.bump();
                Ok(Pattern::Evt(Box::new(self.pattern_atom()?)))
            }
            Tok::Ident(k) if k == "pack" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let (n, _) = self.ident()?;
                let s = self.fresh(&n);
                self.expect(Tok::Comma)?;
                // The witness scopes over the rest of the pattern (`pack(x, a @ x)`).
                self.indices.push((n, s.uid));
                let p = self.pattern();
                self.indices.pop();
                let p = p?;
                self.expect(Tok::RParen)?;
                Ok(Pattern::Pack(s, Box::new(p)))
            }
            Tok::LParen => {
                self.bump();
                if *self.peek() == Tok::RParen {
                    self.bump();
                    return Ok(Pattern::Unit);
                }
                // `(x, c @ x)` is sugar for unpacking an existential.
                if let (Tok::Ident(x), Tok::Comma) = (self.peek().clone(), self.peek_at(1).clone()) {
                    if !KEYWORDS.contains(&x.as_str()) && self.looks_like_pack(&x) {
                        self.bump();
                        self.bump();
                        let s = self.fresh(&x);
                        self.indices.push((x, s.uid));
                        let p = self.pattern();
                        self.indices.pop();
                        let p = p?;
                        self.expect(Tok::RParen)?;
                        return Ok(Pattern::Pack(s, Box::new(p)));
                    }
                }
                let a = self.pattern()?;
                if *self.peek() == Tok::Comma {
                    self.bump();
                    let b = self.pattern()?;
                    self.expect(Tok::RParen)?;
                    Ok(Pattern::Pair(Box::new(a), Box::new(b)))
                } else {
                    self.expect(Tok::RParen)?;
                    Ok(a)
                }
            }
            Tok::Ident(_) => {
                let (n, _) = self.ident()?;
                Ok(Pattern::Var(self.fresh(&n)))
            }
            _ => self.error(&["pattern"]),
        }
    }

    /// After `(x ,` : does the second component end in `@ x)`?
    fn looks_like_pack(&self, x: &str) -> bool {
        let mut depth = 0i32;
        let mut k = self.pos + 2;
        while k + 2 < self.toks.len() {
            match &self.toks[k].tok {
                Tok::LParen => depth += 1,
                Tok::RParen if depth == 0 => return false,
                Tok::RParen => depth -= 1,
                Tok::At if depth == 0 => {
                    return matches!(&self.toks[k + 1].tok, Tok::Ident(n) if n == x)
                        && self.toks[k + 2].tok == Tok::RParen;
                }
                Tok::Eq | Tok::Eof => return false,
                _ => {}
            }
            k += 1;
        }
        false
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }
}

fn bind_pattern(p: &Pattern, terms: &mut Vec<(String, u32)>, indices: &mut Vec<(String, u32)>) {
    match p {
        Pattern::Var(s) | Pattern::F(s) => terms.push((s.name.clone(), s.uid)),
        Pattern::Unit => {}
        Pattern::Pair(a, b) => {
            bind_pattern(a, terms, indices);
            bind_pattern(b, terms, indices);
        }
        Pattern::At(a, _) | Pattern::Evt(a) => bind_pattern(a, terms, indices),
        Pattern::Pack(s, a) => {
            indices.push((s.name.clone(), s.uid));
            bind_pattern(a, terms, indices);
        }
    }
}

pub fn parse(src: &str) -> Result<SourceProgram, SyntaxError> {
    Parser::new(src)?.program()
}

/// Parses a standalone term with no enclosing binders.
pub fn parse_term(src: &str) -> Result<Term, SyntaxError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    if !p.at_eof() {
        return p.error(&["end of input"]);
    }
    Ok(t)
}

pub fn parse_lin_type(src: &str) -> Result<LinType, SyntaxError> {
    let mut p = Parser::new(src)?;
    let t = p.lin_type()?;
    if !p.at_eof() {
        return p.error(&["end of input"]);
    }
    Ok(t)
}
