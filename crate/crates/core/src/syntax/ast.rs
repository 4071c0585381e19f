//! Abstract syntax for indices, Cartesian and linear types, and terms.

use std::fmt;

use serde::Serialize;

/// Byte range plus the 1-based line/column of its start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn to(self, other: Span) -> Span {
        Span { start: self.start, end: other.end.max(self.end), line: self.line, col: self.col }
    }
}

/// A bound name. `uid` is unique per binding site after parsing; globals use uid 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub name: String,
    pub uid: u32,
}

impl Symbol {
    pub fn new(name: impl Into<String>, uid: u32) -> Self {
        Symbol { name: name.into(), uid }
    }

    pub fn global(name: impl Into<String>) -> Self {
        Symbol { name: name.into(), uid: 0 }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum IndexSort {
    Id,
    Time,
}

impl fmt::Display for IndexSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexSort::Id => f.write_str("Id"),
            IndexSort::Time => f.write_str("Time"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IndexTerm {
    Var(Symbol),
    TimeLit(u64),
    IdLit(u64),
    /// Internal to the semantics; never produced by the parser.
    Infinity,
    /// Inference metavariable standing for an omitted index argument.
    Meta(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum BaseType {
    Color,
    Char,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CartType {
    Unit,
    Arrow(Box<CartType>, Box<CartType>),
    G(Box<LinType>),
    Base(BaseType),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LinType {
    I,
    Tensor(Box<LinType>, Box<LinType>),
    /// Additive sum; needed to state the linearity-of-time axiom.
    Plus(Box<LinType>, Box<LinType>),
    Lolli(Box<LinType>, Box<LinType>),
    Diamond(Box<LinType>),
    At(Box<LinType>, IndexTerm),
    F(Box<CartType>),
    Forall(Symbol, IndexSort, Box<LinType>),
    Exists(Symbol, IndexSort, Box<LinType>),
    Widget(IndexTerm),
    Prefix(IndexTerm, IndexTerm),
    Nu(Symbol, Box<LinType>),
    TyVar(Symbol),
}

/// A declared type of a top-level definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Type {
    Lin(LinType),
    Cart(CartType),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Color {
    Red,
    Blue,
    Green,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::Red, Color::Blue, Color::Green];

    pub fn from_name(name: &str) -> Option<Color> {
        match name {
            "Red" => Some(Color::Red),
            "Blue" => Some(Color::Blue),
            "Green" => Some(Color::Green),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Color::Red => "Red",
            Color::Blue => "Blue",
            Color::Green => "Green",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Surface patterns; only nested patterns survive parsing, simple ones become core lets.
#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Var(Symbol),
    Unit,
    Pair(Box<Pattern>, Box<Pattern>),
    At(Box<Pattern>, IndexTerm),
    F(Symbol),
    Evt(Box<Pattern>),
    Pack(Symbol, Box<Pattern>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub kind: TermKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TermKind {
    /// Locally bound variable (linear or Cartesian).
    Var(Symbol),
    /// Builtin or top-level definition.
    Global(String),
    Lam(Symbol, Option<LinOrCart>, Box<Term>),
    App(Box<Term>, Box<Term>),
    /// Linear unit `⟨⟩`.
    Unit,
    /// Cartesian unit `⋆`.
    Star,
    ColorLit(Color),
    CharLit(char),
    LetUnit(Box<Term>, Box<Term>),
    Pair(Box<Term>, Box<Term>),
    LetPair(Symbol, Symbol, Box<Term>, Box<Term>),
    Inl(Box<Term>),
    Inr(Box<Term>),
    Case(Box<Term>, Symbol, Box<Term>, Symbol, Box<Term>),
    Evt(Box<Term>),
    LetEvt(Symbol, Box<Term>, Box<Term>),
    At(Box<Term>, IndexTerm),
    LetAt(Symbol, IndexTerm, Box<Term>, Box<Term>),
    LetUnitAt(IndexTerm, Box<Term>, Box<Term>),
    LetPairAt(Symbol, Symbol, IndexTerm, Box<Term>, Box<Term>),
    GIntro(Box<Term>),
    RunG(Box<Term>),
    FIntro(Box<Term>),
    LetF(Symbol, Box<Term>, Box<Term>),
    IndexLam(Symbol, IndexSort, Box<Term>),
    IndexApp(Box<Term>, IndexTerm),
    Pack(IndexTerm, Box<Term>),
    LetPack(Symbol, Symbol, Box<Term>, Box<Term>),
    Select(Box<SelectParts>),
    Fold(Box<Term>),
    Unfold(Box<Term>),
    Let(Symbol, Box<Term>, Box<Term>),
    Annot(Box<Term>, LinOrCart),
    /// Surface-only nested pattern let; removed by desugaring.
    LetPat(Pattern, Box<Term>, Box<Term>),
}

/// Binary select: both scrutinees are variables so the residual event can be named.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectParts {
    pub left: Term,
    pub left_bind: Symbol,
    pub left_body: Term,
    pub right: Term,
    pub right_bind: Symbol,
    pub right_body: Term,
}

/// Type annotation on a binder or term.
#[derive(Debug, Clone, PartialEq)]
pub enum LinOrCart {
    Lin(LinType),
    Cart(CartType),
}

impl Term {
    pub fn new(kind: TermKind, span: Span) -> Self {
        Term { kind, span }
    }

    pub fn boxed(kind: TermKind, span: Span) -> Box<Term> {
        Box::new(Term { kind, span })
    }

    /// Immediate subterms, in source order.
    pub fn children(&self) -> Vec<&Term> {
        use TermKind::*;
        match &self.kind {
            Var(_) | Global(_) | Unit | Star | ColorLit(_) | CharLit(_) => vec![],
            Lam(_, _, b) | Inl(b) | Inr(b) | Evt(b) | At(b, _) | GIntro(b) | RunG(b) | FIntro(b)
            | IndexLam(_, _, b) | IndexApp(b, _) | Pack(_, b) | Fold(b) | Unfold(b) | Annot(b, _) => {
                vec![b]
            }
            App(a, b)
            | LetUnit(a, b)
            | Pair(a, b)
            | LetPair(_, _, a, b)
            | LetEvt(_, a, b)
            | LetAt(_, _, a, b)
            | LetUnitAt(_, a, b)
            | LetPairAt(_, _, _, a, b)
            | LetF(_, a, b)
            | LetPack(_, _, a, b)
            | Let(_, a, b)
            | LetPat(_, a, b) => vec![a, b],
            Case(s, _, l, _, r) => vec![s, l, r],
            Select(p) => vec![&p.left, &p.left_body, &p.right, &p.right_body],
        }
    }

    /// Pre-order traversal.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Term)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn is_core(&self) -> bool {
        let mut core = true;
        self.walk(&mut |t| {
            if matches!(t.kind, TermKind::LetPat(..)) {
                core = false;
            }
        });
        core
    }
}

/// A top-level definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Definition {
    pub name: String,
    pub ty: Type,
    pub body: Term,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceProgram {
    pub definitions: Vec<Definition>,
    pub entry: String,
}

impl SourceProgram {
    pub fn definition(&self, name: &str) -> Option<&Definition> {
        self.definitions.iter().find(|d| d.name == name)
    }
}
