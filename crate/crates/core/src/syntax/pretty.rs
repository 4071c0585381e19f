//! Canonical printer for core syntax. Output reparses to an alpha-equal AST.
//!
//! Binders keep their source name unless that name is already visible in the same
//! namespace (or names a global), in which case the uid is appended: `x'7`.

use std::collections::HashSet;
use std::fmt;

use super::ast::*;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Ns {
    Term,
    Index,
    Ty,
}

#[derive(Default)]
struct Printer {
    scope: Vec<(Ns, u32, String)>,
    reserved: HashSet<String>,
}

impl Printer {
    fn bind(&mut self, ns: Ns, s: &Symbol) -> String {
        let clash = |n: &str| {
            self.reserved.contains(n) || self.scope.iter().any(|(k, u, p)| *k == ns && *u != s.uid && p == n)
        };
        let name = if clash(&s.name) { format!("{}'{}", s.name, s.uid) } else { s.name.clone() };
        self.scope.push((ns, s.uid, name.clone()));
        name
    }

    fn name(&self, ns: Ns, s: &Symbol) -> String {
        self.scope
            .iter()
            .rev()
            .find(|(k, u, _)| *k == ns && *u == s.uid && s.uid != 0)
            .map(|(_, _, p)| p.clone())
            .unwrap_or_else(|| s.name.clone())
    }

    fn mark(&self) -> usize {
        self.scope.len()
    }

    fn reset(&mut self, m: usize) {
        self.scope.truncate(m);
    }

    // ----------------------------------------------------------------- indices

    fn index(&self, i: &IndexTerm) -> String {
        match i {
            IndexTerm::Var(s) => self.name(Ns::Index, s),
            IndexTerm::TimeLit(n) => n.to_string(),
            IndexTerm::IdLit(n) => format!("#{n}"),
            IndexTerm::Infinity => "∞".into(),
            IndexTerm::Meta(n) => format!("?{n}"),
        }
    }

    // ------------------------------------------------------------------- types

    fn quantifiers(&mut self, sym: &str, mut t: &LinType, exists: bool) -> (String, &'static str, LinType) {
        let mut head = sym.to_string();
        loop {
            match (t, exists) {
                (LinType::Forall(s, o, b), false) | (LinType::Exists(s, o, b), true) => {
                    let n = self.bind(Ns::Index, s);
                    head.push_str(&format!("({n}:{o})"));
                    t = b;
                }
                _ => return (head, "", t.clone()),
            }
        }
    }

    fn lin(&mut self, t: &LinType, prec: u8) -> String {
        let (s, p) = self.lin_inner(t);
        if p < prec {
            format!("({s})")
        } else {
            s
        }
    }

    fn lin_inner(&mut self, t: &LinType) -> (String, u8) {
        match t {
            LinType::Forall(..) | LinType::Exists(..) => {
                let m = self.mark();
                let exists = matches!(t, LinType::Exists(..));
                let (head, _, body) = self.quantifiers(if exists { "∃" } else { "∀" }, t, exists);
                let b = self.lin(&body, 0);
                self.reset(m);
                (format!("{head}. {b}"), 0)
            }
            LinType::Nu(s, b) => {
                let m = self.mark();
                let n = self.bind(Ns::Ty, s);
                let b = self.lin(b, 0);
                self.reset(m);
                (format!("ν {n}. {b}"), 0)
            }
            LinType::Lolli(a, b) => (format!("{} ⊸ {}", self.lin(a, 1), self.lin(b, 0)), 0),
            LinType::Plus(a, b) => (format!("{} ⊕ {}", self.lin(a, 2), self.lin(b, 1)), 1),
            LinType::Tensor(a, b) => (format!("{} ⊗ {}", self.lin(a, 2), self.lin(b, 3)), 2),
            LinType::At(a, i) => (format!("{} @ {}", self.lin(a, 3), self.index_atom(i)), 3),
            LinType::Diamond(a) => (format!("◇{}", self.lin(a, 4)), 4),
            LinType::F(x) => (format!("F {}", self.cart(x, 4)), 4),
            LinType::Widget(i) => (format!("Widget {}", self.index_atom(i)), 4),
            LinType::Prefix(i, j) => (format!("Prefix {} {}", self.index_atom(i), self.index_atom(j)), 4),
            LinType::I => ("I".into(), 5),
            LinType::TyVar(s) => (self.name(Ns::Ty, s), 5),
        }
    }

    fn index_atom(&self, i: &IndexTerm) -> String {
        self.index(i)
    }

    fn cart(&mut self, t: &CartType, prec: u8) -> String {
        let (s, p) = match t {
            CartType::Arrow(a, b) => (format!("{} → {}", self.cart(a, 1), self.cart(b, 0)), 0),
            CartType::G(a) => (format!("G {}", self.lin(a, 4)), 4),
            CartType::Unit => ("1".into(), 5),
            CartType::Base(BaseType::Color) => ("Color".into(), 5),
            CartType::Base(BaseType::Char) => ("Char".into(), 5),
        };
        if p < prec {
            format!("({s})")
        } else {
            s
        }
    }

    fn annot(&mut self, a: &LinOrCart) -> String {
        match a {
            LinOrCart::Lin(t) => self.lin(t, 0),
            LinOrCart::Cart(t) => self.cart(t, 0),
        }
    }

    // ------------------------------------------------------------------- terms

    fn pattern(&mut self, p: &Pattern) -> String {
        match p {
            Pattern::Var(s) => self.bind(Ns::Term, s),
            Pattern::Unit => "⟨⟩".into(),
            Pattern::Pair(a, b) => {
                let a = self.pattern(a);
                let b = self.pattern(b);
                format!("({a}, {b})")
            }
            Pattern::At(a, i) => {
                let i = self.index(i);
                let a = match **a {
                    Pattern::At(..) => format!("({})", self.pattern(a)),
                    _ => self.pattern(a),
                };
                format!("{a} @ {i}")
            }
            Pattern::F(s) => format!("F {}", self.bind(Ns::Term, s)),
            Pattern::Evt(a) => {
                let inner = match **a {
                    Pattern::At(..) => format!("({})", self.pattern(a)),
                    _ => self.pattern(a),
                };
                format!("evt {inner}")
            }
            Pattern::Pack(s, a) => {
                let n = self.bind(Ns::Index, s);
                format!("pack({n}, {})", self.pattern(a))
            }
        }
    }

    fn term(&mut self, t: &Term, prec: u8) -> String {
        let (s, p) = self.term_inner(t);
        if p < prec {
            format!("({s})")
        } else {
            s
        }
    }

    fn let_form(&mut self, binder: impl FnOnce(&mut Self) -> String, rhs: &Term, body: &Term) -> (String, u8) {
        let r = self.term(rhs, 0);
        let m = self.mark();
        let b = binder(self);
        let body = self.term(body, 0);
        self.reset(m);
        (format!("let {b} = {r} in\n{body}"), 0)
    }

    fn term_inner(&mut self, t: &Term) -> (String, u8) {
        use TermKind::*;
        match &t.kind {
            Var(s) => (self.name(Ns::Term, s), 3),
            Global(g) => (g.clone(), 3),
            Unit => ("⟨⟩".into(), 3),
            Star => ("⋆".into(), 3),
            ColorLit(c) => (c.name().into(), 3),
            CharLit(c) => (format!("'{c}'"), 3),
            Pair(a, b) => (format!("({}, {})", self.term(a, 0), self.term(b, 0)), 3),
            Annot(a, ty) => (format!("({} : {})", self.term(a, 0), self.annot(ty)), 3),
            Pack(i, a) => (format!("pack({}, {})", self.index(i), self.term(a, 0)), 3),
            App(f, a) => (format!("{} {}", self.term(f, 2), self.term(a, 3)), 2),
            IndexApp(f, i) => (format!("{} [{}]", self.term(f, 2), self.index(i)), 2),
            Evt(a) => (format!("evt {}", self.term(a, 3)), 2),
            Fold(a) => (format!("fold {}", self.term(a, 3)), 2),
            Unfold(a) => (format!("unfold {}", self.term(a, 3)), 2),
            RunG(a) => (format!("runG {}", self.term(a, 3)), 2),
            GIntro(a) => (format!("G {}", self.term(a, 3)), 2),
            FIntro(a) => (format!("F {}", self.term(a, 3)), 2),
            Inl(a) => (format!("inl {}", self.term(a, 3)), 2),
            Inr(a) => (format!("inr {}", self.term(a, 3)), 2),
            At(a, i) => (format!("{} @ {}", self.term(a, 2), self.index(i)), 1),
            Lam(s, ann, body) => {
                let m = self.mark();
                let ann = ann.as_ref().map(|a| self.annot(a));
                let n = self.bind(Ns::Term, s);
                let b = self.term(body, 0);
                self.reset(m);
                match ann {
                    Some(a) => (format!("λ({n} : {a}). {b}"), 0),
                    None => (format!("λ{n}. {b}"), 0),
                }
            }
            IndexLam(s, o, body) => {
                let m = self.mark();
                let n = self.bind(Ns::Index, s);
                let b = self.term(body, 0);
                self.reset(m);
                (format!("Λ({n}:{o}). {b}"), 0)
            }
            Let(x, a, b) => self.let_form(|p| p.bind(Ns::Term, x), a, b),
            LetUnit(a, b) => self.let_form(|_| "⟨⟩".into(), a, b),
            LetPair(x, y, a, b) => self.let_form(
                |p| {
                    let x = p.bind(Ns::Term, x);
                    let y = p.bind(Ns::Term, y);
                    format!("({x}, {y})")
                },
                a,
                b,
            ),
            LetEvt(x, a, b) => self.let_form(|p| format!("evt {}", p.bind(Ns::Term, x)), a, b),
            LetF(x, a, b) => self.let_form(|p| format!("F {}", p.bind(Ns::Term, x)), a, b),
            LetAt(x, i, a, b) => {
                let i = self.index(i);
                self.let_form(|p| format!("{} @ {i}", p.bind(Ns::Term, x)), a, b)
            }
            LetUnitAt(i, a, b) => {
                let i = self.index(i);
                self.let_form(|_| format!("⟨⟩ @ {i}"), a, b)
            }
            LetPairAt(x, y, i, a, b) => {
                let i = self.index(i);
                self.let_form(
                    |p| {
                        let x = p.bind(Ns::Term, x);
                        let y = p.bind(Ns::Term, y);
                        format!("({x}, {y}) @ {i}")
                    },
                    a,
                    b,
                )
            }
            LetPack(s, x, a, b) => self.let_form(
                |p| {
                    let s = p.bind(Ns::Index, s);
                    let x = p.bind(Ns::Term, x);
                    format!("pack({s}, {x})")
                },
                a,
                b,
            ),
            LetPat(pat, a, b) => self.let_form(|p| p.pattern(pat), a, b),
            Case(scrut, l, lb, r, rb) => {
                let s = self.term(scrut, 2);
                let m = self.mark();
                let ln = self.bind(Ns::Term, l);
                let lb = self.term(lb, 0);
                self.reset(m);
                let rn = self.bind(Ns::Term, r);
                let rb = self.term(rb, 0);
                self.reset(m);
                (format!("case {s} of inl {ln} => {lb} | inr {rn} => {rb}"), 0)
            }
            Select(parts) => {
                let l = self.term(&parts.left, 2);
                let m = self.mark();
                let ln = self.bind(Ns::Term, &parts.left_bind);
                let lb = self.term(&parts.left_body, 0);
                self.reset(m);
                let r = self.term(&parts.right, 2);
                let rn = self.bind(Ns::Term, &parts.right_bind);
                let rb = self.term(&parts.right_body, 0);
                self.reset(m);
                (format!("select {l} as {ln} => {lb}\n| {r} as {rn} => {rb}"), 0)
            }
        }
    }
}

fn reserve_globals(p: &mut Printer, t: &Term) {
    t.walk(&mut |s| match &s.kind {
        TermKind::Global(g) => {
            p.reserved.insert(g.clone());
        }
        TermKind::ColorLit(c) => {
            p.reserved.insert(c.name().to_string());
        }
        _ => {}
    });
}

pub fn pretty_index(i: &IndexTerm) -> String {
    Printer::default().index(i)
}

pub fn pretty_lin(t: &LinType) -> String {
    Printer::default().lin(t, 0)
}

pub fn pretty_cart(t: &CartType) -> String {
    Printer::default().cart(t, 0)
}

pub fn pretty_type(t: &Type) -> String {
    match t {
        Type::Lin(t) => pretty_lin(t),
        Type::Cart(t) => pretty_cart(t),
    }
}

pub fn pretty_term(t: &Term) -> String {
    let mut p = Printer::default();
    reserve_globals(&mut p, t);
    p.term(t, 0)
}

fn definition(p: &mut Printer, d: &Definition) -> String {
    let ty = match &d.ty {
        Type::Lin(t) => p.lin(t, 0),
        Type::Cart(t) => p.cart(t, 0),
    };
    // Leading quantifiers of the type scope over a body written without Λ.
    let m = p.mark();
    if !matches!(d.body.kind, TermKind::IndexLam(..)) {
        if let Type::Lin(t) = &d.ty {
            let mut t = t;
            while let LinType::Forall(s, _, b) = t {
                p.bind(Ns::Index, s);
                t = b;
            }
        }
    }
    let body = p.term(&d.body, 0);
    p.reset(m);
    format!("def {} : {} =\n{}\n", d.name, ty, body)
}

pub fn pretty_program(prog: &SourceProgram) -> String {
    let mut p = Printer::default();
    for d in &prog.definitions {
        p.reserved.insert(d.name.clone());
        reserve_globals(&mut p, &d.body);
    }
    let mut out = String::new();
    for d in &prog.definitions {
        out.push_str(&definition(&mut p, d));
        out.push('\n');
    }
    out.push_str(&format!("entry {}\n", prog.entry));
    out
}

impl fmt::Display for IndexTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_index(self))
    }
}

impl fmt::Display for LinType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_lin(self))
    }
}

impl fmt::Display for CartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_cart(self))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_type(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&pretty_term(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, alpha_eq_program, parse, parse_lin_type};

    #[test]
    fn minimal_parentheses_still_reparse() {
        for s in ["F (G (A ⊸ B))", "◇(F Char)", "(A ⊸ B) ⊸ C", "(A ⊗ B) ⊗ C", "(◇A) @ x", "◇(A @ x)", "(A ⊕ B) ⊗ C"] {
            let t = parse_lin_type(s).unwrap();
            let printed = pretty_lin(&t);
            let back = parse_lin_type(&printed).unwrap_or_else(|e| panic!("{printed}: {e}"));
            assert!(alpha_eq(&t, &back), "{s} printed as {printed}");
        }
    }

    #[test]
    fn shadowed_binders_get_distinct_names() {
        let p = parse("def f : Widget #0 ⊸ Widget #0 = λw. let (w, c) = onClick w in let ⟨⟩ = dropEvt c in w\n").unwrap();
        let printed = pretty_program(&p);
        assert!(printed.contains("w'"), "{printed}");
        assert!(alpha_eq_program(&p, &parse(&printed).unwrap()));
    }

    #[test]
    fn program_layout() {
        let p = parse("def main : I = ⟨⟩\n").unwrap();
        assert_eq!(pretty_program(&p), "def main : I =\n⟨⟩\n\nentry main\n");
    }
}
