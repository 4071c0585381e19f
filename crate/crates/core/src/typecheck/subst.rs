//! Capture-avoiding substitution of indices, type variables and terms.

use std::collections::{BTreeMap, HashSet};

use crate::syntax::ast::*;

/// Simultaneous index substitution ζ, keyed by the substituted variable.
pub type IndexSubst = BTreeMap<Symbol, IndexTerm>;

/// The three term-level substitution kinds; all share one syntactic operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubstKind {
    CartIntoCart,
    CartIntoLin,
    LinIntoLin,
}

fn index_vars(i: &IndexTerm, out: &mut HashSet<u32>) {
    if let IndexTerm::Var(s) = i {
        out.insert(s.uid);
    }
}

struct IndexSubster {
    map: IndexSubst,
    /// Metavariable solutions applied alongside the substitution.
    metas: BTreeMap<u32, IndexTerm>,
    /// Uids free in the range of the substitution.
    range_vars: HashSet<u32>,
    next_uid: u32,
}

impl IndexSubster {
    fn new(map: &IndexSubst) -> Self {
        let mut range_vars = HashSet::new();
        let mut max = 0;
        for (k, v) in map {
            index_vars(v, &mut range_vars);
            max = max.max(k.uid);
        }
        let next_uid = range_vars.iter().copied().max().unwrap_or(0).max(max) + 0x1000_0000;
        IndexSubster { map: map.clone(), metas: BTreeMap::new(), range_vars, next_uid }
    }

    fn index(&self, i: &IndexTerm) -> IndexTerm {
        match i {
            IndexTerm::Var(s) => self.map.get(s).cloned().unwrap_or_else(|| i.clone()),
            IndexTerm::Meta(m) => self.metas.get(m).cloned().unwrap_or_else(|| i.clone()),
            _ => i.clone(),
        }
    }

    /// Enters a binder: shadows it in the map and renames it if it would capture.
    fn enter(&mut self, s: &Symbol) -> (Symbol, Option<(Symbol, Option<IndexTerm>)>) {
        let shadowed = self.map.remove(s).map(|v| (s.clone(), Some(v)));
        if self.range_vars.contains(&s.uid) {
            self.next_uid += 1;
            let fresh = Symbol::new(s.name.clone(), self.next_uid);
            let prev = self.map.insert(s.clone(), IndexTerm::Var(fresh.clone()));
            let restore = shadowed.or(Some((s.clone(), prev)));
            (fresh, restore)
        } else {
            (s.clone(), shadowed)
        }
    }

    fn leave(&mut self, restore: Option<(Symbol, Option<IndexTerm>)>) {
        if let Some((s, v)) = restore {
            match v {
                Some(v) => {
                    self.map.insert(s, v);
                }
                None => {
                    self.map.remove(&s);
                }
            }
        }
    }

    fn lin(&mut self, t: &LinType) -> LinType {
        use LinType::*;
        match t {
            I => I,
            Tensor(a, b) => Tensor(Box::new(self.lin(a)), Box::new(self.lin(b))),
            Plus(a, b) => Plus(Box::new(self.lin(a)), Box::new(self.lin(b))),
            Lolli(a, b) => Lolli(Box::new(self.lin(a)), Box::new(self.lin(b))),
            Diamond(a) => Diamond(Box::new(self.lin(a))),
            At(a, i) => At(Box::new(self.lin(a)), self.index(i)),
            F(x) => F(Box::new(self.cart(x))),
            Forall(s, o, b) | Exists(s, o, b) => {
                let (s2, r) = self.enter(s);
                let b2 = Box::new(self.lin(b));
                self.leave(r);
                if matches!(t, Forall(..)) {
                    Forall(s2, *o, b2)
                } else {
                    Exists(s2, *o, b2)
                }
            }
            Widget(i) => Widget(self.index(i)),
            Prefix(i, j) => Prefix(self.index(i), self.index(j)),
            Nu(s, b) => Nu(s.clone(), Box::new(self.lin(b))),
            TyVar(s) => TyVar(s.clone()),
        }
    }

    fn cart(&mut self, t: &CartType) -> CartType {
        match t {
            CartType::Arrow(a, b) => CartType::Arrow(Box::new(self.cart(a)), Box::new(self.cart(b))),
            CartType::G(a) => CartType::G(Box::new(self.lin(a))),
            other => other.clone(),
        }
    }

    fn annot(&mut self, a: &LinOrCart) -> LinOrCart {
        match a {
            LinOrCart::Lin(t) => LinOrCart::Lin(self.lin(t)),
            LinOrCart::Cart(t) => LinOrCart::Cart(self.cart(t)),
        }
    }

    fn pattern(&mut self, p: &Pattern, restores: &mut Vec<Option<(Symbol, Option<IndexTerm>)>>) -> Pattern {
        match p {
            Pattern::Var(_) | Pattern::Unit | Pattern::F(_) => p.clone(),
            Pattern::Pair(a, b) => {
                let a = self.pattern(a, restores);
                Pattern::Pair(Box::new(a), Box::new(self.pattern(b, restores)))
            }
            Pattern::At(a, i) => {
                let i = self.index(i);
                Pattern::At(Box::new(self.pattern(a, restores)), i)
            }
            Pattern::Evt(a) => Pattern::Evt(Box::new(self.pattern(a, restores))),
            Pattern::Pack(s, a) => {
                let (s2, r) = self.enter(s);
                restores.push(r);
                Pattern::Pack(s2, Box::new(self.pattern(a, restores)))
            }
        }
    }

    fn term(&mut self, t: &Term) -> Term {
        use TermKind::*;
        let b = |x: Term| Box::new(x);
        let kind = match &t.kind {
            Var(_) | Global(_) | Unit | Star | ColorLit(_) | CharLit(_) => t.kind.clone(),
            Lam(s, a, body) => Lam(s.clone(), a.as_ref().map(|a| self.annot(a)), b(self.term(body))),
            App(x, y) => App(b(self.term(x)), b(self.term(y))),
            LetUnit(x, y) => LetUnit(b(self.term(x)), b(self.term(y))),
            Pair(x, y) => Pair(b(self.term(x)), b(self.term(y))),
            LetPair(p, q, x, y) => LetPair(p.clone(), q.clone(), b(self.term(x)), b(self.term(y))),
            Inl(x) => Inl(b(self.term(x))),
            Inr(x) => Inr(b(self.term(x))),
            Case(s, l, lb, r, rb) => Case(b(self.term(s)), l.clone(), b(self.term(lb)), r.clone(), b(self.term(rb))),
            Evt(x) => Evt(b(self.term(x))),
            LetEvt(s, x, y) => LetEvt(s.clone(), b(self.term(x)), b(self.term(y))),
            At(x, i) => At(b(self.term(x)), self.index(i)),
            LetAt(s, i, x, y) => LetAt(s.clone(), self.index(i), b(self.term(x)), b(self.term(y))),
            LetUnitAt(i, x, y) => LetUnitAt(self.index(i), b(self.term(x)), b(self.term(y))),
            LetPairAt(p, q, i, x, y) => LetPairAt(p.clone(), q.clone(), self.index(i), b(self.term(x)), b(self.term(y))),
            GIntro(x) => GIntro(b(self.term(x))),
            RunG(x) => RunG(b(self.term(x))),
            FIntro(x) => FIntro(b(self.term(x))),
            LetF(s, x, y) => LetF(s.clone(), b(self.term(x)), b(self.term(y))),
            IndexLam(s, o, x) => {
                let (s2, r) = self.enter(s);
                let x = self.term(x);
                self.leave(r);
                IndexLam(s2, *o, b(x))
            }
            IndexApp(x, i) => IndexApp(b(self.term(x)), self.index(i)),
            Pack(i, x) => Pack(self.index(i), b(self.term(x))),
            LetPack(s, a, x, y) => {
                let x = self.term(x);
                let (s2, r) = self.enter(s);
                let y = self.term(y);
                self.leave(r);
                LetPack(s2, a.clone(), b(x), b(y))
            }
            Select(p) => Select(Box::new(SelectParts {
                left: self.term(&p.left),
                left_bind: p.left_bind.clone(),
                left_body: self.term(&p.left_body),
                right: self.term(&p.right),
                right_bind: p.right_bind.clone(),
                right_body: self.term(&p.right_body),
            })),
            Fold(x) => Fold(b(self.term(x))),
            Unfold(x) => Unfold(b(self.term(x))),
            Let(s, x, y) => Let(s.clone(), b(self.term(x)), b(self.term(y))),
            Annot(x, a) => Annot(b(self.term(x)), self.annot(a)),
            LetPat(p, x, y) => {
                let x = self.term(x);
                let mut restores = Vec::new();
                let p = self.pattern(p, &mut restores);
                let y = self.term(y);
                for r in restores.into_iter().rev() {
                    self.leave(r);
                }
                LetPat(p, b(x), b(y))
            }
        };
        Term::new(kind, t.span)
    }
}

pub fn subst_index_in_index(zeta: &IndexSubst, i: &IndexTerm) -> IndexTerm {
    IndexSubster::new(zeta).index(i)
}

pub fn subst_index_lin(zeta: &IndexSubst, t: &LinType) -> LinType {
    IndexSubster::new(zeta).lin(t)
}

pub fn subst_index_cart(zeta: &IndexSubst, t: &CartType) -> CartType {
    IndexSubster::new(zeta).cart(t)
}

pub fn subst_index_term(zeta: &IndexSubst, t: &Term) -> Term {
    IndexSubster::new(zeta).term(t)
}

/// Replaces solved metavariables throughout a term.
pub fn zonk_term(metas: &BTreeMap<u32, IndexTerm>, t: &Term) -> Term {
    let mut s = IndexSubster::new(&IndexSubst::new());
    s.metas = metas.clone();
    s.term(t)
}

/// Substitutes one index variable.
pub fn instantiate(t: &LinType, var: &Symbol, with: &IndexTerm) -> LinType {
    let mut zeta = IndexSubst::new();
    zeta.insert(var.clone(), with.clone());
    subst_index_lin(&zeta, t)
}

/// Applies ζ to every definition of a program, including declared types.
pub fn subst_index_program(zeta: &IndexSubst, p: &SourceProgram) -> SourceProgram {
    let mut s = IndexSubster::new(zeta);
    SourceProgram {
        definitions: p
            .definitions
            .iter()
            .map(|d| Definition {
                name: d.name.clone(),
                ty: match &d.ty {
                    Type::Lin(t) => Type::Lin(s.lin(t)),
                    Type::Cart(t) => Type::Cart(s.cart(t)),
                },
                body: s.term(&d.body),
                span: d.span,
            })
            .collect(),
        entry: p.entry.clone(),
    }
}

/// Replaces the type variable `var` by `with`; used to unroll `ν`.
pub fn subst_tyvar(t: &LinType, var: &Symbol, with: &LinType) -> LinType {
    use LinType::*;
    let go = |x: &LinType| Box::new(subst_tyvar(x, var, with));
    match t {
        TyVar(s) if s == var => with.clone(),
        Nu(s, _) if s == var => t.clone(),
        Tensor(a, b) => Tensor(go(a), go(b)),
        Plus(a, b) => Plus(go(a), go(b)),
        Lolli(a, b) => Lolli(go(a), go(b)),
        Diamond(a) => Diamond(go(a)),
        At(a, i) => At(go(a), i.clone()),
        F(x) => F(Box::new(subst_tyvar_cart(x, var, with))),
        Forall(s, o, b) => Forall(s.clone(), *o, go(b)),
        Exists(s, o, b) => Exists(s.clone(), *o, go(b)),
        Nu(s, b) => Nu(s.clone(), go(b)),
        other => other.clone(),
    }
}

fn subst_tyvar_cart(t: &CartType, var: &Symbol, with: &LinType) -> CartType {
    match t {
        CartType::Arrow(a, b) => {
            CartType::Arrow(Box::new(subst_tyvar_cart(a, var, with)), Box::new(subst_tyvar_cart(b, var, with)))
        }
        CartType::G(a) => CartType::G(Box::new(subst_tyvar(a, var, with))),
        other => other.clone(),
    }
}

/// One-step unrolling `ν α. B ↦ B[ν α. B / α]`.
pub fn unroll(t: &LinType) -> Option<LinType> {
    match t {
        LinType::Nu(s, b) => Some(subst_tyvar(b, s, t)),
        _ => None,
    }
}

/// Free term variables (by uid).
pub fn free_vars(t: &Term) -> HashSet<u32> {
    fn go(t: &Term, bound: &mut Vec<u32>, out: &mut HashSet<u32>) {
        use TermKind::*;
        let scoped = |bound: &mut Vec<u32>, syms: &[&Symbol], body: &Term, out: &mut HashSet<u32>| {
            let n = bound.len();
            bound.extend(syms.iter().map(|s| s.uid));
            go(body, bound, out);
            bound.truncate(n);
        };
        match &t.kind {
            Var(s) => {
                if !bound.contains(&s.uid) {
                    out.insert(s.uid);
                }
            }
            Lam(s, _, b) => scoped(bound, &[s], b, out),
            LetPair(p, q, x, y) | LetPairAt(p, q, _, x, y) => {
                go(x, bound, out);
                scoped(bound, &[p, q], y, out);
            }
            LetEvt(s, x, y) | LetAt(s, _, x, y) | LetF(s, x, y) | Let(s, x, y) | LetPack(_, s, x, y) => {
                go(x, bound, out);
                scoped(bound, &[s], y, out);
            }
            Case(s, l, lb, r, rb) => {
                go(s, bound, out);
                scoped(bound, &[l], lb, out);
                scoped(bound, &[r], rb, out);
            }
            Select(p) => {
                go(&p.left, bound, out);
                go(&p.right, bound, out);
                scoped(bound, &[&p.left_bind], &p.left_body, out);
                scoped(bound, &[&p.right_bind], &p.right_body, out);
            }
            LetPat(p, x, y) => {
                go(x, bound, out);
                let mut syms = Vec::new();
                pattern_vars(p, &mut syms);
                let refs: Vec<&Symbol> = syms.iter().collect();
                scoped(bound, &refs, y, out);
            }
            _ => {
                for c in t.children() {
                    go(c, bound, out);
                }
            }
        }
    }
    let mut out = HashSet::new();
    go(t, &mut Vec::new(), &mut out);
    out
}

fn pattern_vars(p: &Pattern, out: &mut Vec<Symbol>) {
    match p {
        Pattern::Var(s) | Pattern::F(s) => out.push(s.clone()),
        Pattern::Unit => {}
        Pattern::Pair(a, b) => {
            pattern_vars(a, out);
            pattern_vars(b, out);
        }
        Pattern::At(a, _) | Pattern::Evt(a) | Pattern::Pack(_, a) => pattern_vars(a, out),
    }
}

struct TermSubster<'a> {
    x: &'a Symbol,
    s: &'a Term,
    fv: HashSet<u32>,
    next_uid: u32,
}

impl TermSubster<'_> {
    /// Renames binder `b` in `bodies` if it would capture a free variable of `s`.
    fn binder(&mut self, b: &Symbol, bodies: &mut [&mut Term]) -> Symbol {
        if self.fv.contains(&b.uid) {
            self.next_uid += 1;
            let fresh = Symbol::new(b.name.clone(), self.next_uid);
            let v = Term::new(TermKind::Var(fresh.clone()), Span::default());
            for body in bodies.iter_mut() {
                **body = subst_term_raw(b, &v, body, self.next_uid + 1);
            }
            fresh
        } else {
            b.clone()
        }
    }

    fn under(&mut self, binders: &[&Symbol], body: &Term) -> (Vec<Symbol>, Term) {
        let mut body = body.clone();
        let mut out = Vec::new();
        for b in binders {
            out.push(self.binder(b, &mut [&mut body]));
        }
        if binders.contains(&self.x) {
            (out, body)
        } else {
            let t = self.term(&body);
            (out, t)
        }
    }

    fn term(&mut self, t: &Term) -> Term {
        use TermKind::*;
        let b = |x: Term| Box::new(x);
        let kind = match &t.kind {
            Var(v) if v == self.x => return self.s.clone(),
            Var(_) | Global(_) | Unit | Star | ColorLit(_) | CharLit(_) => t.kind.clone(),
            Lam(s, a, body) => {
                let (bs, body) = self.under(&[s], body);
                Lam(bs[0].clone(), a.clone(), b(body))
            }
            LetPair(p, q, x, y) | LetPairAt(p, q, _, x, y) => {
                let x = self.term(x);
                let (bs, y) = self.under(&[p, q], y);
                match &t.kind {
                    LetPairAt(_, _, i, _, _) => LetPairAt(bs[0].clone(), bs[1].clone(), i.clone(), b(x), b(y)),
                    _ => LetPair(bs[0].clone(), bs[1].clone(), b(x), b(y)),
                }
            }
            LetEvt(s, x, y) | LetF(s, x, y) | Let(s, x, y) => {
                let x = self.term(x);
                let (bs, y) = self.under(&[s], y);
                match &t.kind {
                    LetEvt(..) => LetEvt(bs[0].clone(), b(x), b(y)),
                    LetF(..) => LetF(bs[0].clone(), b(x), b(y)),
                    _ => Let(bs[0].clone(), b(x), b(y)),
                }
            }
            LetAt(s, i, x, y) => {
                let x = self.term(x);
                let (bs, y) = self.under(&[s], y);
                LetAt(bs[0].clone(), i.clone(), b(x), b(y))
            }
            LetPack(i, s, x, y) => {
                let x = self.term(x);
                let (bs, y) = self.under(&[s], y);
                LetPack(i.clone(), bs[0].clone(), b(x), b(y))
            }
            Case(sc, l, lb, r, rb) => {
                let sc = self.term(sc);
                let (ls, lb) = self.under(&[l], lb);
                let (rs, rb) = self.under(&[r], rb);
                Case(b(sc), ls[0].clone(), b(lb), rs[0].clone(), b(rb))
            }
            Select(p) => {
                let scrutinee = |v: &Term| matches!(&v.kind, Var(s) if s == self.x);
                if (scrutinee(&p.left) || scrutinee(&p.right)) && !matches!(self.s.kind, Var(_)) {
                    // A scrutinee must stay a variable: bind the substituted term instead.
                    return Term::new(Let(self.x.clone(), b(self.s.clone()), b(t.clone())), t.span);
                }
                let left = self.term(&p.left);
                let right = self.term(&p.right);
                let (lb, left_body) = self.under(&[&p.left_bind], &p.left_body);
                let (rb, right_body) = self.under(&[&p.right_bind], &p.right_body);
                Select(Box::new(SelectParts {
                    left,
                    left_bind: lb[0].clone(),
                    left_body,
                    right,
                    right_bind: rb[0].clone(),
                    right_body,
                }))
            }
            LetPat(p, x, y) => {
                let x = self.term(x);
                let mut syms = Vec::new();
                pattern_vars(p, &mut syms);
                if syms.iter().any(|s| s == self.x) {
                    LetPat(p.clone(), b(x), y.clone())
                } else {
                    LetPat(p.clone(), b(x), b(self.term(y)))
                }
            }
            App(x, y) => App(b(self.term(x)), b(self.term(y))),
            LetUnit(x, y) => LetUnit(b(self.term(x)), b(self.term(y))),
            Pair(x, y) => Pair(b(self.term(x)), b(self.term(y))),
            Inl(x) => Inl(b(self.term(x))),
            Inr(x) => Inr(b(self.term(x))),
            Evt(x) => Evt(b(self.term(x))),
            At(x, i) => At(b(self.term(x)), i.clone()),
            LetUnitAt(i, x, y) => LetUnitAt(i.clone(), b(self.term(x)), b(self.term(y))),
            GIntro(x) => GIntro(b(self.term(x))),
            RunG(x) => RunG(b(self.term(x))),
            FIntro(x) => FIntro(b(self.term(x))),
            IndexLam(s, o, x) => IndexLam(s.clone(), *o, b(self.term(x))),
            IndexApp(x, i) => IndexApp(b(self.term(x)), i.clone()),
            Pack(i, x) => Pack(i.clone(), b(self.term(x))),
            Fold(x) => Fold(b(self.term(x))),
            Unfold(x) => Unfold(b(self.term(x))),
            Annot(x, a) => Annot(b(self.term(x)), a.clone()),
        };
        Term::new(kind, t.span)
    }
}

fn subst_term_raw(x: &Symbol, s: &Term, t: &Term, next_uid: u32) -> Term {
    let fv = free_vars(s);
    TermSubster { x, s, fv, next_uid }.term(t)
}

/// `t[s/x]`, capture-avoiding. Binders that would capture are renamed to fresh uids.
pub fn subst_term(_kind: SubstKind, x: &Symbol, s: &Term, t: &Term) -> Term {
    let mut max = x.uid;
    let mut note = |u: u32| max = max.max(u);
    s.walk(&mut |n| {
        if let TermKind::Var(v) = &n.kind {
            note(v.uid)
        }
    });
    subst_term_raw(x, s, t, max + 0x2000_0000)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{alpha_eq, alpha_eq_term, parse_lin_type, parse_term};

    fn zeta(pairs: &[(&Symbol, IndexTerm)]) -> IndexSubst {
        pairs.iter().map(|(s, i)| ((*s).clone(), i.clone())).collect()
    }

    #[test]
    fn single_time_variable() {
        let t = parse_lin_type("∀(t:Time). Widget i @ t").unwrap();
        let LinType::Forall(tv, _, body) = &t else { panic!() };
        let out = subst_index_lin(&zeta(&[(tv, IndexTerm::TimeLit(3))]), body);
        assert_eq!(out.to_string(), "Widget i @ 3");
    }

    #[test]
    fn identity_substitution_is_identity() {
        let t = parse_term("Λ(i:Id). λw. let (p, v) = split [i] [4] w in join [i] [4] (p, v)").unwrap();
        assert_eq!(subst_index_term(&IndexSubst::new(), &t), t);
    }

    #[test]
    fn bound_index_is_not_substituted() {
        let t = parse_lin_type("∀(i:Id). Widget i").unwrap();
        let out = subst_index_lin(&zeta(&[(&Symbol::global("i"), IndexTerm::IdLit(1))]), &t);
        assert!(alpha_eq(&t, &out));
    }

    #[test]
    fn capture_is_avoided() {
        let t = parse_lin_type("∀(j:Id). Widget j ⊗ Widget k").unwrap();
        let LinType::Forall(j, _, _) = &t else { panic!() };
        let out = subst_index_lin(&zeta(&[(&Symbol::global("k"), IndexTerm::Var(j.clone()))]), &t);
        let LinType::Forall(j2, _, body) = &out else { panic!() };
        assert_ne!(j2, j);
        assert_eq!(**body, LinType::Tensor(Box::new(LinType::Widget(IndexTerm::Var(j2.clone()))), Box::new(LinType::Widget(IndexTerm::Var(j.clone())))));
    }

    #[test]
    fn unit_substitution() {
        let t = parse_term("λa. let ⟨⟩ = a in ⟨⟩").unwrap();
        let TermKind::Lam(a, _, body) = &t.kind else { panic!() };
        let unit = Term::new(TermKind::Unit, Span::default());
        let out = subst_term(SubstKind::LinIntoLin, a, &unit, body);
        assert!(alpha_eq_term(&out, &parse_term("let ⟨⟩ = ⟨⟩ in ⟨⟩").unwrap()));
    }

    #[test]
    fn shadowed_occurrence_untouched() {
        let t = parse_term("λx. (x, λx. x)").unwrap();
        let TermKind::Lam(x, _, body) = &t.kind else { panic!() };
        let star = Term::new(TermKind::Star, Span::default());
        let out = subst_term(SubstKind::CartIntoCart, x, &star, body);
        let TermKind::Pair(a, b) = &out.kind else { panic!() };
        assert_eq!(a.kind, TermKind::Star);
        assert!(matches!(&b.kind, TermKind::Lam(_, _, inner) if matches!(inner.kind, TermKind::Var(_))));
    }

    #[test]
    fn unroll_stream() {
        let t = parse_lin_type("ν s. ◇(F Color ⊗ s)").unwrap();
        let u = unroll(&t).unwrap();
        let LinType::Diamond(inner) = &u else { panic!() };
        let LinType::Tensor(_, tail) = &**inner else { panic!() };
        assert!(alpha_eq(tail, &t));
    }
}
