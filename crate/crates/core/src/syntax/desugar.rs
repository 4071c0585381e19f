//! Expansion of nested patterns and omitted index arguments into core syntax.

use std::collections::HashMap;

use super::ast::*;
use super::DesugarError;
use crate::typecheck::api::ApiTable;

struct Desugarer {
    next_uid: u32,
    next_meta: u32,
    /// Number of leading `∀` binders of every builtin and top-level definition.
    arity: HashMap<String, usize>,
}

fn leading_foralls(t: &LinType) -> usize {
    match t {
        LinType::Forall(_, _, b) => 1 + leading_foralls(b),
        _ => 0,
    }
}

pub(crate) fn scan_index(i: &IndexTerm, uid: &mut u32, meta: &mut u32) {
    match i {
        IndexTerm::Var(s) => *uid = (*uid).max(s.uid),
        IndexTerm::Meta(m) => *meta = (*meta).max(*m + 1),
        _ => {}
    }
}

pub(crate) fn scan_lin(t: &LinType, uid: &mut u32, meta: &mut u32) {
    match t {
        LinType::I => {}
        LinType::Tensor(a, b) | LinType::Plus(a, b) | LinType::Lolli(a, b) => {
            scan_lin(a, uid, meta);
            scan_lin(b, uid, meta);
        }
        LinType::Diamond(a) => scan_lin(a, uid, meta),
        LinType::At(a, i) => {
            scan_lin(a, uid, meta);
            scan_index(i, uid, meta);
        }
        LinType::F(x) => scan_cart(x, uid, meta),
        LinType::Forall(s, _, b) | LinType::Exists(s, _, b) | LinType::Nu(s, b) => {
            *uid = (*uid).max(s.uid);
            scan_lin(b, uid, meta);
        }
        LinType::Widget(i) => scan_index(i, uid, meta),
        LinType::Prefix(i, j) => {
            scan_index(i, uid, meta);
            scan_index(j, uid, meta);
        }
        LinType::TyVar(s) => *uid = (*uid).max(s.uid),
    }
}

pub(crate) fn scan_cart(t: &CartType, uid: &mut u32, meta: &mut u32) {
    match t {
        CartType::Arrow(a, b) => {
            scan_cart(a, uid, meta);
            scan_cart(b, uid, meta);
        }
        CartType::G(a) => scan_lin(a, uid, meta),
        CartType::Unit | CartType::Base(_) => {}
    }
}

fn scan_pattern(p: &Pattern, uid: &mut u32, meta: &mut u32) {
    match p {
        Pattern::Var(s) | Pattern::F(s) => *uid = (*uid).max(s.uid),
        Pattern::Unit => {}
        Pattern::Pair(a, b) => {
            scan_pattern(a, uid, meta);
            scan_pattern(b, uid, meta);
        }
        Pattern::At(a, i) => {
            scan_pattern(a, uid, meta);
            scan_index(i, uid, meta);
        }
        Pattern::Evt(a) => scan_pattern(a, uid, meta),
        Pattern::Pack(s, a) => {
            *uid = (*uid).max(s.uid);
            scan_pattern(a, uid, meta);
        }
    }
}

pub(crate) fn scan_term(t: &Term, uid: &mut u32, meta: &mut u32) {
    use TermKind::*;
    let mut sym = |s: &Symbol| *uid = (*uid).max(s.uid);
    match &t.kind {
        Var(s) | Lam(s, _, _) | LetEvt(s, _, _) | LetF(s, _, _) | IndexLam(s, _, _) | Let(s, _, _) => sym(s),
        LetPair(a, b, _, _) | LetPack(a, b, _, _) | Case(_, a, _, b, _) => {
            sym(a);
            sym(b);
        }
        LetAt(s, i, _, _) => {
            sym(s);
            scan_index(i, uid, meta);
        }
        LetPairAt(a, b, i, _, _) => {
            sym(a);
            sym(b);
            scan_index(i, uid, meta);
        }
        Select(p) => {
            sym(&p.left_bind);
            sym(&p.right_bind);
        }
        At(_, i) | IndexApp(_, i) | Pack(i, _) | LetUnitAt(i, _, _) => scan_index(i, uid, meta),
        LetPat(p, _, _) => scan_pattern(p, uid, meta),
        _ => {}
    }
    match &t.kind {
        Lam(_, Some(LinOrCart::Lin(a)), _) | Annot(_, LinOrCart::Lin(a)) => scan_lin(a, uid, meta),
        Lam(_, Some(LinOrCart::Cart(a)), _) | Annot(_, LinOrCart::Cart(a)) => scan_cart(a, uid, meta),
        _ => {}
    }
    for c in t.children() {
        scan_term(c, uid, meta);
    }
}

impl Desugarer {
    fn fresh(&mut self, name: &str) -> Symbol {
        self.next_uid += 1;
        Symbol::new(name, self.next_uid)
    }

    fn err<T>(span: Span, message: impl Into<String>) -> Result<T, DesugarError> {
        Err(DesugarError { span, message: message.into() })
    }

    /// `linear` is false inside Cartesian terms, where globals are not instantiated.
    fn term(&mut self, t: &Term, linear: bool) -> Result<Term, DesugarError> {
        use TermKind::*;
        let sp = t.span;
        let b = |x: Term| Box::new(x);
        let kind = match &t.kind {
            Global(_) | IndexApp(..) if linear => return self.instantiate(t),
            IndexApp(f, i) => IndexApp(b(self.term(f, linear)?), i.clone()),
            Var(_) | Global(_) | Unit | Star | ColorLit(_) | CharLit(_) => t.kind.clone(),
            Lam(s, a, body) => Lam(s.clone(), a.clone(), b(self.term(body, linear)?)),
            App(f, a) => App(b(self.term(f, linear)?), b(self.term(a, linear)?)),
            LetUnit(x, y) => LetUnit(b(self.term(x, linear)?), b(self.term(y, linear)?)),
            Pair(x, y) => Pair(b(self.term(x, linear)?), b(self.term(y, linear)?)),
            LetPair(p, q, x, y) => LetPair(p.clone(), q.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            Inl(x) => Inl(b(self.term(x, linear)?)),
            Inr(x) => Inr(b(self.term(x, linear)?)),
            Case(s, l, lb, r, rb) => {
                Case(b(self.term(s, true)?), l.clone(), b(self.term(lb, true)?), r.clone(), b(self.term(rb, true)?))
            }
            Evt(x) => Evt(b(self.term(x, true)?)),
            LetEvt(s, x, y) => LetEvt(s.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            At(x, i) => At(b(self.term(x, true)?), i.clone()),
            LetAt(s, i, x, y) => LetAt(s.clone(), i.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            LetUnitAt(i, x, y) => LetUnitAt(i.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            LetPairAt(p, q, i, x, y) => {
                LetPairAt(p.clone(), q.clone(), i.clone(), b(self.term(x, true)?), b(self.term(y, true)?))
            }
            GIntro(x) => GIntro(b(self.term(x, true)?)),
            RunG(x) => RunG(b(self.term(x, false)?)),
            FIntro(x) => FIntro(b(self.term(x, false)?)),
            LetF(s, x, y) => LetF(s.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            IndexLam(s, o, x) => IndexLam(s.clone(), *o, b(self.term(x, linear)?)),
            Pack(i, x) => Pack(i.clone(), b(self.term(x, true)?)),
            LetPack(s, a, x, y) => LetPack(s.clone(), a.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            Select(p) => {
                for scrut in [&p.left, &p.right] {
                    if !matches!(scrut.kind, Var(_)) {
                        return Self::err(scrut.span, "select scrutinee must be a variable");
                    }
                }
                Select(Box::new(SelectParts {
                    left: p.left.clone(),
                    left_bind: p.left_bind.clone(),
                    left_body: self.term(&p.left_body, true)?,
                    right: p.right.clone(),
                    right_bind: p.right_bind.clone(),
                    right_body: self.term(&p.right_body, true)?,
                }))
            }
            Fold(x) => Fold(b(self.term(x, true)?)),
            Unfold(x) => Unfold(b(self.term(x, true)?)),
            Let(s, x, y) => Let(s.clone(), b(self.term(x, true)?), b(self.term(y, true)?)),
            Annot(x, a) => Annot(b(self.term(x, matches!(a, LinOrCart::Lin(_)))?), a.clone()),
            LetPat(p, x, y) => {
                let rhs = self.term(x, true)?;
                let body = self.term(y, true)?;
                // At top level `(p, q) @ τ` eliminates a pair available at τ, as in the core form.
                if let Pattern::At(inner, tau) = p {
                    if let Pattern::Pair(..) = &**inner {
                        return self.expand_timed(inner, tau, rhs, body, sp);
                    }
                }
                return self.expand(p, rhs, body, sp);
            }
        };
        Ok(Term::new(kind, sp))
    }

    /// Completes `g [s1] .. [sk]` with metavariables for the remaining quantifiers of `g`.
    fn instantiate(&mut self, t: &Term) -> Result<Term, DesugarError> {
        let mut head = t;
        let mut given = 0;
        while let TermKind::IndexApp(f, _) = &head.kind {
            head = f;
            given += 1;
        }
        let mut out = match &head.kind {
            TermKind::Global(g) => {
                let mut out = t.clone();
                let want = self.arity.get(g).copied().unwrap_or(0);
                for _ in given..want {
                    let m = IndexTerm::Meta(self.next_meta);
                    self.next_meta += 1;
                    let span = out.span;
                    out = Term::new(TermKind::IndexApp(Box::new(out), m), span);
                }
                return Ok(out);
            }
            _ => self.term(head, true)?,
        };
        // Re-apply the explicit index arguments around a non-global head.
        let mut args = Vec::new();
        let mut cur = t;
        while let TermKind::IndexApp(f, i) = &cur.kind {
            args.push((i.clone(), cur.span));
            cur = f;
        }
        for (i, span) in args.into_iter().rev() {
            out = Term::new(TermKind::IndexApp(Box::new(out), i), span);
        }
        Ok(out)
    }

    fn var(s: &Symbol, span: Span) -> Term {
        Term::new(TermKind::Var(s.clone()), span)
    }

    /// Name for the value matched by a subpattern: the pattern's own name if it is a variable.
    fn name_for(&mut self, p: &Pattern) -> Symbol {
        match p {
            Pattern::Var(s) => s.clone(),
            _ => self.fresh("_t"),
        }
    }

    fn expand(&mut self, p: &Pattern, rhs: Term, body: Term, sp: Span) -> Result<Term, DesugarError> {
        use TermKind::*;
        let (rhs, b) = (Box::new(rhs), |x: Term| Box::new(x));
        let kind = match p {
            Pattern::Var(s) => Let(s.clone(), rhs, b(body)),
            Pattern::Unit => LetUnit(rhs, b(body)),
            Pattern::F(s) => LetF(s.clone(), rhs, b(body)),
            Pattern::Pair(l, r) => {
                let (nl, nr) = (self.name_for(l), self.name_for(r));
                let body = self.rebind(r, &nr, body, sp)?;
                let body = self.rebind(l, &nl, body, sp)?;
                LetPair(nl, nr, rhs, b(body))
            }
            Pattern::Evt(inner) => {
                let n = self.name_for(inner);
                LetEvt(n.clone(), rhs, b(self.rebind(inner, &n, body, sp)?))
            }
            Pattern::Pack(s, inner) => {
                let n = self.name_for(inner);
                LetPack(s.clone(), n.clone(), rhs, b(self.rebind(inner, &n, body, sp)?))
            }
            Pattern::At(inner, tau) => match &**inner {
                Pattern::Var(s) => LetAt(s.clone(), tau.clone(), rhs, b(body)),
                other => {
                    let n = self.fresh("_t");
                    let body = self.expand_timed(other, tau, Self::var(&n, sp), body, sp)?;
                    LetAt(n, tau.clone(), rhs, b(body))
                }
            },
        };
        Ok(Term::new(kind, sp))
    }

    /// Matches `p` against variable `n` unless `p` is that variable already.
    fn rebind(&mut self, p: &Pattern, n: &Symbol, body: Term, sp: Span) -> Result<Term, DesugarError> {
        match p {
            Pattern::Var(s) if s == n => Ok(body),
            _ => self.expand(p, Self::var(n, sp), body, sp),
        }
    }

    /// Matches `p` against `scrut`, a term checked at time `tau`.
    fn expand_timed(&mut self, p: &Pattern, tau: &IndexTerm, scrut: Term, body: Term, sp: Span) -> Result<Term, DesugarError> {
        use TermKind::*;
        let kind = match p {
            Pattern::Var(s) if matches!(&scrut.kind, Var(v) if v == s) => return Ok(body),
            Pattern::Unit => LetUnitAt(tau.clone(), Box::new(scrut), Box::new(body)),
            Pattern::Pair(l, r) => {
                let (nl, nr) = (self.name_for(l), self.name_for(r));
                let body = match &**r {
                    Pattern::Var(_) => body,
                    other => self.expand_timed(other, tau, Self::var(&nr, sp), body, sp)?,
                };
                let body = match &**l {
                    Pattern::Var(_) => body,
                    other => self.expand_timed(other, tau, Self::var(&nl, sp), body, sp)?,
                };
                LetPairAt(nl, nr, tau.clone(), Box::new(scrut), Box::new(body))
            }
            _ => return Self::err(sp, "only unit and pair patterns can be matched at a later time"),
        };
        Ok(Term::new(kind, sp))
    }
}

/// Largest binder uid and one past the largest metavariable id in a program.
pub fn max_uid_meta(p: &SourceProgram) -> (u32, u32) {
    let (mut uid, mut meta) = (0, 0);
    for d in &p.definitions {
        scan_term(&d.body, &mut uid, &mut meta);
        match &d.ty {
            Type::Lin(t) => scan_lin(t, &mut uid, &mut meta),
            Type::Cart(t) => scan_cart(t, &mut uid, &mut meta),
        }
    }
    (uid, meta)
}

/// Rewrites a parsed program into core syntax. Idempotent.
pub fn desugar(p: &SourceProgram) -> Result<SourceProgram, DesugarError> {
    let (uid, meta) = max_uid_meta(p);
    let mut arity = HashMap::new();
    for (name, scheme) in ApiTable::standard().iter() {
        arity.insert(name.to_string(), leading_foralls(scheme));
    }
    for d in &p.definitions {
        let n = match &d.ty {
            Type::Lin(t) => leading_foralls(t),
            Type::Cart(_) => 0,
        };
        arity.insert(d.name.clone(), n);
    }
    let mut ds = Desugarer { next_uid: uid, next_meta: meta, arity };
    let mut definitions = Vec::with_capacity(p.definitions.len());
    for d in &p.definitions {
        let linear = matches!(d.ty, Type::Lin(_));
        let mut body = ds.term(&d.body, linear)?;
        if let (Type::Lin(ty), false) = (&d.ty, matches!(body.kind, TermKind::IndexLam(..))) {
            let mut binders = Vec::new();
            let mut cur = ty;
            while let LinType::Forall(s, o, b) = cur {
                binders.push((s.clone(), *o));
                cur = b;
            }
            for (s, o) in binders.into_iter().rev() {
                let span = body.span;
                body = Term::new(TermKind::IndexLam(s, o, Box::new(body)), span);
            }
        }
        definitions.push(Definition { name: d.name.clone(), ty: d.ty.clone(), body, span: d.span });
    }
    Ok(SourceProgram { definitions, entry: p.entry.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ast::TermKind;
    use crate::syntax::{alpha_eq_program, parse};

    const SUGARED: &str = "
def turnRedOnClick : ∀(i:Id). Widget i ⊸ Widget i =
  λw.
  let (w, c) = onClick w in
  let (x, ⟨⟩ @ x) = out c in
  let (p, w @ x) = split w in
  join (p, (setColor (w, F Red)) @ x)
";

    fn body(src: &str) -> Term {
        desugar(&parse(src).unwrap()).unwrap().definitions.remove(0).body
    }

    #[test]
    fn patterns_become_primitive_eliminations() {
        let t = body(SUGARED);
        assert!(t.is_core());
        let mut kinds = Vec::new();
        t.walk(&mut |s| kinds.push(std::mem::discriminant(&s.kind)));
        for probe in [
            TermKind::LetPack(Symbol::global("x"), Symbol::global("y"), Box::new(t.clone()), Box::new(t.clone())),
            TermKind::LetUnitAt(IndexTerm::TimeLit(0), Box::new(t.clone()), Box::new(t.clone())),
            TermKind::LetAt(Symbol::global("x"), IndexTerm::TimeLit(0), Box::new(t.clone()), Box::new(t.clone())),
        ] {
            assert!(kinds.contains(&std::mem::discriminant(&probe)), "missing {probe:?}");
        }
    }

    #[test]
    fn idempotent() {
        let once = desugar(&parse(SUGARED).unwrap()).unwrap();
        let twice = desugar(&once).unwrap();
        assert!(alpha_eq_program(&once, &twice));
    }

    #[test]
    fn core_programs_are_unchanged() {
        let src = "def f : I ⊸ I = λu. let ⟨⟩ = u in ⟨⟩\n";
        let p = parse(src).unwrap();
        assert!(alpha_eq_program(&p, &desugar(&p).unwrap()));
    }

    #[test]
    fn select_scrutinee_must_be_a_variable() {
        let p = parse("def f : ◇I ⊸ ◇I ⊸ ◇I = λa. λb. select (g a) as x => x | b as y => y\n").unwrap();
        let e = desugar(&p).unwrap_err();
        assert!(e.message.contains("scrutinee"));
        assert_eq!(e.span.line, 1);
    }

    #[test]
    fn timed_patterns_are_limited_to_unit_and_pair() {
        let p = parse("def f : I = let (x, F z @ x) = out c in ⟨⟩\n").unwrap();
        assert!(desugar(&p).is_err());
    }
}
