//! Equality up to consistent renaming of bound names.

use super::ast::*;

/// Pairs of binders entered in lockstep, innermost last.
#[derive(Default)]
struct Env {
    pairs: Vec<(u32, u32)>,
}

impl Env {
    fn with<R>(&mut self, a: &Symbol, b: &Symbol, f: impl FnOnce(&mut Self) -> R) -> R {
        self.pairs.push((a.uid, b.uid));
        let r = f(self);
        self.pairs.pop();
        r
    }

    fn sym(&self, a: &Symbol, b: &Symbol) -> bool {
        let la = self.pairs.iter().rposition(|&(x, _)| x == a.uid && a.uid != 0);
        let lb = self.pairs.iter().rposition(|&(_, y)| y == b.uid && b.uid != 0);
        match (la, lb) {
            (Some(i), Some(j)) => i == j,
            (None, None) => a == b,
            _ => false,
        }
    }

    fn index(&self, a: &IndexTerm, b: &IndexTerm) -> bool {
        match (a, b) {
            (IndexTerm::Var(x), IndexTerm::Var(y)) => self.sym(x, y),
            _ => a == b,
        }
    }

    fn lin(&mut self, a: &LinType, b: &LinType) -> bool {
        use LinType::*;
        match (a, b) {
            (I, I) => true,
            (Tensor(a1, a2), Tensor(b1, b2)) | (Plus(a1, a2), Plus(b1, b2)) | (Lolli(a1, a2), Lolli(b1, b2)) => {
                self.lin(a1, b1) && self.lin(a2, b2)
            }
            (Diamond(x), Diamond(y)) => self.lin(x, y),
            (At(x, i), At(y, j)) => self.index(i, j) && self.lin(x, y),
            (F(x), F(y)) => self.cart(x, y),
            (Forall(s, o, x), Forall(t, p, y)) | (Exists(s, o, x), Exists(t, p, y)) => {
                o == p && self.with(s, t, |e| e.lin(x, y))
            }
            (Nu(s, x), Nu(t, y)) => self.with(s, t, |e| e.lin(x, y)),
            (Widget(i), Widget(j)) => self.index(i, j),
            (Prefix(i, s), Prefix(j, t)) => self.index(i, j) && self.index(s, t),
            (TyVar(x), TyVar(y)) => self.sym(x, y),
            _ => false,
        }
    }

    fn cart(&mut self, a: &CartType, b: &CartType) -> bool {
        match (a, b) {
            (CartType::Unit, CartType::Unit) => true,
            (CartType::Arrow(a1, a2), CartType::Arrow(b1, b2)) => self.cart(a1, b1) && self.cart(a2, b2),
            (CartType::G(x), CartType::G(y)) => self.lin(x, y),
            (CartType::Base(x), CartType::Base(y)) => x == y,
            _ => false,
        }
    }

    fn annot(&mut self, a: &LinOrCart, b: &LinOrCart) -> bool {
        match (a, b) {
            (LinOrCart::Lin(x), LinOrCart::Lin(y)) => self.lin(x, y),
            (LinOrCart::Cart(x), LinOrCart::Cart(y)) => self.cart(x, y),
            _ => false,
        }
    }

    /// Matches binders of `a` and `b` in lockstep, then runs `k` under them.
    fn pattern(&mut self, a: &Pattern, b: &Pattern, k: &mut dyn FnMut(&mut Self) -> bool) -> bool {
        match (a, b) {
            (Pattern::Var(x), Pattern::Var(y)) | (Pattern::F(x), Pattern::F(y)) => self.with(x, y, |e| k(e)),
            (Pattern::Unit, Pattern::Unit) => k(self),
            (Pattern::Pair(a1, a2), Pattern::Pair(b1, b2)) => self.pattern(a1, b1, &mut |e| e.pattern(a2, b2, k)),
            (Pattern::At(x, i), Pattern::At(y, j)) if self.index(i, j) => self.pattern(x, y, k),
            (Pattern::Evt(x), Pattern::Evt(y)) => self.pattern(x, y, k),
            (Pattern::Pack(s, x), Pattern::Pack(t, y)) => self.with(s, t, |e| e.pattern(x, y, k)),
            _ => false,
        }
    }

    fn term(&mut self, a: &Term, b: &Term) -> bool {
        use TermKind::*;
        match (&a.kind, &b.kind) {
            (Var(x), Var(y)) => self.sym(x, y),
            (Global(x), Global(y)) => x == y,
            (Unit, Unit) | (Star, Star) => true,
            (ColorLit(x), ColorLit(y)) => x == y,
            (CharLit(x), CharLit(y)) => x == y,
            (Lam(x, ax, bx), Lam(y, ay, by)) => {
                let ann = match (ax, ay) {
                    (None, None) => true,
                    (Some(p), Some(q)) => self.annot(p, q),
                    _ => false,
                };
                ann && self.with(x, y, |e| e.term(bx, by))
            }
            (App(f, x), App(g, y))
            | (LetUnit(f, x), LetUnit(g, y))
            | (Pair(f, x), Pair(g, y)) => self.term(f, g) && self.term(x, y),
            (Inl(x), Inl(y))
            | (Inr(x), Inr(y))
            | (Evt(x), Evt(y))
            | (GIntro(x), GIntro(y))
            | (RunG(x), RunG(y))
            | (FIntro(x), FIntro(y))
            | (Fold(x), Fold(y))
            | (Unfold(x), Unfold(y)) => self.term(x, y),
            (At(x, i), At(y, j)) | (IndexApp(x, i), IndexApp(y, j)) | (Pack(i, x), Pack(j, y)) => {
                self.index(i, j) && self.term(x, y)
            }
            (LetPair(a1, a2, x1, x2), LetPair(b1, b2, y1, y2)) => {
                self.term(x1, y1) && self.with(a1, b1, |e| e.with(a2, b2, |e| e.term(x2, y2)))
            }
            (LetPairAt(a1, a2, i, x1, x2), LetPairAt(b1, b2, j, y1, y2)) => {
                self.index(i, j) && self.term(x1, y1) && self.with(a1, b1, |e| e.with(a2, b2, |e| e.term(x2, y2)))
            }
            (LetEvt(s, x1, x2), LetEvt(t, y1, y2))
            | (LetF(s, x1, x2), LetF(t, y1, y2))
            | (Let(s, x1, x2), Let(t, y1, y2)) => self.term(x1, y1) && self.with(s, t, |e| e.term(x2, y2)),
            (LetAt(s, i, x1, x2), LetAt(t, j, y1, y2)) => {
                self.index(i, j) && self.term(x1, y1) && self.with(s, t, |e| e.term(x2, y2))
            }
            (LetUnitAt(i, x1, x2), LetUnitAt(j, y1, y2)) => {
                self.index(i, j) && self.term(x1, y1) && self.term(x2, y2)
            }
            (LetPack(s, a1, x1, x2), LetPack(t, b1, y1, y2)) => {
                self.term(x1, y1) && self.with(s, t, |e| e.with(a1, b1, |e| e.term(x2, y2)))
            }
            (IndexLam(s, o, x), IndexLam(t, p, y)) => o == p && self.with(s, t, |e| e.term(x, y)),
            (Case(s1, l1, lb1, r1, rb1), Case(s2, l2, lb2, r2, rb2)) => {
                self.term(s1, s2)
                    && self.with(l1, l2, |e| e.term(lb1, lb2))
                    && self.with(r1, r2, |e| e.term(rb1, rb2))
            }
            (Select(p), Select(q)) => {
                self.term(&p.left, &q.left)
                    && self.term(&p.right, &q.right)
                    && self.with(&p.left_bind, &q.left_bind, |e| e.term(&p.left_body, &q.left_body))
                    && self.with(&p.right_bind, &q.right_bind, |e| e.term(&p.right_body, &q.right_body))
            }
            (Annot(x, s), Annot(y, t)) => self.annot(s, t) && self.term(x, y),
            (LetPat(p, x1, x2), LetPat(q, y1, y2)) => {
                self.term(x1, y1) && self.pattern(p, q, &mut |e| e.term(x2, y2))
            }
            _ => false,
        }
    }
}

pub fn alpha_eq(a: &LinType, b: &LinType) -> bool {
    Env::default().lin(a, b)
}

pub fn alpha_eq_cart(a: &CartType, b: &CartType) -> bool {
    Env::default().cart(a, b)
}

pub fn alpha_eq_term(a: &Term, b: &Term) -> bool {
    Env::default().term(a, b)
}

/// Alpha-equality of whole programs; definitions are compared in order.
pub fn alpha_eq_program(a: &SourceProgram, b: &SourceProgram) -> bool {
    a.entry == b.entry
        && a.definitions.len() == b.definitions.len()
        && a.definitions.iter().zip(&b.definitions).all(|(x, y)| {
            let mut env = Env::default();
            x.name == y.name
                && match (&x.ty, &y.ty) {
                    (Type::Lin(s), Type::Lin(t)) => {
                        // Leading quantifier binders may scope over a Λ-free body.
                        let ok = env.lin(s, t);
                        let (mut s, mut t) = (s, t);
                        while let (LinType::Forall(p, _, s2), LinType::Forall(q, _, t2)) = (s, t) {
                            env.pairs.push((p.uid, q.uid));
                            s = s2;
                            t = t2;
                        }
                        ok
                    }
                    (Type::Cart(s), Type::Cart(t)) => env.cart(s, t),
                    _ => false,
                }
                && env.term(&x.body, &y.body)
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse, parse_lin_type, parse_term};

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    #[test]
    fn bound_names_do_not_matter() {
        assert!(alpha_eq_term(&t("λx. λy. (x, y)"), &t("λa. λb. (a, b)")));
        assert!(!alpha_eq_term(&t("λx. λy. (x, y)"), &t("λa. λb. (b, a)")));
        assert!(alpha_eq_term(&t("let pack(i, w) = e in f [i] w"), &t("let pack(j, v) = e in f [j] v")));
    }

    #[test]
    fn free_names_do() {
        assert!(!alpha_eq_term(&t("λx. y"), &t("λx. z")));
        assert!(!alpha_eq_term(&t("f [i]"), &t("f [j]")));
    }

    #[test]
    fn types_with_binders() {
        let a = parse_lin_type("∀(i:Id). Widget i ⊸ Widget i").unwrap();
        let b = parse_lin_type("∀(j:Id). Widget j ⊸ Widget j").unwrap();
        let c = parse_lin_type("∀(j:Time). Widget j ⊸ Widget j").unwrap();
        assert!(alpha_eq(&a, &b));
        assert!(!alpha_eq(&a, &c));
        assert!(alpha_eq(&parse_lin_type("ν α. ◇α").unwrap(), &parse_lin_type("ν β. ◇β").unwrap()));
    }

    #[test]
    fn select_binders() {
        assert!(alpha_eq_term(
            &t("λa. λb. select a as x => x | b as y => y"),
            &t("λc. λd. select c as u => u | d as v => v")
        ));
    }

    #[test]
    fn programs_compare_definitions_pairwise() {
        let a = parse("def f : I ⊸ I = λx. x\n").unwrap();
        let b = parse("def f : I ⊸ I = λy. y\n").unwrap();
        let c = parse("def g : I ⊸ I = λy. y\n").unwrap();
        assert!(alpha_eq_program(&a, &b));
        assert!(!alpha_eq_program(&a, &c));
    }
}
