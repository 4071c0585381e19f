//! Bidirectional leftover-typing checker.
//!
//! Δ is threaded as one stack of entries with usage marks. Scopes that restrict
//! access (delay frames, select branches, `G` bodies, event continuations) hide
//! entries instead of removing them, so leftover marks survive the scope.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::api::{ApiTable, SCHEMATIC};
use super::context::{CartContext, Hidden, IndexContext, LinEntry, LinearContext};
use super::derivation::{render_entry, Derivation, DerivationNode, RawEntry, RawHyp, RawNode};
use super::subst::{instantiate, subst_tyvar, unroll, zonk_term};
use super::{ErrorKind, TypeError};
use crate::syntax::ast::*;
use crate::syntax::desugar::max_uid_meta;

type R<T> = Result<T, TypeError>;

#[derive(Debug, Clone)]
struct MetaInfo {
    sort: IndexSort,
    /// Θ (by uid) when the metavariable was created; solutions may only mention these.
    scope: HashSet<u32>,
    span: Span,
    solution: Option<IndexTerm>,
}

pub(crate) struct Checker<'g> {
    globals: &'g HashMap<String, Type>,
    theta: IndexContext,
    gamma: CartContext,
    delta: LinearContext,
    metas: BTreeMap<u32, MetaInfo>,
    next_uid: u32,
    nodes: Vec<RawNode>,
    stack: Vec<usize>,
}

fn err<T>(kind: ErrorKind, span: Span, msg: impl Into<String>) -> R<T> {
    Err(TypeError::new(kind, span, msg))
}

fn rule_of(t: &Term) -> &'static str {
    use TermKind::*;
    match &t.kind {
        Var(_) => "Var",
        Global(_) => "Global",
        Lam(..) => "⊸-I",
        App(..) => "⊸-E",
        Unit => "I-I",
        Star => "1-I",
        ColorLit(_) | CharLit(_) => "Const",
        LetUnit(..) => "I-E",
        Pair(..) => "⊗-I",
        LetPair(..) => "⊗-E",
        Inl(_) | Inr(_) => "⊕-I",
        Case(..) => "⊕-E",
        Evt(_) => "◇-I",
        LetEvt(..) => "◇-E",
        At(..) => "@-I",
        LetAt(..) => "@-E",
        LetUnitAt(..) => "I_τ-E",
        LetPairAt(..) => "⊗_τ-E",
        GIntro(_) => "G-I",
        RunG(_) => "G-E",
        FIntro(_) => "F-I",
        LetF(..) => "F-E",
        IndexLam(..) => "∀-I",
        IndexApp(..) => "∀-E",
        Pack(..) => "∃-I",
        LetPack(..) => "∃-E",
        Select(_) => "select",
        Fold(_) => "fold",
        Unfold(_) => "unfold",
        Let(..) => "let",
        Annot(..) => "anno",
        LetPat(..) => "pattern",
    }
}

fn is_now(i: &IndexTerm) -> bool {
    matches!(i, IndexTerm::TimeLit(0))
}

fn mentions_index(t: &LinType, uid: u32) -> bool {
    let hit = |i: &IndexTerm| matches!(i, IndexTerm::Var(s) if s.uid == uid);
    match t {
        LinType::I | LinType::TyVar(_) => false,
        LinType::Tensor(a, b) | LinType::Plus(a, b) | LinType::Lolli(a, b) => {
            mentions_index(a, uid) || mentions_index(b, uid)
        }
        LinType::Diamond(a) | LinType::Nu(_, a) | LinType::Forall(_, _, a) | LinType::Exists(_, _, a) => {
            mentions_index(a, uid)
        }
        LinType::At(a, i) => hit(i) || mentions_index(a, uid),
        LinType::F(x) => mentions_index_cart(x, uid),
        LinType::Widget(i) => hit(i),
        LinType::Prefix(i, j) => hit(i) || hit(j),
    }
}

fn mentions_index_cart(t: &CartType, uid: u32) -> bool {
    match t {
        CartType::Arrow(a, b) => mentions_index_cart(a, uid) || mentions_index_cart(b, uid),
        CartType::G(a) => mentions_index(a, uid),
        _ => false,
    }
}

/// Binder pairs entered in lockstep during unification.
type Env = Vec<(u32, u32)>;

fn env_sym(env: &Env, a: &Symbol, b: &Symbol) -> bool {
    let la = env.iter().rposition(|&(x, _)| x == a.uid);
    let lb = env.iter().rposition(|&(_, y)| y == b.uid);
    match (la, lb) {
        (Some(i), Some(j)) => i == j,
        (None, None) => a == b,
        _ => false,
    }
}

impl<'g> Checker<'g> {
    pub(crate) fn new(globals: &'g HashMap<String, Type>, next_uid: u32) -> Self {
        Checker {
            globals,
            theta: IndexContext::new(),
            gamma: CartContext::new(),
            delta: LinearContext::new(),
            metas: BTreeMap::new(),
            next_uid,
            nodes: Vec::new(),
            stack: Vec::new(),
        }
    }

    fn fresh(&mut self, name: &str) -> Symbol {
        self.next_uid += 1;
        Symbol::new(name, self.next_uid)
    }

    // ------------------------------------------------------------ derivations

    fn node<T>(&mut self, rule: &'static str, span: Span, f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        let id = self.nodes.len();
        let parent = self.stack.last().copied();
        let theta = self.theta.entries.iter().map(|(s, o)| format!("{}:{}", s.name, o)).collect();
        self.nodes.push(RawNode { parent, children: vec![], rule, span, theta, bound: vec![], consumed: vec![] });
        if let Some(p) = parent {
            self.nodes[p].children.push(id);
        }
        let before: Vec<bool> = self.delta.entries.iter().map(|e| e.used).collect();
        self.stack.push(id);
        let r = f(self);
        self.stack.pop();
        let n = before.len().min(self.delta.entries.len());
        for (k, was_used) in before.iter().enumerate().take(n) {
            let e = &self.delta.entries[k];
            if !was_used && e.used {
                let raw = RawEntry { name: e.name.clone(), ty: e.ty.clone(), time: e.time.clone() };
                self.nodes[id].consumed.push((raw, e.origin));
            }
        }
        r
    }

    fn note(&mut self, hyp: RawHyp) {
        if let Some(&id) = self.stack.last() {
            self.nodes[id].bound.push(hyp);
        }
    }

    pub(crate) fn finish_derivation(&self, name: &str) -> Derivation {
        let zl = |t: &LinType| self.zonk(t);
        let zi = |i: &IndexTerm| self.zonk_index(i);
        let nodes = self
            .nodes
            .iter()
            .enumerate()
            .map(|(id, n)| DerivationNode {
                id,
                parent: n.parent,
                children: n.children.clone(),
                rule: n.rule,
                line: n.span.line,
                span: n.span,
                theta: n.theta.clone(),
                bound: n
                    .bound
                    .iter()
                    .map(|h| match h {
                        RawHyp::Index(s) | RawHyp::Cart(s) => s.clone(),
                        RawHyp::Lin(e) => render_entry(e, &zl, &zi),
                    })
                    .collect(),
                consumed: n.consumed.iter().map(|(e, _)| render_entry(e, &zl, &zi)).collect(),
                consumed_origins: n.consumed.iter().map(|(_, o)| *o).collect(),
            })
            .collect();
        Derivation { definition: name.to_string(), nodes }
    }

    // ---------------------------------------------------------------- metas

    fn zonk_index(&self, i: &IndexTerm) -> IndexTerm {
        match i {
            IndexTerm::Meta(m) => match self.metas.get(m).and_then(|x| x.solution.as_ref()) {
                Some(s) => self.zonk_index(s),
                None => i.clone(),
            },
            _ => i.clone(),
        }
    }

    pub(crate) fn zonk(&self, t: &LinType) -> LinType {
        use LinType::*;
        let z = |x: &LinType| Box::new(self.zonk(x));
        match t {
            I | TyVar(_) => t.clone(),
            Tensor(a, b) => Tensor(z(a), z(b)),
            Plus(a, b) => Plus(z(a), z(b)),
            Lolli(a, b) => Lolli(z(a), z(b)),
            Diamond(a) => Diamond(z(a)),
            At(a, i) => At(z(a), self.zonk_index(i)),
            F(x) => F(Box::new(self.zonk_cart(x))),
            Forall(s, o, b) => Forall(s.clone(), *o, z(b)),
            Exists(s, o, b) => Exists(s.clone(), *o, z(b)),
            Widget(i) => Widget(self.zonk_index(i)),
            Prefix(i, j) => Prefix(self.zonk_index(i), self.zonk_index(j)),
            Nu(s, b) => Nu(s.clone(), z(b)),
        }
    }

    fn zonk_cart(&self, t: &CartType) -> CartType {
        match t {
            CartType::Arrow(a, b) => CartType::Arrow(Box::new(self.zonk_cart(a)), Box::new(self.zonk_cart(b))),
            CartType::G(a) => CartType::G(Box::new(self.zonk(a))),
            other => other.clone(),
        }
    }

    pub(crate) fn solutions(&self) -> BTreeMap<u32, IndexTerm> {
        self.metas
            .iter()
            .filter_map(|(m, info)| info.solution.as_ref().map(|_| (*m, self.zonk_index(&IndexTerm::Meta(*m)))))
            .collect()
    }

    pub(crate) fn unsolved(&self) -> Vec<TypeError> {
        self.metas
            .iter()
            .filter(|(_, m)| m.solution.is_none())
            .map(|(id, m)| {
                TypeError::new(
                    ErrorKind::UnsolvedIndexMetavariable,
                    m.span,
                    format!("cannot infer the {} index ?{id}; supply it explicitly", m.sort),
                )
            })
            .collect()
    }

    fn register_meta(&mut self, m: u32, sort: IndexSort, span: Span) -> R<()> {
        match self.metas.get(&m) {
            Some(info) if info.sort != sort => {
                err(ErrorKind::SortMismatch, span, format!("?{m} is used at sorts {} and {sort}", info.sort))
            }
            Some(_) => Ok(()),
            None => {
                let scope = self.theta.uids().into_iter().collect();
                self.metas.insert(m, MetaInfo { sort, scope, span, solution: None });
                Ok(())
            }
        }
    }

    pub(crate) fn check_index(&mut self, i: &IndexTerm, sort: IndexSort, span: Span) -> R<()> {
        let found = match i {
            IndexTerm::Var(s) => match self.theta.sort_of(s) {
                Some(o) => o,
                None => return err(ErrorKind::UnboundVariable, span, format!("index variable `{}` is not in scope", s.name)),
            },
            IndexTerm::TimeLit(_) | IndexTerm::Infinity => IndexSort::Time,
            IndexTerm::IdLit(_) => IndexSort::Id,
            IndexTerm::Meta(m) => return self.register_meta(*m, sort, span),
        };
        if found == sort {
            Ok(())
        } else {
            err(ErrorKind::SortMismatch, span, format!("index `{i}` has sort {found}, expected {sort}"))
        }
    }

    fn solve(&mut self, m: u32, v: &IndexTerm, env: &Env) -> bool {
        let Some(info) = self.metas.get(&m) else { return false };
        let ok = match v {
            IndexTerm::Var(s) => {
                !env.iter().any(|&(a, b)| a == s.uid || b == s.uid)
                    && info.scope.contains(&s.uid)
                    && self.theta.sort_of(s) == Some(info.sort)
            }
            IndexTerm::TimeLit(_) | IndexTerm::Infinity => info.sort == IndexSort::Time,
            IndexTerm::IdLit(_) => info.sort == IndexSort::Id,
            IndexTerm::Meta(n) => {
                let sort = self.metas.get(n).map(|x| x.sort);
                sort == Some(info.sort)
            }
        };
        if ok {
            self.metas.get_mut(&m).unwrap().solution = Some(v.clone());
        }
        ok
    }

    fn unify_index(&mut self, a: &IndexTerm, b: &IndexTerm, env: &Env) -> bool {
        let (a, b) = (self.zonk_index(a), self.zonk_index(b));
        match (&a, &b) {
            (IndexTerm::Meta(m), IndexTerm::Meta(n)) if m == n => true,
            (IndexTerm::Meta(m), _) if self.metas.contains_key(m) => self.solve(*m, &b, env),
            (_, IndexTerm::Meta(n)) if self.metas.contains_key(n) => self.solve(*n, &a, env),
            (IndexTerm::Var(x), IndexTerm::Var(y)) => env_sym(env, x, y),
            _ => a == b,
        }
    }

    fn unify_lin(&mut self, a: &LinType, b: &LinType, env: &mut Env) -> bool {
        use LinType::*;
        match (a, b) {
            (I, I) => true,
            (Tensor(a1, a2), Tensor(b1, b2)) | (Plus(a1, a2), Plus(b1, b2)) | (Lolli(a1, a2), Lolli(b1, b2)) => {
                self.unify_lin(a1, b1, env) && self.unify_lin(a2, b2, env)
            }
            (Diamond(x), Diamond(y)) => self.unify_lin(x, y, env),
            (At(x, i), At(y, j)) => self.unify_index(i, j, env) && self.unify_lin(x, y, env),
            (F(x), F(y)) => self.unify_cart(x, y, env),
            (Forall(s, o, x), Forall(t, p, y)) | (Exists(s, o, x), Exists(t, p, y)) if o == p => {
                env.push((s.uid, t.uid));
                let r = self.unify_lin(x, y, env);
                env.pop();
                r
            }
            (Nu(s, x), Nu(t, y)) => {
                env.push((s.uid, t.uid));
                let r = self.unify_lin(x, y, env);
                env.pop();
                r
            }
            (Widget(i), Widget(j)) => self.unify_index(i, j, env),
            (Prefix(i, s), Prefix(j, t)) => self.unify_index(i, j, env) && self.unify_index(s, t, env),
            (TyVar(x), TyVar(y)) => env_sym(env, x, y),
            _ => false,
        }
    }

    fn unify_cart(&mut self, a: &CartType, b: &CartType, env: &mut Env) -> bool {
        match (a, b) {
            (CartType::Unit, CartType::Unit) => true,
            (CartType::Arrow(a1, a2), CartType::Arrow(b1, b2)) => {
                self.unify_cart(a1, b1, env) && self.unify_cart(a2, b2, env)
            }
            (CartType::G(x), CartType::G(y)) => self.unify_lin(x, y, env),
            (CartType::Base(x), CartType::Base(y)) => x == y,
            _ => false,
        }
    }

    fn expect_eq(&mut self, found: &LinType, expected: &LinType, span: Span) -> R<()> {
        if self.unify_lin(found, expected, &mut Env::new()) {
            Ok(())
        } else {
            err(
                ErrorKind::TypeMismatch,
                span,
                format!("expected `{}`, found `{}`", self.zonk(expected), self.zonk(found)),
            )
        }
    }

    fn expect_eq_cart(&mut self, found: &CartType, expected: &CartType, span: Span) -> R<()> {
        if self.unify_cart(found, expected, &mut Env::new()) {
            Ok(())
        } else {
            err(
                ErrorKind::TypeMismatch,
                span,
                format!("expected `{}`, found `{}`", self.zonk_cart(expected), self.zonk_cart(found)),
            )
        }
    }

    fn expect_time(&mut self, found: &IndexTerm, expected: &IndexTerm, span: Span) -> R<()> {
        if self.unify_index(found, expected, &Env::new()) {
            Ok(())
        } else {
            err(
                ErrorKind::TimeMismatch,
                span,
                format!("expected time `{}`, found `{}`", self.zonk_index(expected), self.zonk_index(found)),
            )
        }
    }

    /// Renames every binder of a global's type so that distinct uses never share binders.
    fn freshen(&mut self, t: &LinType) -> LinType {
        use LinType::*;
        match t {
            Forall(s, o, b) | Exists(s, o, b) => {
                let f = self.fresh(&s.name);
                let body = instantiate(b, s, &IndexTerm::Var(f.clone()));
                let body = Box::new(self.freshen(&body));
                if matches!(t, Forall(..)) {
                    Forall(f, *o, body)
                } else {
                    Exists(f, *o, body)
                }
            }
            Nu(s, b) => {
                let f = self.fresh(&s.name);
                let body = subst_tyvar(b, s, &TyVar(f.clone()));
                Nu(f, Box::new(self.freshen(&body)))
            }
            Tensor(a, b) => Tensor(Box::new(self.freshen(a)), Box::new(self.freshen(b))),
            Plus(a, b) => Plus(Box::new(self.freshen(a)), Box::new(self.freshen(b))),
            Lolli(a, b) => Lolli(Box::new(self.freshen(a)), Box::new(self.freshen(b))),
            Diamond(a) => Diamond(Box::new(self.freshen(a))),
            At(a, i) => At(Box::new(self.freshen(a)), i.clone()),
            F(x) => F(Box::new(self.freshen_cart(x))),
            other => other.clone(),
        }
    }

    fn freshen_cart(&mut self, t: &CartType) -> CartType {
        match t {
            CartType::Arrow(a, b) => CartType::Arrow(Box::new(self.freshen_cart(a)), Box::new(self.freshen_cart(b))),
            CartType::G(a) => CartType::G(Box::new(self.freshen(a))),
            other => other.clone(),
        }
    }
}

// -------------------------------------------------------------------- contexts

impl Checker<'_> {
    fn bind_lin(&mut self, name: &Symbol, ty: LinType, time: IndexTerm, span: Span) {
        let origin = self.stack.last().copied().unwrap_or(usize::MAX);
        self.note(RawHyp::Lin(RawEntry { name: name.clone(), ty: ty.clone(), time: time.clone() }));
        let mut e = LinEntry::new(name.clone(), ty, time);
        e.origin = origin;
        e.span = span;
        self.delta.entries.push(e);
    }

    /// Pops entries above `mark`; each must have been consumed.
    fn close(&mut self, mark: usize) -> R<()> {
        let popped = self.delta.entries.split_off(mark);
        match popped.into_iter().find(|e| !e.used) {
            Some(e) => err(
                ErrorKind::LinearVariableUnused,
                e.span,
                format!("linear variable `{}` is never used", e.name.name),
            ),
            None => Ok(()),
        }
    }

    fn bind_index<T>(&mut self, s: &Symbol, sort: IndexSort, f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        self.note(RawHyp::Index(format!("{}:{}", s.name, sort)));
        self.theta.entries.push((s.clone(), sort));
        let r = f(self);
        self.theta.entries.pop();
        r
    }

    fn bind_cart<T>(&mut self, s: &Symbol, ty: CartType, f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        self.note(RawHyp::Cart(format!("{} : {}", s.name, self.zonk_cart(&ty))));
        self.gamma.entries.push((s.clone(), ty));
        let r = f(self);
        self.gamma.entries.pop();
        r
    }

    /// Runs `f` with every current entry hidden for reason `why`.
    fn hide_all<T>(&mut self, why: Hidden, f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        let saved: Vec<_> = self.delta.entries.iter().map(|e| e.hidden).collect();
        for e in &mut self.delta.entries {
            e.hidden = Some(why);
        }
        let r = f(self);
        for (e, h) in self.delta.entries.iter_mut().zip(saved) {
            e.hidden = h;
        }
        r
    }

    /// Delay frame: entries annotated at `tau` become current, all others are hidden.
    fn delay<T>(&mut self, tau: &IndexTerm, f: impl FnOnce(&mut Self) -> R<T>) -> R<T> {
        let tau = self.zonk_index(tau);
        if is_now(&tau) {
            return f(self);
        }
        let saved: Vec<_> = self.delta.entries.iter().map(|e| (e.eff.clone(), e.hidden)).collect();
        for k in 0..self.delta.entries.len() {
            let eff = self.zonk_index(&self.delta.entries[k].eff);
            let e = &mut self.delta.entries[k];
            if e.hidden.is_none() {
                if eff == tau {
                    e.eff = IndexTerm::TimeLit(0);
                } else {
                    e.hidden = Some(Hidden::Time);
                }
            }
        }
        let r = f(self);
        for (e, (eff, h)) in self.delta.entries.iter_mut().zip(saved) {
            e.eff = eff;
            e.hidden = h;
        }
        r
    }

    fn use_var(&mut self, s: &Symbol, span: Span) -> R<LinType> {
        if let Some(k) = self.delta.entries.iter().rposition(|e| &e.name == s) {
            let e = &self.delta.entries[k];
            let name = &s.name;
            if e.used {
                return err(ErrorKind::LinearVariableReused, span, format!("linear variable `{name}` is used more than once"));
            }
            match e.hidden {
                Some(Hidden::Select) => {
                    return err(
                        ErrorKind::LinearVariableUnavailableInSelect,
                        span,
                        format!("`{name}` is bound outside the select; branches may only use their own bindings"),
                    )
                }
                Some(Hidden::UnderG) => {
                    return err(
                        ErrorKind::NonEmptyLinearContextUnderG,
                        span,
                        format!("`{name}` is linear and cannot be captured by a `G` body"),
                    )
                }
                Some(Hidden::EventCont) => {
                    return err(
                        ErrorKind::UnboundVariable,
                        span,
                        format!("`{name}` is not available after waiting for an event; pass it through the event"),
                    )
                }
                Some(Hidden::Time) => {
                    let t = self.zonk_index(&e.time);
                    return err(ErrorKind::TimeMismatch, span, format!("`{name}` is available at time {t}, not here"));
                }
                None => {}
            }
            let eff = self.zonk_index(&e.eff);
            if !is_now(&eff) {
                return err(ErrorKind::TimeMismatch, span, format!("`{name}` is available only at time {eff}"));
            }
            let e = &mut self.delta.entries[k];
            e.used = true;
            return Ok(e.ty.clone());
        }
        if self.gamma.lookup(s).is_some() {
            return err(
                ErrorKind::TypeMismatch,
                span,
                format!("Cartesian variable `{}` used as a linear term; wrap it as `F {}`", s.name, s.name),
            );
        }
        err(ErrorKind::UnboundVariable, span, format!("unbound variable `{}`", s.name))
    }

    fn global_lin(&mut self, g: &str, span: Span) -> R<LinType> {
        if let Some(t) = ApiTable::standard().get(g) {
            if SCHEMATIC.contains(&g) {
                return err(ErrorKind::TypeMismatch, span, format!("`{g}` must be applied to an argument"));
            }
            let t = t.clone();
            return Ok(self.freshen(&t));
        }
        match self.globals.get(g) {
            Some(Type::Lin(t)) => {
                let t = t.clone();
                Ok(self.freshen(&t))
            }
            Some(Type::Cart(x)) => err(
                ErrorKind::TypeMismatch,
                span,
                format!("`{g}` has Cartesian type `{x}`; use it under `F` or `runG`"),
            ),
            None => err(ErrorKind::UnboundVariable, span, format!("unknown name `{g}`")),
        }
    }
}

// ---------------------------------------------------------------- judgments

impl Checker<'_> {
    pub(crate) fn synth(&mut self, t: &Term) -> R<LinType> {
        self.node(rule_of(t), t.span, |c| c.synth_inner(t))
    }

    pub(crate) fn check(&mut self, t: &Term, ty: &LinType) -> R<()> {
        self.node(rule_of(t), t.span, |c| c.check_inner(t, ty))
    }

    fn synth_inner(&mut self, t: &Term) -> R<LinType> {
        use TermKind::*;
        let sp = t.span;
        match &t.kind {
            Var(s) => self.use_var(s, sp),
            Global(g) => self.global_lin(g, sp),
            App(f, a) => match &f.kind {
                Global(g) if g == "out" => {
                    let found = self.synth(a)?;
                    match self.zonk(&found) {
                        LinType::Diamond(inner) => {
                            let k = self.fresh("k");
                            let at = LinType::At(inner, IndexTerm::Var(k.clone()));
                            Ok(LinType::Exists(k, IndexSort::Time, Box::new(at)))
                        }
                        other => err(ErrorKind::TypeMismatch, a.span, format!("`out` expects an event `◇A`, found `{other}`")),
                    }
                }
                Global(g) if g == "into" => {
                    let found = self.synth(a)?;
                    match self.zonk(&found) {
                        LinType::Exists(k, IndexSort::Time, body) => match *body {
                            LinType::At(inner, IndexTerm::Var(v)) if v == k && !mentions_index(&inner, k.uid) => {
                                Ok(LinType::Diamond(inner))
                            }
                            other => err(ErrorKind::TypeMismatch, a.span, format!("`into` expects `∃(k:Time). A @ k`, found body `{other}`")),
                        },
                        other => err(ErrorKind::TypeMismatch, a.span, format!("`into` expects `∃(k:Time). A @ k`, found `{other}`")),
                    }
                }
                _ => {
                    let ft = self.synth(f)?;
                    match self.zonk(&ft) {
                        LinType::Lolli(dom, cod) => {
                            self.check(a, &dom)?;
                            Ok(*cod)
                        }
                        other => err(ErrorKind::TypeMismatch, f.span, format!("applying a term of non-function type `{other}`")),
                    }
                }
            },
            IndexApp(f, i) => {
                let ft = self.synth(f)?;
                match self.zonk(&ft) {
                    LinType::Forall(b, sort, body) => {
                        self.check_index(i, sort, sp)?;
                        Ok(instantiate(&body, &b, i))
                    }
                    other => err(ErrorKind::TypeMismatch, f.span, format!("index application to non-polymorphic type `{other}`")),
                }
            }
            Unit => Ok(LinType::I),
            Pair(a, b) => {
                let ta = self.synth(a)?;
                let tb = self.synth(b)?;
                Ok(LinType::Tensor(Box::new(ta), Box::new(tb)))
            }
            Evt(a) => Ok(LinType::Diamond(Box::new(self.synth(a)?))),
            At(a, tau) => {
                self.check_index(tau, IndexSort::Time, sp)?;
                let ta = self.delay(tau, |c| c.synth(a))?;
                Ok(LinType::At(Box::new(ta), tau.clone()))
            }
            RunG(e) => match self.synth_cart(e)? {
                CartType::G(a) => Ok(*a),
                other => err(ErrorKind::TypeMismatch, e.span, format!("`runG` expects a `G` value, found `{other}`")),
            },
            FIntro(e) => Ok(LinType::F(Box::new(self.synth_cart(e)?))),
            Unfold(a) => {
                let ta = self.synth(a)?;
                let ta = self.zonk(&ta);
                unroll(&ta).ok_or_else(|| TypeError::new(ErrorKind::TypeMismatch, a.span, format!("`unfold` expects a `ν` type, found `{ta}`")))
            }
            Annot(a, LinOrCart::Lin(ty)) => {
                self.check(a, ty)?;
                Ok(ty.clone())
            }
            IndexLam(s, o, body) => {
                let b = self.bind_index(s, *o, |c| c.synth(body))?;
                Ok(LinType::Forall(s.clone(), *o, Box::new(b)))
            }
            Lam(x, Some(LinOrCart::Lin(dom)), body) => {
                let mark = self.delta.entries.len();
                self.bind_lin(x, dom.clone(), IndexTerm::TimeLit(0), sp);
                let cod = self.synth(body)?;
                self.close(mark)?;
                Ok(LinType::Lolli(Box::new(dom.clone()), Box::new(cod)))
            }
            Let(..) | LetUnit(..) | LetPair(..) | LetEvt(..) | LetAt(..) | LetUnitAt(..) | LetPairAt(..) | LetF(..)
            | LetPack(..) | Case(..) | Select(..) => self.elim(t, None),
            Lam(..) | Pack(..) | Inl(_) | Inr(_) | Fold(_) => {
                err(ErrorKind::TypeMismatch, sp, "cannot infer a type here; add an annotation `(t : A)`")
            }
            Star | ColorLit(_) | CharLit(_) | GIntro(_) | Annot(_, LinOrCart::Cart(_)) => {
                err(ErrorKind::TypeMismatch, sp, "Cartesian term in a linear position; wrap it with `F`")
            }
            LetPat(..) => err(ErrorKind::TypeMismatch, sp, "pattern let must be desugared before checking"),
        }
    }

    fn check_inner(&mut self, t: &Term, expected: &LinType) -> R<()> {
        use TermKind::*;
        let sp = t.span;
        let expected = self.zonk(expected);
        match (&t.kind, &expected) {
            (Lam(x, ann, body), LinType::Lolli(dom, cod)) => {
                match ann {
                    Some(LinOrCart::Lin(a)) => self.expect_eq(a, dom, sp)?,
                    Some(LinOrCart::Cart(_)) => {
                        return err(ErrorKind::TypeMismatch, sp, "Cartesian binder annotation on a linear function")
                    }
                    None => {}
                }
                let mark = self.delta.entries.len();
                self.bind_lin(x, (**dom).clone(), IndexTerm::TimeLit(0), sp);
                self.check(body, cod)?;
                self.close(mark)
            }
            (IndexLam(s, o, body), LinType::Forall(b, o2, bt)) => {
                if o != o2 {
                    return err(ErrorKind::SortMismatch, sp, format!("Λ binds sort {o} but the type quantifies over {o2}"));
                }
                let bt = instantiate(bt, b, &IndexTerm::Var(s.clone()));
                self.bind_index(s, *o, |c| c.check(body, &bt))
            }
            (Pack(i, body), LinType::Exists(b, o, bt)) => {
                self.check_index(i, *o, sp)?;
                let bt = instantiate(bt, b, i);
                self.check(body, &bt)
            }
            (Inl(a), LinType::Plus(l, _)) => self.check(a, l),
            (Inr(a), LinType::Plus(_, r)) => self.check(a, r),
            (Fold(a), LinType::Nu(..)) => {
                let unrolled = unroll(&expected).expect("ν type unrolls");
                self.check(a, &unrolled)
            }
            (Pair(a, b), LinType::Tensor(ta, tb)) => {
                self.check(a, ta)?;
                self.check(b, tb)
            }
            (Unit, LinType::I) => Ok(()),
            (Evt(a), LinType::Diamond(ta)) => self.check(a, ta),
            (At(a, tau), LinType::At(ta, sigma)) => {
                self.check_index(tau, IndexSort::Time, sp)?;
                self.expect_time(tau, sigma, sp)?;
                self.delay(tau, |c| c.check(a, ta))
            }
            (FIntro(e), LinType::F(x)) => self.check_cart(e, x),
            (App(f, a), LinType::Exists(k, IndexSort::Time, body)) if matches!(&f.kind, Global(g) if g == "out") => {
                match &**body {
                    LinType::At(inner, IndexTerm::Var(v)) if v == k && !mentions_index(inner, k.uid) => {
                        self.check(a, &LinType::Diamond(inner.clone()))
                    }
                    _ => err(ErrorKind::TypeMismatch, sp, format!("`out` produces `∃(k:Time). A @ k`, expected `{expected}`")),
                }
            }
            (App(f, a), LinType::Diamond(inner)) if matches!(&f.kind, Global(g) if g == "into") => {
                let k = self.fresh("k");
                let want = LinType::Exists(k.clone(), IndexSort::Time, Box::new(LinType::At(inner.clone(), IndexTerm::Var(k))));
                self.check(a, &want)
            }
            (Let(..) | LetUnit(..) | LetPair(..) | LetEvt(..) | LetAt(..) | LetUnitAt(..) | LetPairAt(..) | LetF(..)
            | LetPack(..) | Case(..) | Select(..), _) => self.elim(t, Some(&expected)).map(|_| ()),
            _ => {
                let found = self.synth_inner(t)?;
                self.expect_eq(&found, &expected, sp)
            }
        }
    }

    fn cont(&mut self, body: &Term, expected: Option<&LinType>) -> R<LinType> {
        match expected {
            Some(e) => {
                self.check(body, e)?;
                Ok(e.clone())
            }
            None => self.synth(body),
        }
    }

    /// Elimination forms, in checking mode when `expected` is given.
    fn elim(&mut self, t: &Term, expected: Option<&LinType>) -> R<LinType> {
        use TermKind::*;
        let sp = t.span;
        let now = IndexTerm::TimeLit(0);
        let mark = self.delta.entries.len();
        match &t.kind {
            Let(x, t1, t2) => {
                let a = self.synth(t1)?;
                self.bind_lin(x, a, now, sp);
                let r = self.cont(t2, expected)?;
                self.close(mark)?;
                Ok(r)
            }
            LetUnit(t1, t2) => {
                self.check(t1, &LinType::I)?;
                self.cont(t2, expected)
            }
            LetPair(x, y, t1, t2) => {
                let found = self.synth(t1)?;
                let LinType::Tensor(a, b) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, t1.span, format!("expected a pair, found `{}`", self.zonk(&found)));
                };
                self.bind_lin(x, *a, now.clone(), sp);
                self.bind_lin(y, *b, now, sp);
                let r = self.cont(t2, expected)?;
                self.close(mark)?;
                Ok(r)
            }
            LetEvt(x, t1, t2) => {
                if let Some(e) = expected {
                    if !matches!(e, LinType::Diamond(_)) {
                        return err(ErrorKind::TypeMismatch, sp, format!("waiting for an event produces an event `◇B`, expected `{e}`"));
                    }
                }
                let found = self.synth(t1)?;
                let LinType::Diamond(a) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, t1.span, format!("expected an event, found `{}`", self.zonk(&found)));
                };
                let r = self.hide_all(Hidden::EventCont, |c| {
                    c.bind_lin(x, *a, now, sp);
                    let r = c.cont(t2, expected)?;
                    c.close(mark)?;
                    Ok(r)
                })?;
                match self.zonk(&r) {
                    LinType::Diamond(_) => Ok(r),
                    other => err(ErrorKind::TypeMismatch, t2.span, format!("the continuation of an event must be an event, found `{other}`")),
                }
            }
            LetAt(x, tau, t1, t2) => {
                self.check_index(tau, IndexSort::Time, sp)?;
                let found = self.synth(t1)?;
                let LinType::At(a, sigma) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, t1.span, format!("expected `A @ {tau}`, found `{}`", self.zonk(&found)));
                };
                self.expect_time(&sigma, tau, t1.span)?;
                self.bind_lin(x, *a, tau.clone(), sp);
                let r = self.cont(t2, expected)?;
                self.close(mark)?;
                Ok(r)
            }
            LetUnitAt(tau, t1, t2) => {
                self.check_index(tau, IndexSort::Time, sp)?;
                self.delay(tau, |c| c.check(t1, &LinType::I))?;
                self.cont(t2, expected)
            }
            LetPairAt(x, y, tau, t1, t2) => {
                self.check_index(tau, IndexSort::Time, sp)?;
                let found = self.delay(tau, |c| c.synth(t1))?;
                let LinType::Tensor(a, b) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, t1.span, format!("expected a pair, found `{}`", self.zonk(&found)));
                };
                self.bind_lin(x, *a, tau.clone(), sp);
                self.bind_lin(y, *b, tau.clone(), sp);
                let r = self.cont(t2, expected)?;
                self.close(mark)?;
                Ok(r)
            }
            LetF(x, t1, t2) => {
                let found = self.synth(t1)?;
                let LinType::F(xt) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, t1.span, format!("expected `F X`, found `{}`", self.zonk(&found)));
                };
                self.bind_cart(x, *xt, |c| c.cont(t2, expected))
            }
            LetPack(s, x, t1, t2) => {
                let found = self.synth(t1)?;
                let LinType::Exists(b, o, body) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, t1.span, format!("expected an existential, found `{}`", self.zonk(&found)));
                };
                let r = self.bind_index(s, o, |c| {
                    c.bind_lin(x, instantiate(&body, &b, &IndexTerm::Var(s.clone())), now, sp);
                    let r = c.cont(t2, expected)?;
                    c.close(mark)?;
                    Ok(r)
                })?;
                let r = self.zonk(&r);
                if mentions_index(&r, s.uid) {
                    return err(ErrorKind::TypeMismatch, sp, format!("index `{}` escapes its scope in `{r}`", s.name));
                }
                Ok(r)
            }
            Case(scrut, l, lb, r, rb) => {
                let found = self.synth(scrut)?;
                let LinType::Plus(a, b) = self.zonk(&found) else {
                    return err(ErrorKind::TypeMismatch, scrut.span, format!("expected a sum, found `{}`", self.zonk(&found)));
                };
                let before: Vec<bool> = self.delta.entries.iter().map(|e| e.used).collect();
                self.bind_lin(l, *a, now.clone(), sp);
                let ty = self.cont(lb, expected)?;
                self.close(mark)?;
                let after_left: Vec<bool> = self.delta.entries.iter().map(|e| e.used).collect();
                for (e, u) in self.delta.entries.iter_mut().zip(&before) {
                    e.used = *u;
                }
                self.bind_lin(r, *b, now, sp);
                self.check(rb, &ty)?;
                self.close(mark)?;
                let diff = self.delta.entries.iter().zip(&after_left).find(|(e, u)| e.used != **u);
                if let Some((e, _)) = diff {
                    return err(
                        ErrorKind::LinearVariableUnused,
                        sp,
                        format!("`{}` is consumed by only one branch of the case", e.name.name),
                    );
                }
                Ok(ty)
            }
            Select(p) => self.select(p, sp, expected),
            _ => unreachable!("elim called on a non-elimination form"),
        }
    }

    fn select(&mut self, p: &SelectParts, sp: Span, expected: Option<&LinType>) -> R<LinType> {
        let (TermKind::Var(xs), TermKind::Var(ys)) = (&p.left.kind, &p.right.kind) else {
            return err(ErrorKind::TypeMismatch, sp, "select scrutinees must be variables");
        };
        let tx = self.synth(&p.left)?;
        let LinType::Diamond(a) = self.zonk(&tx) else {
            return err(ErrorKind::TypeMismatch, p.left.span, format!("select expects an event, found `{}`", self.zonk(&tx)));
        };
        let ty = self.synth(&p.right)?;
        let LinType::Diamond(b) = self.zonk(&ty) else {
            return err(ErrorKind::TypeMismatch, p.right.span, format!("select expects an event, found `{}`", self.zonk(&ty)));
        };
        let mark = self.delta.entries.len();
        let now = IndexTerm::TimeLit(0);
        let result = self.hide_all(Hidden::Select, |c| {
            c.bind_lin(&p.left_bind, (*a).clone(), now.clone(), sp);
            c.bind_lin(ys, LinType::Diamond(b.clone()), now.clone(), sp);
            let r = c.cont(&p.left_body, expected)?;
            c.close(mark)?;
            c.bind_lin(&p.right_bind, (*b).clone(), now.clone(), sp);
            c.bind_lin(xs, LinType::Diamond(a.clone()), now.clone(), sp);
            c.check(&p.right_body, &r)?;
            c.close(mark)?;
            Ok(r)
        })?;
        match self.zonk(&result) {
            LinType::Diamond(_) => Ok(result),
            other => err(ErrorKind::TypeMismatch, sp, format!("select branches must produce an event, found `{other}`")),
        }
    }

    // ------------------------------------------------------------- Cartesian

    pub(crate) fn synth_cart(&mut self, e: &Term) -> R<CartType> {
        self.node(rule_of(e), e.span, |c| c.synth_cart_inner(e))
    }

    pub(crate) fn check_cart(&mut self, e: &Term, ty: &CartType) -> R<()> {
        self.node(rule_of(e), e.span, |c| c.check_cart_inner(e, ty))
    }

    fn synth_cart_inner(&mut self, e: &Term) -> R<CartType> {
        use TermKind::*;
        let sp = e.span;
        match &e.kind {
            Star => Ok(CartType::Unit),
            ColorLit(_) => Ok(CartType::Base(BaseType::Color)),
            CharLit(_) => Ok(CartType::Base(BaseType::Char)),
            Var(s) => match self.gamma.lookup(s) {
                Some(t) => Ok(t.clone()),
                None if self.delta.entries.iter().any(|x| &x.name == s) => err(
                    ErrorKind::TypeMismatch,
                    sp,
                    format!("linear variable `{}` used in a Cartesian position", s.name),
                ),
                None => err(ErrorKind::UnboundVariable, sp, format!("unbound variable `{}`", s.name)),
            },
            Global(g) => {
                if let Some(Type::Cart(x)) = self.globals.get(g.as_str()) {
                    return Ok(x.clone());
                }
                // A linear global is implicitly `G`-wrapped.
                let t = self.global_lin(g, sp)?;
                Ok(CartType::G(Box::new(t)))
            }
            App(f, a) => match self.synth_cart(f)? {
                CartType::Arrow(dom, cod) => {
                    self.check_cart(a, &dom)?;
                    Ok(*cod)
                }
                other => err(ErrorKind::TypeMismatch, f.span, format!("applying a term of non-function type `{other}`")),
            },
            GIntro(t) => {
                let a = self.hide_all(Hidden::UnderG, |c| c.synth(t))?;
                Ok(CartType::G(Box::new(a)))
            }
            Lam(x, Some(LinOrCart::Cart(dom)), body) => {
                let cod = self.bind_cart(x, dom.clone(), |c| c.synth_cart(body))?;
                Ok(CartType::Arrow(Box::new(dom.clone()), Box::new(cod)))
            }
            Annot(a, LinOrCart::Cart(x)) => {
                self.check_cart(a, x)?;
                Ok(x.clone())
            }
            _ => err(ErrorKind::TypeMismatch, sp, "expected a Cartesian term"),
        }
    }

    fn check_cart_inner(&mut self, e: &Term, expected: &CartType) -> R<()> {
        use TermKind::*;
        let sp = e.span;
        match (&e.kind, expected) {
            (Lam(x, ann, body), CartType::Arrow(dom, cod)) => {
                match ann {
                    Some(LinOrCart::Cart(a)) => self.expect_eq_cart(a, dom, sp)?,
                    Some(LinOrCart::Lin(_)) => {
                        return err(ErrorKind::TypeMismatch, sp, "linear binder annotation on a Cartesian function")
                    }
                    None => {}
                }
                self.bind_cart(x, (**dom).clone(), |c| c.check_cart(body, cod))
            }
            (GIntro(t), CartType::G(a)) => self.hide_all(Hidden::UnderG, |c| c.check(t, a)),
            _ => {
                let found = self.synth_cart_inner(e)?;
                self.expect_eq_cart(&found, expected, sp)
            }
        }
    }
}

// ------------------------------------------------------------------- entry points

fn seeded_uid(theta: &IndexContext, gamma: &CartContext, delta: &LinearContext, t: &Term, tys: &[&LinType]) -> u32 {
    use crate::syntax::desugar::{scan_cart, scan_lin, scan_term};
    let (mut uid, mut meta) = (0, 0);
    scan_term(t, &mut uid, &mut meta);
    for ty in tys {
        scan_lin(ty, &mut uid, &mut meta);
    }
    for (s, _) in &theta.entries {
        uid = uid.max(s.uid);
    }
    for (s, x) in &gamma.entries {
        uid = uid.max(s.uid);
        scan_cart(x, &mut uid, &mut meta);
    }
    for e in &delta.entries {
        uid = uid.max(e.name.uid);
        scan_lin(&e.ty, &mut uid, &mut meta);
    }
    uid + 1
}

fn no_globals() -> &'static HashMap<String, Type> {
    static EMPTY: std::sync::OnceLock<HashMap<String, Type>> = std::sync::OnceLock::new();
    EMPTY.get_or_init(HashMap::new)
}

/// `Θ ⊢ s : σ`.
pub fn check_index(theta: &IndexContext, s: &IndexTerm, sort: IndexSort) -> Result<(), TypeError> {
    let mut c = Checker::new(no_globals(), 0);
    c.theta = theta.clone();
    c.check_index(s, sort, Span::default())
}

/// `Θ; Γ ⊢ e : X`.
pub fn check_cart(theta: &IndexContext, gamma: &CartContext, e: &Term, ty: &CartType) -> Result<(), TypeError> {
    let mut c = Checker::new(no_globals(), seeded_uid(theta, gamma, &LinearContext::new(), e, &[]));
    c.theta = theta.clone();
    c.gamma = gamma.clone();
    c.check_cart(e, ty)
}

/// `Θ; Γ; Δ ⊢ t :_τ A`, returning Δ with the entries `t` consumed marked used.
///
/// Unused entries are leftovers, not errors.
pub fn check_linear(
    theta: &IndexContext,
    gamma: &CartContext,
    delta: &LinearContext,
    t: &Term,
    ty: &LinType,
    now: &IndexTerm,
) -> Result<LinearContext, TypeError> {
    let mut c = Checker::new(no_globals(), seeded_uid(theta, gamma, delta, t, &[ty]));
    c.theta = theta.clone();
    c.gamma = gamma.clone();
    c.delta = delta.clone();
    c.delay(now, |c| c.check(t, ty))?;
    let mut out = delta.clone();
    for (o, e) in out.entries.iter_mut().zip(&c.delta.entries) {
        o.used = e.used;
    }
    Ok(out)
}

/// Synthesizes the type of a `select` term; every entry of Δ must be consumed.
pub fn check_select(theta: &IndexContext, gamma: &CartContext, delta: &LinearContext, term: &Term) -> Result<LinType, TypeError> {
    if !matches!(term.kind, TermKind::Select(_)) {
        return err(ErrorKind::TypeMismatch, term.span, "expected a select term");
    }
    let mut c = Checker::new(no_globals(), seeded_uid(theta, gamma, delta, term, &[]));
    c.theta = theta.clone();
    c.gamma = gamma.clone();
    c.delta = delta.clone();
    let ty = c.synth(term)?;
    c.close(0)?;
    Ok(c.zonk(&ty))
}

/// A type-correct program with inferred indices filled in.
#[derive(Debug, Clone)]
pub struct CheckedProgram {
    /// Declared types in source order.
    pub types: Vec<(String, Type)>,
    /// The program with every index metavariable replaced by its solution.
    pub program: SourceProgram,
    pub derivations: BTreeMap<String, Derivation>,
}

impl CheckedProgram {
    pub fn type_of(&self, name: &str) -> Option<&Type> {
        self.types.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

fn global_refs(t: &Term, out: &mut Vec<String>) {
    t.walk(&mut |x| {
        if let TermKind::Global(g) = &x.kind {
            if !out.contains(g) {
                out.push(g.clone());
            }
        }
    });
}

/// Definitions ordered so that each comes after the ones it references.
fn dependency_order(p: &SourceProgram) -> Vec<usize> {
    fn visit(p: &SourceProgram, k: usize, seen: &mut Vec<bool>, out: &mut Vec<usize>) {
        if seen[k] {
            return;
        }
        seen[k] = true;
        let mut refs = Vec::new();
        global_refs(&p.definitions[k].body, &mut refs);
        for r in refs {
            if let Some(j) = p.definitions.iter().position(|d| d.name == r) {
                visit(p, j, seen, out);
            }
        }
        out.push(k);
    }
    let mut seen = vec![false; p.definitions.len()];
    let mut out = Vec::new();
    for k in 0..p.definitions.len() {
        visit(p, k, &mut seen, &mut out);
    }
    out
}

impl Checker<'_> {
    /// Well-formedness of a declared type: indices are bound and well-sorted.
    fn wf_lin(&mut self, t: &LinType, span: Span) -> R<()> {
        use LinType::*;
        match t {
            I | TyVar(_) => Ok(()),
            Tensor(a, b) | Plus(a, b) | Lolli(a, b) => {
                self.wf_lin(a, span)?;
                self.wf_lin(b, span)
            }
            Diamond(a) | Nu(_, a) => self.wf_lin(a, span),
            At(a, i) => {
                self.check_index(i, IndexSort::Time, span)?;
                self.wf_lin(a, span)
            }
            F(x) => self.wf_cart(x, span),
            Forall(s, o, a) | Exists(s, o, a) => {
                self.theta.entries.push((s.clone(), *o));
                let r = self.wf_lin(a, span);
                self.theta.entries.pop();
                r
            }
            Widget(i) => self.check_index(i, IndexSort::Id, span),
            Prefix(i, j) => {
                self.check_index(i, IndexSort::Id, span)?;
                self.check_index(j, IndexSort::Time, span)
            }
        }
    }

    fn wf_cart(&mut self, t: &CartType, span: Span) -> R<()> {
        match t {
            CartType::Arrow(a, b) => {
                self.wf_cart(a, span)?;
                self.wf_cart(b, span)
            }
            CartType::G(a) => self.wf_lin(a, span),
            _ => Ok(()),
        }
    }
}

/// Checks every definition against its declared type.
///
/// The input must be desugared. All definitions are checked; errors are collected
/// in dependency order.
pub fn check_program(p: &SourceProgram) -> Result<CheckedProgram, Vec<TypeError>> {
    let globals: HashMap<String, Type> = p.definitions.iter().map(|d| (d.name.clone(), d.ty.clone())).collect();
    let mut next_uid = max_uid_meta(p).0 + 1;
    let mut errors = Vec::new();
    let mut bodies: HashMap<String, Term> = HashMap::new();
    let mut derivations = BTreeMap::new();
    for k in dependency_order(p) {
        let d = &p.definitions[k];
        let mut c = Checker::new(&globals, next_uid);
        let r = match &d.ty {
            Type::Lin(a) => c.wf_lin(a, d.span).and_then(|_| c.check(&d.body, a)),
            Type::Cart(x) => c.wf_cart(x, d.span).and_then(|_| c.check_cart(&d.body, x)),
        };
        next_uid = c.next_uid + 1;
        if let Err(e) = r {
            errors.push(e);
            continue;
        }
        let unsolved = c.unsolved();
        if !unsolved.is_empty() {
            errors.extend(unsolved);
            continue;
        }
        bodies.insert(d.name.clone(), zonk_term(&c.solutions(), &d.body));
        derivations.insert(d.name.clone(), c.finish_derivation(&d.name));
    }
    if !errors.is_empty() {
        return Err(errors);
    }
    let definitions = p
        .definitions
        .iter()
        .map(|d| Definition { body: bodies.remove(&d.name).expect("checked"), ..d.clone() })
        .collect();
    Ok(CheckedProgram {
        types: p.definitions.iter().map(|d| (d.name.clone(), d.ty.clone())).collect(),
        program: SourceProgram { definitions, entry: p.entry.clone() },
        derivations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::ast::IndexSort;
    use crate::syntax::{desugar, parse, parse_lin_type, parse_term};

    fn errors(src: &str) -> Vec<ErrorKind> {
        let p = desugar(&parse(src).unwrap()).unwrap();
        match check_program(&p) {
            Ok(_) => vec![],
            Err(es) => es.into_iter().map(|e| e.kind).collect(),
        }
    }

    /// Strip `n` leading lambdas, returning their binders and the body.
    fn open(src: &str, n: usize) -> (Vec<Symbol>, Term) {
        let mut t = parse_term(src).unwrap();
        let mut xs = Vec::new();
        for _ in 0..n {
            let TermKind::Lam(x, _, b) = t.kind else { panic!("expected λ") };
            xs.push(x);
            t = *b;
        }
        (xs, t)
    }

    fn lin(s: &str) -> LinType {
        parse_lin_type(s).unwrap()
    }

    #[test]
    fn accepts_identity_and_pairs() {
        assert_eq!(errors("def f : I ⊗ I ⊸ I ⊗ I = λp. let (a, b) = p in (b, a)\n"), vec![]);
    }

    #[test]
    fn linearity_errors() {
        assert_eq!(errors("def f : I ⊸ I ⊗ I = λx. (x, x)\n"), vec![ErrorKind::LinearVariableReused]);
        assert_eq!(errors("def f : I ⊸ I = λx. ⟨⟩\n"), vec![ErrorKind::LinearVariableUnused]);
    }

    #[test]
    fn unknown_names() {
        assert_eq!(errors("def f : I = nothing\n"), vec![ErrorKind::UnboundVariable]);
    }

    #[test]
    fn omitted_index_must_be_determined() {
        let src = "def g : ∀(t:Time). I ⊸ I = Λ(t:Time). λx. x\ndef main : I = g ⟨⟩\n";
        assert_eq!(errors(src), vec![ErrorKind::UnsolvedIndexMetavariable]);
    }

    #[test]
    fn index_sorts() {
        let i = Symbol::new("i", 1);
        let theta = IndexContext::new().with(i.clone(), IndexSort::Id);
        assert!(check_index(&theta, &IndexTerm::Var(i.clone()), IndexSort::Id).is_ok());
        assert_eq!(check_index(&theta, &IndexTerm::Var(i), IndexSort::Time).unwrap_err().kind, ErrorKind::SortMismatch);
        assert!(check_index(&theta, &IndexTerm::TimeLit(3), IndexSort::Time).is_ok());
        assert_eq!(check_index(&theta, &IndexTerm::Var(Symbol::new("k", 9)), IndexSort::Time).unwrap_err().kind, ErrorKind::UnboundVariable);
    }

    #[test]
    fn leftovers_are_returned_not_rejected() {
        let (xs, body) = open("λa. λb. a", 2);
        let delta = LinearContext::new().with(xs[0].clone(), lin("I"), IndexTerm::TimeLit(0)).with(xs[1].clone(), lin("I"), IndexTerm::TimeLit(0));
        let out = check_linear(&IndexContext::new(), &CartContext::new(), &delta, &body, &lin("I"), &IndexTerm::TimeLit(0)).unwrap();
        assert_eq!(out.is_used(&xs[0]), Some(true));
        assert_eq!(out.is_used(&xs[1]), Some(false));
    }

    #[test]
    fn entries_at_other_times_are_out_of_reach() {
        let (xs, body) = open("λa. a", 1);
        let delta = LinearContext::new().with(xs[0].clone(), lin("I"), IndexTerm::TimeLit(2));
        let r = check_linear(&IndexContext::new(), &CartContext::new(), &delta, &body, &lin("I"), &IndexTerm::TimeLit(0));
        assert_eq!(r.unwrap_err().kind, ErrorKind::TimeMismatch);
        assert!(check_linear(&IndexContext::new(), &CartContext::new(), &delta, &body, &lin("I"), &IndexTerm::TimeLit(2)).is_ok());
    }

    #[test]
    fn select_branches_see_only_their_own_resources() {
        let (xs, body) = open("λa. λb. select a as x => (let ⟨⟩ = x in b) | b as y => (let ⟨⟩ = y in a)", 2);
        let delta = LinearContext::new().with(xs[0].clone(), lin("◇I"), IndexTerm::TimeLit(0)).with(xs[1].clone(), lin("◇I"), IndexTerm::TimeLit(0));
        let ty = check_select(&IndexContext::new(), &CartContext::new(), &delta, &body).unwrap();
        assert_eq!(ty.to_string(), "◇I");

        let (xs, body) = open("λz. λa. λb. select a as x => (let ⟨⟩ = x in let ⟨⟩ = z in b) | b as y => (let ⟨⟩ = y in a)", 3);
        let delta = LinearContext::new()
            .with(xs[0].clone(), lin("I"), IndexTerm::TimeLit(0))
            .with(xs[1].clone(), lin("◇I"), IndexTerm::TimeLit(0))
            .with(xs[2].clone(), lin("◇I"), IndexTerm::TimeLit(0));
        let e = check_select(&IndexContext::new(), &CartContext::new(), &delta, &body).unwrap_err();
        assert_eq!(e.kind, ErrorKind::LinearVariableUnavailableInSelect);
    }

    #[test]
    fn thunks_capture_no_linear_resources() {
        let (xs, body) = open("λx. G x", 1);
        let delta = LinearContext::new().with(xs[0].clone(), lin("I"), IndexTerm::TimeLit(0));
        let e = check_cart(&IndexContext::new(), &CartContext::new(), &body, &crate::syntax::ast::CartType::G(Box::new(lin("I"))));
        assert!(e.is_err());
        let r = check_linear(&IndexContext::new(), &CartContext::new(), &delta, &parse_term("runG (G ⟨⟩)").unwrap(), &lin("I"), &IndexTerm::TimeLit(0));
        assert!(r.is_ok());
        let under_g = errors("def f : I ⊸ F (G I) = λx. F (G x)\n");
        assert_eq!(under_g, vec![ErrorKind::NonEmptyLinearContextUnderG]);
    }

    #[test]
    fn checking_is_deterministic() {
        let src = "def f : ∀(i:Id). Widget i ⊸ Widget i = λw. let (w, c) = onClick w in let (x, ⟨⟩ @ x) = out c in let (p, w @ x) = split w in join (p, w @ x)\n";
        let p = desugar(&parse(src).unwrap()).unwrap();
        let a = check_program(&p).unwrap();
        let b = check_program(&p).unwrap();
        assert_eq!(a.derivations, b.derivations);
        assert!(crate::syntax::alpha_eq_program(&a.program, &b.program));
    }
}
