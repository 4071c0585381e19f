//! Sort-preserving index substitution applied to whole programs.

use lwidget_core::typecheck::{subst_index_lin, subst_index_term, IndexSubst};
use lwidget_core::{check_program, desugar, parse, Definition, IndexSort, IndexTerm, LinType, SourceProgram, Span, Symbol, Term, TermKind, Type};

/// Index binders peeled off a definition, with the remaining type and body.
pub type Opened = (Vec<(Symbol, IndexSort)>, LinType, Term);

/// Leading `∀`/`Λ` binders shared by a definition's type and body.
pub fn index_prefix(d: &Definition) -> Option<Opened> {
    let Type::Lin(mut ty) = d.ty.clone() else { return None };
    let mut body = d.body.clone();
    let mut vars = Vec::new();
    while let (LinType::Forall(a, s, t), TermKind::IndexLam(b, s2, e)) = (&ty, &body.kind) {
        assert_eq!(s, s2);
        let mut rename = IndexSubst::new();
        rename.insert(b.clone(), IndexTerm::Var(a.clone()));
        let (a, s, t, e) = (a.clone(), *s, (**t).clone(), subst_index_term(&rename, e));
        vars.push((a, s));
        ty = t;
        body = e;
    }
    Some((vars, ty, body))
}

pub const FRESH_UID: u32 = 0x3000_0000;

/// Fresh binders the substituted definition is generalized over.
pub fn targets() -> Vec<(Symbol, IndexSort)> {
    vec![
        (Symbol::new("j", FRESH_UID), IndexSort::Id),
        (Symbol::new("k", FRESH_UID + 1), IndexSort::Id),
        (Symbol::new("t", FRESH_UID + 2), IndexSort::Time),
    ]
}

/// Target for one variable: a fresh binder of its sort or a literal.
pub fn pick(sort: IndexSort, choice: u8, lit: u64) -> IndexTerm {
    let ts = targets();
    let same: Vec<_> = ts.iter().filter(|(_, s)| *s == sort).collect();
    match (choice as usize) % (same.len() + 1) {
        k if k < same.len() => IndexTerm::Var(same[k].0.clone()),
        _ if sort == IndexSort::Id => IndexTerm::IdLit(lit),
        _ => IndexTerm::TimeLit(lit),
    }
}

pub fn generalize(name: String, ty: LinType, body: Term) -> Definition {
    let (mut ty, mut body) = (ty, body);
    for (s, sort) in targets().into_iter().rev() {
        ty = LinType::Forall(s.clone(), sort, Box::new(ty));
        body = Term::new(TermKind::IndexLam(s, sort, Box::new(body)), Span::default());
    }
    Definition { name, ty: Type::Lin(ty), body, span: Span::default() }
}

pub fn core_program(file: &str) -> SourceProgram {
    desugar(&parse(&super::corpus_source(file)).unwrap()).unwrap()
}

/// Adds `ζ`-instances of every definition and checks the extended program.
pub fn instantiate_all(p: &SourceProgram, choices: &[(u8, u64)]) -> Result<(), String> {
    let mut q = p.clone();
    let mut c = choices.iter().cycle();
    for d in &p.definitions {
        let Some((vars, ty, body)) = index_prefix(d) else { continue };
        let mut zeta = IndexSubst::new();
        for (v, sort) in &vars {
            let &(choice, lit) = c.next().unwrap();
            zeta.insert(v.clone(), pick(*sort, choice, lit));
        }
        let def = generalize(format!("{}_inst", d.name), subst_index_lin(&zeta, &ty), subst_index_term(&zeta, &body));
        q.definitions.push(def);
    }
    check_program(&q).map(|_| ()).map_err(|es| format!("{es:?}"))
}

