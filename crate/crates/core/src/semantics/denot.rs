//! Enumerating denotational evaluator.
//!
//! Every nondeterministic point (event arrival, select tie) forks the computation; the
//! result is the full set of outcomes up to a finite horizon, each tagged with the
//! choices that produced it. Arrivals range over every frame up to the horizon plus `∞`.

use std::cell::Cell;
use std::collections::{BTreeMap, HashMap};
use std::rc::Rc;

use serde_json::{json, Value};

use super::logbook::{join_sem, prefix_of, shift, Command, CompatError, Handler, Logbook, PrefixBook, TimePoint};
use super::value::{Builtin, CartValue, Closure, Env, SemValue};
use crate::syntax::ast::{IndexTerm, SourceProgram, Symbol, Term, TermKind};

/// Default cap on the number of branches produced during one enumeration.
pub const DEFAULT_BRANCH_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SemError {
    #[error("frame {0} lies beyond the horizon {1}")]
    HorizonExceeded(u64, u64),
    #[error("more than {0} branches")]
    TooManyBranches(usize),
    #[error("no entry definition `{0}`")]
    NoEntry(String),
    #[error("evaluation stuck: {0}")]
    Stuck(String),
}

impl SemError {
    pub fn kind(&self) -> &'static str {
        match self {
            SemError::HorizonExceeded(..) => "HorizonExceeded",
            SemError::TooManyBranches(_) => "TooManyBranches",
            SemError::NoEntry(_) => "NoEntry",
            SemError::Stuck(_) => "StuckTerm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

/// One resolved nondeterministic choice; all times are absolute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Choice {
    Arrival { widget: u64, handler: Handler, registered_at: u64, at: TimePoint },
    Tie { at: u64, side: Side },
}

impl Choice {
    pub fn to_json(&self) -> Value {
        match self {
            Choice::Arrival { widget, handler, registered_at, at } => json!({
                "arrival": handler.name(),
                "widget": widget,
                "registered_at": registered_at,
                "at": at.to_json(),
            }),
            Choice::Tie { at, side } => json!({ "tie": side.name(), "at": at }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Final logbooks in absolute time sorted by id, or the clash that aborted the branch.
    pub result: Result<Vec<Logbook>, CompatError>,
    pub choices: Vec<Choice>,
    pub value: Value,
}

impl Outcome {
    pub fn to_json(&self) -> Value {
        let choices: Vec<Value> = self.choices.iter().map(Choice::to_json).collect();
        match &self.result {
            Ok(books) => json!({
                "logbooks": books.iter().map(Logbook::to_json).collect::<Vec<_>>(),
                "choices": choices,
                "value": self.value,
            }),
            Err(e) => json!({
                "error": { "kind": "CompatError", "time": e.time, "message": e.to_string() },
                "choices": choices,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSet {
    pub horizon: u64,
    /// Sorted by choice sequence.
    pub outcomes: Vec<Outcome>,
}

impl OutcomeSet {
    pub fn len(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "horizon": self.horizon,
            "count": self.outcomes.len(),
            "outcomes": self.outcomes.iter().map(Outcome::to_json).collect::<Vec<_>>(),
        })
    }
}

/// Per-branch state threaded through the evaluator.
#[derive(Debug, Clone, Default)]
struct World {
    next_id: u64,
    /// Logbooks handed off by `vAttach`, already absolute.
    emitted: Vec<Logbook>,
    choices: Vec<Choice>,
    failed: Option<CompatError>,
}

type Outs<'a> = Vec<(SemValue<'a>, World)>;
type Res<T> = Result<T, SemError>;

/// Enumerate the outcomes of the program's entry definition up to `horizon`.
pub fn eval_denot(p: &SourceProgram, horizon: u64) -> Result<OutcomeSet, SemError> {
    eval_denot_with_limit(p, horizon, DEFAULT_BRANCH_LIMIT)
}

pub fn eval_denot_with_limit(p: &SourceProgram, horizon: u64, limit: usize) -> Result<OutcomeSet, SemError> {
    let entry = p.definition(&p.entry).ok_or_else(|| SemError::NoEntry(p.entry.clone()))?;
    let ev = Evaluator { defs: p.definitions.iter().map(|d| (d.name.as_str(), &d.body)).collect(), horizon, limit, work: Cell::new(0) };
    let outs = ev.eval(&Env::new(), &entry.body, 0, World::default())?;
    let mut outcomes: Vec<Outcome> = outs.into_iter().map(|(v, w)| finish(v, w)).collect();
    outcomes.sort_by(|a, b| a.choices.cmp(&b.choices));
    Ok(OutcomeSet { horizon, outcomes })
}

fn finish(v: SemValue<'_>, w: World) -> Outcome {
    if let Some(e) = w.failed {
        return Outcome { result: Err(e), choices: w.choices, value: Value::Null };
    }
    let mut books = w.emitted;
    v.collect_logbooks(0, &mut books);
    let mut merged: BTreeMap<u64, Logbook> = BTreeMap::new();
    for b in books {
        match merged.get_mut(&b.id) {
            Some(existing) => existing.entries.extend(b.entries),
            None => {
                merged.insert(b.id, b);
            }
        }
    }
    Outcome { result: Ok(merged.into_values().collect()), choices: w.choices, value: v.to_json() }
}

struct Evaluator<'a> {
    defs: HashMap<&'a str, &'a Term>,
    horizon: u64,
    limit: usize,
    /// Branches produced so far across the whole evaluation.
    work: Cell<usize>,
}

fn stuck<T>(what: impl Into<String>) -> Res<T> {
    Err(SemError::Stuck(what.into()))
}

fn one<'a>(v: SemValue<'a>, w: World) -> Res<Outs<'a>> {
    Ok(vec![(v, w)])
}

impl<'a> Evaluator<'a> {
    /// Sequence `f` after every live branch of `outs`; failed branches pass through.
    fn bind(&self, outs: Outs<'a>, mut f: impl FnMut(SemValue<'a>, World) -> Res<Outs<'a>>) -> Res<Outs<'a>> {
        let mut acc = Vec::with_capacity(outs.len());
        for (v, w) in outs {
            if w.failed.is_some() {
                acc.push((v, w));
                continue;
            }
            let next = f(v, w)?;
            let work = self.work.get() + next.len();
            if work > self.limit {
                return Err(SemError::TooManyBranches(self.limit));
            }
            self.work.set(work);
            acc.extend(next);
        }
        Ok(acc)
    }

    fn index(&self, env: &Env<'a>, s: &IndexTerm) -> Res<SemValue<'a>> {
        match s {
            IndexTerm::Var(x) => env.lookup(x).cloned().map_or_else(|| stuck(format!("unbound index {x}")), Ok),
            IndexTerm::TimeLit(n) => Ok(SemValue::Time(TimePoint::Finite(*n))),
            IndexTerm::IdLit(n) => Ok(SemValue::Id(*n)),
            IndexTerm::Infinity => Ok(SemValue::Time(TimePoint::Infinity)),
            IndexTerm::Meta(_) => stuck("unsolved index argument"),
        }
    }

    fn time(&self, env: &Env<'a>, s: &IndexTerm) -> Res<TimePoint> {
        match self.index(env, s)? {
            SemValue::Time(k) => Ok(k),
            other => stuck(format!("expected a time, found {}", other.to_json())),
        }
    }

    /// Absolute frame `base + k`, rejecting frames past the horizon.
    fn frame(&self, base: u64, k: u64) -> Res<u64> {
        let f = base + k;
        if f > self.horizon {
            return Err(SemError::HorizonExceeded(f, self.horizon));
        }
        Ok(f)
    }

    fn eval(&self, env: &Env<'a>, t: &'a Term, base: u64, w: World) -> Res<Outs<'a>> {
        use TermKind::*;
        if w.failed.is_some() {
            return one(SemValue::Dormant, w);
        }
        match &t.kind {
            Var(x) => match env.lookup(x) {
                Some(v) => one(v.clone(), w),
                None => stuck(format!("unbound variable {x}")),
            },
            Global(g) => {
                if let Some(b) = Builtin::from_name(g) {
                    return one(SemValue::Builtin(b, vec![], vec![]), w);
                }
                match self.defs.get(g.as_str()) {
                    Some(body) => self.eval(&Env::new(), body, base, w),
                    None => stuck(format!("unknown global {g}")),
                }
            }
            Lam(x, _, b) => one(SemValue::Closure(Rc::new(Closure::Lam(env.clone(), x, b))), w),
            IndexLam(x, _, b) => one(SemValue::Closure(Rc::new(Closure::IndexLam(env.clone(), x, b))), w),
            GIntro(b) => one(SemValue::Closure(Rc::new(Closure::Thunk(env.clone(), b))), w),
            App(f, a) => {
                let fs = self.eval(env, f, base, w)?;
                self.bind(fs, |fv, w| {
                    let avs = self.eval(env, a, base, w)?;
                    self.bind(avs, |av, w| self.apply(fv.clone(), av, base, w))
                })
            }
            IndexApp(f, s) => {
                let iv = self.index(env, s)?;
                let fs = self.eval(env, f, base, w)?;
                self.bind(fs, |fv, w| self.apply_index(fv, iv.clone(), base, w))
            }
            Unit => one(SemValue::Unit, w),
            Star => one(SemValue::Cart(CartValue::Star), w),
            ColorLit(c) => one(SemValue::Cart(CartValue::Color(*c)), w),
            CharLit(c) => one(SemValue::Cart(CartValue::Char(*c)), w),
            Pair(a, b) => {
                let avs = self.eval(env, a, base, w)?;
                self.bind(avs, |av, w| {
                    let bvs = self.eval(env, b, base, w)?;
                    self.bind(bvs, |bv, w| one(SemValue::pair(av.clone(), bv), w))
                })
            }
            Inl(a) => {
                let avs = self.eval(env, a, base, w)?;
                self.bind(avs, |v, w| one(SemValue::Inl(Box::new(v)), w))
            }
            Inr(a) => {
                let avs = self.eval(env, a, base, w)?;
                self.bind(avs, |v, w| one(SemValue::Inr(Box::new(v)), w))
            }
            Evt(a) => {
                let avs = self.eval(env, a, base, w)?;
                self.bind(avs, |v, w| one(SemValue::Event(TimePoint::Finite(0), Box::new(v)), w))
            }
            Fold(a) | Unfold(a) | FIntro(a) | Annot(a, _) => self.eval(env, a, base, w),
            RunG(a) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| match v {
                    SemValue::Closure(c) => match &*c {
                        Closure::Thunk(cenv, body) => self.eval(cenv, body, base, w),
                        _ => one(SemValue::Closure(c.clone()), w),
                    },
                    // Globals in Cartesian position are already values.
                    other => one(other, w),
                })
            }
            Pack(s, a) => {
                let iv = self.index(env, s)?;
                let avs = self.eval(env, a, base, w)?;
                self.bind(avs, |v, w| one(SemValue::Pack(Box::new(iv.clone()), Box::new(v)), w))
            }
            At(a, s) => match self.time(env, s)? {
                TimePoint::Infinity => one(SemValue::At(TimePoint::Infinity, Box::new(SemValue::Dormant)), w),
                TimePoint::Finite(k) => {
                    let f = self.frame(base, k)?;
                    let vs = self.eval(env, a, f, w)?;
                    self.bind(vs, |v, w| one(SemValue::At(TimePoint::Finite(k), Box::new(v)), w))
                }
            },
            _ => self.eval_elim(env, t, base, w),
        }
    }
}

impl<'a> Evaluator<'a> {
    fn eval_elim(&self, env: &Env<'a>, t: &'a Term, base: u64, w: World) -> Res<Outs<'a>> {
        use TermKind::*;
        match &t.kind {
            LetUnit(a, b) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |_, w| self.eval(env, b, base, w))
            }
            Let(x, a, b) | LetF(x, a, b) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| self.eval(&env.bind(x, v), b, base, w))
            }
            LetPair(x, y, a, b) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| match v {
                    SemValue::Pair(l, r) => self.eval(&env.bind(x, *l).bind(y, *r), b, base, w),
                    other => stuck(format!("expected a pair, found {}", other.to_json())),
                })
            }
            LetPack(s, x, a, b) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| match v {
                    SemValue::Pack(i, v) => self.eval(&env.bind(s, *i).bind(x, *v), b, base, w),
                    other => stuck(format!("expected a package, found {}", other.to_json())),
                })
            }
            Case(a, x, l, y, r) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| match v {
                    SemValue::Inl(v) => self.eval(&env.bind(x, *v), l, base, w),
                    SemValue::Inr(v) => self.eval(&env.bind(y, *v), r, base, w),
                    other => stuck(format!("expected a sum, found {}", other.to_json())),
                })
            }
            LetEvt(x, a, b) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| match v {
                    SemValue::Event(TimePoint::Infinity, _) => one(dormant_event(), w),
                    SemValue::Event(TimePoint::Finite(k), v) => {
                        let f = self.frame(base, k)?;
                        let rs = self.eval(&env.bind(x, *v), b, f, w)?;
                        self.bind(rs, |r, w| one(delay_event(k, r)?, w))
                    }
                    other => stuck(format!("expected an event, found {}", other.to_json())),
                })
            }
            LetAt(x, _, a, b) => {
                let vs = self.eval(env, a, base, w)?;
                self.bind(vs, |v, w| match v {
                    SemValue::At(_, v) => self.eval(&env.bind(x, *v), b, base, w),
                    other => stuck(format!("expected a timed value, found {}", other.to_json())),
                })
            }
            LetUnitAt(s, a, b) => match self.time(env, s)? {
                TimePoint::Infinity => self.eval(env, b, base, w),
                TimePoint::Finite(k) => {
                    let vs = self.eval(env, a, self.frame(base, k)?, w)?;
                    self.bind(vs, |_, w| self.eval(env, b, base, w))
                }
            },
            LetPairAt(x, y, s, a, b) => match self.time(env, s)? {
                TimePoint::Infinity => {
                    self.eval(&env.bind(x, SemValue::Dormant).bind(y, SemValue::Dormant), b, base, w)
                }
                TimePoint::Finite(k) => {
                    let vs = self.eval(env, a, self.frame(base, k)?, w)?;
                    self.bind(vs, |v, w| match v {
                        SemValue::Pair(l, r) => self.eval(&env.bind(x, *l).bind(y, *r), b, base, w),
                        other => stuck(format!("expected a pair, found {}", other.to_json())),
                    })
                }
            },
            Select(parts) => self.select(env, parts, base, w),
            LetPat(..) => stuck("pattern let survived desugaring"),
            _ => stuck("unexpected term form"),
        }
    }

    fn select(&self, env: &Env<'a>, s: &'a crate::syntax::ast::SelectParts, base: u64, w: World) -> Res<Outs<'a>> {
        let scrutinee = |t: &'a Term| -> Res<(&'a Symbol, TimePoint, SemValue<'a>)> {
            let TermKind::Var(x) = &t.kind else { return stuck("select scrutinee must be a variable") };
            match env.lookup(x) {
                Some(SemValue::Event(k, v)) => Ok((x, *k, (**v).clone())),
                Some(other) => stuck(format!("select on a non-event {}", other.to_json())),
                None => stuck("unbound select scrutinee"),
            }
        };
        let (lvar, k1, v1) = scrutinee(&s.left)?;
        let (rvar, k2, v2) = scrutinee(&s.right)?;
        let go_left = |k1: u64, k2: TimePoint, w: World| -> Res<Outs<'a>> {
            let rest = residual(k2, k1, v2.clone());
            let benv = env.bind(&s.left_bind, v1.clone()).bind(rvar, rest);
            let rs = self.eval(&benv, &s.left_body, self.frame(base, k1)?, w)?;
            self.bind(rs, |r, w| one(delay_event(k1, r)?, w))
        };
        let go_right = |k2: u64, k1: TimePoint, w: World| -> Res<Outs<'a>> {
            let rest = residual(k1, k2, v1.clone());
            let benv = env.bind(&s.right_bind, v2.clone()).bind(lvar, rest);
            let rs = self.eval(&benv, &s.right_body, self.frame(base, k2)?, w)?;
            self.bind(rs, |r, w| one(delay_event(k2, r)?, w))
        };
        match (k1, k2) {
            (TimePoint::Infinity, TimePoint::Infinity) => one(dormant_event(), w),
            (TimePoint::Finite(a), TimePoint::Infinity) => go_left(a, k2, w),
            (TimePoint::Infinity, TimePoint::Finite(b)) => go_right(b, k1, w),
            (TimePoint::Finite(a), TimePoint::Finite(b)) if a < b => go_left(a, k2, w),
            (TimePoint::Finite(a), TimePoint::Finite(b)) if b < a => go_right(b, k1, w),
            (TimePoint::Finite(a), TimePoint::Finite(_)) => {
                let mut wl = w.clone();
                wl.choices.push(Choice::Tie { at: base + a, side: Side::Left });
                let mut wr = w;
                wr.choices.push(Choice::Tie { at: base + a, side: Side::Right });
                let mut outs = go_left(a, k2, wl)?;
                outs.extend(go_right(a, k1, wr)?);
                Ok(outs)
            }
        }
    }
}

fn dormant_event<'a>() -> SemValue<'a> {
    SemValue::Event(TimePoint::Infinity, Box::new(SemValue::Dormant))
}

/// The slower event seen from the frame where the faster one fired.
fn residual(slow: TimePoint, fast: u64, v: SemValue<'_>) -> SemValue<'_> {
    match slow {
        TimePoint::Finite(k) => SemValue::Event(TimePoint::Finite(k - fast), Box::new(v)),
        TimePoint::Infinity => SemValue::Event(TimePoint::Infinity, Box::new(v)),
    }
}

/// Re-express an event produced `k` frames later in the current frame.
fn delay_event(k: u64, r: SemValue<'_>) -> Res<SemValue<'_>> {
    match r {
        SemValue::Event(k2, v) => Ok(SemValue::Event(TimePoint::Finite(k).plus(k2), v)),
        other => stuck(format!("event continuation returned {}", other.to_json())),
    }
}

impl<'a> Evaluator<'a> {
    fn apply(&self, f: SemValue<'a>, a: SemValue<'a>, base: u64, w: World) -> Res<Outs<'a>> {
        match f {
            SemValue::Closure(c) => match &*c {
                Closure::Lam(cenv, x, body) => self.eval(&cenv.bind(x, a), body, base, w),
                _ => stuck("applied a non-function closure"),
            },
            SemValue::Builtin(b, idx, mut args) => {
                args.push(a);
                if args.len() < b.arity() {
                    return one(SemValue::Builtin(b, idx, args), w);
                }
                self.builtin(b, &idx, args, base, w)
            }
            other => stuck(format!("applied {}", other.to_json())),
        }
    }

    fn apply_index(&self, f: SemValue<'a>, i: SemValue<'a>, base: u64, w: World) -> Res<Outs<'a>> {
        match f {
            SemValue::Closure(c) => match &*c {
                Closure::IndexLam(cenv, x, body) => self.eval(&cenv.bind(x, i), body, base, w),
                _ => stuck("index applied to a non-generic closure"),
            },
            SemValue::Builtin(b, mut idx, args) => {
                idx.push(i);
                one(SemValue::Builtin(b, idx, args), w)
            }
            other => stuck(format!("index applied to {}", other.to_json())),
        }
    }

    fn builtin(&self, b: Builtin, idx: &[SemValue<'a>], mut args: Vec<SemValue<'a>>, base: u64, mut w: World) -> Res<Outs<'a>> {
        let arg = args.pop().expect("arity at least one");
        match (b, arg) {
            (Builtin::NewWidget, _) => {
                let id = w.next_id;
                w.next_id += 1;
                one(SemValue::Pack(Box::new(SemValue::Id(id)), Box::new(SemValue::Widget(Logbook::new(id)))), w)
            }
            (Builtin::DropWidget, _) => one(SemValue::Unit, w),
            (Builtin::SetColor, SemValue::Pair(l, c)) => match (*l, *c) {
                (SemValue::Widget(mut l), SemValue::Cart(CartValue::Color(c))) => {
                    if let Err(e) = l.insert((0, Command::SetColor(c))) {
                        w.failed = Some(e.delayed(base));
                    }
                    one(SemValue::Widget(l), w)
                }
                (l, c) => stuck(format!("setColor on {} and {}", l.to_json(), c.to_json())),
            },
            (Builtin::OnClick, SemValue::Widget(l)) => self.register(l, Handler::Click, SemValue::Unit, base, w),
            (Builtin::OnKeypress, SemValue::Widget(l)) => {
                self.register(l, Handler::Keypress, SemValue::Cart(CartValue::Char('a')), base, w)
            }
            (Builtin::Out, SemValue::Event(k, v)) => {
                one(SemValue::Pack(Box::new(SemValue::Time(k)), Box::new(SemValue::At(k, v))), w)
            }
            (Builtin::Into, SemValue::Pack(k, v)) => match (*k, *v) {
                (SemValue::Time(k), SemValue::At(_, v)) => one(SemValue::Event(k, v), w),
                (k, v) => stuck(format!("into on {} and {}", k.to_json(), v.to_json())),
            },
            (Builtin::Split, SemValue::Widget(l)) => {
                let k = match idx.last() {
                    Some(SemValue::Time(k)) => *k,
                    _ => return stuck("split without a time index"),
                };
                let v = match k {
                    TimePoint::Finite(k) => SemValue::pair(
                        SemValue::Prefix(prefix_of(k, &l)),
                        SemValue::At(TimePoint::Finite(k), Box::new(SemValue::Widget(shift(k, &l)))),
                    ),
                    TimePoint::Infinity => SemValue::pair(
                        SemValue::Prefix(PrefixBook { id: l.id, cutoff: TimePoint::Infinity, entries: l.entries }),
                        SemValue::At(TimePoint::Infinity, Box::new(SemValue::Dormant)),
                    ),
                };
                one(v, w)
            }
            (Builtin::Join, SemValue::Pair(p, rest)) => match (*p, *rest) {
                (SemValue::Prefix(p), SemValue::At(TimePoint::Finite(k), r)) if p.cutoff.is_finite() => match *r {
                    SemValue::Widget(l) => match join_sem(k, &p, &l) {
                        Ok(j) => one(SemValue::Widget(j), w),
                        Err(e) => {
                            w.failed = Some(e.delayed(base));
                            one(SemValue::Dormant, w)
                        }
                    },
                    other => stuck(format!("join on {}", other.to_json())),
                },
                (SemValue::Prefix(p), SemValue::At(..)) => {
                    one(SemValue::Widget(Logbook { id: p.id, entries: p.entries }), w)
                }
                (p, r) => stuck(format!("join on {} and {}", p.to_json(), r.to_json())),
            },
            (Builtin::VAttach, SemValue::Widget(child)) => match args.pop() {
                Some(SemValue::Widget(mut parent)) => {
                    if let Err(e) = parent.insert((0, Command::Attach(child.id))) {
                        w.failed = Some(e.delayed(base));
                    }
                    w.emitted.push(child.delayed(base));
                    one(SemValue::Widget(parent), w)
                }
                other => stuck(format!("vAttach on {other:?}")),
            },
            (b, arg) => stuck(format!("{b:?} applied to {}", arg.to_json())),
        }
    }

    /// Install a handler and fork over every frame the event could arrive in.
    fn register(&self, mut l: Logbook, h: Handler, payload: SemValue<'a>, base: u64, mut w: World) -> Res<Outs<'a>> {
        let cmd = match h {
            Handler::Click => Command::OnClick,
            Handler::Keypress => Command::OnKeypress,
        };
        if let Err(e) = l.insert((0, cmd)) {
            w.failed = Some(e.delayed(base));
            return one(SemValue::Dormant, w);
        }
        let id = l.id;
        let mut outs = Vec::with_capacity((self.horizon - base + 1) as usize);
        let arrivals = (1..=self.horizon - base).map(TimePoint::Finite).chain([TimePoint::Infinity]);
        for k in arrivals {
            let mut w = w.clone();
            w.choices.push(Choice::Arrival { widget: id, handler: h, registered_at: base, at: TimePoint::Finite(base).plus(k) });
            let ev = match k {
                TimePoint::Finite(_) => SemValue::Event(k, Box::new(payload.clone())),
                TimePoint::Infinity => dormant_event(),
            };
            outs.push((SemValue::pair(SemValue::Widget(l.clone()), ev), w));
        }
        Ok(outs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::check_source;

    const TURN_RED: &str = "
def turnRedOnClick : ∀(i:Id). Widget i ⊸ Widget i =
  λw.
  let (w, c) = onClick w in
  let (x, ⟨⟩ @ x) = out c in
  let (p, w @ x) = split w in
  join (p, (setColor (w, F Red)) @ x)
";

    fn outcomes(src: &str, h: u64) -> Result<OutcomeSet, SemError> {
        let c = check_source(src).unwrap_or_else(|e| panic!("{e}"));
        eval_denot(&c.program, h)
    }

    fn books(o: &Outcome) -> Vec<Value> {
        o.result.as_ref().unwrap().iter().map(Logbook::to_json).collect()
    }

    #[test]
    fn one_click_forks_per_frame_and_infinity() {
        let src = format!("{TURN_RED}\ndef main : ∃(i:Id). Widget i = let pack(i, w) = newWidget ⟨⟩ in pack(i, turnRedOnClick w)\n");
        let set = outcomes(&src, 4).unwrap();
        assert_eq!(set.len(), 5);
        let red_at: Vec<Option<u64>> = set
            .outcomes
            .iter()
            .map(|o| {
                let b = &o.result.as_ref().unwrap()[0];
                b.entries.iter().find(|(_, c)| matches!(c, Command::SetColor(_))).map(|(t, _)| *t)
            })
            .collect();
        assert_eq!(red_at, vec![Some(1), Some(2), Some(3), Some(4), None]);
        assert_eq!(books(&set.outcomes[2]), vec![json!({"id": 0, "entries": [[0, "onClick"], [3, "setColor", "Red"]]})]);
    }

    #[test]
    fn independent_events_multiply() {
        let src = format!(
            "{TURN_RED}
def main : (∃(i:Id). Widget i) ⊗ (∃(j:Id). Widget j) =
  (let pack(i, w) = newWidget ⟨⟩ in pack(i, turnRedOnClick w),
   let pack(j, v) = newWidget ⟨⟩ in pack(j, turnRedOnClick v))
"
        );
        for h in 1..=3u64 {
            assert_eq!(outcomes(&src, h).unwrap().len() as u64, (h + 1).pow(2));
        }
    }

    #[test]
    fn dropped_widgets_leave_no_logbook() {
        let set = outcomes("def main : I = let pack(i, w) = newWidget ⟨⟩ in dropWidget w\n", 3).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.outcomes[0].result, Ok(vec![]));
        assert!(set.outcomes[0].choices.is_empty());
    }

    #[test]
    fn clash_is_an_outcome_not_a_failure() {
        let src = "def main : ∃(i:Id). Widget i =
  let pack(i, w) = newWidget ⟨⟩ in pack(i, setColor (setColor (w, F Red), F Blue))\n";
        let set = outcomes(src, 2).unwrap();
        assert_eq!(set.len(), 1);
        let e = set.outcomes[0].result.as_ref().unwrap_err();
        assert_eq!(e.time, 0);
        assert_eq!(set.to_json()["outcomes"][0]["error"]["kind"], "CompatError");
    }

    #[test]
    fn literal_frame_past_horizon_is_rejected() {
        let src = "def main : I @ 5 = ⟨⟩ @ 5\n";
        assert_eq!(outcomes(src, 3), Err(SemError::HorizonExceeded(5, 3)));
        assert_eq!(outcomes(src, 5).unwrap().len(), 1);
    }

    #[test]
    fn branch_limit_is_enforced() {
        let src = format!(
            "{TURN_RED}
def main : (∃(i:Id). Widget i) ⊗ (∃(j:Id). Widget j) =
  (let pack(i, w) = newWidget ⟨⟩ in pack(i, turnRedOnClick w),
   let pack(j, v) = newWidget ⟨⟩ in pack(j, turnRedOnClick v))
"
        );
        let c = check_source(&src).unwrap();
        assert_eq!(eval_denot_with_limit(&c.program, 3, 10), Err(SemError::TooManyBranches(10)));
    }

    #[test]
    fn simultaneous_select_keeps_both_sides() {
        let src = "
def discardClick : ◇I ⊸ I = λe. let (k, ⟨⟩ @ k) = out e in ⟨⟩
def discardKey : ◇(F Char) ⊸ I = λe. let (k, z @ k) = out e in let ⟨⟩ @ k = (let F ch = z in ⟨⟩) in ⟨⟩
def main : ∃(i:Id). Widget i =
  let pack(i, w) = newWidget ⟨⟩ in
  let (w, c) = onClick w in
  let (w, k) = onKeypress w in
  let col = select c as u => (let ⟨⟩ = u in let ⟨⟩ = discardKey k in evt (F Red))
                 | k as ch => (let F z = ch in let ⟨⟩ = discardClick c in evt (F Blue)) in
  let (x, col @ x) = out col in
  let (p, w @ x) = split w in
  pack(i, join (p, (let F v = col in setColor (w, F v)) @ x))
";
        let set = outcomes(src, 1).unwrap();
        // Arrivals in {1, ∞} for each handler, with the 1/1 case split by the tie.
        assert_eq!(set.len(), 5);
        let ties: Vec<&Outcome> = set.outcomes.iter().filter(|o| o.choices.iter().any(|c| matches!(c, Choice::Tie { .. }))).collect();
        assert_eq!(ties.len(), 2);
        let colors: BTreeSet<String> = ties.iter().map(|o| books(o)[0]["entries"][2][2].to_string()).collect();
        assert_eq!(colors.into_iter().collect::<Vec<_>>(), vec!["\"Blue\"", "\"Red\""]);
    }

    #[test]
    fn outcome_json_is_deterministic() {
        let src = format!("{TURN_RED}\ndef main : ∃(i:Id). Widget i = let pack(i, w) = newWidget ⟨⟩ in pack(i, turnRedOnClick w)\n");
        let a = outcomes(&src, 3).unwrap().to_json().to_string();
        let b = outcomes(&src, 3).unwrap().to_json().to_string();
        assert_eq!(a, b);
        assert!(a.contains("\"at\":\"inf\""));
    }
}
