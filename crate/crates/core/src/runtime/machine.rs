//! Push-based interpreter.
//!
//! Evaluation runs eagerly until every remaining redex waits on an event or a future
//! frame. Waiting work lives in event cells (resumed when the event fires) or on a timer
//! wheel keyed by absolute time. Time only moves when the driver asks it to, so the number
//! of evaluation steps depends on the stimuli and never on the horizon.

use std::cell::RefCell;
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::trace::{Stimulus, StimulusKind};
use crate::semantics::value::{Builtin, CartValue};
use crate::semantics::{render_state, Command, CompatError, Handler, Logbook, RenderState, Side};
use crate::syntax::ast::{IndexTerm, SelectParts, SourceProgram, Symbol, Term, TermKind};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("no {kind} handler on widget {widget} registered before time {time}")]
    TraceTargetInvalid { time: u64, widget: u64, kind: &'static str },
    #[error("frame {0} lies beyond the horizon {1}")]
    HorizonExceeded(u64, u64),
    #[error("stimulus at time {0} arrives after time {1}")]
    TimeWentBackwards(u64, u64),
    #[error(transparent)]
    Compat(#[from] CompatError),
    #[error("no entry definition `{0}`")]
    NoEntry(String),
    #[error("stuck term: {0}")]
    StuckTerm(String),
}

impl RuntimeError {
    pub fn kind(&self) -> &'static str {
        match self {
            RuntimeError::TraceTargetInvalid { .. } => "TraceTargetInvalid",
            RuntimeError::HorizonExceeded(..) => "HorizonExceeded",
            RuntimeError::TimeWentBackwards(..) => "TimeWentBackwards",
            RuntimeError::Compat(_) => "CompatError",
            RuntimeError::NoEntry(_) => "NoEntry",
            RuntimeError::StuckTerm(_) => "StuckTerm",
        }
    }
}

type Res<T> = Result<T, RuntimeError>;

fn stuck<T>(what: impl Into<String>) -> Res<T> {
    Err(RuntimeError::StuckTerm(what.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    Left,
    Right,
    Seeded(u64),
}

impl TiePolicy {
    pub fn name(self) -> String {
        match self {
            TiePolicy::Left => "left".into(),
            TiePolicy::Right => "right".into(),
            TiePolicy::Seeded(n) => format!("seed:{n}"),
        }
    }
}

impl std::str::FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "left" => Ok(TiePolicy::Left),
            "right" => Ok(TiePolicy::Right),
            _ => s
                .strip_prefix("seed:")
                .and_then(|n| n.parse().ok())
                .map(TiePolicy::Seeded)
                .ok_or_else(|| format!("expected left, right or seed:N, got {s:?}")),
        }
    }
}

/// Absolute time value; an unfired event's arrival time is known only through its cell.
#[derive(Clone)]
pub(crate) enum TimeVal<'a> {
    Known(u64),
    Event(EvCell<'a>),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Proj {
    Whole,
    Fst,
    Snd,
}

#[derive(Clone)]
pub(crate) enum RtValue<'a> {
    Unit,
    Pair(Box<RtValue<'a>>, Box<RtValue<'a>>),
    Inl(Box<RtValue<'a>>),
    Inr(Box<RtValue<'a>>),
    Closure(Rc<RtClosure<'a>>),
    Cart(CartValue),
    Id(u64),
    Time(TimeVal<'a>),
    Pack(Box<RtValue<'a>>, Box<RtValue<'a>>),
    Builtin(Builtin, Vec<RtValue<'a>>, Vec<RtValue<'a>>),
    Event(EvCell<'a>),
    At(TimeVal<'a>, Box<RtValue<'a>>),
    /// Handle into the widget store.
    Widget(u64),
    Prefix(u64),
    /// Value computed in a later frame, readable once its cell has fired.
    Later(EvCell<'a>, Proj),
    Dormant,
}

pub(crate) enum RtClosure<'a> {
    Lam(Env<'a>, &'a Symbol, &'a Term),
    IndexLam(Env<'a>, &'a Symbol, &'a Term),
    Thunk(Env<'a>, &'a Term),
}

#[derive(Clone, Default)]
pub(crate) struct Env<'a>(Option<Rc<(u32, RtValue<'a>, Env<'a>)>>);

impl<'a> Env<'a> {
    fn bind(&self, s: &Symbol, v: RtValue<'a>) -> Env<'a> {
        Env(Some(Rc::new((s.uid, v, self.clone()))))
    }

    fn lookup(&self, s: &Symbol) -> Option<&RtValue<'a>> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.0 == s.uid {
                return Some(&node.1);
            }
            cur = &node.2 .0;
        }
        None
    }
}

type Job<'a> = Box<dyn FnOnce(&mut Machine<'a>) -> Res<()> + 'a>;

/// A one-shot event: fires at most once, then resumes its waiters in registration order.
pub(crate) type EvCell<'a> = Rc<RefCell<CellState<'a>>>;

pub(crate) struct CellState<'a> {
    fired: Option<(u64, RtValue<'a>)>,
    waiters: Vec<Job<'a>>,
}

fn new_cell<'a>() -> EvCell<'a> {
    Rc::new(RefCell::new(CellState { fired: None, waiters: Vec::new() }))
}

fn fired_at(c: &EvCell<'_>) -> Option<u64> {
    c.borrow().fired.as_ref().map(|(t, _)| *t)
}

impl fmt::Debug for RtValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RtValue::Unit => write!(f, "⟨⟩"),
            RtValue::Pair(a, b) => write!(f, "({a:?}, {b:?})"),
            RtValue::Inl(a) => write!(f, "inl {a:?}"),
            RtValue::Inr(a) => write!(f, "inr {a:?}"),
            RtValue::Closure(_) | RtValue::Builtin(..) => write!(f, "<fun>"),
            RtValue::Cart(c) => write!(f, "{c:?}"),
            RtValue::Id(n) => write!(f, "id {n}"),
            RtValue::Time(_) => write!(f, "<time>"),
            RtValue::Pack(i, v) => write!(f, "pack({i:?}, {v:?})"),
            RtValue::Event(_) => write!(f, "<event>"),
            RtValue::At(TimeVal::Known(a), v) => write!(f, "{v:?} @ {a}"),
            RtValue::At(TimeVal::Event(_), v) => write!(f, "{v:?} @ <event>"),
            RtValue::At(TimeVal::Infinity, v) => write!(f, "{v:?} @ ∞"),
            RtValue::Widget(n) => write!(f, "widget {n}"),
            RtValue::Prefix(n) => write!(f, "prefix {n}"),
            RtValue::Later(..) => write!(f, "<later>"),
            RtValue::Dormant => write!(f, "dormant"),
        }
    }
}

struct WidgetSlot {
    book: Logbook,
    dropped: bool,
}

struct Registration<'a> {
    widget: u64,
    handler: Handler,
    registered_at: u64,
    cell: EvCell<'a>,
}

struct SelectWait<'a> {
    env: Env<'a>,
    parts: &'a SelectParts,
    left_var: &'a Symbol,
    right_var: &'a Symbol,
    left: EvCell<'a>,
    right: EvCell<'a>,
    result: EvCell<'a>,
    done: bool,
}

/// Handler that was installed but never fired.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PendingHandler {
    pub widget: u64,
    pub handler: Handler,
    pub registered_at: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub horizon: u64,
    /// Logbooks of all widgets not dropped, sorted by id, in absolute time.
    pub logbooks: Vec<Logbook>,
    pub choice_log: Vec<(u64, Side)>,
    pub steps_executed: u64,
    pub pending: Vec<PendingHandler>,
}

impl RunResult {
    pub fn to_json(&self) -> Value {
        json!({
            "horizon": self.horizon,
            "logbooks": self.logbooks.iter().map(Logbook::to_json).collect::<Vec<_>>(),
            "choice_log": self.choice_log.iter().map(|(t, s)| json!({ "t": t, "tie": s.name() })).collect::<Vec<_>>(),
            "steps_executed": self.steps_executed,
            "pending": self.pending.iter().map(|p| json!({
                "widget": p.widget,
                "kind": p.handler.name(),
                "registered_at": p.registered_at,
            })).collect::<Vec<_>>(),
        })
    }
}

pub struct Machine<'a> {
    defs: HashMap<&'a str, &'a Term>,
    horizon: u64,
    now: u64,
    next_id: u64,
    widgets: BTreeMap<u64, WidgetSlot>,
    handlers: Vec<Registration<'a>>,
    timers: BTreeMap<u64, Vec<Job<'a>>>,
    ready: VecDeque<Job<'a>>,
    selects: Vec<SelectWait<'a>>,
    select_queue: VecDeque<usize>,
    policy: TiePolicy,
    rng: ChaCha8Rng,
    choice_log: Vec<(u64, Side)>,
    steps: u64,
    result: Option<RtValue<'a>>,
}

impl<'a> Machine<'a> {
    /// Evaluate the entry definition at time 0 until it blocks.
    pub fn new(p: &'a SourceProgram, horizon: u64, policy: TiePolicy) -> Result<Self, RuntimeError> {
        let entry = p.definition(&p.entry).ok_or_else(|| RuntimeError::NoEntry(p.entry.clone()))?;
        let seed = match policy {
            TiePolicy::Seeded(s) => s,
            _ => 0,
        };
        let mut m = Machine {
            defs: p.definitions.iter().map(|d| (d.name.as_str(), &d.body)).collect(),
            horizon,
            now: 0,
            next_id: 0,
            widgets: BTreeMap::new(),
            handlers: Vec::new(),
            timers: BTreeMap::new(),
            ready: VecDeque::new(),
            selects: Vec::new(),
            select_queue: VecDeque::new(),
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            choice_log: Vec::new(),
            steps: 0,
            result: None,
        };
        let v = m.eval(&Env::default(), &entry.body)?;
        m.result = Some(v);
        m.drain_ready()?;
        Ok(m)
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Deliver one stimulus to every matching handler installed strictly before its time.
    pub fn inject(&mut self, s: Stimulus) -> Result<(), RuntimeError> {
        if s.time > self.horizon {
            return Err(RuntimeError::HorizonExceeded(s.time, self.horizon));
        }
        self.advance_to(s.time)?;
        let handler = s.kind.handler();
        let registered: Vec<&Registration<'a>> =
            self.handlers.iter().filter(|r| r.widget == s.widget && r.handler == handler && r.registered_at < s.time).collect();
        if registered.is_empty() {
            return Err(RuntimeError::TraceTargetInvalid { time: s.time, widget: s.widget, kind: handler.name() });
        }
        // Handlers that already fired stay registered; the stimulus reaches none of them.
        let targets: Vec<EvCell<'a>> =
            registered.into_iter().filter(|r| r.cell.borrow().fired.is_none()).map(|r| r.cell.clone()).collect();
        let payload = match s.kind {
            StimulusKind::Click => RtValue::Unit,
            StimulusKind::Keypress(c) => RtValue::Cart(CartValue::Char(c)),
        };
        for c in targets {
            self.fire(&c, payload.clone())?;
        }
        self.drain_ready()
    }

    /// Move the clock to `t`, running every frame scheduled up to and including `t`.
    ///
    /// Selects for a time step are settled only once the clock leaves it, so that
    /// events arriving later in the same step still count as ties.
    pub fn advance_to(&mut self, t: u64) -> Result<(), RuntimeError> {
        if t < self.now {
            return Err(RuntimeError::TimeWentBackwards(t, self.now));
        }
        while let Some(a) = self.timers.keys().next().copied().filter(|&a| a <= t) {
            if a > self.now {
                self.settle()?;
                self.now = a;
            }
            let jobs = self.timers.remove(&a).unwrap_or_default();
            self.ready.extend(jobs);
            self.drain_ready()?;
        }
        if t > self.now {
            self.settle()?;
            self.now = t;
        }
        Ok(())
    }

    /// Finish the current time step: run ready work and resolve waiting selects.
    pub fn settle(&mut self) -> Result<(), RuntimeError> {
        loop {
            self.drain_ready()?;
            match self.select_queue.pop_front() {
                Some(i) => self.run_select(i)?,
                None => return Ok(()),
            }
        }
    }

    /// Render every live widget as of time `t`, advancing the clock there first.
    pub fn snapshot(&mut self, t: u64) -> Result<Vec<RenderState>, RuntimeError> {
        self.advance_to(t)?;
        self.settle()?;
        Ok(self.widgets.values().filter(|w| !w.dropped).map(|w| render_state(&w.book, t)).collect())
    }

    /// Run out the clock to the horizon and report the final state.
    pub fn finish(&mut self) -> Result<RunResult, RuntimeError> {
        let h = self.horizon.max(self.now);
        self.advance_to(h)?;
        self.settle()?;
        let mut pending: Vec<PendingHandler> = self
            .handlers
            .iter()
            .filter(|r| r.cell.borrow().fired.is_none())
            .map(|r| PendingHandler { widget: r.widget, handler: r.handler, registered_at: r.registered_at })
            .collect();
        pending.sort();
        Ok(RunResult {
            horizon: self.horizon,
            logbooks: self.widgets.values().filter(|w| !w.dropped).map(|w| w.book.clone()).collect(),
            choice_log: self.choice_log.clone(),
            steps_executed: self.steps,
            pending,
        })
    }

    fn drain_ready(&mut self) -> Res<()> {
        while let Some(job) = self.ready.pop_front() {
            job(self)?;
        }
        Ok(())
    }

    fn fire(&mut self, c: &EvCell<'a>, v: RtValue<'a>) -> Res<()> {
        let mut st = c.borrow_mut();
        if st.fired.is_some() {
            return stuck("continuation resumed twice");
        }
        st.fired = Some((self.now, v));
        let waiters = std::mem::take(&mut st.waiters);
        drop(st);
        self.ready.extend(waiters);
        Ok(())
    }

    fn when_fired(&mut self, c: &EvCell<'a>, job: Job<'a>) {
        let mut st = c.borrow_mut();
        if st.fired.is_some() {
            drop(st);
            self.ready.push_back(job);
        } else {
            st.waiters.push(job);
        }
    }

    fn schedule(&mut self, at: u64, job: Job<'a>) {
        if at == self.now {
            self.ready.push_back(job);
        } else {
            self.timers.entry(at).or_default().push(job);
        }
    }

    fn normalize(&self, t: TimeVal<'a>) -> TimeVal<'a> {
        match t {
            TimeVal::Event(c) => match fired_at(&c) {
                Some(a) => TimeVal::Known(a),
                None => TimeVal::Event(c),
            },
            other => other,
        }
    }

    fn payload(c: &EvCell<'a>) -> RtValue<'a> {
        match &c.borrow().fired {
            Some((_, v)) => v.clone(),
            None => RtValue::Later(c.clone(), Proj::Whole),
        }
    }

    fn force(&self, v: RtValue<'a>) -> Res<RtValue<'a>> {
        match v {
            RtValue::Later(c, p) => {
                let inner = match &c.borrow().fired {
                    Some((_, v)) => v.clone(),
                    None => return stuck("read of a value from a frame that has not happened"),
                };
                let inner = self.force(inner)?;
                match (p, inner) {
                    (Proj::Whole, v) => Ok(v),
                    (Proj::Fst, RtValue::Pair(a, _)) => self.force(*a),
                    (Proj::Snd, RtValue::Pair(_, b)) => self.force(*b),
                    (_, v) => stuck(format!("projection from {v:?}")),
                }
            }
            other => Ok(other),
        }
    }

    /// Evaluate `t` in the frame at `tau`, deferring it if that frame is in the future.
    fn in_frame(&mut self, env: &Env<'a>, tau: TimeVal<'a>, t: &'a Term) -> Res<RtValue<'a>> {
        let job_for = |cell: EvCell<'a>, env: Env<'a>| -> Job<'a> {
            Box::new(move |m: &mut Machine<'a>| {
                let v = m.eval(&env, t)?;
                m.fire(&cell, v)
            })
        };
        match self.normalize(tau) {
            TimeVal::Known(a) if a == self.now => self.eval(env, t),
            TimeVal::Known(a) if a > self.horizon => Err(RuntimeError::HorizonExceeded(a, self.horizon)),
            TimeVal::Known(a) if a < self.now => stuck(format!("frame {a} is already in the past at {}", self.now)),
            TimeVal::Known(a) => {
                let c = new_cell();
                self.schedule(a, job_for(c.clone(), env.clone()));
                Ok(RtValue::Later(c, Proj::Whole))
            }
            TimeVal::Event(e) => {
                let c = new_cell();
                self.when_fired(&e, job_for(c.clone(), env.clone()));
                Ok(RtValue::Later(c, Proj::Whole))
            }
            TimeVal::Infinity => Ok(RtValue::Dormant),
        }
    }

    fn break_tie(&mut self) -> Side {
        let side = match self.policy {
            TiePolicy::Left => Side::Left,
            TiePolicy::Right => Side::Right,
            TiePolicy::Seeded(_) => {
                if self.rng.gen_bool(0.5) {
                    Side::Left
                } else {
                    Side::Right
                }
            }
        };
        self.choice_log.push((self.now, side));
        side
    }
}

impl<'a> Machine<'a> {
    fn index(&self, env: &Env<'a>, s: &IndexTerm) -> Res<RtValue<'a>> {
        match s {
            IndexTerm::Var(x) => env.lookup(x).cloned().map_or_else(|| stuck(format!("unbound index {x}")), Ok),
            IndexTerm::TimeLit(n) => Ok(RtValue::Time(TimeVal::Known(self.now + n))),
            IndexTerm::IdLit(n) => Ok(RtValue::Id(*n)),
            IndexTerm::Infinity => Ok(RtValue::Time(TimeVal::Infinity)),
            IndexTerm::Meta(_) => stuck("unsolved index argument"),
        }
    }

    fn time(&self, env: &Env<'a>, s: &IndexTerm) -> Res<TimeVal<'a>> {
        match self.index(env, s)? {
            RtValue::Time(t) => Ok(t),
            other => stuck(format!("expected a time, found {other:?}")),
        }
    }

    fn eval(&mut self, env: &Env<'a>, t: &'a Term) -> Res<RtValue<'a>> {
        use TermKind::*;
        self.steps += 1;
        match &t.kind {
            Var(x) => env.lookup(x).cloned().map_or_else(|| stuck(format!("unbound variable {x}")), Ok),
            Global(g) => {
                if let Some(b) = Builtin::from_name(g) {
                    return Ok(RtValue::Builtin(b, vec![], vec![]));
                }
                match self.defs.get(g.as_str()) {
                    Some(body) => self.eval(&Env::default(), body),
                    None => stuck(format!("unknown global {g}")),
                }
            }
            Lam(x, _, b) => Ok(RtValue::Closure(Rc::new(RtClosure::Lam(env.clone(), x, b)))),
            IndexLam(x, _, b) => Ok(RtValue::Closure(Rc::new(RtClosure::IndexLam(env.clone(), x, b)))),
            GIntro(b) => Ok(RtValue::Closure(Rc::new(RtClosure::Thunk(env.clone(), b)))),
            App(f, a) => {
                let fv = self.eval(env, f)?;
                let fv = self.force(fv)?;
                let av = self.eval(env, a)?;
                self.apply(fv, av)
            }
            IndexApp(f, s) => {
                let iv = self.index(env, s)?;
                let fv = self.eval(env, f)?;
                match self.force(fv)? {
                    RtValue::Closure(c) => match &*c {
                        RtClosure::IndexLam(cenv, x, body) => self.eval(&cenv.bind(x, iv), body),
                        _ => stuck("index applied to a non-generic closure"),
                    },
                    RtValue::Builtin(b, mut idx, args) => {
                        idx.push(iv);
                        Ok(RtValue::Builtin(b, idx, args))
                    }
                    other => stuck(format!("index applied to {other:?}")),
                }
            }
            Unit => Ok(RtValue::Unit),
            Star => Ok(RtValue::Cart(CartValue::Star)),
            ColorLit(c) => Ok(RtValue::Cart(CartValue::Color(*c))),
            CharLit(c) => Ok(RtValue::Cart(CartValue::Char(*c))),
            Pair(a, b) => {
                let av = self.eval(env, a)?;
                let bv = self.eval(env, b)?;
                Ok(RtValue::Pair(Box::new(av), Box::new(bv)))
            }
            Inl(a) => Ok(RtValue::Inl(Box::new(self.eval(env, a)?))),
            Inr(a) => Ok(RtValue::Inr(Box::new(self.eval(env, a)?))),
            Evt(a) => {
                let v = self.eval(env, a)?;
                let c = new_cell();
                self.fire(&c, v)?;
                Ok(RtValue::Event(c))
            }
            Fold(a) | Unfold(a) | FIntro(a) | Annot(a, _) => self.eval(env, a),
            RunG(a) => {
                let v = self.eval(env, a)?;
                match self.force(v)? {
                    RtValue::Closure(c) => match &*c {
                        RtClosure::Thunk(cenv, body) => self.eval(cenv, body),
                        _ => Ok(RtValue::Closure(c.clone())),
                    },
                    other => Ok(other),
                }
            }
            Pack(s, a) => {
                let iv = self.index(env, s)?;
                Ok(RtValue::Pack(Box::new(iv), Box::new(self.eval(env, a)?)))
            }
            At(a, s) => {
                let tau = self.time(env, s)?;
                let v = self.in_frame(env, tau.clone(), a)?;
                Ok(RtValue::At(tau, Box::new(v)))
            }
            LetUnit(a, b) => {
                self.eval(env, a)?;
                self.eval(env, b)
            }
            Let(x, a, b) | LetF(x, a, b) => {
                let v = self.eval(env, a)?;
                self.eval(&env.bind(x, v), b)
            }
            LetPair(x, y, a, b) => {
                let v = self.eval(env, a)?;
                match self.force(v)? {
                    RtValue::Pair(l, r) => self.eval(&env.bind(x, *l).bind(y, *r), b),
                    other => stuck(format!("expected a pair, found {other:?}")),
                }
            }
            LetPack(s, x, a, b) => {
                let v = self.eval(env, a)?;
                match self.force(v)? {
                    RtValue::Pack(i, v) => self.eval(&env.bind(s, *i).bind(x, *v), b),
                    other => stuck(format!("expected a package, found {other:?}")),
                }
            }
            Case(a, x, l, y, r) => {
                let v = self.eval(env, a)?;
                match self.force(v)? {
                    RtValue::Inl(v) => self.eval(&env.bind(x, *v), l),
                    RtValue::Inr(v) => self.eval(&env.bind(y, *v), r),
                    other => stuck(format!("expected a sum, found {other:?}")),
                }
            }
            LetEvt(x, a, body) => {
                let v = self.eval(env, a)?;
                let RtValue::Event(c) = self.force(v)? else { return stuck("let evt on a non-event") };
                let result = new_cell();
                let (env, r2, c2) = (env.clone(), result.clone(), c.clone());
                self.when_fired(
                    &c,
                    Box::new(move |m: &mut Machine<'a>| {
                        let v = m.eval(&env.bind(x, Machine::payload(&c2)), body)?;
                        m.forward(v, r2)
                    }),
                );
                Ok(RtValue::Event(result))
            }
            LetAt(x, _, a, b) => {
                let v = self.eval(env, a)?;
                match self.force(v)? {
                    RtValue::At(_, v) => self.eval(&env.bind(x, *v), b),
                    other => stuck(format!("expected a timed value, found {other:?}")),
                }
            }
            LetUnitAt(s, a, b) => {
                let tau = self.time(env, s)?;
                self.in_frame(env, tau, a)?;
                self.eval(env, b)
            }
            LetPairAt(x, y, s, a, b) => {
                let tau = self.time(env, s)?;
                let (l, r) = match self.in_frame(env, tau, a)? {
                    RtValue::Later(c, Proj::Whole) => (RtValue::Later(c.clone(), Proj::Fst), RtValue::Later(c, Proj::Snd)),
                    RtValue::Dormant => (RtValue::Dormant, RtValue::Dormant),
                    v => match self.force(v)? {
                        RtValue::Pair(l, r) => (*l, *r),
                        other => return stuck(format!("expected a pair, found {other:?}")),
                    },
                };
                self.eval(&env.bind(x, l).bind(y, r), b)
            }
            Select(parts) => self.select(env, parts),
            LetPat(..) => stuck("pattern let survived desugaring"),
        }
    }

    /// Fire `target` with the payload of the event value `v` once it arrives.
    fn forward(&mut self, v: RtValue<'a>, target: EvCell<'a>) -> Res<()> {
        match self.force(v)? {
            RtValue::Event(c) => {
                let c2 = c.clone();
                self.when_fired(&c, Box::new(move |m: &mut Machine<'a>| m.fire(&target, Machine::payload(&c2))));
                Ok(())
            }
            other => stuck(format!("event continuation returned {other:?}")),
        }
    }

    fn select(&mut self, env: &Env<'a>, parts: &'a SelectParts) -> Res<RtValue<'a>> {
        let scrutinee = |t: &'a Term| -> Res<(&'a Symbol, EvCell<'a>)> {
            let TermKind::Var(x) = &t.kind else { return stuck("select scrutinee must be a variable") };
            match env.lookup(x) {
                Some(RtValue::Event(c)) => Ok((x, c.clone())),
                other => stuck(format!("select on {other:?}")),
            }
        };
        let (left_var, left) = scrutinee(&parts.left)?;
        let (right_var, right) = scrutinee(&parts.right)?;
        let result = new_cell();
        let i = self.selects.len();
        self.selects.push(SelectWait {
            env: env.clone(),
            parts,
            left_var,
            right_var,
            left: left.clone(),
            right: right.clone(),
            result: result.clone(),
            done: false,
        });
        for c in [&left, &right] {
            self.when_fired(
                c,
                Box::new(move |m: &mut Machine<'a>| {
                    m.select_queue.push_back(i);
                    Ok(())
                }),
            );
        }
        Ok(RtValue::Event(result))
    }

    fn run_select(&mut self, i: usize) -> Res<()> {
        let s = &self.selects[i];
        if s.done {
            return Ok(());
        }
        let side = match (fired_at(&s.left).is_some(), fired_at(&s.right).is_some()) {
            (false, false) => return Ok(()),
            (true, false) => Side::Left,
            (false, true) => Side::Right,
            (true, true) => self.break_tie(),
        };
        let s = &mut self.selects[i];
        s.done = true;
        let (env, body) = match side {
            Side::Left => (
                s.env.bind(&s.parts.left_bind, Machine::payload(&s.left)).bind(s.right_var, RtValue::Event(s.right.clone())),
                &s.parts.left_body,
            ),
            Side::Right => (
                s.env.bind(&s.parts.right_bind, Machine::payload(&s.right)).bind(s.left_var, RtValue::Event(s.left.clone())),
                &s.parts.right_body,
            ),
        };
        let result = s.result.clone();
        let v = self.eval(&env, body)?;
        self.forward(v, result)
    }
}

impl<'a> Machine<'a> {
    fn apply(&mut self, f: RtValue<'a>, a: RtValue<'a>) -> Res<RtValue<'a>> {
        match f {
            RtValue::Closure(c) => match &*c {
                RtClosure::Lam(cenv, x, body) => self.eval(&cenv.bind(x, a), body),
                _ => stuck("applied a non-function closure"),
            },
            RtValue::Builtin(b, idx, mut args) => {
                args.push(a);
                if args.len() < b.arity() {
                    return Ok(RtValue::Builtin(b, idx, args));
                }
                self.builtin(b, idx, args)
            }
            other => stuck(format!("applied {other:?}")),
        }
    }

    fn widget(&self, v: RtValue<'a>) -> Res<u64> {
        match self.force(v)? {
            RtValue::Widget(id) => Ok(id),
            other => stuck(format!("expected a widget, found {other:?}")),
        }
    }

    fn write(&mut self, id: u64, cmd: Command) -> Res<()> {
        let now = self.now;
        match self.widgets.get_mut(&id) {
            Some(slot) => Ok(slot.book.insert((now, cmd))?),
            None => stuck(format!("unknown widget {id}")),
        }
    }

    fn builtin(&mut self, b: Builtin, idx: Vec<RtValue<'a>>, mut args: Vec<RtValue<'a>>) -> Res<RtValue<'a>> {
        let arg = args.pop().expect("arity at least one");
        match b {
            Builtin::NewWidget => {
                let id = self.next_id;
                self.next_id += 1;
                self.widgets.insert(id, WidgetSlot { book: Logbook::new(id), dropped: false });
                Ok(RtValue::Pack(Box::new(RtValue::Id(id)), Box::new(RtValue::Widget(id))))
            }
            Builtin::DropWidget => {
                let id = self.widget(arg)?;
                if let Some(slot) = self.widgets.get_mut(&id) {
                    slot.dropped = true;
                }
                Ok(RtValue::Unit)
            }
            Builtin::SetColor => {
                let RtValue::Pair(w, c) = self.force(arg)? else { return stuck("setColor expects a pair") };
                let id = self.widget(*w)?;
                let RtValue::Cart(CartValue::Color(c)) = self.force(*c)? else { return stuck("setColor expects a color") };
                self.write(id, Command::SetColor(c))?;
                Ok(RtValue::Widget(id))
            }
            Builtin::OnClick | Builtin::OnKeypress => {
                let id = self.widget(arg)?;
                let (handler, cmd) = match b {
                    Builtin::OnClick => (Handler::Click, Command::OnClick),
                    _ => (Handler::Keypress, Command::OnKeypress),
                };
                self.write(id, cmd)?;
                let cell = new_cell();
                self.handlers.push(Registration { widget: id, handler, registered_at: self.now, cell: cell.clone() });
                Ok(RtValue::Pair(Box::new(RtValue::Widget(id)), Box::new(RtValue::Event(cell))))
            }
            Builtin::Out => {
                let RtValue::Event(c) = self.force(arg)? else { return stuck("out expects an event") };
                let tau = self.normalize(TimeVal::Event(c.clone()));
                let payload = Machine::payload(&c);
                Ok(RtValue::Pack(Box::new(RtValue::Time(tau.clone())), Box::new(RtValue::At(tau, Box::new(payload)))))
            }
            Builtin::Into => {
                let RtValue::Pack(tau, v) = self.force(arg)? else { return stuck("into expects a package") };
                let RtValue::Time(tau) = *tau else { return stuck("into expects a time witness") };
                let v = match self.force(*v)? {
                    RtValue::At(_, v) => *v,
                    other => return stuck(format!("into expects a timed value, found {other:?}")),
                };
                let result = new_cell();
                let r2 = result.clone();
                let job: Job<'a> = Box::new(move |m: &mut Machine<'a>| {
                    let v = m.force(v)?;
                    m.fire(&r2, v)
                });
                match self.normalize(tau) {
                    TimeVal::Known(a) if a > self.horizon => return Err(RuntimeError::HorizonExceeded(a, self.horizon)),
                    TimeVal::Known(a) => self.schedule(a.max(self.now), job),
                    TimeVal::Event(c) => self.when_fired(&c, job),
                    TimeVal::Infinity => {}
                }
                Ok(RtValue::Event(result))
            }
            Builtin::Split => {
                let id = self.widget(arg)?;
                let tau = match idx.last() {
                    Some(RtValue::Time(t)) => t.clone(),
                    _ => return stuck("split without a time index"),
                };
                Ok(RtValue::Pair(Box::new(RtValue::Prefix(id)), Box::new(RtValue::At(tau, Box::new(RtValue::Widget(id))))))
            }
            Builtin::Join => {
                let RtValue::Pair(p, _) = self.force(arg)? else { return stuck("join expects a pair") };
                match self.force(*p)? {
                    RtValue::Prefix(id) => Ok(RtValue::Widget(id)),
                    other => stuck(format!("join expects a prefix, found {other:?}")),
                }
            }
            Builtin::VAttach => {
                let child = self.widget(arg)?;
                let parent = match args.pop() {
                    Some(v) => self.widget(v)?,
                    None => return stuck("vAttach without a parent"),
                };
                self.write(parent, Command::Attach(child))?;
                Ok(RtValue::Widget(parent))
            }
        }
    }
}

/// Run `p` against `trace` up to `horizon`.
pub fn run(p: &SourceProgram, trace: &super::EventTrace, horizon: u64, policy: TiePolicy) -> Result<RunResult, RuntimeError> {
    let mut m = Machine::new(p, horizon, policy)?;
    for s in &trace.stimuli {
        m.inject(*s)?;
    }
    m.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check_source;
    use crate::runtime::EventTrace;
    use crate::syntax::ast::Color;

    const TURN_RED: &str = "
def turnRedOnClick : ∀(i:Id). Widget i ⊸ Widget i =
  λw.
  let (w, c) = onClick w in
  let (x, ⟨⟩ @ x) = out c in
  let (p, w @ x) = split w in
  join (p, (setColor (w, F Red)) @ x)

def main : ∃(i:Id). Widget i = let pack(i, w) = newWidget ⟨⟩ in pack(i, turnRedOnClick w)
";

    const CHANGE_COLOR: &str = "
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

    fn go(src: &str, trace: Vec<Stimulus>, h: u64, policy: TiePolicy) -> Result<RunResult, RuntimeError> {
        let c = check_source(src).unwrap_or_else(|e| panic!("{e}"));
        run(&c.program, &EventTrace::new(trace), h, policy)
    }

    #[test]
    fn click_turns_red_at_its_time() {
        let r = go(TURN_RED, vec![Stimulus::click(5, 0)], 8, TiePolicy::Left).unwrap();
        assert_eq!(r.logbooks[0].to_json(), json!({"id": 0, "entries": [[0, "onClick"], [5, "setColor", "Red"]]}));
        assert!(r.pending.is_empty());
        assert!(r.choice_log.is_empty());
    }

    #[test]
    fn unfired_handlers_are_reported() {
        let r = go(TURN_RED, vec![], 8, TiePolicy::Left).unwrap();
        assert_eq!(r.pending, vec![PendingHandler { widget: 0, handler: Handler::Click, registered_at: 0 }]);
        assert_eq!(r.logbooks[0].entries.len(), 1);
    }

    #[test]
    fn steps_do_not_depend_on_horizon() {
        for trace in [vec![], vec![Stimulus::click(3, 0)]] {
            let steps: Vec<u64> =
                [4, 8, 16, 1 << 20].iter().map(|&h| go(TURN_RED, trace.clone(), h, TiePolicy::Left).unwrap().steps_executed).collect();
            assert!(steps.windows(2).all(|w| w[0] == w[1]), "{steps:?}");
        }
    }

    #[test]
    fn handlers_fire_only_after_registration_and_once() {
        let at_zero = go(TURN_RED, vec![Stimulus::click(0, 0)], 8, TiePolicy::Left);
        assert_eq!(at_zero, Err(RuntimeError::TraceTargetInvalid { time: 0, widget: 0, kind: "click" }));
        let once = go(TURN_RED, vec![Stimulus::click(2, 0)], 8, TiePolicy::Left).unwrap();
        let twice = go(TURN_RED, vec![Stimulus::click(2, 0), Stimulus::click(3, 0)], 8, TiePolicy::Left).unwrap();
        assert_eq!(twice.logbooks, once.logbooks);
        let unknown = go(TURN_RED, vec![Stimulus::click(2, 7)], 8, TiePolicy::Left);
        assert!(matches!(unknown, Err(RuntimeError::TraceTargetInvalid { widget: 7, .. })));
        let keypress = go(TURN_RED, vec![Stimulus::keypress(2, 0, 'x')], 8, TiePolicy::Left);
        assert!(matches!(keypress, Err(RuntimeError::TraceTargetInvalid { kind: "keypress", .. })));
    }

    #[test]
    fn stimuli_past_the_horizon_are_rejected() {
        let r = go(TURN_RED, vec![Stimulus::click(9, 0)], 8, TiePolicy::Left);
        assert_eq!(r, Err(RuntimeError::HorizonExceeded(9, 8)));
        let lit = go("def main : I @ 5 = ⟨⟩ @ 5\n", vec![], 3, TiePolicy::Left);
        assert_eq!(lit, Err(RuntimeError::HorizonExceeded(5, 3)));
    }

    #[test]
    fn select_takes_the_earlier_event() {
        let r = go(CHANGE_COLOR, vec![Stimulus::keypress(2, 0, 'q'), Stimulus::click(3, 0)], 4, TiePolicy::Left).unwrap();
        assert_eq!(r.logbooks[0].entries.iter().last(), Some(&(2, Command::SetColor(Color::Blue))));
        assert!(r.choice_log.is_empty());
    }

    #[test]
    fn ties_follow_the_policy() {
        let trace = vec![Stimulus::click(2, 0), Stimulus::keypress(2, 0, 'a')];
        let color = |p| {
            let r = go(CHANGE_COLOR, trace.clone(), 4, p).unwrap();
            (r.logbooks[0].entries.iter().last().copied(), r.choice_log)
        };
        assert_eq!(color(TiePolicy::Left), (Some((2, Command::SetColor(Color::Red))), vec![(2, Side::Left)]));
        assert_eq!(color(TiePolicy::Right), (Some((2, Command::SetColor(Color::Blue))), vec![(2, Side::Right)]));
        let seeded: Vec<_> = (0..16).map(|s| color(TiePolicy::Seeded(s))).collect();
        assert_eq!(seeded, (0..16).map(|s| color(TiePolicy::Seeded(s))).collect::<Vec<_>>());
        assert!(seeded.iter().any(|c| c.1[0].1 == Side::Left) && seeded.iter().any(|c| c.1[0].1 == Side::Right));
    }

    #[test]
    fn clock_never_runs_backwards() {
        let c = check_source(TURN_RED).unwrap();
        let mut m = Machine::new(&c.program, 8, TiePolicy::Left).unwrap();
        m.advance_to(4).unwrap();
        assert_eq!(m.inject(Stimulus::click(3, 0)), Err(RuntimeError::TimeWentBackwards(3, 4)));
    }

    #[test]
    fn snapshot_renders_color_from_the_click_on() {
        let c = check_source(TURN_RED).unwrap();
        let mut m = Machine::new(&c.program, 16, TiePolicy::Left).unwrap();
        assert_eq!(m.snapshot(2).unwrap()[0].color, None);
        m.inject(Stimulus::click(3, 0)).unwrap();
        let s = m.snapshot(3).unwrap();
        assert_eq!(s[0].color, Some(Color::Red));
        assert_eq!(s[0].handlers.iter().copied().collect::<Vec<_>>(), vec![Handler::Click]);
    }

    #[test]
    fn tie_policy_parsing() {
        assert_eq!("left".parse(), Ok(TiePolicy::Left));
        assert_eq!("right".parse(), Ok(TiePolicy::Right));
        assert_eq!("seed:42".parse(), Ok(TiePolicy::Seeded(42)));
        assert!("seed:x".parse::<TiePolicy>().is_err());
        assert_eq!(TiePolicy::Seeded(7).name(), "seed:7");
    }
}
