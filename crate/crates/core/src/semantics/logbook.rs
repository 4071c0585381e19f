//! Widget objects as logbooks of timed commands.

use std::collections::BTreeSet;
use std::fmt;

use serde_json::{json, Value};

use crate::syntax::ast::Color;

/// A point of the time axis extended with a point at infinity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimePoint {
    Finite(u64),
    Infinity,
}

impl TimePoint {
    pub fn finite(self) -> Option<u64> {
        match self {
            TimePoint::Finite(n) => Some(n),
            TimePoint::Infinity => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, TimePoint::Finite(_))
    }

    /// Saturating addition; anything plus infinity is infinity.
    pub fn plus(self, other: TimePoint) -> TimePoint {
        match (self, other) {
            (TimePoint::Finite(a), TimePoint::Finite(b)) => TimePoint::Finite(a + b),
            _ => TimePoint::Infinity,
        }
    }

    pub fn to_json(self) -> Value {
        match self {
            TimePoint::Finite(n) => json!(n),
            TimePoint::Infinity => json!("inf"),
        }
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimePoint::Finite(n) => write!(f, "{n}"),
            TimePoint::Infinity => f.write_str("∞"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    SetColor(Color),
    OnClick,
    OnKeypress,
    /// The widget with this id was attached as a child.
    Attach(u64),
}

impl Command {
    fn entry_json(self, t: u64) -> Value {
        match self {
            Command::SetColor(c) => json!([t, "setColor", c.name()]),
            Command::OnClick => json!([t, "onClick"]),
            Command::OnKeypress => json!([t, "onKeypress"]),
            Command::Attach(j) => json!([t, "attach", j]),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::SetColor(c) => write!(f, "setColor {}", c.name()),
            Command::OnClick => f.write_str("onClick"),
            Command::OnKeypress => f.write_str("onKeypress"),
            Command::Attach(j) => write!(f, "attach {j}"),
        }
    }
}

/// Only two color changes conflict.
pub fn compatible(c1: Command, c2: Command) -> bool {
    !matches!((c1, c2), (Command::SetColor(_), Command::SetColor(_)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("incompatible commands at time {time}: {first} and {second}")]
pub struct CompatError {
    pub time: u64,
    pub first: Command,
    pub second: Command,
}

impl CompatError {
    pub fn delayed(self, t: u64) -> CompatError {
        CompatError { time: self.time + t, ..self }
    }
}

/// Invariant: distinct entries at one time are pairwise compatible.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Logbook {
    pub id: u64,
    pub entries: BTreeSet<(u64, Command)>,
}

impl Logbook {
    pub fn new(id: u64) -> Self {
        Logbook { id, entries: BTreeSet::new() }
    }

    /// Builds a logbook, validating compatibility.
    pub fn from_entries(id: u64, entries: impl IntoIterator<Item = (u64, Command)>) -> Result<Self, CompatError> {
        let mut w = Logbook::new(id);
        for e in entries {
            w.insert(e)?;
        }
        Ok(w)
    }

    pub fn insert(&mut self, (t, c): (u64, Command)) -> Result<(), CompatError> {
        let clash = self.entries.iter().find(|&&(u, d)| u == t && d != c && !compatible(d, c));
        if let Some(&(_, d)) = clash {
            return Err(CompatError { time: t, first: d, second: c });
        }
        self.entries.insert((t, c));
        Ok(())
    }

    pub fn is_compatible(&self) -> bool {
        let v: Vec<_> = self.entries.iter().collect();
        v.windows(2).all(|w| w[0].0 != w[1].0 || compatible(w[0].1, w[1].1))
    }

    /// Entries moved `t` steps later.
    pub fn delayed(&self, t: u64) -> Logbook {
        Logbook { id: self.id, entries: self.entries.iter().map(|&(u, c)| (u + t, c)).collect() }
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self.entries.iter().map(|&(t, c)| c.entry_json(t)).collect();
        json!({ "id": self.id, "entries": entries })
    }
}

/// Entries strictly before `cutoff`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PrefixBook {
    pub id: u64,
    pub cutoff: TimePoint,
    pub entries: BTreeSet<(u64, Command)>,
}

pub fn widget_union(w1: &Logbook, w2: &Logbook) -> Result<Logbook, CompatError> {
    debug_assert_eq!(w1.id, w2.id);
    let mut out = w1.clone();
    for &e in &w2.entries {
        out.insert(e)?;
    }
    Ok(out)
}

/// Keeps entries at or after `t`, re-timed relative to `t`.
pub fn shift(t: u64, w: &Logbook) -> Logbook {
    Logbook { id: w.id, entries: w.entries.iter().filter(|(u, _)| *u >= t).map(|&(u, c)| (u - t, c)).collect() }
}

pub fn prefix_of(t: u64, w: &Logbook) -> PrefixBook {
    PrefixBook { id: w.id, cutoff: TimePoint::Finite(t), entries: w.entries.iter().filter(|(u, _)| *u < t).copied().collect() }
}

pub fn split_sem(t: u64, w: &Logbook) -> (PrefixBook, Logbook) {
    (prefix_of(t, w), shift(t, w))
}

/// Inverse of [`split_sem`]; requires `p.cutoff == Finite(t)`.
pub fn join_sem(t: u64, p: &PrefixBook, w: &Logbook) -> Result<Logbook, CompatError> {
    debug_assert_eq!(p.cutoff, TimePoint::Finite(t));
    let mut out = Logbook { id: p.id, entries: p.entries.clone() };
    for &(u, c) in &w.entries {
        out.insert((u + t, c))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Handler {
    Click,
    Keypress,
}

impl Handler {
    pub fn name(self) -> &'static str {
        match self {
            Handler::Click => "click",
            Handler::Keypress => "keypress",
        }
    }
}

/// Observable state of a widget at one time step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderState {
    pub id: u64,
    pub color: Option<Color>,
    pub handlers: BTreeSet<Handler>,
    pub children: Vec<u64>,
}

impl RenderState {
    pub fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "color": self.color.map(|c| c.name()),
            "handlers": self.handlers.iter().map(|h| h.name()).collect::<Vec<_>>(),
            "children": self.children,
        })
    }
}

/// Folds the entries at or before `n`.
pub fn render_state(w: &Logbook, n: u64) -> RenderState {
    let mut st = RenderState { id: w.id, color: None, handlers: BTreeSet::new(), children: Vec::new() };
    for &(_, c) in w.entries.iter().take_while(|(t, _)| *t <= n) {
        match c {
            Command::SetColor(col) => st.color = Some(col),
            Command::OnClick => {
                st.handlers.insert(Handler::Click);
            }
            Command::OnKeypress => {
                st.handlers.insert(Handler::Keypress);
            }
            Command::Attach(j) => st.children.push(j),
        }
    }
    st
}
