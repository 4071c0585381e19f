//! Semantic values of the denotational evaluator.
//!
//! Times inside values are relative to the frame the value lives in: `At(k, v)` and
//! `Event(k, v)` hold `v` relative to `k`, and a widget's logbook is relative to its frame.

use std::rc::Rc;

use serde_json::{json, Value};

use super::logbook::{Logbook, PrefixBook, TimePoint};
use crate::syntax::ast::{Color, Symbol, Term};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartValue {
    Star,
    Color(Color),
    Char(char),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    NewWidget,
    DropWidget,
    SetColor,
    OnClick,
    OnKeypress,
    Out,
    Into,
    Split,
    Join,
    VAttach,
}

impl Builtin {
    pub fn from_name(name: &str) -> Option<Builtin> {
        Some(match name {
            "newWidget" => Builtin::NewWidget,
            "dropWidget" => Builtin::DropWidget,
            "setColor" => Builtin::SetColor,
            "onClick" => Builtin::OnClick,
            "onKeypress" => Builtin::OnKeypress,
            "out" => Builtin::Out,
            "into" => Builtin::Into,
            "split" => Builtin::Split,
            "join" => Builtin::Join,
            "vAttach" => Builtin::VAttach,
            _ => return None,
        })
    }

    /// Number of term arguments consumed before the builtin fires.
    pub fn arity(self) -> usize {
        match self {
            Builtin::VAttach => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum SemValue<'a> {
    Unit,
    Pair(Box<SemValue<'a>>, Box<SemValue<'a>>),
    Inl(Box<SemValue<'a>>),
    Inr(Box<SemValue<'a>>),
    Closure(Rc<Closure<'a>>),
    Event(TimePoint, Box<SemValue<'a>>),
    At(TimePoint, Box<SemValue<'a>>),
    Widget(Logbook),
    Prefix(PrefixBook),
    Cart(CartValue),
    Id(u64),
    Time(TimePoint),
    /// Existential package of an index value and a body.
    Pack(Box<SemValue<'a>>, Box<SemValue<'a>>),
    /// A partially applied builtin with its index and term arguments so far.
    Builtin(Builtin, Vec<SemValue<'a>>, Vec<SemValue<'a>>),
    /// Contents of a frame at infinity, which is never evaluated.
    Dormant,
}

#[derive(Debug)]
pub enum Closure<'a> {
    Lam(Env<'a>, &'a Symbol, &'a Term),
    IndexLam(Env<'a>, &'a Symbol, &'a Term),
    /// A `G` value: a suspended linear term.
    Thunk(Env<'a>, &'a Term),
}

/// Persistent environment keyed by binder uid; terms and indices share one namespace.
#[derive(Debug, Clone, Default)]
pub struct Env<'a>(Option<Rc<EnvNode<'a>>>);

#[derive(Debug)]
struct EnvNode<'a> {
    uid: u32,
    value: SemValue<'a>,
    next: Env<'a>,
}

impl<'a> Env<'a> {
    pub fn new() -> Self {
        Env(None)
    }

    pub fn bind(&self, s: &Symbol, value: SemValue<'a>) -> Env<'a> {
        Env(Some(Rc::new(EnvNode { uid: s.uid, value, next: self.clone() })))
    }

    pub fn lookup(&self, s: &Symbol) -> Option<&SemValue<'a>> {
        let mut cur = &self.0;
        while let Some(node) = cur {
            if node.uid == s.uid {
                return Some(&node.value);
            }
            cur = &node.next.0;
        }
        None
    }
}

impl<'a> SemValue<'a> {
    pub fn pair(a: SemValue<'a>, b: SemValue<'a>) -> SemValue<'a> {
        SemValue::Pair(Box::new(a), Box::new(b))
    }

    pub fn to_json(&self) -> Value {
        match self {
            SemValue::Unit => json!("⟨⟩"),
            SemValue::Pair(a, b) => json!([a.to_json(), b.to_json()]),
            SemValue::Inl(a) => json!({ "inl": a.to_json() }),
            SemValue::Inr(a) => json!({ "inr": a.to_json() }),
            SemValue::Closure(_) | SemValue::Builtin(..) => json!("<fun>"),
            SemValue::Event(k, v) => json!({ "evt": k.to_json(), "value": v.to_json() }),
            SemValue::At(k, v) => json!({ "at": k.to_json(), "value": v.to_json() }),
            SemValue::Widget(w) => json!({ "widget": w.id }),
            SemValue::Prefix(p) => json!({ "prefix": p.id, "cutoff": p.cutoff.to_json() }),
            SemValue::Cart(CartValue::Star) => json!("⋆"),
            SemValue::Cart(CartValue::Color(c)) => json!(c.name()),
            SemValue::Cart(CartValue::Char(c)) => json!(c.to_string()),
            SemValue::Id(n) => json!({ "id": n }),
            SemValue::Time(t) => json!({ "time": t.to_json() }),
            SemValue::Pack(i, v) => json!({ "pack": i.to_json(), "value": v.to_json() }),
            SemValue::Dormant => json!("dormant"),
        }
    }

    /// Logbooks reachable in this value, moved to absolute time by `offset`.
    pub fn collect_logbooks(&self, offset: u64, out: &mut Vec<Logbook>) {
        match self {
            SemValue::Widget(w) => out.push(w.delayed(offset)),
            SemValue::Prefix(p) => out.push(Logbook { id: p.id, entries: p.entries.clone() }.delayed(offset)),
            SemValue::Pair(a, b) | SemValue::Pack(a, b) => {
                a.collect_logbooks(offset, out);
                b.collect_logbooks(offset, out);
            }
            SemValue::Inl(a) | SemValue::Inr(a) => a.collect_logbooks(offset, out),
            SemValue::At(TimePoint::Finite(k), v) | SemValue::Event(TimePoint::Finite(k), v) => {
                v.collect_logbooks(offset + k, out)
            }
            _ => {}
        }
    }
}
