//! Typing contexts Θ (indices), Γ (Cartesian) and Δ (linear, with usage marks).

use crate::syntax::ast::{CartType, IndexSort, IndexTerm, LinType, Span, Symbol};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexContext {
    pub entries: Vec<(Symbol, IndexSort)>,
}

impl IndexContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: Symbol, sort: IndexSort) -> Self {
        self.entries.push((s, sort));
        self
    }

    pub fn sort_of(&self, s: &Symbol) -> Option<IndexSort> {
        self.entries.iter().rev().find(|(x, _)| x == s).map(|(_, o)| *o)
    }

    pub fn uids(&self) -> Vec<u32> {
        self.entries.iter().map(|(s, _)| s.uid).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CartContext {
    pub entries: Vec<(Symbol, CartType)>,
}

impl CartContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: Symbol, t: CartType) -> Self {
        self.entries.push((s, t));
        self
    }

    pub fn lookup(&self, s: &Symbol) -> Option<&CartType> {
        self.entries.iter().rev().find(|(x, _)| x == s).map(|(_, t)| t)
    }
}

/// Why an entry is currently not consumable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hidden {
    /// Annotated at a time other than the current frame's.
    Time,
    /// Outer variable inside a select branch.
    Select,
    /// Outer variable inside a `G` body.
    UnderG,
    /// Outer variable inside the continuation of an event binding.
    EventCont,
}

/// `a :_τ A` with a usage mark.
#[derive(Debug, Clone, PartialEq)]
pub struct LinEntry {
    pub name: Symbol,
    pub ty: LinType,
    /// Annotation as written; literal 0 for the plain judgment.
    pub time: IndexTerm,
    pub used: bool,
    /// Annotation relative to the innermost delay frame.
    pub(crate) eff: IndexTerm,
    pub(crate) hidden: Option<Hidden>,
    /// Derivation node that introduced the entry.
    pub(crate) origin: usize,
    pub(crate) span: Span,
}

impl LinEntry {
    pub fn new(name: Symbol, ty: LinType, time: IndexTerm) -> Self {
        LinEntry { name, ty, eff: time.clone(), time, used: false, hidden: None, origin: usize::MAX, span: Span::default() }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearContext {
    pub entries: Vec<LinEntry>,
}

impl LinearContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: Symbol, ty: LinType, time: IndexTerm) -> Self {
        self.entries.push(LinEntry::new(name, ty, time));
        self
    }

    pub fn all_used(&self) -> bool {
        self.entries.iter().all(|e| e.used)
    }

    pub fn is_used(&self, name: &Symbol) -> Option<bool> {
        self.entries.iter().rev().find(|e| &e.name == name).map(|e| e.used)
    }
}
