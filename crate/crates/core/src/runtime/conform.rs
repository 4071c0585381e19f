//! Cross-check of the runtime against the enumerating semantics.
//!
//! Every trace the runtime can realize within the horizon is replayed under both fixed
//! tie policies, and each final state must appear among the enumerated outcomes up to a
//! renaming of widget ids.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{json, Value};

use super::machine::{run, RuntimeError, TiePolicy};
use super::trace::{EventTrace, Stimulus, StimulusKind};
use crate::semantics::{eval_denot_with_limit, Command, Handler, Logbook, OutcomeSet, SemError, DEFAULT_BRANCH_LIMIT};
use crate::syntax::ast::SourceProgram;

/// Payload used for generated keypresses; the enumerator assumes the same character.
pub const GENERATED_KEY: char = 'a';

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub trace: EventTrace,
    pub policy: TiePolicy,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConformanceReport {
    pub horizon: u64,
    pub outcomes: usize,
    pub traces: usize,
    pub runs: usize,
    pub violations: Vec<Violation>,
}

impl ConformanceReport {
    pub fn is_conformant(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "horizon": self.horizon,
            "outcomes": self.outcomes,
            "traces": self.traces,
            "runs": self.runs,
            "violations": self.violations.iter().map(|v| json!({
                "trace": v.trace.stimuli.iter().map(Stimulus::to_json).collect::<Vec<_>>(),
                "policy": v.policy.name(),
                "reason": v.reason,
            })).collect::<Vec<_>>(),
        })
    }
}

type BookSig = Vec<(u64, Command)>;

/// Entries with attachment targets erased, so that it is invariant under id renaming.
fn signature(b: &Logbook) -> BookSig {
    let mut s: BookSig = b
        .entries
        .iter()
        .map(|&(t, c)| match c {
            Command::Attach(_) => (t, Command::Attach(u64::MAX)),
            c => (t, c),
        })
        .collect();
    s.sort();
    s
}

fn outcome_key(books: &[Logbook]) -> Vec<BookSig> {
    let mut k: Vec<BookSig> = books.iter().map(signature).collect();
    k.sort();
    k
}

/// True if some bijection of ids maps `a` onto `b` entry for entry.
pub fn isomorphic(a: &[Logbook], b: &[Logbook]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let sa: Vec<BookSig> = a.iter().map(signature).collect();
    let sb: Vec<BookSig> = b.iter().map(signature).collect();
    let mut map: BTreeMap<u64, u64> = BTreeMap::new();
    let mut used = vec![false; b.len()];

    // Attachment entries of the assigned books whose targets are already assigned must agree.
    fn consistent(a: &[Logbook], b: &[Logbook], map: &BTreeMap<u64, u64>) -> bool {
        let by_id: HashMap<u64, &Logbook> = b.iter().map(|l| (l.id, l)).collect();
        a.iter().filter(|l| map.contains_key(&l.id)).all(|l| {
            let target = by_id[&map[&l.id]];
            l.entries.iter().all(|&(t, c)| match c {
                Command::Attach(j) => map.get(&j).is_none_or(|&k| target.entries.contains(&(t, Command::Attach(k)))),
                _ => true,
            })
        })
    }

    fn go(i: usize, a: &[Logbook], b: &[Logbook], sa: &[BookSig], sb: &[BookSig], map: &mut BTreeMap<u64, u64>, used: &mut [bool]) -> bool {
        if i == a.len() {
            return true;
        }
        for j in 0..b.len() {
            if used[j] || sa[i] != sb[j] {
                continue;
            }
            used[j] = true;
            map.insert(a[i].id, b[j].id);
            if consistent(a, b, map) && go(i + 1, a, b, sa, sb, map, used) {
                return true;
            }
            map.remove(&a[i].id);
            used[j] = false;
        }
        false
    }

    go(0, a, b, &sa, &sb, &mut map, &mut used)
}

struct Oracle {
    by_key: HashMap<Vec<BookSig>, Vec<Vec<Logbook>>>,
    error_times: BTreeSet<u64>,
}

impl Oracle {
    fn new(set: &OutcomeSet) -> Self {
        let mut by_key: HashMap<Vec<BookSig>, Vec<Vec<Logbook>>> = HashMap::new();
        let mut error_times = BTreeSet::new();
        for o in &set.outcomes {
            match &o.result {
                Ok(books) => by_key.entry(outcome_key(books)).or_default().push(books.clone()),
                Err(e) => {
                    error_times.insert(e.time);
                }
            }
        }
        Oracle { by_key, error_times }
    }

    fn admits(&self, books: &[Logbook]) -> bool {
        self.by_key.get(&outcome_key(books)).is_some_and(|cands| cands.iter().any(|c| isomorphic(books, c)))
    }
}

pub fn conformance(p: &SourceProgram, horizon: u64) -> Result<ConformanceReport, SemError> {
    conformance_with_limit(p, horizon, DEFAULT_BRANCH_LIMIT)
}

pub fn conformance_with_limit(p: &SourceProgram, horizon: u64, limit: usize) -> Result<ConformanceReport, SemError> {
    let set = eval_denot_with_limit(p, horizon, limit)?;
    let oracle = Oracle::new(&set);
    let mut report = ConformanceReport { horizon, outcomes: set.len(), traces: 0, runs: 0, violations: Vec::new() };
    let key = |s: &Stimulus| (s.time, s.widget, s.kind.handler());
    let mut stack: Vec<Vec<Stimulus>> = vec![Vec::new()];
    while let Some(stimuli) = stack.pop() {
        report.traces += 1;
        let trace = EventTrace::new(stimuli);
        let last = trace.stimuli.last().map(key);
        let mut next: BTreeSet<(u64, u64, Handler)> = BTreeSet::new();
        for policy in [TiePolicy::Left, TiePolicy::Right] {
            let violation = |reason: String| Violation { trace: trace.clone(), policy, reason };
            match run(p, &trace, horizon, policy) {
                Ok(r) => {
                    report.runs += 1;
                    if !oracle.admits(&r.logbooks) {
                        let books: Vec<Value> = r.logbooks.iter().map(Logbook::to_json).collect();
                        report.violations.push(violation(format!("final logbooks {} are not an enumerated outcome", json!(books))));
                    }
                    for h in &r.pending {
                        for t in h.registered_at + 1..=horizon {
                            let k = (t, h.widget, h.handler);
                            if last.is_none_or(|l| k > l) {
                                next.insert(k);
                            }
                        }
                    }
                }
                Err(RuntimeError::Compat(e)) => {
                    report.runs += 1;
                    if !oracle.error_times.contains(&e.time) {
                        report.violations.push(violation(format!("clash at {} has no enumerated counterpart", e.time)));
                    }
                }
                Err(RuntimeError::TraceTargetInvalid { .. }) => {}
                Err(e) => report.violations.push(violation(e.to_string())),
            }
        }
        for (time, widget, h) in next {
            let kind = match h {
                Handler::Click => StimulusKind::Click,
                Handler::Keypress => StimulusKind::Keypress(GENERATED_KEY),
            };
            let mut s = trace.stimuli.clone();
            s.push(Stimulus { time, widget, kind });
            stack.push(s);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check_source;
    use crate::syntax::ast::Color;

    fn book(id: u64, entries: &[(u64, Command)]) -> Logbook {
        Logbook::from_entries(id, entries.iter().copied()).unwrap()
    }

    #[test]
    fn renaming_ids_preserves_isomorphism() {
        let a = [book(0, &[(0, Command::OnClick), (1, Command::Attach(1))]), book(1, &[(1, Command::OnClick)])];
        let b = [book(5, &[(1, Command::OnClick)]), book(9, &[(0, Command::OnClick), (1, Command::Attach(5))])];
        assert!(isomorphic(&a, &b));
        let wrong = [book(5, &[(1, Command::OnClick)]), book(9, &[(0, Command::OnClick), (1, Command::Attach(9))])];
        assert!(!isomorphic(&a, &wrong));
        assert!(!isomorphic(&a, &b[..1]));
    }

    #[test]
    fn symmetric_books_need_the_attachment_structure() {
        // Two identical children; only attachment decides the mapping.
        let a = [
            book(0, &[(0, Command::Attach(1)), (1, Command::Attach(2))]),
            book(1, &[(0, Command::OnClick)]),
            book(2, &[(0, Command::OnClick)]),
        ];
        let b = [
            book(3, &[(0, Command::OnClick)]),
            book(4, &[(0, Command::OnClick)]),
            book(7, &[(0, Command::Attach(4)), (1, Command::Attach(3))]),
        ];
        assert!(isomorphic(&a, &b));
    }

    #[test]
    fn turn_red_conforms_on_every_single_click_trace() {
        let c = check_source(
            "def main : ∃(i:Id). Widget i =
  let pack(i, w) = newWidget ⟨⟩ in
  let (w, c) = onClick w in
  let (x, ⟨⟩ @ x) = out c in
  let (p, w @ x) = split w in
  pack(i, join (p, (setColor (w, F Red)) @ x))
",
        )
        .unwrap();
        let r = conformance(&c.program, 4).unwrap();
        assert_eq!((r.outcomes, r.traces, r.runs), (5, 5, 10));
        assert!(r.is_conformant());
    }

    #[test]
    fn oracle_rejects_states_outside_the_outcome_set() {
        let c = check_source("def main : ∃(i:Id). Widget i = let pack(i, w) = newWidget ⟨⟩ in pack(i, setColor (w, F Red))\n").unwrap();
        let set = eval_denot_with_limit(&c.program, 2, 100).unwrap();
        let oracle = Oracle::new(&set);
        assert!(oracle.admits(&[book(3, &[(0, Command::SetColor(Color::Red))])]));
        assert!(!oracle.admits(&[book(0, &[(0, Command::SetColor(Color::Blue))])]));
        assert!(!oracle.admits(&[]));
    }
}
