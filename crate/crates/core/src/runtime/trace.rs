//! Scripted stimulus traces, one JSON object per line.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::semantics::Handler;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StimulusKind {
    Click,
    Keypress(char),
}

impl StimulusKind {
    pub fn handler(self) -> Handler {
        match self {
            StimulusKind::Click => Handler::Click,
            StimulusKind::Keypress(_) => Handler::Keypress,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stimulus {
    pub time: u64,
    pub widget: u64,
    pub kind: StimulusKind,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    t: u64,
    widget: u64,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    char: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: time {time} precedes the previous stimulus")]
    NotMonotone { line: usize, time: u64 },
}

impl Stimulus {
    pub fn click(time: u64, widget: u64) -> Self {
        Stimulus { time, widget, kind: StimulusKind::Click }
    }

    pub fn keypress(time: u64, widget: u64, c: char) -> Self {
        Stimulus { time, widget, kind: StimulusKind::Keypress(c) }
    }

    /// Parse one wire or trace record.
    pub fn from_json(v: &Value) -> Result<Self, String> {
        let r: Record = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
        let kind = match (r.kind.as_str(), r.char) {
            ("click", None) => StimulusKind::Click,
            ("keypress", Some(s)) => {
                let mut cs = s.chars();
                match (cs.next(), cs.next()) {
                    (Some(c), None) => StimulusKind::Keypress(c),
                    _ => return Err(format!("keypress char must be one character, got {s:?}")),
                }
            }
            ("keypress", None) => return Err("keypress without a char".into()),
            ("click", Some(_)) => return Err("click carries no char".into()),
            (k, _) => return Err(format!("unknown stimulus kind {k:?}")),
        };
        Ok(Stimulus { time: r.t, widget: r.widget, kind })
    }

    pub fn to_json(&self) -> Value {
        match self.kind {
            StimulusKind::Click => json!({ "t": self.time, "widget": self.widget, "kind": "click" }),
            StimulusKind::Keypress(c) => {
                json!({ "t": self.time, "widget": self.widget, "kind": "keypress", "char": c.to_string() })
            }
        }
    }
}

/// Time-ordered stimuli.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EventTrace {
    pub stimuli: Vec<Stimulus>,
}

impl EventTrace {
    pub fn new(stimuli: Vec<Stimulus>) -> Self {
        EventTrace { stimuli }
    }

    /// Blank lines are skipped; times must be nondecreasing.
    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut stimuli: Vec<Stimulus> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let v: Value = serde_json::from_str(raw).map_err(|e| TraceError::Malformed { line, message: e.to_string() })?;
            let s = Stimulus::from_json(&v).map_err(|message| TraceError::Malformed { line, message })?;
            if stimuli.last().is_some_and(|p| p.time > s.time) {
                return Err(TraceError::NotMonotone { line, time: s.time });
            }
            stimuli.push(s);
        }
        Ok(EventTrace { stimuli })
    }

    pub fn to_jsonl(&self) -> String {
        self.stimuli.iter().map(|s| format!("{}\n", s.to_json())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_kinds() {
        let t = EventTrace::parse(
            "{\"t\": 2, \"widget\": 0, \"kind\": \"click\"}\n\n{\"t\": 4, \"widget\": 1, \"kind\": \"keypress\", \"char\": \"q\"}\n",
        )
        .unwrap();
        assert_eq!(t.stimuli, vec![Stimulus::click(2, 0), Stimulus::keypress(4, 1, 'q')]);
        assert_eq!(EventTrace::parse(&t.to_jsonl()).unwrap(), t);
    }

    #[test]
    fn rejects_bad_records() {
        for bad in [
            "{\"t\": 1, \"widget\": 0, \"kind\": \"tap\"}",
            "{\"t\": 1, \"widget\": 0, \"kind\": \"keypress\"}",
            "{\"t\": 1, \"widget\": 0, \"kind\": \"keypress\", \"char\": \"ab\"}",
            "{\"t\": 1, \"kind\": \"click\"}",
            "not json",
        ] {
            assert!(matches!(EventTrace::parse(bad), Err(TraceError::Malformed { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn rejects_time_going_backwards() {
        let r = EventTrace::parse("{\"t\": 3, \"widget\": 0, \"kind\": \"click\"}\n{\"t\": 2, \"widget\": 0, \"kind\": \"click\"}");
        assert_eq!(r, Err(TraceError::NotMonotone { line: 2, time: 2 }));
    }
}
