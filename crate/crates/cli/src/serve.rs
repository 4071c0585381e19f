//! Newline-delimited JSON sessions over TCP, one thread and one runtime per connection.

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};

use lwidget_core::check_source;
use lwidget_core::runtime::{RuntimeError, Session, Stimulus, TiePolicy};
use lwidget_core::semantics::RenderState;
use serde_json::{json, Value};

use crate::commands::{ENVIRONMENT, OK};

/// Reply to one request, and whether the connection must close afterwards.
pub struct Reply {
    pub message: Value,
    pub close: bool,
}

fn ok(v: Value) -> Reply {
    Reply { message: json!({ "ok": v }), close: false }
}

fn error(kind: &str) -> Reply {
    Reply { message: json!({ "error": kind }), close: false }
}

fn protocol_error() -> Reply {
    Reply { message: json!({ "error": "ProtocolError" }), close: true }
}

/// Per-connection state: at most one loaded program with its live runtime.
pub struct Connection {
    session: Option<Session>,
    horizon: u64,
    tie: TiePolicy,
}

impl Connection {
    pub fn new(horizon: u64, tie: TiePolicy) -> Self {
        Connection { session: None, horizon, tie }
    }

    pub fn handle(&mut self, line: &str) -> Reply {
        let Ok(Value::Object(mut msg)) = serde_json::from_str::<Value>(line) else { return protocol_error() };
        let Some(Value::String(op)) = msg.remove("op") else { return protocol_error() };
        match op.as_str() {
            "load" => self.load(&msg),
            "event" => {
                let Ok(s) = Stimulus::from_json(&Value::Object(msg)) else { return protocol_error() };
                self.event(s)
            }
            "snapshot" => {
                let (Some(t), 1) = (msg.get("t").and_then(Value::as_u64), msg.len()) else { return protocol_error() };
                self.snapshot(t)
            }
            _ => protocol_error(),
        }
    }

    fn load(&mut self, msg: &serde_json::Map<String, Value>) -> Reply {
        if msg.keys().any(|k| !matches!(k.as_str(), "source" | "horizon" | "entry")) {
            return protocol_error();
        }
        let Some(source) = msg.get("source").and_then(Value::as_str) else { return protocol_error() };
        let horizon = match msg.get("horizon") {
            None => self.horizon,
            Some(h) => match h.as_u64() {
                Some(h) => h,
                None => return protocol_error(),
            },
        };
        self.session = None;
        let mut c = match check_source(source) {
            Ok(c) => c,
            Err(e) => return error(e.kind()),
        };
        if let Some(entry) = msg.get("entry") {
            let Some(entry) = entry.as_str() else { return protocol_error() };
            c.program.entry = entry.to_string();
        }
        let entry = c.program.entry.clone();
        match Session::new(c, horizon, self.tie) {
            Ok(s) => {
                self.session = Some(s);
                ok(json!({ "entry": entry, "horizon": horizon }))
            }
            Err(e) => error(e.kind()),
        }
    }

    fn event(&mut self, s: Stimulus) -> Reply {
        let Some(session) = self.session.as_mut() else { return error("NoProgramLoaded") };
        let t = s.time;
        match session.inject(s) {
            Ok(()) => ok(json!({ "t": t })),
            Err(e) => self.runtime_error(e),
        }
    }

    fn snapshot(&mut self, t: u64) -> Reply {
        let Some(session) = self.session.as_mut() else { return error("NoProgramLoaded") };
        match session.snapshot(t) {
            Ok(ws) => Reply { message: json!({ "snapshot": { "widgets": ws.iter().map(RenderState::to_json).collect::<Vec<_>>() } }), close: false },
            Err(e) => self.runtime_error(e),
        }
    }

    /// Validation failures leave the session usable; anything else discards it.
    fn runtime_error(&mut self, e: RuntimeError) -> Reply {
        if !matches!(e, RuntimeError::TraceTargetInvalid { .. } | RuntimeError::HorizonExceeded(..) | RuntimeError::TimeWentBackwards(..)) {
            self.session = None;
        }
        error(e.kind())
    }
}

fn serve_connection(stream: TcpStream, horizon: u64, tie: TiePolicy) -> std::io::Result<()> {
    let mut writer = stream.try_clone()?;
    let mut conn = Connection::new(horizon, tie);
    for line in BufReader::new(stream).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = conn.handle(&line);
        writeln!(writer, "{}", reply.message)?;
        writer.flush()?;
        if reply.close {
            break;
        }
    }
    Ok(())
}

pub fn serve(host: &str, port: u16, horizon: u64, tie: TiePolicy, err: &mut dyn Write) -> i32 {
    let listener = match TcpListener::bind((host, port)) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "lw: cannot listen on {host}:{port}: {e}");
            return ENVIRONMENT;
        }
    };
    if let Ok(addr) = listener.local_addr() {
        let _ = writeln!(err, "listening on {addr}");
    }
    for stream in listener.incoming() {
        match stream {
            Ok(s) => {
                std::thread::spawn(move || {
                    let _ = serve_connection(s, horizon, tie);
                });
            }
            Err(e) => {
                let _ = writeln!(err, "lw: accept failed: {e}");
            }
        }
    }
    OK
}

#[cfg(test)]
mod tests {
    use super::*;

    const TURN_RED: &str = include_str!("../../../corpus/turn_red.lw");

    fn send(c: &mut Connection, msg: Value) -> Value {
        c.handle(&msg.to_string()).message
    }

    #[test]
    fn click_turns_the_widget_red_from_then_on() {
        let mut c = Connection::new(16, TiePolicy::Left);
        assert_eq!(send(&mut c, json!({"op": "load", "source": TURN_RED})), json!({"ok": {"entry": "main", "horizon": 16}}));
        let before = send(&mut c, json!({"op": "snapshot", "t": 2}));
        assert_eq!(before["snapshot"]["widgets"][0]["color"], Value::Null);
        assert_eq!(send(&mut c, json!({"op": "event", "t": 3, "widget": 0, "kind": "click"})), json!({"ok": {"t": 3}}));
        let after = send(&mut c, json!({"op": "snapshot", "t": 3}));
        assert_eq!(after, json!({"snapshot": {"widgets": [{"id": 0, "color": "Red", "handlers": ["click"], "children": []}]}}));
    }

    #[test]
    fn unknown_widget_is_a_recoverable_error() {
        let mut c = Connection::new(16, TiePolicy::Left);
        send(&mut c, json!({"op": "load", "source": TURN_RED}));
        let r = c.handle(&json!({"op": "event", "t": 1, "widget": 9, "kind": "click"}).to_string());
        assert_eq!(r.message, json!({"error": "TraceTargetInvalid"}));
        assert!(!r.close);
        assert_eq!(send(&mut c, json!({"op": "event", "t": 2, "widget": 0, "kind": "click"})), json!({"ok": {"t": 2}}));
    }

    #[test]
    fn malformed_messages_close_the_connection() {
        let mut c = Connection::new(16, TiePolicy::Left);
        for bad in ["not json", "{\"op\":\"dance\"}", "{\"op\":\"snapshot\"}", "[1,2]", "{\"op\":\"event\",\"t\":1}"] {
            let r = c.handle(bad);
            assert_eq!(r.message, json!({"error": "ProtocolError"}), "{bad}");
            assert!(r.close, "{bad}");
        }
    }

    #[test]
    fn requests_before_load_are_rejected() {
        let mut c = Connection::new(16, TiePolicy::Left);
        assert_eq!(send(&mut c, json!({"op": "snapshot", "t": 0})), json!({"error": "NoProgramLoaded"}));
    }

    #[test]
    fn ill_typed_sources_report_their_error_kind() {
        let mut c = Connection::new(16, TiePolicy::Left);
        let zip = include_str!("../../../corpus/zip_attempt.lw");
        assert_eq!(send(&mut c, json!({"op": "load", "source": zip})), json!({"error": "LinearVariableUnavailableInSelect"}));
        assert_eq!(send(&mut c, json!({"op": "load", "source": "def"})), json!({"error": "SyntaxError"}));
    }

    #[test]
    fn clock_cannot_run_backwards() {
        let mut c = Connection::new(16, TiePolicy::Left);
        send(&mut c, json!({"op": "load", "source": TURN_RED}));
        send(&mut c, json!({"op": "snapshot", "t": 5}));
        assert_eq!(send(&mut c, json!({"op": "event", "t": 4, "widget": 0, "kind": "click"})), json!({"error": "TimeWentBackwards"}));
    }
}
