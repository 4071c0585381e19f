use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::process::{Child, Command, Stdio};

use serde_json::{json, Value};

const TURN_RED: &str = include_str!("../../../corpus/turn_red.lw");

struct Server {
    child: Child,
    port: u16,
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn start() -> Server {
    let mut child = Command::new(env!("CARGO_BIN_EXE_lw"))
        .args(["serve", "--port", "0", "--tie", "left"])
        .stderr(Stdio::piped())
        .spawn()
        .expect("spawn lw serve");
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let port = line.trim().rsplit(':').next().and_then(|p| p.parse().ok()).unwrap_or_else(|| panic!("{line}"));
    Server { child, port }
}

struct Client {
    reader: BufReader<TcpStream>,
    writer: TcpStream,
}

impl Client {
    fn connect(s: &Server) -> Client {
        let writer = TcpStream::connect(("127.0.0.1", s.port)).unwrap();
        Client { reader: BufReader::new(writer.try_clone().unwrap()), writer }
    }

    /// `None` once the server has closed the connection.
    fn send(&mut self, msg: &str) -> Option<Value> {
        writeln!(self.writer, "{msg}").ok()?;
        let mut line = String::new();
        match self.reader.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(serde_json::from_str(&line).unwrap()),
        }
    }

    fn req(&mut self, v: Value) -> Value {
        self.send(&v.to_string()).expect("reply")
    }
}

#[test]
fn a_session_loads_runs_and_renders() {
    let server = start();
    let mut c = Client::connect(&server);
    assert_eq!(c.req(json!({"op": "load", "source": TURN_RED})), json!({"ok": {"entry": "main", "horizon": 16}}));
    assert_eq!(c.req(json!({"op": "event", "t": 3, "widget": 0, "kind": "click"})), json!({"ok": {"t": 3}}));
    for t in [3, 7] {
        let snap = c.req(json!({"op": "snapshot", "t": t}));
        assert_eq!(snap["snapshot"]["widgets"][0]["color"], "Red");
    }
    assert_eq!(c.req(json!({"op": "event", "t": 8, "widget": 5, "kind": "click"})), json!({"error": "TraceTargetInvalid"}));
}

#[test]
fn sessions_are_independent() {
    let server = start();
    let mut a = Client::connect(&server);
    let mut b = Client::connect(&server);
    let stack = include_str!("../../../corpus/button_stack.lw");
    a.req(json!({"op": "load", "source": stack}));
    a.req(json!({"op": "event", "t": 1, "widget": 0, "kind": "click"}));
    b.req(json!({"op": "load", "source": TURN_RED}));
    let only = b.req(json!({"op": "snapshot", "t": 1}));
    assert_eq!(only["snapshot"]["widgets"].as_array().unwrap().len(), 1);
    assert_eq!(only["snapshot"]["widgets"][0]["id"], 0);
    let grown = a.req(json!({"op": "snapshot", "t": 1}));
    assert!(grown["snapshot"]["widgets"].as_array().unwrap().len() > 1);
}

#[test]
fn protocol_violations_close_the_session() {
    let server = start();
    let mut c = Client::connect(&server);
    assert_eq!(c.send("{\"op\":\"launch\"}"), Some(json!({"error": "ProtocolError"})));
    assert_eq!(c.send("{\"op\":\"snapshot\",\"t\":0}"), None);
}

#[test]
fn busy_port_is_an_environment_failure() {
    let taken = TcpListener::bind(("127.0.0.1", 0)).unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = Command::new(env!("CARGO_BIN_EXE_lw")).args(["serve", "--port", &port]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}
