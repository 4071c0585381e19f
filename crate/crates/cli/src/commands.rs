//! Batch subcommands. Each returns its exit code and writes canonical JSON or text to `out`.

use std::io::Write;
use std::path::{Path, PathBuf};

use lwidget_core::runtime::{conformance_with_limit, run as run_program, EventTrace, TiePolicy};
use lwidget_core::semantics::{eval_denot_with_limit, SemError};
use lwidget_core::syntax::pretty_type;
use lwidget_core::{check_source, CartType, CheckedProgram, FrontendError, LinType, Type};
use serde_json::{json, Value};

use crate::Format;

pub const OK: i32 = 0;
pub const DOMAIN: i32 = 1;
pub const ENVIRONMENT: i32 = 2;

fn emit(out: &mut dyn Write, v: &Value) {
    let _ = writeln!(out, "{v}");
}

fn read(path: &Path, err: &mut dyn Write) -> Result<String, i32> {
    std::fs::read_to_string(path).map_err(|e| {
        let _ = writeln!(err, "lw: cannot read {}: {e}", path.display());
        ENVIRONMENT
    })
}

fn report_frontend(file: &str, e: &FrontendError, err: &mut dyn Write) {
    for d in e.diagnostics(file) {
        let _ = writeln!(err, "{}:{}:{}: {}: {}", file, d["line"], d["col"], d["kind"].as_str().unwrap_or(""), d["message"].as_str().unwrap_or(""));
    }
}

/// Reads and checks a program, optionally overriding its entry point.
fn load(path: &Path, entry: Option<&str>, err: &mut dyn Write) -> Result<CheckedProgram, i32> {
    let src = read(path, err)?;
    let file = path.display().to_string();
    let mut c = check_source(&src).map_err(|e| {
        report_frontend(&file, &e, err);
        DOMAIN
    })?;
    if let Some(name) = entry {
        c.program.entry = name.to_string();
    }
    if c.program.definition(&c.program.entry).is_none() {
        let _ = writeln!(err, "lw: {file} has no definition `{}` to run", c.program.entry);
        return Err(DOMAIN);
    }
    Ok(c)
}

pub fn check(path: &Path, format: Format, derivation: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let src = match read(path, err) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let file = path.display().to_string();
    let c = match check_source(&src) {
        Ok(c) => c,
        Err(e) => {
            match format {
                Format::Json => emit(out, &json!({ "file": file, "ok": false, "errors": e.diagnostics(&file) })),
                Format::Text => report_frontend(&file, &e, err),
            }
            return DOMAIN;
        }
    };
    let d = match derivation.map(|name| c.derivations.get(name).ok_or(name)).transpose() {
        Ok(d) => d,
        Err(name) => {
            let _ = writeln!(err, "lw: no definition `{name}` in {file}");
            return DOMAIN;
        }
    };
    match format {
        Format::Json => {
            let types: Vec<Value> = c.types.iter().map(|(n, t)| json!({ "name": n, "type": pretty_type(t) })).collect();
            let mut v = json!({ "file": file, "ok": true, "types": types });
            if let Some(d) = d {
                v["derivation"] = serde_json::to_value(d).expect("derivations serialize");
            }
            emit(out, &v);
        }
        Format::Text => {
            for (n, t) in &c.types {
                let _ = writeln!(out, "{n} : {}", pretty_type(t));
            }
            if let Some(d) = d {
                let _ = write!(out, "\n{}", d.render());
            }
        }
    }
    OK
}

pub fn run(path: &Path, trace: &Path, horizon: u64, tie: TiePolicy, entry: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let c = match load(path, entry, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    let text = match read(trace, err) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let trace = match EventTrace::parse(&text) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "lw: {}: {e}", trace.display());
            return DOMAIN;
        }
    };
    match run_program(&c.program, &trace, horizon, tie) {
        Ok(r) => {
            emit(out, &r.to_json());
            OK
        }
        Err(e) => {
            let _ = writeln!(err, "lw: {}: {e}", e.kind());
            DOMAIN
        }
    }
}

pub fn enumerate(path: &Path, horizon: u64, entry: Option<&str>, limit: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let c = match load(path, entry, err) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match eval_denot_with_limit(&c.program, horizon, limit) {
        Ok(set) => {
            emit(out, &set.to_json());
            OK
        }
        Err(e) => {
            let _ = writeln!(err, "lw: {}: {e}", e.kind());
            DOMAIN
        }
    }
}

/// `.lw` files directly inside `dir`, sorted by name.
fn programs_in(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir)? {
        let p = e?.path();
        if p.extension().is_some_and(|x| x == "lw") && p.is_file() {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Entries awaiting an argument have no behavior of their own to conform.
fn is_function(t: &Type) -> bool {
    matches!(t, Type::Lin(LinType::Lolli(..) | LinType::Forall(..)) | Type::Cart(CartType::Arrow(..)))
}

/// Conformance at the largest horizon up to `horizon` whose enumeration fits in `limit`.
fn conform_one(c: &CheckedProgram, horizon: u64, limit: usize) -> Value {
    let mut h = horizon;
    loop {
        match conformance_with_limit(&c.program, h, limit) {
            Ok(r) => {
                let mut v = r.to_json();
                v["status"] = json!(if r.is_conformant() { "conformant" } else { "violations" });
                v["effective_horizon"] = json!(h);
                return v;
            }
            Err(SemError::TooManyBranches(_)) if h > 1 => h -= 1,
            Err(e) => return json!({ "status": "error", "error": e.kind(), "message": e.to_string() }),
        }
    }
}

pub fn conform(path: &Path, horizon: u64, limit: usize, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let files = if path.is_dir() {
        match programs_in(path) {
            Ok(f) => f,
            Err(e) => {
                let _ = writeln!(err, "lw: cannot list {}: {e}", path.display());
                return ENVIRONMENT;
            }
        }
    } else {
        vec![path.to_path_buf()]
    };
    let mut programs = Vec::new();
    let mut failed = false;
    for f in files {
        let file = f.display().to_string();
        let src = match read(&f, err) {
            Ok(s) => s,
            Err(code) => return code,
        };
        let mut v = match check_source(&src) {
            Err(e) => json!({ "status": "skipped", "reason": format!("does not typecheck: {}", e.kind()) }),
            Ok(c) if c.program.definition(&c.program.entry).is_none() => json!({ "status": "skipped", "reason": "no entry definition" }),
            Ok(c) if c.type_of(&c.program.entry).is_some_and(is_function) => {
                json!({ "status": "skipped", "reason": format!("entry `{}` is a function", c.program.entry) })
            }
            Ok(c) => conform_one(&c, horizon, limit),
        };
        let status = v["status"].as_str().unwrap_or_default().to_string();
        failed |= status == "violations" || status == "error";
        let _ = match status.as_str() {
            "conformant" => writeln!(err, "{file}: conformant at H={} ({} runs)", v["effective_horizon"], v["runs"]),
            "skipped" => writeln!(err, "{file}: skipped, {}", v["reason"].as_str().unwrap_or_default()),
            _ => writeln!(err, "{file}: {status}"),
        };
        v["file"] = json!(file);
        programs.push(v);
    }
    emit(out, &json!({ "horizon": horizon, "programs": programs }));
    if failed {
        DOMAIN
    } else {
        OK
    }
}
