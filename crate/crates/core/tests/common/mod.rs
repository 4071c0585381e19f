#![allow(dead_code)]

pub mod instances;
pub mod laws;

use std::path::PathBuf;

use lwidget_core::{check_source, CheckedProgram};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

pub fn corpus_source(file: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn checked(file: &str) -> CheckedProgram {
    check_source(&corpus_source(file)).unwrap_or_else(|e| panic!("{file}: {e:?}"))
}

/// Corpus files that typecheck and declare an entry point.
pub const RUNNABLE: &[&str] = &[
    "turn_red.lw",
    "keep_turning_red.lw",
    "click_then_keep.lw",
    "change_color.lw",
    "blue_on_key.lw",
    "double_set_color.lw",
    "drop.lw",
    "button_stack.lw",
];

/// Every corpus file expected to typecheck.
pub const WELL_TYPED: &[&str] = &[
    "turn_red.lw",
    "keep_turning_red.lw",
    "click_then_keep.lw",
    "change_color.lw",
    "interleave.lw",
    "stream_map.lw",
    "button_stack.lw",
    "s4_3.lw",
    "blue_on_key.lw",
    "double_set_color.lw",
    "drop.lw",
];
