//! Fixtures shared by the criterion benches in `benches/`.

use lwidget_core::runtime::{EventTrace, Stimulus};
use lwidget_core::{check_source, CheckedProgram};

/// Source text of a corpus program.
pub fn corpus_source(file: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/").to_string() + file;
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn checked(file: &str) -> CheckedProgram {
    check_source(&corpus_source(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

/// `n` clicks on widget 0, one every `gap` steps starting at `gap`.
pub fn click_train(n: u64, gap: u64) -> EventTrace {
    EventTrace::new((1..=n).map(|k| Stimulus::click(k * gap, 0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_load() {
        assert!(checked("turn_red.lw").type_of("turnRedOnClick").is_some());
        let t = click_train(3, 2);
        assert_eq!(t.stimuli.iter().map(|s| s.time).collect::<Vec<_>>(), [2, 4, 6]);
    }
}
