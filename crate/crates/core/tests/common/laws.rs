//! Logbook laws checked by exhaustive and random search.

use lwidget_core::semantics::{join_sem, prefix_of, shift, split_sem, Command, Logbook};
use lwidget_core::syntax::ast::Color;

pub const ALPHABET: [Command; 6] = [
    Command::SetColor(Color::Red),
    Command::SetColor(Color::Blue),
    Command::SetColor(Color::Green),
    Command::OnClick,
    Command::OnKeypress,
    Command::Attach(1),
];

/// Every compatible logbook with entries below `h` and at most `max` entries.
pub fn all_books(h: u64, max: usize) -> Vec<Logbook> {
    let cells: Vec<(u64, Command)> = (0..h).flat_map(|t| ALPHABET.iter().map(move |&c| (t, c))).collect();
    let mut out = Vec::new();
    fn go(cells: &[(u64, Command)], from: usize, max: usize, cur: &mut Vec<(u64, Command)>, out: &mut Vec<Logbook>) {
        if let Ok(w) = Logbook::from_entries(0, cur.iter().copied()) {
            out.push(w);
        } else {
            return;
        }
        if cur.len() == max {
            return;
        }
        for k in from..cells.len() {
            cur.push(cells[k]);
            go(cells, k + 1, max, cur, out);
            cur.pop();
        }
    }
    go(&cells, 0, max, &mut Vec::new(), &mut out);
    out
}

pub fn check_split_join(t: u64, w: &Logbook) -> Result<(), String> {
    let (p, rest) = split_sem(t, w);
    let back = join_sem(t, &p, &rest).map_err(|e| e.to_string())?;
    if &back != w {
        return Err(format!("join(split({t}, {w:?})) = {back:?}"));
    }
    Ok(())
}

pub fn check_shift_composition(s: u64, t: u64, w: &Logbook) -> Result<(), String> {
    if shift(s, &shift(t, w)) != shift(s + t, w) {
        return Err(format!("shift {s} after shift {t} differs on {w:?}"));
    }
    Ok(())
}

pub fn check_partition(t: u64, w: &Logbook) -> Result<(), String> {
    let p = prefix_of(t, w);
    let later = shift(t, w).delayed(t);
    if !p.entries.is_disjoint(&later.entries) {
        return Err(format!("prefix and shift overlap at {t} on {w:?}"));
    }
    if p.entries.iter().any(|&(u, _)| u >= t) || later.entries.iter().any(|&(u, _)| u < t) {
        return Err(format!("cut at {t} misplaces entries of {w:?}"));
    }
    let union: std::collections::BTreeSet<_> = p.entries.union(&later.entries).copied().collect();
    if union != w.entries {
        return Err(format!("prefix ∪ shift at {t} loses entries of {w:?}"));
    }
    Ok(())
}

