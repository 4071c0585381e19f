mod common;

use std::time::{Duration, Instant};

use common::laws::{all_books, check_partition, check_shift_composition, check_split_join, ALPHABET};
use lwidget_core::semantics::{eval_denot, join_sem, prefix_of, shift, split_sem, widget_union, Logbook, PrefixBook, TimePoint};
use proptest::prelude::*;

#[test]
fn algebraic_laws_hold_exhaustively_on_small_books() {
    let start = Instant::now();
    let mut checked = 0usize;
    for h in 0..=5u64 {
        for w in all_books(h, 3) {
            for t in 0..=h + 1 {
                check_split_join(t, &w).unwrap();
                check_partition(t, &w).unwrap();
                for s in 0..=h + 1 {
                    check_shift_composition(s, t, &w).unwrap();
                }
                checked += 1;
            }
        }
    }
    assert!(checked > 10_000, "{checked}");
    assert!(start.elapsed() < Duration::from_secs(10), "{:?}", start.elapsed());
}

fn book() -> impl Strategy<Value = Logbook> {
    prop::collection::vec((0u64..40, 0usize..ALPHABET.len()), 0..20).prop_map(|es| {
        let mut w = Logbook::new(7);
        for (t, k) in es {
            let _ = w.insert((t, ALPHABET[k]));
        }
        w
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn split_then_join_is_identity(w in book(), t in 0u64..45) {
        check_split_join(t, &w).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn shifts_compose(w in book(), s in 0u64..25, t in 0u64..25) {
        check_shift_composition(s, t, &w).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn prefix_and_shift_partition_a_book(w in book(), t in 0u64..45) {
        check_partition(t, &w).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn join_then_split_is_identity(p in book(), w in book(), t in 0u64..45) {
        let prefix = PrefixBook { id: 7, cutoff: TimePoint::Finite(t), entries: p.entries.iter().filter(|e| e.0 < t).copied().collect() };
        let joined = join_sem(t, &prefix, &w).unwrap();
        let (p2, w2) = split_sem(t, &joined);
        prop_assert_eq!(p2, prefix);
        prop_assert_eq!(w2, w);
    }

    #[test]
    fn union_is_commutative_and_idempotent(a in book(), b in book()) {
        prop_assert_eq!(widget_union(&a, &a).unwrap(), a.clone());
        match (widget_union(&a, &b), widget_union(&b, &a)) {
            (Ok(x), Ok(y)) => prop_assert_eq!(x, y),
            (Err(_), Err(_)) => {}
            (x, y) => prop_assert!(false, "asymmetric union: {:?} vs {:?}", x, y),
        }
    }

    #[test]
    fn delay_is_undone_by_shift(w in book(), t in 0u64..20) {
        prop_assert_eq!(shift(t, &w.delayed(t)), w.clone());
        prop_assert!(prefix_of(t, &w.delayed(t)).entries.is_empty());
    }
}

#[test]
fn corpus_outcomes_stay_within_the_horizon() {
    for file in common::RUNNABLE.iter().filter(|f| **f != "button_stack.lw") {
        let c = common::checked(file);
        let h = 3;
        let out = eval_denot(&c.program, h).unwrap();
        assert!(!out.is_empty(), "{file}");
        for o in &out.outcomes {
            if let Ok(books) = &o.result {
                for w in books {
                    assert!(w.is_compatible(), "{file}");
                    assert!(w.entries.iter().all(|&(t, _)| t <= h), "{file}: {w:?}");
                }
            }
        }
    }
}
