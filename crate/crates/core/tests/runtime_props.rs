mod common;

use std::time::{Duration, Instant};

use lwidget_core::runtime::{conformance, isomorphic, run, EventTrace, RuntimeError, Session, Stimulus, TiePolicy};
use lwidget_core::semantics::{eval_denot, render_state};
use lwidget_core::syntax::ast::Color;
use proptest::prelude::*;

fn blue_on_key_trace() -> EventTrace {
    EventTrace::new(vec![Stimulus::click(2, 0), Stimulus::keypress(4, 0, 'q'), Stimulus::click(6, 0)])
}

fn color_at(entry: &str, t: u64) -> Option<Color> {
    let mut c = common::checked("blue_on_key.lw");
    c.program.entry = entry.into();
    let r = run(&c.program, &blue_on_key_trace(), 8, TiePolicy::Left).unwrap();
    assert_eq!(r.logbooks.len(), 1);
    render_state(&r.logbooks[0], t).color
}

#[test]
fn once_and_keep_differ_after_the_second_click() {
    assert_eq!(color_at("onceThenBlue", 6), Some(Color::Blue));
    assert_eq!(color_at("keepThenBlue", 6), Some(Color::Red));
    assert_eq!(color_at("onceThenBlue", 3), Some(Color::Red));
    assert_eq!(color_at("keepThenBlue", 5), Some(Color::Blue));
}

#[test]
fn batch_run_and_session_agree() {
    let c = common::checked("blue_on_key.lw");
    let r = run(&c.program, &blue_on_key_trace(), 8, TiePolicy::Left).unwrap();
    let mut s = Session::new(c, 8, TiePolicy::Left).unwrap();
    for st in blue_on_key_trace().stimuli {
        s.inject(st).unwrap();
    }
    let live = s.snapshot(6).unwrap();
    assert_eq!(live, vec![render_state(&r.logbooks[0], 6)]);
    assert_eq!(live[0].color, Some(Color::Blue));
    let r2 = s.finish().unwrap();
    assert_eq!(r.logbooks, r2.logbooks);
    assert_eq!(r.steps_executed, r2.steps_executed);
}

#[test]
fn doubling_the_horizon_does_no_extra_work() {
    for file in common::RUNNABLE {
        let c = common::checked(file);
        let trace = if *file == "blue_on_key.lw" { blue_on_key_trace() } else { EventTrace::new(vec![Stimulus::click(2, 0)]) };
        let steps = |h| match run(&c.program, &trace, h, TiePolicy::Left) {
            Ok(r) => Ok(r.steps_executed),
            Err(e @ (RuntimeError::TraceTargetInvalid { .. } | RuntimeError::Compat(_))) => Err(e),
            Err(e) => panic!("{file}: {e}"),
        };
        assert_eq!(steps(8), steps(16), "{file}");
        assert_eq!(steps(8), steps(64), "{file}");
    }
}

#[test]
fn corpus_runs_conform_to_the_enumeration() {
    let start = Instant::now();
    for file in common::RUNNABLE {
        let c = common::checked(file);
        let horizons: &[u64] = if *file == "button_stack.lw" { &[3, 4] } else { &[3, 6] };
        for &h in horizons {
            let r = conformance(&c.program, h).unwrap();
            assert!(r.runs > 0, "{file} H={h}");
            assert!(r.is_conformant(), "{file} H={h}: {:?}", r.violations.first());
        }
    }
    assert!(start.elapsed() < Duration::from_secs(60), "{:?}", start.elapsed());
}

fn random_trace() -> impl Strategy<Value = Vec<Stimulus>> {
    prop::collection::vec((1u64..=6, 0u64..2, any::<bool>()), 0..5).prop_map(|mut v| {
        v.sort();
        v.into_iter().map(|(t, w, click)| if click { Stimulus::click(t, w) } else { Stimulus::keypress(t, w, 'a') }).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn seeded_runs_are_reproducible_and_admitted(stimuli in random_trace(), seed in any::<u64>(), pick in 0usize..4) {
        let file = ["change_color.lw", "click_then_keep.lw", "blue_on_key.lw", "turn_red.lw"][pick];
        let c = common::checked(file);
        let trace = EventTrace::new(stimuli);
        let a = run(&c.program, &trace, 6, TiePolicy::Seeded(seed));
        let b = run(&c.program, &trace, 6, TiePolicy::Seeded(seed));
        match (&a, &b) {
            (Ok(x), Ok(y)) => {
                prop_assert_eq!(&x.logbooks, &y.logbooks);
                prop_assert_eq!(&x.choice_log, &y.choice_log);
                let set = eval_denot(&c.program, 6).unwrap();
                let admitted = set.outcomes.iter().any(|o| o.result.as_ref().is_ok_and(|books| isomorphic(books, &x.logbooks)));
                prop_assert!(admitted, "{}: {:?}", file, x.logbooks);
            }
            (Err(e), Err(f)) => {
                prop_assert_eq!(e.kind(), f.kind());
                prop_assert!(matches!(e, RuntimeError::TraceTargetInvalid { .. } | RuntimeError::Compat(_)), "{}", e);
            }
            _ => prop_assert!(false, "nondeterministic: {:?} vs {:?}", a, b),
        }
    }
}
