mod common;

use std::time::{Duration, Instant};

use lwidget_core::semantics::eval_denot;
use lwidget_core::syntax::{alpha_eq, parse_lin_type, pretty_type};
use lwidget_core::{check_source, ErrorKind, FrontendError, Type};

const STR_A: &str = "(ν s. ◇(A ⊗ s))";
const STR_B: &str = "(ν s. ◇(B ⊗ s))";

fn expected() -> Vec<(&'static str, &'static str, String)> {
    let widget = "∀(i:Id). Widget i ⊸ Widget i".to_string();
    vec![
        ("turn_red.lw", "turnRedOnClick", widget.clone()),
        ("turn_red.lw", "turnRedOnClickSugared", widget.clone()),
        ("keep_turning_red.lw", "keepTurningRed", widget.clone()),
        ("click_then_keep.lw", "clickThenKeep", widget.clone()),
        ("change_color.lw", "changeColor", widget.clone()),
        ("interleave.lw", "interleave", format!("{STR_A} ⊸ {STR_A} ⊸ {STR_A}")),
        ("stream_map.lw", "map", format!("F (G (A ⊸ B)) ⊸ {STR_A} ⊸ {STR_B}")),
        ("button_stack.lw", "buttonStack", widget),
        ("s4_3.lw", "axiomT", "A ⊸ ◇A".into()),
        ("s4_3.lw", "axiom4", "◇◇A ⊸ ◇A".into()),
        ("s4_3.lw", "axiom3", "◇(A ⊗ B) ⊸ ◇((◇A ⊗ B) ⊕ ◇(A ⊗ ◇B) ⊕ ◇(A ⊗ B))".into()),
    ]
}

#[test]
fn corpus_programs_have_their_stated_types() {
    let start = Instant::now();
    for (file, name, ty) in expected() {
        let c = common::checked(file);
        let want = parse_lin_type(&ty).unwrap_or_else(|e| panic!("{ty}: {e}"));
        match c.type_of(name) {
            Some(Type::Lin(got)) => assert!(alpha_eq(got, &want), "{file}/{name}: got {}", pretty_type(&Type::Lin(got.clone()))),
            other => panic!("{file}/{name}: {other:?}"),
        }
    }
    assert!(start.elapsed() < Duration::from_secs(1), "{:?}", start.elapsed());
}

#[test]
fn every_well_typed_file_checks() {
    for file in common::WELL_TYPED {
        common::checked(file);
    }
}

fn type_errors(file: &str) -> Vec<lwidget_core::TypeError> {
    match check_source(&common::corpus_source(file)) {
        Err(FrontendError::Type(es)) => es,
        other => panic!("{file}: expected type errors, got {other:?}"),
    }
}

#[test]
fn zip_attempt_uses_a_variable_from_outside_the_select() {
    let es = type_errors("zip_attempt.lw");
    assert_eq!(es.len(), 1);
    assert_eq!(es[0].kind, ErrorKind::LinearVariableUnavailableInSelect);
    assert_eq!((es[0].span.line, es[0].span.col), (11, 56));
}

#[test]
fn select_outer_uses_a_variable_from_outside_the_select() {
    let es = type_errors("select_outer.lw");
    assert_eq!(es.len(), 1);
    assert_eq!(es[0].kind, ErrorKind::LinearVariableUnavailableInSelect);
    assert_eq!((es[0].span.line, es[0].span.col), (12, 64));
}

#[test]
fn double_set_color_typechecks_but_always_clashes() {
    let c = common::checked("double_set_color.lw");
    let out = eval_denot(&c.program, 3).unwrap();
    assert!(!out.is_empty());
    assert!(out.outcomes.iter().all(|o| o.result.is_err()));
}

#[test]
fn diagnostics_serialize_with_kind_and_position() {
    let es = type_errors("zip_attempt.lw");
    let j = es[0].to_json("zip_attempt.lw");
    assert_eq!(j["kind"], "LinearVariableUnavailableInSelect");
    assert_eq!(j["line"], 11);
    assert_eq!(j["col"], 56);
}
