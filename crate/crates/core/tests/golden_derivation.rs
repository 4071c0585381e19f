mod common;

use lwidget_core::typecheck::derivation::Derivation;

fn turn_red() -> Derivation {
    common::checked("turn_red.lw").derivations["turnRedOnClick"].clone()
}

#[test]
fn rendering_matches_golden_file() {
    let golden = include_str!("golden/turn_red_on_click.txt");
    assert_eq!(turn_red().render().trim_end(), golden.trim_end());
}

#[test]
fn time_variable_enters_at_the_existential_elimination() {
    let d = turn_red();
    let node = d.find("∃-E", 4).expect("∃-E on line 4");
    assert_eq!(node.bound, ["x:Time", "c1 : I @ x"]);
    assert!(!node.theta.iter().any(|t| t.starts_with("x:")));
    // Every node below it sees x in Θ.
    for n in &d.nodes {
        if n.id != node.id && d.descends_from(n.id, node.id) && n.line > 4 {
            assert!(n.theta.iter().any(|t| t == "x:Time"), "{} on line {}", n.rule, n.line);
        }
    }
}

#[test]
fn delayed_unit_is_discharged_on_line_six() {
    let d = turn_red();
    let node = d.find("I_τ-E", 6).expect("I_τ-E on line 6");
    assert!(node.consumed.contains(&"c2 :_x I".to_string()));
    let origin = node.consumed_origins[node.consumed.iter().position(|c| c == "c2 :_x I").unwrap()];
    assert_eq!(d.nodes[origin].rule, "@-E");
    assert_eq!(d.nodes[origin].line, 5);
}

#[test]
fn final_join_splits_widget_and_prefix() {
    let d = turn_red();
    let let_node = d.find("let", 9).expect("let on line 9");
    assert_eq!(let_node.consumed, ["p : Prefix i x", "w3 :_x Widget i"]);
    let bound_expr = d.child(let_node, 0).unwrap();
    let join = d.child(let_node, 1).unwrap();
    assert_eq!(bound_expr.consumed, ["w3 :_x Widget i"]);
    assert_eq!(join.rule, "⊸-E");
    assert_eq!(join.line, 10);
    assert_eq!(join.consumed, ["p : Prefix i x", "w4 : Widget i @ x"]);
    let p_origin = &d.nodes[join.consumed_origins[0]];
    assert_eq!((p_origin.rule, p_origin.line), ("⊗-E", 7));
}
