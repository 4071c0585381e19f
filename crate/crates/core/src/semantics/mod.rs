//! Logbook algebra and the enumerating denotational evaluator.

pub mod denot;
pub mod logbook;
pub mod value;

pub use denot::{eval_denot, DEFAULT_BRANCH_LIMIT, eval_denot_with_limit, Choice, Outcome, OutcomeSet, SemError, Side};
pub use logbook::{
    join_sem, prefix_of, render_state, shift, split_sem, widget_union, Command, CompatError, Handler, Logbook,
    PrefixBook, RenderState, TimePoint,
};
pub use value::SemValue;
