//! Push-based operational interpreter, live sessions and the conformance oracle.

pub mod conform;
pub mod machine;
pub mod session;
pub mod trace;

pub use conform::{conformance, conformance_with_limit, isomorphic, ConformanceReport, Violation};
pub use machine::{run, Machine, PendingHandler, RunResult, RuntimeError, TiePolicy};
pub use session::Session;
pub use trace::{EventTrace, Stimulus, StimulusKind, TraceError};
