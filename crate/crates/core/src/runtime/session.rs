//! A live runtime that owns its program, for interactive use.

use self_cell::self_cell;

use super::machine::{Machine, RunResult, RuntimeError, TiePolicy};
use super::trace::Stimulus;
use crate::semantics::RenderState;
use crate::typecheck::CheckedProgram;

self_cell!(
    struct Cell {
        owner: CheckedProgram,
        #[not_covariant]
        dependent: Machine,
    }
);

pub struct Session {
    cell: Cell,
}

impl Session {
    /// Start the program's entry definition at time 0.
    pub fn new(program: CheckedProgram, horizon: u64, policy: TiePolicy) -> Result<Session, RuntimeError> {
        let cell = Cell::try_new(program, |p| Machine::new(&p.program, horizon, policy))?;
        Ok(Session { cell })
    }

    pub fn program(&self) -> &CheckedProgram {
        self.cell.borrow_owner()
    }

    pub fn now(&self) -> u64 {
        self.cell.with_dependent(|_, m| m.now())
    }

    pub fn steps(&self) -> u64 {
        self.cell.with_dependent(|_, m| m.steps())
    }

    pub fn inject(&mut self, s: Stimulus) -> Result<(), RuntimeError> {
        self.cell.with_dependent_mut(|_, m| m.inject(s))
    }

    pub fn advance_to(&mut self, t: u64) -> Result<(), RuntimeError> {
        self.cell.with_dependent_mut(|_, m| m.advance_to(t))
    }

    pub fn snapshot(&mut self, t: u64) -> Result<Vec<RenderState>, RuntimeError> {
        self.cell.with_dependent_mut(|_, m| m.snapshot(t))
    }

    pub fn finish(&mut self) -> Result<RunResult, RuntimeError> {
        self.cell.with_dependent_mut(|_, m| m.finish())
    }
}
