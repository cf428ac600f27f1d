//! Cost-based choice among alternative plans generated through choice points.

mod choice;
mod optimize;

pub use choice::{ChoiceHook, ChoiceLog, Fill, FirstChoice};
pub use optimize::{
    optimize, Clock, CostedPlan, Report, SimulatedClock, StopRule, Strategy, TraceEntry,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CboError {
    #[error("choice point with no options")]
    NoOptions,
    #[error("prescribed option {choice} but only {num_choices} available")]
    Inconsistent { choice: usize, num_choices: usize },
    #[error("plan generation ended with {pending} prescribed choices unused")]
    Diverged { pending: usize },
}
