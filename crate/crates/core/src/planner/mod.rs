//! Joint-policy planning: real-time heuristic search over the two-agent game,
//! Boltzmann action distributions, and an exact search for formula goals.

mod domain;
mod formula;
mod heuristic;
mod policy;
mod search;

pub use domain::Domain;
pub use formula::{GoalFormula, HistoryState, Pred, Term};
pub use policy::{boltzmann_probs, PlannerConfig, PlannerStats, PolicyHandle, Restriction, RobotQNoise};
pub use search::{advance, human_cost, optimal_plan, Plan, PlanOutcome};

#[cfg(test)]
mod tests;
