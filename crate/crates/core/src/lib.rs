//! Goal inference and assistance in a two-agent Doors, Keys & Gems gridworld.
//!
//! A human principal acts and may speak; the assistant infers a posterior over
//! the principal's goal from both and acts to lower the expected cost of
//! reaching it.

pub mod assistance;
pub mod env;
pub mod evaluation;
pub mod inference;
pub mod planner;
pub mod service;
pub mod utterance;

pub use env::{Action, Agent, Color, CostProfile, GoalSpec, Item, ItemKind, ItemRef, KeyLoc, Pos, Scenario, State};
