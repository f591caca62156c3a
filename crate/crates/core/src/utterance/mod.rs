//! Utterance model: what a principal pursuing a goal might say. A rollout of
//! the joint policy is reduced to salient actions, subsets of those become
//! candidate commands, and a scorer rates how well an utterance expresses
//! each command.

mod command;
mod enumerate;
mod llm;
mod salient;
mod templates;

pub use command::{Arg, CmdAction, Command, CommandParseError, Verb, Who};
pub use enumerate::{admissible, enumerate_commands, ground_command};
pub use llm::{default_examples, parse_examples, LlmConfig, LlmScorer, DEFAULT_EXAMPLES};
pub use salient::{extract_salient_actions, robot_salient_actions, Salient};
pub use templates::{normalize, templates, TemplateScorer, SCORE_FLOOR, TEMPLATE_EPS};

use crate::env::State;
use crate::planner::PolicyHandle;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    /// Unreachable endpoint, timeout, rate limit or server error. Retrying may help.
    #[error("scoring endpoint unavailable: {0}")]
    Transport(String),
    #[error("malformed scoring response: {0}")]
    Malformed(String),
}

impl ScoreError {
    pub fn retriable(&self) -> bool {
        matches!(self, ScoreError::Transport(_))
    }
}

/// Rates utterances against commands. Scores are natural-log likelihoods in
/// input order.
pub trait UtteranceScorer: Send + Sync {
    fn score(&self, utterance: &str, commands: &[Command]) -> Result<Vec<f64>, ScoreError>;
    fn name(&self) -> &str;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredCommand {
    pub command: Command,
    pub log_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceModelConfig {
    /// Probability the principal speaks at a given step.
    pub p_speak: f64,
    /// Rollout length cap; rollouts also stop at the goal.
    pub rollout_horizon: usize,
    /// Most actions in one command.
    pub max_actions: usize,
    pub examples: Vec<(String, String)>,
}

impl Default for UtteranceModelConfig {
    fn default() -> Self {
        UtteranceModelConfig {
            p_speak: 0.05,
            rollout_horizon: 50,
            max_actions: 3,
            examples: default_examples(),
        }
    }
}

impl UtteranceModelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.p_speak > 0.0 && self.p_speak < 1.0) {
            return Err(format!("p_speak must lie in (0,1), got {}", self.p_speak));
        }
        if self.max_actions == 0 {
            return Err("max_actions must be at least 1".into());
        }
        Ok(())
    }
}

/// Support of the command distribution at `s`; each command is equally likely.
/// The policy is updated along the rollout.
pub fn command_prior(s: &State, h: &mut PolicyHandle, cfg: &UtteranceModelConfig) -> Vec<Command> {
    let rollout = h.rollout(s, cfg.rollout_horizon);
    let scn = &h.domain().scenario;
    enumerate_commands(&extract_salient_actions(scn, &rollout), cfg.max_actions)
}

/// `ln(sum_i exp(x_i))`, with an all `-inf` input giving `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `ln P(u | commands)` under a uniform prior over `commands`; an empty
/// support gives the floor.
pub fn mixture_log_likelihood(
    utterance: &str,
    commands: &[Command],
    scorer: &dyn UtteranceScorer,
) -> Result<f64, ScoreError> {
    if commands.is_empty() {
        return Ok(SCORE_FLOOR.ln());
    }
    let scores = scorer.score(utterance, commands)?;
    Ok(logsumexp(&scores) - (commands.len() as f64).ln())
}

/// `P(u | s, policy)` in linear space.
pub fn utterance_likelihood(
    utterance: &str,
    s: &State,
    h: &mut PolicyHandle,
    cfg: &UtteranceModelConfig,
    scorer: &dyn UtteranceScorer,
) -> Result<f64, ScoreError> {
    let commands = command_prior(s, h, cfg);
    Ok(mixture_log_likelihood(utterance, &commands, scorer)?.exp())
}

#[cfg(test)]
mod tests;
