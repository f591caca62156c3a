//! Enumerative Bayesian goal inference. One hypothesis per (goal gem, cost
//! profile) pair, each carrying its own joint policy and a discrete posterior
//! over the principal's rationality β. Robot actions are interventions: they
//! only enter through the transition check.

use crate::env::{Action, Agent, GoalSpec, Scenario, State};
use crate::planner::{Domain, PlannerConfig, PolicyHandle};
use crate::utterance::{
    command_prior, logsumexp, mixture_log_likelihood, ScoreError, UtteranceModelConfig, UtteranceScorer,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::sync::Arc;
use thiserror::Error;

/// Discrete rationality values with a Gamma(0.5, 1) prior.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaGrid {
    pub values: Vec<f64>,
    pub prior: Vec<f64>,
}

impl BetaGrid {
    /// 33 values 2^(-3 + j/4), j = 0..=32.
    pub fn standard() -> BetaGrid {
        BetaGrid::with_values((0..33).map(|j| 2f64.powf(-3.0 + 0.25 * j as f64)).collect())
    }

    /// Gamma(0.5, 1) prior restricted to `values` and renormalized.
    pub fn with_values(values: Vec<f64>) -> BetaGrid {
        let dens: Vec<f64> = values.iter().map(|&b| b.powf(-0.5) * (-b).exp()).collect();
        let z: f64 = dens.iter().sum();
        BetaGrid {
            prior: dens.into_iter().map(|d| d / z).collect(),
            values,
        }
    }

    pub fn single(beta: f64) -> BetaGrid {
        BetaGrid {
            values: vec![beta],
            prior: vec![1.0],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Multimodal,
    ActionOnly,
    LanguageOnly,
}

impl Mode {
    pub fn parse(s: &str) -> Option<Mode> {
        match s {
            "multimodal" | "clips" => Some(Mode::Multimodal),
            "action-only" | "action" => Some(Mode::ActionOnly),
            "language-only" | "language" => Some(Mode::LanguageOnly),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Multimodal => "multimodal",
            Mode::ActionOnly => "action-only",
            Mode::LanguageOnly => "language-only",
        }
    }
}

#[derive(Clone, Debug)]
pub struct InferenceConfig {
    pub mode: Mode,
    pub planner: PlannerConfig,
    pub utterance: UtteranceModelConfig,
    pub betas: BetaGrid,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            mode: Mode::Multimodal,
            planner: PlannerConfig::inference(),
            utterance: UtteranceModelConfig::default(),
            betas: BetaGrid::standard(),
        }
    }
}

impl InferenceConfig {
    pub fn with_mode(mut self, mode: Mode) -> InferenceConfig {
        self.mode = mode;
        self
    }
}

/// What happened in one step: the acting agent's action at `prev`, an
/// optional utterance by the principal, and the resulting state.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub t: u32,
    pub prev: State,
    pub next: State,
    pub human_action: Option<Action>,
    pub robot_action: Option<Action>,
    pub utterance: Option<String>,
}

impl Observation {
    /// Step by whichever agent's turn it is at `prev`.
    pub fn step(prev: State, action: Action, utterance: Option<String>, next: State) -> Observation {
        let (human_action, robot_action) = match prev.turn {
            Agent::Human => (Some(action), None),
            Agent::Robot => (None, Some(action)),
        };
        Observation {
            t: prev.t,
            prev,
            next,
            human_action,
            robot_action,
            utterance,
        }
    }

    pub fn spoke(&self) -> bool {
        self.utterance.is_some()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("the scenario has no goals")]
    NoGoals,
    #[error("observation at step {t} has zero probability under every hypothesis")]
    Degenerate { t: u32 },
    #[error("observation at step {t} is not a legal transition: {reason}")]
    Inconsistent { t: u32, reason: String },
    #[error(transparent)]
    Score(#[from] ScoreError),
}

#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub goal: GoalSpec,
    pub policy: PolicyHandle,
    /// Normalized natural-log weight.
    pub log_weight: f64,
    pub beta_posterior: Vec<f64>,
}

impl Hypothesis {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    pub fn beta_mean(&self, grid: &BetaGrid) -> f64 {
        grid.values.iter().zip(&self.beta_posterior).map(|(b, p)| b * p).sum()
    }
}

/// Likelihood of the acting agent's action under a hypothesis, marginalized
/// over its β posterior, and the updated posterior. A zero likelihood leaves
/// the posterior unchanged.
pub fn marginal_action_likelihood(
    policy: &PolicyHandle,
    grid: &BetaGrid,
    posterior: &[f64],
    s: &State,
    a: Action,
) -> Result<(f64, Vec<f64>), InferenceError> {
    let scn = &policy.domain().scenario;
    scn.check_action(s, s.turn, a)
        .map_err(|e| InferenceError::Inconsistent {
            t: s.t,
            reason: e.to_string(),
        })?;
    let qs = policy.q_values(s);
    let idx = qs.iter().position(|(b, _)| *b == a);
    let mut joint = Vec::with_capacity(grid.len());
    for (&beta, &w) in grid.values.iter().zip(posterior) {
        let p = match idx {
            Some(i) => policy.boltzmann(s, beta)[i].1,
            // Legal but outside the planner's action model (a restricted agent moving).
            None => 0.0,
        };
        joint.push(w * p);
    }
    let l: f64 = joint.iter().sum();
    if l > 0.0 {
        Ok((l, joint.into_iter().map(|x| x / l).collect()))
    } else {
        Ok((0.0, posterior.to_vec()))
    }
}

#[derive(Clone, Debug)]
pub struct Belief {
    pub hypotheses: Vec<Hypothesis>,
    pub mode: Mode,
    pub betas: BetaGrid,
    pub utterance: UtteranceModelConfig,
    domain: Arc<Domain>,
}

/// Per-hypothesis result of one update before normalization.
struct Delta {
    log_lik: f64,
    beta_posterior: Option<Vec<f64>>,
}

impl Belief {
    /// Uniform prior over every (goal, profile) pair; each policy refined once
    /// at the initial state.
    pub fn init(scn: &Scenario, cfg: &InferenceConfig) -> Result<Belief, InferenceError> {
        Belief::init_with_domain(Arc::new(Domain::new(scn.clone())), cfg)
    }

    pub fn init_with_domain(domain: Arc<Domain>, cfg: &InferenceConfig) -> Result<Belief, InferenceError> {
        let scn = &domain.scenario;
        let specs = scn.goal_specs();
        if specs.is_empty() {
            return Err(InferenceError::NoGoals);
        }
        let s0 = scn.initial_state();
        let lw = -(specs.len() as f64).ln();
        let hypotheses = specs
            .into_par_iter()
            .map(|goal| {
                let mut policy = PolicyHandle::new(domain.clone(), goal, cfg.planner);
                policy.update(&s0);
                Hypothesis {
                    goal,
                    policy,
                    log_weight: lw,
                    beta_posterior: cfg.betas.prior.clone(),
                }
            })
            .collect();
        Ok(Belief {
            hypotheses,
            mode: cfg.mode,
            betas: cfg.betas.clone(),
            utterance: cfg.utterance.clone(),
            domain,
        })
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn scenario(&self) -> &Scenario {
        &self.domain.scenario
    }

    pub fn weights(&self) -> Vec<f64> {
        self.hypotheses.iter().map(|h| h.weight()).collect()
    }

    /// Intervention-style update: the robot's action is conditioned on, not
    /// explained. On error the weights are left as they were.
    pub fn update(&mut self, obs: &Observation, scorer: &dyn UtteranceScorer) -> Result<(), InferenceError> {
        self.update_inner(obs, scorer, false)
    }

    /// Observer-style update that also scores the robot's action under each
    /// hypothesis's joint policy.
    pub fn update_external(&mut self, obs: &Observation, scorer: &dyn UtteranceScorer) -> Result<(), InferenceError> {
        self.update_inner(obs, scorer, true)
    }

    fn update_inner(
        &mut self,
        obs: &Observation,
        scorer: &dyn UtteranceScorer,
        external: bool,
    ) -> Result<(), InferenceError> {
        let scn = &self.domain.scenario;
        // Transition consistency is the same indicator for every hypothesis.
        let (a_h, a_r) = (
            obs.human_action.unwrap_or(Action::Wait),
            obs.robot_action.unwrap_or(Action::Wait),
        );
        match scn.transition(&obs.prev, a_h, a_r) {
            Ok(n) if n.fingerprint() == obs.next.fingerprint() => {}
            Ok(_) => {
                return Err(InferenceError::Inconsistent {
                    t: obs.t,
                    reason: "resulting state differs".into(),
                })
            }
            Err(e) => {
                return Err(InferenceError::Inconsistent {
                    t: obs.t,
                    reason: e.to_string(),
                })
            }
        }
        let speak = if obs.spoke() {
            self.utterance.p_speak
        } else {
            1.0 - self.utterance.p_speak
        };
        let mode = self.mode;
        let grid = &self.betas;
        let ucfg = &self.utterance;
        let deltas: Vec<Result<Delta, InferenceError>> = self
            .hypotheses
            .par_iter_mut()
            .map(|h| {
                let s = &obs.prev;
                h.policy.update(s);
                let mut log_lik = speak.ln();
                if let (Some(u), false) = (&obs.utterance, mode == Mode::ActionOnly) {
                    let commands = command_prior(s, &mut h.policy, ucfg);
                    log_lik += mixture_log_likelihood(u, &commands, scorer)?;
                }
                let mut beta_posterior = None;
                let acted = match s.turn {
                    Agent::Human => obs.human_action,
                    Agent::Robot if external => obs.robot_action,
                    Agent::Robot => None,
                };
                if let (Some(a), false) = (acted, mode == Mode::LanguageOnly) {
                    let (l, post) = marginal_action_likelihood(&h.policy, grid, &h.beta_posterior, s, a)?;
                    log_lik += l.ln();
                    beta_posterior = Some(post);
                }
                Ok(Delta {
                    log_lik,
                    beta_posterior,
                })
            })
            .collect();
        let deltas: Vec<Delta> = deltas.into_iter().collect::<Result<_, _>>()?;
        let raw: Vec<f64> = self
            .hypotheses
            .iter()
            .zip(&deltas)
            .map(|(h, d)| h.log_weight + d.log_lik)
            .collect();
        let z = logsumexp(&raw);
        if !z.is_finite() {
            return Err(InferenceError::Degenerate { t: obs.t });
        }
        for ((h, d), r) in self.hypotheses.iter_mut().zip(deltas).zip(raw) {
            h.log_weight = r - z;
            if let Some(p) = d.beta_posterior {
                h.beta_posterior = p;
            }
        }
        Ok(())
    }

    /// Probability of each goal gem, summed over cost profiles.
    pub fn goal_posterior(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for h in &self.hypotheses {
            *out.entry(h.goal.gem).or_insert(0.0) += h.weight();
        }
        out
    }

    pub fn snapshot(&self, t: u32) -> BeliefSnapshot {
        let scn = self.scenario();
        BeliefSnapshot {
            t,
            goals: self
                .goal_posterior()
                .into_iter()
                .map(|(g, p)| (scn.gems[g].id.clone(), p))
                .collect(),
            hypotheses: self
                .hypotheses
                .iter()
                .map(|h| HypothesisSummary {
                    goal: scn.gems[h.goal.gem].id.clone(),
                    profile: h.goal.profile,
                    w: h.weight(),
                    beta_mean: h.beta_mean(&self.betas),
                })
                .collect(),
        }
    }
}

/// Wire form of a belief.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeliefSnapshot {
    pub t: u32,
    pub goals: BTreeMap<String, f64>,
    pub hypotheses: Vec<HypothesisSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSummary {
    pub goal: String,
    pub profile: u8,
    pub w: f64,
    pub beta_mean: f64,
}
