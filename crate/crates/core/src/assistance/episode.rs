//! Episode driver. The scripted prefix is replayed with the robot waiting,
//! then principal and assistant alternate until the true gem is collected or
//! the step limit is hit.

use super::literal::{
    command_to_goal_formula, literal_assist_plan, literal_infer_commands, robot_options, systematic_sample,
    CommandGoal, Grounding, PhaseOne,
};
use super::policy::{qmdp_action_avoiding, PosteriorSampling};
use super::trace::TraceEvent;
use crate::env::{Action, Agent, CostProfile, Fingerprint, Scenario, State};
use crate::inference::{Belief, BeliefSnapshot, InferenceConfig, InferenceError, Observation};
use crate::planner::PlannerConfig;
use crate::utterance::{ScoreError, UtteranceScorer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::collections::{HashMap, VecDeque};
use std::time::Duration;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssistMode {
    QmdpOffline,
    QmdpOnline,
    Pibar,
    LiteralNaive,
    LiteralEfficient,
}

impl AssistMode {
    pub const ALL: [AssistMode; 5] = [
        AssistMode::QmdpOffline,
        AssistMode::QmdpOnline,
        AssistMode::Pibar,
        AssistMode::LiteralNaive,
        AssistMode::LiteralEfficient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AssistMode::QmdpOffline => "qmdp-offline",
            AssistMode::QmdpOnline => "qmdp-online",
            AssistMode::Pibar => "pibar",
            AssistMode::LiteralNaive => "literal-naive",
            AssistMode::LiteralEfficient => "literal-efficient",
        }
    }

    pub fn parse(s: &str) -> Option<AssistMode> {
        AssistMode::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn is_literal(self) -> bool {
        matches!(self, AssistMode::LiteralNaive | AssistMode::LiteralEfficient)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssistConfig {
    pub mode: AssistMode,
    /// Hypotheses lighter than this are ignored when choosing actions.
    pub weight_threshold: f64,
    pub planner_budget: usize,
    /// Wall-clock cap per policy update while assisting, in seconds.
    pub time_limit_secs: Option<f64>,
    /// Command samples for the literal baselines.
    pub samples: usize,
    pub seed: u64,
}

impl Default for AssistConfig {
    fn default() -> Self {
        AssistConfig {
            mode: AssistMode::QmdpOffline,
            weight_threshold: 0.02,
            planner_budget: 1 << 16,
            time_limit_secs: Some(10.0),
            samples: 10,
            seed: 0,
        }
    }
}

impl AssistConfig {
    pub fn with_mode(mut self, mode: AssistMode) -> AssistConfig {
        self.mode = mode;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> AssistConfig {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..1.0).contains(&self.weight_threshold) {
            return Err(format!("weight threshold {} outside [0, 1)", self.weight_threshold));
        }
        if self.samples == 0 {
            return Err("sample count must be at least 1".into());
        }
        if self.planner_budget == 0 {
            return Err("planner budget must be positive".into());
        }
        Ok(())
    }

    pub fn planner(&self) -> PlannerConfig {
        let mut p = PlannerConfig::assistance().with_budget(self.planner_budget);
        p.time_limit = self.time_limit_secs.map(Duration::from_secs_f64);
        p
    }
}

#[derive(Debug, Error)]
pub enum AssistError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scripted prefix: {0}")]
    Script(String),
    #[error("principal chose an illegal action at t={t}: {action}")]
    Principal { t: u32, action: String },
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Source of the principal's actions after the scripted prefix.
pub trait Principal {
    /// Action on the principal's turn at `s`, given the assistant's actions
    /// since the prefix ended, each with the state it was taken in.
    fn act(&mut self, s: &State, robot_history: &[(State, Action)]) -> Action;
}

/// Plays a fixed list of actions, then waits.
#[derive(Clone, Debug, Default)]
pub struct ScriptedPrincipal {
    actions: VecDeque<Action>,
}

impl ScriptedPrincipal {
    pub fn new(actions: impl IntoIterator<Item = Action>) -> ScriptedPrincipal {
        ScriptedPrincipal {
            actions: actions.into_iter().collect(),
        }
    }
}

impl Principal for ScriptedPrincipal {
    fn act(&mut self, _: &State, _: &[(State, Action)]) -> Action {
        self.actions.pop_front().unwrap_or(Action::Wait)
    }
}

/// The scripted observation prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct Prefix {
    /// Each step with the utterance spoken at it.
    pub steps: Vec<PrefixStep>,
    pub end: State,
    /// A closing utterance whose accompanying action is left to the principal.
    pub pending_utterance: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrefixStep {
    pub prev: State,
    pub action: Action,
    pub utterance: Option<String>,
    pub next: State,
}

impl Prefix {
    /// The most recent utterance in the prefix, pending one included.
    pub fn last_utterance(&self) -> Option<&str> {
        self.pending_utterance
            .as_deref()
            .or_else(|| self.steps.iter().rev().find_map(|s| s.utterance.as_deref()))
    }
}

pub fn observation_prefix(scn: &Scenario) -> Result<Prefix, String> {
    let states = scn.replay_script()?;
    let steps: Vec<PrefixStep> = states
        .windows(2)
        .map(|w| {
            let prev = w[0];
            let (action, utterance) = match prev.turn {
                Agent::Human => (
                    scn.script_action_at(prev.t).unwrap_or(Action::Wait),
                    scn.script_utterance_at(prev.t).map(str::to_string),
                ),
                Agent::Robot => (Action::Wait, None),
            };
            PrefixStep {
                prev,
                action,
                utterance,
                next: w[1],
            }
        })
        .collect();
    let end = *states.last().expect("replay yields the initial state");
    let pending_utterance = match end.turn {
        Agent::Human if scn.script_action_at(end.t).is_none() => scn.script_utterance_at(end.t).map(str::to_string),
        _ => None,
    };
    Ok(Prefix {
        steps,
        end,
        pending_utterance,
    })
}

/// One realized assistance trajectory after the prefix.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRun {
    pub steps: Vec<(Agent, Action)>,
    /// Steps charged to the run. A literal run that never reaches the gem is
    /// charged up to the step limit, as a belief-based run would be.
    pub length: usize,
    pub success: bool,
    pub truncated: bool,
    /// Principal's action cost after the prefix, under the true profile.
    pub human_cost: f64,
    /// Key and door ids the robot picked up or unlocked.
    pub robot_options: Vec<String>,
    /// Share of this run in the episode's averaged metrics.
    pub weight: f64,
    pub phase_one: Option<PhaseOne>,
    pub command: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub mode: AssistMode,
    pub events: Vec<TraceEvent>,
    /// One run for belief-based modes; samples times groundings for literal ones.
    pub runs: Vec<EpisodeRun>,
    pub prefix_len: usize,
    pub final_belief: Option<BeliefSnapshot>,
    pub p_true_goal: Option<f64>,
}

impl Episode {
    fn mean(&self, f: impl Fn(&EpisodeRun) -> f64) -> f64 {
        let z: f64 = self.runs.iter().map(|r| r.weight).sum();
        self.runs.iter().map(|r| r.weight * f(r)).sum::<f64>() / z
    }

    pub fn mean_length(&self) -> f64 {
        self.mean(|r| r.length as f64)
    }

    pub fn mean_human_cost(&self) -> f64 {
        self.mean(|r| r.human_cost)
    }

    pub fn success_rate(&self) -> f64 {
        self.mean(|r| if r.success { 1.0 } else { 0.0 })
    }

    /// Probability that the robot used each key or door, across runs.
    pub fn option_marginals(&self) -> HashMap<String, f64> {
        let z: f64 = self.runs.iter().map(|r| r.weight).sum();
        let mut out: HashMap<String, f64> = HashMap::new();
        for r in &self.runs {
            for o in &r.robot_options {
                *out.entry(o.clone()).or_insert(0.0) += r.weight / z;
            }
        }
        out
    }
}

fn human_cost(profile: &CostProfile, steps: &[(Agent, Action)]) -> f64 {
    steps
        .iter()
        .filter(|(g, _)| *g == Agent::Human)
        .map(|&(_, a)| profile.action_cost(Agent::Human, a))
        .sum()
}

fn true_profile(scn: &Scenario) -> CostProfile {
    CostProfile::bundled(scn.true_profile).unwrap_or_else(|| CostProfile::bundled(0).expect("profile 0 exists"))
}

struct Recorder<'a> {
    scn: &'a Scenario,
    events: Vec<TraceEvent>,
}

impl Recorder<'_> {
    fn step(&mut self, prev: &State, a: Action, utterance: Option<&str>, next: &State) {
        if let Some(u) = utterance {
            self.events.push(TraceEvent::Utterance {
                t: prev.t,
                text: u.to_string(),
            });
        }
        self.events.push(TraceEvent::action(self.scn, prev.t, prev.turn, a));
        self.events.push(TraceEvent::state(self.scn, next));
    }
}

/// Run one episode of `cfg.mode` on `scn`.
pub fn run_assistant(
    scn: &Scenario,
    inference: &InferenceConfig,
    cfg: &AssistConfig,
    principal: &mut dyn Principal,
    scorer: &dyn UtteranceScorer,
) -> Result<Episode, AssistError> {
    cfg.validate().map_err(AssistError::Config)?;
    let prefix = observation_prefix(scn).map_err(AssistError::Script)?;
    if cfg.mode.is_literal() {
        run_literal(scn, inference, cfg, &prefix, scorer)
    } else {
        run_belief(scn, inference, cfg, &prefix, principal, scorer)
    }
}

fn run_belief(
    scn: &Scenario,
    inference: &InferenceConfig,
    cfg: &AssistConfig,
    prefix: &Prefix,
    principal: &mut dyn Principal,
    scorer: &dyn UtteranceScorer,
) -> Result<Episode, AssistError> {
    let mut rec = Recorder {
        scn,
        events: Vec::new(),
    };
    let s0 = scn.initial_state();
    rec.events.push(TraceEvent::state(scn, &s0));
    let mut belief = Belief::init(scn, inference)?;
    rec.events.push(TraceEvent::belief(belief.snapshot(s0.t)));
    for st in &prefix.steps {
        rec.step(&st.prev, st.action, st.utterance.as_deref(), &st.next);
        // Robot steps leave the weights unchanged, so they are not replayed.
        if st.prev.turn == Agent::Human {
            belief.update(
                &Observation::step(st.prev, st.action, st.utterance.clone(), st.next),
                scorer,
            )?;
            rec.events.push(TraceEvent::belief(belief.snapshot(st.next.t)));
        }
    }
    let planner = cfg.planner();
    for h in &mut belief.hypotheses {
        h.policy.set_config(planner);
    }

    let gem = scn.true_goal;
    let profile = true_profile(scn);
    let mut pending = prefix.pending_utterance.clone();
    let mut frozen = cfg.mode != AssistMode::QmdpOnline && pending.is_none();
    let mut pibar = PosteriorSampling::new();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history: Vec<(State, Action)> = Vec::new();
    let mut steps: Vec<(Agent, Action)> = Vec::new();
    let mut tried: HashMap<Fingerprint, Vec<Action>> = HashMap::new();
    let mut s = prefix.end;
    let limit = s0.t + scn.max_steps;
    while !s.gem_collected(gem) && s.t < limit {
        let a = match s.turn {
            Agent::Human => principal.act(&s, &history),
            Agent::Robot => match cfg.mode {
                AssistMode::Pibar => pibar.action(&mut belief, &s, &mut rng),
                _ => {
                    // With a frozen belief the robot and a waiting principal can
                    // cycle forever; on a revisited configuration the robot skips
                    // what it already did there.
                    let done = tried.entry(s.fingerprint()).or_default();
                    if done.len() >= scn.legal_actions(&s, Agent::Robot).len() {
                        done.clear();
                    }
                    let choice = qmdp_action_avoiding(&mut belief, &s, cfg.weight_threshold, done);
                    done.push(choice.action);
                    if choice.action != choice.unconstrained {
                        let v = json!({
                            "preferred": scn.describe(Agent::Robot, choice.unconstrained),
                            "taken": scn.describe(Agent::Robot, choice.action),
                        });
                        rec.events.push(TraceEvent::metric(s.t, "livelock_break", v));
                    }
                    if choice.ties.len() > 1 {
                        let ties: Vec<_> = choice
                            .ties
                            .iter()
                            .map(|&a| scn.action_to_wire(Agent::Robot, a))
                            .collect();
                        rec.events.push(TraceEvent::metric(s.t, "qmdp_ties", json!(ties)));
                    }
                    choice.action
                }
            },
        };
        let next = scn.step_action(&s, a).map_err(|_| AssistError::Principal {
            t: s.t,
            action: scn.describe(s.turn, a),
        })?;
        let utterance = if s.turn == Agent::Human { pending.take() } else { None };
        rec.step(&s, a, utterance.as_deref(), &next);
        steps.push((s.turn, a));
        match s.turn {
            Agent::Robot => history.push((s, a)),
            Agent::Human if !frozen => {
                let spoke = utterance.is_some();
                match belief.update(&Observation::step(s, a, utterance, next), scorer) {
                    Ok(()) => rec.events.push(TraceEvent::belief(belief.snapshot(next.t))),
                    Err(InferenceError::Score(e)) => return Err(e.into()),
                    Err(e) => rec
                        .events
                        .push(TraceEvent::metric(s.t, "inference_error", json!(e.to_string()))),
                }
                if spoke && cfg.mode != AssistMode::QmdpOnline {
                    frozen = true;
                }
            }
            Agent::Human => {}
        }
        s = next;
    }
    if let Some(i) = pibar.chosen() {
        let h = &belief.hypotheses[i];
        let v = json!({"goal": scn.gems[h.goal.gem].id, "profile": h.goal.profile});
        rec.events.push(TraceEvent::metric(s.t, "pibar_hypothesis", v));
    }
    let success = s.gem_collected(gem);
    let run = EpisodeRun {
        human_cost: human_cost(&profile, &steps),
        robot_options: robot_options(scn, &steps),
        success,
        truncated: !success,
        length: steps.len(),
        steps,
        weight: 1.0,
        phase_one: None,
        command: None,
    };
    rec.events.push(TraceEvent::metric(
        s.t,
        "outcome",
        json!({"success": success, "steps": run.steps.len()}),
    ));
    let snap = belief.snapshot(s.t);
    let p_true_goal = snap.goals.get(&scn.gems[gem].id).copied();
    Ok(Episode {
        mode: cfg.mode,
        events: rec.events,
        runs: vec![run],
        prefix_len: prefix.steps.len(),
        final_belief: Some(snap),
        p_true_goal,
    })
}

fn run_literal(
    scn: &Scenario,
    inference: &InferenceConfig,
    cfg: &AssistConfig,
    prefix: &Prefix,
    scorer: &dyn UtteranceScorer,
) -> Result<Episode, AssistError> {
    let mut rec = Recorder {
        scn,
        events: Vec::new(),
    };
    let s0 = scn.initial_state();
    rec.events.push(TraceEvent::state(scn, &s0));
    for st in &prefix.steps {
        rec.step(&st.prev, st.action, st.utterance.as_deref(), &st.next);
    }
    let s = prefix.end;
    let gem = scn.true_goal;
    let profile = true_profile(scn);
    let grounding = match cfg.mode {
        AssistMode::LiteralNaive => Grounding::Naive,
        _ => Grounding::Lifted,
    };
    let dist = match prefix.last_utterance() {
        Some(u) => literal_infer_commands(u, scn, &s, inference.utterance.max_actions, scorer)?,
        None => Vec::new(),
    };
    let samples: Vec<Option<usize>> = if dist.is_empty() {
        vec![None]
    } else {
        let probs: Vec<f64> = dist.iter().map(|(_, p)| *p).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        systematic_sample(&probs, cfg.samples, &mut rng)
            .into_iter()
            .map(Some)
            .collect()
    };
    let share = 1.0 / samples.len() as f64;
    let mut cache: HashMap<Option<usize>, Vec<EpisodeRun>> = HashMap::new();
    let mut runs = Vec::new();
    for (k, sample) in samples.iter().enumerate() {
        let group = cache.entry(*sample).or_insert_with(|| {
            let command = sample.map(|i| &dist[i].0);
            let formulas = command.map(|c| command_to_goal_formula(c, scn, grounding));
            let goals: Vec<CommandGoal> = match &formulas {
                None => vec![CommandGoal::None],
                Some(Err(_)) => vec![CommandGoal::Unsatisfiable],
                Some(Ok(fs)) if fs.is_empty() => vec![CommandGoal::Unsatisfiable],
                Some(Ok(fs)) => fs.iter().map(CommandGoal::Formula).collect(),
            };
            let n = goals.len() as f64;
            goals
                .into_iter()
                .map(|g| {
                    let lr = literal_assist_plan(scn, &profile, &s, g, gem, cfg.planner_budget);
                    let budget = (s0.t + scn.max_steps).saturating_sub(s.t) as usize;
                    let truncated = !lr.reached_goal || lr.steps.len() > budget;
                    let mut cost = human_cost(&profile, &lr.steps);
                    let mut length = lr.steps.len();
                    if !lr.reached_goal && length < budget {
                        // The principal waits out its remaining turns.
                        let first_human = usize::from(s.turn != Agent::Human) ^ (length % 2);
                        let human_turns = (budget - length + 1 - first_human) / 2;
                        cost += human_turns as f64 * profile.action_cost(Agent::Human, Action::Wait);
                        length = budget;
                    }
                    EpisodeRun {
                        human_cost: cost,
                        length,
                        robot_options: robot_options(scn, &lr.steps),
                        success: lr.reached_goal,
                        truncated,
                        steps: lr.steps,
                        weight: 1.0 / n,
                        phase_one: Some(lr.phase_one),
                        command: command.map(|c| c.to_string()),
                    }
                })
                .collect()
        });
        for r in group.iter() {
            let v = json!({
                "sample": k,
                "command": r.command,
                "phase_one": r.phase_one,
                "options": r.robot_options,
                "steps": r.length,
                "human_cost": r.human_cost,
            });
            rec.events.push(TraceEvent::metric(s.t, "literal_run", v));
            runs.push(EpisodeRun {
                weight: r.weight * share,
                ..r.clone()
            });
        }
    }
    // The trace plays out the first run.
    let mut cur = s;
    let mut pending = prefix.pending_utterance.clone();
    for &(agent, a) in &runs[0].steps {
        debug_assert_eq!(agent, cur.turn);
        let next = scn.apply(&cur, a);
        let utterance = if agent == Agent::Human { pending.take() } else { None };
        rec.step(&cur, a, utterance.as_deref(), &next);
        cur = next;
    }
    rec.events.push(TraceEvent::metric(
        cur.t,
        "outcome",
        json!({"success": runs[0].success, "steps": runs[0].steps.len()}),
    ));
    Ok(Episode {
        mode: cfg.mode,
        events: rec.events,
        runs,
        prefix_len: prefix.steps.len(),
        final_belief: None,
        p_true_goal: None,
    })
}
