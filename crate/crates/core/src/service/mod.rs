//! Live game sessions for interactive clients and external drivers.
//!
//! A session starts from the scenario's initial state, ignoring its script.
//! Each request carries one human turn (an action plus an optional
//! utterance): the belief is updated, the assistant replies in the configured
//! mode, and every step is appended to the session's event log. The belief is
//! updated after every human turn whatever the mode; offline freezing only
//! makes sense for scripted episodes.
//!
//! [`SessionManager`] holds sessions in memory. Requests on one session are
//! serialized by its lock; different sessions proceed in parallel.

use crate::assistance::{
    command_to_goal_formula, literal_assist_plan, literal_infer_commands, qmdp_action_avoiding, AssistConfig,
    AssistMode, CommandGoal, Grounding, PosteriorSampling, TraceEvent,
};
use crate::env::{Action, Agent, CostProfile, Fingerprint, Scenario, State};
use crate::evaluation::ScenarioPack;
use crate::inference::{Belief, BeliefSnapshot, InferenceConfig, Mode, Observation};
use crate::utterance::UtteranceScorer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ServiceError {
    #[error("unknown session '{0}'")]
    UnknownSession(String),
    #[error("unknown scenario '{0}'")]
    UnknownScenario(String),
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error("illegal action: {message}")]
    IllegalAction { message: String, legal: Vec<String> },
    #[error("not the human's turn: the game is at t={current}, the request was for t={requested}")]
    OutOfTurn { current: u32, requested: u32 },
    #[error("the game is over")]
    Terminal,
    #[error("engine failure: {0}")]
    Engine(String),
}

impl ServiceError {
    /// HTTP status for the wire protocol.
    pub fn status(&self) -> u16 {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownScenario(_) => 404,
            ServiceError::BadRequest(_) => 400,
            ServiceError::OutOfTurn { .. } | ServiceError::Terminal => 409,
            ServiceError::Scenario(_) | ServiceError::IllegalAction { .. } => 422,
            ServiceError::Engine(_) => 500,
        }
    }
}

/// Where a new session's scenario comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    /// A scenario of the bundled pack.
    Name(String),
    /// Scenario file contents.
    Inline(serde_json::Value),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub assist: AssistConfig,
    /// Which evidence the belief uses.
    pub inference: Mode,
}

impl SessionConfig {
    pub fn inference_config(&self) -> InferenceConfig {
        InferenceConfig::default().with_mode(self.inference)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireAction {
    pub action: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub scenario: String,
    pub mode: AssistMode,
    pub state: TraceEvent,
    pub belief: TraceEvent,
    pub events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TurnResult {
    /// State after the human's action.
    pub human_state: TraceEvent,
    /// `None` when the human's action ended the game.
    pub robot_action: Option<TraceEvent>,
    /// State after the assistant's reply.
    pub state: TraceEvent,
    pub belief: TraceEvent,
    /// Wall-clock time spent choosing the assistant's action.
    pub planner_ms: f64,
    pub terminal: bool,
    /// Log index of the first event this turn appended.
    pub first_event: usize,
}

/// One live game.
pub struct Session {
    pub id: String,
    pub scenario: Scenario,
    pub config: SessionConfig,
    state: State,
    belief: Belief,
    events: Vec<TraceEvent>,
    rng: ChaCha8Rng,
    pibar: PosteriorSampling,
    tried: HashMap<Fingerprint, Vec<Action>>,
    /// Remaining robot actions of a literal plan.
    literal_queue: VecDeque<Action>,
    scorer: Arc<dyn UtteranceScorer>,
}

impl Session {
    pub fn new(
        id: String,
        scenario: Scenario,
        config: SessionConfig,
        scorer: Arc<dyn UtteranceScorer>,
    ) -> Result<Session, ServiceError> {
        config.assist.validate().map_err(ServiceError::BadRequest)?;
        let state = scenario.initial_state();
        let mut belief =
            Belief::init(&scenario, &config.inference_config()).map_err(|e| ServiceError::Engine(e.to_string()))?;
        for h in &mut belief.hypotheses {
            h.policy.set_config(config.assist.planner());
        }
        let events = vec![
            TraceEvent::state(&scenario, &state),
            TraceEvent::belief(belief.snapshot(state.t)),
        ];
        let mut session = Session {
            id,
            rng: ChaCha8Rng::seed_from_u64(config.assist.seed),
            scenario,
            config,
            state,
            belief,
            events,
            pibar: PosteriorSampling::new(),
            tried: HashMap::new(),
            literal_queue: VecDeque::new(),
            scorer,
        };
        if session.state.turn == Agent::Robot && !session.is_terminal() {
            session.robot_turn()?;
        }
        Ok(session)
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn belief(&self) -> BeliefSnapshot {
        self.belief.snapshot(self.state.t)
    }

    /// A goal gem has been collected or the step limit reached.
    pub fn is_terminal(&self) -> bool {
        let s = &self.state;
        self.scenario.goals.iter().any(|&g| s.gem_collected(g))
            || s.t >= self.scenario.initial_state().t + self.scenario.max_steps
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            scenario: self.scenario.name.clone(),
            mode: self.config.assist.mode,
            state: TraceEvent::state(&self.scenario, &self.state),
            belief: TraceEvent::belief(self.belief()),
            events: self.events.len(),
        }
    }

    fn legal_wire(&self) -> Vec<String> {
        self.scenario
            .legal_actions(&self.state, Agent::Human)
            .into_iter()
            .map(|a| self.scenario.describe(Agent::Human, a))
            .collect()
    }

    /// Apply a human turn and the assistant's reply. A client may pass the
    /// step `t` it believes the human is acting at; a stale one is refused.
    pub fn post_human_turn(
        &mut self,
        action: &WireAction,
        utterance: Option<&str>,
        t: Option<u32>,
    ) -> Result<TurnResult, ServiceError> {
        if self.is_terminal() {
            return Err(ServiceError::Terminal);
        }
        if let Some(requested) = t.filter(|&t| t != self.state.t) {
            return Err(ServiceError::OutOfTurn {
                current: self.state.t,
                requested,
            });
        }
        debug_assert_eq!(
            self.state.turn,
            Agent::Human,
            "the assistant replies within each request"
        );
        let illegal = |message: String| ServiceError::IllegalAction {
            message,
            legal: self.legal_wire(),
        };
        let a = self
            .scenario
            .action_from_wire(Agent::Human, &action.action, &action.args)
            .map_err(|e| illegal(e.to_string()))?;
        let next = self
            .scenario
            .step_action(&self.state, a)
            .map_err(|e| illegal(e.to_string()))?;
        let utterance = utterance.map(str::trim).filter(|u| !u.is_empty()).map(str::to_string);

        // Score first so a scorer failure leaves the session untouched.
        let prev = self.state;
        let mut belief = self.belief.clone();
        belief
            .update(
                &Observation::step(prev, a, utterance.clone(), next),
                self.scorer.as_ref(),
            )
            .map_err(|e| ServiceError::Engine(e.to_string()))?;
        let first_event = self.events.len();
        self.belief = belief;
        if let Some(u) = &utterance {
            self.events.push(TraceEvent::Utterance {
                t: prev.t,
                text: u.clone(),
            });
            if self.config.assist.mode.is_literal() {
                self.plan_literal(u, &next);
            }
        }
        self.events
            .push(TraceEvent::action(&self.scenario, prev.t, Agent::Human, a));
        self.state = next;
        let human_state = TraceEvent::state(&self.scenario, &next);
        self.events.push(human_state.clone());
        let belief_event = TraceEvent::belief(self.belief());
        self.events.push(belief_event.clone());

        let (robot_action, planner_ms) = match self.is_terminal() {
            true => (None, 0.0),
            false => {
                let (ev, ms) = self.robot_turn()?;
                (Some(ev), ms)
            }
        };
        Ok(TurnResult {
            human_state,
            robot_action,
            state: TraceEvent::state(&self.scenario, &self.state),
            belief: belief_event,
            planner_ms,
            terminal: self.is_terminal(),
            first_event,
        })
    }

    /// Choose, apply and log the assistant's action.
    fn robot_turn(&mut self) -> Result<(TraceEvent, f64), ServiceError> {
        let t0 = Instant::now();
        let r = self.robot_choice();
        let planner_ms = t0.elapsed().as_secs_f64() * 1e3;
        let s = self.state;
        let after = self
            .scenario
            .step_action(&s, r)
            .map_err(|e| ServiceError::Engine(e.to_string()))?;
        let ev = TraceEvent::action(&self.scenario, s.t, Agent::Robot, r);
        self.events.push(ev.clone());
        self.events.push(TraceEvent::state(&self.scenario, &after));
        self.events
            .push(TraceEvent::metric(s.t, "planner_ms", serde_json::json!(planner_ms)));
        self.state = after;
        Ok((ev, planner_ms))
    }

    fn robot_choice(&mut self) -> Action {
        let s = self.state;
        match self.config.assist.mode {
            AssistMode::Pibar => self.pibar.action(&mut self.belief, &s, &mut self.rng),
            AssistMode::QmdpOffline | AssistMode::QmdpOnline => {
                let legal = self.scenario.legal_actions(&s, Agent::Robot).len();
                let done = self.tried.entry(s.fingerprint()).or_default();
                if done.len() >= legal {
                    done.clear();
                }
                let choice = qmdp_action_avoiding(&mut self.belief, &s, self.config.assist.weight_threshold, done);
                done.push(choice.action);
                choice.action
            }
            AssistMode::LiteralNaive | AssistMode::LiteralEfficient => match self.literal_queue.front() {
                Some(&a) if self.scenario.check_action(&s, Agent::Robot, a).is_ok() => {
                    self.literal_queue.pop_front();
                    a
                }
                _ => Action::Wait,
            },
        }
    }

    /// Replace the literal plan with the robot's part of the plan for the most
    /// likely command.
    fn plan_literal(&mut self, utterance: &str, s: &State) {
        self.literal_queue.clear();
        let scn = &self.scenario;
        let max = self.config.inference_config().utterance.max_actions;
        let Ok(dist) = literal_infer_commands(utterance, scn, s, max, self.scorer.as_ref()) else {
            return;
        };
        let Some((command, _)) = dist.into_iter().next() else {
            return;
        };
        let grounding = match self.config.assist.mode {
            AssistMode::LiteralNaive => Grounding::Naive,
            _ => Grounding::Lifted,
        };
        let Ok(formulas) = command_to_goal_formula(&command, scn, grounding) else {
            return;
        };
        let Some(f) = formulas.first() else { return };
        let profile =
            CostProfile::bundled(scn.true_profile).unwrap_or_else(|| CostProfile::bundled(0).expect("profile 0"));
        let run = literal_assist_plan(
            scn,
            &profile,
            s,
            CommandGoal::Formula(f),
            scn.true_goal,
            self.config.assist.planner_budget,
        );
        self.literal_queue = run.steps[..run.phase_one_len]
            .iter()
            .filter(|(agent, a)| *agent == Agent::Robot && *a != Action::Wait)
            .map(|&(_, a)| a)
            .collect();
    }

    /// Human turns recorded in the log, in order.
    pub fn human_turns(&self) -> Vec<(WireAction, Option<String>)> {
        human_turns(&self.events)
    }
}

/// Extract (action, utterance) pairs from an event log.
pub fn human_turns(events: &[TraceEvent]) -> Vec<(WireAction, Option<String>)> {
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for e in events {
        match e {
            TraceEvent::Utterance { text, .. } => pending = Some(text.clone()),
            TraceEvent::HumanAction { action, args, .. } => {
                out.push((
                    WireAction {
                        action: action.clone(),
                        args: args.clone(),
                    },
                    pending.take(),
                ));
            }
            _ => {}
        }
    }
    out
}

/// In-memory session store.
pub struct SessionManager {
    sessions: RwLock<BTreeMap<String, Arc<Mutex<Session>>>>,
    scenarios: BTreeMap<String, Scenario>,
    scorer: Arc<dyn UtteranceScorer>,
    counter: AtomicU64,
    salt: u64,
}

impl SessionManager {
    /// Serve the bundled pack's scenarios by name.
    pub fn new(scorer: Arc<dyn UtteranceScorer>) -> SessionManager {
        let scenarios = ScenarioPack::bundled()
            .scenarios
            .into_iter()
            .map(|p| (p.scenario.name.clone(), p.scenario));
        SessionManager::with_scenarios(scorer, scenarios)
    }

    pub fn with_scenarios(
        scorer: Arc<dyn UtteranceScorer>,
        scenarios: impl IntoIterator<Item = (String, Scenario)>,
    ) -> SessionManager {
        SessionManager {
            sessions: RwLock::new(BTreeMap::new()),
            scenarios: scenarios.into_iter().collect(),
            scorer,
            counter: AtomicU64::new(0),
            salt: rand::random(),
        }
    }

    pub fn scenario_names(&self) -> Vec<String> {
        self.scenarios.keys().cloned().collect()
    }

    pub fn scenario(&self, name: &str) -> Option<&Scenario> {
        self.scenarios.get(name)
    }

    pub fn create(&self, source: &ScenarioSource, config: SessionConfig) -> Result<SessionSummary, ServiceError> {
        let scenario = match source {
            ScenarioSource::Name(n) => self
                .scenarios
                .get(n)
                .cloned()
                .ok_or_else(|| ServiceError::UnknownScenario(n.clone()))?,
            ScenarioSource::Inline(v) => {
                Scenario::parse(&v.to_string()).map_err(|e| ServiceError::Scenario(e.to_string()))?
            }
        };
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let id = format!(
            "{:08x}{:04x}",
            (self.salt ^ n.wrapping_mul(0x9e37_79b9_7f4a_7c15)) as u32,
            n & 0xffff
        );
        let session = Session::new(id.clone(), scenario, config, self.scorer.clone())?;
        let summary = session.summary();
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id, Arc::new(Mutex::new(session)));
        Ok(summary)
    }

    pub fn get(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    pub fn post_human_turn(
        &self,
        id: &str,
        action: &WireAction,
        utterance: Option<&str>,
        t: Option<u32>,
    ) -> Result<TurnResult, ServiceError> {
        let s = self.get(id)?;
        let mut s = s.lock().expect("session lock");
        s.post_human_turn(action, utterance, t)
    }

    pub fn belief(&self, id: &str) -> Result<TraceEvent, ServiceError> {
        let s = self.get(id)?;
        let s = s.lock().expect("session lock");
        Ok(TraceEvent::belief(s.belief()))
    }

    /// Events from log index `from` on, with their indices.
    pub fn events_from(&self, id: &str, from: usize) -> Result<Vec<(usize, TraceEvent)>, ServiceError> {
        let s = self.get(id)?;
        let s = s.lock().expect("session lock");
        Ok(s.events
            .iter()
            .enumerate()
            .skip(from)
            .map(|(i, e)| (i, e.clone()))
            .collect())
    }

    pub fn remove(&self, id: &str) -> bool {
        self.sessions.write().expect("session map lock").remove(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.sessions.read().expect("session map lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
