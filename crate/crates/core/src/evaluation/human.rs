//! Simulated principal. It follows a ground-truth plan while it can, then the
//! joint policy for its own goal, and gives up on the assistant once the
//! assistant looks more like a random agent than a helpful one.

use crate::assistance::Principal;
use crate::env::{Action, Agent, GoalSpec, Scenario, State};
use crate::planner::{optimal_plan, Domain, GoalFormula, HistoryState, PlannerConfig, PolicyHandle, Restriction};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum HumanMode {
    Scripted,
    Joint,
    Fallback,
}

#[derive(Clone, Debug)]
pub struct SimulatedHuman {
    domain: Arc<Domain>,
    plan: Vec<Action>,
    cursor: usize,
    joint: PolicyHandle,
    solo: PolicyHandle,
    mode: HumanMode,
    /// Cumulative log of P(robot actions | random) / P(robot actions | joint policy).
    log_ratio: f64,
    seen: usize,
    pub ratio_threshold: f64,
    pub beta: f64,
    /// Step at which each mode switch happened.
    pub switches: Vec<(u32, HumanMode)>,
}

impl SimulatedHuman {
    /// Principal for the scenario's true goal and profile, planning from `start`.
    pub fn new(scn: &Scenario, start: &State, budget: usize) -> SimulatedHuman {
        let domain = Arc::new(Domain::new(scn.clone()));
        let goal = scn.true_goal_spec();
        let plan = ground_truth_plan(scn, goal, start, budget);
        SimulatedHuman::with_plan(domain, goal, plan)
    }

    pub fn with_plan(domain: Arc<Domain>, goal: GoalSpec, plan: Vec<Action>) -> SimulatedHuman {
        let joint = PolicyHandle::new(domain.clone(), goal, PlannerConfig::inference());
        let solo = PolicyHandle::new(
            domain.clone(),
            goal,
            PlannerConfig::inference().with_restriction(Restriction::HumanOnly),
        );
        SimulatedHuman {
            domain,
            plan,
            cursor: 0,
            joint,
            solo,
            mode: HumanMode::Scripted,
            log_ratio: 0.0,
            seen: 0,
            ratio_threshold: 10.0,
            beta: 1.0,
            switches: Vec::new(),
        }
    }

    pub fn mode(&self) -> HumanMode {
        self.mode
    }

    /// Current likelihood ratio of the random-assistant explanation.
    pub fn ratio(&self) -> f64 {
        self.log_ratio.exp()
    }

    pub fn plan(&self) -> &[Action] {
        &self.plan
    }

    fn switch(&mut self, t: u32, mode: HumanMode) {
        if mode > self.mode {
            self.mode = mode;
            self.switches.push((t, mode));
        }
    }

    /// Fold newly observed assistant actions into the deviation ratio.
    pub fn observe(&mut self, history: &[(State, Action)]) {
        let domain = self.domain.clone();
        let scn = &domain.scenario;
        for &(s, a) in &history[self.seen.min(history.len())..] {
            self.joint.update(&s);
            let p_joint = self
                .joint
                .boltzmann(&s, self.beta)
                .into_iter()
                .find(|(b, _)| *b == a)
                .map_or(0.0, |(_, p)| p);
            let p_random = 1.0 / scn.legal_actions(&s, Agent::Robot).len() as f64;
            self.log_ratio += p_random.ln() - p_joint.ln();
            if self.log_ratio >= self.ratio_threshold.ln() {
                self.switch(s.t, HumanMode::Fallback);
            }
        }
        self.seen = history.len();
    }
}

impl Principal for SimulatedHuman {
    fn act(&mut self, s: &State, robot_history: &[(State, Action)]) -> Action {
        self.observe(robot_history);
        let domain = self.domain.clone();
        let scn = &domain.scenario;
        if self.mode == HumanMode::Scripted {
            match self.plan.get(self.cursor) {
                Some(&a) if scn.check_action(s, Agent::Human, a).is_ok() => {
                    self.cursor += 1;
                    return a;
                }
                _ => self.switch(s.t, HumanMode::Joint),
            }
        }
        let policy = match self.mode {
            HumanMode::Fallback => &mut self.solo,
            _ => &mut self.joint,
        };
        policy.update(s);
        policy.greedy_action(s)
    }
}

/// Human half of a cost-minimal joint plan to the goal gem from `start`.
/// Empty if no plan is found within `budget`.
pub fn ground_truth_plan(scn: &Scenario, goal: GoalSpec, start: &State, budget: usize) -> Vec<Action> {
    let Some(profile) = crate::env::CostProfile::bundled(goal.profile) else {
        return Vec::new();
    };
    let out = optimal_plan(
        scn,
        &profile,
        &HistoryState::new(*start),
        &GoalFormula::collect_gem(goal.gem),
        Restriction::Joint,
        budget,
    );
    out.plan()
        .map(|p| {
            p.steps
                .iter()
                .filter(|(g, _)| *g == Agent::Human)
                .map(|&(_, a)| a)
                .collect()
        })
        .unwrap_or_default()
}
