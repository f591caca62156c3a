use super::domain::Domain;
use super::heuristic::{lower_bound, BoundCosts};
use crate::env::{Action, Agent, CostProfile, Fingerprint, GoalSpec, ItemRef, RuleError, State, COST_SCALE};
use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Which agents may act in a planner's model of the game.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Restriction {
    #[default]
    Joint,
    /// The robot only waits.
    HumanOnly,
    /// The human only waits.
    RobotOnly,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Maximum node expansions per search.
    pub node_budget: usize,
    /// Wall-clock cap for one policy update.
    pub time_limit: Option<Duration>,
    /// Skip actions that cannot help reach the goal (useless keys, other gems).
    pub prune_irrelevant: bool,
    pub restriction: Restriction,
}

impl PlannerConfig {
    pub fn inference() -> PlannerConfig {
        PlannerConfig {
            node_budget: 1 << 18,
            time_limit: None,
            prune_irrelevant: true,
            restriction: Restriction::Joint,
        }
    }

    pub fn assistance() -> PlannerConfig {
        PlannerConfig {
            node_budget: 1 << 16,
            time_limit: Some(Duration::from_secs(10)),
            prune_irrelevant: true,
            restriction: Restriction::Joint,
        }
    }

    pub fn with_budget(mut self, budget: usize) -> PlannerConfig {
        self.node_budget = budget.max(1);
        self
    }

    pub fn with_restriction(mut self, r: Restriction) -> PlannerConfig {
        self.restriction = r;
        self
    }
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig::inference()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PlannerStats {
    pub updates: u64,
    pub searches: u64,
    pub expansions: u64,
    /// Searches that stopped on a state of an already known cost-minimal path.
    pub reuse_hits: u64,
    pub goal_hits: u64,
    pub budget_stops: u64,
    pub dead_ends: u64,
}

/// Deterministic additive noise on robot-turn Q-values, applied only when
/// computing action probabilities. Used to probe how sensitive inference is to
/// the modelled assistant behaviour.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobotQNoise {
    pub amplitude: f64,
    pub seed: u64,
}

impl RobotQNoise {
    fn offset(&self, s: &State, a: Action) -> f64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        (self.seed, s.fingerprint(), a).hash(&mut h);
        self.amplitude * (h.finish() >> 11) as f64 / (1u64 << 53) as f64
    }
}

/// One goal hypothesis's joint policy: an incrementally refined value table
/// searched by real-time adaptive A*, plus cached cost-minimal paths.
#[derive(Clone, Debug)]
pub struct PolicyHandle {
    domain: Arc<Domain>,
    goal: GoalSpec,
    profile: CostProfile,
    costs: BoundCosts,
    config: PlannerConfig,
    /// Learned cost-to-go, in cost tenths.
    values: HashMap<Fingerprint, f64>,
    heuristic_cache: HashMap<Fingerprint, f64>,
    /// States on a known cost-minimal path to the goal, with the next action
    /// on it (`None` at the goal itself).
    exact: HashMap<Fingerprint, Option<Action>>,
    stats: PlannerStats,
    noise: Option<RobotQNoise>,
}

struct Node {
    state: State,
    g: f64,
    parent: u32,
    action: Action,
    closed: bool,
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    idx: u32,
}

impl Eq for Open {}

impl Ord for Open {
    // BinaryHeap is a max-heap: smallest f first, then deepest g, then oldest.
    fn cmp(&self, o: &Self) -> Ordering {
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

enum Stop {
    /// Reached the goal or a state with a known cost-minimal path.
    Path(u32),
    Frontier(u32),
    Exhausted,
}

const NO_PARENT: u32 = u32::MAX;

impl PolicyHandle {
    pub fn new(domain: Arc<Domain>, goal: GoalSpec, config: PlannerConfig) -> PolicyHandle {
        let profile = CostProfile::bundled(goal.profile).expect("goal profile is validated by the scenario");
        PolicyHandle::with_profile(domain, goal, profile, config)
    }

    pub fn with_profile(
        domain: Arc<Domain>,
        goal: GoalSpec,
        profile: CostProfile,
        config: PlannerConfig,
    ) -> PolicyHandle {
        PolicyHandle {
            costs: BoundCosts::new(&profile),
            domain,
            goal,
            profile,
            config,
            values: HashMap::new(),
            heuristic_cache: HashMap::new(),
            exact: HashMap::new(),
            stats: PlannerStats::default(),
            noise: None,
        }
    }

    pub fn goal(&self) -> GoalSpec {
        self.goal
    }

    pub fn profile(&self) -> &CostProfile {
        &self.profile
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn set_config(&mut self, config: PlannerConfig) {
        self.config = config;
    }

    pub fn domain(&self) -> &Arc<Domain> {
        &self.domain
    }

    pub fn stats(&self) -> PlannerStats {
        self.stats
    }

    pub fn table_size(&self) -> usize {
        self.values.len()
    }

    pub fn set_robot_q_noise(&mut self, noise: Option<RobotQNoise>) {
        self.noise = noise;
    }

    pub fn is_goal(&self, s: &State) -> bool {
        s.gem_collected(self.goal.gem)
    }

    /// Heuristic lower bound at `s`, in game cost units.
    pub fn heuristic(&self, s: &State) -> f64 {
        self.h_units(s) / COST_SCALE
    }

    /// Current value estimate at `s`, in game cost units.
    pub fn value(&self, s: &State) -> f64 {
        self.v_units(s) / COST_SCALE
    }

    fn h_units(&self, s: &State) -> f64 {
        let fp = s.fingerprint();
        match self.heuristic_cache.get(&fp) {
            Some(&h) => h,
            None => lower_bound(&self.domain, &self.costs, s, self.goal.gem),
        }
    }

    fn h_units_cached(&mut self, s: &State) -> f64 {
        let fp = s.fingerprint();
        if let Some(&h) = self.heuristic_cache.get(&fp) {
            return h;
        }
        let h = lower_bound(&self.domain, &self.costs, s, self.goal.gem);
        self.heuristic_cache.insert(fp, h);
        h
    }

    fn v_units(&self, s: &State) -> f64 {
        if self.is_goal(s) {
            return 0.0;
        }
        match self.values.get(&s.fingerprint()) {
            Some(&v) => v,
            None => self.h_units(s),
        }
    }

    fn v_units_cached(&mut self, s: &State) -> f64 {
        if self.is_goal(s) {
            return 0.0;
        }
        match self.values.get(&s.fingerprint()) {
            Some(&v) => v,
            None => self.h_units_cached(s),
        }
    }

    fn raise(&mut self, s: &State, v: f64) {
        let cur = self.v_units_cached(s);
        if v > cur {
            self.values.insert(s.fingerprint(), v);
        } else {
            self.values.entry(s.fingerprint()).or_insert(cur);
        }
    }

    /// Actions available to the acting agent in this planner's model.
    pub fn actions(&self, s: &State) -> Vec<Action> {
        let mut out = Vec::with_capacity(8);
        self.actions_into(s, &mut out);
        out
    }

    fn actions_into(&self, s: &State, out: &mut Vec<Action>) {
        let waits_only = matches!(
            (self.config.restriction, s.turn),
            (Restriction::HumanOnly, Agent::Robot) | (Restriction::RobotOnly, Agent::Human)
        );
        if waits_only {
            out.clear();
            out.push(Action::Wait);
        } else {
            self.domain.scenario.legal_actions_into(s, s.turn, out);
        }
    }

    fn irrelevant(&self, s: &State, a: Action) -> bool {
        let scn = &self.domain.scenario;
        let useless_key = |k: u8| self.domain.doors_of_color(scn.key_color(k as usize)) & s.locked == 0;
        match a {
            Action::PickUp(ItemRef::Gem(g)) => g as usize != self.goal.gem,
            Action::PickUp(ItemRef::Key(k)) | Action::Handover { key: k } => useless_key(k),
            _ => false,
        }
    }

    fn cost_units(&self, s: &State, a: Action) -> f64 {
        self.profile.action_units(s.turn, a) as f64
    }

    fn q_units(&self, s: &State, a: Action) -> f64 {
        self.cost_units(s, a) + self.v_units(&self.domain.scenario.apply(s, a))
    }

    /// Q̂(s, a) = cost of the acting agent's action + V̂(successor), in game units.
    pub fn q_value(&self, s: &State, a: Action) -> Result<f64, RuleError> {
        self.domain.scenario.check_action(s, s.turn, a)?;
        Ok(self.q_units(s, a) / COST_SCALE)
    }

    /// Q̂ for a joint action; the idle agent must wait.
    pub fn q_joint(&self, s: &State, a_h: Action, a_r: Action) -> Result<f64, RuleError> {
        let (acting, idle) = match s.turn {
            Agent::Human => (a_h, a_r),
            Agent::Robot => (a_r, a_h),
        };
        if idle != Action::Wait {
            return Err(RuleError::IdleMustWait);
        }
        self.q_value(s, acting)
    }

    /// Q̂ for every available action of the acting agent, in game units.
    pub fn q_values(&self, s: &State) -> Vec<(Action, f64)> {
        self.actions(s)
            .into_iter()
            .map(|a| (a, self.q_units(s, a) / COST_SCALE))
            .collect()
    }

    /// Boltzmann distribution over the acting agent's actions,
    /// P(a) ∝ exp(−β·Q̂(s,a)). Uniform if every action is a dead end.
    pub fn boltzmann(&self, s: &State, beta: f64) -> Vec<(Action, f64)> {
        let mut qs = self.q_values(s);
        if let (Some(noise), Agent::Robot) = (self.noise, s.turn) {
            for (a, q) in qs.iter_mut() {
                *q += noise.offset(s, *a);
            }
        }
        let probs = boltzmann_probs(&qs.iter().map(|(_, q)| *q).collect::<Vec<_>>(), beta);
        qs.into_iter().zip(probs).map(|((a, _), p)| (a, p)).collect()
    }

    /// Lowest-Q̂ action (first in tie-break order), or `Wait` at a dead end.
    pub fn greedy_action(&self, s: &State) -> Action {
        let mut best = (Action::Wait, f64::INFINITY);
        for a in self.actions(s) {
            let q = self.q_units(s, a);
            if q < best.1 {
                best = (a, q);
            }
        }
        best.0
    }

    /// Follow cached cost-minimal steps from `s` to the goal, if known.
    pub fn reused_path(&self, s: &State) -> Option<Vec<Action>> {
        let mut out = Vec::new();
        let mut cur = *s;
        while !self.is_goal(&cur) {
            let next = (*self.exact.get(&cur.fingerprint())?)?;
            out.push(next);
            cur = self.domain.scenario.apply(&cur, next);
            if out.len() > 100_000 {
                return None;
            }
        }
        Some(out)
    }

    /// Greedy rollout from `s`: refine at each visited state, take the argmin
    /// action, stop at the goal or after `horizon` steps.
    pub fn rollout(&mut self, s: &State, horizon: usize) -> Vec<(Agent, Action)> {
        let mut out = Vec::new();
        let mut cur = *s;
        while out.len() < horizon && !self.is_goal(&cur) {
            self.update(&cur);
            let a = self.greedy_action(&cur);
            out.push((cur.turn, a));
            cur = self.domain.scenario.apply(&cur, a);
        }
        out
    }

    /// One real-time update at `s`: bounded A* from every successor of `s`,
    /// raising the values of all expanded states, then a one-step backup at `s`.
    pub fn update(&mut self, s: &State) {
        self.stats.updates += 1;
        if self.is_goal(s) {
            self.values.insert(s.fingerprint(), 0.0);
            self.exact.insert(s.fingerprint(), None);
            return;
        }
        let deadline = self.config.time_limit.map(|d| Instant::now() + d);
        let actions = self.actions(s);
        for &a in &actions {
            let n = self.domain.scenario.apply(s, a);
            self.search_from(n, deadline);
        }
        // One-step backup; if the best successor lies on a known cost-minimal
        // path, `s` joins it.
        let mut best = (Action::Wait, f64::INFINITY);
        for &a in &actions {
            let q = self.q_units(s, a);
            if q < best.1 {
                best = (a, q);
            }
        }
        self.raise(s, best.1);
        if best.1.is_finite() {
            let n = self.domain.scenario.apply(s, best.0);
            if self.is_goal(&n) || self.exact.contains_key(&n.fingerprint()) {
                self.exact.insert(s.fingerprint(), Some(best.0));
            }
        }
    }

    fn search_from(&mut self, start: State, deadline: Option<Instant>) {
        let start_fp = start.fingerprint();
        if self.is_goal(&start) {
            self.values.insert(start_fp, 0.0);
            self.exact.insert(start_fp, None);
            return;
        }
        if self.exact.contains_key(&start_fp) {
            self.stats.reuse_hits += 1;
            return;
        }
        let h0 = self.v_units_cached(&start);
        if h0.is_infinite() {
            return;
        }
        self.stats.searches += 1;

        let mut nodes = vec![Node {
            state: start,
            g: 0.0,
            parent: NO_PARENT,
            action: Action::Wait,
            closed: false,
        }];
        let mut index: HashMap<Fingerprint, u32> = HashMap::new();
        index.insert(start_fp, 0);
        let mut open = BinaryHeap::new();
        open.push(Open { f: h0, g: 0.0, idx: 0 });
        let mut closed: Vec<u32> = Vec::new();
        let mut expansions = 0usize;
        let mut acts = Vec::with_capacity(8);

        let stop = loop {
            let Some(top) = open.pop() else {
                break Stop::Exhausted;
            };
            let node = &nodes[top.idx as usize];
            if node.closed || top.g > node.g || top.f.is_infinite() {
                continue;
            }
            let state = node.state;
            let fp = state.fingerprint();
            if self.is_goal(&state) || self.exact.contains_key(&fp) {
                break Stop::Path(top.idx);
            }
            let out_of_time = deadline.is_some_and(|d| expansions % 256 == 0 && Instant::now() >= d);
            if expansions >= self.config.node_budget || out_of_time {
                break Stop::Frontier(top.idx);
            }
            nodes[top.idx as usize].closed = true;
            closed.push(top.idx);
            expansions += 1;
            let g = top.g;
            self.actions_into(&state, &mut acts);
            for &a in &acts {
                if self.config.prune_irrelevant && self.irrelevant(&state, a) {
                    continue;
                }
                let next = self.domain.scenario.apply(&state, a);
                let g2 = g + self.cost_units(&state, a);
                let nfp = next.fingerprint();
                match index.get(&nfp) {
                    Some(&i) => {
                        let n = &mut nodes[i as usize];
                        if g2 < n.g {
                            n.g = g2;
                            n.parent = top.idx;
                            n.action = a;
                            n.closed = false;
                            let v = self.v_units_cached(&next);
                            open.push(Open {
                                f: g2 + v,
                                g: g2,
                                idx: i,
                            });
                        }
                    }
                    None => {
                        let v = self.v_units_cached(&next);
                        if v.is_infinite() {
                            continue;
                        }
                        let i = nodes.len() as u32;
                        nodes.push(Node {
                            state: next,
                            g: g2,
                            parent: top.idx,
                            action: a,
                            closed: false,
                        });
                        index.insert(nfp, i);
                        open.push(Open {
                            f: g2 + v,
                            g: g2,
                            idx: i,
                        });
                    }
                }
            }
        };
        self.stats.expansions += expansions as u64;

        match stop {
            Stop::Exhausted => {
                self.stats.dead_ends += 1;
                for &i in &closed {
                    self.values.insert(nodes[i as usize].state.fingerprint(), f64::INFINITY);
                }
            }
            Stop::Frontier(idx) | Stop::Path(idx) => {
                let end = &nodes[idx as usize];
                let f_star = end.g + self.v_units_cached(&end.state);
                for &i in &closed {
                    let n = &nodes[i as usize];
                    let (st, g) = (n.state, n.g);
                    self.raise(&st, f_star - g);
                }
                match stop {
                    Stop::Path(_) => {
                        if self.is_goal(&nodes[idx as usize].state) {
                            self.stats.goal_hits += 1;
                            self.exact.insert(nodes[idx as usize].state.fingerprint(), None);
                        } else {
                            self.stats.reuse_hits += 1;
                        }
                        let mut child = idx;
                        while nodes[child as usize].parent != NO_PARENT {
                            let parent = nodes[child as usize].parent;
                            let (pst, pg) = (nodes[parent as usize].state, nodes[parent as usize].g);
                            let fp = pst.fingerprint();
                            self.values.insert(fp, f_star - pg);
                            self.exact.insert(fp, Some(nodes[child as usize].action));
                            child = parent;
                        }
                    }
                    _ => self.stats.budget_stops += 1,
                }
            }
        }
    }
}

/// Softmax of −β·q with max-subtraction; uniform if every q is infinite.
pub fn boltzmann_probs(qs: &[f64], beta: f64) -> Vec<f64> {
    let qmin = qs.iter().copied().fold(f64::INFINITY, f64::min);
    if qs.is_empty() {
        return Vec::new();
    }
    if qmin.is_infinite() {
        return vec![1.0 / qs.len() as f64; qs.len()];
    }
    let ws: Vec<f64> = qs
        .iter()
        .map(|&q| if q.is_finite() { (-beta * (q - qmin)).exp() } else { 0.0 })
        .collect();
    let z: f64 = ws.iter().sum();
    ws.into_iter().map(|w| w / z).collect()
}
