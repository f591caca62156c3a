//! Literal-listener baselines: infer a command from the utterance alone,
//! turn it into a goal formula, and plan to satisfy it before the principal
//! finishes on their own.

use crate::env::{Action, Agent, CostProfile, ItemRef, Scenario, State};
use crate::planner::{optimal_plan, GoalFormula, HistoryState, Plan, PlanOutcome, Pred, Restriction, Term};
use crate::utterance::{
    enumerate_commands, logsumexp, robot_salient_actions, Arg, Command, ScoreError, UtteranceScorer, Verb,
};
use rand::Rng;
use serde::Serialize;

/// Posterior over robot-directed commands given only the utterance and the
/// current state, under a uniform prior over the enumerated commands.
pub fn literal_infer_commands(
    utterance: &str,
    scn: &Scenario,
    s: &State,
    max_actions: usize,
    scorer: &dyn UtteranceScorer,
) -> Result<Vec<(Command, f64)>, ScoreError> {
    let commands = enumerate_commands(&robot_salient_actions(scn, s), max_actions);
    if commands.is_empty() {
        return Ok(Vec::new());
    }
    let scores = scorer.score(utterance, &commands)?;
    let z = logsumexp(&scores);
    Ok(commands
        .into_iter()
        .zip(scores)
        .map(|(c, l)| (c, (l - z).exp()))
        .collect())
}

/// Systematic resampling with a given offset `x` in `[0, 1/m)`: items sorted
/// by descending probability (stable), sample `i` lands in the bin holding
/// `i/m + x`. Returns indices into `probs`.
pub fn systematic_sample_at(probs: &[f64], m: usize, x: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut out = Vec::with_capacity(m);
    if order.is_empty() {
        return out;
    }
    let mut j = 0;
    let mut upper = probs[order[0]];
    for i in 0..m {
        let xi = i as f64 / m as f64 + x;
        while xi >= upper && j + 1 < order.len() {
            j += 1;
            upper += probs[order[j]];
        }
        out.push(order[j]);
    }
    out
}

pub fn systematic_sample<R: Rng>(probs: &[f64], m: usize, rng: &mut R) -> Vec<usize> {
    let x = rng.random::<f64>() / m as f64;
    systematic_sample_at(probs, m, x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grounding {
    /// One formula per assignment of objects to the command's variables.
    Naive,
    /// A single existentially quantified formula.
    Lifted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnsatisfiableCommand;

type PredBuilder = fn(Agent, Term) -> Pred;

/// Goal predicates a command asks for. Variables that end up only in color
/// constraints (the key of an unlock) are dropped along with those constraints.
pub fn command_to_goal_formula(
    c: &Command,
    scn: &Scenario,
    grounding: Grounding,
) -> Result<Vec<GoalFormula>, UnsatisfiableCommand> {
    // (predicate builder, argument) pairs before variables are renumbered
    let mut wanted: Vec<(PredBuilder, Agent, Arg)> = Vec::new();
    for a in &c.actions {
        let actor = a.actor.agent();
        match a.verb {
            Verb::PickUp => wanted.push((Pred::PickedUpBy, actor, a.key)),
            Verb::Handover => {
                wanted.push((Pred::PickedUpBy, actor, a.key));
                wanted.push((Pred::Has, actor.other(), a.key));
            }
            Verb::Unlock => {
                if let Some(d) = a.door {
                    wanted.push((|_, t| Pred::Unlocked(t), actor, d));
                }
            }
        }
    }
    let used: Vec<Arg> = c
        .vars()
        .into_iter()
        .filter(|v| wanted.iter().any(|w| w.2 == *v))
        .collect();
    let term = |arg: Arg| match arg {
        Arg::Var(..) => Term::Var(used.iter().position(|u| *u == arg).expect("used var") as u8),
        Arg::Obj(k, o) => Term::Obj(k, o as usize),
    };
    let mut conjuncts: Vec<Pred> = Vec::new();
    for (build, agent, arg) in &wanted {
        let p = build(*agent, term(*arg));
        if !conjuncts.contains(&p) {
            conjuncts.push(p);
        }
    }
    for (arg, color) in &c.colors {
        if matches!(arg, Arg::Obj(..)) || used.contains(arg) {
            conjuncts.push(Pred::IsColor(term(*arg), *color));
        }
    }
    let vars = used
        .iter()
        .map(|v| {
            let n = match v {
                Arg::Var(_, n) | Arg::Obj(_, n) => *n,
            };
            (format!("{}{}", v.kind().as_str(), n + 1), v.kind())
        })
        .collect();
    let formula = GoalFormula { vars, conjuncts };
    if formula.trivially_unsatisfiable(scn) {
        return Err(UnsatisfiableCommand);
    }
    Ok(match grounding {
        Grounding::Lifted => vec![formula],
        Grounding::Naive => formula.groundings(scn),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanFailure {
    Unsatisfiable,
    BudgetExhausted,
}

/// How the command phase went.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PhaseOne {
    NoCommand,
    Unsatisfiable,
    Joint,
    RobotOnly { joint: PlanFailure },
    Failed { joint: PlanFailure, robot: PlanFailure },
}

/// Phase-one target handed to [`literal_assist_plan`].
#[derive(Clone, Copy, Debug)]
pub enum CommandGoal<'a> {
    None,
    Unsatisfiable,
    Formula(&'a GoalFormula),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LiteralRun {
    pub phase_one: PhaseOne,
    /// Phase-one steps followed by the principal's solo completion.
    pub steps: Vec<(Agent, Action)>,
    pub phase_one_len: usize,
    pub reached_goal: bool,
    pub end: State,
}

fn plan_or_fail(
    scn: &Scenario,
    profile: &CostProfile,
    start: &HistoryState,
    goal: &GoalFormula,
    r: Restriction,
    budget: usize,
) -> Result<Plan, PlanFailure> {
    match optimal_plan(scn, profile, start, goal, r, budget) {
        PlanOutcome::Found(p) => Ok(p),
        PlanOutcome::Unsatisfiable => Err(PlanFailure::Unsatisfiable),
        PlanOutcome::BudgetExhausted => Err(PlanFailure::BudgetExhausted),
    }
}

/// Two-phase literal plan from `s`: first a cost-minimal joint plan to the
/// command goal (robot-only if no joint plan is found), then the principal
/// alone collects `gem`.
pub fn literal_assist_plan(
    scn: &Scenario,
    profile: &CostProfile,
    s: &State,
    goal: CommandGoal<'_>,
    gem: usize,
    budget: usize,
) -> LiteralRun {
    let start = HistoryState::new(*s);
    let mut steps = Vec::new();
    let mut cur = *s;
    let take = |p: Plan, steps: &mut Vec<(Agent, Action)>| {
        steps.extend_from_slice(&p.steps);
        p.end.state
    };
    let phase_one = match goal {
        CommandGoal::None => PhaseOne::NoCommand,
        CommandGoal::Unsatisfiable => PhaseOne::Unsatisfiable,
        CommandGoal::Formula(f) => match plan_or_fail(scn, profile, &start, f, Restriction::Joint, budget) {
            Ok(p) => {
                cur = take(p, &mut steps);
                PhaseOne::Joint
            }
            Err(joint) => match plan_or_fail(scn, profile, &start, f, Restriction::RobotOnly, budget) {
                Ok(p) => {
                    cur = take(p, &mut steps);
                    PhaseOne::RobotOnly { joint }
                }
                Err(robot) => PhaseOne::Failed { joint, robot },
            },
        },
    };
    let phase_one_len = steps.len();
    let solo = optimal_plan(
        scn,
        profile,
        &HistoryState::new(cur),
        &GoalFormula::collect_gem(gem),
        Restriction::HumanOnly,
        budget,
    );
    let reached_goal = match solo {
        PlanOutcome::Found(p) => {
            cur = take(p, &mut steps);
            true
        }
        _ => false,
    };
    LiteralRun {
        phase_one,
        steps,
        phase_one_len,
        reached_goal,
        end: cur,
    }
}

/// Key and door ids the robot touched, in order, without repeats.
pub fn robot_options(scn: &Scenario, steps: &[(Agent, Action)]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut push = |id: &str| {
        if !out.iter().any(|x| x == id) {
            out.push(id.to_string());
        }
    };
    for &(agent, a) in steps {
        if agent != Agent::Robot {
            continue;
        }
        match a {
            Action::PickUp(ItemRef::Key(k)) => push(&scn.keys[k as usize].id),
            Action::Unlock { door, .. } => push(&scn.doors[door as usize].id),
            _ => {}
        }
    }
    out
}
