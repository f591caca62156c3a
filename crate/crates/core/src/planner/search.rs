//! Exact best-first search to a goal formula. Used by the literal
//! baselines, the simulated human and tests. Formulas that require a gem to be
//! collected are searched with the admissible joint-cost bound; others fall
//! back to uniform cost.

use super::domain::Domain;
use super::formula::{GoalFormula, HistoryState, Pred, Term};
use super::heuristic::{lower_bound, BoundCosts};
use super::policy::Restriction;
use crate::env::{Action, Agent, CostProfile, ItemKind, ItemRef, Scenario, COST_SCALE};
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub steps: Vec<(Agent, Action)>,
    /// Total cost in game units.
    pub cost: f64,
    pub end: HistoryState,
}

impl Plan {
    pub fn cost_units(&self) -> u64 {
        (self.cost * COST_SCALE).round() as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanOutcome {
    Found(Plan),
    /// The whole reachable space was searched without satisfying the formula.
    Unsatisfiable,
    BudgetExhausted,
}

impl PlanOutcome {
    pub fn plan(&self) -> Option<&Plan> {
        match self {
            PlanOutcome::Found(p) => Some(p),
            _ => None,
        }
    }
}

/// Record a pick-up in the history masks before applying it.
pub fn advance(scn: &Scenario, hs: &HistoryState, a: Action) -> HistoryState {
    let mut next = HistoryState {
        state: scn.apply(&hs.state, a),
        ..*hs
    };
    if let Action::PickUp(ItemRef::Key(k)) = a {
        match hs.state.turn {
            Agent::Human => next.picked_by_human |= 1 << k,
            Agent::Robot => next.picked_by_robot |= 1 << k,
        }
    }
    next
}

type Key = (crate::env::Fingerprint, u64, u64);

fn key_of(hs: &HistoryState) -> Key {
    (hs.state.fingerprint(), hs.picked_by_human, hs.picked_by_robot)
}

/// Minimal-cost plan from `start` to a state satisfying `goal`, where the
/// restricted agent may only wait. Ties between equal-cost plans resolve
/// towards the earliest-generated one, which follows the action order.
pub fn optimal_plan(
    scn: &Scenario,
    profile: &CostProfile,
    start: &HistoryState,
    goal: &GoalFormula,
    restriction: Restriction,
    budget: usize,
) -> PlanOutcome {
    if goal.trivially_unsatisfiable(scn) {
        return PlanOutcome::Unsatisfiable;
    }
    let domains = goal.var_domains(scn);
    let relevant_gems = goal.objects(ItemKind::Gem);
    let track_history = goal.conjuncts.iter().any(|p| matches!(p, Pred::PickedUpBy(..)));
    // The bound assumes the human can walk, so it is skipped when only the
    // robot moves.
    let bound = goal
        .conjuncts
        .iter()
        .find_map(|p| match p {
            Pred::Collected(Term::Obj(ItemKind::Gem, g)) => Some(*g),
            _ => None,
        })
        .filter(|_| restriction != Restriction::RobotOnly)
        .map(|gem| (Domain::new(scn.clone()), BoundCosts::new(profile), gem));
    let h = |hs: &HistoryState| -> Option<u64> {
        match &bound {
            Some((dom, costs, gem)) => {
                let v = lower_bound(dom, costs, &hs.state, *gem);
                v.is_finite().then(|| v.floor() as u64)
            }
            None => Some(0),
        }
    };

    struct Entry {
        hs: HistoryState,
        parent: usize,
        action: Action,
    }
    let mut nodes = vec![Entry {
        hs: *start,
        parent: usize::MAX,
        action: Action::Wait,
    }];
    let mut best: HashMap<Key, u64> = HashMap::new();
    best.insert(key_of(start), 0);
    let mut open = BinaryHeap::new();
    let Some(h0) = h(start) else {
        return PlanOutcome::Unsatisfiable;
    };
    open.push(Reverse((h0, 0u64, 0usize)));
    let mut expansions = 0usize;
    let mut acts = Vec::with_capacity(8);

    while let Some(Reverse((_, g, idx))) = open.pop() {
        let hs = nodes[idx].hs;
        if best.get(&key_of(&hs)).is_some_and(|&b| b < g) {
            continue;
        }
        if goal.satisfied_with(scn, &hs, &domains) {
            let mut steps = Vec::new();
            let mut i = idx;
            while nodes[i].parent != usize::MAX {
                let parent = nodes[i].parent;
                steps.push((nodes[parent].hs.state.turn, nodes[i].action));
                i = parent;
            }
            steps.reverse();
            return PlanOutcome::Found(Plan {
                steps,
                cost: g as f64 / COST_SCALE,
                end: hs,
            });
        }
        if expansions >= budget {
            return PlanOutcome::BudgetExhausted;
        }
        expansions += 1;
        let s = hs.state;
        let waits_only = matches!(
            (restriction, s.turn),
            (Restriction::HumanOnly, Agent::Robot) | (Restriction::RobotOnly, Agent::Human)
        );
        if waits_only {
            acts.clear();
            acts.push(Action::Wait);
        } else {
            scn.legal_actions_into(&s, s.turn, &mut acts);
        }
        for &a in &acts {
            // Collecting an unrelated gem never helps.
            if let Action::PickUp(ItemRef::Gem(gm)) = a {
                if !relevant_gems.contains(&(gm as usize)) {
                    continue;
                }
            }
            let mut next = advance(scn, &hs, a);
            if !track_history {
                next.picked_by_human = 0;
                next.picked_by_robot = 0;
            }
            let g2 = g + profile.action_units(s.turn, a) as u64;
            let k = key_of(&next);
            if best.get(&k).is_some_and(|&b| b <= g2) {
                continue;
            }
            let Some(h2) = h(&next) else {
                continue;
            };
            best.insert(k, g2);
            nodes.push(Entry {
                hs: next,
                parent: idx,
                action: a,
            });
            open.push(Reverse((g2 + h2, g2, nodes.len() - 1)));
        }
    }
    PlanOutcome::Unsatisfiable
}

/// Total human action cost of a plan's steps, in game units.
pub fn human_cost(profile: &CostProfile, steps: &[(Agent, Action)]) -> f64 {
    steps
        .iter()
        .filter(|(ag, _)| *ag == Agent::Human)
        .map(|(ag, a)| profile.action_cost(*ag, *a))
        .sum()
}
