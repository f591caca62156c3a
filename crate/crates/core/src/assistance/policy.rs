//! Belief-based assistant policies: expected-Q minimization over the goal
//! posterior, and posterior sampling that commits to one hypothesis.

use crate::env::{Action, Agent, State};
use crate::inference::Belief;
use rand::Rng;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct QmdpChoice {
    pub action: Action,
    /// Every allowed action whose expected cost equals the minimum, in action order.
    pub ties: Vec<Action>,
    /// Minimizer over all legal actions, before any were excluded.
    pub unconstrained: Action,
    /// Expected Q̂ per legal robot action, in action order.
    pub scores: Vec<(Action, f64)>,
    /// Hypotheses that took part, with renormalized weights.
    pub survivors: Vec<(usize, f64)>,
}

/// Indices and renormalized weights of hypotheses at or above `threshold`.
pub fn surviving(belief: &Belief, threshold: f64) -> Vec<(usize, f64)> {
    let mut keep: Vec<(usize, f64)> = belief
        .hypotheses
        .iter()
        .enumerate()
        .map(|(i, h)| (i, h.weight()))
        .filter(|(_, w)| *w >= threshold)
        .collect();
    if keep.is_empty() {
        // Cannot happen for a normalized belief with threshold below 1/N; keep the best.
        let best = belief
            .hypotheses
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.log_weight.total_cmp(&b.1.log_weight))
            .map(|(i, _)| i)
            .unwrap_or(0);
        keep.push((best, 1.0));
    }
    let z: f64 = keep.iter().map(|(_, w)| w).sum();
    keep.into_iter().map(|(i, w)| (i, w / z)).collect()
}

/// Robot action minimizing the posterior-expected Q̂ at the robot's turn.
/// Surviving policies are refined at `s` first. A hypothesis for which every
/// action is a dead end adds a constant and is left out.
pub fn qmdp_action(belief: &mut Belief, s: &State, threshold: f64) -> QmdpChoice {
    qmdp_action_avoiding(belief, s, threshold, &[])
}

/// As [`qmdp_action`], but the choice skips `avoid` unless nothing else has a
/// finite expected cost.
pub fn qmdp_action_avoiding(belief: &mut Belief, s: &State, threshold: f64, avoid: &[Action]) -> QmdpChoice {
    debug_assert_eq!(s.turn, Agent::Robot);
    let survivors = surviving(belief, threshold);
    let actions = belief.scenario().legal_actions(s, Agent::Robot);
    let ids: Vec<usize> = survivors.iter().map(|(i, _)| *i).collect();
    let qs: Vec<(usize, Vec<f64>)> = belief
        .hypotheses
        .par_iter_mut()
        .enumerate()
        .filter(|(i, _)| ids.contains(i))
        .map(|(i, h)| {
            h.policy.update(s);
            let q = actions
                .iter()
                .map(|&a| h.policy.q_value(s, a).unwrap_or(f64::INFINITY))
                .collect();
            (i, q)
        })
        .collect();
    let mut scores: Vec<(Action, f64)> = actions.iter().map(|&a| (a, 0.0)).collect();
    for (i, q) in &qs {
        if q.iter().all(|x| x.is_infinite()) {
            continue;
        }
        let w = survivors.iter().find(|(j, _)| j == i).map(|(_, w)| *w).unwrap_or(0.0);
        for (k, x) in q.iter().enumerate() {
            scores[k].1 += w * x;
        }
    }
    let minimizers = |allowed: &dyn Fn(Action) -> bool| -> Vec<Action> {
        let best = scores
            .iter()
            .filter(|(a, _)| allowed(*a))
            .map(|(_, x)| *x)
            .fold(f64::INFINITY, f64::min);
        if !best.is_finite() {
            return Vec::new();
        }
        let tol = 1e-9 * best.abs().max(1.0);
        scores
            .iter()
            .filter(|(a, x)| allowed(*a) && (x - best).abs() <= tol)
            .map(|(a, _)| *a)
            .collect()
    };
    let all = minimizers(&|_| true);
    let unconstrained = all.first().copied().unwrap_or(Action::Wait);
    let ties = match minimizers(&|a| !avoid.contains(&a)) {
        t if t.is_empty() => all,
        t => t,
    };
    let action = ties.first().copied().unwrap_or(Action::Wait);
    QmdpChoice {
        action,
        ties,
        unconstrained,
        scores,
        survivors,
    }
}

/// Posterior sampling: draw one hypothesis by weight at the first decision,
/// then follow that hypothesis's greedy joint-policy action for the episode.
#[derive(Clone, Debug, Default)]
pub struct PosteriorSampling {
    chosen: Option<usize>,
}

impl PosteriorSampling {
    pub fn new() -> PosteriorSampling {
        PosteriorSampling::default()
    }

    pub fn chosen(&self) -> Option<usize> {
        self.chosen
    }

    pub fn action<R: Rng>(&mut self, belief: &mut Belief, s: &State, rng: &mut R) -> Action {
        let i = *self.chosen.get_or_insert_with(|| sample_hypothesis(belief, rng));
        let h = &mut belief.hypotheses[i];
        h.policy.update(s);
        h.policy.greedy_action(s)
    }
}

/// Index drawn with probability equal to its weight; zero-weight hypotheses
/// are never drawn.
pub fn sample_hypothesis<R: Rng>(belief: &Belief, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, h) in belief.hypotheses.iter().enumerate() {
        let w = h.weight();
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
