use super::*;
use crate::env::{Action, Agent, GoalSpec, ItemKind, ItemRef, Scenario};
use std::sync::Arc;

fn parse(v: serde_json::Value) -> Scenario {
    Scenario::parse(&v.to_string()).unwrap()
}

fn corridor() -> Scenario {
    parse(serde_json::json!({
        "name": "corridor",
        "grid": ["#######", "#h...g#", "#r....#", "#######"],
        "legend": {"g": {"kind": "gem", "color": "red"}},
        "goals": ["g"], "true_goal": "g"
    }))
}

fn locked() -> Scenario {
    parse(serde_json::json!({
        "name": "locked",
        "grid": ["########", "#h.k.Dg#", "#r.....#", "########"],
        "legend": {"k": {"kind": "key", "color": "red"},
                   "D": {"kind": "door", "color": "red"},
                   "g": {"kind": "gem", "color": "red"}},
        "goals": ["g"], "true_goal": "g"
    }))
}

fn handle(scn: Scenario, profile: u8, config: PlannerConfig) -> PolicyHandle {
    PolicyHandle::new(Arc::new(Domain::new(scn)), GoalSpec { gem: 0, profile }, config)
}

#[test]
fn heuristic_on_gem_is_pickup_cost() {
    let scn = corridor();
    let mut s = scn.initial_state();
    s.human = scn.gems[0].pos;
    let h = handle(scn, 0, PlannerConfig::default());
    assert!((h.heuristic(&s) - 5.0).abs() < 1e-12);
}

#[test]
fn heuristic_counts_moves_and_robot_turns() {
    let scn = corridor();
    let s = scn.initial_state();
    let h = handle(scn, 0, PlannerConfig::default());
    // Four human moves, four interleaved robot waits, one gem pick-up.
    assert!((h.heuristic(&s) - (4.0 + 4.0 * 0.6 + 5.0)).abs() < 1e-9);
}

#[test]
fn heuristic_is_infinite_without_keys() {
    let scn = parse(serde_json::json!({
        "name": "nokey",
        "grid": ["######", "#h.Dg#", "#r..##", "######"],
        "legend": {"D": {"kind": "door", "color": "red"}, "g": {"kind": "gem", "color": "red"}},
        "goals": ["g"], "true_goal": "g"
    }));
    let s = scn.initial_state();
    let mut h = handle(scn, 0, PlannerConfig::default());
    assert!(h.heuristic(&s).is_infinite());
    h.update(&s);
    assert!(h.value(&s).is_infinite());
    assert_eq!(h.greedy_action(&s), Action::Wait);
    let probs = h.boltzmann(&s, 1.0);
    let n = probs.len() as f64;
    assert!(probs.iter().all(|(_, p)| (p - 1.0 / n).abs() < 1e-12));
}

#[test]
fn update_at_goal_sets_zero() {
    let scn = corridor();
    let mut s = scn.initial_state();
    s.gems = 1;
    let mut h = handle(scn, 0, PlannerConfig::default());
    h.update(&s);
    assert_eq!(h.value(&s), 0.0);
    assert_eq!(h.stats().expansions, 0);
    assert!(h.rollout(&s, 10).is_empty());
}

#[test]
fn corridor_converges_in_one_update() {
    let scn = corridor();
    let s = scn.initial_state();
    let mut h = handle(scn, 0, PlannerConfig::default());
    h.update(&s);
    assert!((h.value(&s) - 11.4).abs() < 1e-9);
    let plan = h.rollout(&s, 10);
    let human: Vec<Action> = plan
        .iter()
        .filter(|(a, _)| *a == Agent::Human)
        .map(|(_, a)| *a)
        .collect();
    assert_eq!(
        human,
        vec![
            Action::Right,
            Action::Right,
            Action::Right,
            Action::Right,
            Action::PickUp(ItemRef::Gem(0))
        ]
    );
    assert!(plan
        .iter()
        .filter(|(a, _)| *a == Agent::Robot)
        .all(|(_, a)| *a == Action::Wait));
}

#[test]
fn horizon_one_rollout_is_greedy_action() {
    let scn = locked();
    let s = scn.initial_state();
    let mut h = handle(scn, 0, PlannerConfig::default());
    let plan = h.rollout(&s, 1);
    assert_eq!(plan.len(), 1);
    assert_eq!(plan[0], (Agent::Human, h.greedy_action(&s)));
}

#[test]
fn q_values_are_cost_plus_value() {
    let scn = locked();
    let s = scn.initial_state();
    let mut h = handle(scn.clone(), 0, PlannerConfig::default());
    h.update(&s);
    for a in h.actions(&s) {
        let n = scn.apply(&s, a);
        let q = h.q_value(&s, a).unwrap();
        let expect = h.profile().action_cost(Agent::Human, a) + h.value(&n);
        assert!((q - expect).abs() < 1e-9);
        assert_eq!(q, h.q_joint(&s, a, Action::Wait).unwrap());
    }
    assert!(h.q_value(&s, Action::Up).is_err());
    assert!(h.q_joint(&s, Action::Right, Action::Right).is_err());
}

#[test]
fn values_never_decrease() {
    let scn = locked();
    let s0 = scn.initial_state();
    let mut h = handle(scn.clone(), 0, PlannerConfig::default().with_budget(4));
    let mut seen = std::collections::HashMap::new();
    let mut s = s0;
    for _ in 0..30 {
        h.update(&s);
        for (fp, v) in seen.iter_mut() {
            let st: &crate::env::State = fp;
            let now = h.value(st);
            assert!(now >= *v - 1e-9);
            *v = now;
        }
        seen.insert(s, h.value(&s));
        if h.is_goal(&s) {
            break;
        }
        s = scn.apply(&s, h.greedy_action(&s));
    }
}

#[test]
fn boltzmann_two_actions() {
    let p = boltzmann_probs(&[1.0, 2.0], 1.0);
    assert!((p[0] - 0.73106).abs() < 1e-5);
    assert!((p[1] - 0.26894).abs() < 1e-5);
    let shifted = boltzmann_probs(&[101.0, 102.0], 1.0);
    assert!((p[0] - shifted[0]).abs() < 1e-12);
    let flat = boltzmann_probs(&[1.0, 5.0, 9.0], 1e-9);
    assert!(flat.iter().all(|q| (q - 1.0 / 3.0).abs() < 1e-6));
    assert_eq!(boltzmann_probs(&[f64::INFINITY, f64::INFINITY], 2.0), vec![0.5, 0.5]);
    assert_eq!(boltzmann_probs(&[1.0, f64::INFINITY], 2.0), vec![1.0, 0.0]);
}

#[test]
fn plan_for_satisfied_formula_is_empty() {
    let scn = corridor();
    let mut s = scn.initial_state();
    s.gems = 1;
    let out = optimal_plan(
        &scn,
        &crate::env::CostProfile::bundled(0).unwrap(),
        &HistoryState::new(s),
        &GoalFormula::collect_gem(0),
        Restriction::Joint,
        100,
    );
    assert_eq!(out.plan().unwrap().steps.len(), 0);
}

#[test]
fn robot_only_behind_locked_door_is_unsatisfiable() {
    // The only red key lies behind a blue door and there is no blue key.
    let scn = parse(serde_json::json!({
        "name": "stuck",
        "grid": ["#######", "#hr.Bk#", "#######"],
        "legend": {"k": {"kind": "key", "color": "red"},
                   "B": {"kind": "door", "color": "blue"},
                   "g": {"kind": "gem", "color": "red"}},
        "items": {"g": [3, 1]},
        "goals": ["g"], "true_goal": "g"
    }));
    let formula = GoalFormula {
        vars: Vec::new(),
        conjuncts: vec![Pred::PickedUpBy(Agent::Robot, Term::Obj(ItemKind::Key, 0))],
    };
    let out = optimal_plan(
        &scn,
        &crate::env::CostProfile::bundled(0).unwrap(),
        &HistoryState::new(scn.initial_state()),
        &formula,
        Restriction::RobotOnly,
        1 << 16,
    );
    assert_eq!(out, PlanOutcome::Unsatisfiable);
    let tiny = optimal_plan(
        &scn,
        &crate::env::CostProfile::bundled(0).unwrap(),
        &HistoryState::new(scn.initial_state()),
        &GoalFormula::collect_gem(0),
        Restriction::Joint,
        1,
    );
    assert_eq!(tiny, PlanOutcome::BudgetExhausted);
}

#[test]
fn formula_groundings_and_rendering() {
    let scn = parse(serde_json::json!({
        "name": "two",
        "grid": ["#######", "#hab.g#", "#r....#", "#######"],
        "legend": {"a": {"kind": "key", "color": "blue"},
                   "b": {"kind": "key", "color": "blue"},
                   "g": {"kind": "gem", "color": "red"}},
        "goals": ["g"], "true_goal": "g"
    }));
    let f = GoalFormula {
        vars: vec![("key1".into(), ItemKind::Key)],
        conjuncts: vec![
            Pred::PickedUpBy(Agent::Robot, Term::Var(0)),
            Pred::Has(Agent::Human, Term::Var(0)),
            Pred::IsColor(Term::Var(0), crate::env::Color::Blue),
        ],
    };
    assert_eq!(
        f.render(&scn),
        "(exists (?key1 - key) (and (pickedup-by robot ?key1) (has human ?key1) (iscolor ?key1 blue)))"
    );
    assert_eq!(f.groundings(&scn).len(), 2);
    let red = GoalFormula {
        conjuncts: vec![
            Pred::IsColor(Term::Var(0), crate::env::Color::Red),
            Pred::Has(Agent::Human, Term::Var(0)),
        ],
        ..f.clone()
    };
    assert!(red.trivially_unsatisfiable(&scn));

    // Robot fetches a blue key and hands it over.
    let out = optimal_plan(
        &scn,
        &crate::env::CostProfile::bundled(0).unwrap(),
        &HistoryState::new(scn.initial_state()),
        &f,
        Restriction::Joint,
        1 << 16,
    );
    let plan = out.plan().unwrap();
    assert!(f.satisfied(&scn, &plan.end));
    assert!(plan
        .steps
        .iter()
        .any(|(ag, a)| *ag == Agent::Robot && matches!(a, Action::Handover { .. })));
}
