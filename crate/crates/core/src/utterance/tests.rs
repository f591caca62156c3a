use super::*;
use crate::env::{Action, Agent, Color, GoalSpec, ItemKind, ItemRef, Scenario};
use crate::planner::{Domain, PlannerConfig, PolicyHandle};
use std::sync::Arc;

fn parse(v: serde_json::Value) -> Scenario {
    Scenario::parse(&v.to_string()).unwrap()
}

fn keys_and_door() -> Scenario {
    parse(serde_json::json!({
        "name": "kd",
        "grid": ["#######", "#hk1.D1g1#", "#rk2k3..#", "#######"],
        "legend": {"k1": {"kind": "key", "color": "red"},
                   "k2": {"kind": "key", "color": "blue"},
                   "k3": {"kind": "key", "color": "red"},
                   "D1": {"kind": "door", "color": "red"},
                   "g1": {"kind": "gem", "color": "red"}},
        "goals": ["g1"], "true_goal": "g1"
    }))
}

fn cmd(s: &str) -> Command {
    Command::parse(s).unwrap()
}

#[test]
fn command_text_round_trips() {
    for (c, _) in default_examples() {
        assert_eq!(cmd(&c).to_string(), c);
    }
    assert!(Command::parse("(handover you you ?key1)").is_err());
    assert!(Command::parse("(pickup you ?door1)").is_err());
    assert!(Command::parse("(pickup you ?key1) where (iscolor ?key2 red)").is_err());
    assert!(Command::parse("(fly you ?key1)").is_err());
}

#[test]
fn lifting_numbers_by_first_appearance() {
    let ground = Command {
        actions: vec![
            CmdAction {
                verb: Verb::PickUp,
                actor: Who::Me,
                key: Arg::Obj(ItemKind::Key, 4),
                door: None,
            },
            CmdAction {
                verb: Verb::Unlock,
                actor: Who::You,
                key: Arg::Obj(ItemKind::Key, 1),
                door: Some(Arg::Obj(ItemKind::Door, 0)),
            },
        ],
        colors: vec![
            (Arg::Obj(ItemKind::Key, 4), Color::Blue),
            (Arg::Obj(ItemKind::Door, 0), Color::Green),
        ],
    };
    let lifted = ground.lift();
    assert_eq!(
        lifted.to_string(),
        "(pickup me ?key1) (unlock you ?key2 ?door1) where (iscolor ?key1 blue) (iscolor ?door1 green)"
    );
    assert_eq!(lifted.lift(), lifted);
}

#[test]
fn salient_filter() {
    let scn = keys_and_door();
    let moves = [(Agent::Human, Action::Right), (Agent::Robot, Action::Wait)];
    assert!(extract_salient_actions(&scn, &moves).is_empty());

    let rollout = [
        (Agent::Human, Action::Right),
        (Agent::Robot, Action::Wait),
        (Agent::Human, Action::PickUp(ItemRef::Key(0))),
        (Agent::Robot, Action::Wait),
        (Agent::Human, Action::Unlock { door: 0, key: 0 }),
    ];
    let sal = extract_salient_actions(&scn, &rollout);
    assert_eq!(sal.len(), 2);
    assert_eq!(sal[0].action.verb, Verb::PickUp);
    assert_eq!(sal[0].colors, vec![(Arg::Obj(ItemKind::Key, 0), Color::Red)]);
    assert_eq!(sal[1].action.verb, Verb::Unlock);
    assert_eq!(sal[1].colors.len(), 2);
    assert!(sal[1].colors.iter().all(|(_, c)| *c == Color::Red));

    let hand = extract_salient_actions(&scn, &[(Agent::Robot, Action::Handover { key: 1 })]);
    let c = enumerate_commands(&hand, 3);
    assert_eq!(c.len(), 1);
    assert_eq!(c[0].to_string(), "(handover you me ?key1) where (iscolor ?key1 blue)");
}

#[test]
fn enumeration_examples() {
    let scn = keys_and_door();
    let one = extract_salient_actions(&scn, &[(Agent::Robot, Action::PickUp(ItemRef::Key(0)))]);
    let c = enumerate_commands(&one, 3);
    assert_eq!(
        c.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        vec!["(pickup you ?key1) where (iscolor ?key1 red)"]
    );

    // Pick-up followed by handover of the same key is a dependent chain.
    let chain = extract_salient_actions(
        &scn,
        &[
            (Agent::Robot, Action::PickUp(ItemRef::Key(1))),
            (Agent::Robot, Action::Handover { key: 1 }),
        ],
    );
    let c = enumerate_commands(&chain, 3);
    assert_eq!(c.len(), 2);
    assert!(c.iter().all(|c| c.actions.len() == 1));

    // Two red keys picked up by the robot lift to the same single command.
    let two = extract_salient_actions(
        &scn,
        &[
            (Agent::Robot, Action::PickUp(ItemRef::Key(0))),
            (Agent::Robot, Action::PickUp(ItemRef::Key(2))),
        ],
    );
    let c = enumerate_commands(&two, 3);
    let text: Vec<String> = c.iter().map(|c| c.to_string()).collect();
    assert_eq!(
        text,
        vec![
            "(pickup you ?key1) (pickup you ?key2) where (iscolor ?key1 red) (iscolor ?key2 red)",
            "(pickup you ?key1) where (iscolor ?key1 red)",
        ]
    );

    // The speaker's own actions alone are never a command.
    let mine = extract_salient_actions(&scn, &[(Agent::Human, Action::PickUp(ItemRef::Key(0)))]);
    assert!(enumerate_commands(&mine, 3).is_empty());
    assert!(enumerate_commands(&[], 3).is_empty());
}

#[test]
fn three_verbs_are_pruned() {
    let scn = keys_and_door();
    let sal = extract_salient_actions(
        &scn,
        &[
            (Agent::Robot, Action::PickUp(ItemRef::Key(0))),
            (Agent::Robot, Action::Handover { key: 1 }),
            (Agent::Robot, Action::Unlock { door: 0, key: 2 }),
        ],
    );
    let c = enumerate_commands(&sal, 3);
    assert!(c.iter().all(|c| c.verbs().len() <= 2));
    assert_eq!(c.len(), 6);
}

#[test]
fn template_scores() {
    let canon = TemplateScorer::canonical();
    let red = cmd("(handover you me ?key1) where (iscolor ?key1 red)");
    assert!((canon.score_one("Can you hand me the red key?", &red) - 0.99f64.ln()).abs() < 1e-12);
    assert_eq!(canon.render(&red), "can you hand me the red key");
    assert_eq!(canon.score_one("go north", &red), 1e-6f64.ln());

    let rich = TemplateScorer::new();
    let blue = cmd("(handover you me ?key1) where (iscolor ?key1 blue)");
    let pick = cmd("(pickup you ?key1) where (iscolor ?key1 red)");
    let s = rich
        .score("Hand me that key!", &[red.clone(), blue.clone(), pick.clone()])
        .unwrap();
    assert_eq!(s[0], s[1]);
    assert!(s[0] > s[2]);
    assert_eq!(s[2], SCORE_FLOOR.ln());
    let n = templates(&red, false).len() as f64;
    assert!((s[0] - (0.99 / n).ln()).abs() < 1e-12);

    let two = cmd("(pickup me ?key1) (unlock you ?key2 ?door1) where (iscolor ?key1 blue) (iscolor ?door1 green)");
    assert!(rich.score_one("I'm getting the blue key, can you open the green door?", &two) > SCORE_FLOOR.ln());
    let pair = cmd("(handover you me ?key1) (handover you me ?key2) where (iscolor ?key1 green) (iscolor ?key2 red)");
    assert!(rich.score_one("Can you pass me the green and red keys?", &pair) > SCORE_FLOOR.ln());
}

#[test]
fn mixture_arithmetic() {
    struct Fixed(Vec<f64>);
    impl UtteranceScorer for Fixed {
        fn score(&self, _: &str, c: &[Command]) -> Result<Vec<f64>, ScoreError> {
            Ok(self.0[..c.len()].to_vec())
        }
        fn name(&self) -> &str {
            "fixed"
        }
    }
    let c = [cmd("(pickup you ?key1)"), cmd("(handover you me ?key1)")];
    let l = mixture_log_likelihood("x", &c, &Fixed(vec![0.99f64.ln(), 1e-6f64.ln()]))
        .unwrap()
        .exp();
    assert!((l - (0.99 + 1e-6) / 2.0).abs() < 1e-12);
    let empty = mixture_log_likelihood("x", &[], &Fixed(vec![])).unwrap().exp();
    assert!((empty - 1e-6).abs() < 1e-18);
    let single = mixture_log_likelihood(
        "can you get the red key",
        &[cmd("(pickup you ?key1) where (iscolor ?key1 red)")],
        &TemplateScorer::canonical(),
    )
    .unwrap()
    .exp();
    assert!((single - 0.99).abs() < 1e-12);
}

#[test]
fn command_prior_depends_on_goal() {
    // The human cannot reach either gem without the robot opening a door.
    let scn = parse(serde_json::json!({
        "name": "two-doors",
        "grid": ["#########", "#g1R.h.Bg2#", "##.###.##", "#.k1.r.k2.#", "#########"],
        "legend": {"g1": {"kind": "gem", "color": "red"}, "g2": {"kind": "gem", "color": "blue"},
                   "R": {"kind": "door", "color": "red"}, "B": {"kind": "door", "color": "blue"},
                   "k1": {"kind": "key", "color": "red"}, "k2": {"kind": "key", "color": "blue"}},
        "goals": ["g1", "g2"], "true_goal": "g1"
    }));
    let domain = Arc::new(Domain::new(scn.clone()));
    let cfg = UtteranceModelConfig::default();
    let s = scn.initial_state();
    let mut supports = Vec::new();
    for gem in 0..2 {
        let mut h = PolicyHandle::new(domain.clone(), GoalSpec { gem, profile: 0 }, PlannerConfig::default());
        h.update(&s);
        supports.push(command_prior(&s, &mut h, &cfg));
    }
    assert!(!supports[0].is_empty() && !supports[1].is_empty());
    assert_ne!(supports[0], supports[1]);
    let colors = |cs: &[Command]| {
        cs.iter()
            .flat_map(|c| c.colors.iter().map(|(_, c)| *c))
            .collect::<Vec<_>>()
    };
    assert!(colors(&supports[0]).iter().all(|c| *c == Color::Red));
    assert!(colors(&supports[1]).iter().all(|c| *c == Color::Blue));
}

#[test]
fn robot_reach_respects_doors() {
    let scn = parse(serde_json::json!({
        "name": "reach",
        "grid": ["#######", "#rk1Bk2h#", "#######"],
        "legend": {"k1": {"kind": "key", "color": "red"}, "k2": {"kind": "key", "color": "red"},
                   "B": {"kind": "door", "color": "blue"}, "g": {"kind": "gem", "color": "red"}},
        "items": {"g": [5, 1]},
        "goals": ["g"], "true_goal": "g"
    }));
    let sal = robot_salient_actions(&scn, &scn.initial_state());
    let text: Vec<String> = sal.iter().map(|s| ground_command(&[s]).render(&scn)).collect();
    assert_eq!(
        text,
        vec![
            "(pickup you k1) where (iscolor k1 red)",
            "(handover you me k1) where (iscolor k1 red)"
        ]
    );
}

#[test]
fn examples_file_parses() {
    assert_eq!(default_examples().len(), 18);
    assert!(parse_examples("Command: (pickup you ?key1)\n").is_err());
    assert!(parse_examples("Utterance: hi\n").is_err());
}
