use super::*;
use crate::assistance::{AssistMode, Episode, EpisodeRun, Principal};
use crate::env::{Action, Agent, Scenario, State};
use crate::inference::Mode;
use crate::utterance::TemplateScorer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ids(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn run(length: usize, human_cost: f64, options: &[&str], weight: f64) -> EpisodeRun {
    EpisodeRun {
        steps: Vec::new(),
        length,
        success: true,
        truncated: false,
        human_cost,
        robot_options: ids(options),
        weight,
        phase_one: None,
        command: None,
    }
}

fn episode(runs: Vec<EpisodeRun>) -> Episode {
    Episode {
        mode: AssistMode::QmdpOffline,
        events: Vec::new(),
        runs,
        prefix_len: 0,
        final_belief: None,
        p_true_goal: Some(0.5),
    }
}

#[test]
fn precision_recall_cases() {
    assert_eq!(precision_recall(&ids(&["k1"]), &ids(&["k1"])), (1.0, 1.0));
    assert_eq!(precision_recall(&ids(&["k1", "k2"]), &ids(&["k1"])), (0.5, 1.0));
    assert_eq!(precision_recall(&ids(&["k1"]), &ids(&["k1", "D1"])), (1.0, 0.5));
    assert_eq!(precision_recall(&[], &ids(&["k1"])), (0.0, 0.0));
    assert_eq!(precision_recall(&[], &[]), (1.0, 1.0));
    assert_eq!(precision_recall(&ids(&["k2"]), &[]), (0.0, 1.0));
    // Duplicates count once.
    assert_eq!(precision_recall(&ids(&["k1", "k1"]), &ids(&["k1"])), (1.0, 1.0));
}

#[test]
fn weighted_episode_metrics() {
    let ep = episode(vec![run(10, 4.0, &["k1"], 0.75), run(30, 8.0, &["k2"], 0.25)]);
    let (p, r) = episode_precision_recall(&ep, &ids(&["k1"]));
    assert!((p - 0.75).abs() < 1e-12 && (r - 0.75).abs() < 1e-12);
    assert!((ep.mean_length() - 15.0).abs() < 1e-12);
    assert!((ep.mean_human_cost() - 5.0).abs() < 1e-12);
    let m = compute_metrics(&ep, &ids(&["k1"]), Some(&ep));
    assert_eq!(m.rel_plan_length, Some(1.0));
    assert_eq!(m.rel_human_cost, Some(1.0));
    let half = episode(vec![run(20, 2.0, &[], 1.0)]);
    let m = compute_metrics(&ep, &ids(&["k1"]), Some(&half));
    assert!((m.rel_plan_length.unwrap() - 0.75).abs() < 1e-12);
    assert!((m.rel_human_cost.unwrap() - 2.5).abs() < 1e-12);
    // A zero-cost reference has no ratio.
    let free = episode(vec![run(0, 0.0, &[], 1.0)]);
    assert_eq!(compute_metrics(&ep, &[], Some(&free)).rel_human_cost, None);
}

#[test]
fn mean_and_standard_error() {
    assert_eq!(mean_se(&[]), None);
    assert_eq!(
        mean_se(&[2.0]),
        Some(MeanSe {
            mean: 2.0,
            se: 0.0,
            n: 1
        })
    );
    let m = mean_se(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(m.mean, 2.5);
    // Sample variance 5/3, over n = 4.
    assert!((m.se - (5.0f64 / 12.0).sqrt()).abs() < 1e-15);
}

#[test]
fn pearson_fixture_and_identities() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let y = [2.0, 4.0, 5.0, 4.0, 5.0];
    // Sxy = 6, Sxx = 10, Syy = 6.
    assert!((pearson(&x, &y).unwrap() - 0.6f64.sqrt()).abs() < 1e-12);
    assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-12);
    let neg: Vec<f64> = x.iter().map(|v| 7.0 - 3.0 * v).collect();
    assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
    let affine: Vec<f64> = y.iter().map(|v| 0.5 * v + 9.0).collect();
    assert!((pearson(&x, &affine).unwrap() - pearson(&x, &y).unwrap()).abs() < 1e-12);
    assert!((pearson(&y, &x).unwrap() - pearson(&x, &y).unwrap()).abs() < 1e-15);
}

#[test]
fn pearson_errors() {
    assert_eq!(
        pearson(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]),
        Err(CorrelationError::ZeroVariance)
    );
    assert_eq!(pearson(&[1.0, 2.0], &[1.0, 2.0]), Err(CorrelationError::TooShort(2)));
    assert_eq!(
        pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
        Err(CorrelationError::Length(3, 2))
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(
        pearson_bootstrap(&[1.0, 2.0, 3.0], &[], 10, &mut rng),
        Err(CorrelationError::NoRatings)
    );
}

fn ratings_fixture() -> Vec<Vec<Option<f64>>> {
    vec![
        vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)],
        vec![Some(1.0), Some(0.0), Some(0.0), Some(0.0)],
        vec![Some(1.0), Some(1.0), Some(1.0), None],
        vec![Some(0.0), Some(0.0), Some(1.0), Some(1.0)],
        vec![Some(1.0), Some(0.0), Some(1.0), Some(0.0)],
    ]
}

#[test]
fn bootstrap_is_seeded() {
    let model = [0.9, 0.1, 0.7, 0.2];
    let ratings = ratings_fixture();
    let a = pearson_bootstrap(&model, &ratings, 500, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let b = pearson_bootstrap(&model, &ratings, 500, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    assert_eq!(a, b);
    // Item means 0.8, 0.2, 0.8, 0.25.
    let direct = pearson(&model, &[0.8, 0.2, 0.8, 0.25]).unwrap();
    assert!((a.r - direct).abs() < 1e-12);
    assert!(a.lo <= a.r + 1e-12 && a.r <= a.hi + 1e-12, "{a:?}");
}

#[test]
fn ratings_parse_and_matrix() {
    let csv = "rater_id,scenario,goal_g1,goal_g2,option_k1,option_k2\n\
               r01,s1,1,1,1,0\n\
               r02,s1,0,1,,1\n\
               r01,s2,1,0,0,0\n";
    let r = Ratings::parse(csv).unwrap();
    assert_eq!(r.rows.len(), 3);
    assert_eq!(r.raters(), ids(&["r01", "r02"]));
    assert_eq!(r.rows[0].goal_distribution()["g1"], 0.5);
    assert!(!r.rows[1].options.contains_key("k1"));
    let items = vec![
        ("s1".to_string(), "g2".to_string()),
        ("s2".to_string(), "g1".to_string()),
    ];
    assert_eq!(
        r.matrix(&items, true),
        vec![vec![Some(0.5), Some(1.0)], vec![Some(1.0), None]]
    );
    let opts = vec![("s1".to_string(), "k1".to_string())];
    assert_eq!(r.matrix(&opts, false), vec![vec![Some(1.0)], vec![None]]);

    assert!(Ratings::parse("rater,scenario\n").is_err());
    assert!(Ratings::parse("rater_id,scenario,color\n").is_err());
    assert!(Ratings::parse("rater_id,scenario,goal_g1\nr1,s,2\n").is_err());
}

/// Open room where the assistant can neither help nor obstruct: every move
/// has the same value, so a move costs 0.4 more than waiting.
fn open_room() -> Scenario {
    Scenario::parse(
        &serde_json::json!({
            "name": "room",
            "grid": ["#########", "#h.....g#", "#.......#", "#.......#", "#...r...#", "#.......#", "#########"],
            "legend": {"g": {"kind": "gem", "color": "red"}},
            "goals": ["g"], "true_goal": "g", "cost_profiles": [0]
        })
        .to_string(),
    )
    .unwrap()
}

/// Alternate the simulated principal with a fixed list of assistant actions.
fn drive(scn: &Scenario, human: &mut SimulatedHuman, robot: &[Action]) -> State {
    let mut s = scn.initial_state();
    let mut history = Vec::new();
    let mut robot = robot.iter();
    loop {
        let a = if s.turn == Agent::Human {
            human.act(&s, &history)
        } else {
            match robot.next() {
                Some(&a) => {
                    history.push((s, a));
                    a
                }
                None => break,
            }
        };
        s = scn.step_action(&s, a).unwrap();
    }
    human.observe(&history);
    s
}

#[test]
fn fallback_fires_at_hand_computed_step() {
    let scn = open_room();
    let mut human = SimulatedHuman::new(&scn, &scn.initial_state(), 1 << 16);
    human.beta = 5.0;
    // Five legal actions. P(move) = e^-5 / (e^-3 + 4 e^-5) = 0.08779 under the
    // joint policy against 0.2 at random: the ratio grows 2.278x per move
    // and first reaches 10 on the third (5.19, then 11.82).
    let p_move = (-5.0f64).exp() / ((-3.0f64).exp() + 4.0 * (-5.0f64).exp());
    let step = 0.2 / p_move;
    assert!(step.powi(2) < 10.0 && step.powi(3) >= 10.0);

    drive(&scn, &mut human, &[Action::Right, Action::Right]);
    assert_eq!(human.mode(), HumanMode::Scripted);
    assert!((human.ratio() - step.powi(2)).abs() < 1e-9, "{}", human.ratio());

    let mut human = SimulatedHuman::new(&scn, &scn.initial_state(), 1 << 16);
    human.beta = 5.0;
    drive(&scn, &mut human, &[Action::Right, Action::Right, Action::Left]);
    assert_eq!(human.mode(), HumanMode::Fallback);
    // Robot turns are t = 2, 4, 6.
    assert_eq!(human.switches, vec![(6, HumanMode::Fallback)]);
}

#[test]
fn waiting_assistant_keeps_trust() {
    let scn = open_room();
    let mut human = SimulatedHuman::new(&scn, &scn.initial_state(), 1 << 16);
    drive(&scn, &mut human, &[Action::Wait; 6]);
    assert_eq!(human.mode(), HumanMode::Scripted);
    assert!(human.ratio() < 1.0);
}

#[test]
fn principal_plan_walks_then_collects() {
    let scn = open_room();
    let human = SimulatedHuman::new(&scn, &scn.initial_state(), 1 << 16);
    // Six moves right, then the pickup.
    assert_eq!(human.plan().len(), 7);
    assert!(human.plan()[..6].iter().all(|a| *a == Action::Right));
}

#[test]
fn cooperative_assistant_reaches_goal() {
    let scn = open_room();
    let spec = RunSpec::new("clips", Mode::Multimodal, AssistMode::QmdpOffline, 0);
    let ep = run_episode(&scn, &spec, &TemplateScorer::new()).unwrap();
    assert_eq!(ep.success_rate(), 1.0);
    assert_eq!(ep.p_true_goal, Some(1.0));
    assert!(ep.runs[0].robot_options.is_empty());
}

fn tiny_pack() -> ScenarioPack {
    ScenarioPack {
        name: "tiny".into(),
        scenarios: vec![PackScenario {
            scenario: open_room(),
            entry: PackEntry {
                file: "room.json".into(),
                options: Vec::new(),
                tags: Default::default(),
            },
        }],
        ratings: None,
    }
}

#[test]
fn pack_runner_empty_and_small() {
    let scorer = TemplateScorer::new();
    let specs = RunSpec::table(0)[..2].to_vec();
    let empty = run_pack(&ScenarioPack::default(), &specs, &scorer, &PackOptions::default());
    assert!(empty.details.is_empty() && empty.failures.is_empty());
    assert!(empty.summaries.iter().all(|s| s.precision.is_none()));

    let report = run_pack(&tiny_pack(), &specs, &scorer, &PackOptions::default());
    assert_eq!(report.details.len(), 2);
    let clips = report.detail("room", "clips").unwrap();
    assert_eq!(clips.metrics.rel_plan_length, Some(1.0));
    assert_eq!(clips.metrics.precision, 1.0);
    assert_eq!(report.summary("clips").unwrap().recall.unwrap().mean, 1.0);
    let csv = report_csv(&report);
    assert_eq!(csv.lines().count(), 3, "{csv}");
    assert!(details_csv(&report).lines().count() >= 3);
}

#[test]
fn pack_validation_rejects_unknown_ids() {
    let mut pack = tiny_pack();
    pack.scenarios[0].entry.options = ids(&["k9"]);
    assert!(pack.validate().is_err());
}

#[test]
fn bundled_pack_annotations_match_search() {
    let pack = ScenarioPack::bundled();
    assert_eq!(pack.scenarios.len(), 6);
    for ps in &pack.scenarios {
        let mut want = ps.entry.options.clone();
        want.sort();
        let got = derive_options(&ps.scenario, 1 << 18).unwrap();
        assert_eq!(got, Some(want), "{}", ps.scenario.name);
    }
}

#[test]
fn pack_loads_from_directory() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data/pack");
    let pack = ScenarioPack::load(std::path::Path::new(dir)).unwrap();
    let bundled = ScenarioPack::bundled();
    let names = |p: &ScenarioPack| p.scenarios.iter().map(|s| s.scenario.name.clone()).collect::<Vec<_>>();
    assert_eq!(names(&pack), names(&bundled));
    assert!(ScenarioPack::load(std::path::Path::new("/nonexistent")).is_err());
}
