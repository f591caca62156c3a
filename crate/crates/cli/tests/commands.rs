use clips_cli::commands::{eval, run, EvalArgs, RunArgs};
use clips_cli::{load_scenario, make_scorer};
use clips_core::assistance::{parse_jsonl, TraceEvent};
use std::process::Command;

fn run_args(scenario: &str, assist: &str, out: Option<std::path::PathBuf>) -> RunArgs {
    RunArgs {
        scenario: scenario.into(),
        mode: "multimodal".into(),
        assist: assist.into(),
        seed: 0,
        out,
    }
}

#[test]
fn run_writes_a_replayable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let scorer = make_scorer("template").unwrap();
    let (_, ep, text) = run(
        &run_args("ambiguous-predicates", "qmdp-offline", Some(path.clone())),
        scorer.as_ref(),
    )
    .unwrap();
    assert!(text.contains("options    k1=1.00"), "{text}");
    let events = parse_jsonl(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(events, ep.events);
    assert!(events.iter().any(|e| matches!(e, TraceEvent::Utterance { .. })));
    assert!(matches!(events.last(), Some(TraceEvent::Metric { name, .. }) if name == "outcome"));
}

#[test]
fn run_rejects_bad_arguments() {
    let scorer = make_scorer("template").unwrap();
    assert!(run(&run_args("no-such-scenario", "qmdp-offline", None), scorer.as_ref()).is_err());
    assert!(run(&run_args("uncertain-goals", "guess", None), scorer.as_ref()).is_err());
    let mut bad_mode = run_args("uncertain-goals", "pibar", None);
    bad_mode.mode = "telepathy".into();
    assert!(run(&bad_mode, scorer.as_ref()).is_err());
    assert!(make_scorer("oracle").is_err());
}

#[test]
fn scenario_from_file_or_name() {
    let dir = tempfile::tempdir().unwrap();
    let bundled = load_scenario("safe-assistance").unwrap();
    let path = dir.path().join("s.json");
    std::fs::write(&path, bundled.to_json()).unwrap();
    assert_eq!(load_scenario(path.to_str().unwrap()).unwrap().name, "safe-assistance");
    std::fs::write(&path, "{").unwrap();
    assert!(load_scenario(path.to_str().unwrap()).is_err());
}

#[test]
fn eval_on_a_directory_pack() {
    let dir = tempfile::tempdir().unwrap();
    let pack = dir.path().join("pack");
    std::fs::create_dir(&pack).unwrap();
    std::fs::write(pack.join("s.json"), load_scenario("uncertain-goals").unwrap().to_json()).unwrap();
    let manifest = r#"{"name": "one", "scenarios": [{"file": "s.json", "options": ["k1"]}], "ratings": "r.csv"}"#;
    std::fs::write(pack.join("pack.json"), manifest).unwrap();
    let ratings = "rater_id,scenario,goal_g1,goal_g2,goal_g3,option_k1,option_k2\n\
                   a,uncertain-goals,0,1,0,1,0\n\
                   b,uncertain-goals,1,1,0,1,0\n\
                   c,uncertain-goals,0,1,0,1,1\n";
    std::fs::write(pack.join("r.csv"), ratings).unwrap();
    let report = dir.path().join("out/report.csv");
    let args = EvalArgs {
        pack: Some(pack),
        report: report.clone(),
        seed: 0,
        n_boot: 50,
    };
    let scorer = make_scorer("template").unwrap();
    let (rep, text) = eval(&args, scorer.as_ref()).unwrap();
    assert!(text.contains("clips"), "{text}");
    assert!(rep.failures.is_empty(), "{:?}", rep.failures);
    let csv = std::fs::read_to_string(&report).unwrap();
    assert_eq!(csv.lines().count(), 6, "{csv}");
    assert!(dir.path().join("out/report_details.csv").exists());
    assert!(dir.path().join("out/traces/uncertain-goals__clips.jsonl").exists());
    // Three goal items and two option items are rated.
    assert!(rep.summary("clips").unwrap().r_goal.is_some());
}

#[test]
fn binary_help_and_errors() {
    let exe = env!("CARGO_BIN_EXE_clips");
    let out = Command::new(exe).arg("--help").output().unwrap();
    assert!(out.status.success());
    let help = String::from_utf8_lossy(&out.stdout);
    for sub in ["run", "eval", "serve"] {
        assert!(help.contains(sub), "{help}");
    }
    let out = Command::new(exe)
        .args(["run", "--scenario", "nowhere"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("bundled scenario"));
    let out = Command::new(exe)
        .args(["run", "--scenario", "uncertain-goals", "--assist", "literal-efficient"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("scenario   uncertain-goals"));
}
