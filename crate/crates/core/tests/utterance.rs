use clips_core::utterance::*;
use clips_core::{Action, Agent, ItemRef, Scenario};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

fn scenario() -> Scenario {
    Scenario::parse(
        &serde_json::json!({
            "name": "many",
            "grid": ["###########", "#hk1k2k3k4.D1D2g1#", "#r........#", "###########"],
            "legend": {"k1": {"kind": "key", "color": "red"}, "k2": {"kind": "key", "color": "blue"},
                       "k3": {"kind": "key", "color": "red"}, "k4": {"kind": "key", "color": "green"},
                       "D1": {"kind": "door", "color": "red"}, "D2": {"kind": "door", "color": "blue"},
                       "g1": {"kind": "gem", "color": "red"}},
            "goals": ["g1"], "true_goal": "g1"
        })
        .to_string(),
    )
    .unwrap()
}

fn arb_step() -> impl Strategy<Value = (Agent, Action)> {
    let agent = prop_oneof![Just(Agent::Human), Just(Agent::Robot)];
    let action = prop_oneof![
        (0u8..4).prop_map(|k| Action::PickUp(ItemRef::Key(k))),
        (0u8..4).prop_map(|k| Action::Handover { key: k }),
        (0u8..2, 0u8..4).prop_map(|(d, k)| Action::Unlock { door: d, key: k }),
        Just(Action::Right),
    ];
    (agent, action)
}

/// Independent subset generator, pruner and lifter producing command text.
fn oracle(scn: &Scenario, steps: &[(Agent, Action)], k: usize) -> BTreeSet<String> {
    let mut sal: Vec<(Agent, Action)> = Vec::new();
    for &(ag, a) in steps {
        let keep = matches!(
            a,
            Action::PickUp(ItemRef::Key(_)) | Action::Handover { .. } | Action::Unlock { .. }
        );
        if keep && !sal.contains(&(ag, a)) {
            sal.push((ag, a));
        }
    }
    let key_of = |a: Action| match a {
        Action::PickUp(ItemRef::Key(k)) | Action::Handover { key: k } | Action::Unlock { key: k, .. } => k,
        _ => unreachable!(),
    };
    let mut out = BTreeSet::new();
    for mask in 1u32..(1 << sal.len()) {
        let sub: Vec<(Agent, Action)> = (0..sal.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| sal[i])
            .collect();
        if sub.len() > k {
            continue;
        }
        let names: BTreeSet<&str> = sub.iter().map(|(_, a)| a.name()).collect();
        if names.len() > 2 || sub.iter().all(|(ag, _)| *ag == Agent::Human) {
            continue;
        }
        let keys: Vec<u8> = sub.iter().map(|(_, a)| key_of(*a)).collect();
        let distinct: BTreeSet<u8> = keys.iter().copied().collect();
        if distinct.len() != keys.len() {
            continue;
        }
        let mut keymap: Vec<u8> = Vec::new();
        let mut doormap: Vec<u8> = Vec::new();
        let var = |map: &mut Vec<u8>, x: u8, kind: &str| {
            let i = map.iter().position(|&y| y == x).unwrap_or_else(|| {
                map.push(x);
                map.len() - 1
            });
            format!("?{kind}{}", i + 1)
        };
        let who = |ag: Agent| if ag == Agent::Human { "me" } else { "you" };
        let mut acts = Vec::new();
        let mut preds: Vec<String> = Vec::new();
        for (ag, a) in &sub {
            let kv = var(&mut keymap, key_of(*a), "key");
            let kc = scn.keys[key_of(*a) as usize].color;
            let mut p = vec![format!("(iscolor {kv} {kc})")];
            acts.push(match a {
                Action::PickUp(_) => format!("(pickup {} {kv})", who(*ag)),
                Action::Handover { .. } => format!("(handover {} {} {kv})", who(*ag), who(ag.other())),
                Action::Unlock { door, .. } => {
                    let dv = var(&mut doormap, *door, "door");
                    p.push(format!("(iscolor {dv} {})", scn.doors[*door as usize].color));
                    format!("(unlock {} {kv} {dv})", who(*ag))
                }
                _ => unreachable!(),
            });
            for q in p {
                if !preds.contains(&q) {
                    preds.push(q);
                }
            }
        }
        out.insert(format!("{} where {}", acts.join(" "), preds.join(" ")));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn enumeration_matches_brute_force(steps in proptest::collection::vec(arb_step(), 0..7), k in 1usize..4) {
        let scn = scenario();
        let sal = extract_salient_actions(&scn, &steps);
        prop_assume!(sal.len() <= 5);
        let got: Vec<String> = enumerate_commands(&sal, k).iter().map(|c| c.to_string()).collect();
        let want: Vec<String> = oracle(&scn, &steps, k).into_iter().collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn lifting_is_idempotent(steps in proptest::collection::vec(arb_step(), 0..6)) {
        let scn = scenario();
        let sal = extract_salient_actions(&scn, &steps);
        for c in enumerate_commands(&sal, 3) {
            prop_assert_eq!(c.lift(), c.clone());
            prop_assert_eq!(Command::parse(&c.to_string()).unwrap(), c);
        }
    }

    #[test]
    fn mixture_is_order_invariant_and_positive(steps in proptest::collection::vec(arb_step(), 1..6), u in "[a-z ]{0,20}") {
        let scn = scenario();
        let mut cmds = enumerate_commands(&extract_salient_actions(&scn, &steps), 3);
        let scorer = TemplateScorer::new();
        let a = mixture_log_likelihood(&u, &cmds, &scorer).unwrap();
        cmds.reverse();
        let b = mixture_log_likelihood(&u, &cmds, &scorer).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a.exp() > 0.0);
    }
}

/// Local completions endpoint: every prompt is echoed as one token with a
/// null log-probability, followed by one token per continuation word at -0.5.
struct Fixture {
    url: String,
    requests: Arc<AtomicUsize>,
}

fn read_request(stream: &mut std::net::TcpStream) -> String {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut len = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).unwrap();
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
            len = v.trim().parse().unwrap();
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).unwrap();
    String::from_utf8(body).unwrap()
}

fn fixture(status: u16, raw: Option<&'static str>) -> Fixture {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let count = requests.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let body = read_request(&mut stream);
            count.fetch_add(1, Ordering::SeqCst);
            let reply = match raw {
                Some(r) => r.to_string(),
                None => {
                    let req: serde_json::Value = serde_json::from_str(&body).unwrap();
                    let choices: Vec<serde_json::Value> = req["prompt"]
                        .as_array()
                        .unwrap()
                        .iter()
                        .enumerate()
                        .map(|(i, p)| {
                            let p = p.as_str().unwrap();
                            let cut = p.rfind("Utterance:").unwrap() + "Utterance:".len();
                            let mut offsets = vec![0];
                            let mut lps = vec![serde_json::Value::Null];
                            let mut pos = cut;
                            for w in p[cut..].split_inclusive(' ').filter(|w| !w.trim().is_empty()) {
                                offsets.push(pos);
                                lps.push(serde_json::json!(-0.5));
                                pos += w.len();
                            }
                            serde_json::json!({"index": i, "text": p,
                                "logprobs": {"text_offset": offsets, "token_logprobs": lps}})
                        })
                        .rev()
                        .collect();
                    serde_json::json!({"choices": choices}).to_string()
                }
            };
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
            stream.write_all(resp.as_bytes()).unwrap();
        }
    });
    Fixture { url, requests }
}

fn config(url: &str) -> LlmConfig {
    LlmConfig {
        base_url: url.to_string(),
        api_key: Some("test".into()),
        model: "fixture".into(),
        timeout: Duration::from_secs(5),
        batch_size: 2,
        fallback_to_templates: false,
    }
}

#[test]
fn llm_scores_come_from_continuation_tokens() {
    let fx = fixture(200, None);
    let scorer = LlmScorer::new(config(&fx.url), default_examples());
    assert!(scorer.score("hi", &[]).unwrap().is_empty());
    let a = Command::parse("(pickup you ?key1) where (iscolor ?key1 red)").unwrap();
    let b = Command::parse("(handover you me ?key1) where (iscolor ?key1 blue)").unwrap();
    let c = Command::parse("(unlock you ?key1 ?door1)").unwrap();
    let s = scorer
        .score(
            "can you hand me the blue key",
            &[a.clone(), b.clone(), a.clone(), c.clone()],
        )
        .unwrap();
    // Seven continuation words at -0.5 each, wherever the choice sits in the reply.
    assert!(s.iter().all(|x| (x + 3.5).abs() < 1e-12));
    assert_eq!(s[0], s[2]);
    // Three distinct prompts in batches of two.
    assert_eq!(fx.requests.load(Ordering::SeqCst), 2);
    scorer.score("can you hand me the blue key", &[c, b]).unwrap();
    assert_eq!(fx.requests.load(Ordering::SeqCst), 2);
    assert!(scorer
        .prompt(&a)
        .ends_with("Command: (pickup you ?key1) where (iscolor ?key1 red)\nUtterance:"));
    assert!(scorer.prompt(&a).starts_with(
        "Command: (handover you me ?key1) where (iscolor ?key1 blue)\nUtterance: Hand me the blue key.\n\n"
    ));
}

#[test]
fn llm_errors_are_classified() {
    let cmd = [Command::parse("(pickup you ?key1)").unwrap()];

    let closed = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", closed.local_addr().unwrap());
    drop(closed);
    let err = LlmScorer::new(config(&url), vec![]).score("x", &cmd).unwrap_err();
    assert!(err.retriable(), "{err}");

    let busy = fixture(503, Some("{}"));
    assert!(LlmScorer::new(config(&busy.url), vec![])
        .score("x", &cmd)
        .unwrap_err()
        .retriable());

    let junk = fixture(200, Some("{\"choices\": [{\"index\": 0}]}"));
    let err = LlmScorer::new(config(&junk.url), vec![]).score("x", &cmd).unwrap_err();
    assert!(matches!(err, ScoreError::Malformed(_)));

    let mut fallback = config(&url);
    fallback.fallback_to_templates = true;
    let s = LlmScorer::new(fallback, vec![])
        .score("can you pick up the key", &cmd)
        .unwrap();
    assert_eq!(s, TemplateScorer::new().score("can you pick up the key", &cmd).unwrap());
}
