//! Deterministic utterance scorer. Each command has a closed family of
//! surface forms; an utterance scores `ln((1-eps)/n)` if it equals one of
//! the `n` forms after normalization, otherwise the floor.

use super::command::{Arg, CmdAction, Command, Verb, Who};
use super::{ScoreError, UtteranceScorer};
use crate::env::ItemKind;
use std::collections::{HashMap, HashSet};
use std::sync::{Arc, RwLock};

pub const TEMPLATE_EPS: f64 = 0.01;
pub const SCORE_FLOOR: f64 = 1e-6;

/// Lowercase, replace anything but letters and digits by spaces, collapse runs.
pub fn normalize(text: &str) -> String {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Det {
    Color,
    The,
    That,
    This,
}

const PREFIXES: [&str; 4] = ["can you ", "could you ", "please ", ""];
const SUFFIXES: [&str; 3] = ["", " for me", " please"];
const DETS: [Det; 4] = [Det::Color, Det::The, Det::That, Det::This];

fn verbs(actor: Who, verb: Verb) -> &'static [&'static str] {
    match (actor, verb) {
        (Who::You, Verb::PickUp) => &["get", "pick up"],
        (Who::You, Verb::Unlock) => &["unlock", "open"],
        (Who::You, Verb::Handover) => &["hand me", "pass me", "give me"],
        (Who::Me, Verb::PickUp) => &["i'm getting", "i'll get"],
        (Who::Me, Verb::Unlock) => &["i'm unlocking", "i'll open"],
        (Who::Me, Verb::Handover) => &["i'll hand you", "i'm giving you"],
    }
}

/// Actions sharing actor and verb, spoken as one clause.
struct Clause {
    actor: Who,
    verb: Verb,
    objects: Vec<Arg>,
}

fn clauses(c: &Command) -> Vec<Clause> {
    let mut out: Vec<Clause> = Vec::new();
    let object = |a: &CmdAction| match a.verb {
        Verb::Unlock => a.door.unwrap_or(a.key),
        _ => a.key,
    };
    for a in &c.actions {
        match out.iter_mut().find(|cl| cl.actor == a.actor && cl.verb == a.verb) {
            Some(cl) => cl.objects.push(object(a)),
            None => out.push(Clause {
                actor: a.actor,
                verb: a.verb,
                objects: vec![object(a)],
            }),
        }
    }
    // The speaker's own plans come first, then the request.
    out.sort_by_key(|cl| cl.actor != Who::Me);
    out
}

fn noun_phrase(c: &Command, objects: &[Arg], det: Det) -> Option<String> {
    let kind = objects[0].kind();
    let noun = match kind {
        ItemKind::Door => "door",
        ItemKind::Gem => "gem",
        ItemKind::Key => "key",
    };
    let plural = objects.len() > 1;
    let noun = if plural { format!("{noun}s") } else { noun.to_string() };
    Some(match det {
        Det::Color => {
            let mut colors = Vec::new();
            for &o in objects {
                let col = c.color_of(o)?;
                if !colors.contains(&col) {
                    colors.push(col);
                }
            }
            let names: Vec<&str> = colors.iter().map(|c| c.as_str()).collect();
            let list = match names.len() {
                1 => names[0].to_string(),
                n => format!("{} and {}", names[..n - 1].join(", "), names[n - 1]),
            };
            format!("the {list} {noun}")
        }
        Det::The => format!("the {noun}"),
        Det::That => format!("{} {noun}", if plural { "those" } else { "that" }),
        Det::This => format!("{} {noun}", if plural { "these" } else { "this" }),
    })
}

/// Every surface variant of one clause (verb × determiner).
fn clause_forms(c: &Command, cl: &Clause, canonical: bool) -> Vec<String> {
    let vs = verbs(cl.actor, cl.verb);
    let vs = if canonical { &vs[..1] } else { vs };
    let mut out = Vec::new();
    for v in vs {
        for det in DETS {
            if let Some(np) = noun_phrase(c, &cl.objects, det) {
                out.push(format!("{v} {np}"));
                if canonical {
                    break;
                }
            }
        }
    }
    out
}

fn cartesian(parts: &[Vec<String>], sep: &str) -> Vec<String> {
    let mut acc = vec![String::new()];
    for (i, forms) in parts.iter().enumerate() {
        let mut next = Vec::with_capacity(acc.len() * forms.len());
        for a in &acc {
            for f in forms {
                next.push(if i == 0 { f.clone() } else { format!("{a}{sep}{f}") });
            }
        }
        acc = next;
    }
    acc
}

/// All normalized surface forms of a command.
pub fn templates(c: &Command, canonical: bool) -> Vec<String> {
    let cls = clauses(c);
    let mine: Vec<Vec<String>> = cls
        .iter()
        .filter(|c| c.actor == Who::Me)
        .map(|cl| clause_forms(c, cl, canonical))
        .collect();
    let yours: Vec<Vec<String>> = cls
        .iter()
        .filter(|c| c.actor == Who::You)
        .map(|cl| clause_forms(c, cl, canonical))
        .collect();
    let (prefixes, suffixes): (&[&str], &[&str]) = if canonical {
        (&PREFIXES[..1], &SUFFIXES[..1])
    } else {
        (&PREFIXES, &SUFFIXES)
    };
    let mut request = Vec::new();
    if yours.is_empty() {
        request.push(String::new());
    } else {
        for body in cartesian(&yours, " and ") {
            for p in prefixes {
                for s in suffixes {
                    request.push(format!("{p}{body}{s}"));
                }
            }
        }
    }
    let statement = if mine.is_empty() {
        vec![String::new()]
    } else {
        cartesian(&mine, " and ")
    };
    let mut out: Vec<String> = Vec::new();
    let mut seen = HashSet::new();
    for m in &statement {
        for r in &request {
            let text = normalize(&format!("{m} {r}"));
            if seen.insert(text.clone()) {
                out.push(text);
            }
        }
    }
    out
}

/// Template scorer. `canonical()` keeps one surface form per command;
/// `new()` uses the full paraphrase family.
pub struct TemplateScorer {
    canonical: bool,
    cache: RwLock<HashMap<String, Arc<HashSet<String>>>>,
}

impl Default for TemplateScorer {
    fn default() -> Self {
        TemplateScorer::new()
    }
}

impl TemplateScorer {
    pub fn new() -> TemplateScorer {
        TemplateScorer {
            canonical: false,
            cache: RwLock::new(HashMap::new()),
        }
    }

    pub fn canonical() -> TemplateScorer {
        TemplateScorer {
            canonical: true,
            cache: RwLock::new(HashMap::new()),
        }
    }

    fn forms(&self, c: &Command) -> Arc<HashSet<String>> {
        let key = c.to_string();
        if let Some(f) = self.cache.read().unwrap().get(&key) {
            return f.clone();
        }
        let f: Arc<HashSet<String>> = Arc::new(templates(c, self.canonical).into_iter().collect());
        self.cache.write().unwrap().insert(key, f.clone());
        f
    }

    /// Log-likelihood of `utterance` given `c`.
    pub fn score_one(&self, utterance: &str, c: &Command) -> f64 {
        let forms = self.forms(c);
        if forms.contains(&normalize(utterance)) {
            ((1.0 - TEMPLATE_EPS) / forms.len() as f64).ln()
        } else {
            SCORE_FLOOR.ln()
        }
    }

    /// The first surface form, for display and for scripted speakers.
    pub fn render(&self, c: &Command) -> String {
        templates(c, true).into_iter().next().unwrap_or_default()
    }
}

impl UtteranceScorer for TemplateScorer {
    fn score(&self, utterance: &str, commands: &[Command]) -> Result<Vec<f64>, ScoreError> {
        Ok(commands.iter().map(|c| self.score_one(utterance, c)).collect())
    }

    fn name(&self) -> &str {
        "template"
    }
}
