//! Library side of the `clips` binary: scenario lookup, scorer selection,
//! the `run` and `eval` commands, and the HTTP session server.

pub mod commands;
pub mod server;

use anyhow::{bail, Context, Result};
use clips_core::evaluation::ScenarioPack;
use clips_core::utterance::{default_examples, LlmConfig, LlmScorer, TemplateScorer, UtteranceScorer};
use clips_core::Scenario;
use std::path::Path;
use std::sync::Arc;

/// `template` (offline) or `llm` (an OpenAI-compatible completions endpoint
/// configured through `CLIPS_LLM_BASE_URL` and `CLIPS_LLM_API_KEY`).
pub fn make_scorer(kind: &str) -> Result<Arc<dyn UtteranceScorer>> {
    match kind {
        "template" => Ok(Arc::new(TemplateScorer::new())),
        "llm" => {
            let cfg = LlmConfig::from_env().context("the llm scorer needs CLIPS_LLM_BASE_URL to be set")?;
            Ok(Arc::new(LlmScorer::new(cfg, default_examples())))
        }
        other => bail!("unknown scorer '{other}' (expected template or llm)"),
    }
}

/// A scenario file path, or the name of a bundled scenario.
pub fn load_scenario(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.is_file() {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {arg}"))?;
        return Scenario::parse(&text).with_context(|| format!("parsing {arg}"));
    }
    let pack = ScenarioPack::bundled();
    match pack.get(arg) {
        Some(p) => Ok(p.scenario.clone()),
        None => {
            let names: Vec<_> = pack.scenarios.iter().map(|p| p.scenario.name.as_str()).collect();
            bail!(
                "'{arg}' is neither a file nor a bundled scenario ({})",
                names.join(", ")
            )
        }
    }
}
