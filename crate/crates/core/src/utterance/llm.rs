//! Client for an OpenAI-style `/completions` endpoint that scores an
//! utterance as the continuation of a few-shot prompt. The request echoes the
//! prompt with `max_tokens: 0`, and the log-probabilities of the tokens past
//! the prompt are summed.

use super::command::Command;
use super::templates::TemplateScorer;
use super::{ScoreError, UtteranceScorer};
use serde_json::{json, Value};
use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::RwLock;
use std::time::Duration;

/// Few-shot pairs bundled with the crate.
pub const DEFAULT_EXAMPLES: &str = include_str!("../../data/fewshot.txt");

/// Parse `Command:` / `Utterance:` line pairs; blank lines and `#` comments are skipped.
pub fn parse_examples(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    let mut pending: Option<String> = None;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(c) = line.strip_prefix("Command:") {
            if pending.is_some() {
                return Err(format!("line {}: command without utterance", n + 1));
            }
            let c = c.trim();
            Command::parse(c).map_err(|e| format!("line {}: {e}", n + 1))?;
            pending = Some(c.to_string());
        } else if let Some(u) = line.strip_prefix("Utterance:") {
            let c = pending
                .take()
                .ok_or_else(|| format!("line {}: utterance without command", n + 1))?;
            out.push((c, u.trim().to_string()));
        } else {
            return Err(format!("line {}: expected 'Command:' or 'Utterance:'", n + 1));
        }
    }
    if pending.is_some() {
        return Err("trailing command without utterance".into());
    }
    Ok(out)
}

pub fn default_examples() -> Vec<(String, String)> {
    parse_examples(DEFAULT_EXAMPLES).expect("bundled examples parse")
}

#[derive(Clone, Debug)]
pub struct LlmConfig {
    pub base_url: String,
    pub api_key: Option<String>,
    pub model: String,
    pub timeout: Duration,
    /// Prompts per request.
    pub batch_size: usize,
    /// Score with templates when the endpoint cannot be reached.
    pub fallback_to_templates: bool,
}

impl LlmConfig {
    /// Read `CLIPS_LLM_BASE_URL`, `CLIPS_LLM_API_KEY` and `CLIPS_LLM_MODEL`.
    pub fn from_env() -> Option<LlmConfig> {
        let base_url = std::env::var("CLIPS_LLM_BASE_URL").ok()?;
        Some(LlmConfig {
            base_url,
            api_key: std::env::var("CLIPS_LLM_API_KEY").ok(),
            model: std::env::var("CLIPS_LLM_MODEL").unwrap_or_else(|_| "davinci-002".into()),
            timeout: Duration::from_secs(60),
            batch_size: 32,
            fallback_to_templates: false,
        })
    }
}

pub struct LlmScorer {
    config: LlmConfig,
    examples: Vec<(String, String)>,
    agent: ureq::Agent,
    cache: RwLock<HashMap<(u64, String), f64>>,
    fallback: TemplateScorer,
}

impl LlmScorer {
    pub fn new(config: LlmConfig, examples: Vec<(String, String)>) -> LlmScorer {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(config.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        LlmScorer {
            config,
            examples,
            agent,
            cache: RwLock::new(HashMap::new()),
            fallback: TemplateScorer::new(),
        }
    }

    /// Prompt up to and including `Utterance:` for command `c`.
    pub fn prompt(&self, c: &Command) -> String {
        let mut p = String::new();
        for (cmd, utt) in &self.examples {
            p.push_str(&format!("Command: {cmd}\nUtterance: {utt}\n\n"));
        }
        p.push_str(&format!("Command: {c}\nUtterance:"));
        p
    }

    fn request(&self, prompts: &[String], utterance: &str) -> Result<Vec<f64>, ScoreError> {
        let full: Vec<String> = prompts.iter().map(|p| format!("{p} {utterance}")).collect();
        let body = json!({
            "model": self.config.model,
            "prompt": full,
            "max_tokens": 0,
            "echo": true,
            "logprobs": 0,
            "temperature": 0,
        });
        let url = format!("{}/completions", self.config.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url).header("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send(body.to_string())
            .map_err(|e| ScoreError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ScoreError::Transport(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(ScoreError::Transport(format!("HTTP {status}: {text}")));
        }
        if status != 200 {
            return Err(ScoreError::Malformed(format!("HTTP {status}: {text}")));
        }
        let v: Value = serde_json::from_str(&text).map_err(|e| ScoreError::Malformed(e.to_string()))?;
        parse_response(&v, prompts)
    }
}

/// Sum the continuation log-probabilities of each choice, matched to its
/// prompt by `index`.
fn parse_response(v: &Value, prompts: &[String]) -> Result<Vec<f64>, ScoreError> {
    let bad = |m: &str| ScoreError::Malformed(m.to_string());
    let choices = v["choices"].as_array().ok_or_else(|| bad("missing 'choices'"))?;
    let mut out = vec![None; prompts.len()];
    for (pos, ch) in choices.iter().enumerate() {
        let idx = ch["index"].as_u64().map(|i| i as usize).unwrap_or(pos);
        if idx >= prompts.len() {
            return Err(bad("choice index out of range"));
        }
        let lp = &ch["logprobs"];
        let offsets = lp["text_offset"]
            .as_array()
            .ok_or_else(|| bad("missing 'text_offset'"))?;
        let logprobs = lp["token_logprobs"]
            .as_array()
            .ok_or_else(|| bad("missing 'token_logprobs'"))?;
        if offsets.len() != logprobs.len() {
            return Err(bad("token arrays differ in length"));
        }
        let start = prompts[idx].len();
        let mut total = 0.0;
        let mut any = false;
        for (off, l) in offsets.iter().zip(logprobs) {
            let off = off.as_u64().ok_or_else(|| bad("non-integer offset"))? as usize;
            if off < start {
                continue;
            }
            total += l.as_f64().ok_or_else(|| bad("null logprob in continuation"))?;
            any = true;
        }
        if !any {
            return Err(bad("no continuation tokens"));
        }
        out[idx] = Some(total);
    }
    out.into_iter()
        .map(|x| x.ok_or_else(|| bad("missing choice")))
        .collect()
}

fn hash_str(s: &str) -> u64 {
    let mut h = DefaultHasher::new();
    s.hash(&mut h);
    h.finish()
}

impl UtteranceScorer for LlmScorer {
    fn score(&self, utterance: &str, commands: &[Command]) -> Result<Vec<f64>, ScoreError> {
        let prompts: Vec<String> = commands.iter().map(|c| self.prompt(c)).collect();
        let keys: Vec<(u64, String)> = prompts.iter().map(|p| (hash_str(p), utterance.to_string())).collect();
        let mut out: Vec<Option<f64>> = {
            let cache = self.cache.read().unwrap();
            keys.iter().map(|k| cache.get(k).copied()).collect()
        };
        let mut missing: Vec<usize> = Vec::new();
        for (i, k) in keys.iter().enumerate() {
            if out[i].is_none() && !missing.iter().any(|&j| keys[j] == *k) {
                missing.push(i);
            }
        }
        for chunk in missing.chunks(self.config.batch_size.max(1)) {
            let batch: Vec<String> = chunk.iter().map(|&i| prompts[i].clone()).collect();
            let scores = match self.request(&batch, utterance) {
                Ok(s) => s,
                Err(ScoreError::Transport(_)) if self.config.fallback_to_templates => {
                    return self.fallback.score(utterance, commands);
                }
                Err(e) => return Err(e),
            };
            let mut cache = self.cache.write().unwrap();
            for (&i, s) in chunk.iter().zip(scores) {
                cache.insert(keys[i].clone(), s);
            }
        }
        let cache = self.cache.read().unwrap();
        for (i, k) in keys.iter().enumerate() {
            if out[i].is_none() {
                out[i] = cache.get(k).copied();
            }
        }
        Ok(out.into_iter().map(|x| x.expect("scored")).collect())
    }

    fn name(&self) -> &str {
        "llm"
    }
}
