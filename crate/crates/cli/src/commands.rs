//! `run` and `eval`.

use anyhow::{anyhow, Context, Result};
use clips_core::assistance::{to_jsonl, AssistMode, Episode};
use clips_core::evaluation::{run_episode, run_pack, write_report, PackOptions, PackReport, RunSpec, ScenarioPack};
use clips_core::inference::Mode;
use clips_core::utterance::UtteranceScorer;
use clips_core::Scenario;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug)]
pub struct RunArgs {
    pub scenario: String,
    pub mode: String,
    pub assist: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

pub fn parse_mode(s: &str) -> Result<Mode> {
    Mode::parse(s).ok_or_else(|| anyhow!("unknown inference mode '{s}' (multimodal, action-only, language-only)"))
}

pub fn parse_assist(s: &str) -> Result<AssistMode> {
    AssistMode::parse(s).ok_or_else(|| {
        let all: Vec<_> = AssistMode::ALL.iter().map(|m| m.as_str()).collect();
        anyhow!("unknown assistance mode '{s}' ({})", all.join(", "))
    })
}

/// Play one episode and write its trace. Returns the summary printed to stdout.
pub fn run(args: &RunArgs, scorer: &dyn UtteranceScorer) -> Result<(Scenario, Episode, String)> {
    let scn = crate::load_scenario(&args.scenario)?;
    let spec = RunSpec::new(
        &args.mode,
        parse_mode(&args.mode)?,
        parse_assist(&args.assist)?,
        args.seed,
    );
    let ep = run_episode(&scn, &spec, scorer).with_context(|| format!("running {}", scn.name))?;
    let mut out = String::new();
    writeln!(out, "scenario   {}", scn.name)?;
    writeln!(out, "method     {} / {}", args.mode, args.assist)?;
    writeln!(out, "success    {:.2}", ep.success_rate())?;
    writeln!(out, "length     {:.2}", ep.mean_length())?;
    writeln!(out, "human cost {:.2}", ep.mean_human_cost())?;
    if let Some(p) = ep.p_true_goal {
        writeln!(out, "p(true)    {p:.4}")?;
    }
    let mut opts: Vec<_> = ep.option_marginals().into_iter().collect();
    opts.sort_by(|a, b| a.0.cmp(&b.0));
    let opts: Vec<String> = opts.iter().map(|(id, p)| format!("{id}={p:.2}")).collect();
    writeln!(
        out,
        "options    {}",
        if opts.is_empty() {
            "-".to_string()
        } else {
            opts.join(" ")
        }
    )?;
    if let Some(path) = &args.out {
        std::fs::write(path, to_jsonl(&ep.events)).with_context(|| format!("writing {}", path.display()))?;
        writeln!(out, "trace      {} ({} events)", path.display(), ep.events.len())?;
    }
    Ok((scn, ep, out))
}

#[derive(Clone, Debug)]
pub struct EvalArgs {
    /// Pack directory; the bundled pack when absent.
    pub pack: Option<PathBuf>,
    pub report: PathBuf,
    pub seed: u64,
    pub n_boot: usize,
}

/// Evaluate every method of the comparison table on a pack and write the
/// report files.
pub fn eval(args: &EvalArgs, scorer: &dyn UtteranceScorer) -> Result<(PackReport, String)> {
    let pack = match &args.pack {
        Some(dir) => ScenarioPack::load(dir).map_err(|e| anyhow!(e))?,
        None => ScenarioPack::bundled(),
    };
    let opts = PackOptions {
        reference: None,
        n_boot: args.n_boot,
        seed: args.seed,
    };
    let report = run_pack(&pack, &RunSpec::table(args.seed), scorer, &opts);
    let written = write_report(&report, &args.report).with_context(|| format!("writing {}", args.report.display()))?;
    let text = table(&report, &written, &args.report);
    Ok((report, text))
}

fn table(report: &PackReport, written: &[PathBuf], report_path: &Path) -> String {
    let cell = |m: Option<f64>| m.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut out = String::new();
    let _ = writeln!(
        out,
        "pack {} ({} runs, reference {})",
        report.pack,
        report.details.len(),
        report.reference
    );
    let _ = writeln!(
        out,
        "{:<18} {:>8} {:>9} {:>7} {:>9} {:>9}",
        "method", "P(true)", "precision", "recall", "rel.len", "rel.cost"
    );
    for s in &report.summaries {
        let _ = writeln!(
            out,
            "{:<18} {:>8} {:>9} {:>7} {:>9} {:>9}",
            s.method,
            cell(s.p_true_goal.map(|m| m.mean)),
            cell(s.precision.map(|m| m.mean)),
            cell(s.recall.map(|m| m.mean)),
            cell(s.rel_plan_length.map(|m| m.mean)),
            cell(s.rel_human_cost.map(|m| m.mean)),
        );
    }
    for f in &report.failures {
        let _ = writeln!(out, "failed: {} / {}: {}", f.scenario, f.method, f.error);
    }
    let _ = writeln!(
        out,
        "wrote {} and {} more files",
        report_path.display(),
        written.len().saturating_sub(1)
    );
    out
}
