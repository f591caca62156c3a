//! Scenario packs and the runner that plays every (scenario, method) pair and
//! aggregates a comparison table.

use super::human::SimulatedHuman;
use super::metrics::{compute_metrics, mean_se, pearson_bootstrap, Correlation, EpisodeMetrics, MeanSe};
use super::ratings::Ratings;
use crate::assistance::{
    observation_prefix, robot_options, run_assistant, to_jsonl, AssistConfig, AssistError, AssistMode, Episode,
};
use crate::env::{CostProfile, Scenario};
use crate::inference::{InferenceConfig, Mode};
use crate::planner::{optimal_plan, GoalFormula, HistoryState, Restriction};
use crate::utterance::UtteranceScorer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackEntry {
    /// Scenario file, relative to the manifest.
    pub file: String,
    /// Optimal assistance options: key and door ids the assistant should use.
    pub options: Vec<String>,
    #[serde(default)]
    pub tags: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PackManifest {
    pub name: String,
    pub scenarios: Vec<PackEntry>,
    /// Optional ratings CSV, relative to the manifest.
    #[serde(default)]
    pub ratings: Option<String>,
}

#[derive(Clone, Debug)]
pub struct PackScenario {
    pub scenario: Scenario,
    pub entry: PackEntry,
}

#[derive(Clone, Debug, Default)]
pub struct ScenarioPack {
    pub name: String,
    pub scenarios: Vec<PackScenario>,
    pub ratings: Option<Ratings>,
}

impl ScenarioPack {
    /// Load `dir/pack.json` and every scenario it lists.
    pub fn load(dir: &Path) -> Result<ScenarioPack, String> {
        let read = |rel: &str| {
            let p = dir.join(rel);
            std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))
        };
        let manifest = read("pack.json")?;
        ScenarioPack::from_sources(&manifest, read)
    }

    /// The six-scenario pack compiled into the binary.
    pub fn bundled() -> ScenarioPack {
        ScenarioPack::from_sources(BUNDLED_MANIFEST, |file| {
            BUNDLED_FILES
                .iter()
                .find(|(name, _)| *name == file)
                .map(|(_, text)| text.to_string())
                .ok_or_else(|| format!("{file}: not bundled"))
        })
        .expect("bundled pack is valid")
    }

    /// Build a pack from manifest text, reading scenario and ratings files
    /// through `read`.
    pub fn from_sources(manifest: &str, read: impl Fn(&str) -> Result<String, String>) -> Result<ScenarioPack, String> {
        let manifest: PackManifest = serde_json::from_str(manifest).map_err(|e| format!("pack.json: {e}"))?;
        let mut scenarios = Vec::new();
        for entry in manifest.scenarios {
            let text = read(&entry.file)?;
            let scenario = Scenario::parse(&text).map_err(|e| format!("{}: {e}", entry.file))?;
            scenarios.push(PackScenario { scenario, entry });
        }
        let ratings = match &manifest.ratings {
            Some(r) => Some(Ratings::parse(&read(r)?).map_err(|e| format!("{r}: {e}"))?),
            None => None,
        };
        let pack = ScenarioPack {
            name: manifest.name,
            scenarios,
            ratings,
        };
        pack.validate()?;
        Ok(pack)
    }

    /// Annotation ids must name keys or doors of their scenario.
    pub fn validate(&self) -> Result<(), String> {
        for ps in &self.scenarios {
            let scn = &ps.scenario;
            for id in &ps.entry.options {
                if scn.key_index(id).is_none() && scn.door_index(id).is_none() {
                    return Err(format!("{}: option '{id}' is not a key or door", scn.name));
                }
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&PackScenario> {
        self.scenarios.iter().find(|p| p.scenario.name == name)
    }
}

const BUNDLED_MANIFEST: &str = include_str!("../../data/pack/pack.json");
const BUNDLED_FILES: &[(&str, &str)] = &[
    (
        "ambiguous-predicates.json",
        include_str!("../../data/pack/ambiguous-predicates.json"),
    ),
    (
        "ambiguous-indexicals.json",
        include_str!("../../data/pack/ambiguous-indexicals.json"),
    ),
    (
        "partial-instructions.json",
        include_str!("../../data/pack/partial-instructions.json"),
    ),
    (
        "uncertain-goals.json",
        include_str!("../../data/pack/uncertain-goals.json"),
    ),
    (
        "joint-instructions.json",
        include_str!("../../data/pack/joint-instructions.json"),
    ),
    (
        "safe-assistance.json",
        include_str!("../../data/pack/safe-assistance.json"),
    ),
];

/// Assistance options of a cost-minimal joint plan for the true goal and
/// profile, searched exhaustively from the end of the scripted prefix: the
/// keys and doors the assistant itself picks up or unlocks. `None` if no plan
/// is found within `budget` expansions.
pub fn derive_options(scn: &Scenario, budget: usize) -> Result<Option<Vec<String>>, String> {
    let prefix = observation_prefix(scn)?;
    let goal = scn.true_goal_spec();
    let profile = CostProfile::bundled(goal.profile).ok_or("unknown cost profile")?;
    let out = optimal_plan(
        scn,
        &profile,
        &HistoryState::new(prefix.end),
        &GoalFormula::collect_gem(goal.gem),
        Restriction::Joint,
        budget,
    );
    Ok(out.plan().map(|p| {
        let mut ids = robot_options(scn, &p.steps);
        ids.sort();
        ids
    }))
}

/// One method in a comparison: an inference variant plus an assistance mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub name: String,
    pub inference: Mode,
    pub assist: AssistConfig,
}

impl RunSpec {
    pub fn new(name: &str, inference: Mode, mode: AssistMode, seed: u64) -> RunSpec {
        RunSpec {
            name: name.to_string(),
            inference,
            assist: AssistConfig::default().with_mode(mode).with_seed(seed),
        }
    }

    /// The comparison table's methods; the first is the reference.
    pub fn table(seed: u64) -> Vec<RunSpec> {
        vec![
            RunSpec::new("clips", Mode::Multimodal, AssistMode::QmdpOffline, seed),
            RunSpec::new("action-only", Mode::ActionOnly, AssistMode::QmdpOffline, seed),
            RunSpec::new("language-only", Mode::LanguageOnly, AssistMode::QmdpOffline, seed),
            RunSpec::new("literal-naive", Mode::Multimodal, AssistMode::LiteralNaive, seed),
            RunSpec::new(
                "literal-efficient",
                Mode::Multimodal,
                AssistMode::LiteralEfficient,
                seed,
            ),
        ]
    }

    pub fn inference_config(&self) -> InferenceConfig {
        InferenceConfig::default().with_mode(self.inference)
    }
}

/// One episode with a simulated principal that starts where the script ends.
pub fn run_episode(scn: &Scenario, spec: &RunSpec, scorer: &dyn UtteranceScorer) -> Result<Episode, AssistError> {
    let prefix = observation_prefix(scn).map_err(AssistError::Script)?;
    let mut human = SimulatedHuman::new(scn, &prefix.end, spec.assist.planner_budget);
    run_assistant(scn, &spec.inference_config(), &spec.assist, &mut human, scorer)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DetailRow {
    pub scenario: String,
    pub method: String,
    pub metrics: EpisodeMetrics,
    pub goal_posterior: BTreeMap<String, f64>,
    pub option_marginals: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Failure {
    pub scenario: String,
    pub method: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub p_true_goal: Option<MeanSe>,
    pub precision: Option<MeanSe>,
    pub recall: Option<MeanSe>,
    pub rel_plan_length: Option<MeanSe>,
    pub rel_human_cost: Option<MeanSe>,
    pub r_goal: Option<Correlation>,
    pub r_assist: Option<Correlation>,
    pub failures: usize,
}

#[derive(Clone, Debug, Default)]
pub struct PackReport {
    pub pack: String,
    pub reference: String,
    pub summaries: Vec<MethodSummary>,
    pub details: Vec<DetailRow>,
    pub failures: Vec<Failure>,
    /// Scenario, method and episode for every successful run.
    pub episodes: Vec<(String, String, Episode)>,
}

impl PackReport {
    pub fn summary(&self, method: &str) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn detail(&self, scenario: &str, method: &str) -> Option<&DetailRow> {
        self.details
            .iter()
            .find(|d| d.scenario == scenario && d.method == method)
    }
}

#[derive(Clone, Debug)]
pub struct PackOptions {
    /// Method the relative metrics are taken against; defaults to the first.
    pub reference: Option<String>,
    pub n_boot: usize,
    pub seed: u64,
}

impl Default for PackOptions {
    fn default() -> Self {
        PackOptions {
            reference: None,
            n_boot: 1000,
            seed: 0,
        }
    }
}

/// Play every (scenario, method) pair. A failing pair is recorded and the
/// rest still run.
pub fn run_pack(
    pack: &ScenarioPack,
    specs: &[RunSpec],
    scorer: &dyn UtteranceScorer,
    opts: &PackOptions,
) -> PackReport {
    let reference = opts
        .reference
        .clone()
        .or_else(|| specs.first().map(|s| s.name.clone()))
        .unwrap_or_default();
    let jobs: Vec<(usize, usize)> = (0..pack.scenarios.len())
        .flat_map(|i| (0..specs.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<(usize, usize, Result<Episode, String>)> = jobs
        .par_iter()
        .map(|&(i, j)| {
            (
                i,
                j,
                run_episode(&pack.scenarios[i].scenario, &specs[j], scorer).map_err(|e| e.to_string()),
            )
        })
        .collect();

    let mut report = PackReport {
        pack: pack.name.clone(),
        reference: reference.clone(),
        ..PackReport::default()
    };
    let mut episodes: BTreeMap<(usize, usize), Episode> = BTreeMap::new();
    for (i, j, r) in results {
        match r {
            Ok(ep) => {
                episodes.insert((i, j), ep);
            }
            Err(error) => report.failures.push(Failure {
                scenario: pack.scenarios[i].scenario.name.clone(),
                method: specs[j].name.clone(),
                error,
            }),
        }
    }
    let ref_idx = specs.iter().position(|s| s.name == reference);
    for ((i, j), ep) in &episodes {
        let ps = &pack.scenarios[*i];
        let reference = ref_idx.and_then(|r| episodes.get(&(*i, r)));
        let metrics = compute_metrics(ep, &ps.entry.options, reference);
        report.details.push(DetailRow {
            scenario: ps.scenario.name.clone(),
            method: specs[*j].name.clone(),
            metrics,
            goal_posterior: ep.final_belief.as_ref().map(|b| b.goals.clone()).unwrap_or_default(),
            option_marginals: ep.option_marginals().into_iter().collect(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for spec in specs {
        let rows: Vec<&DetailRow> = report.details.iter().filter(|d| d.method == spec.name).collect();
        let col = |f: &dyn Fn(&EpisodeMetrics) -> Option<f64>| {
            mean_se(&rows.iter().filter_map(|d| f(&d.metrics)).collect::<Vec<_>>())
        };
        let (r_goal, r_assist) = match &pack.ratings {
            Some(ratings) => correlations(pack, ratings, &rows, opts.n_boot, &mut rng),
            None => (None, None),
        };
        report.summaries.push(MethodSummary {
            method: spec.name.clone(),
            p_true_goal: col(&|m| m.p_true_goal),
            precision: col(&|m| Some(m.precision)),
            recall: col(&|m| Some(m.recall)),
            rel_plan_length: col(&|m| m.rel_plan_length),
            rel_human_cost: col(&|m| m.rel_human_cost),
            r_goal,
            r_assist,
            failures: report.failures.iter().filter(|f| f.method == spec.name).count(),
        });
    }
    report.episodes = episodes
        .into_iter()
        .map(|((i, j), ep)| (pack.scenarios[i].scenario.name.clone(), specs[j].name.clone(), ep))
        .collect();
    report
}

fn correlations(
    pack: &ScenarioPack,
    ratings: &Ratings,
    rows: &[&DetailRow],
    n_boot: usize,
    rng: &mut ChaCha8Rng,
) -> (Option<Correlation>, Option<Correlation>) {
    let mut goal_items = Vec::new();
    let mut goal_model = Vec::new();
    let mut option_items = Vec::new();
    let mut option_model = Vec::new();
    for d in rows {
        let Some(ps) = pack.get(&d.scenario) else { continue };
        if !d.goal_posterior.is_empty() {
            for &g in &ps.scenario.goals {
                let id = ps.scenario.gems[g].id.clone();
                goal_model.push(d.goal_posterior.get(&id).copied().unwrap_or(0.0));
                goal_items.push((d.scenario.clone(), id));
            }
        }
        let mut ids: Vec<String> = ratings
            .rows
            .iter()
            .filter(|r| r.scenario == d.scenario)
            .flat_map(|r| r.options.keys().cloned())
            .collect();
        ids.sort();
        ids.dedup();
        for id in ids {
            option_model.push(d.option_marginals.get(&id).copied().unwrap_or(0.0));
            option_items.push((d.scenario.clone(), id));
        }
    }
    let goal = pearson_bootstrap(&goal_model, &ratings.matrix(&goal_items, true), n_boot, rng).ok();
    let assist = pearson_bootstrap(&option_model, &ratings.matrix(&option_items, false), n_boot, rng).ok();
    (goal, assist)
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_default()
}

/// Comparison table, one row per method.
pub fn report_csv(report: &PackReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "method",
        "p_true_goal",
        "p_true_goal_se",
        "precision",
        "precision_se",
        "recall",
        "recall_se",
        "rel_plan_length",
        "rel_plan_length_se",
        "rel_human_cost",
        "rel_human_cost_se",
        "r_goal",
        "r_goal_lo",
        "r_goal_hi",
        "r_assist",
        "r_assist_lo",
        "r_assist_hi",
        "scenarios",
        "failures",
    ];
    w.write_record(header).expect("in-memory write");
    for s in &report.summaries {
        let ms = |m: &Option<MeanSe>| [fmt(m.map(|m| m.mean)), fmt(m.map(|m| m.se))];
        let cr = |c: &Option<Correlation>| [fmt(c.map(|c| c.r)), fmt(c.map(|c| c.lo)), fmt(c.map(|c| c.hi))];
        let mut row = vec![s.method.clone()];
        for m in [
            &s.p_true_goal,
            &s.precision,
            &s.recall,
            &s.rel_plan_length,
            &s.rel_human_cost,
        ] {
            row.extend(ms(m));
        }
        row.extend(cr(&s.r_goal));
        row.extend(cr(&s.r_assist));
        row.push(s.precision.map_or(0, |m| m.n).to_string());
        row.push(s.failures.to_string());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Per-scenario rows, plus failures with their error text.
pub fn details_csv(report: &PackReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "method",
        "p_true_goal",
        "precision",
        "recall",
        "plan_length",
        "human_cost",
        "success",
        "rel_plan_length",
        "rel_human_cost",
        "options",
        "error",
    ])
    .expect("in-memory write");
    for d in &report.details {
        let m = &d.metrics;
        let options: Vec<String> = d.option_marginals.iter().map(|(k, v)| format!("{k}:{v:.3}")).collect();
        w.write_record([
            d.scenario.clone(),
            d.method.clone(),
            fmt(m.p_true_goal),
            fmt(Some(m.precision)),
            fmt(Some(m.recall)),
            fmt(Some(m.plan_length)),
            fmt(Some(m.human_cost)),
            fmt(Some(m.success)),
            fmt(m.rel_plan_length),
            fmt(m.rel_human_cost),
            options.join(" "),
            String::new(),
        ])
        .expect("in-memory write");
    }
    for f in &report.failures {
        let mut row = vec![f.scenario.clone(), f.method.clone()];
        row.extend(std::iter::repeat_n(String::new(), 9));
        row.push(f.error.clone());
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Write the table to `report_path`, the details next to it, and one trace
/// per episode under `traces/` beside the report.
pub fn write_report(report: &PackReport, report_path: &Path) -> std::io::Result<Vec<PathBuf>> {
    let dir = report_path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut written = vec![report_path.to_path_buf()];
    std::fs::write(report_path, report_csv(report))?;
    let stem = report_path.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let details = dir.join(format!("{stem}_details.csv"));
    std::fs::write(&details, details_csv(report))?;
    written.push(details);
    let traces = dir.join("traces");
    std::fs::create_dir_all(&traces)?;
    for (scn, method, ep) in &report.episodes {
        let p = traces.join(format!("{scn}__{method}.jsonl"));
        std::fs::write(&p, to_jsonl(&ep.events))?;
        written.push(p);
    }
    Ok(written)
}
