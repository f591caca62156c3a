//! Simulated principals, scenario packs, and the metrics that compare
//! assistance methods.

mod human;
mod metrics;
mod pack;
mod ratings;

pub use human::{ground_truth_plan, HumanMode, SimulatedHuman};
pub use metrics::{
    compute_metrics, episode_precision_recall, mean_se, pearson, pearson_bootstrap, precision_recall, Correlation,
    CorrelationError, EpisodeMetrics, MeanSe,
};
pub use pack::{
    derive_options, details_csv, report_csv, run_episode, run_pack, write_report, DetailRow, Failure, MethodSummary,
    PackEntry, PackManifest, PackOptions, PackReport, PackScenario, RunSpec, ScenarioPack,
};
pub use ratings::{RatingRow, Ratings};

#[cfg(test)]
mod tests;
