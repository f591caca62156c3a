//! Acting on a belief: expected-cost minimization, posterior sampling, the
//! literal-listener baselines, and the episode driver that ties them to a
//! principal.

mod episode;
mod literal;
mod policy;
mod trace;

pub use episode::{
    observation_prefix, run_assistant, AssistConfig, AssistError, AssistMode, Episode, EpisodeRun, Prefix, PrefixStep,
    Principal, ScriptedPrincipal,
};
pub use literal::{
    command_to_goal_formula, literal_assist_plan, literal_infer_commands, robot_options, systematic_sample,
    systematic_sample_at, CommandGoal, Grounding, LiteralRun, PhaseOne, PlanFailure, UnsatisfiableCommand,
};
pub use policy::{qmdp_action, qmdp_action_avoiding, sample_hypothesis, surviving, PosteriorSampling, QmdpChoice};
pub use trace::{parse_jsonl, to_jsonl, Record, TraceEvent, TRACE_VERSION};
