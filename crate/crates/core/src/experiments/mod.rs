//! Sweeps, baselines, evaluation, metrics files and plots.

mod eval;
mod heuristics;
mod metrics;
mod plot;
mod sweep;

pub use eval::{check_actors, eval_seeds, evaluate, EvalResult, GreedyActors, Heuristic, JointPolicy};
pub use heuristics::{heuristic_action, heuristic_joint, HeuristicPolicy, GREEDY_SPLIT};
pub use metrics::{read_metrics, MetricsAppender, MetricsRow};
pub use plot::{aggregate, emit_plot, render_svg, PlotSpec, Point, Series, XAxis, YAxis};
pub use sweep::{
    checkpoint_path, eval_path, metrics_path, run_experiment, run_training, ExperimentSpec,
    GridBlock, SweepSummary,
};
