//! Reference profiles, closed-loop runs against the model or the plant,
//! tracking and smoke metrics, and sweep summaries.

mod plot;
mod profile;
mod report;
mod run;

pub use plot::run_svg;
pub use profile::{build_profile, OpRefMode, ProfileSpec, ProfileStep, ReferenceProfile, SPEED_ENVELOPE};
pub use report::{check_sweep, write_summary_csv, SweepRow};
pub use run::{
    compute_metrics, run_closed_loop, LoopTarget, RunMetrics, RunResult, RUN_CSV_HEADER, TRANSIENT_HALF_WIDTH,
};
