//! Parameter sweeps over carrier distortion, modulating shape, frequency and
//! depth, with checkpointed parallel execution and result summaries.

pub mod plan;
pub mod results;
pub mod run;
pub mod summary;
pub mod svg;

pub use plan::{Durations, MeterSettings, SweepPlan};
pub use results::{read_results_csv, write_results_csv, Checkpoint, PointKey, RESULTS_HEADER};
pub use run::{
    grid_points, run_point, run_point_traced, run_stage1, run_stage2, run_sweep, GridPoint, PointFailure, PointRecord, RunMetadata,
    SweepOptions, SweepResult,
};
pub use summary::{summarize, LinearFit, OrderingCheck, Summary};
pub use svg::write_charts;
