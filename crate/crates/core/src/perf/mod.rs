//! Scaling metrics, straggler detection, strategy advice, and report and
//! chart output over benchmark runs.

pub mod advice;
pub mod metrics;
pub mod plot;
pub mod report;
pub mod straggler;

pub use advice::{advise_strategy, Recommendation};
pub use metrics::{
    ratio_comp_comm, ratio_comp_io, speedup_efficiency, theoretical_ratio, total_time, Components, Ratio, Speedup,
};
pub use plot::{emit_plots, plot_ranks, plot_speedup, plot_total_time};
pub use report::{emit_report, write_csv, BenchReport, ReportOptions, ScalingPoint};
pub use straggler::{detect_stragglers, StragglerPolicy, StragglerVerdict};
