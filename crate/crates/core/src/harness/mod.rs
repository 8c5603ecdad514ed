//! Configuration, experiment grid, persistence and post-processing.

mod config;
mod constellation;
mod diagnostics;
mod efficiency;
mod run;

pub use config::{parse_list, ConfigOverrides, ExperimentConfig, MetaOverrides, Method, Profile, DESK_HIDDEN};
pub use constellation::{export_constellation, ConstellationDoc, ConstellationPoint, ReceivedPoint};
pub use diagnostics::{channel_stats, gradient_check, ChannelStats, GradCheckReport};
pub use efficiency::{efficiency_analysis, isotonic_clamp, EfficiencyRow, EfficiencyStatus};
pub use run::{
    read_metrics, run_experiment, summarize, write_csv, write_outputs, ExperimentOutput, HashRecord,
    MetricsRecord, OutputPaths, SummaryRecord,
};
