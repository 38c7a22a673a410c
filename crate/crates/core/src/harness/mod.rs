//! Seeded Monte Carlo experiments: configuration, presets, execution and output.

pub mod config;
pub mod output;
pub mod presets;
pub mod runner;

pub use config::{ExperimentConfig, ObjectiveConfig, PolicyKind, PolicySpec, TestParams, OUTPUT_DIR_ENV};
pub use output::{emit_csv, emit_plot_script, write_outputs};
pub use presets::{fig3, fig4, fig5, preset};
pub use runner::{run_experiment, run_policy, SummaryRow, SummaryTable};
