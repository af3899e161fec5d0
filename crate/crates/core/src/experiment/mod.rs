//! Sweeps, output files, the series oracle and the `phi4` command line.

pub mod cli;
pub mod csv;
pub mod series;
pub mod svg;
pub mod sweep;
pub mod verify;

pub use cli::cli_main;
pub use csv::{emit_csv, render_csv, CSV_HEADER};
pub use series::{perturbative_series, SeriesTable};
pub use svg::emit_svg;
pub use sweep::{run_sweep, OutputFormat, SweepConfig, SweepResult, SweepRow};
