//! Experiment driver: config handling, subcommands and plot-ready output.

pub mod app;
pub mod commands;
pub mod config;
pub mod plotdata;

pub use app::{main_with, Cli, EXIT_ERROR, EXIT_PASS, EXIT_PROPERTY_FAILURE};
pub use commands::{run, Assertion, Outcome};
pub use config::{Kind, Knobs};
pub use plotdata::{emit_plotdata, PlotData};
