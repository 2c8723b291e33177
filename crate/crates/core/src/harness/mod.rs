//! Configuration, file formats and the Monte-Carlo experiment driver.

pub mod config;
pub mod io;
pub mod mc;

pub use config::{emit_config, parse_config, McSettings, ModelConfig};
pub use io::{format_fit, format_latent, format_series, parse_fit, parse_series, read_series, write_series, FitSummary};
pub use mc::{run_mc, McCell, McDesign, McStat, McTable};
