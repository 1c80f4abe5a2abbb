//! File formats, the analysis pipeline and the parallel simulation runner
//! behind the `rdjoint` command.

pub mod analyze;
pub mod config;
pub mod error;
pub mod input;
pub mod simulate;

pub use analyze::{analyze, AnalysisResult, AnalyzeOptions, BandChoice};
pub use config::parse_experiment;
pub use error::{CliError, ExitKind};
pub use input::{load_sample, write_sample, Schema};
pub use simulate::{simulate, SimulationOutput};
