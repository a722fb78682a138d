//! File formats: run configuration, binary maps, history text, validation and
//! timing CSV.

pub mod config;
pub mod history;
pub mod mapfile;
pub mod timing;
pub mod validate;

pub use config::{load_config, parse_config, ConfigError, InitialMap, RunConfig};
pub use history::{append_history, read_history, HistoryError, HistoryRecord, RealizationStats};
pub use mapfile::{read_map, write_map, MapFileError};
pub use timing::{write_timing_csv, Bucket, Stopwatch, TimingError, TimingReport};
pub use validate::{validate_files, validate_records, ValidateError, ValidationReport, DEFAULT_TOLERANCE};
