//! File formats, batch runs and the command-line driver for `sass-core`.

pub mod metrics_io;
pub mod oracle;
pub mod replay;
pub mod scenario_file;
pub mod sweep;
pub mod trace_io;

pub use scenario_file::{load_scenario, parse_scenario, scenario_to_text, LoadError};
pub use trace_io::{decode_trace, encode_trace, read_trace, trace_hash, write_trace, TraceError};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const VALIDATION: u8 = 3;
    pub const INTEGRITY: u8 = 4;
}

/// Environment variable naming the default output directory.
pub const TRACE_DIR_ENV: &str = "SASS_TRACE_DIR";
