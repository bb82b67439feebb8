//! Command-line front end: scenario files, shipped presets, table output and
//! the invariant suites.

pub mod presets;
pub mod properties;
pub mod runner;
pub mod scenario_file;
pub mod table;
