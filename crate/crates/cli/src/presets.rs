//! Scenario files shipped with the binary, one per published table.

use crate::scenario_file::{ScenarioFile, ScenarioFileError};

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../presets/", $name, ".toml")))),*]
    };
}

pub const PRESETS: &[(&str, &str)] = presets!(
    "table2",
    "table3",
    "table4",
    "table5",
    "table_s3",
    "table_s4",
    "table_s5",
    "table_s6",
    "table_s7",
    "table_s8",
    "table_s9",
    "table_s10",
    "table_s11",
    "table_s12",
    "table_s13",
    "table_s14",
    "table_s15",
    "table_s16",
    "table_s17",
);

pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load_preset(name: &str) -> Result<ScenarioFile, ScenarioFileError> {
    let src = preset_source(name).ok_or_else(|| ScenarioFileError(format!("unknown preset '{name}'")))?;
    ScenarioFile::parse(src).map_err(|e| ScenarioFileError(format!("preset '{name}': {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_has_a_matched_row() {
        for (name, _) in PRESETS {
            let f = load_preset(name).unwrap();
            assert_eq!(&f.name, name);
            // The user-scale sensitivity tables have no matched row by design.
            let expect_matched = !matches!(*name, "table_s16" | "table_s17");
            assert_eq!(f.matched_variant().is_some(), expect_matched, "{name}");
        }
    }

    #[test]
    fn main_table_cutoffs() {
        let cutoff = |n| load_preset(n).unwrap().cutoff;
        assert_eq!(cutoff("table2"), 0.689);
        assert_eq!(cutoff("table3"), 0.4);
        assert_eq!(cutoff("table4"), 0.63);
        assert_eq!(cutoff("table5"), 0.61);
        assert_eq!(cutoff("table_s3"), 0.82);
        assert_eq!(cutoff("table_s6"), 0.552);
    }
}
