//! Benchmark fixtures shared by the criterion targets.

use std::path::PathBuf;

use nopath_core::{load_scenario, Scenario};

/// Loads one of the scenarios shipped in the repository's `scenarios/` directory.
pub fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name);
    load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
