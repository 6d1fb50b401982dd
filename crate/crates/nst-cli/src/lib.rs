//! Library surface behind the `nst` binary: file loading with the exit
//! codes the CLI contract mandates, and the reproduction demo suite.

pub mod demo;

use nst_core::fragment::TheoryFragment;
use nst_core::model::FiniteModel;
use nst_core::refuter::Hints;
use std::path::{Path, PathBuf};

/// A failure that already knows its exit code: 2 for usage and input
/// problems, 3 for internal or environment failures.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: msg.into(),
    }
}

pub fn internal(msg: impl Into<String>) -> Failure {
    Failure {
        code: 3,
        message: msg.into(),
    }
}

/// Fixture directory: `NST_FIXTURES` when set, `fixtures/` otherwise.
pub fn fixtures_dir() -> PathBuf {
    std::env::var_os("NST_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("fixtures"))
}

pub fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

pub fn load_theory(path: &Path) -> Result<TheoryFragment, Failure> {
    let text = read_file(path)?;
    let t = TheoryFragment::parse(&text)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    t.validate()
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(t)
}

pub fn load_model(path: &Path) -> Result<FiniteModel, Failure> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

pub fn load_hints(path: &Path) -> Result<Hints, Failure> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// A fixture differs from user input: its absence is an environment
/// failure (exit 3), not a usage error.
pub fn load_fixture_model(dir: &Path, name: &str) -> Result<FiniteModel, Failure> {
    let path = dir.join("models").join(name);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| internal(format!("missing fixture {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| internal(format!("{}: {e}", path.display())))
}

pub fn load_fixture_hints(dir: &Path, name: &str) -> Result<Hints, Failure> {
    let path = dir.join("hints").join(name);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| internal(format!("missing fixture {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| internal(format!("{}: {e}", path.display())))
}
