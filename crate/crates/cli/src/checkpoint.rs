//! Per-unit result files so interrupted sweeps resume where they stopped.

use crate::table::{rows_from_json, rows_to_json, write_atomic, Row};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Rows computed for one sweep unit, plus any invariant violations found.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Unit {
    pub rows: Vec<Row>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Checkpoints {
    dir: Option<PathBuf>,
    /// Everything that determines a unit's result besides its key.
    fingerprint: String,
}

impl Checkpoints {
    pub fn new(dir: Option<&Path>, fingerprint: String) -> std::io::Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d)?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf), fingerprint })
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.json")))
    }

    /// A stored unit, if present and computed under the same fingerprint.
    pub fn load(&self, key: &str) -> Option<Unit> {
        let text = std::fs::read(self.path(key)?).ok()?;
        let v: Value = serde_json::from_slice(&text).ok()?;
        if v["fingerprint"] != self.fingerprint.as_str() {
            return None;
        }
        let violations = v["violations"].as_array()?.iter().map(|s| s.as_str().map(str::to_string)).collect::<Option<_>>()?;
        Some(Unit { rows: rows_from_json(&v["rows"])?, violations })
    }

    pub fn store(&self, key: &str, unit: &Unit) -> std::io::Result<()> {
        let Some(path) = self.path(key) else {
            return Ok(());
        };
        let v = json!({
            "fingerprint": self.fingerprint,
            "rows": rows_to_json(&unit.rows),
            "violations": unit.violations,
        });
        write_atomic(&path, &serde_json::to_vec(&v).map_err(std::io::Error::other)?)
    }

    /// Load `key` or compute and store it.
    pub fn run<E>(&self, key: &str, compute: impl FnOnce() -> Result<Unit, E>) -> Result<Unit, E>
    where
        E: From<std::io::Error>,
    {
        if let Some(u) = self.load(key) {
            return Ok(u);
        }
        let u = compute()?;
        self.store(key, &u)?;
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::Cell;

    #[test]
    fn resumes_only_matching_fingerprint() {
        let dir = tempfile::tempdir().unwrap();
        let unit = Unit { rows: vec![vec![Cell::Int(1), Cell::Float(0.5)]], violations: vec!["x".into()] };
        let a = Checkpoints::new(Some(dir.path()), "seed=1".into()).unwrap();
        a.store("m-5", &unit).unwrap();
        assert_eq!(a.load("m-5"), Some(unit.clone()));
        let b = Checkpoints::new(Some(dir.path()), "seed=2".into()).unwrap();
        assert_eq!(b.load("m-5"), None);
        let calls = std::cell::Cell::new(0);
        let got = a
            .run::<std::io::Error>("m-5", || {
                calls.set(calls.get() + 1);
                Ok(Unit::default())
            })
            .unwrap();
        assert_eq!((got, calls.get()), (unit, 0));
    }

    #[test]
    fn disabled_without_directory() {
        let c = Checkpoints::new(None, String::new()).unwrap();
        c.store("k", &Unit::default()).unwrap();
        assert_eq!(c.load("k"), None);
    }
}
