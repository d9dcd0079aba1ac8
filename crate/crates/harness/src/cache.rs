//! On-disk cache of discrete-velocity reference profiles, keyed by a
//! SHA-256 of the reference configuration.

use std::fs;
use std::path::{Path, PathBuf};

use fsi_core::driver::{reference_cells, reference_profile, RunSpec};
use fsi_core::dvm::DEFAULT_VELOCITY_NODES;
use fsi_core::metrics::ProfileRow;
use fsi_core::scenario::ScenarioKind;
use sha2::{Digest, Sha256};

use crate::report::{read_profile, write_profile};
use crate::{HarnessError, Result};

/// Bumped whenever the reference solver changes its output.
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceKey {
    pub scenario: ScenarioKind,
    pub epsilon: f64,
    pub cells: usize,
    pub velocity_nodes: usize,
    pub t_final: f64,
}

impl ReferenceKey {
    /// Reference for a run: same scenario, Knudsen number and final time on
    /// twice the cells with the default velocity grid.
    pub fn for_run(spec: &RunSpec) -> Self {
        ReferenceKey {
            scenario: spec.scenario,
            epsilon: spec.epsilon,
            cells: reference_cells(spec.cells),
            velocity_nodes: DEFAULT_VELOCITY_NODES,
            t_final: spec.t_final,
        }
    }

    /// Canonical text of the key; floats are written as their bit patterns.
    pub fn canonical(&self) -> String {
        format!(
            "version={CACHE_VERSION}\nsolver=dvm\nscenario={}\nepsilon={:016x}\ncells={}\nvelocity_nodes={}\nt_final={:016x}\n",
            self.scenario.name(),
            self.epsilon.to_bits(),
            self.cells,
            self.velocity_nodes,
            self.t_final.to_bits()
        )
    }

    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn path_in(&self, dir: &Path) -> PathBuf {
        dir.join(format!("{}.csv", self.digest()))
    }

    pub fn compute(&self) -> Result<Vec<ProfileRow>> {
        Ok(reference_profile(
            self.scenario,
            self.epsilon,
            self.cells,
            self.velocity_nodes,
            self.t_final,
        )?)
    }
}

/// Reads the cached reference or computes and stores it. The file is
/// written under a temporary name and renamed, so concurrent callers never
/// observe a partial file.
pub fn load_or_compute(dir: &Path, key: &ReferenceKey) -> Result<Vec<ProfileRow>> {
    let path = key.path_in(dir);
    if path.exists() {
        return read_profile(&path);
    }
    let rows = key.compute()?;
    fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_owned(),
        source,
    })?;
    let tmp = dir.join(format!("{}.{}.tmp", key.digest(), std::process::id()));
    write_profile(&tmp, &rows)?;
    let io = |source| HarnessError::Io {
        path: path.clone(),
        source,
    };
    fs::write(path.with_extension("key"), key.canonical()).map_err(io)?;
    fs::rename(&tmp, &path).map_err(io)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(epsilon: f64) -> ReferenceKey {
        ReferenceKey {
            scenario: ScenarioKind::Accuracy,
            epsilon,
            cells: 20,
            velocity_nodes: 16,
            t_final: 0.01,
        }
    }

    #[test]
    fn digest_depends_on_every_field() {
        let base = key(1e-2);
        assert_eq!(base.digest(), key(1e-2).digest());
        assert_eq!(base.digest().len(), 64);
        assert_ne!(base.digest(), key(1e-3).digest());
        assert_ne!(base.digest(), ReferenceKey { cells: 40, ..base }.digest());
        assert_ne!(base.digest(), ReferenceKey { t_final: 0.02, ..base }.digest());
    }

    #[test]
    fn cached_reference_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let k = key(1e-2);
        let first = load_or_compute(dir.path(), &k).unwrap();
        assert!(k.path_in(dir.path()).exists());
        assert_eq!(load_or_compute(dir.path(), &k).unwrap(), first);
    }
}
