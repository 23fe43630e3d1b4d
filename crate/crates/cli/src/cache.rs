//! Eigen-library cache. An archive is reused exactly when its file name,
//! the provenance hash of (model, grid, channels), matches.

use std::path::{Path, PathBuf};

use rovib_core::eigen::{provenance_hash, read_archive, write_archive, EigenLibrary};
use rovib_core::grid::{ChannelSet, RadialGrid};
use rovib_core::molecule::MoleculeModel;

use crate::error::{CliError, Context, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CacheOutcome {
    Hit,
    Miss,
}

pub fn archive_path(cache_dir: &Path, hash: &str) -> PathBuf {
    cache_dir.join(format!("{hash}.rovib"))
}

/// Loads the library for (model, grid, channels) from `cache_dir`, or builds
/// and stores it.
pub fn load_or_build(
    cache_dir: &Path,
    model: &MoleculeModel,
    grid: RadialGrid,
    channels: ChannelSet,
) -> Result<(EigenLibrary, CacheOutcome)> {
    let hash = provenance_hash(model, &grid, &channels);
    let path = archive_path(cache_dir, &hash);
    if path.is_file() {
        let lib =
            read_archive(&path).context(|| format!("reading cached library {}", path.display()))?;
        return Ok((lib, CacheOutcome::Hit));
    }
    let lib =
        EigenLibrary::build(model, grid, channels).context(|| "building eigen library".into())?;
    std::fs::create_dir_all(cache_dir).map_err(|e| CliError::io(cache_dir, e))?;
    // Write under a temporary name so a crash never leaves a truncated hit.
    let tmp = path.with_extension("partial");
    write_archive(&lib, &tmp).context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
    Ok((lib, CacheOutcome::Miss))
}
