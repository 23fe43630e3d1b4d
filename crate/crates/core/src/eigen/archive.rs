//! Versioned eigen-library archive.
//!
//! Layout: the 8-byte magic `ROVIBLIB`, a little-endian u32 format version,
//! a little-endian u64 header length, a JSON header (model, grid, channels,
//! provenance hash, per-state metadata and all channel eigenvalues), then
//! the bound-state vectors as little-endian f64 in header order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{provenance_hash, BoundState, ChannelStates, EigenLibrary};
use crate::error::{Error, Result};
use crate::grid::{ChannelSet, RadialGrid};
use crate::molecule::MoleculeModel;

pub const ARCHIVE_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"ROVIBLIB";

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    hash: String,
    model: MoleculeModel,
    grid: RadialGrid,
    channels: ChannelSet,
    states: Vec<ChannelHeader>,
}

#[derive(Serialize, Deserialize)]
struct ChannelHeader {
    n: u32,
    energies: Vec<f64>,
    box_contaminated: Vec<bool>,
}

pub fn write_archive(library: &EigenLibrary, path: impl AsRef<Path>) -> Result<()> {
    let header = Header {
        version: ARCHIVE_VERSION,
        hash: library.hash.clone(),
        model: library.model.clone(),
        grid: library.grid,
        channels: library.channels.clone(),
        states: library
            .states
            .iter()
            .map(|c| ChannelHeader {
                n: c.n,
                energies: c.energies.clone(),
                box_contaminated: c.bound.iter().map(|s| s.box_contaminated).collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Archive(e.to_string()))?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&ARCHIVE_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for s in library.bound_states() {
        for x in &s.vector {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_archive(path: impl AsRef<Path>) -> Result<EigenLibrary> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Archive("not an eigen-library archive".into()));
    }
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != ARCHIVE_VERSION {
        return Err(Error::Archive(format!(
            "archive version {version}, expected {ARCHIVE_VERSION}"
        )));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    r.read_exact(&mut json)?;
    let header: Header =
        serde_json::from_slice(&json).map_err(|e| Error::Archive(e.to_string()))?;

    let expected = provenance_hash(&header.model, &header.grid, &header.channels);
    if header.hash != expected {
        return Err(Error::Archive(format!(
            "provenance hash mismatch: archive {} vs recomputed {expected}",
            header.hash
        )));
    }
    if header.states.len() != header.channels.len() {
        return Err(Error::Archive("channel count mismatch".into()));
    }

    let np = header.grid.n_points;
    let threshold = header.model.dissociation_threshold_au();
    let mut buf = vec![0u8; 8 * np];
    let mut states = Vec::with_capacity(header.states.len());
    for ch in header.states {
        let n_bound = ch.energies.iter().take_while(|&&e| e < threshold).count();
        if n_bound != ch.box_contaminated.len() {
            return Err(Error::Archive(format!(
                "bound-state count mismatch in channel N = {}",
                ch.n
            )));
        }
        let mut bound = Vec::with_capacity(n_bound);
        for nu in 0..n_bound {
            r.read_exact(&mut buf)?;
            let vector = buf
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                .collect();
            bound.push(BoundState {
                nu,
                n: ch.n,
                energy: ch.energies[nu],
                vector,
                box_contaminated: ch.box_contaminated[nu],
            });
        }
        states.push(ChannelStates {
            n: ch.n,
            energies: ch.energies,
            bound,
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Archive(format!(
            "{} trailing bytes after payload",
            rest.len()
        )));
    }
    Ok(EigenLibrary {
        model: header.model,
        grid: header.grid,
        channels: header.channels,
        hash: header.hash,
        states,
    })
}
