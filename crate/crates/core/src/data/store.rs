//! Flat binary dataset store with a JSON sidecar.
//!
//! Layout (little endian): magic `TMHD`, format version u32, n u64, d u64,
//! response flag u8, then n fixed-width records of d features followed by
//! the response when present.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use super::{Dataset, DatasetMeta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"TMHD";
const VERSION: u32 = 1;

pub(crate) fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the record file at `path` and its metadata at `path.json`.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let has_response = dataset.responses().is_some();
    let mut header = Vec::with_capacity(25);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&(dataset.n() as u64).to_le_bytes());
    header.extend_from_slice(&(dataset.d() as u64).to_le_bytes());
    header.push(has_response as u8);
    w.write_all(&header).map_err(|e| Error::io(path, e))?;
    for i in 0..dataset.n() {
        for v in dataset.row(i) {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
        if let Some(r) = dataset.response(i) {
            w.write_all(&r.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let meta_path = sidecar_path(path);
    let json = serde_json::to_string_pretty(&dataset.meta)?;
    std::fs::write(&meta_path, json).map_err(|e| Error::io(meta_path, e))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let bad = |message: &str| Error::Store {
        path: path.to_owned(),
        message: message.to_owned(),
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 25];
    r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
    if &header[0..4] != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let d = u64::from_le_bytes(header[16..24].try_into().unwrap()) as usize;
    let has_response = header[24] == 1;
    let width = d + has_response as usize;
    let mut buf = vec![0u8; n * width * 8];
    r.read_exact(&mut buf).map_err(|_| bad("truncated records"))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| Error::io(path, e))? != 0 {
        return Err(bad("trailing bytes after records"));
    }
    let values: Vec<f64> = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let mut features = Vec::with_capacity(n * d);
    let mut response = has_response.then(|| Vec::with_capacity(n));
    for rec in values.chunks_exact(width) {
        features.extend_from_slice(&rec[..d]);
        if let Some(resp) = response.as_mut() {
            resp.push(rec[d]);
        }
    }
    let meta_path = sidecar_path(path);
    let meta: DatasetMeta = match std::fs::read_to_string(&meta_path) {
        Ok(s) => serde_json::from_str(&s)?,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => DatasetMeta::default(),
        Err(e) => return Err(Error::io(meta_path, e)),
    };
    if meta.n != 0 && (meta.n != n || meta.d != d) {
        return Err(bad("metadata disagrees with record header"));
    }
    Ok(Dataset::new(features, d, response)?.with_meta(meta))
}
