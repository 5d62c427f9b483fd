//! Embedding storage and the binary file formats.
//!
//! EMB1 container: magic `EMB1`, u32-le record count, u32-le dimension,
//! u64-le reserved (zero); each record is a u16-le id byte length, the
//! UTF-8 id, then `dim` f32-le values. Parameter files use the adjacent
//! NAC1 container: magic `NAC1`, u32-le array count, u64-le reserved; each
//! record is a u16-le name length, the UTF-8 name, a u8 rank, rank u32-le
//! dims, then the f32-le payload.

use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::model::Embedding;
use crate::scoring::EmbeddingLookup;

const EMB_MAGIC: &[u8; 4] = b"EMB1";
const NAC_MAGIC: &[u8; 4] = b"NAC1";

/// Insertion-ordered utterance-id to embedding map with a uniform
/// dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingStore {
    dim: usize,
    entries: IndexMap<String, Vec<f64>>,
    /// Model/config fingerprint carried through reports.
    pub provenance: Option<String>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: IndexMap::new(),
            provenance: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, embedding: Embedding) -> Result<()> {
        if embedding.dim() != self.dim {
            return Err(Error::Data(format!(
                "embedding '{}' has dim {}, store expects {}",
                embedding.utterance_id,
                embedding.dim(),
                self.dim
            )));
        }
        if self.entries.contains_key(&embedding.utterance_id) {
            return Err(Error::Data(format!(
                "duplicate utterance id '{}'",
                embedding.utterance_id
            )));
        }
        self.entries.insert(embedding.utterance_id, embedding.values);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(|v| v.as_slice())
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|k| k.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

impl EmbeddingLookup for EmbeddingStore {
    fn embedding(&self, utterance_id: &str) -> Option<&[f64]> {
        self.get(utterance_id)
    }
}

/// Serializes a store into EMB1 bytes (f32 precision on disk).
pub fn write_embeddings(store: &EmbeddingStore) -> Result<Vec<u8>> {
    if store.len() > u32::MAX as usize {
        return Err(Error::Data("too many embeddings for the container".into()));
    }
    let mut out = Vec::with_capacity(20 + store.len() * (2 + 8 + store.dim() * 4));
    out.extend_from_slice(EMB_MAGIC);
    out.extend_from_slice(&(store.len() as u32).to_le_bytes());
    out.extend_from_slice(&(store.dim() as u32).to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes());
    for (id, values) in store.iter() {
        let id_bytes = id.as_bytes();
        if id_bytes.len() > u16::MAX as usize {
            return Err(Error::Data(format!("utterance id too long: '{id}'")));
        }
        out.extend_from_slice(&(id_bytes.len() as u16).to_le_bytes());
        out.extend_from_slice(id_bytes);
        for &v in values {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).ok_or_else(|| {
            Error::Parse(format!("overflowing read of {what} at offset {}", self.pos))
        })?;
        if end > self.bytes.len() {
            return Err(Error::Parse(format!(
                "truncated file: {what} at offset {} needs {} bytes, {} remain",
                self.pos,
                n,
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(4 * n, what)?;
        Ok(raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect())
    }

    fn utf8(&mut self, n: usize, what: &str) -> Result<String> {
        let at = self.pos;
        let raw = self.take(n, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Parse(format!("invalid UTF-8 in {what} at offset {at}")))
    }
}

/// Parses EMB1 bytes back into a store.
pub fn read_embeddings(bytes: &[u8]) -> Result<EmbeddingStore> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != EMB_MAGIC {
        return Err(Error::Parse("bad magic at offset 0 (expected EMB1)".into()));
    }
    let count = cur.u32("record count")? as usize;
    let dim = cur.u32("dimension")? as usize;
    let reserved = cur.u64("reserved field")?;
    if reserved != 0 {
        return Err(Error::Parse(format!(
            "reserved field at offset 12 must be zero, got {reserved}"
        )));
    }
    let mut store = EmbeddingStore::new(dim);
    for i in 0..count {
        let at = cur.pos;
        let id_len = cur.u16(&format!("id length of record {i}"))? as usize;
        let id = cur.utf8(id_len, &format!("id of record {i}"))?;
        let values = cur.f32s(dim, &format!("values of record {i}"))?;
        store
            .insert(Embedding::new(id, values).map_err(|e| {
                Error::Parse(format!("record {i} at offset {at}: {e}"))
            })?)
            .map_err(|e| Error::Parse(format!("record {i} at offset {at}: {e}")))?;
    }
    if cur.pos != bytes.len() {
        return Err(Error::Parse(format!(
            "{} trailing bytes after the last record (offset {})",
            bytes.len() - cur.pos,
            cur.pos
        )));
    }
    Ok(store)
}

pub fn write_embeddings_file(path: &Path, store: &EmbeddingStore) -> Result<()> {
    std::fs::write(path, write_embeddings(store)?)?;
    Ok(())
}

pub fn read_embeddings_file(path: &Path) -> Result<EmbeddingStore> {
    let bytes = std::fs::read(path)?;
    read_embeddings(&bytes).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Serializes named arrays into NAC1 bytes (f32 precision on disk).
pub fn write_named_arrays(arrays: &[(String, Vec<usize>, Vec<f64>)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(NAC_MAGIC);
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    out.extend_from_slice(&0u64.to_le_bytes());
    for (name, shape, data) in arrays {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Data(format!(
                "array '{name}' has {} values but shape {shape:?}",
                data.len()
            )));
        }
        if name.len() > u16::MAX as usize || shape.len() > u8::MAX as usize {
            return Err(Error::Data(format!("array '{name}' name or rank too large")));
        }
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(shape.len() as u8);
        for &d in shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Parses NAC1 bytes back into named arrays.
pub fn read_named_arrays(bytes: &[u8]) -> Result<Vec<(String, Vec<usize>, Vec<f64>)>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != NAC_MAGIC {
        return Err(Error::Parse("bad magic at offset 0 (expected NAC1)".into()));
    }
    let count = cur.u32("array count")? as usize;
    cur.u64("reserved field")?;
    let mut arrays = Vec::with_capacity(count);
    for i in 0..count {
        let name_len = cur.u16(&format!("name length of array {i}"))? as usize;
        let name = cur.utf8(name_len, &format!("name of array {i}"))?;
        let rank = cur.take(1, &format!("rank of array {i}"))?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for d in 0..rank {
            shape.push(cur.u32(&format!("dim {d} of array '{name}'"))? as usize);
        }
        let len: usize = shape.iter().product();
        let data = cur.f32s(len, &format!("payload of array '{name}'"))?;
        arrays.push((name, shape, data));
    }
    Ok(arrays)
}

pub fn write_named_arrays_file(path: &Path, arrays: &[(String, Vec<usize>, Vec<f64>)]) -> Result<()> {
    std::fs::write(path, write_named_arrays(arrays)?)?;
    Ok(())
}

pub fn read_named_arrays_file(path: &Path) -> Result<Vec<(String, Vec<usize>, Vec<f64>)>> {
    let bytes = std::fs::read(path)?;
    read_named_arrays(&bytes).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}
