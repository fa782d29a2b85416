//! `AGFW` parameter files.
//!
//! Layout (all integers little-endian `u32`):
//!
//! ```text
//! "AGFW" | version | count | count × { name_len | name (UTF-8) | rank | extents… | f32 LE values… }
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::nn::ParamStore;
use crate::tensor::Scalar;

pub const MAGIC: [u8; 4] = *b"AGFW";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Ordered named arrays.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: IndexMap<String, Entry>,
}

impl Checkpoint {
    pub fn insert(&mut self, name: impl Into<String>, shape: &[usize], values: Vec<f32>) {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        self.entries.insert(
            name.into(),
            Entry {
                shape: shape.to_vec(),
                values,
            },
        );
    }

    pub fn get(&self, name: &str) -> Option<&Entry> {
        self.entries.get(name)
    }

    /// Snapshot of every parameter in `store`.
    pub fn from_store<T: Scalar>(store: &ParamStore<T>) -> Self {
        let mut ck = Checkpoint::default();
        for (name, t) in store.iter() {
            let values = t.data().iter().map(|v| v.to_f64_lossy() as f32).collect();
            ck.insert(name, t.shape(), values);
        }
        ck
    }

    /// Copies values into `store`. Every parameter of the store must be
    /// present with a matching shape; entries under `prefix_ignored` are
    /// skipped, anything else unknown is rejected.
    pub fn apply_to<T: Scalar>(&self, store: &ParamStore<T>, prefix_ignored: &str) -> Result<()> {
        for (name, _) in store.iter() {
            if !self.entries.contains_key(name) {
                return Err(Error::MissingParam(name.to_string()));
            }
        }
        for (name, e) in &self.entries {
            if !prefix_ignored.is_empty() && name.starts_with(prefix_ignored) {
                continue;
            }
            let values: Vec<T> = e.values.iter().map(|&v| T::from_f64_lossy(f64::from(v))).collect();
            store.assign(name, &e.shape, &values).map_err(|err| match err {
                Error::MissingParam(n) => Error::Config(format!("checkpoint has unknown parameter `{n}`")),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(&MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, e) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(e.shape.len() as u32).to_le_bytes())?;
            for &d in &e.shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let mut buf = Vec::with_capacity(4 * e.values.len());
            for v in &e.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to memory");
        out
    }

    /// Parses a checkpoint; `path` only labels errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0, path };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::format(path, 0, format!("bad magic {magic:?}, expected \"AGFW\"")));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(path, 4, format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut ck = Checkpoint::default();
        for _ in 0..count {
            let at = r.pos;
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| Error::format(path, at as u64 + 4, "parameter name is not UTF-8"))?
                .to_string();
            let rank = r.u32()? as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32()? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(4 * n)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            if ck.entries.contains_key(&name) {
                return Err(Error::format(path, at as u64, format!("duplicate parameter `{name}`")));
            }
            ck.entries.insert(name, Entry { shape, values });
        }
        if r.pos != bytes.len() {
            return Err(Error::format(path, r.pos as u64, "trailing bytes after last parameter"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::format(self.path, self.pos as u64, format!("truncated: needed {n} more bytes"))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
