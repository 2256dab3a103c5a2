//! Self-describing binary checkpoint container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "SOCDCKPT"
//! version  u32      1
//! count    u32      number of records
//! record*  name_len u16, name (UTF-8), kind u8, len u64, payload
//! ```
//!
//! Kinds: 1 = f64 array (`len` values), 2 = u64 array (`len` values),
//! 3 = raw bytes (`len` bytes). Records keep insertion order, so writing
//! the same contents twice yields identical files.

use std::path::Path;

use super::net::{Adam, PolicyNetwork};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SOCDCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Record {
    F64(Vec<f64>),
    U64(Vec<u64>),
    Bytes(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    records: Vec<(String, Record)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.records.iter().map(|(n, _)| n.as_str())
    }

    /// Insert or replace `name`.
    pub fn put(&mut self, name: &str, record: Record) {
        match self.records.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = record,
            None => self.records.push((name.to_string(), record)),
        }
    }

    pub fn put_f64(&mut self, name: &str, values: &[f64]) {
        self.put(name, Record::F64(values.to_vec()));
    }

    pub fn put_u64(&mut self, name: &str, values: &[u64]) {
        self.put(name, Record::U64(values.to_vec()));
    }

    pub fn put_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.put(name, Record::Bytes(bytes.to_vec()));
    }

    pub fn get(&self, name: &str) -> Result<&Record> {
        self.records
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, r)| r)
            .ok_or_else(|| Error::Checkpoint(format!("missing record `{name}`")))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.records.iter().any(|(n, _)| n == name)
    }

    pub fn f64s(&self, name: &str) -> Result<&[f64]> {
        match self.get(name)? {
            Record::F64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("record `{name}` is not an f64 array"))),
        }
    }

    pub fn u64s(&self, name: &str) -> Result<&[u64]> {
        match self.get(name)? {
            Record::U64(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("record `{name}` is not a u64 array"))),
        }
    }

    pub fn u64(&self, name: &str) -> Result<u64> {
        match self.u64s(name)? {
            [v] => Ok(*v),
            other => Err(Error::Checkpoint(format!(
                "record `{name}` holds {} values, expected one",
                other.len()
            ))),
        }
    }

    pub fn bytes(&self, name: &str) -> Result<&[u8]> {
        match self.get(name)? {
            Record::Bytes(v) => Ok(v),
            _ => Err(Error::Checkpoint(format!("record `{name}` is not a byte string"))),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.records.len() as u32).to_le_bytes());
        for (name, record) in &self.records {
            out.extend_from_slice(&(name.len() as u16).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            match record {
                Record::F64(v) => {
                    out.push(1);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                }
                Record::U64(v) => {
                    out.push(2);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
                }
                Record::Bytes(v) => {
                    out.push(3);
                    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
                    out.extend_from_slice(v);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Cursor { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(Error::Checkpoint("not a checkpoint file (bad magic)".into()));
        }
        let version = u32::from_le_bytes(r.array()?);
        if version != VERSION {
            return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let count = u32::from_le_bytes(r.array()?);
        let mut ckpt = Checkpoint::new();
        for _ in 0..count {
            let name_len = u16::from_le_bytes(r.array()?) as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| Error::Checkpoint("record name is not UTF-8".into()))?
                .to_string();
            let kind = r.take(1)?[0];
            let len = u64::from_le_bytes(r.array()?) as usize;
            let record = match kind {
                1 => Record::F64(
                    r.take(len.checked_mul(8).ok_or_else(truncated)?)?
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
                2 => Record::U64(
                    r.take(len.checked_mul(8).ok_or_else(truncated)?)?
                        .chunks_exact(8)
                        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
                        .collect(),
                ),
                3 => Record::Bytes(r.take(len)?.to_vec()),
                k => return Err(Error::Checkpoint(format!("record `{name}` has unknown kind {k}"))),
            };
            if ckpt.contains(&name) {
                return Err(Error::Checkpoint(format!("duplicate record `{name}`")));
            }
            ckpt.records.push((name, record));
        }
        if r.pos != bytes.len() {
            return Err(Error::Checkpoint("trailing bytes after last record".into()));
        }
        Ok(ckpt)
    }

    /// Store `net` as `{prefix}.shape` and `{prefix}.params`.
    pub fn put_network(&mut self, prefix: &str, net: &PolicyNetwork) {
        self.put_u64(&format!("{prefix}.shape"), &net.shape());
        self.put_f64(&format!("{prefix}.params"), net.params());
    }

    pub fn network(&self, prefix: &str) -> Result<PolicyNetwork> {
        PolicyNetwork::from_shape(
            self.u64s(&format!("{prefix}.shape"))?,
            self.f64s(&format!("{prefix}.params"))?.to_vec(),
        )
    }

    /// Store Adam moments as `{prefix}.m`, `{prefix}.v` and the step count
    /// with hyperparameters as `{prefix}.t` / `{prefix}.hyper`.
    pub fn put_adam(&mut self, prefix: &str, adam: &Adam) {
        self.put_f64(&format!("{prefix}.m"), &adam.m);
        self.put_f64(&format!("{prefix}.v"), &adam.v);
        self.put_u64(&format!("{prefix}.t"), &[adam.t]);
        self.put_f64(&format!("{prefix}.hyper"), &[adam.beta1, adam.beta2, adam.eps]);
    }

    pub fn adam(&self, prefix: &str) -> Result<Adam> {
        let m = self.f64s(&format!("{prefix}.m"))?.to_vec();
        let v = self.f64s(&format!("{prefix}.v"))?.to_vec();
        let hyper = self.f64s(&format!("{prefix}.hyper"))?;
        if m.len() != v.len() || hyper.len() != 3 {
            return Err(Error::Checkpoint(format!("malformed optimizer state `{prefix}`")));
        }
        Ok(Adam {
            m,
            v,
            t: self.u64(&format!("{prefix}.t"))?,
            beta1: hyper[0],
            beta2: hyper[1],
            eps: hyper[2],
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn truncated() -> Error {
    Error::Checkpoint("checkpoint is truncated".into())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(truncated)?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut c = Checkpoint::new();
        c.put_u64("round", &[3]);
        let b = c.to_bytes();
        assert_eq!(&b[..8], b"SOCDCKPT");
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &1u32.to_le_bytes());
        assert_eq!(&b[16..18], &5u16.to_le_bytes());
        assert_eq!(&b[18..23], b"round");
        assert_eq!(b[23], 2);
        assert_eq!(&b[24..32], &1u64.to_le_bytes());
        assert_eq!(&b[32..40], &3u64.to_le_bytes());
        assert_eq!(b.len(), 40);
    }

    #[test]
    fn corrupt_input_rejected() {
        let mut c = Checkpoint::new();
        c.put_f64("w", &[1.0, 2.0]);
        let b = c.to_bytes();
        assert!(Checkpoint::from_bytes(&b[..b.len() - 1]).is_err());
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut long = b.clone();
        long.push(0);
        assert!(Checkpoint::from_bytes(&long).is_err());
        assert!(c.u64s("w").is_err());
        assert!(c.f64s("missing").is_err());
    }

    #[test]
    fn network_and_optimizer_round_trip() {
        let mut rng = crate::rng::stream_rng(5, 0);
        let net = PolicyNetwork::new(7, &[5, 4], &[3, 2], &mut rng).unwrap();
        let mut adam = Adam::new(net.param_count());
        adam.m[0] = 0.25;
        adam.t = 9;
        let mut c = Checkpoint::new();
        c.put_network("agents", &net);
        c.put_adam("agents.adam", &adam);
        let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
        assert_eq!(back.network("agents").unwrap(), net);
        assert_eq!(back.adam("agents.adam").unwrap(), adam);
    }

    proptest! {
        #[test]
        fn save_load_save_is_byte_identical(
            floats in prop::collection::vec(any::<f64>(), 0..50),
            ints in prop::collection::vec(any::<u64>(), 0..50),
            raw in prop::collection::vec(any::<u8>(), 0..100),
        ) {
            let mut c = Checkpoint::new();
            c.put_f64("floats", &floats);
            c.put_u64("ints", &ints);
            c.put_bytes("raw", &raw);
            let first = c.to_bytes();
            let again = Checkpoint::from_bytes(&first).unwrap().to_bytes();
            prop_assert_eq!(first, again);
        }
    }
}
