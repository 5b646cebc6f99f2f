//! Versioned binary snapshot of a [`SparseDesign`].
//!
//! Layout (little endian):
//! `b"SRDS"`, version `u16`, kind `u8`, k `u64`, n `u64`, m `u64`, seed `u64`,
//! then per column a LEB128 support length followed by LEB128 row deltas
//! (the first delta is the absolute row).

use std::path::Path;

use super::{DesignKind, SparseDesign};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SRDS";
pub const SNAPSHOT_VERSION: u16 = 1;

pub(crate) fn put_varint(out: &mut Vec<u8>, mut v: u64) {
    while v >= 0x80 {
        out.push((v as u8) | 0x80);
        v >>= 7;
    }
    out.push(v as u8);
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Snapshot("unexpected end of data".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub(crate) fn varint(&mut self) -> Result<u64> {
        let mut v = 0u64;
        for shift in (0..64).step_by(7) {
            let b = self.u8()?;
            v |= ((b & 0x7f) as u64) << shift;
            if b & 0x80 == 0 {
                return Ok(v);
            }
        }
        Err(Error::Snapshot("varint overflow".into()))
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Snapshot(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_design(design: &SparseDesign) -> Vec<u8> {
    let mut out = Vec::with_capacity(40 + design.columns.iter().map(|c| c.len() + 1).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.push(design.kind.code());
    for v in [design.k, design.n, design.m as u64, design.seed] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for col in &design.columns {
        put_varint(&mut out, col.len() as u64);
        let mut prev = 0u32;
        for &r in col {
            put_varint(&mut out, (r - prev) as u64);
            prev = r;
        }
    }
    out
}

pub fn decode_design(bytes: &[u8]) -> Result<SparseDesign> {
    let mut rd = Reader::new(bytes);
    if rd.bytes(4)? != MAGIC {
        return Err(Error::Snapshot("not a design snapshot".into()));
    }
    let version = rd.u16()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let kind = DesignKind::from_code(rd.u8()?).ok_or_else(|| Error::Snapshot("unknown design kind".into()))?;
    let (k, n, m, seed) = (rd.u64()?, rd.u64()?, rd.u64()?, rd.u64()?);
    if m > u32::MAX as u64 || n > u32::MAX as u64 {
        return Err(Error::Snapshot("dimensions too large".into()));
    }
    let mut columns = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let len = rd.varint()?;
        if len > m {
            return Err(Error::Snapshot("column longer than row count".into()));
        }
        let mut col = Vec::with_capacity(len as usize);
        let mut row = 0u64;
        for j in 0..len {
            let delta = rd.varint()?;
            if j > 0 && delta == 0 {
                return Err(Error::Snapshot("duplicate row in column".into()));
            }
            row += delta;
            if row >= m {
                return Err(Error::Snapshot(format!("row {row} outside {m} rows")));
            }
            col.push(row as u32);
        }
        columns.push(col);
    }
    rd.finish()?;
    SparseDesign::from_columns(kind, k, m as usize, seed, columns)
}

pub fn write_design(design: &SparseDesign, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_design(design))?;
    Ok(())
}

pub fn read_design(path: impl AsRef<Path>) -> Result<SparseDesign> {
    decode_design(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorial::{kautz_singleton, random_bands, random_code_disjunct};
    use proptest::prelude::*;

    #[test]
    fn roundtrip_kinds_and_header() {
        for d in [kautz_singleton(2, 64).unwrap(), random_code_disjunct(2, 40, 4, 4, 9).unwrap()] {
            let bytes = encode_design(&d);
            assert_eq!(&bytes[..4], b"SRDS");
            assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), SNAPSHOT_VERSION);
            assert_eq!(decode_design(&bytes).unwrap(), d);
        }
    }

    #[test]
    fn rejects_corruption() {
        let d = random_bands(3, 5, 10, 1, 1).unwrap();
        let mut bytes = encode_design(&d);
        assert!(decode_design(&bytes[..bytes.len() - 1]).is_err());
        bytes.push(0);
        assert!(decode_design(&bytes).is_err());
        let mut bad = encode_design(&d);
        bad[4] = 9;
        assert!(decode_design(&bad).is_err());
        assert!(decode_design(b"XXXX").is_err());
    }

    proptest! {
        #[test]
        fn roundtrip_random_banded(bands in 1u64..6, width in 1u64..50, n in 1u64..80, seed: u64) {
            let d = random_bands(bands, width, n, 2, seed).unwrap();
            prop_assert_eq!(decode_design(&encode_design(&d)).unwrap(), d);
        }
    }
}
