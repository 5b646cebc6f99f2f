//! Versioned binary dump of an [`HhSketch`].
//!
//! Layout (little endian): `b"SRHH"`, version `u16`, k, n, seed as `u64`, the
//! configuration, then the norm, every counter, both buffers, the active buffer
//! index, the flush cursor and the instrumentation counters. Hash layouts are
//! rebuilt from the seed.

use std::path::Path;

use super::{HhConfig, HhSketch, HhStats, StreamUpdate};
use crate::combinatorial::codec::{put_varint, Reader};
use crate::design::IdentParams;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"SRHH";
pub const HH_SNAPSHOT_VERSION: u16 = 1;

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_counters(out: &mut Vec<u8>, values: &[f64]) {
    put_varint(out, values.len() as u64);
    values.iter().for_each(|&v| put_f64(out, v));
}

fn read_counters(rd: &mut Reader<'_>, into: &mut [f64]) -> Result<()> {
    let len = rd.varint()?;
    if len != into.len() as u64 {
        return Err(Error::Snapshot(format!("counter block has {len} entries, layout needs {}", into.len())));
    }
    for v in into.iter_mut() {
        *v = rd.f64()?;
    }
    Ok(())
}

pub fn encode_sketch(sketch: &HhSketch) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&HH_SNAPSHOT_VERSION.to_le_bytes());
    for v in [sketch.k, sketch.n, sketch.seed] {
        put_u64(&mut out, v);
    }
    let c = &sketch.config;
    put_u64(&mut out, c.ident.c);
    put_u64(&mut out, c.ident.c_l);
    put_u64(&mut out, c.ident.kappa_cap as u64);
    put_u64(&mut out, c.ident.kappa.map_or(0, |k| k as u64));
    put_f64(&mut out, c.filter_bands);
    put_u64(&mut out, c.filter_width);
    out.push(c.estimates as u8);
    put_u64(&mut out, c.est_c2);
    put_u64(&mut out, c.est_c3);
    put_f64(&mut out, c.kappa_b);

    put_f64(&mut out, sketch.norm);
    put_varint(&mut out, sketch.ident.len() as u64);
    sketch.ident.iter().for_each(|level| put_counters(&mut out, level));
    put_counters(&mut out, &sketch.filter.counters);
    if let Some(est) = &sketch.est {
        put_counters(&mut out, &est.counters);
    }
    for buf in &sketch.buffers {
        put_varint(&mut out, buf.len() as u64);
        for u in buf {
            put_u64(&mut out, u.index);
            put_f64(&mut out, u.delta);
        }
    }
    out.push(sketch.active as u8);
    put_varint(&mut out, sketch.cursor.0 as u64);
    put_varint(&mut out, sketch.cursor.1 as u64);
    let s = sketch.stats;
    for v in [s.updates, s.total_steps, s.max_steps_per_update, s.swaps] {
        put_varint(&mut out, v);
    }
    out
}

pub fn decode_sketch(bytes: &[u8]) -> Result<HhSketch> {
    let mut rd = Reader::new(bytes);
    if rd.bytes(4)? != MAGIC {
        return Err(Error::Snapshot("not a heavy-hitters snapshot".into()));
    }
    let version = rd.u16()?;
    if version != HH_SNAPSHOT_VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let (k, n, seed) = (rd.u64()?, rd.u64()?, rd.u64()?);
    let ident = IdentParams {
        c: rd.u64()?,
        c_l: rd.u64()?,
        kappa_cap: rd.u64()? as usize,
        kappa: Some(rd.u64()? as usize).filter(|&k| k > 0),
    };
    let config = HhConfig {
        ident,
        filter_bands: rd.f64()?,
        filter_width: rd.u64()?,
        estimates: match rd.u8()? {
            0 => false,
            1 => true,
            b => return Err(Error::Snapshot(format!("bad estimates flag {b}"))),
        },
        est_c2: rd.u64()?,
        est_c3: rd.u64()?,
        kappa_b: rd.f64()?,
    };
    let mut sketch = HhSketch::new(k, n, seed, config).map_err(|e| Error::Snapshot(e.to_string()))?;
    if (sketch.k, sketch.n) != (k, n) {
        return Err(Error::Snapshot("k and n must be powers of two".into()));
    }
    sketch.norm = rd.f64()?;
    let levels = rd.varint()?;
    if levels != sketch.ident.len() as u64 {
        return Err(Error::Snapshot(format!("{levels} levels, layout has {}", sketch.ident.len())));
    }
    for level in sketch.ident.iter_mut() {
        read_counters(&mut rd, level)?;
    }
    read_counters(&mut rd, &mut sketch.filter.counters)?;
    if let Some(est) = sketch.est.as_mut() {
        read_counters(&mut rd, &mut est.counters)?;
    }
    for b in 0..2 {
        let len = rd.varint()?;
        if len > sketch.capacity as u64 {
            return Err(Error::Snapshot("buffer exceeds capacity".into()));
        }
        for _ in 0..len {
            let u = StreamUpdate { index: rd.u64()?, delta: rd.f64()? };
            if u.index >= sketch.n {
                return Err(Error::Snapshot(format!("buffered index {} out of range", u.index)));
            }
            sketch.buffers[b].push(u);
        }
    }
    sketch.active = match rd.u8()? {
        a @ (0 | 1) => a as usize,
        a => return Err(Error::Snapshot(format!("bad active buffer {a}"))),
    };
    sketch.cursor = (rd.varint()? as usize, rd.varint()? as usize);
    if sketch.cursor.0 > sketch.buffers[1 - sketch.active].len() || sketch.cursor.1 >= sketch.work_per_entry() {
        return Err(Error::Snapshot("flush cursor outside the buffer".into()));
    }
    sketch.stats = HhStats {
        updates: rd.varint()?,
        total_steps: rd.varint()?,
        max_steps_per_update: rd.varint()?,
        swaps: rd.varint()?,
    };
    rd.finish()?;
    Ok(sketch)
}

pub fn write_sketch(sketch: &HhSketch, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_sketch(sketch))?;
    Ok(())
}

pub fn read_sketch(path: impl AsRef<Path>) -> Result<HhSketch> {
    decode_sketch(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn roundtrip_mid_stream_then_continue() {
        let mut a = HhSketch::new(4, 256, 21, HhConfig::default()).unwrap();
        let mut r = rng::stream(9, 9, 9);
        let ups: Vec<(u64, f64)> = (0..100).map(|_| (r.gen_range(0..256), r.gen_range(1..64) as f64)).collect();
        for &(i, d) in &ups[..37] {
            a.update(i, d).unwrap();
        }
        let bytes = encode_sketch(&a);
        assert_eq!(&bytes[..4], b"SRHH");
        let mut b = decode_sketch(&bytes).unwrap();
        assert_eq!(encode_sketch(&b), bytes);
        for &(i, d) in &ups[37..] {
            a.update(i, d).unwrap();
            b.update(i, d).unwrap();
        }
        assert_eq!(a.query(), b.query());
        assert_eq!(encode_sketch(&a), encode_sketch(&b));
    }

    #[test]
    fn rejects_corruption() {
        let s = HhSketch::new(2, 32, 1, HhConfig { estimates: false, ..HhConfig::default() }).unwrap();
        let bytes = encode_sketch(&s);
        assert!(decode_sketch(&bytes[..bytes.len() - 1]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(decode_sketch(&long).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_sketch(&bad).is_err());
        assert!(decode_sketch(&crate::combinatorial::encode_design(
            &crate::combinatorial::random_bands(1, 2, 3, 1, 0).unwrap()
        ))
        .is_err());
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("srhh-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("s.bin");
        let mut s = HhSketch::new(4, 64, 3, HhConfig::default()).unwrap();
        s.update(9, 3.0).unwrap();
        write_sketch(&s, &path).unwrap();
        let mut t = read_sketch(&path).unwrap();
        assert_eq!(t.query(), vec![9]);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
