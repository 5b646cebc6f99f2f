//! `index,delta` stream files.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use sparse_recovery::heavy_hitters::StreamUpdate;

/// Parses one line; blank lines and `#` comments give `None`.
pub fn parse_line(line: &str) -> Result<Option<StreamUpdate>> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (i, d) = line.split_once(',').with_context(|| format!("expected `index,delta`, got `{line}`"))?;
    let index: u64 = i.trim().parse().with_context(|| format!("bad index `{i}`"))?;
    let delta: f64 = d.trim().parse().with_context(|| format!("bad delta `{d}`"))?;
    if !delta.is_finite() {
        bail!("delta must be finite, got `{d}`");
    }
    Ok(Some(StreamUpdate { index, delta }))
}

/// Visits each update of a reader in order.
pub fn for_each_update<R: BufRead>(reader: R, mut f: impl FnMut(StreamUpdate) -> Result<()>) -> Result<u64> {
    let mut count = 0;
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if let Some(u) = parse_line(&line).with_context(|| format!("line {}", lineno + 1))? {
            f(u)?;
            count += 1;
        }
    }
    Ok(count)
}

/// Opens a path for reading; `-` is standard input.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    Ok(Box::new(BufReader::new(file)))
}

/// Opens a path for writing; `-` is standard output.
pub fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufWriter::new(io::stdout())));
    }
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(Box::new(BufWriter::new(file)))
}

pub fn read_stream(path: &Path) -> Result<Vec<StreamUpdate>> {
    let mut out = Vec::new();
    for_each_update(open_input(path)?, |u| {
        out.push(u);
        Ok(())
    })?;
    Ok(out)
}

/// Deltas are written with shortest round-trip formatting.
pub fn write_stream<W: Write>(mut w: W, stream: &[StreamUpdate]) -> Result<()> {
    for u in stream {
        writeln!(w, "{},{}", u.index, u.delta)?;
    }
    w.flush()?;
    Ok(())
}

/// Nonzero entries of a dense vector as `index,value` lines.
pub fn write_truth<W: Write>(mut w: W, x: &[f64]) -> Result<()> {
    for (i, &v) in x.iter().enumerate().filter(|(_, &v)| v != 0.0) {
        writeln!(w, "{i},{v}")?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_lines() {
        assert_eq!(parse_line(" 3 , -0.5 ").unwrap(), Some(StreamUpdate { index: 3, delta: -0.5 }));
        assert_eq!(parse_line("").unwrap(), None);
        assert_eq!(parse_line("# header").unwrap(), None);
        assert!(parse_line("3").is_err());
        assert!(parse_line("-1,2").is_err());
        assert!(parse_line("1,inf").is_err());
    }

    #[test]
    fn roundtrip_and_empty() {
        let s = vec![StreamUpdate { index: 0, delta: 0.1 }, StreamUpdate { index: 9, delta: -1e-9 }];
        let mut buf = Vec::new();
        write_stream(&mut buf, &s).unwrap();
        let mut back = Vec::new();
        for_each_update(&buf[..], |u| {
            back.push(u);
            Ok(())
        })
        .unwrap();
        assert_eq!(back, s);
        assert_eq!(for_each_update(&b""[..], |_| Ok(())).unwrap(), 0);
        assert!(for_each_update(&b"1,2\nx\n"[..], |_| Ok(())).is_err());
    }
}
