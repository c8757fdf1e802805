use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use quantlik::Code;
use serde::Serialize;
use tempfile::NamedTempFile;

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes JSON to `path`, or to stdout without one.
pub fn emit_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let bytes = json_bytes(value)?;
    match path {
        Some(p) => write_atomic(p, &bytes),
        None => {
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

/// Codes as CSV: header `c0,c1,...`, one observation per row.
pub fn codes_csv(codes: &[Code], width: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((0..width).map(|k| format!("c{k}")))?;
    for c in codes {
        w.write_record(c.0.iter().map(i64::to_string))?;
    }
    w.into_inner().context("flushing codes")
}

pub fn read_codes(path: &Path) -> Result<Vec<Code>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading data {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    for (k, h) in headers.iter().enumerate() {
        if h != format!("c{k}") {
            bail!(
                "{}: expected header column c{k}, found {h:?}",
                path.display()
            );
        }
    }
    let mut codes = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
        let code = rec
            .iter()
            .map(|f| f.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: row {} has a non-integer code", path.display(), i + 2))?;
        codes.push(Code(code));
    }
    if codes.is_empty() {
        bail!("{}: no observations", path.display());
    }
    Ok(codes)
}
