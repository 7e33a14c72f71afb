//! File persistence: atomic writes, the `key = value` text notation and
//! binary checkpoints.

pub mod checkpoint;
pub mod structext;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".tmp");
    PathBuf::from(name)
}

/// Writes `bytes` to `path.tmp` and renames it over `path`. On failure the
/// partial `.tmp` file is the only thing left behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = tmp_path(path);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Formats floats so that parsing them back is exact.
pub fn join_f64(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v:?}"))
        .collect::<Vec<_>>()
        .join(",")
}

pub fn parse_f64_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
        .collect()
}

pub fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("x")
}

pub fn parse_shape(s: &str) -> std::result::Result<Vec<usize>, String> {
    let shape: Vec<usize> = s
        .split('x')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad shape {s:?}")))
        .collect::<std::result::Result<_, _>>()?;
    if shape.is_empty() || shape.contains(&0) {
        return Err(format!("bad shape {s:?}"));
    }
    Ok(shape)
}

/// Splits `bytes` into `key = value` header lines and the binary body that
/// follows the first line equal to `end`.
pub(crate) fn split_header<'a>(
    path: &Path,
    bytes: &'a [u8],
    magic: &str,
) -> Result<(Vec<(String, String)>, &'a [u8])> {
    let mut pos = 0;
    let next_line = |pos: &mut usize| -> Option<&'a str> {
        let rest = &bytes[*pos..];
        let nl = rest.iter().position(|&b| b == b'\n')?;
        *pos += nl + 1;
        std::str::from_utf8(&rest[..nl]).ok()
    };
    match next_line(&mut pos) {
        Some(l) if l == magic => {}
        _ => return Err(Error::format(path, format!("missing {magic:?} magic line"))),
    }
    let mut fields = Vec::new();
    loop {
        let line = next_line(&mut pos)
            .ok_or_else(|| Error::format(path, "unterminated header"))?;
        if line == "end" {
            break;
        }
        let (k, v) = line
            .split_once(" = ")
            .ok_or_else(|| Error::format(path, format!("malformed header line {line:?}")))?;
        fields.push((k.to_string(), v.to_string()));
    }
    Ok((fields, &bytes[pos..]))
}

pub(crate) fn header_value<'a>(
    path: &Path,
    fields: &'a [(String, String)],
    key: &str,
) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::format(path, format!("header missing {key:?}")))
}

pub(crate) fn f64s_from_le(path: &Path, bytes: &[u8], count: usize) -> Result<Vec<f64>> {
    if bytes.len() < count * 8 {
        return Err(Error::format(
            path,
            format!("body holds {} bytes, {} expected", bytes.len(), count * 8),
        ));
    }
    Ok(bytes[..count * 8]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}
