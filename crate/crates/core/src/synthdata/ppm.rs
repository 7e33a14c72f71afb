//! Binary portable pixmap (`P6`, 8-bit) codec and the exemplar directory
//! loader built on it.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::guide::ExemplarBatch;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    /// Interleaved RGB, row-major.
    pub rgb: Vec<u8>,
}

impl Pixmap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0; width * height * 3],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, px: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.rgb[i..i + 3].copy_from_slice(&px);
    }

    /// Nearest-neighbour resample to `size × size`.
    pub fn resize_square(&self, size: usize) -> Pixmap {
        let mut out = Pixmap::new(size, size);
        for y in 0..size {
            let sy = y * self.height / size;
            for x in 0..size {
                let sx = x * self.width / size;
                out.set(x, y, self.pixel(sx, sy));
            }
        }
        out
    }
}

pub fn encode_ppm(img: &Pixmap) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.rgb);
    out
}

pub fn decode_ppm(bytes: &[u8]) -> std::result::Result<Pixmap, String> {
    let mut pos = 0;
    let mut token = || -> std::result::Result<String, String> {
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            break;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() && bytes[pos] != b'#' {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P6" {
        return Err("not a binary pixmap (P6)".into());
    }
    let mut dim = |what: &str| -> std::result::Result<usize, String> {
        token()?
            .parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| format!("bad {what}"))
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let maxval = dim("max value")?;
    if maxval != 255 {
        return Err(format!("max value {maxval} unsupported, expected 255"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * 3;
    let raster = bytes
        .get(pos..pos + need)
        .ok_or_else(|| format!("raster truncated: {} of {need} bytes", bytes.len().saturating_sub(pos)))?;
    Ok(Pixmap {
        width,
        height,
        rgb: raster.to_vec(),
    })
}

/// Loads every non-hidden file in `dir` (sorted by name) as a pixmap,
/// resamples it to `resolution × resolution` and maps bytes to `[-1, 1]`.
pub fn load_image_directory(dir: &Path, resolution: usize) -> Result<ExemplarBatch> {
    if resolution == 0 {
        return Err(Error::invalid("resolution must be positive"));
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        if path.is_file() && !hidden {
            files.push(path);
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::format(dir, "directory contains no images"));
    }
    let mut samples = Vec::with_capacity(files.len());
    for path in &files {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = decode_ppm(&bytes).map_err(|m| Error::format(path, m))?;
        let img = img.resize_square(resolution);
        samples.push(
            img.rgb
                .iter()
                .map(|&b| b as f64 / 255.0 * 2.0 - 1.0)
                .collect::<Vec<f64>>(),
        );
    }
    ExemplarBatch::new(samples, vec![resolution, resolution, 3], None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solid(w: usize, h: usize, px: [u8; 3]) -> Pixmap {
        let mut p = Pixmap::new(w, h);
        for y in 0..h {
            for x in 0..w {
                p.set(x, y, px);
            }
        }
        p
    }

    #[test]
    fn codec_round_trip_with_comment() {
        let mut p = Pixmap::new(3, 2);
        p.set(2, 1, [1, 2, 3]);
        assert_eq!(decode_ppm(&encode_ppm(&p)).unwrap(), p);
        let mut commented = b"P6\n# made by hand\n3 2\n255\n".to_vec();
        commented.extend_from_slice(&p.rgb);
        assert_eq!(decode_ppm(&commented).unwrap(), p);
    }

    #[test]
    fn rejects_other_formats() {
        assert!(decode_ppm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(decode_ppm(b"P6\n2 2\n65535\n").is_err());
        assert!(decode_ppm(b"P6\n2 2\n255\n\x00").is_err());
    }

    #[test]
    fn white_pixmap_loads_as_ones() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("w.ppm"), encode_ppm(&solid(8, 8, [255; 3]))).unwrap();
        let batch = load_image_directory(dir.path(), 8).unwrap();
        assert_eq!(batch.len(), 1);
        assert!(batch.sample(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn empty_directory_is_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_image_directory(dir.path(), 8).is_err());
    }

    #[test]
    fn mixed_sizes_share_target_resolution() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.ppm"), encode_ppm(&solid(5, 9, [0; 3]))).unwrap();
        fs::write(dir.path().join("b.ppm"), encode_ppm(&solid(32, 16, [10, 20, 30]))).unwrap();
        let batch = load_image_directory(dir.path(), 4).unwrap();
        assert_eq!(batch.len(), 2);
        assert_eq!(batch.sample_shape(), &[4, 4, 3]);
        assert!(batch.sample(0).iter().all(|&v| v == -1.0));
    }

    #[test]
    fn undecodable_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("notes.txt"), b"hello").unwrap();
        let err = load_image_directory(dir.path(), 4).unwrap_err().to_string();
        assert!(err.contains("notes.txt"), "{err}");
    }
}
