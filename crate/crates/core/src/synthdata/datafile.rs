//! `GGDATA 1` sample files.
//!
//! Layout: the line `GGDATA 1`, then `key = value` lines (mode, m, count,
//! shape, normalization, labels flag, free-form metadata), the line `end`,
//! `count × features` little-endian f64 samples and, when labeled, `count`
//! little-endian u32 labels.

use std::path::Path;

use super::{DatasetMode, LabeledDataset, MixtureSpec, Normalization};
use crate::error::{Error, Result};
use crate::io::{
    atomic_write, f64s_from_le, header_value, join_f64, join_usize, parse_f64_list, parse_shape,
    read_file, split_header,
};

const MAGIC: &str = "GGDATA 1";
const CORE_KEYS: [&str; 8] = [
    "mode",
    "m",
    "count",
    "shape",
    "norm_shift",
    "norm_scale",
    "labels",
    "end",
];

#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub mode: DatasetMode,
    pub m: usize,
    pub sample_shape: Vec<usize>,
    pub normalization: Normalization,
    pub samples: Vec<f64>,
    pub labels: Option<Vec<u32>>,
    /// Extra header entries in write order.
    pub meta: Vec<(String, String)>,
}

impl DataFile {
    pub fn features(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn count(&self) -> usize {
        self.samples.len() / self.features()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let f = self.features();
        &self.samples[i * f..(i + 1) * f]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut fields = vec![
            ("mode".to_string(), self.mode.to_string()),
            ("m".into(), self.m.to_string()),
            ("count".into(), self.count().to_string()),
            ("shape".into(), join_usize(&self.sample_shape)),
        ];
        self.normalization.to_fields(&mut fields);
        fields.push((
            "labels".into(),
            if self.labels.is_some() { "present" } else { "none" }.into(),
        ));
        fields.extend(self.meta.iter().cloned());
        let mut out = format!("{MAGIC}\n").into_bytes();
        for (k, v) in fields {
            out.extend_from_slice(format!("{k} = {v}\n").as_bytes());
        }
        out.extend_from_slice(b"end\n");
        for v in &self.samples {
            out.extend_from_slice(&v.to_le_bytes());
        }
        if let Some(labels) = &self.labels {
            for l in labels {
                out.extend_from_slice(&l.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let (fields, body) = split_header(path, bytes, MAGIC)?;
        let get = |k| header_value(path, &fields, k);
        let bad = |m: String| Error::format(path, m);
        let mode: DatasetMode = get("mode")?.parse()?;
        let m: usize = get("m")?.parse().map_err(|_| bad("bad m".into()))?;
        let count: usize = get("count")?.parse().map_err(|_| bad("bad count".into()))?;
        let sample_shape = parse_shape(get("shape")?).map_err(bad)?;
        if sample_shape != mode.sample_shape() {
            return Err(bad(format!(
                "shape {sample_shape:?} does not match mode {mode}"
            )));
        }
        let normalization =
            Normalization::from_strs(get("norm_shift")?, get("norm_scale")?).map_err(bad)?;
        let features: usize = sample_shape.iter().product();
        normalization.validate(features)?;
        let labeled = match get("labels")? {
            "present" => true,
            "none" => false,
            other => return Err(bad(format!("bad labels flag {other:?}"))),
        };
        let n = count * features;
        let expected = n * 8 + if labeled { count * 4 } else { 0 };
        if body.len() != expected {
            return Err(bad(format!(
                "body holds {} bytes, header implies {expected}",
                body.len()
            )));
        }
        let samples = f64s_from_le(path, body, n)?;
        let labels = labeled.then(|| {
            body[n * 8..]
                .chunks_exact(4)
                .map(|c| u32::from_le_bytes(c.try_into().expect("chunk of 4")))
                .collect::<Vec<u32>>()
        });
        if let Some(l) = &labels {
            if let Some(b) = l.iter().find(|&&v| v as usize >= m) {
                return Err(bad(format!("label {b} out of range for m = {m}")));
            }
        }
        let meta = fields
            .into_iter()
            .filter(|(k, _)| !CORE_KEYS.contains(&k.as_str()))
            .collect();
        Ok(Self {
            mode,
            m,
            sample_shape,
            normalization,
            samples,
            labels,
            meta,
        })
    }
}

pub fn write_data_file(path: &Path, file: &DataFile) -> Result<()> {
    atomic_write(path, &file.to_bytes())
}

pub fn read_data_file(path: &Path) -> Result<DataFile> {
    DataFile::from_bytes(path, &read_file(path)?)
}

impl From<&LabeledDataset> for DataFile {
    fn from(ds: &LabeledDataset) -> Self {
        let mut meta = vec![
            ("category".to_string(), ds.category.clone()),
            ("label_names".into(), ds.label_names.join(",")),
        ];
        if let Some(spec) = &ds.mixture {
            let flat: Vec<f64> = spec.centers.iter().flat_map(|c| [c[0], c[1]]).collect();
            meta.push(("mixture_centers".into(), join_f64(&flat)));
            meta.push(("mixture_std".into(), format!("{:?}", spec.std)));
            meta.push(("mixture_weights".into(), join_f64(&spec.weights)));
        }
        if let Some(noise) = ds.tile_noise {
            meta.push(("tile_noise".into(), format!("{noise:?}")));
        }
        DataFile {
            mode: ds.mode,
            m: ds.subcategories(),
            sample_shape: ds.sample_shape(),
            normalization: ds.normalization.clone(),
            samples: ds.samples().to_vec(),
            labels: Some(ds.labels().to_vec()),
            meta,
        }
    }
}

impl LabeledDataset {
    pub fn from_data_file(path: &Path, file: DataFile) -> Result<Self> {
        let bad = |m: &str| Error::format(path, m.to_string());
        let labels = file
            .labels
            .clone()
            .ok_or_else(|| bad("file holds unlabeled samples, not a dataset"))?;
        let names: Vec<String> = match file.meta("label_names") {
            Some(s) => s.split(',').map(str::to_string).collect(),
            None => (0..file.m).map(|k| format!("class{k}")).collect(),
        };
        if names.len() != file.m {
            return Err(bad("label_names does not match m"));
        }
        let mixture = match file.meta("mixture_centers") {
            Some(c) => {
                let flat = parse_f64_list(c).map_err(|e| bad(&e))?;
                let std = file
                    .meta("mixture_std")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| bad("mixture_std missing"))?;
                let weights = parse_f64_list(file.meta("mixture_weights").unwrap_or(""))
                    .map_err(|e| bad(&e))?;
                Some(MixtureSpec {
                    centers: flat.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
                    std,
                    weights,
                })
            }
            None => None,
        };
        let tile_noise = file.meta("tile_noise").and_then(|s| s.parse().ok());
        let category = file.meta("category").unwrap_or("unnamed").to_string();
        let mut ds = LabeledDataset::new(
            category,
            file.mode,
            names,
            file.samples,
            labels,
            file.normalization,
        )?;
        ds.mixture = mixture;
        ds.tile_noise = tile_noise;
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_data_file(path, &DataFile::from(self))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_data_file(path, read_data_file(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{gaussian_mixture_dataset, tile_image_dataset};

    #[test]
    fn datasets_round_trip_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.ggdata");
        for ds in [
            gaussian_mixture_dataset(&MixtureSpec::default(), 300, 3).unwrap(),
            tile_image_dataset(4, 3, 20, 1).unwrap(),
        ] {
            ds.save(&p).unwrap();
            assert_eq!(LabeledDataset::load(&p).unwrap(), ds);
        }
    }

    #[test]
    fn header_starts_with_magic() {
        let ds = gaussian_mixture_dataset(&MixtureSpec::default(), 10, 3).unwrap();
        let bytes = DataFile::from(&ds).to_bytes();
        assert!(bytes.starts_with(b"GGDATA 1\nmode = vector2d\nm = 5\ncount = 10\nshape = 2\n"));
    }

    #[test]
    fn truncated_body_rejected() {
        let ds = gaussian_mixture_dataset(&MixtureSpec::default(), 10, 3).unwrap();
        let mut bytes = DataFile::from(&ds).to_bytes();
        bytes.pop();
        assert!(DataFile::from_bytes(Path::new("x"), &bytes).is_err());
    }

    #[test]
    fn unlabeled_file_is_not_a_dataset() {
        let file = DataFile {
            mode: DatasetMode::Vector2d,
            m: 5,
            sample_shape: vec![2],
            normalization: Normalization::identity(),
            samples: vec![1.0, 2.0],
            labels: None,
            meta: vec![],
        };
        let back = DataFile::from_bytes(Path::new("x"), &file.to_bytes()).unwrap();
        assert_eq!(back, file);
        assert!(LabeledDataset::from_data_file(Path::new("x"), back).is_err());
    }
}
