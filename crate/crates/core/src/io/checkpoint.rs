//! `GGCKPT1` checkpoints: a `key = value` header terminated by `end`, then
//! every parameter as a little-endian f64 in declared network order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gan::{GanArch, GanModel, SampleMode};
use crate::inversion::EncoderModel;
use crate::io::{
    atomic_write, f64s_from_le, header_value, join_usize, parse_shape, read_file, split_header,
};
use crate::nn::{LayerSpec, MlpNetwork};
use crate::synthdata::Normalization;

pub const CHECKPOINT_MAGIC: &str = "GGCKPT1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckpointKind {
    Gan,
    Encoder,
}

impl CheckpointKind {
    fn as_str(self) -> &'static str {
        match self {
            CheckpointKind::Gan => "gan",
            CheckpointKind::Encoder => "encoder",
        }
    }
}

fn specs_field(net: &MlpNetwork) -> String {
    net.specs()
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(";")
}

fn parse_specs(path: &Path, s: &str) -> Result<Vec<LayerSpec>> {
    s.split(';')
        .map(|t| t.parse::<LayerSpec>())
        .collect::<Result<Vec<_>>>()
        .map_err(|e| Error::format(path, e.to_string()))
}

fn mode_field(mode: SampleMode) -> String {
    match mode {
        SampleMode::Vector { dim } => format!("vector{dim}"),
        SampleMode::Image { max_resolution } => format!("image{max_resolution}"),
    }
}

fn parse_mode(path: &Path, s: &str) -> Result<SampleMode> {
    let bad = || Error::format(path, format!("bad sample mode {s:?}"));
    if let Some(d) = s.strip_prefix("vector") {
        Ok(SampleMode::Vector {
            dim: d.parse().map_err(|_| bad())?,
        })
    } else if let Some(r) = s.strip_prefix("image") {
        Ok(SampleMode::Image {
            max_resolution: r.parse().map_err(|_| bad())?,
        })
    } else {
        Err(bad())
    }
}

fn render(fields: &[(String, String)], params: &[f64]) -> Vec<u8> {
    let mut out = format!("{CHECKPOINT_MAGIC}\n");
    for (k, v) in fields {
        out.push_str(&format!("{k} = {v}\n"));
    }
    out.push_str("end\n");
    let mut bytes = out.into_bytes();
    bytes.reserve(params.len() * 8);
    for p in params {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    bytes
}

fn field<T: std::str::FromStr>(path: &Path, fields: &[(String, String)], key: &str) -> Result<T> {
    header_value(path, fields, key)?
        .parse()
        .map_err(|_| Error::format(path, format!("bad value for {key:?}")))
}

/// Reads the header and returns the body parameters, checking that the
/// declared count matches the body exactly.
fn open(path: &Path, bytes: &[u8]) -> Result<(Vec<(String, String)>, Vec<f64>)> {
    let (fields, body) = split_header(path, bytes, CHECKPOINT_MAGIC)?;
    let count: usize = field(path, &fields, "param_count")?;
    if body.len() != count * 8 {
        return Err(Error::format(
            path,
            format!("param_count {count} but body holds {} bytes", body.len()),
        ));
    }
    let params = f64s_from_le(path, body, count)?;
    Ok((fields, params))
}

pub fn checkpoint_kind(path: &Path) -> Result<CheckpointKind> {
    let bytes = read_file(path)?;
    let (fields, _) = split_header(path, &bytes, CHECKPOINT_MAGIC)?;
    match header_value(path, &fields, "kind")? {
        "gan" => Ok(CheckpointKind::Gan),
        "encoder" => Ok(CheckpointKind::Encoder),
        other => Err(Error::format(path, format!("unknown model kind {other:?}"))),
    }
}

pub fn gan_to_bytes(model: &GanModel) -> Vec<u8> {
    let arch = model.arch();
    let mut fields: Vec<(String, String)> = vec![
        ("kind".into(), CheckpointKind::Gan.as_str().into()),
        ("latent_dim".into(), model.latent_dim().to_string()),
        ("sample_mode".into(), mode_field(model.mode())),
        ("sample_shape".into(), join_usize(&model.sample_shape())),
        ("stage".into(), model.stage().to_string()),
        ("fade".into(), format!("{:?}", model.fade())),
        ("seed".into(), model.seed().to_string()),
        ("provenance".into(), model.provenance_id()),
        ("arch_hidden".into(), arch.hidden.to_string()),
        ("arch_depth".into(), arch.depth.to_string()),
        ("arch_leaky_slope".into(), format!("{:?}", arch.leaky_slope)),
        ("arch_pixel_norm".into(), arch.pixel_norm.to_string()),
        ("arch_equalized".into(), arch.equalized.to_string()),
    ];
    model.normalization.to_fields(&mut fields);
    let mut params = Vec::new();
    let nets = model.generator().networks().len();
    fields.push(("networks".into(), nets.to_string()));
    for (i, net) in model.generator().networks().iter().enumerate() {
        fields.push((format!("generator{i}"), specs_field(net)));
        params.extend(net.flat_params());
    }
    for (i, net) in model.discriminator().networks().iter().enumerate() {
        fields.push((format!("discriminator{i}"), specs_field(net)));
        params.extend(net.flat_params());
    }
    fields.push(("param_count".into(), params.len().to_string()));
    render(&fields, &params)
}

pub fn gan_from_bytes(path: &Path, bytes: &[u8]) -> Result<GanModel> {
    let (fields, params) = open(path, bytes)?;
    if header_value(path, &fields, "kind")? != "gan" {
        return Err(Error::format(path, "not a generator checkpoint"));
    }
    let arch = GanArch {
        hidden: field(path, &fields, "arch_hidden")?,
        depth: field(path, &fields, "arch_depth")?,
        leaky_slope: field(path, &fields, "arch_leaky_slope")?,
        pixel_norm: field(path, &fields, "arch_pixel_norm")?,
        equalized: field(path, &fields, "arch_equalized")?,
    };
    let nets: usize = field(path, &fields, "networks")?;
    let mut offset = 0;
    let mut take = |key: String| -> Result<MlpNetwork> {
        let specs = parse_specs(path, header_value(path, &fields, &key)?)?;
        let n: usize = specs.iter().map(|s| s.in_dim * s.out_dim + s.out_dim).sum();
        let slice = params
            .get(offset..offset + n)
            .ok_or_else(|| Error::format(path, "body shorter than the declared layers"))?;
        offset += n;
        MlpNetwork::from_specs_and_params(&specs, slice).map_err(|e| Error::format(path, e.to_string()))
    };
    let generator = (0..nets)
        .map(|i| take(format!("generator{i}")))
        .collect::<Result<Vec<_>>>()?;
    let discriminator = (0..nets)
        .map(|i| take(format!("discriminator{i}")))
        .collect::<Result<Vec<_>>>()?;
    if offset != params.len() {
        return Err(Error::format(path, "body longer than the declared layers"));
    }
    let normalization = Normalization::from_strs(
        header_value(path, &fields, "norm_shift")?,
        header_value(path, &fields, "norm_scale")?,
    )
    .map_err(|m| Error::format(path, m))?;
    let model = GanModel::from_parts(
        generator,
        discriminator,
        field(path, &fields, "latent_dim")?,
        parse_mode(path, header_value(path, &fields, "sample_mode")?)?,
        arch,
        field(path, &fields, "stage")?,
        field(path, &fields, "fade")?,
        field(path, &fields, "seed")?,
        normalization,
    )
    .map_err(|e| Error::format(path, e.to_string()))?;
    if model.provenance_id() != header_value(path, &fields, "provenance")? {
        return Err(Error::format(path, "provenance id does not match the stored parameters"));
    }
    Ok(model)
}

pub fn encoder_to_bytes(encoder: &EncoderModel) -> Vec<u8> {
    let params = encoder.network().flat_params();
    let fields: Vec<(String, String)> = vec![
        ("kind".into(), CheckpointKind::Encoder.as_str().into()),
        ("latent_dim".into(), encoder.latent_dim().to_string()),
        ("sample_shape".into(), join_usize(encoder.sample_shape())),
        ("provenance".into(), encoder.provenance.clone()),
        ("layers".into(), specs_field(encoder.network())),
        ("param_count".into(), params.len().to_string()),
    ];
    render(&fields, &params)
}

pub fn encoder_from_bytes(path: &Path, bytes: &[u8]) -> Result<EncoderModel> {
    let (fields, params) = open(path, bytes)?;
    if header_value(path, &fields, "kind")? != "encoder" {
        return Err(Error::format(path, "not an encoder checkpoint"));
    }
    let specs = parse_specs(path, header_value(path, &fields, "layers")?)?;
    let network =
        MlpNetwork::from_specs_and_params(&specs, &params).map_err(|e| Error::format(path, e.to_string()))?;
    let shape = parse_shape(header_value(path, &fields, "sample_shape")?).map_err(|m| Error::format(path, m))?;
    let latent_dim: usize = field(path, &fields, "latent_dim")?;
    if network.out_dim() != latent_dim {
        return Err(Error::format(path, "encoder output does not match latent_dim"));
    }
    EncoderModel::from_network(network, shape, header_value(path, &fields, "provenance")?.to_string())
        .map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_gan(model: &GanModel, path: &Path) -> Result<()> {
    atomic_write(path, &gan_to_bytes(model))
}

pub fn load_gan(path: &Path) -> Result<GanModel> {
    gan_from_bytes(path, &read_file(path)?)
}

pub fn save_encoder(encoder: &EncoderModel, path: &Path) -> Result<()> {
    atomic_write(path, &encoder_to_bytes(encoder))
}

pub fn load_encoder(path: &Path) -> Result<EncoderModel> {
    encoder_from_bytes(path, &read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inversion::EncoderArch;
    use std::path::PathBuf;

    fn p() -> PathBuf {
        PathBuf::from("mem.ckpt")
    }

    #[test]
    fn vector_gan_round_trip_is_bitwise() {
        let mut g = GanModel::new_vector(8, 2, GanArch::default(), 4).unwrap();
        g.normalization = Normalization {
            shift: vec![0.1, -0.2],
            scale: vec![3.0, 1.0 / 3.0],
        };
        let bytes = gan_to_bytes(&g);
        let back = gan_from_bytes(&p(), &bytes).unwrap();
        assert_eq!(back.checksum(), g.checksum());
        assert_eq!(back.normalization, g.normalization);
        assert_eq!(gan_to_bytes(&back), bytes);
    }

    #[test]
    fn grown_image_gan_round_trip() {
        let mut g = GanModel::new_image(4, 16, GanArch { hidden: 8, ..GanArch::default() }, 1)
            .unwrap()
            .grow()
            .unwrap();
        g.set_fade(0.25).unwrap();
        let bytes = gan_to_bytes(&g);
        let back = gan_from_bytes(&p(), &bytes).unwrap();
        assert_eq!(back.stage(), 1);
        assert_eq!(back.fade(), 0.25);
        assert_eq!(gan_to_bytes(&back), bytes);
    }

    #[test]
    fn encoder_round_trip_and_param_count() {
        let g = GanModel::new_vector(3, 2, GanArch::default(), 4).unwrap();
        let e = EncoderModel::new(&g, EncoderArch::default(), 9).unwrap();
        let bytes = encoder_to_bytes(&e);
        let back = encoder_from_bytes(&p(), &bytes).unwrap();
        assert_eq!(back, e);
        let (fields, body) = split_header(&p(), &bytes, CHECKPOINT_MAGIC).unwrap();
        let count: usize = header_value(&p(), &fields, "param_count").unwrap().parse().unwrap();
        assert_eq!(count, body.len() / 8);
    }

    #[test]
    fn truncated_body_rejected() {
        let g = GanModel::new_vector(3, 2, GanArch::default(), 4).unwrap();
        let bytes = gan_to_bytes(&g);
        assert!(gan_from_bytes(&p(), &bytes[..bytes.len() - 8]).is_err());
        assert!(encoder_from_bytes(&p(), &bytes).is_err());
    }
}
