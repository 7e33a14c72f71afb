//! C ABI over `guidegan`: load checkpoints, generate, encode, build and
//! sample prototypes, and run the guide pipeline.
//!
//! Models are opaque handles released with the matching `*_free` call.
//! Every fallible function returns a [`GgStatus`]; on failure the message
//! is kept per thread and read with [`gg_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use guidegan::gan::{GanModel, LatentVector};
use guidegan::guide::{build_prototype, encode_exemplars, generate_from, guide, ExemplarBatch, PrototypeVector};
use guidegan::inversion::EncoderModel;
use guidegan::io::checkpoint::{load_encoder, load_gan};
use guidegan::{Error, Tensor};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ShapeMismatch = 3,
    Io = 4,
    Format = 5,
    Numeric = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Trained generator and discriminator.
pub struct GgGan(GanModel);
/// Trained encoder.
pub struct GgEncoder(EncoderModel);
/// Subcategory prototype.
pub struct GgPrototype(PrototypeVector);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &Error) -> GgStatus {
    match err {
        Error::ShapeMismatch { .. } | Error::SampleShape { .. } => GgStatus::ShapeMismatch,
        Error::NonFinite(_) | Error::Diverged { .. } => GgStatus::Numeric,
        Error::Format { .. } => GgStatus::Format,
        Error::Io { .. } => GgStatus::Io,
        _ => GgStatus::InvalidArgument,
    }
}

struct Fail(GgStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GgStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GgStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            GgStatus::Panic
        }
    }
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, Fail> {
    if path.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(path)
        .to_str()
        .map_err(|_| Fail(GgStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a>(p: *mut f64, len: usize, need: usize) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null("output buffer"));
    }
    if len < need {
        return Err(Fail(
            GgStatus::BufferTooSmall,
            format!("output buffer holds {len} values, {need} needed"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn batch(samples: &[f64], count: usize, shape: &[usize]) -> Result<ExemplarBatch, Fail> {
    let len: usize = shape.iter().product();
    if count == 0 || samples.len() != count * len {
        return Err(Fail(
            GgStatus::ShapeMismatch,
            format!("expected {count} samples of {len} values"),
        ));
    }
    Ok(ExemplarBatch::new(
        samples.chunks_exact(len).map(<[f64]>::to_vec).collect(),
        shape.to_vec(),
        None,
    )?)
}

/// Copies the last error message of this thread into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gg_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gg_gan_load(path: *const c_char, out: *mut *mut GgGan) -> GgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let model = load_gan(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(GgGan(model)));
        Ok(())
    })
}

/// # Safety
/// `gan` must be null or a handle from [`gg_gan_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gg_gan_free(gan: *mut GgGan) {
    if !gan.is_null() {
        drop(Box::from_raw(gan));
    }
}

/// Latent dimension, or 0 for a null handle.
///
/// # Safety
/// `gan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gg_gan_latent_dim(gan: *const GgGan) -> usize {
    gan.as_ref().map_or(0, |g| g.0.latent_dim())
}

/// Values per generated sample, or 0 for a null handle.
///
/// # Safety
/// `gan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gg_gan_sample_len(gan: *const GgGan) -> usize {
    gan.as_ref().map_or(0, |g| g.0.sample_len())
}

/// Generates `count` data-space samples from `count × latent_dim` latents
/// into `out` (`count × sample_len` values).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gg_gan_generate(
    gan: *const GgGan,
    latents: *const f64,
    count: usize,
    out: *mut f64,
    out_len: usize,
) -> GgStatus {
    guard(|| {
        let g = &handle(gan, "gan")?.0;
        let z = slice_arg(latents, count * g.latent_dim(), "latents")?;
        if count == 0 {
            return Err(Fail(GgStatus::InvalidArgument, "count must be at least 1".into()));
        }
        let out = out_arg(out, out_len, count * g.sample_len())?;
        let z: Vec<LatentVector> = z.chunks_exact(g.latent_dim()).map(|c| LatentVector::new(c.to_vec())).collect();
        let x = generate_from(g, &z)?;
        out[..x.len()].copy_from_slice(x.data());
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gg_encoder_load(path: *const c_char, out: *mut *mut GgEncoder) -> GgStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let enc = load_encoder(&path_arg(path)?)?;
        *out = Box::into_raw(Box::new(GgEncoder(enc)));
        Ok(())
    })
}

/// # Safety
/// `encoder` must be null or a handle from [`gg_encoder_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gg_encoder_free(encoder: *mut GgEncoder) {
    if !encoder.is_null() {
        drop(Box::from_raw(encoder));
    }
}

/// 1 when the encoder was trained against this generator, 0 otherwise.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn gg_encoder_matches(encoder: *const GgEncoder, gan: *const GgGan) -> i32 {
    match (encoder.as_ref(), gan.as_ref()) {
        (Some(e), Some(g)) => i32::from(e.0.provenance == g.0.provenance_id()),
        _ => 0,
    }
}

/// Encodes `count` model-space samples into `out` (`count × latent_dim`).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn gg_encoder_encode(
    encoder: *const GgEncoder,
    samples: *const f64,
    count: usize,
    out: *mut f64,
    out_len: usize,
) -> GgStatus {
    guard(|| {
        let e = &handle(encoder, "encoder")?.0;
        if count == 0 {
            return Err(Fail(GgStatus::InvalidArgument, "count must be at least 1".into()));
        }
        let x = slice_arg(samples, count * e.sample_len(), "samples")?;
        let out = out_arg(out, out_len, count * e.latent_dim())?;
        let z = e.encode_batch(&Tensor::new(vec![count, e.sample_len()], x.to_vec())?)?;
        out[..z.len()].copy_from_slice(z.data());
        Ok(())
    })
}

/// Builds a prototype from `count` data-space exemplars, normalized with
/// the generator's statistics before encoding.
///
/// # Safety
/// Pointers must be valid for the stated lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gg_prototype_build(
    gan: *const GgGan,
    encoder: *const GgEncoder,
    exemplars: *const f64,
    count: usize,
    alpha: f64,
    out: *mut *mut GgPrototype,
) -> GgStatus {
    guard(|| {
        let g = &handle(gan, "gan")?.0;
        let e = &handle(encoder, "encoder")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice_arg(exemplars, count * g.sample_len(), "exemplars")?;
        let b = batch(x, count, &g.sample_shape())?.normalized(&g.normalization);
        let proto = build_prototype(&encode_exemplars(e, &b)?, alpha)?;
        *out = Box::into_raw(Box::new(GgPrototype(proto)));
        Ok(())
    })
}

/// # Safety
/// `proto` must be null or a handle from [`gg_prototype_build`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gg_prototype_free(proto: *mut GgPrototype) {
    if !proto.is_null() {
        drop(Box::from_raw(proto));
    }
}

/// Prototype dimension, or 0 for a null handle.
///
/// # Safety
/// `proto` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gg_prototype_dim(proto: *const GgPrototype) -> usize {
    proto.as_ref().map_or(0, |p| p.0.dim())
}

/// Copies μ and σ (each `dim` values) into `mu` and `sigma`.
///
/// # Safety
/// `mu` and `sigma` must each hold `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn gg_prototype_stats(
    proto: *const GgPrototype,
    mu: *mut f64,
    sigma: *mut f64,
    len: usize,
) -> GgStatus {
    guard(|| {
        let p = &handle(proto, "prototype")?.0;
        out_arg(mu, len, p.dim())?[..p.dim()].copy_from_slice(&p.mu);
        out_arg(sigma, len, p.dim())?[..p.dim()].copy_from_slice(&p.sigma);
        Ok(())
    })
}

/// Draws `count` latents from the prototype into `out` (`count × dim`).
///
/// # Safety
/// `out` must hold `out_len` writable values.
#[no_mangle]
pub unsafe extern "C" fn gg_prototype_sample(
    proto: *const GgPrototype,
    count: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> GgStatus {
    guard(|| {
        let p = &handle(proto, "prototype")?.0;
        let out = out_arg(out, out_len, count * p.dim())?;
        for (dst, z) in out.chunks_exact_mut(p.dim()).zip(p.sample(count, seed)?) {
            dst.copy_from_slice(z.as_slice());
        }
        Ok(())
    })
}

/// Full guidance: `n` data-space exemplars in, `count` data-space samples
/// out (`count × sample_len`).
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn gg_guide(
    gan: *const GgGan,
    encoder: *const GgEncoder,
    exemplars: *const f64,
    n: usize,
    alpha: f64,
    count: usize,
    seed: u64,
    out: *mut f64,
    out_len: usize,
) -> GgStatus {
    guard(|| {
        let g = &handle(gan, "gan")?.0;
        let e = &handle(encoder, "encoder")?.0;
        let x = slice_arg(exemplars, n * g.sample_len(), "exemplars")?;
        let b = batch(x, n, &g.sample_shape())?;
        let out = out_arg(out, out_len, count * g.sample_len())?;
        let res = guide(g, e, &b, alpha, count, seed)?;
        out[..res.samples.len()].copy_from_slice(res.samples.data());
        Ok(())
    })
}
