//! Nearest-neighbour 2× upsampling and 2×2 average pooling on batches of
//! `r × r × 3` images (row layout `y, x, channel`), with their adjoints.

const CH: usize = 3;

pub fn upsample(data: &[f64], res: usize) -> Vec<f64> {
    let big = res * 2;
    let per = res * res * CH;
    let mut out = Vec::with_capacity(data.len() * 4);
    for img in data.chunks_exact(per) {
        for y in 0..big {
            for x in 0..big {
                let i = ((y / 2) * res + x / 2) * CH;
                out.extend_from_slice(&img[i..i + CH]);
            }
        }
    }
    out
}

/// Adjoint of [`upsample`]: sums each 2×2 block of gradients.
pub fn upsample_adjoint(grad: &[f64], res: usize) -> Vec<f64> {
    let big = res * 2;
    let per_big = big * big * CH;
    let mut out = vec![0.0; grad.len() / 4];
    for (g, o) in grad
        .chunks_exact(per_big)
        .zip(out.chunks_exact_mut(res * res * CH))
    {
        for y in 0..big {
            for x in 0..big {
                let src = (y * big + x) * CH;
                let dst = ((y / 2) * res + x / 2) * CH;
                for c in 0..CH {
                    o[dst + c] += g[src + c];
                }
            }
        }
    }
    out
}

/// 2×2 average pooling from `2·res` down to `res`.
pub fn downsample(data: &[f64], res: usize) -> Vec<f64> {
    let big = res * 2;
    let per_big = big * big * CH;
    let mut out = vec![0.0; data.len() / 4];
    for (img, o) in data
        .chunks_exact(per_big)
        .zip(out.chunks_exact_mut(res * res * CH))
    {
        for y in 0..big {
            for x in 0..big {
                let src = (y * big + x) * CH;
                let dst = ((y / 2) * res + x / 2) * CH;
                for c in 0..CH {
                    o[dst + c] += 0.25 * img[src + c];
                }
            }
        }
    }
    out
}

pub fn downsample_adjoint(grad: &[f64], res: usize) -> Vec<f64> {
    let scaled: Vec<f64> = grad.iter().map(|g| 0.25 * g).collect();
    upsample(&scaled, res)
}
