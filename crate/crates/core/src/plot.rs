//! Figure output: SVG scatter plots and confusion grids, PPM tile grids.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::ConfusionMatrix;
use crate::synthdata::Pixmap;

/// A named set of 2-D points drawn in one colour.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<'a> {
    pub name: &'a str,
    pub color: &'a str,
    /// Flat `x, y` pairs.
    pub points: &'a [f64],
}

const SIZE: f64 = 480.0;
const MARGIN: f64 = 24.0;

/// Scatter of every point set plus optional mode centers (drawn as crosses).
/// Each sample is one `<circle>`.
pub fn scatter_svg(sets: &[PointSet<'_>], centers: &[[f64; 2]]) -> Result<String> {
    let total: usize = sets.iter().map(|s| s.points.len() / 2).sum();
    if total == 0 {
        return Err(Error::invalid("scatter plot needs at least one sample"));
    }
    if sets.iter().any(|s| s.points.len() % 2 != 0) {
        return Err(Error::invalid("scatter points must be 2-D"));
    }
    let all = sets
        .iter()
        .flat_map(|s| s.points.chunks_exact(2).map(|p| [p[0], p[1]]))
        .chain(centers.iter().copied());
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFinite("scatter point"));
        }
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-9);
    let map = |p: [f64; 2]| {
        let s = (SIZE - 2.0 * MARGIN) / span;
        (MARGIN + (p[0] - lo[0]) * s, SIZE - MARGIN - (p[1] - lo[1]) * s)
    };
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" viewBox=\"0 0 {SIZE} {SIZE}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (i, set) in sets.iter().enumerate() {
        writeln!(svg, "<g id=\"{}\" fill=\"{}\" fill-opacity=\"0.5\">", xml_escape(set.name), set.color).unwrap();
        for p in set.points.chunks_exact(2) {
            let (x, y) = map([p[0], p[1]]);
            writeln!(svg, "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"1.5\"/>").unwrap();
        }
        svg.push_str("</g>\n");
        writeln!(
            svg,
            "<text x=\"{MARGIN}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>",
            14.0 + 14.0 * i as f64,
            set.color,
            xml_escape(set.name)
        )
        .unwrap();
    }
    svg.push_str("<g id=\"centers\" stroke=\"black\" stroke-width=\"1.5\">\n");
    for c in centers {
        let (x, y) = map(*c);
        writeln!(
            svg,
            "<path d=\"M{:.2} {y:.2}H{:.2}M{x:.2} {:.2}V{:.2}\"/>",
            x - 5.0,
            x + 5.0,
            y - 5.0,
            y + 5.0
        )
        .unwrap();
    }
    svg.push_str("</g>\n</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Lays `k` RGB tiles of side `resolution` (values in `[-1, 1]`, layout
/// `y, x, channel`) on a square grid of `ceil(sqrt(k))` tiles per side.
pub fn tile_grid(samples: &[f64], resolution: usize) -> Result<Pixmap> {
    let len = resolution * resolution * 3;
    if resolution == 0 || samples.is_empty() || samples.len() % len != 0 {
        return Err(Error::invalid(format!(
            "tile grid needs a positive number of {resolution}x{resolution}x3 samples"
        )));
    }
    let k = samples.len() / len;
    let per_side = (k as f64).sqrt().ceil() as usize;
    let side = per_side * resolution;
    let mut img = Pixmap::new(side, side);
    for (i, tile) in samples.chunks_exact(len).enumerate() {
        let (ty, tx) = (i / per_side, i % per_side);
        for y in 0..resolution {
            for x in 0..resolution {
                let p = &tile[(y * resolution + x) * 3..][..3];
                let rgb = [0, 1, 2].map(|c| to_byte(p[c]));
                img.set(tx * resolution + x, ty * resolution + y, rgb);
            }
        }
    }
    Ok(img)
}

fn to_byte(v: f64) -> u8 {
    (((v.clamp(-1.0, 1.0) + 1.0) / 2.0) * 255.0).round() as u8
}

/// Shaded grid: darker cells hold larger percentages.
pub fn confusion_svg(matrix: &ConfusionMatrix, names: &[String]) -> String {
    let m = matrix.size();
    let cell = 56.0;
    let label = 72.0;
    let size = label + cell * m as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    let name = |k: usize| xml_escape(names.get(k).map_or(&k.to_string(), |s| s));
    for k in 0..m {
        let c = label + cell * (k as f64 + 0.5);
        writeln!(svg, "<text x=\"{c:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{}</text>", label - 8.0, name(k)).unwrap();
        writeln!(svg, "<text x=\"{:.1}\" y=\"{c:.1}\" font-size=\"11\" text-anchor=\"end\">{}</text>", label - 6.0, name(k)).unwrap();
    }
    for (r, row) in matrix.percent().iter().enumerate() {
        for (c, v) in row.iter().enumerate() {
            let shade = 255 - (v / 100.0 * 255.0).round() as u8;
            let (x, y) = (label + cell * c as f64, label + cell * r as f64);
            writeln!(
                svg,
                "<rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{cell}\" height=\"{cell}\" fill=\"rgb({shade},{shade},255)\" stroke=\"gray\"/>"
            )
            .unwrap();
            let ink = if *v > 50.0 { "white" } else { "black" };
            writeln!(
                svg,
                "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\" fill=\"{ink}\">{v:.1}</text>",
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            )
            .unwrap();
        }
    }
    svg.push_str("</svg>\n");
    svg
}
