//! Per-image feature extraction: preprocessing, the normalized 47-bin
//! histogram, and the dominant color locations.
//!
//! A color location is the mass center of all pixels that fall into one of the
//! image's largest histogram bins, together with the mean color of those pixels.
//! Centers are normalized to `[0, 1]²` as `(x / (width - 1), y / (height - 1))`,
//! so exact 90° rotations and mirrors of the pixel grid map centers by the
//! corresponding isometry of the unit square.

use serde::{Deserialize, Serialize};

use crate::colorspace::{quantize_rgb, rgb_to_lab, Lab, QuantBin, Rgb, BIN_COUNT};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_SIDE: u32 = 256;
pub const DEFAULT_LOCATIONS: usize = 5;
pub const MIN_MAX_SIDE: u32 = 16;

/// Row-major RGB pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput(format!(
                "image must be non-empty, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(Error::InvalidInput(format!(
                "{width}x{height} image needs {expected} pixels, got {}",
                pixels.len()
            )));
        }
        Ok(ImageBuffer {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> Rgb) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self> {
        Self::new(width, height, vec![color; width as usize * height as usize])
    }

    pub fn from_rgb8(img: &image::RgbImage) -> Result<Self> {
        let pixels = img
            .pixels()
            .map(|p| Rgb::from_u8(p[0], p[1], p[2]))
            .collect();
        Self::new(img.width(), img.height(), pixels)
    }

    /// Converts to 8-bit RGB, rounding each channel.
    pub fn to_rgb8(&self) -> image::RgbImage {
        let mut out = image::RgbImage::new(self.width, self.height);
        for (dst, src) in out.pixels_mut().zip(&self.pixels) {
            dst.0 = src.to_u8();
        }
        out
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    /// Rotates the pixel grid clockwise by `quarter_turns` × 90°.
    pub fn rotate_quarter_turns(&self, quarter_turns: u32) -> ImageBuffer {
        let (w, h) = (self.width, self.height);
        match quarter_turns % 4 {
            0 => Ok(self.clone()),
            1 => ImageBuffer::from_fn(h, w, |x, y| self.get(y, h - 1 - x)),
            2 => ImageBuffer::from_fn(w, h, |x, y| self.get(w - 1 - x, h - 1 - y)),
            _ => ImageBuffer::from_fn(h, w, |x, y| self.get(w - 1 - y, x)),
        }
        .expect("rotation preserves pixel count")
    }

    pub fn flip_horizontal(&self) -> ImageBuffer {
        let w = self.width;
        ImageBuffer::from_fn(w, self.height, |x, y| self.get(w - 1 - x, y))
            .expect("mirror preserves pixel count")
    }

    pub fn map_pixels(&self, f: impl Fn(Rgb) -> Rgb) -> ImageBuffer {
        ImageBuffer {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Area-average resampling to an arbitrary target size.
    pub fn resize_area(&self, new_width: u32, new_height: u32) -> Result<ImageBuffer> {
        if new_width == 0 || new_height == 0 {
            return Err(Error::InvalidInput(
                "resize target must be non-empty".into(),
            ));
        }
        if (new_width, new_height) == self.dims() {
            return Ok(self.clone());
        }
        let cols = box_weights(self.width, new_width);
        let rows = box_weights(self.height, new_height);

        // Horizontal pass: height x new_width.
        let mut tmp = Vec::with_capacity(self.height as usize * new_width as usize);
        for y in 0..self.height as usize {
            let row = &self.pixels[y * self.width as usize..(y + 1) * self.width as usize];
            for taps in &cols {
                tmp.push(weighted_mean(taps.iter().map(|&(i, w)| (row[i], w))));
            }
        }
        // Vertical pass.
        let nw = new_width as usize;
        let mut out = Vec::with_capacity(nw * new_height as usize);
        for taps in &rows {
            for x in 0..nw {
                out.push(weighted_mean(
                    taps.iter().map(|&(j, w)| (tmp[j * nw + x], w)),
                ));
            }
        }
        ImageBuffer::new(new_width, new_height, out)
    }
}

/// For each destination cell, the source indices it overlaps and the overlap length.
fn box_weights(src: u32, dst: u32) -> Vec<Vec<(usize, f64)>> {
    let scale = f64::from(src) / f64::from(dst);
    (0..dst)
        .map(|d| {
            let start = f64::from(d) * scale;
            let end = f64::from(d + 1) * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(src as usize);
            (first..last)
                .filter_map(|i| {
                    let lo = start.max(i as f64);
                    let hi = end.min(i as f64 + 1.0);
                    (hi > lo).then_some((i, hi - lo))
                })
                .collect()
        })
        .collect()
}

fn weighted_mean(taps: impl Iterator<Item = (Rgb, f64)>) -> Rgb {
    let (mut r, mut g, mut b, mut total) = (0.0, 0.0, 0.0, 0.0);
    for (p, w) in taps {
        r += p.r * w;
        g += p.g * w;
        b += p.b * w;
        total += w;
    }
    Rgb::new(r / total, g / total, b / total)
}

/// Downscales so the longer side is at most `max_side`, preserving aspect ratio.
pub fn preprocess(img: &ImageBuffer, max_side: u32) -> Result<ImageBuffer> {
    if max_side < MIN_MAX_SIDE {
        return Err(Error::InvalidInput(format!(
            "max_side must be at least {MIN_MAX_SIDE}, got {max_side}"
        )));
    }
    let (w, h) = img.dims();
    let longer = w.max(h);
    if longer <= max_side {
        return Ok(img.clone());
    }
    let scale = f64::from(max_side) / f64::from(longer);
    let fit = |side: u32| ((f64::from(side) * scale).round() as u32).clamp(1, max_side);
    let (nw, nh) = if w >= h {
        (max_side, fit(h))
    } else {
        (fit(w), max_side)
    };
    img.resize_area(nw, nh)
}

/// Normalized 47-bin color histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorHistogram {
    weights: Vec<f64>,
}

impl ColorHistogram {
    /// Wraps raw weights; they must be non-negative and sum to 1 within `1e-6`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.len() != BIN_COUNT {
            return Err(Error::InvalidInput(format!(
                "histogram needs {BIN_COUNT} bins, got {}",
                weights.len()
            )));
        }
        let h = ColorHistogram { weights };
        h.check_normalized()?;
        Ok(h)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, bin: QuantBin) -> f64 {
        self.weights[bin.index()]
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn check_normalized(&self) -> Result<()> {
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "negative histogram weight {w}"
            )));
        }
        let total = self.total();
        if (total - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidInput(format!(
                "histogram is not normalized (sum = {total})"
            )));
        }
        Ok(())
    }

    /// Non-empty bins ordered by weight descending, ties by lower index.
    pub fn ranked_bins(&self) -> Vec<QuantBin> {
        let mut bins: Vec<QuantBin> = QuantBin::all().filter(|b| self.weight(*b) > 0.0).collect();
        bins.sort_by(|a, b| self.weight(*b).total_cmp(&self.weight(*a)).then(a.cmp(b)));
        bins
    }

    pub fn l1_distance(&self, other: &ColorHistogram) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub(crate) fn map_weights(&self, f: impl Fn(f64) -> f64) -> ColorHistogram {
        ColorHistogram {
            weights: self.weights.iter().map(|&w| f(w)).collect(),
        }
    }
}

/// Normalized image point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Mass center and mean color of one dominant histogram bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorLocation {
    pub bin: QuantBin,
    pub weight: f64,
    pub center: Point,
    pub mean_color: Lab,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureParams {
    pub max_side: u32,
    pub n_locations: usize,
}

impl Default for SignatureParams {
    fn default() -> Self {
        SignatureParams {
            max_side: DEFAULT_MAX_SIDE,
            n_locations: DEFAULT_LOCATIONS,
        }
    }
}

impl SignatureParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_side < MIN_MAX_SIDE {
            return Err(Error::InvalidInput(format!(
                "max_side must be at least {MIN_MAX_SIDE}, got {}",
                self.max_side
            )));
        }
        if self.n_locations == 0 {
            return Err(Error::InvalidInput(
                "at least one color location is required".into(),
            ));
        }
        Ok(())
    }
}

/// Retrieval signature of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signature {
    pub image_id: String,
    pub source_dims: (u32, u32),
    pub histogram: ColorHistogram,
    pub locations: Vec<ColorLocation>,
}

impl Signature {
    pub fn location_bins(&self) -> impl Iterator<Item = QuantBin> + '_ {
        self.locations.iter().map(|l| l.bin)
    }
}

/// Per-bin pixel count, coordinate sums and color sums, gathered in one pass.
struct BinStats {
    width: u32,
    height: u32,
    count: [u64; BIN_COUNT],
    sum_x: [f64; BIN_COUNT],
    sum_y: [f64; BIN_COUNT],
    sum_rgb: [[f64; 3]; BIN_COUNT],
}

impl BinStats {
    fn gather(img: &ImageBuffer) -> Self {
        let mut stats = BinStats {
            width: img.width,
            height: img.height,
            count: [0; BIN_COUNT],
            sum_x: [0.0; BIN_COUNT],
            sum_y: [0.0; BIN_COUNT],
            sum_rgb: [[0.0; 3]; BIN_COUNT],
        };
        let w = img.width as usize;
        for (i, p) in img.pixels.iter().enumerate() {
            let b = quantize_rgb(*p).index();
            stats.count[b] += 1;
            stats.sum_x[b] += (i % w) as f64;
            stats.sum_y[b] += (i / w) as f64;
            stats.sum_rgb[b][0] += p.r;
            stats.sum_rgb[b][1] += p.g;
            stats.sum_rgb[b][2] += p.b;
        }
        stats
    }

    fn histogram(&self) -> ColorHistogram {
        let total = f64::from(self.width) * f64::from(self.height);
        ColorHistogram {
            weights: self.count.iter().map(|&c| c as f64 / total).collect(),
        }
    }

    fn location(&self, bin: QuantBin, weight: f64) -> ColorLocation {
        let b = bin.index();
        let n = self.count[b] as f64;
        let norm = |sum: f64, side: u32| {
            if side <= 1 {
                0.5
            } else {
                (sum / n / f64::from(side - 1)).clamp(0.0, 1.0)
            }
        };
        let [r, g, bl] = self.sum_rgb[b];
        ColorLocation {
            bin,
            weight,
            center: Point::new(
                norm(self.sum_x[b], self.width),
                norm(self.sum_y[b], self.height),
            ),
            mean_color: rgb_to_lab(Rgb::new(r / n, g / n, bl / n)),
        }
    }

    fn locations(&self, hist: &ColorHistogram, n: usize) -> Vec<ColorLocation> {
        hist.ranked_bins()
            .into_iter()
            .filter(|b| self.count[b.index()] > 0)
            .take(n)
            .map(|b| self.location(b, hist.weight(b)))
            .collect()
    }
}

pub fn compute_histogram(img: &ImageBuffer) -> ColorHistogram {
    BinStats::gather(img).histogram()
}

/// Color locations for the `n` heaviest bins of `hist` (all non-empty bins if
/// there are fewer), sorted by weight descending.
pub fn compute_locations(
    img: &ImageBuffer,
    hist: &ColorHistogram,
    n: usize,
) -> Result<Vec<ColorLocation>> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "at least one color location is required".into(),
        ));
    }
    Ok(BinStats::gather(img).locations(hist, n))
}

/// Preprocesses the image, then computes its histogram and color locations.
pub fn extract_signature(
    image_id: impl Into<String>,
    img: &ImageBuffer,
    params: &SignatureParams,
) -> Result<Signature> {
    params.validate()?;
    let reduced = preprocess(img, params.max_side)?;
    let stats = BinStats::gather(&reduced);
    let histogram = stats.histogram();
    let locations = stats.locations(&histogram, params.n_locations);
    Ok(Signature {
        image_id: image_id.into(),
        source_dims: img.dims(),
        histogram,
        locations,
    })
}
