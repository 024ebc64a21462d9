//! Deterministic synthetic collection for retrieval experiments.
//!
//! Each group starts from a base card: a plain background with 3 to 5 flat
//! rectangles or ellipses placed in the outer cells of a 3x3 grid. Variants of
//! the card are scaled, rotated or brightness-shifted copies. A layout
//! distractor reuses a card's exact shapes and colors in different cells, so it
//! has the same 47-bin histogram as the card but a different color layout; each
//! distractor forms its own single-member group.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::GroundTruth;
use crate::colorspace::{delta_e, quantize_rgb, rgb_to_lab, Hsv, Lab, Rgb, HUE_BOUNDARIES};
use crate::error::{Error, Result};
use crate::matching::{location_distance, DistanceParams};
use crate::signature::{compute_histogram, extract_signature, ImageBuffer, SignatureParams};

pub const GROUND_TRUTH_FILE: &str = "groundtruth.csv";

/// Minimum ΔE between any two colors of one card.
const MIN_CARD_DELTA_E: f64 = 30.0;
/// Minimum location distance between a distractor and its source card.
const MIN_DISTRACTOR_DISTANCE: f64 = 0.3;
const GRID: u32 = 3;
/// Outer grid cells; the center cell is never used, keeping the background
/// mass center away from the shapes.
const OUTER_CELLS: [(u32, u32); 8] = [
    (0, 0),
    (1, 0),
    (2, 0),
    (0, 1),
    (2, 1),
    (0, 2),
    (1, 2),
    (2, 2),
];
/// Target shape areas as fractions of a grid cell, largest first.
const AREA_FRACTIONS: [f64; 5] = [0.78, 0.56, 0.40, 0.28, 0.19];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Perturbation {
    /// 0.5x area downscale.
    Scale,
    /// 90°, 180° or 270° rotation.
    Rotate90,
    /// ±10% value shift.
    Brightness,
    LayoutDistractor,
}

impl Perturbation {
    pub const ALL: [Perturbation; 4] = [
        Perturbation::Scale,
        Perturbation::Rotate90,
        Perturbation::Brightness,
        Perturbation::LayoutDistractor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Perturbation::Scale => "scale",
            Perturbation::Rotate90 => "rotate90",
            Perturbation::Brightness => "brightness",
            Perturbation::LayoutDistractor => "layout-distractor",
        }
    }
}

impl FromStr for Perturbation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Perturbation::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidInput(format!("unknown perturbation {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthSpec {
    pub seed: u64,
    pub groups: usize,
    pub variants_per_group: usize,
    pub image_size: u32,
    pub perturbations: BTreeSet<Perturbation>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            groups: 6,
            variants_per_group: 10,
            image_size: 256,
            perturbations: Perturbation::ALL.into_iter().collect(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.groups < 2 {
            return Err(Error::InvalidInput("at least 2 groups are required".into()));
        }
        if self.variants_per_group < 2 {
            return Err(Error::InvalidInput(
                "at least 2 variants per group are required".into(),
            ));
        }
        if self.image_size < 48 {
            return Err(Error::InvalidInput("image_size must be at least 48".into()));
        }
        Ok(())
    }

    fn variant_perturbations(&self) -> Vec<Perturbation> {
        self.perturbations
            .iter()
            .copied()
            .filter(|p| *p != Perturbation::LayoutDistractor)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ShapeKind {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Shape {
    kind: ShapeKind,
    width: u32,
    height: u32,
    /// Offset of the bounding box inside its grid cell.
    offset: (u32, u32),
    color: Rgb,
}

impl Shape {
    /// Rasterization depends only on the local coordinates, so a shape has
    /// the same pixel count wherever it is placed.
    fn covers(&self, lx: u32, ly: u32) -> bool {
        if lx >= self.width || ly >= self.height {
            return false;
        }
        match self.kind {
            ShapeKind::Rect => true,
            ShapeKind::Ellipse => {
                let rx = f64::from(self.width) / 2.0;
                let ry = f64::from(self.height) / 2.0;
                let dx = (f64::from(lx) + 0.5 - rx) / rx;
                let dy = (f64::from(ly) + 0.5 - ry) / ry;
                dx * dx + dy * dy <= 1.0
            }
        }
    }
}

/// Even, so shape edges stay aligned with 2x2 downscaling blocks.
fn cell_size(image_size: u32) -> u32 {
    (image_size / GRID) & !1
}

#[derive(Debug, Clone, PartialEq)]
struct Card {
    size: u32,
    background: Rgb,
    shapes: Vec<Shape>,
    cells: Vec<(u32, u32)>,
}

impl Card {
    fn cell_size(&self) -> u32 {
        cell_size(self.size)
    }

    fn render(&self) -> ImageBuffer {
        let cell = self.cell_size();
        ImageBuffer::from_fn(self.size, self.size, |x, y| {
            for (shape, &(cx, cy)) in self.shapes.iter().zip(&self.cells) {
                let ox = cx * cell + shape.offset.0;
                let oy = cy * cell + shape.offset.1;
                if x >= ox && y >= oy && shape.covers(x - ox, y - oy) {
                    return shape.color;
                }
            }
            self.background
        })
        .expect("card size is positive")
    }

    fn with_cells(&self, cells: Vec<(u32, u32)>) -> Card {
        Card {
            cells,
            ..self.clone()
        }
    }
}

/// Colors placed well inside one quantization cell, so value shifts of ±10%
/// and 8-bit rounding do not move them to another bin.
fn safe_palette() -> Vec<Rgb> {
    let mut palette = vec![
        Hsv::new(0.0, 0.0, 0.08).to_rgb(),
        Hsv::new(0.0, 0.05, 0.5).to_rgb(),
        Hsv::new(0.0, 0.03, 0.97).to_rgb(),
    ];
    let n = HUE_BOUNDARIES.len();
    for i in 0..n {
        let lo = if i == 0 {
            HUE_BOUNDARIES[n - 1] - 360.0
        } else {
            HUE_BOUNDARIES[i - 1]
        };
        let hi = HUE_BOUNDARIES[i % n];
        let hue = ((lo + hi) / 2.0).rem_euclid(360.0);
        for s in [0.42, 0.85] {
            for v in [0.45, 0.85] {
                palette.push(Hsv::new(hue, s, v).to_rgb());
            }
        }
    }
    palette
        .into_iter()
        .map(|c| {
            let [r, g, b] = c.to_u8();
            Rgb::from_u8(r, g, b)
        })
        .collect()
}

fn pick_colors(rng: &mut ChaCha8Rng, palette: &[Rgb], count: usize) -> Vec<Rgb> {
    loop {
        let mut chosen: Vec<Rgb> = Vec::with_capacity(count);
        let mut labs: Vec<Lab> = Vec::with_capacity(count);
        let mut order: Vec<usize> = (0..palette.len()).collect();
        order.shuffle(rng);
        for i in order {
            let lab = rgb_to_lab(palette[i]);
            if labs.iter().all(|l| delta_e(*l, lab) >= MIN_CARD_DELTA_E) {
                chosen.push(palette[i]);
                labs.push(lab);
                if chosen.len() == count {
                    return chosen;
                }
            }
        }
    }
}

/// Fewest shapes per card. With the background this gives at least as many
/// colors as stored locations, so resampling blends at shape edges never
/// fill an empty location slot.
const MIN_SHAPES: usize = 4;

fn random_card(rng: &mut ChaCha8Rng, size: u32, palette: &[Rgb]) -> Card {
    let n_shapes = rng.random_range(MIN_SHAPES..=AREA_FRACTIONS.len());
    let colors = pick_colors(rng, palette, n_shapes + 1);
    let cell = cell_size(size);
    let cell_area = f64::from(cell * cell);
    let max_side = (f64::from(cell) * 0.94) as u32;

    let mut shapes = Vec::with_capacity(n_shapes);
    for (i, &fraction) in AREA_FRACTIONS.iter().take(n_shapes).enumerate() {
        let kind = if rng.random_bool(0.3) {
            ShapeKind::Ellipse
        } else {
            ShapeKind::Rect
        };
        let mut area = cell_area * fraction * rng.random_range(0.95..1.05);
        if kind == ShapeKind::Ellipse {
            area *= 4.0 / std::f64::consts::PI;
        }
        let aspect: f64 = rng.random_range(0.75..1.33);
        let even = |v: f64| ((v / 2.0).round() as u32 * 2).clamp(8, max_side & !1);
        let width = even((area * aspect).sqrt());
        let height = even(area / f64::from(width));
        let slack = |side: u32| (cell - side) / 2;
        let offset = (
            rng.random_range(0..=slack(width)) * 2,
            rng.random_range(0..=slack(height)) * 2,
        );
        shapes.push(Shape {
            kind,
            width,
            height,
            offset,
            color: colors[i + 1],
        });
    }
    let mut cells = OUTER_CELLS.to_vec();
    cells.shuffle(rng);
    cells.truncate(n_shapes);
    Card {
        size,
        background: colors[0],
        shapes,
        cells,
    }
}

/// Every shape must be visibly smaller than the next larger one, so the
/// ranking of color locations is stable under resampling.
fn card_is_well_formed(card: &Card) -> bool {
    let img = card.render();
    let hist = compute_histogram(&img);
    let mut weights: Vec<f64> = card
        .shapes
        .iter()
        .map(|s| hist.weight(quantize_rgb(s.color)))
        .collect();
    weights.insert(0, hist.weight(quantize_rgb(card.background)));
    let bins: BTreeSet<_> = card.shapes.iter().map(|s| quantize_rgb(s.color)).collect();
    bins.len() == card.shapes.len()
        && !bins.contains(&quantize_rgb(card.background))
        && weights.windows(2).all(|w| w[0] > w[1] * 1.15)
        && weights.iter().all(|w| *w > 0.015)
}

fn make_distractor(rng: &mut ChaCha8Rng, card: &Card) -> Card {
    let params = SignatureParams::default();
    let dparams = DistanceParams::default();
    let source = extract_signature("source", &card.render(), &params).expect("valid card");
    let mut best: Option<(f64, Card)> = None;
    for _ in 0..64 {
        let mut cells = OUTER_CELLS.to_vec();
        cells.shuffle(rng);
        cells.truncate(card.shapes.len());
        let candidate = card.with_cells(cells);
        let sig = extract_signature("candidate", &candidate.render(), &params).expect("valid card");
        let d = location_distance(&source, &sig, &dparams)
            .min(location_distance(&sig, &source, &dparams));
        if d > MIN_DISTRACTOR_DISTANCE && d < dparams.missing_penalty {
            return candidate;
        }
        if best
            .as_ref()
            .is_none_or(|(bd, _)| d > *bd && d < dparams.missing_penalty)
        {
            best = Some((d, candidate));
        }
    }
    best.expect("at least one candidate").1
}

fn scale_brightness(img: &ImageBuffer, factor: f64) -> ImageBuffer {
    img.map_pixels(|p| Rgb::new(p.r * factor, p.g * factor, p.b * factor))
}

fn half_scale(img: &ImageBuffer) -> ImageBuffer {
    img.resize_area((img.width() / 2).max(1), (img.height() / 2).max(1))
        .expect("non-empty target")
}

/// Round-trips through 8 bits so in-memory images equal their decoded PNGs.
fn to_8bit(img: &ImageBuffer) -> ImageBuffer {
    ImageBuffer::from_rgb8(&img.to_rgb8()).expect("same dimensions")
}

fn apply(img: &ImageBuffer, p: Perturbation, repetition: usize) -> ImageBuffer {
    match p {
        Perturbation::Scale => half_scale(img),
        Perturbation::Rotate90 => img.rotate_quarter_turns(repetition as u32 % 3 + 1),
        Perturbation::Brightness => scale_brightness(
            img,
            if repetition.is_multiple_of(2) {
                1.1
            } else {
                0.9
            },
        ),
        Perturbation::LayoutDistractor => img.clone(),
    }
}

/// One image of a synthetic collection.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthImage {
    pub image_id: String,
    pub group: String,
    pub image: ImageBuffer,
    /// Perturbations applied to the base card, in order.
    pub applied: Vec<Perturbation>,
    /// For distractors, the group whose card was rearranged.
    pub source_group: Option<String>,
}

pub fn group_label(g: usize) -> String {
    format!("g{g:02}")
}

/// Builds the collection in memory. Images are 8-bit exact.
pub fn synthesize(spec: &SynthSpec) -> Result<Vec<SynthImage>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let palette = safe_palette();
    let kinds = spec.variant_perturbations();

    let mut cards = Vec::with_capacity(spec.groups);
    while cards.len() < spec.groups {
        let card = random_card(&mut rng, spec.image_size, &palette);
        if card_is_well_formed(&card) {
            cards.push(card);
        }
    }

    let mut out = Vec::new();
    for (g, card) in cards.iter().enumerate() {
        let base = to_8bit(&card.render());
        for v in 0..spec.variants_per_group {
            let mut applied = Vec::new();
            let image = if v == 0 || kinds.is_empty() {
                base.clone()
            } else {
                let idx = (v - 1) % kinds.len();
                let repetition = (v - 1) / kinds.len();
                let mut img = apply(&base, kinds[idx], repetition);
                applied.push(kinds[idx]);
                if repetition > 0 && kinds.len() > 1 {
                    let extra = kinds[(idx + 1) % kinds.len()];
                    img = apply(&img, extra, 0);
                    applied.push(extra);
                }
                to_8bit(&img)
            };
            out.push(SynthImage {
                image_id: format!("{}_v{v:02}.png", group_label(g)),
                group: group_label(g),
                image,
                applied,
                source_group: None,
            });
        }
    }

    if spec.perturbations.contains(&Perturbation::LayoutDistractor) {
        for (g, card) in cards.iter().enumerate() {
            let distractor = make_distractor(&mut rng, card);
            out.push(SynthImage {
                image_id: format!("d{g:02}.png"),
                group: format!("d{g:02}"),
                image: to_8bit(&distractor.render()),
                applied: vec![Perturbation::LayoutDistractor],
                source_group: Some(group_label(g)),
            });
        }
    }
    Ok(out)
}

pub fn ground_truth(images: &[SynthImage]) -> Result<GroundTruth> {
    let mut gt = GroundTruth::new();
    for img in images {
        gt.insert(img.image_id.clone(), img.group.clone())?;
    }
    Ok(gt)
}

/// Writes the collection as PNG files plus `groundtruth.csv` into `out_dir`.
pub fn generate_collection(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<GroundTruth> {
    let out_dir = out_dir.as_ref();
    let images = synthesize(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    for img in &images {
        let path = out_dir.join(&img.image_id);
        img.image
            .to_rgb8()
            .save_with_format(&path, image::ImageFormat::Png)
            .map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(&path, io),
                other => Error::io(&path, std::io::Error::other(other)),
            })?;
    }
    let gt = ground_truth(&images)?;
    gt.save(out_dir.join(GROUND_TRUTH_FILE))?;
    Ok(gt)
}
