//! Distances between signatures.
//!
//! The combined distance is `k * d_hist + (1 - k) * d_loc`. `d_hist` compares the
//! bin-aligned 47-bin histograms. `d_loc` pairs the color locations of the query
//! with those of the candidate by color, fits a similarity transform on the first
//! two pairs, and then scores every further pair by how far the transformed query
//! center lands from the candidate center plus how far apart the two mean colors are.
//! Query locations without a counterpart cost a fixed penalty.

use std::f64::consts::SQRT_2;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::{delta_e, Lab};
use crate::error::{Error, Result};
use crate::signature::{ColorHistogram, ColorLocation, Point, Signature, DEFAULT_LOCATIONS};

pub const DEFAULT_K: f64 = 0.5;
pub const DEFAULT_MISSING_PENALTY: f64 = 10_000.0;
pub const DEFAULT_COLOR_NORM: f64 = 100.0;
/// Largest ΔE at which two locations may still be paired.
pub const MAX_PAIRING_DELTA_E: f64 = 60.0;
/// Largest distance between two points of the normalized unit square.
pub const MAX_POINT_DISTANCE: f64 = SQRT_2;
/// Minimum separation of the two source points of a transform fit.
pub const MIN_POINT_SEPARATION: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistMetric {
    #[default]
    Intersection,
    ChiSquare,
}

impl FromStr for HistMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "intersection" => Ok(HistMetric::Intersection),
            "chi-square" | "chi_square" | "chisquare" => Ok(HistMetric::ChiSquare),
            other => Err(Error::InvalidInput(format!(
                "unknown histogram metric {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceParams {
    /// Weight of the histogram term, in `[0, 1]`. `k = 1` is plain histogram matching.
    pub k: f64,
    pub hist_metric: HistMetric,
    /// How many leading color locations of each signature take part.
    pub n_locations: usize,
    pub missing_penalty: f64,
    /// Divisor applied to ΔE in each location term. `1.0` leaves ΔE unscaled.
    pub color_norm: f64,
}

impl Default for DistanceParams {
    fn default() -> Self {
        DistanceParams {
            k: DEFAULT_K,
            hist_metric: HistMetric::Intersection,
            n_locations: DEFAULT_LOCATIONS,
            missing_penalty: DEFAULT_MISSING_PENALTY,
            color_norm: DEFAULT_COLOR_NORM,
        }
    }
}

impl DistanceParams {
    pub fn with_k(k: f64) -> Self {
        DistanceParams {
            k,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.k) {
            return Err(Error::InvalidInput(format!(
                "k must lie in [0, 1], got {}",
                self.k
            )));
        }
        if self.n_locations == 0 {
            return Err(Error::InvalidInput("n_locations must be positive".into()));
        }
        if !(self.color_norm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "color_norm must be positive, got {}",
                self.color_norm
            )));
        }
        if !(self.missing_penalty >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "missing_penalty must be non-negative, got {}",
                self.missing_penalty
            )));
        }
        Ok(())
    }
}

/// Histogram distance in `[0, 1]`; 0 for identical inputs.
///
/// Intersection is evaluated as `½ Σ |h1 - h2|`, which equals `1 - Σ min(h1, h2)`
/// for normalized inputs and is exactly zero for identical ones.
pub fn hist_distance(h1: &ColorHistogram, h2: &ColorHistogram, metric: HistMetric) -> Result<f64> {
    h1.check_normalized()?;
    h2.check_normalized()?;
    let pairs = h1.weights().iter().zip(h2.weights());
    let d = match metric {
        HistMetric::Intersection => 0.5 * pairs.map(|(a, b)| (a - b).abs()).sum::<f64>(),
        HistMetric::ChiSquare => {
            0.5 * pairs
                .filter(|(a, b)| *a + *b > 0.0)
                .map(|(a, b)| (a - b) * (a - b) / (a + b))
                .sum::<f64>()
        }
    };
    Ok(d.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationPair {
    pub query: ColorLocation,
    pub base: ColorLocation,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocationPairing {
    /// In query order.
    pub pairs: Vec<LocationPair>,
    pub unmatched_query_count: usize,
}

/// Greedy color pairing in query order. Each query location takes the unused
/// base location with the smallest ΔE, unless that ΔE exceeds
/// [`MAX_PAIRING_DELTA_E`].
pub fn match_locations(query: &[ColorLocation], base: &[ColorLocation]) -> LocationPairing {
    let mut used = vec![false; base.len()];
    let mut pairing = LocationPairing::default();
    for q in query {
        let best = base
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, b)| (i, delta_e(q.mean_color, b.mean_color)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        match best {
            Some((i, de)) if de <= MAX_PAIRING_DELTA_E => {
                used[i] = true;
                pairing.pairs.push(LocationPair {
                    query: *q,
                    base: base[i],
                });
            }
            _ => pairing.unmatched_query_count += 1,
        }
    }
    pairing
}

/// Rotation, uniform scale and translation:
/// `(x, y) -> (a x - b y + tx, b x + a y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub ty: f64,
}

impl SimilarityTransform {
    pub const IDENTITY: SimilarityTransform = SimilarityTransform {
        a: 1.0,
        b: 0.0,
        tx: 0.0,
        ty: 0.0,
    };

    pub fn translation(dx: f64, dy: f64) -> Self {
        SimilarityTransform {
            tx: dx,
            ty: dy,
            ..Self::IDENTITY
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new(
            self.a * p.x - self.b * p.y + self.tx,
            self.b * p.x + self.a * p.y + self.ty,
        )
    }

    pub fn scale(&self) -> f64 {
        self.a.hypot(self.b)
    }

    /// Rotation angle in radians.
    pub fn rotation(&self) -> f64 {
        self.b.atan2(self.a)
    }
}

/// Fits the similarity transform with `T(p1) = q1` and `T(p2) = q2`.
pub fn fit_transform(p1: Point, p2: Point, q1: Point, q2: Point) -> Result<SimilarityTransform> {
    let separation = p1.distance(p2);
    if !(separation > MIN_POINT_SEPARATION) {
        return Err(Error::DegenerateGeometry { separation });
    }
    // Unknowns (a, b, tx, ty); two equations per correspondence.
    let mut m = [
        [p1.x, -p1.y, 1.0, 0.0, q1.x],
        [p1.y, p1.x, 0.0, 1.0, q1.y],
        [p2.x, -p2.y, 1.0, 0.0, q2.x],
        [p2.y, p2.x, 0.0, 1.0, q2.y],
    ];
    let [a, b, tx, ty] = solve4(&mut m).ok_or(Error::DegenerateGeometry { separation })?;
    Ok(SimilarityTransform { a, b, tx, ty })
}

/// Gaussian elimination with partial pivoting on an augmented 4x5 matrix.
fn solve4(m: &mut [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let pivot = (col..4).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-15 {
            return None;
        }
        m.swap(col, pivot);
        for row in col + 1..4 {
            let factor = m[row][col] / m[col][col];
            if factor != 0.0 {
                let pivot_row = m[col];
                for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                    *dst -= factor * src;
                }
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| m[row][k] * x[k]).sum();
        x[row] = (m[row][4] - tail) / m[row][row];
    }
    Some(x)
}

/// Point part of a location term: `2 * |hyp - actual| / maxDist`.
pub fn point_term(hyp: Point, actual: Point) -> f64 {
    2.0 * hyp.distance(actual) / MAX_POINT_DISTANCE
}

/// Color part of a location term: `ΔE / color_norm`.
pub fn color_term(c1: Lab, c2: Lab, params: &DistanceParams) -> f64 {
    delta_e(c1, c2) / params.color_norm
}

/// Distance contributed by one paired location.
pub fn location_term(hyp: Point, actual: Point, c1: Lab, c2: Lab, params: &DistanceParams) -> f64 {
    point_term(hyp, actual) + color_term(c1, c2, params)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairTerm {
    pub query: ColorLocation,
    pub base: ColorLocation,
    /// Query center after the fitted transform.
    pub hypothetical: Point,
    pub point_term: f64,
    pub color_term: f64,
}

/// All intermediate quantities of a location distance.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationBreakdown {
    pub pairing: LocationPairing,
    /// `None` when fewer than two pairs were found.
    pub transform: Option<SimilarityTransform>,
    /// True if the first two query centers coincided and a translation was used.
    pub degenerate_fallback: bool,
    /// Terms for pairs after the first two.
    pub terms: Vec<PairTerm>,
    pub penalized_locations: usize,
    pub total: f64,
}

pub fn location_breakdown(
    query: &Signature,
    base: &Signature,
    params: &DistanceParams,
) -> LocationBreakdown {
    let n = params.n_locations;
    let q = &query.locations[..query.locations.len().min(n)];
    let b = &base.locations[..base.locations.len().min(n)];
    let pairing = match_locations(q, b);

    // Two pairs are needed to place the rest. A single-location query has
    // nothing left to place and is scored only by its unmatched count.
    if pairing.pairs.len() < 2 && q.len() >= 2 {
        return LocationBreakdown {
            pairing,
            transform: None,
            degenerate_fallback: false,
            terms: Vec::new(),
            penalized_locations: q.len(),
            total: q.len() as f64 * params.missing_penalty,
        };
    }
    if pairing.pairs.len() < 2 {
        let penalized = pairing.unmatched_query_count;
        return LocationBreakdown {
            pairing,
            transform: None,
            degenerate_fallback: false,
            terms: Vec::new(),
            penalized_locations: penalized,
            total: penalized as f64 * params.missing_penalty,
        };
    }

    let (first, second) = (pairing.pairs[0], pairing.pairs[1]);
    let (transform, degenerate_fallback) = match fit_transform(
        first.query.center,
        second.query.center,
        first.base.center,
        second.base.center,
    ) {
        Ok(t) => (t, false),
        Err(_) => (
            SimilarityTransform::translation(
                first.base.center.x - first.query.center.x,
                first.base.center.y - first.query.center.y,
            ),
            true,
        ),
    };

    let terms: Vec<PairTerm> = pairing.pairs[2..]
        .iter()
        .map(|pair| {
            let hypothetical = transform.apply(pair.query.center);
            PairTerm {
                query: pair.query,
                base: pair.base,
                hypothetical,
                point_term: point_term(hypothetical, pair.base.center),
                color_term: color_term(pair.query.mean_color, pair.base.mean_color, params),
            }
        })
        .collect();
    let penalized = pairing.unmatched_query_count;
    let total = terms
        .iter()
        .map(|t| t.point_term + t.color_term)
        .sum::<f64>()
        + penalized as f64 * params.missing_penalty;
    LocationBreakdown {
        pairing,
        transform: Some(transform),
        degenerate_fallback,
        terms,
        penalized_locations: penalized,
        total,
    }
}

/// Color-location distance from `query` to `base`. Not symmetric in general.
pub fn location_distance(query: &Signature, base: &Signature, params: &DistanceParams) -> f64 {
    location_breakdown(query, base, params).total
}

/// `k * hist_distance + (1 - k) * location_distance`.
pub fn combined_distance(
    query: &Signature,
    base: &Signature,
    params: &DistanceParams,
) -> Result<f64> {
    params.validate()?;
    let d_hist = hist_distance(&query.histogram, &base.histogram, params.hist_metric)?;
    let d_loc = if params.k == 1.0 {
        0.0
    } else {
        location_distance(query, base, params)
    };
    Ok(params.k * d_hist + (1.0 - params.k) * d_loc)
}
