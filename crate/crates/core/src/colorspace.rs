//! Color mathematics: RGB to HSV and CIE Lab conversion, the 47-color
//! non-uniform HSV quantizer, and the Euclidean Lab color difference.

use serde::{Deserialize, Serialize};

/// Number of quantized colors.
pub const BIN_COUNT: usize = 47;

/// Hue boundaries in degrees. Eleven boundaries on the hue circle give eleven
/// sectors; sector 0 wraps around 0°.
pub const HUE_BOUNDARIES: [f64; 11] = [
    16.0, 26.0, 40.0, 70.0, 85.0, 145.0, 160.0, 220.0, 262.0, 278.0, 335.0,
];

pub const BLACK_MAX_VALUE: f64 = 0.2;
pub const ACHROMATIC_MAX_SATURATION: f64 = 0.2;
pub const WHITE_MIN_VALUE: f64 = 0.85;
pub const QUADRANT_SATURATION: f64 = 0.65;
pub const QUADRANT_VALUE: f64 = 0.7;

/// Number of chromatic hue sectors.
pub const HUE_SECTORS: usize = HUE_BOUNDARIES.len();

/// Returns the number of quantized colors (47).
pub const fn bin_count() -> usize {
    BIN_COUNT
}

/// sRGB color with channels in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rgb {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl Rgb {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Rgb { r, g, b }
    }

    pub fn from_u8(r: u8, g: u8, b: u8) -> Self {
        Rgb {
            r: f64::from(r) / 255.0,
            g: f64::from(g) / 255.0,
            b: f64::from(b) / 255.0,
        }
    }

    /// Rounds each channel to the nearest 8-bit level.
    pub fn to_u8(self) -> [u8; 3] {
        let q = |c: f64| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
        [q(self.r), q(self.g), q(self.b)]
    }

    pub fn to_hsv(self) -> Hsv {
        rgb_to_hsv(self)
    }

    pub fn to_lab(self) -> Lab {
        rgb_to_lab(self)
    }
}

/// Hexcone HSV. `h` is in degrees `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub const fn new(h: f64, s: f64, v: f64) -> Self {
        Hsv { h, s, v }
    }

    pub fn to_rgb(self) -> Rgb {
        hsv_to_rgb(self)
    }
}

/// CIE L*a*b* under the D65 2° observer.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl Lab {
    pub const fn new(l: f64, a: f64, b: f64) -> Self {
        Lab { l, a, b }
    }
}

pub fn rgb_to_hsv(p: Rgb) -> Hsv {
    let max = p.r.max(p.g).max(p.b);
    let min = p.r.min(p.g).min(p.b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 || max <= 0.0 {
        return Hsv { h: 0.0, s, v };
    }
    let sextant = if max == p.r {
        (p.g - p.b) / delta
    } else if max == p.g {
        (p.b - p.r) / delta + 2.0
    } else {
        (p.r - p.g) / delta + 4.0
    };
    let mut h = 60.0 * sextant;
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    Hsv { h, s, v }
}

pub fn hsv_to_rgb(c: Hsv) -> Rgb {
    let h = c.h.rem_euclid(360.0) / 60.0;
    let chroma = c.v * c.s;
    let x = chroma * (1.0 - ((h % 2.0) - 1.0).abs());
    let m = c.v - chroma;
    let (r, g, b) = match h as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    Rgb::new(r + m, g + m, b + m)
}

// sRGB (IEC 61966-2-1) linear RGB -> XYZ.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// Reference white is the image of linear (1, 1, 1), so neutral greys have a = b = 0.
const WHITE_XYZ: [f64; 3] = [
    RGB_TO_XYZ[0][0] + RGB_TO_XYZ[0][1] + RGB_TO_XYZ[0][2],
    RGB_TO_XYZ[1][0] + RGB_TO_XYZ[1][1] + RGB_TO_XYZ[1][2],
    RGB_TO_XYZ[2][0] + RGB_TO_XYZ[2][1] + RGB_TO_XYZ[2][2],
];

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

pub fn rgb_to_lab(p: Rgb) -> Lab {
    let lin = [
        srgb_to_linear(p.r),
        srgb_to_linear(p.g),
        srgb_to_linear(p.b),
    ];
    let mut f = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        let xyz = row[0] * lin[0] + row[1] * lin[1] + row[2] * lin[2];
        f[i] = lab_f(xyz / WHITE_XYZ[i]);
    }
    Lab {
        l: (116.0 * f[1] - 16.0).max(0.0),
        a: 500.0 * (f[0] - f[1]),
        b: 200.0 * (f[1] - f[2]),
    }
}

/// Euclidean color difference in Lab.
pub fn delta_e(c1: Lab, c2: Lab) -> f64 {
    let dl = c2.l - c1.l;
    let da = c2.a - c1.a;
    let db = c2.b - c1.b;
    (dl * dl + da * da + db * db).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinClass {
    Black,
    Grey,
    White,
    Chromatic { sector: u8, quadrant: u8 },
}

/// One of the 47 quantized colors.
///
/// Index layout: 0 = black, 1 = grey, 2 = white, then `3 + sector * 4 + quadrant`
/// for chromatic colors. The layout is part of the index file format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantBin(u8);

impl QuantBin {
    pub const BLACK: QuantBin = QuantBin(0);
    pub const GREY: QuantBin = QuantBin(1);
    pub const WHITE: QuantBin = QuantBin(2);

    pub fn from_index(index: usize) -> Option<Self> {
        (index < BIN_COUNT).then_some(QuantBin(index as u8))
    }

    pub fn chromatic(sector: u8, quadrant: u8) -> Option<Self> {
        if usize::from(sector) < HUE_SECTORS && quadrant < 4 {
            Some(QuantBin(3 + sector * 4 + quadrant))
        } else {
            None
        }
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    pub fn class(self) -> BinClass {
        match self.0 {
            0 => BinClass::Black,
            1 => BinClass::Grey,
            2 => BinClass::White,
            i => BinClass::Chromatic {
                sector: (i - 3) / 4,
                quadrant: (i - 3) % 4,
            },
        }
    }

    pub fn is_chromatic(self) -> bool {
        self.0 >= 3
    }

    /// Iterates over all 47 bins in index order.
    pub fn all() -> impl Iterator<Item = QuantBin> {
        (0..BIN_COUNT as u8).map(QuantBin)
    }
}

/// Hue sector for a hue in degrees. Sector 0 is `[335, 360) ∪ [0, 16)`,
/// sector `i` is `[HUE_BOUNDARIES[i-1], HUE_BOUNDARIES[i])`.
pub fn hue_sector(h: f64) -> u8 {
    let h = h.rem_euclid(360.0);
    let passed = HUE_BOUNDARIES.iter().take_while(|&&b| h >= b).count();
    (passed % HUE_SECTORS) as u8
}

pub fn quantize(c: Hsv) -> QuantBin {
    if c.v < BLACK_MAX_VALUE {
        return QuantBin::BLACK;
    }
    if c.s < ACHROMATIC_MAX_SATURATION {
        return if c.v >= WHITE_MIN_VALUE {
            QuantBin::WHITE
        } else {
            QuantBin::GREY
        };
    }
    let quadrant = 2 * u8::from(c.s >= QUADRANT_SATURATION) + u8::from(c.v >= QUADRANT_VALUE);
    QuantBin(3 + hue_sector(c.h) * 4 + quadrant)
}

/// Shorthand for `quantize(rgb_to_hsv(p))`.
pub fn quantize_rgb(p: Rgb) -> QuantBin {
    quantize(rgb_to_hsv(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn hsv_reference_points() {
        let red = rgb_to_hsv(Rgb::new(1.0, 0.0, 0.0));
        assert_eq!(red, Hsv::new(0.0, 1.0, 1.0));
        assert_eq!(rgb_to_hsv(Rgb::new(0.0, 0.0, 0.0)), Hsv::new(0.0, 0.0, 0.0));
        // Python colorsys: (0.1666..., 1.0, 0.502)
        let olive = rgb_to_hsv(Rgb::new(0.502, 0.502, 0.0));
        assert_abs_diff_eq!(olive.h, 60.0, epsilon = 1e-9);
        assert_abs_diff_eq!(olive.s, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(olive.v, 0.502, epsilon = 1e-12);
    }

    #[test]
    fn greys_have_zero_hue() {
        for i in 0..=255u8 {
            let hsv = rgb_to_hsv(Rgb::from_u8(i, i, i));
            assert_eq!(hsv.h, 0.0);
            assert_eq!(hsv.s, 0.0);
        }
    }

    #[test]
    fn lab_reference_points() {
        let white = rgb_to_lab(Rgb::new(1.0, 1.0, 1.0));
        assert_abs_diff_eq!(white.l, 100.0, epsilon = 1e-6);
        assert_abs_diff_eq!(white.a, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(white.b, 0.0, epsilon = 1e-6);
        assert_eq!(rgb_to_lab(Rgb::new(0.0, 0.0, 0.0)), Lab::new(0.0, 0.0, 0.0));

        // Frozen from skimage.color.rgb2lab (D65, 2°).
        let grey = rgb_to_lab(Rgb::new(0.4667, 0.4667, 0.4667));
        assert_abs_diff_eq!(grey.l, 50.037_814, epsilon = 1e-3);
        assert_abs_diff_eq!(grey.a, 0.0, epsilon = 1e-4);
        assert_abs_diff_eq!(grey.b, 0.0, epsilon = 1e-4);

        let red = rgb_to_lab(Rgb::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(red.l, 53.240_588, epsilon = 1e-2);
        assert_abs_diff_eq!(red.a, 80.092_308, epsilon = 2e-2);
        assert_abs_diff_eq!(red.b, 67.202_751, epsilon = 2e-2);

        let green = rgb_to_lab(Rgb::new(0.2, 0.6, 0.3));
        assert_abs_diff_eq!(green.l, 56.101_600, epsilon = 1e-2);
        assert_abs_diff_eq!(green.a, -46.238_630, epsilon = 2e-2);
        assert_abs_diff_eq!(green.b, 31.675_204, epsilon = 2e-2);
    }

    #[test]
    fn lab_is_neutral_on_greys() {
        for i in 0..=255u8 {
            let lab = rgb_to_lab(Rgb::from_u8(i, i, i));
            assert!(
                lab.a.abs() < 1e-4 && lab.b.abs() < 1e-4,
                "grey {i}: {lab:?}"
            );
            assert!((0.0..=100.0 + 1e-9).contains(&lab.l));
        }
    }

    #[test]
    fn delta_e_examples() {
        let c = Lab::new(50.0, 10.0, -10.0);
        assert_eq!(delta_e(c, c), 0.0);
        assert_eq!(
            delta_e(Lab::new(0.0, 0.0, 0.0), Lab::new(100.0, 0.0, 0.0)),
            100.0
        );
        assert_abs_diff_eq!(
            delta_e(c, Lab::new(50.0, -10.0, 10.0)),
            800f64.sqrt(),
            epsilon = 1e-12
        );
        let black = rgb_to_lab(Rgb::new(0.0, 0.0, 0.0));
        let white = rgb_to_lab(Rgb::new(1.0, 1.0, 1.0));
        assert_eq!(delta_e(black, white), 100.0);
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(Hsv::new(200.0, 0.9, 0.1)), QuantBin::BLACK);
        assert_eq!(quantize(Hsv::new(30.0, 0.1, 0.5)), QuantBin::GREY);
        let bin = quantize(Hsv::new(50.0, 0.9, 0.9));
        assert_eq!(bin.index(), 18);
        assert_eq!(
            bin.class(),
            BinClass::Chromatic {
                sector: 3,
                quadrant: 3
            }
        );
        assert_eq!(quantize(Hsv::new(10.0, 0.1, 0.9)), QuantBin::WHITE);
    }

    #[test]
    fn threshold_boundaries_are_lower_inclusive() {
        assert_eq!(quantize(Hsv::new(100.0, 0.9, 0.199_999)), QuantBin::BLACK);
        assert_ne!(quantize(Hsv::new(100.0, 0.9, 0.2)), QuantBin::BLACK);
        assert_eq!(quantize(Hsv::new(100.0, 0.199_999, 0.5)), QuantBin::GREY);
        assert!(quantize(Hsv::new(100.0, 0.2, 0.5)).is_chromatic());
        assert_eq!(quantize(Hsv::new(100.0, 0.1, 0.849_999)), QuantBin::GREY);
        assert_eq!(quantize(Hsv::new(100.0, 0.1, 0.85)), QuantBin::WHITE);
        // Quadrant borders.
        let q = |s, v| match quantize(Hsv::new(100.0, s, v)).class() {
            BinClass::Chromatic { quadrant, .. } => quadrant,
            other => panic!("{other:?}"),
        };
        assert_eq!(q(0.649, 0.699), 0);
        assert_eq!(q(0.649, 0.7), 1);
        assert_eq!(q(0.65, 0.699), 2);
        assert_eq!(q(0.65, 0.7), 3);
    }

    #[test]
    fn hue_sectors_follow_boundaries() {
        // Brute-force oracle: sector i > 0 is [b[i-1], b[i]), sector 0 is the wrap.
        for tenth in 0..3600 {
            let h = f64::from(tenth) / 10.0;
            let mut expected = 0u8;
            for i in 1..HUE_BOUNDARIES.len() {
                if h >= HUE_BOUNDARIES[i - 1] && h < HUE_BOUNDARIES[i] {
                    expected = i as u8;
                }
            }
            assert_eq!(hue_sector(h), expected, "h = {h}");
        }
        assert_eq!(hue_sector(359.9), 0);
        assert_eq!(hue_sector(0.1), 0);
        assert_eq!(hue_sector(16.0), 1);
        assert_eq!(hue_sector(334.999), 10);
        assert_eq!(hue_sector(335.0), 0);
    }

    #[test]
    fn bin_index_round_trips() {
        let mut seen = std::collections::HashSet::new();
        for bin in QuantBin::all() {
            let rebuilt = match bin.class() {
                BinClass::Black => QuantBin::BLACK,
                BinClass::Grey => QuantBin::GREY,
                BinClass::White => QuantBin::WHITE,
                BinClass::Chromatic { sector, quadrant } => {
                    QuantBin::chromatic(sector, quadrant).unwrap()
                }
            };
            assert_eq!(rebuilt, bin);
            assert!(seen.insert(bin.class()));
        }
        assert_eq!(seen.len(), bin_count());
        assert!(QuantBin::from_index(47).is_none());
        assert!(QuantBin::chromatic(11, 0).is_none());
    }

    #[test]
    fn hsv_round_trip_on_8bit_cube() {
        for r in (0..=255u8).step_by(15) {
            for g in (0..=255u8).step_by(15) {
                for b in (0..=255u8).step_by(15) {
                    let p = Rgb::from_u8(r, g, b);
                    let back = hsv_to_rgb(rgb_to_hsv(p));
                    assert_abs_diff_eq!(back.r, p.r, epsilon = 1e-12);
                    assert_abs_diff_eq!(back.g, p.g, epsilon = 1e-12);
                    assert_abs_diff_eq!(back.b, p.b, epsilon = 1e-12);
                }
            }
        }
    }

    fn lab_strategy() -> impl Strategy<Value = Lab> {
        (0.0..100.0f64, -128.0..127.0f64, -128.0..127.0f64).prop_map(|(l, a, b)| Lab::new(l, a, b))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn delta_e_is_a_metric(x in lab_strategy(), y in lab_strategy(), z in lab_strategy()) {
            let dxy = delta_e(x, y);
            prop_assert!(dxy >= 0.0);
            prop_assert_eq!(dxy, delta_e(y, x));
            prop_assert_eq!(delta_e(x, x), 0.0);
            prop_assert!(dxy <= delta_e(x, z) + delta_e(z, y) + 1e-9);
        }

        #[test]
        fn achromatic_classes_ignore_hue(h1 in 0.0..360.0f64, h2 in 0.0..360.0f64,
                                         s in 0.0..1.0f64, v in 0.0..1.0f64) {
            if s < 0.2 || v < 0.2 {
                prop_assert_eq!(quantize(Hsv::new(h1, s, v)), quantize(Hsv::new(h2, s, v)));
            }
        }

        #[test]
        fn hue_wraps_at_zero(s in 0.2..1.0f64, v in 0.2..1.0f64) {
            let a = quantize(Hsv::new(359.9, s, v));
            let b = quantize(Hsv::new(0.1, s, v));
            prop_assert_eq!(a, b);
            let in_wrap_sector = matches!(a.class(), BinClass::Chromatic { sector: 0, .. });
            prop_assert!(in_wrap_sector);
        }
    }
}
