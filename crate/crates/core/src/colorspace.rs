//! 8-bit sRGB, CIE XYZ and CIE 1976 L*u*v* conversions.
//!
//! The RGB→XYZ matrix is derived from the sRGB primaries and the selected
//! white point, so RGB white lands exactly on the reference white and the
//! neutral axis has `u* = v* = 0` up to rounding.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::linalg::Vector;

/// A CIELUV color. `l` is lightness in `[0, 100]` for display colors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuvColor {
    #[serde(rename = "L")]
    pub l: f64,
    pub u: f64,
    pub v: f64,
}

impl LuvColor {
    pub const fn new(l: f64, u: f64, v: f64) -> Self {
        Self { l, u, v }
    }

    pub fn to_vector(self) -> Vector<3> {
        Vector::<3>::new(self.l, self.u, self.v)
    }

    pub fn from_vector(v: &Vector<3>) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn chroma(self) -> Vector<2> {
        Vector::<2>::new(self.u, self.v)
    }

    pub fn is_finite(self) -> bool {
        self.l.is_finite() && self.u.is_finite() && self.v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb8 {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb8 {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }
}

/// Reference white tristimulus values with `Y = 100`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhitePoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WhitePoint {
    pub const D65: WhitePoint = WhitePoint::from_chromaticity(0.3127, 0.3290);
    pub const D50: WhitePoint = WhitePoint::from_chromaticity(0.3457, 0.3585);

    pub const fn from_chromaticity(x: f64, y: f64) -> Self {
        WhitePoint {
            x: x / y * 100.0,
            y: 100.0,
            z: (1.0 - x - y) / y * 100.0,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.x > 0.0 && self.y > 0.0 && self.z > 0.0
    }

    fn uv_prime(&self) -> (f64, f64) {
        let d = self.x + 15.0 * self.y + 3.0 * self.z;
        (4.0 * self.x / d, 9.0 * self.y / d)
    }
}

impl Default for WhitePoint {
    fn default() -> Self {
        WhitePoint::D65
    }
}

const SRGB_PRIMARIES: [(f64, f64); 3] = [(0.64, 0.33), (0.30, 0.60), (0.15, 0.06)];
const KAPPA: f64 = 24389.0 / 27.0;
const EPSILON: f64 = 216.0 / 24389.0;
/// Linear-RGB slack before a channel counts as clipped.
const GAMUT_TOLERANCE: f64 = 1e-9;

/// Precomputed conversion state for one white point.
#[derive(Debug, Clone)]
pub struct Converter {
    white: WhitePoint,
    rgb_to_xyz: Matrix3<f64>,
    xyz_to_rgb: Matrix3<f64>,
    un: f64,
    vn: f64,
    decode: [f64; 256],
}

impl Converter {
    pub fn new(white: WhitePoint) -> Self {
        let columns: Vec<Vector3<f64>> = SRGB_PRIMARIES
            .iter()
            .map(|&(x, y)| Vector3::new(x / y, 1.0, (1.0 - x - y) / y))
            .collect();
        let primaries = Matrix3::from_columns(&columns);
        let w = Vector3::new(white.x, white.y, white.z);
        let scale = primaries
            .lu()
            .solve(&w)
            .expect("sRGB primaries are linearly independent");
        let rgb_to_xyz = primaries * Matrix3::from_diagonal(&scale);
        let xyz_to_rgb = rgb_to_xyz
            .try_inverse()
            .expect("sRGB primaries are linearly independent");
        let (un, vn) = white.uv_prime();
        let mut decode = [0.0; 256];
        for (i, d) in decode.iter_mut().enumerate() {
            *d = srgb_decode(i as f64 / 255.0);
        }
        Self {
            white,
            rgb_to_xyz,
            xyz_to_rgb,
            un,
            vn,
            decode,
        }
    }

    pub fn white(&self) -> WhitePoint {
        self.white
    }

    pub fn srgb_to_xyz(&self, c: Rgb8) -> Vector3<f64> {
        let lin = Vector3::new(
            self.decode[c.r as usize],
            self.decode[c.g as usize],
            self.decode[c.b as usize],
        );
        self.rgb_to_xyz * lin
    }

    pub fn xyz_to_luv(&self, xyz: &Vector3<f64>) -> LuvColor {
        let yr = xyz[1] / self.white.y;
        let l = if yr > EPSILON {
            116.0 * yr.cbrt() - 16.0
        } else {
            KAPPA * yr
        };
        let d = xyz[0] + 15.0 * xyz[1] + 3.0 * xyz[2];
        if d <= 0.0 || l == 0.0 {
            return LuvColor::new(l, 0.0, 0.0);
        }
        let up = 4.0 * xyz[0] / d;
        let vp = 9.0 * xyz[1] / d;
        LuvColor::new(l, 13.0 * l * (up - self.un), 13.0 * l * (vp - self.vn))
    }

    pub fn luv_to_xyz(&self, c: LuvColor) -> Vector3<f64> {
        if c.l <= 0.0 {
            return Vector3::zeros();
        }
        let y = if c.l > KAPPA * EPSILON {
            self.white.y * ((c.l + 16.0) / 116.0).powi(3)
        } else {
            self.white.y * c.l / KAPPA
        };
        let up = c.u / (13.0 * c.l) + self.un;
        let vp = c.v / (13.0 * c.l) + self.vn;
        if vp.abs() < 1e-300 {
            return Vector3::new(f64::INFINITY, y, f64::INFINITY);
        }
        let x = y * 9.0 * up / (4.0 * vp);
        let z = y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp);
        Vector3::new(x, y, z)
    }

    pub fn srgb_to_luv(&self, c: Rgb8) -> LuvColor {
        self.xyz_to_luv(&self.srgb_to_xyz(c))
    }

    /// Linear RGB in `[0, 1]` nominal range, unclamped.
    pub fn luv_to_linear_rgb(&self, c: LuvColor) -> Vector3<f64> {
        self.xyz_to_rgb * self.luv_to_xyz(c)
    }

    /// Returns the encoded color and whether any linear channel fell outside
    /// `[0, 1]` before clamping.
    pub fn luv_to_srgb(&self, c: LuvColor) -> (Rgb8, bool) {
        if !c.is_finite() {
            return (Rgb8::new(0, 0, 0), true);
        }
        let lin = self.luv_to_linear_rgb(c);
        let clipped = lin
            .iter()
            .any(|&x| !(-GAMUT_TOLERANCE..=1.0 + GAMUT_TOLERANCE).contains(&x));
        let enc = |x: f64| -> u8 {
            let x = if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 };
            (srgb_encode(x) * 255.0).round() as u8
        };
        (Rgb8::new(enc(lin[0]), enc(lin[1]), enc(lin[2])), clipped)
    }

    pub fn in_gamut(&self, c: LuvColor) -> bool {
        !self.luv_to_srgb(c).1
    }
}

impl Default for Converter {
    fn default() -> Self {
        Converter::new(WhitePoint::D65)
    }
}

fn srgb_decode(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

fn srgb_encode(v: f64) -> f64 {
    if v <= 0.003_130_8 {
        12.92 * v
    } else {
        1.055 * v.powf(1.0 / 2.4) - 0.055
    }
}

pub fn srgb_to_luv(c: Rgb8, wp: WhitePoint) -> LuvColor {
    Converter::new(wp).srgb_to_luv(c)
}

pub fn luv_to_srgb(c: LuvColor, wp: WhitePoint) -> (Rgb8, bool) {
    Converter::new(wp).luv_to_srgb(c)
}

pub fn in_gamut(c: LuvColor, wp: WhitePoint) -> bool {
    Converter::new(wp).in_gamut(c)
}

/// Unit `(u*, v*)` direction of the 475 nm invariant hue under D65, from the
/// CIE 1931 2° color matching functions at 475 nm.
pub const INVARIANT_HUE_475NM: [f64; 2] = [-0.300_575_053_988_010_5, -0.953_758_164_798_658_3];

/// Axis-aligned CIELUV box enclosing the sRGB gamut under D65.
pub const SRGB_LUV_BOUNDS: ([f64; 3], [f64; 3]) = ([0.0, -90.0, -140.0], [100.0, 180.0, 110.0]);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_and_black() {
        let w = srgb_to_luv(Rgb8::new(255, 255, 255), WhitePoint::D65);
        assert!((w.l - 100.0).abs() < 1e-9);
        assert!(w.u.abs() < 1e-9 && w.v.abs() < 1e-9);
        let k = srgb_to_luv(Rgb8::new(0, 0, 0), WhitePoint::D65);
        assert_eq!((k.l, k.u, k.v), (0.0, 0.0, 0.0));
    }

    #[test]
    fn red_matches_independent_reference() {
        // Independent numpy evaluation of the CIE formulas with the matrix
        // derived from sRGB primaries and the D65 chromaticity.
        let r = srgb_to_luv(Rgb8::new(255, 0, 0), WhitePoint::D65);
        assert!((r.l - 53.237_115_595_429_36).abs() < 1e-6);
        assert!((r.u - 175.009_822_162_884_92).abs() < 1e-6);
        assert!((r.v - 37.765_093_625_559_84).abs() < 1e-6);
    }

    #[test]
    fn white_luv_encodes_unclipped() {
        let (c, clipped) = luv_to_srgb(LuvColor::new(100.0, 0.0, 0.0), WhitePoint::D65);
        assert_eq!(c, Rgb8::new(255, 255, 255));
        assert!(!clipped);
    }

    #[test]
    fn saturated_chroma_is_clipped() {
        let (_, clipped) = luv_to_srgb(LuvColor::new(50.0, 300.0, 0.0), WhitePoint::D65);
        assert!(clipped);
    }

    #[test]
    fn gamut_predicate_examples() {
        assert!(in_gamut(LuvColor::new(50.0, 0.0, 0.0), WhitePoint::D65));
        assert!(!in_gamut(LuvColor::new(100.0, 50.0, 50.0), WhitePoint::D65));
        assert!(in_gamut(LuvColor::new(0.0, 0.0, 0.0), WhitePoint::D65));
        assert!(!in_gamut(LuvColor::new(f64::NAN, 0.0, 0.0), WhitePoint::D65));
    }

    #[test]
    fn lattice_round_trip_is_exact() {
        let conv = Converter::default();
        for r in (0..=255).step_by(16).chain([255]) {
            for g in (0..=255).step_by(16).chain([255]) {
                for b in (0..=255).step_by(16).chain([255]) {
                    let c = Rgb8::new(r as u8, g as u8, b as u8);
                    let (back, clipped) = conv.luv_to_srgb(conv.srgb_to_luv(c));
                    assert_eq!(back, c);
                    assert!(!clipped, "{c:?} flagged as clipped");
                }
            }
        }
    }

    #[test]
    fn gray_axis_is_monotone() {
        let conv = Converter::default();
        let mut last = -1.0;
        for i in 0..=255u8 {
            let l = conv.srgb_to_luv(Rgb8::new(i, i, i)).l;
            assert!(l > last);
            last = l;
        }
    }

    #[test]
    fn invariant_hue_is_unit() {
        let [u, v] = INVARIANT_HUE_475NM;
        assert!(((u * u + v * v).sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn d50_white_is_neutral() {
        let w = srgb_to_luv(Rgb8::new(255, 255, 255), WhitePoint::D50);
        assert!((w.l - 100.0).abs() < 1e-9 && w.u.abs() < 1e-9 && w.v.abs() < 1e-9);
    }

    #[test]
    fn gamut_fits_in_bounds_box() {
        let conv = Converter::default();
        let (lo, hi) = SRGB_LUV_BOUNDS;
        let (mut umin, mut umax, mut vmin, mut vmax) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for r in (0..=255).step_by(5) {
            for g in (0..=255).step_by(5) {
                for b in (0..=255).step_by(5) {
                    let c = conv.srgb_to_luv(Rgb8::new(r as u8, g as u8, b as u8));
                    umin = umin.min(c.u);
                    umax = umax.max(c.u);
                    vmin = vmin.min(c.v);
                    vmax = vmax.max(c.v);
                    assert!(c.l >= lo[0] - 1e-9 && c.l <= hi[0] + 1e-9);
                }
            }
        }
        assert!(umin >= lo[1] && umax <= hi[1], "u in [{umin}, {umax}]");
        assert!(vmin >= lo[2] && vmax <= hi[2], "v in [{vmin}, {vmax}]");
    }
}
