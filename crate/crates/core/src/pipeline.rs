//! Per-pixel simulation and compensation of images.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::colorspace::{Converter, LuvColor, Rgb8};
use crate::error::{Error, Result};
use crate::isometry::{Direction, IsometryMap, LightnessMap, Mapped};

/// Lightness planes of the measurement protocol.
pub const LEVELS: [f64; 5] = [30.0, 40.0, 50.0, 60.0, 70.0];

/// Default lattice size of a baked lookup table.
pub const LUT_SIZE: usize = 33;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    pixels: Vec<Rgb8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb8>) -> Result<Self> {
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Invalid(format!(
                "{}x{} image needs {} pixels, got {}",
                width,
                height,
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, c: Rgb8) -> Self {
        Self {
            width,
            height,
            pixels: vec![c; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> Rgb8) -> Self {
        let pixels = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb8 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_rgb8();
        let (w, h) = img.dimensions();
        let pixels = img.pixels().map(|p| Rgb8::new(p[0], p[1], p[2])).collect();
        Self::new(w, h, pixels)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let raw: Vec<u8> = self.pixels.iter().flat_map(|p| p.channels()).collect();
        let img = image::RgbImage::from_raw(self.width, self.height, raw)
            .ok_or_else(|| Error::Invalid("pixel buffer does not match dimensions".into()))?;
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "2d")]
    Compensate2d,
    #[serde(rename = "2d+1d")]
    Compensate2d1d,
    #[serde(rename = "3d")]
    Compensate3d,
    #[serde(rename = "simulate-2d")]
    Simulate2d,
    #[serde(rename = "simulate-2d+1d")]
    Simulate2d1d,
    #[serde(rename = "simulate-3d")]
    Simulate3d,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Compensate2d,
        Mode::Compensate2d1d,
        Mode::Compensate3d,
        Mode::Simulate2d,
        Mode::Simulate2d1d,
        Mode::Simulate3d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Compensate2d => "2d",
            Mode::Compensate2d1d => "2d+1d",
            Mode::Compensate3d => "3d",
            Mode::Simulate2d => "simulate-2d",
            Mode::Simulate2d1d => "simulate-2d+1d",
            Mode::Simulate3d => "simulate-3d",
        }
    }

    pub fn direction(self) -> Direction {
        if self.is_simulation() {
            Direction::Simulation
        } else {
            Direction::Compensation
        }
    }

    pub fn is_simulation(self) -> bool {
        matches!(self, Mode::Simulate2d | Mode::Simulate2d1d | Mode::Simulate3d)
    }

    pub fn is_3d(self) -> bool {
        matches!(self, Mode::Compensate3d | Mode::Simulate3d)
    }

    pub fn uses_lightness(self) -> bool {
        matches!(self, Mode::Compensate2d1d | Mode::Simulate2d1d)
    }

    /// The same algorithm in the opposite direction.
    pub fn reversed(self) -> Mode {
        match self {
            Mode::Compensate2d => Mode::Simulate2d,
            Mode::Compensate2d1d => Mode::Simulate2d1d,
            Mode::Compensate3d => Mode::Simulate3d,
            Mode::Simulate2d => Mode::Compensate2d,
            Mode::Simulate2d1d => Mode::Compensate2d1d,
            Mode::Simulate3d => Mode::Compensate3d,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase();
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PixelInterpolation {
    NearestVertex,
    #[default]
    Barycentric,
}

impl FromStr for PixelInterpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nearest-vertex" | "nearest" => Ok(PixelInterpolation::NearestVertex),
            "barycentric" => Ok(PixelInterpolation::Barycentric),
            _ => Err(Error::Config(format!("unknown interpolation {s:?}"))),
        }
    }
}

/// Chromaticity map for one lightness plane.
#[derive(Debug, Clone)]
pub struct LevelMap {
    pub level: f64,
    pub map: IsometryMap<2>,
}

/// Maps may be stored in either direction; they are reversed as the mode
/// requires.
#[derive(Debug, Clone)]
pub struct CompensationConfig {
    pub mode: Mode,
    pub levels: Vec<LevelMap>,
    pub lightness: Option<LightnessMap>,
    pub map3d: Option<IsometryMap<3>>,
    pub interpolation: PixelInterpolation,
    pub converter: Converter,
}

impl CompensationConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            levels: Vec::new(),
            lightness: None,
            map3d: None,
            interpolation: PixelInterpolation::default(),
            converter: Converter::default(),
        }
    }

    pub fn with_level(mut self, level: f64, map: IsometryMap<2>) -> Self {
        self.levels.push(LevelMap { level, map });
        self.levels.sort_by(|a, b| a.level.total_cmp(&b.level));
        self
    }

    pub fn with_lightness(mut self, map: LightnessMap) -> Self {
        self.lightness = Some(map);
        self
    }

    pub fn with_map3d(mut self, map: IsometryMap<3>) -> Self {
        self.map3d = Some(map);
        self
    }

    pub fn with_interpolation(mut self, interpolation: PixelInterpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    /// Checks that the maps needed by the mode are present.
    pub fn validate(&self) -> Result<()> {
        if self.mode.is_3d() {
            if self.map3d.is_none() {
                return Err(Error::Config(format!("mode {} needs a 3D map", self.mode)));
            }
            return Ok(());
        }
        if self.levels.is_empty() {
            return Err(Error::Config(format!("mode {} needs level maps", self.mode)));
        }
        if self.levels.windows(2).any(|w| w[0].level == w[1].level) {
            return Err(Error::Config("duplicate level maps".into()));
        }
        if self.mode.uses_lightness() && self.lightness.is_none() {
            return Err(Error::Config(format!("mode {} needs a lightness map", self.mode)));
        }
        Ok(())
    }

    /// Index of the level map closest to `l`; ties go to the lower level.
    pub fn level_index(&self, l: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, lm) in self.levels.iter().enumerate() {
            let d = (l - lm.level).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        best.map(|(i, _)| i)
    }

    /// SHA-256 over the mode, interpolation, and every map's node table.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.mode.name().as_bytes());
        h.update([self.interpolation as u8]);
        let w = self.converter.white();
        for c in [w.x, w.y, w.z] {
            h.update(c.to_le_bytes());
        }
        let mut feed = |xs: &[f64]| {
            for x in xs {
                h.update(x.to_le_bytes());
            }
        };
        for lm in &self.levels {
            feed(&[lm.level, lm.map.direction().tag() as f64]);
            for chart in [lm.map.source(), lm.map.target()] {
                for p in chart.main().positions() {
                    feed(p.as_slice());
                }
            }
        }
        if let Some(m) = &self.map3d {
            feed(&[m.direction().tag() as f64]);
            for chart in [m.source(), m.target()] {
                for p in chart.main().positions() {
                    feed(p.as_slice());
                }
            }
        }
        if let Some(lm) = &self.lightness {
            feed(lm.nodes());
            feed(lm.values());
            feed(lm.slopes());
        }
        let out = h.finalize();
        out.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: String,
    pub pixels: usize,
    /// Pixels mapped inside both charts.
    pub mapped: usize,
    /// Pixels whose image was shrunk to the target extent.
    pub clamped: usize,
    /// Uncovered pixels replaced by the nearest covered color.
    pub fallback: usize,
    /// Pixels clipped to the sRGB cube on output.
    pub clipped: usize,
    /// Pixels whose mapped lightness left [0, 100].
    pub lightness_clamped: usize,
    pub config_digest: String,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Mapped,
    Clamped,
    Fallback,
}

#[derive(Debug, Clone, Copy)]
struct PixelResult {
    rgb: Rgb8,
    outcome: Outcome,
    clipped: bool,
    lightness_clamped: bool,
}

struct Runner<'a> {
    cfg: &'a CompensationConfig,
    mode: Mode,
    levels: Vec<IsometryMap<2>>,
    map3d: Option<IsometryMap<3>>,
}

fn orient<const D: usize>(m: &IsometryMap<D>, want: Direction) -> IsometryMap<D> {
    if m.direction() == want {
        m.clone()
    } else {
        m.reversed()
    }
}

fn outcome<const D: usize>(m: &Mapped<D>) -> Outcome {
    if m.fallback {
        Outcome::Fallback
    } else if m.clamped {
        Outcome::Clamped
    } else {
        Outcome::Mapped
    }
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a CompensationConfig, mode: Mode) -> Result<Self> {
        let checked = CompensationConfig {
            mode,
            ..cfg.clone()
        };
        checked.validate()?;
        let dir = mode.direction();
        Ok(Self {
            cfg,
            mode,
            levels: cfg.levels.iter().map(|lm| orient(&lm.map, dir)).collect(),
            map3d: cfg.map3d.as_ref().map(|m| orient(m, dir)),
        })
    }

    /// Maps one color in CIELUV; the result has `L*` clamped to `[0, 100]`.
    fn luv(&self, luv: LuvColor) -> Result<(LuvColor, Outcome, bool)> {
        let snap = self.cfg.interpolation == PixelInterpolation::NearestVertex;
        let (mut out, oc) = if self.mode.is_3d() {
            let m = self.map3d.as_ref().expect("validated").apply_with(&luv.to_vector(), snap, true)?;
            (LuvColor::from_vector(&m.point), outcome(&m))
        } else {
            let i = self.cfg.level_index(luv.l).expect("validated");
            let m = self.levels[i].apply_with(&luv.chroma(), snap, true)?;
            let mut l = luv.l;
            if self.mode.uses_lightness() {
                let lm = self.cfg.lightness.as_ref().expect("validated");
                l = if self.mode.is_simulation() { lm.forward(l) } else { lm.inverse(l) };
            }
            (LuvColor::new(l, m.point[0], m.point[1]), outcome(&m))
        };
        let lightness_clamped = !(0.0..=100.0).contains(&out.l);
        out.l = out.l.clamp(0.0, 100.0);
        Ok((out, oc, lightness_clamped))
    }

    fn pixel(&self, c: Rgb8) -> Result<PixelResult> {
        let conv = &self.cfg.converter;
        let (out, outcome, lightness_clamped) = self.luv(conv.srgb_to_luv(c))?;
        let (rgb, clipped) = conv.luv_to_srgb(out);
        Ok(PixelResult {
            rgb,
            outcome,
            clipped,
            lightness_clamped,
        })
    }

    fn run(&self, img: &ImageBuffer) -> Result<(ImageBuffer, RunReport)> {
        let mut unique: Vec<Rgb8> = img.pixels().to_vec();
        unique.sort_unstable_by_key(|c| c.channels());
        unique.dedup();
        let results: Vec<PixelResult> = unique.par_iter().map(|&c| self.pixel(c)).collect::<Result<_>>()?;
        let table: HashMap<Rgb8, PixelResult> = unique.into_iter().zip(results).collect();

        let mut report = RunReport {
            mode: self.mode.name().to_string(),
            pixels: img.len(),
            config_digest: self.cfg.digest(),
            ..RunReport::default()
        };
        let mut pixels = Vec::with_capacity(img.len());
        for c in img.pixels() {
            let r = table[c];
            match r.outcome {
                Outcome::Mapped => report.mapped += 1,
                Outcome::Clamped => report.clamped += 1,
                Outcome::Fallback => report.fallback += 1,
            }
            report.clipped += r.clipped as usize;
            report.lightness_clamped += r.lightness_clamped as usize;
            pixels.push(r.rgb);
        }
        Ok((ImageBuffer::new(img.width(), img.height(), pixels)?, report))
    }
}

/// Runs the configured mode.
pub fn process(img: &ImageBuffer, cfg: &CompensationConfig) -> Result<(ImageBuffer, RunReport)> {
    Runner::new(cfg, cfg.mode)?.run(img)
}

/// Maps a single color with the configured mode.
pub fn process_color(c: Rgb8, cfg: &CompensationConfig) -> Result<Rgb8> {
    Ok(Runner::new(cfg, cfg.mode)?.pixel(c)?.rgb)
}

/// Maps CIELUV colors with the configured mode, without 8-bit
/// quantization or gamut clipping. `L*` is clamped to `[0, 100]`.
pub fn map_luv(colors: &[LuvColor], cfg: &CompensationConfig) -> Result<Vec<LuvColor>> {
    let runner = Runner::new(cfg, cfg.mode)?;
    colors.par_iter().map(|&c| runner.luv(c).map(|r| r.0)).collect()
}

pub fn compensate_2d(img: &ImageBuffer, cfg: &CompensationConfig) -> Result<(ImageBuffer, RunReport)> {
    Runner::new(cfg, Mode::Compensate2d)?.run(img)
}

/// Level maps are chosen by the original lightness before the lightness
/// map is applied.
pub fn compensate_2d1d(img: &ImageBuffer, cfg: &CompensationConfig) -> Result<(ImageBuffer, RunReport)> {
    Runner::new(cfg, Mode::Compensate2d1d)?.run(img)
}

pub fn compensate_3d(img: &ImageBuffer, cfg: &CompensationConfig) -> Result<(ImageBuffer, RunReport)> {
    Runner::new(cfg, Mode::Compensate3d)?.run(img)
}

/// Requires a `simulate-*` mode.
pub fn simulate(img: &ImageBuffer, cfg: &CompensationConfig) -> Result<(ImageBuffer, RunReport)> {
    if !cfg.mode.is_simulation() {
        return Err(Error::Config(format!("simulate needs a simulate-* mode, got {}", cfg.mode)));
    }
    process(img, cfg)
}

/// RGB-to-RGB lookup table sampled on a regular lattice over the cube.
#[derive(Debug, Clone, PartialEq)]
pub struct Lut {
    size: usize,
    data: Vec<[f64; 3]>,
}

impl Lut {
    pub fn size(&self) -> usize {
        self.size
    }

    fn node(i: usize, size: usize) -> u8 {
        ((i as f64 * 255.0 / (size - 1) as f64).round()) as u8
    }

    fn at(&self, r: usize, g: usize, b: usize) -> [f64; 3] {
        self.data[(r * self.size + g) * self.size + b]
    }

    pub fn lookup(&self, c: Rgb8) -> Rgb8 {
        let n = (self.size - 1) as f64;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for (k, ch) in c.channels().into_iter().enumerate() {
            let t = ch as f64 / 255.0 * n;
            let i = (t.floor() as usize).min(self.size - 2);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let mut acc = [0.0; 3];
        for corner in 0..8 {
            let o = [(corner >> 2) & 1, (corner >> 1) & 1, corner & 1];
            let mut w = 1.0;
            for k in 0..3 {
                w *= if o[k] == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            if w == 0.0 {
                continue;
            }
            let v = self.at(base[0] + o[0], base[1] + o[1], base[2] + o[2]);
            for k in 0..3 {
                acc[k] += w * v[k];
            }
        }
        let q = |x: f64| x.round().clamp(0.0, 255.0) as u8;
        Rgb8::new(q(acc[0]), q(acc[1]), q(acc[2]))
    }

    pub fn apply(&self, img: &ImageBuffer) -> ImageBuffer {
        let pixels = img.pixels().par_iter().map(|&c| self.lookup(c)).collect();
        ImageBuffer::new(img.width(), img.height(), pixels).expect("same dimensions")
    }
}

/// Samples the configured mode on a `size³` lattice.
pub fn bake_lut(cfg: &CompensationConfig, size: usize) -> Result<Lut> {
    if size < 2 {
        return Err(Error::Config("LUT size must be at least 2".into()));
    }
    let runner = Runner::new(cfg, cfg.mode)?;
    let data = (0..size * size * size)
        .into_par_iter()
        .map(|i| {
            let c = Rgb8::new(
                Lut::node(i / (size * size), size),
                Lut::node(i / size % size, size),
                Lut::node(i % size, size),
            );
            let out = runner.pixel(c)?.rgb.channels();
            Ok(out.map(f64::from))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Lut { size, data })
}
