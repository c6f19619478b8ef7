//! Evaluation statistics: SD-score correlation, chroma spread, mean color.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::{Converter, LuvColor, Rgb8};
use crate::error::{Error, Result};
use crate::pipeline::ImageBuffer;

/// Number of adjective pairs on a sheet.
pub const SD_PAIRS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Condition {
    #[serde(rename = "original")]
    Original,
    #[serde(rename = "2d")]
    TwoD,
    #[serde(rename = "2d+1d")]
    TwoDOneD,
    #[serde(rename = "3d")]
    ThreeD,
    #[serde(rename = "simulation")]
    Simulation,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Original,
        Condition::TwoD,
        Condition::TwoDOneD,
        Condition::ThreeD,
        Condition::Simulation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Original => "original",
            Condition::TwoD => "2d",
            Condition::TwoDOneD => "2d+1d",
            Condition::ThreeD => "3d",
            Condition::Simulation => "simulation",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Condition::ALL
            .into_iter()
            .find(|c| c.name() == key)
            .ok_or_else(|| Error::Invalid(format!("unknown condition {s:?}")))
    }
}

/// Bounds of the rating scale, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdScale {
    pub min: f64,
    pub max: f64,
}

impl Default for SdScale {
    fn default() -> Self {
        Self { min: 1.0, max: 7.0 }
    }
}

impl SdScale {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdScoreSheet {
    pub observer_id: String,
    pub image_id: String,
    pub condition: Condition,
    pub scores: [f64; SD_PAIRS],
}

impl SdScoreSheet {
    pub fn validate(&self, scale: &SdScale) -> Result<()> {
        for (i, s) in self.scores.iter().enumerate() {
            if !(scale.min..=scale.max).contains(s) {
                return Err(Error::Invalid(format!(
                    "score s{} = {s} outside [{}, {}]",
                    i + 1,
                    scale.min,
                    scale.max
                )));
            }
        }
        Ok(())
    }

    /// Scores reflected about the scale midpoint.
    pub fn negated(&self, scale: &SdScale) -> Self {
        let m = 2.0 * scale.midpoint();
        Self {
            scores: self.scores.map(|s| m - s),
            ..self.clone()
        }
    }
}

/// Reads `observer_id,image_id,condition,s1..s8` rows.
pub fn parse_sd_sheets<R: Read>(source: R, scale: &SdScale) -> Result<Vec<SdScoreSheet>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let header = rdr.headers()?.clone();
    let expected: Vec<String> = ["observer_id", "image_id", "condition"]
        .into_iter()
        .map(String::from)
        .chain((1..=SD_PAIRS).map(|i| format!("s{i}")))
        .collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}", expected.join(",")),
        });
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |message: String| Error::Parse { line, message };
        if rec.len() != 3 + SD_PAIRS {
            return Err(err(format!("expected {} fields, got {}", 3 + SD_PAIRS, rec.len())));
        }
        let condition = rec[2].parse::<Condition>().map_err(|e| err(e.to_string()))?;
        let mut scores = [0.0; SD_PAIRS];
        for (i, s) in scores.iter_mut().enumerate() {
            *s = rec[3 + i]
                .parse()
                .map_err(|_| err(format!("score s{} is not a number: {:?}", i + 1, &rec[3 + i])))?;
        }
        let sheet = SdScoreSheet {
            observer_id: rec[0].to_string(),
            image_id: rec[1].to_string(),
            condition,
            scores,
        };
        sheet.validate(scale).map_err(|e| err(e.to_string()))?;
        out.push(sheet);
    }
    if out.is_empty() {
        return Err(Error::NoRecords);
    }
    Ok(out)
}

pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Invalid("vectors must have equal nonzero length".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn sd_correlation(a: &SdScoreSheet, b: &SdScoreSheet) -> Result<f64> {
    if a.image_id != b.image_id {
        return Err(Error::Invalid(format!(
            "sheets rate different images ({} vs {})",
            a.image_id, b.image_id
        )));
    }
    pearson(&a.scores, &b.scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub image_id: String,
    pub observer_id: String,
    pub condition: Condition,
    pub r: f64,
}

/// Correlates every sheet against the reference observer's rating of the
/// original image.
pub fn correlation_table(sheets: &[SdScoreSheet], reference_observer: &str) -> Result<Vec<CorrelationRow>> {
    let mut rows = Vec::new();
    for reference in sheets
        .iter()
        .filter(|s| s.observer_id == reference_observer && s.condition == Condition::Original)
    {
        for s in sheets
            .iter()
            .filter(|s| s.image_id == reference.image_id && s.observer_id != reference_observer)
        {
            rows.push(CorrelationRow {
                image_id: s.image_id.clone(),
                observer_id: s.observer_id.clone(),
                condition: s.condition,
                r: sd_correlation(reference, s)?,
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::Invalid(format!(
            "no sheets to compare against original ratings of observer {reference_observer:?}"
        )));
    }
    rows.sort_by(|a, b| {
        (&a.image_id, &a.observer_id, a.condition).cmp(&(&b.image_id, &b.observer_id, b.condition))
    });
    Ok(rows)
}

/// How the area of a chroma scatter is measured.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum AreaMethod {
    #[default]
    ConvexHull,
    /// Number of occupied square bins times the bin area.
    OccupiedBins { size: f64 },
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull in counter-clockwise order (monotone chain).
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    0.5 * twice.abs()
}

fn chroma_points(img: &ImageBuffer, conv: &Converter) -> Vec<[f64; 2]> {
    let mut colors: Vec<Rgb8> = img.pixels().to_vec();
    colors.sort_unstable_by_key(|c| c.channels());
    colors.dedup();
    colors
        .into_iter()
        .map(|c| {
            let luv = conv.srgb_to_luv(c);
            [luv.u, luv.v]
        })
        .collect()
}

/// Area of the `(u*, v*)` scatter of the points.
pub fn scatter_area(points: &[[f64; 2]], method: AreaMethod) -> Result<f64> {
    let area = match method {
        AreaMethod::ConvexHull => polygon_area(&convex_hull(points)),
        AreaMethod::OccupiedBins { size } => {
            if !(size > 0.0) {
                return Err(Error::Config("bin size must be positive".into()));
            }
            let mut bins: Vec<(i64, i64)> = points
                .iter()
                .map(|p| ((p[0] / size).floor() as i64, (p[1] / size).floor() as i64))
                .collect();
            bins.sort_unstable();
            bins.dedup();
            bins.len() as f64 * size * size
        }
    };
    let extent = points
        .iter()
        .flat_map(|p| p.iter().map(|c| c.abs()))
        .fold(1.0f64, f64::max);
    if area <= 1e-12 * extent * extent {
        return Err(Error::Degenerate("chroma scatter is collinear".into()));
    }
    Ok(area)
}

/// Ratio of chroma scatter areas, after over before.
pub fn chroma_area_expansion(before: &ImageBuffer, after: &ImageBuffer, conv: &Converter) -> Result<f64> {
    chroma_area_expansion_with(before, after, conv, AreaMethod::default())
}

pub fn chroma_area_expansion_with(
    before: &ImageBuffer,
    after: &ImageBuffer,
    conv: &Converter,
    method: AreaMethod,
) -> Result<f64> {
    if before.width() != after.width() || before.height() != after.height() {
        return Err(Error::Invalid(format!(
            "image sizes differ: {}x{} vs {}x{}",
            before.width(),
            before.height(),
            after.width(),
            after.height()
        )));
    }
    let a0 = scatter_area(&chroma_points(before, conv), method)?;
    let a1 = scatter_area(&chroma_points(after, conv), method)?;
    Ok(a1 / a0)
}

/// Arithmetic mean of the per-pixel CIELUV values.
pub fn mean_luv(img: &ImageBuffer, conv: &Converter) -> Result<LuvColor> {
    if img.is_empty() {
        return Err(Error::Invalid("empty image".into()));
    }
    let mut sum = [0.0f64; 3];
    for &c in img.pixels() {
        let luv = conv.srgb_to_luv(c);
        sum[0] += luv.l;
        sum[1] += luv.u;
        sum[2] += luv.v;
    }
    let n = img.len() as f64;
    Ok(LuvColor::new(sum[0] / n, sum[1] / n, sum[2] / n))
}
