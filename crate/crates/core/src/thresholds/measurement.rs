//! Color-matching measurement files.
//!
//! ```text
//! #directions
//! #0,1,0,0
//! ...
//! #13,-0.5773502691896258,-0.5773502691896258,-0.5773502691896258
//! observer_id,session_id,timestamp,L,u,v,direction_index,repetition,L_match,u_match,v_match
//! normal,s1,2024-01-01T10:00:00Z,50,0,0,0,1,51.2,0,0
//! ```
//!
//! Direction vectors are `(dL, du, dv)` unit vectors. A file without a
//! `#directions` block uses [`default_directions`].

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::colorspace::LuvColor;
use crate::error::{Error, Result};
use crate::linalg::Vector;

pub const DIRECTION_COUNT: usize = 14;
pub const REPETITIONS: u32 = 4;

pub const CSV_HEADER: [&str; 11] = [
    "observer_id",
    "session_id",
    "timestamp",
    "L",
    "u",
    "v",
    "direction_index",
    "repetition",
    "L_match",
    "u_match",
    "v_match",
];

/// The six axis directions followed by the eight `(±1, ±1, ±1)/√3` diagonals.
pub fn default_directions() -> Vec<[f64; 3]> {
    let mut dirs = Vec::with_capacity(DIRECTION_COUNT);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut d = [0.0; 3];
            d[axis] = sign;
            dirs.push(d);
        }
    }
    let k = 1.0 / 3f64.sqrt();
    for a in [1.0, -1.0] {
        for b in [1.0, -1.0] {
            for c in [1.0, -1.0] {
                dirs.push([a * k, b * k, c * k]);
            }
        }
    }
    dirs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub observer_id: String,
    pub session_id: String,
    pub timestamp: String,
    pub test_color: LuvColor,
    pub direction_index: usize,
    pub repetition: u32,
    pub matched_color: LuvColor,
}

impl MeasurementRecord {
    pub fn deviation(&self) -> Vector<3> {
        self.matched_color.to_vector() - self.test_color.to_vector()
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    observer_id: String,
    session_id: String,
    timestamp: String,
    #[serde(rename = "L")]
    l: f64,
    u: f64,
    v: f64,
    direction_index: i64,
    repetition: i64,
    #[serde(rename = "L_match")]
    l_match: f64,
    u_match: f64,
    v_match: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub directions: Vec<[f64; 3]>,
    pub records: Vec<MeasurementRecord>,
    /// Distinct test colors, grouped by lightness level (ascending) and in
    /// first-appearance order within a level.
    pub centers: Vec<LuvColor>,
    /// Distinct lightness values of the centers, ascending.
    pub levels: Vec<f64>,
}

fn check_record(r: &MeasurementRecord, n_dirs: usize) -> std::result::Result<(), String> {
    if r.direction_index >= n_dirs {
        return Err(format!(
            "unknown direction index {} (file declares {n_dirs})",
            r.direction_index
        ));
    }
    if !(1..=REPETITIONS).contains(&r.repetition) {
        return Err(format!("repetition {} outside 1..={REPETITIONS}", r.repetition));
    }
    if !r.test_color.is_finite() || !r.matched_color.is_finite() {
        return Err("non-finite color component".into());
    }
    if !(0.0..=100.0).contains(&r.test_color.l) {
        return Err(format!("test lightness {} outside [0, 100]", r.test_color.l));
    }
    Ok(())
}

impl MeasurementSet {
    pub fn from_records(directions: Vec<[f64; 3]>, records: Vec<MeasurementRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::NoRecords);
        }
        for (i, r) in records.iter().enumerate() {
            check_record(r, directions.len()).map_err(|message| Error::Parse {
                line: i as u64 + 1,
                message,
            })?;
        }
        let mut centers: Vec<LuvColor> = Vec::new();
        for r in &records {
            if !centers.contains(&r.test_color) {
                centers.push(r.test_color);
            }
        }
        // stable sort keeps first-appearance order inside each level
        centers.sort_by(|a, b| a.l.total_cmp(&b.l));
        let mut levels: Vec<f64> = centers.iter().map(|c| c.l).collect();
        levels.dedup();
        Ok(Self {
            directions,
            records,
            centers,
            levels,
        })
    }

    pub fn observers(&self) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for r in &self.records {
            if !ids.contains(&r.observer_id) {
                ids.push(r.observer_id.clone());
            }
        }
        ids
    }

    pub fn for_observer(&self, observer_id: &str) -> Result<Self> {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| r.observer_id == observer_id)
            .cloned()
            .collect();
        if records.is_empty() {
            return Err(Error::NotFound(format!("observer {observer_id}")));
        }
        Self::from_records(self.directions.clone(), records)
    }

    /// Number of centers per lightness level.
    pub fn centers_per_level(&self) -> Vec<(f64, usize)> {
        self.levels
            .iter()
            .map(|&l| (l, self.centers.iter().filter(|c| c.l == l).count()))
            .collect()
    }

    /// Deviation vectors per center, averaged over repetitions within each
    /// direction. Centers appear in `self.centers` order.
    pub fn averaged_deviations(&self) -> Vec<(LuvColor, Vec<Vector<3>>)> {
        self.centers
            .iter()
            .map(|center| {
                let mut by_dir: BTreeMap<usize, (Vector<3>, usize)> = BTreeMap::new();
                for r in self.records.iter().filter(|r| r.test_color == *center) {
                    let e = by_dir
                        .entry(r.direction_index)
                        .or_insert((Vector::<3>::zeros(), 0));
                    e.0 += r.deviation();
                    e.1 += 1;
                }
                let devs = by_dir.into_values().map(|(s, n)| s / n as f64).collect();
                (*center, devs)
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write_csv_header(&mut out, &self.directions)?;
        write_csv_rows(out, &self.records)
    }
}

/// Direction block and column header.
pub fn write_csv_header<W: Write>(mut out: W, directions: &[[f64; 3]]) -> Result<()> {
    writeln!(out, "#directions")?;
    for (i, d) in directions.iter().enumerate() {
        writeln!(out, "#{i},{},{},{}", d[0], d[1], d[2])?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    w.flush()?;
    Ok(())
}

/// Data rows only, for appending to an existing file.
pub fn write_csv_rows<W: Write>(out: W, records: &[MeasurementRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in records {
        w.write_record(record_fields(r))?;
    }
    w.flush()?;
    Ok(())
}

fn record_fields(r: &MeasurementRecord) -> [String; 11] {
    [
        r.observer_id.clone(),
        r.session_id.clone(),
        r.timestamp.clone(),
        r.test_color.l.to_string(),
        r.test_color.u.to_string(),
        r.test_color.v.to_string(),
        r.direction_index.to_string(),
        r.repetition.to_string(),
        r.matched_color.l.to_string(),
        r.matched_color.u.to_string(),
        r.matched_color.v.to_string(),
    ]
}

fn parse_direction_line(line: &str, lineno: u64) -> Result<(usize, [f64; 3])> {
    let err = |message: String| Error::Parse {
        line: lineno,
        message,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(err(format!("direction line needs 4 fields, got {}", fields.len())));
    }
    let index: usize = fields[0]
        .parse()
        .map_err(|_| err(format!("bad direction index {:?}", fields[0])))?;
    let mut d = [0.0f64; 3];
    for k in 0..3 {
        d[k] = fields[k + 1]
            .parse()
            .map_err(|_| err(format!("bad direction component {:?}", fields[k + 1])))?;
    }
    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(err("zero direction vector".into()));
    }
    Ok((index, d.map(|x| x / norm)))
}

/// Parse a measurement CSV (see module docs for the layout).
pub fn parse_measurements<R: Read>(mut source: R) -> Result<MeasurementSet> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;

    let mut directions: Vec<(usize, [f64; 3])> = Vec::new();
    let mut in_block = false;
    let mut data_start = 0usize;
    let mut data_line = 1u64;
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if comment.eq_ignore_ascii_case("directions") {
                in_block = true;
            } else if in_block && !comment.is_empty() {
                directions.push(parse_direction_line(comment, i as u64 + 1)?);
            }
            data_start += line.len() + 1;
            data_line += 1;
        } else if trimmed.is_empty() {
            data_start += line.len() + 1;
            data_line += 1;
        } else {
            break;
        }
    }

    let directions = if directions.is_empty() {
        default_directions()
    } else {
        directions.sort_by_key(|(i, _)| *i);
        for (expect, (i, _)) in directions.iter().enumerate() {
            if *i != expect {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("direction block is not indexed 0..{}", directions.len()),
                });
            }
        }
        directions.into_iter().map(|(_, d)| d).collect()
    };

    let body = text.get(data_start.min(text.len())..).unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());

    let headers = reader.headers().map_err(|e| Error::Parse {
        line: data_line,
        message: e.to_string(),
    })?;
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::NoRecords);
    }
    let got: Vec<&str> = headers.iter().collect();
    if got != CSV_HEADER {
        return Err(Error::Parse {
            line: data_line,
            message: format!("unexpected header {got:?}"),
        });
    }

    let mut records = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| {
            let line = e
                .position()
                .map(|p| p.line() + data_line - 1)
                .unwrap_or(data_line);
            Error::Parse {
                line,
                message: match e.kind() {
                    csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                    _ => e.to_string(),
                },
            }
        })?;
        let line = data_line + records.len() as u64 + 1;
        if row.direction_index < 0 || row.repetition < 0 {
            return Err(Error::Parse {
                line,
                message: "negative index".into(),
            });
        }
        let rec = MeasurementRecord {
            observer_id: row.observer_id,
            session_id: row.session_id,
            timestamp: row.timestamp,
            test_color: LuvColor::new(row.l, row.u, row.v),
            direction_index: row.direction_index as usize,
            repetition: row.repetition as u32,
            matched_color: LuvColor::new(row.l_match, row.u_match, row.v_match),
        };
        check_record(&rec, directions.len()).map_err(|message| Error::Parse { line, message })?;
        records.push(rec);
    }
    if records.is_empty() {
        return Err(Error::NoRecords);
    }
    MeasurementSet::from_records(directions, records)
}
