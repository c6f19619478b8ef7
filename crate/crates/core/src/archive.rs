//! Versioned binary archives for fields, charts, maps and lightness maps.
//!
//! Every archive starts with a five-byte magic (`CWMF1`, `CWNC1`, `CWIM1`,
//! `CWLM1`) followed by little-endian payload. Charts store their integrated
//! rays and are reassembled on load, so round trips are bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Termination;
use crate::isometry::{compose_isometry, Direction, IsometryMap, LightnessMap};
use crate::linalg::{pack_sym, sym_len, unpack_sym, Matrix, Vector};
use crate::rnc::{ChartConfig, Fan, Layout, NormalChart, Patch, Ray};
use crate::thresholds::{Ellipsoid, Interpolation, Lattice, MetricField};

pub const FIELD_MAGIC: &[u8; 5] = b"CWMF1";
pub const CHART_MAGIC: &[u8; 5] = b"CWNC1";
pub const MAP_MAGIC: &[u8; 5] = b"CWIM1";
pub const LIGHTNESS_MAGIC: &[u8; 5] = b"CWLM1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    Fields,
    Charts,
    Maps,
    Lightness,
}

impl ArchiveKind {
    pub fn magic(self) -> &'static [u8; 5] {
        match self {
            ArchiveKind::Fields => FIELD_MAGIC,
            ArchiveKind::Charts => CHART_MAGIC,
            ArchiveKind::Maps => MAP_MAGIC,
            ArchiveKind::Lightness => LIGHTNESS_MAGIC,
        }
    }
}

/// Kind and spatial dimension of an archive, from its header.
pub fn peek(bytes: &[u8]) -> Result<(ArchiveKind, Option<usize>)> {
    let kind = [
        ArchiveKind::Fields,
        ArchiveKind::Charts,
        ArchiveKind::Maps,
        ArchiveKind::Lightness,
    ]
    .into_iter()
    .find(|k| bytes.starts_with(k.magic()))
    .ok_or_else(|| Error::Archive("unrecognized archive magic".into()))?;
    let dim = match kind {
        ArchiveKind::Lightness => None,
        _ => Some(*bytes.get(5).ok_or_else(|| Error::Archive("truncated header".into()))? as usize),
    };
    Ok((kind, dim))
}

struct Out(Vec<u8>);

impl Out {
    fn new(magic: &[u8; 5]) -> Self {
        Out(magic.to_vec())
    }
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: usize) {
        self.0.extend_from_slice(&u32::try_from(x).expect("count fits u32").to_le_bytes());
    }
    fn u64(&mut self, x: usize) {
        self.0.extend_from_slice(&(x as u64).to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s(&mut self, xs: &[f64]) {
        for &x in xs {
            self.f64(x);
        }
    }
    fn opt_f64(&mut self, x: Option<f64>) {
        match x {
            Some(v) => {
                self.u8(1);
                self.f64(v);
            }
            None => self.u8(0),
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len());
        self.0.extend_from_slice(b);
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> In<'a> {
    fn new(buf: &'a [u8], magic: &[u8; 5]) -> Result<Self> {
        if !buf.starts_with(magic) {
            return Err(Error::Archive(format!(
                "expected {} archive",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(In { buf, pos: 5 })
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Archive("truncated archive".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<usize> {
        usize::try_from(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
            .map_err(|_| Error::Archive("length overflow".into()))
    }
    /// A count of items at least `item_size` bytes each.
    fn count(&mut self, wide: bool, item_size: usize) -> Result<usize> {
        let n = if wide { self.u64()? } else { self.u32()? };
        if n.saturating_mul(item_size.max(1)) > self.buf.len() - self.pos {
            return Err(Error::Archive("count exceeds archive size".into()));
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }
    fn opt_f64(&mut self) -> Result<Option<f64>> {
        match self.u8()? {
            0 => Ok(None),
            1 => Ok(Some(self.f64()?)),
            t => Err(Error::Archive(format!("bad option tag {t}"))),
        }
    }
    fn str(&mut self) -> Result<String> {
        let n = self.count(false, 1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Archive("invalid UTF-8".into()))
    }
    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.count(true, 1)?;
        self.take(n)
    }
    fn vector<const D: usize>(&mut self) -> Result<Vector<D>> {
        Ok(Vector::<D>::from_vec(self.f64s(D)?))
    }
    fn matrix<const D: usize>(&mut self) -> Result<Matrix<D>> {
        Ok(Matrix::<D>::from_vec(self.f64s(D * D)?))
    }
    fn dimension<const D: usize>(&mut self) -> Result<()> {
        let d = self.u8()? as usize;
        if d != D {
            return Err(Error::Archive(format!("archive is {d}D, expected {D}D")));
        }
        Ok(())
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Archive(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn write_field<const D: usize>(o: &mut Out, f: &MetricField<D>) {
    o.str(&f.observer_id);
    o.opt_f64(f.level);
    o.u8(f.method.tag());
    o.f64(f.sigma);
    o.f64s(f.lattice.min.as_slice());
    o.f64s(f.lattice.spacing.as_slice());
    for &c in &f.lattice.counts {
        o.u32(c);
    }
    o.u64(f.samples.len());
    o.f64s(&f.samples);
    o.u32(f.ellipsoids.len());
    let mut packed = vec![0.0; sym_len(D)];
    for e in &f.ellipsoids {
        o.f64s(e.center.as_slice());
        pack_sym(&e.metric, &mut packed);
        o.f64s(&packed);
    }
}

fn read_field<const D: usize>(i: &mut In) -> Result<MetricField<D>> {
    let observer = i.str()?;
    let level = i.opt_f64()?;
    let tag = i.u8()?;
    let method = Interpolation::from_tag(tag).ok_or_else(|| Error::Archive(format!("unknown method tag {tag}")))?;
    let sigma = i.f64()?;
    let min = i.vector::<D>()?;
    let spacing = i.vector::<D>()?;
    let mut counts = [0usize; D];
    for c in counts.iter_mut() {
        *c = i.u32()?;
    }
    let n = i.count(true, 8)?;
    let samples = i.f64s(n)?;
    let n_ell = i.count(false, 8 * (D + sym_len(D)))?;
    let mut ellipsoids = Vec::with_capacity(n_ell);
    for _ in 0..n_ell {
        let center = i.vector::<D>()?;
        let metric = unpack_sym::<D>(&i.f64s(sym_len(D))?);
        ellipsoids.push(Ellipsoid { center, metric });
    }
    let lattice = Lattice { min, spacing, counts };
    let mut field = MetricField::from_samples(lattice, samples, sigma, method)
        .map_err(|e| Error::Archive(format!("invalid field: {e}")))?
        .with_level(level)
        .with_observer(observer);
    field.ellipsoids = ellipsoids;
    Ok(field)
}

pub fn encode_fields<const D: usize>(fields: &[MetricField<D>]) -> Vec<u8> {
    let mut o = Out::new(FIELD_MAGIC);
    o.u8(D as u8);
    o.u32(fields.len());
    for f in fields {
        write_field(&mut o, f);
    }
    o.0
}

pub fn decode_fields<const D: usize>(bytes: &[u8]) -> Result<Vec<MetricField<D>>> {
    let mut i = In::new(bytes, FIELD_MAGIC)?;
    i.dimension::<D>()?;
    let n = i.count(false, 1)?;
    let out = (0..n).map(|_| read_field(&mut i)).collect::<Result<Vec<_>>>()?;
    i.finish()?;
    Ok(out)
}

fn termination_tag(t: Termination) -> u8 {
    match t {
        Termination::Length => 0,
        Termination::Domain => 1,
        Termination::Region => 2,
    }
}

fn write_fan<const D: usize>(o: &mut Out, fan: &Fan<D>) {
    match fan.layout() {
        Layout::Fan { n_angles } => {
            o.u8(0);
            o.u32(n_angles);
            o.u32(0);
        }
        Layout::Bundle { n_polar, n_azimuth } => {
            o.u8(1);
            o.u32(n_polar);
            o.u32(n_azimuth);
        }
    }
    let c = fan.config();
    o.f64s(&[c.radial_spacing, c.step, c.max_length]);
    o.f64s(fan.origin().as_slice());
    o.f64s(fan.frame().as_slice());
    o.u32(fan.rays().len());
    for ray in fan.rays() {
        o.u32(ray.nodes.len());
        for p in &ray.nodes {
            o.f64s(p.as_slice());
        }
        o.f64(ray.end_s);
        o.u8(termination_tag(ray.termination));
    }
}

fn read_fan<const D: usize>(i: &mut In) -> Result<Fan<D>> {
    let kind = i.u8()?;
    let (a, b) = (i.u32()?, i.u32()?);
    let layout = match kind {
        0 => Layout::Fan { n_angles: a },
        1 => Layout::Bundle { n_polar: a, n_azimuth: b },
        t => return Err(Error::Archive(format!("unknown layout tag {t}"))),
    };
    layout.validate().map_err(|e| Error::Archive(e.to_string()))?;
    if layout.dimension() != D {
        return Err(Error::Archive("layout does not match archive dimension".into()));
    }
    let config = ChartConfig {
        radial_spacing: i.f64()?,
        step: i.f64()?,
        max_length: i.f64()?,
    };
    let origin = i.vector::<D>()?;
    let frame = i.matrix::<D>()?;
    let n_rays = i.count(false, 4)?;
    if n_rays != layout.ray_count() {
        return Err(Error::Archive(format!(
            "layout needs {} rays, archive has {n_rays}",
            layout.ray_count()
        )));
    }
    let mut rays = Vec::with_capacity(n_rays);
    for _ in 0..n_rays {
        let n = i.count(false, 8 * D)?;
        if n == 0 {
            return Err(Error::Archive("ray without nodes".into()));
        }
        let nodes = (0..n).map(|_| i.vector::<D>()).collect::<Result<Vec<_>>>()?;
        let end_s = i.f64()?;
        let termination = match i.u8()? {
            0 => Termination::Length,
            1 => Termination::Domain,
            2 => Termination::Region,
            t => return Err(Error::Archive(format!("unknown termination tag {t}"))),
        };
        rays.push(Ray {
            nodes,
            end_s,
            termination,
        });
    }
    Ok(Fan::assemble(origin, frame, layout, config, rays))
}

fn write_chart<const D: usize>(o: &mut Out, chart: &NormalChart<D>) {
    write_fan(o, chart.main());
    o.u32(chart.patches().len());
    for p in chart.patches() {
        o.f64s(p.xi0.as_slice());
        o.f64s(p.rotation.as_slice());
        write_fan(o, &p.fan);
    }
}

fn read_chart<const D: usize>(i: &mut In) -> Result<NormalChart<D>> {
    let main = read_fan::<D>(i)?;
    let n = i.count(false, 8 * D * (D + 1))?;
    let mut patches = Vec::with_capacity(n);
    for _ in 0..n {
        let xi0 = i.vector::<D>()?;
        let rotation = i.matrix::<D>()?;
        let fan = read_fan::<D>(i)?;
        patches.push(Patch { xi0, rotation, fan });
    }
    Ok(NormalChart::from_parts(main, patches))
}

/// A chart with the lightness plane it was cut at (2D charts).
#[derive(Debug, Clone)]
pub struct ChartEntry<const D: usize> {
    pub level: Option<f64>,
    pub chart: NormalChart<D>,
}

pub fn encode_charts<const D: usize>(charts: &[ChartEntry<D>]) -> Vec<u8> {
    let mut o = Out::new(CHART_MAGIC);
    o.u8(D as u8);
    o.u32(charts.len());
    for c in charts {
        o.opt_f64(c.level);
        write_chart(&mut o, &c.chart);
    }
    o.0
}

pub fn decode_charts<const D: usize>(bytes: &[u8]) -> Result<Vec<ChartEntry<D>>> {
    let mut i = In::new(bytes, CHART_MAGIC)?;
    i.dimension::<D>()?;
    let n = i.count(false, 1)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let level = i.opt_f64()?;
        out.push(ChartEntry {
            level,
            chart: read_chart(&mut i)?,
        });
    }
    i.finish()?;
    Ok(out)
}

/// A map with the lightness plane it applies to (2D maps).
#[derive(Debug, Clone)]
pub struct MapEntry<const D: usize> {
    pub level: Option<f64>,
    pub map: IsometryMap<D>,
}

pub fn encode_maps<const D: usize>(maps: &[MapEntry<D>]) -> Vec<u8> {
    let mut o = Out::new(MAP_MAGIC);
    o.u8(D as u8);
    o.u32(maps.len());
    for m in maps {
        o.opt_f64(m.level);
        o.u8(m.map.direction().tag());
        for chart in [m.map.source(), m.map.target()] {
            let mut inner = Out(Vec::new());
            write_chart(&mut inner, chart);
            o.bytes(&inner.0);
        }
    }
    o.0
}

pub fn decode_maps<const D: usize>(bytes: &[u8]) -> Result<Vec<MapEntry<D>>> {
    let mut i = In::new(bytes, MAP_MAGIC)?;
    i.dimension::<D>()?;
    let n = i.count(false, 1)?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let level = i.opt_f64()?;
        let tag = i.u8()?;
        let direction = Direction::from_tag(tag).ok_or_else(|| Error::Archive(format!("unknown direction tag {tag}")))?;
        let mut charts = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut inner = In { buf: i.bytes()?, pos: 0 };
            charts.push(Arc::new(read_chart::<D>(&mut inner)?));
            inner.finish()?;
        }
        let target = charts.pop().expect("two charts");
        let source = charts.pop().expect("two charts");
        let map = compose_isometry(source, target, direction).map_err(|e| Error::Archive(e.to_string()))?;
        out.push(MapEntry { level, map });
    }
    i.finish()?;
    Ok(out)
}

pub fn encode_lightness(map: &LightnessMap) -> Vec<u8> {
    let mut o = Out::new(LIGHTNESS_MAGIC);
    o.f64(map.origin());
    o.u32(map.nodes().len());
    o.f64s(map.nodes());
    o.f64s(map.values());
    o.f64s(map.slopes());
    o.0
}

pub fn decode_lightness(bytes: &[u8]) -> Result<LightnessMap> {
    let mut i = In::new(bytes, LIGHTNESS_MAGIC)?;
    let origin = i.f64()?;
    let n = i.count(false, 24)?;
    let nodes = i.f64s(n)?;
    let values = i.f64s(n)?;
    let slopes = i.f64s(n)?;
    i.finish()?;
    LightnessMap::from_table(origin, nodes, values, slopes).map_err(|e| Error::Archive(e.to_string()))
}

pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// Writes through a temporary file and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Invalid(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
