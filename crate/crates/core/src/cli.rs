//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::analysis::{
    chroma_area_expansion_with, correlation_table, mean_luv, parse_sd_sheets, AreaMethod, SdScale,
};
use crate::archive::{self, ChartEntry, MapEntry};
use crate::colorspace::{Converter, WhitePoint, SRGB_LUV_BOUNDS};
use crate::error::Error;
use crate::isometry::{build_lightness_map, compose_isometry, Direction};
use crate::linalg::Vector;
use crate::metric::{Bounds, ChromaSlice};
use crate::pipeline::{self, bake_lut, CompensationConfig, ImageBuffer, Mode, PixelInterpolation, LUT_SIZE};
use crate::rnc::{
    build_chart_2d, build_chart_3d, default_frame_3d, default_reference_2d, gamut_region, gamut_slice, ChartConfig,
    NormalChart, DEFAULT_ANGLES, DEFAULT_AZIMUTH, DEFAULT_ORIGIN_3D, DEFAULT_POLAR,
};
use crate::service::{self, ServiceConfig};
use crate::synth::{self, SynthConfig};
use crate::thresholds::{
    build_metric_field, fit_measurements, parse_measurements, restrict_to_lightness_axis, volume_ratio_of,
    Ellipsoid, FieldConfig, Interpolation, MetricField,
};

#[derive(Debug, Parser)]
#[command(name = "chromaweak", version, about = "Color-weak simulation and compensation over CIELUV")]
pub struct Cli {
    /// Reference white.
    #[arg(long, global = true, value_enum, default_value = "d65")]
    pub white: White,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum White {
    D65,
    D50,
}

impl White {
    fn converter(self) -> Converter {
        Converter::new(match self {
            White::D65 => WhitePoint::D65,
            White::D50 => WhitePoint::D50,
        })
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-observer measurement CSV.
    Synth(SynthArgs),
    /// Fit ellipsoids and metric fields from a measurement CSV.
    Fit(FitArgs),
    /// Build normal-coordinate charts for one observer.
    Chart(ChartArgs),
    /// Compose charts of two observers into isometry maps.
    Map(MapArgs),
    /// Build the lightness-axis map between two observers.
    Lightness(LightnessArgs),
    /// Compensate or simulate an image.
    Compensate(CompensateArgs),
    /// Chroma spread, mean color and SD-score correlation statistics.
    Stats(StatsArgs),
    /// Run the measurement session service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    /// Smooth random observers with a weakened confusion direction.
    Protocol,
    /// Constant observers with `G_w = G_n / 4`.
    Scaling,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "protocol")]
    pub kind: SynthKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Relative noise on deviation lengths.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Lattice spacing in CIELUV units.
    #[arg(long, default_value_t = 5.0)]
    pub spacing: f64,
    /// Gaussian smoothing width in lattice cells.
    #[arg(long, default_value_t = 1.5)]
    pub sigma: f64,
    #[arg(long, default_value = "cubic-b-spline")]
    pub method: Interpolation,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub measurements: PathBuf,
    /// Observers to fit (default: all).
    #[arg(long = "observer")]
    pub observers: Vec<String>,
    #[command(flatten)]
    pub field: FieldArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ChartArgs {
    /// Field archive.
    pub fields: PathBuf,
    /// Observer inside the archive (default: the only one).
    #[arg(long)]
    pub observer: Option<String>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=3))]
    pub dim: u8,
    /// Origin: `u,v` for 2D charts, `L,u,v` for 3D.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub origin: Option<Vec<f64>>,
    /// Lightness planes of 2D charts.
    #[arg(long, value_delimiter = ',', default_value = "30,40,50,60,70")]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_ANGLES)]
    pub angles: usize,
    #[arg(long, default_value_t = DEFAULT_POLAR)]
    pub polar: usize,
    #[arg(long, default_value_t = DEFAULT_AZIMUTH)]
    pub azimuth: usize,
    /// Arc-length spacing of chart nodes.
    #[arg(long, default_value_t = 1.0)]
    pub radial_spacing: f64,
    /// RK4 step.
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Secondary-patch origins, same layout as `--origin`.
    #[arg(long = "patch", value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub patches: Vec<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Compensation,
    Simulation,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Chart archive of the color-normal observer.
    #[arg(long)]
    pub normal: PathBuf,
    /// Chart archive of the color-weak observer.
    #[arg(long)]
    pub weak: PathBuf,
    #[arg(long, value_enum, default_value = "compensation")]
    pub direction: DirectionArg,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct LightnessArgs {
    pub fields: PathBuf,
    #[arg(long)]
    pub normal: String,
    #[arg(long)]
    pub weak: String,
    /// Lightness fixed by the map.
    #[arg(long, default_value_t = 30.0)]
    pub origin: f64,
    #[arg(long, default_value_t = 0.0)]
    pub min: f64,
    #[arg(long, default_value_t = 100.0)]
    pub max: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompensateArgs {
    pub input: PathBuf,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Mode,
    /// 2D map archive (one map per lightness plane).
    #[arg(long)]
    pub maps2d: Option<PathBuf>,
    /// Lightness map archive.
    #[arg(long)]
    pub lightness: Option<PathBuf>,
    /// 3D map archive.
    #[arg(long)]
    pub map3d: Option<PathBuf>,
    #[arg(long, default_value = "barycentric", value_parser = parse_interpolation)]
    pub interpolation: PixelInterpolation,
    /// Apply through a baked 33³ lookup table.
    #[arg(long)]
    pub lut: bool,
    /// Also write the report here (it always goes to stdout).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, requires = "after", conflicts_with = "sheets")]
    pub before: Option<PathBuf>,
    #[arg(long, requires = "before")]
    pub after: Option<PathBuf>,
    /// Measure chroma area by occupied bins of this size instead of the
    /// convex hull.
    #[arg(long)]
    pub bins: Option<f64>,
    /// SD score sheets CSV.
    #[arg(long)]
    pub sheets: Option<PathBuf>,
    /// Observer whose original-image ratings are the reference.
    #[arg(long, requires = "sheets")]
    pub reference: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    pub scale_min: f64,
    #[arg(long, default_value_t = 7.0)]
    pub scale_max: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Directory of the browser bundle.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_interpolation(s: &str) -> Result<PixelInterpolation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => CliError::Usage(format!("configuration error: {m}")),
            other => CliError::Runtime(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn existing(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Usage(format!("{}: no such file", path.display())))
    }
}

fn load(path: &Path) -> CliResult<Vec<u8>> {
    Ok(archive::read_bytes(existing(path)?)?)
}

fn luv_domain() -> Bounds<3> {
    Bounds::from_arrays(SRGB_LUV_BOUNDS.0, SRGB_LUV_BOUNDS.1)
}

fn cmd_synth(args: &SynthArgs, conv: &Converter) -> CliResult<String> {
    let cfg = SynthConfig {
        seed: args.seed,
        noise: args.noise,
    };
    let set = match args.kind {
        SynthKind::Protocol => synth::protocol_dataset(conv, &cfg)?,
        SynthKind::Scaling => synth::scaling_dataset(conv, &cfg)?,
    };
    let mut buf = Vec::new();
    set.write_csv(&mut buf)?;
    archive::write_atomic(&args.output, &buf)?;
    Ok(format!(
        "wrote {} records ({} centers, {} observers) to {}\n",
        set.records.len(),
        set.centers.len(),
        set.observers().len(),
        args.output.display()
    ))
}

fn ratio_table(out: &mut String, normal: &[Ellipsoid<3>], weak: &[Ellipsoid<3>], levels: &[f64]) -> CliResult<()> {
    let sec = |es: &[Ellipsoid<3>]| es.iter().map(Ellipsoid::chroma_section).collect::<Vec<_>>();
    let (sn, sw) = (sec(normal), sec(weak));
    let area_at = |l: Option<f64>| -> crate::Result<f64> {
        let pick = |es: &[Ellipsoid<2>], src: &[Ellipsoid<3>]| -> Vec<Ellipsoid<2>> {
            es.iter()
                .zip(src)
                .filter(|(_, e)| l.is_none_or(|l| (e.center[0] - l).abs() < 1e-9))
                .map(|(s, _)| *s)
                .collect()
        };
        volume_ratio_of(&pick(&sn, normal), &pick(&sw, weak), None)
    };
    writeln!(out, "{:>8} {:>12} {:>12}", "level", "volume", "area").unwrap();
    for &l in levels {
        let v = volume_ratio_of(normal, weak, Some(l))?;
        writeln!(out, "{:>8} {:>12.4} {:>12.4}", l, v, area_at(Some(l))?).unwrap();
    }
    let v = volume_ratio_of(normal, weak, None)?;
    writeln!(out, "{:>8} {:>12.4} {:>12.4}", "all", v, area_at(None)?).unwrap();
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> CliResult<String> {
    let text = fs::read(existing(&args.measurements)?).map_err(Error::from)?;
    let set = parse_measurements(text.as_slice())?;
    let observers = if args.observers.is_empty() {
        set.observers()
    } else {
        args.observers.clone()
    };
    let config = FieldConfig {
        domain: Some(luv_domain()),
        spacing: args.field.spacing,
        sigma: args.field.sigma,
        method: args.field.method,
        ..FieldConfig::default()
    };
    let mut out = String::new();
    let mut fields = Vec::new();
    let mut fitted = Vec::new();
    for id in &observers {
        let sub = set.for_observer(id)?;
        let ellipsoids = fit_measurements(&sub)?;
        writeln!(out, "observer {id}: {} ellipsoids", ellipsoids.len()).unwrap();
        writeln!(out, "{:>8} {:>8}", "level", "count").unwrap();
        for (l, n) in sub.centers_per_level() {
            writeln!(out, "{l:>8} {n:>8}").unwrap();
        }
        let field = build_metric_field(&ellipsoids, &config)?.with_observer(id.clone());
        writeln!(out, "center reproduction error: {:.3e}", field.center_reproduction_error()).unwrap();
        fields.push(field);
        fitted.push((ellipsoids, sub.levels.clone()));
    }
    if fitted.len() == 2 {
        writeln!(out, "ratio {} / {}", observers[1], observers[0]).unwrap();
        ratio_table(&mut out, &fitted[0].0, &fitted[1].0, &fitted[0].1)?;
    }
    archive::write_atomic(&args.output, &archive::encode_fields(&fields))?;
    writeln!(out, "wrote {} field(s) to {}", fields.len(), args.output.display()).unwrap();
    Ok(out)
}

fn select_field(fields: Vec<MetricField<3>>, observer: Option<&str>) -> CliResult<MetricField<3>> {
    match observer {
        Some(id) => fields
            .into_iter()
            .find(|f| f.observer_id() == id)
            .ok_or_else(|| CliError::Usage(format!("observer {id:?} not in field archive"))),
        None if fields.len() == 1 => Ok(fields.into_iter().next().expect("one field")),
        None => Err(CliError::Usage(format!(
            "archive holds {} fields; choose one with --observer",
            fields.len()
        ))),
    }
}

fn coords<const D: usize>(values: &[f64], what: &str) -> CliResult<Vector<D>> {
    if values.len() != D {
        return Err(CliError::Usage(format!("{what} needs {D} comma-separated values")));
    }
    Ok(Vector::<D>::from_column_slice(values))
}

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad number {x:?}"))))
        .collect()
}

fn cmd_chart(args: &ChartArgs, conv: &Converter) -> CliResult<String> {
    let fields = archive::decode_fields::<3>(&load(&args.fields)?)?;
    let field = select_field(fields, args.observer.as_deref())?;
    let config = ChartConfig {
        radial_spacing: args.radial_spacing,
        step: args.step,
        ..ChartConfig::default()
    };
    if !(config.radial_spacing > 0.0 && config.step > 0.0) {
        return Err(CliError::Usage("spacing and step must be positive".into()));
    }
    let patches: Vec<Vec<f64>> = args.patches.iter().map(|p| parse_list(p)).collect::<CliResult<_>>()?;
    let mut out = String::new();
    let bytes = if args.dim == 2 {
        let origin = match &args.origin {
            Some(o) => coords::<2>(o, "--origin")?,
            None => Vector::<2>::zeros(),
        };
        let mut entries = Vec::new();
        for &l in &args.levels {
            let slice = ChromaSlice::new(&field, l);
            let region = gamut_slice(conv, l);
            let mut chart = build_chart_2d(&slice, origin, args.angles, default_reference_2d(), &config, &region)?;
            for p in &patches {
                chart.add_patch(&slice, &region, &coords::<2>(p, "--patch")?)?;
            }
            writeln!(
                out,
                "L={l}: {} nodes, {} cells, {} inverted",
                chart.main().node_count(),
                chart.main().cell_count(),
                chart.main().inverted_cells()
            )
            .unwrap();
            entries.push(ChartEntry { level: Some(l), chart });
        }
        archive::encode_charts(&entries)
    } else {
        let origin = match &args.origin {
            Some(o) => coords::<3>(o, "--origin")?,
            None => Vector::<3>::from(DEFAULT_ORIGIN_3D),
        };
        let region = gamut_region(conv);
        let mut chart = build_chart_3d(
            &field,
            origin,
            args.polar,
            args.azimuth,
            default_frame_3d(),
            &config,
            &region,
        )?;
        for p in &patches {
            chart.add_patch(&field, &region, &coords::<3>(p, "--patch")?)?;
        }
        writeln!(
            out,
            "3D chart at ({}, {}, {}): {} nodes, {} cells, {} inverted",
            origin[0],
            origin[1],
            origin[2],
            chart.main().node_count(),
            chart.main().cell_count(),
            chart.main().inverted_cells()
        )
        .unwrap();
        archive::encode_charts(&[ChartEntry { level: None, chart }])
    };
    archive::write_atomic(&args.output, &bytes)?;
    writeln!(out, "wrote {}", args.output.display()).unwrap();
    Ok(out)
}

fn pair_maps<const D: usize>(
    normal: Vec<ChartEntry<D>>,
    weak: Vec<ChartEntry<D>>,
    direction: Direction,
) -> CliResult<Vec<MapEntry<D>>> {
    if normal.len() != weak.len() {
        return Err(CliError::Usage(format!(
            "chart archives hold {} and {} charts",
            normal.len(),
            weak.len()
        )));
    }
    let mut out = Vec::with_capacity(normal.len());
    for n in normal {
        let w = weak
            .iter()
            .find(|w| w.level == n.level)
            .ok_or_else(|| CliError::Usage(format!("no weak chart at level {:?}", n.level)))?;
        let (src, dst): (NormalChart<D>, NormalChart<D>) = match direction {
            Direction::Compensation => (n.chart, w.chart.clone()),
            Direction::Simulation => (w.chart.clone(), n.chart),
        };
        let map = compose_isometry(Arc::new(src), Arc::new(dst), direction).map_err(|e| CliError::Usage(e.to_string()))?;
        out.push(MapEntry { level: n.level, map });
    }
    Ok(out)
}

fn cmd_map(args: &MapArgs) -> CliResult<String> {
    let direction = match args.direction {
        DirectionArg::Compensation => Direction::Compensation,
        DirectionArg::Simulation => Direction::Simulation,
    };
    let nb = load(&args.normal)?;
    let wb = load(&args.weak)?;
    let (_, dn) = archive::peek(&nb)?;
    let (_, dw) = archive::peek(&wb)?;
    if dn != dw {
        return Err(CliError::Usage("chart archives differ in dimension".into()));
    }
    let (bytes, count) = match dn {
        Some(2) => {
            let maps = pair_maps(archive::decode_charts::<2>(&nb)?, archive::decode_charts::<2>(&wb)?, direction)?;
            (archive::encode_maps(&maps), maps.len())
        }
        Some(3) => {
            let maps = pair_maps(archive::decode_charts::<3>(&nb)?, archive::decode_charts::<3>(&wb)?, direction)?;
            (archive::encode_maps(&maps), maps.len())
        }
        _ => return Err(CliError::Usage("not a chart archive".into())),
    };
    archive::write_atomic(&args.output, &bytes)?;
    Ok(format!("wrote {count} map(s) to {}\n", args.output.display()))
}

fn cmd_lightness(args: &LightnessArgs) -> CliResult<String> {
    let fields = archive::decode_fields::<3>(&load(&args.fields)?)?;
    let n = select_field(fields.clone(), Some(&args.normal))?;
    let w = select_field(fields, Some(&args.weak))?;
    let gn = restrict_to_lightness_axis(&n)?;
    let gw = restrict_to_lightness_axis(&w)?;
    let map = build_lightness_map(&|l| gn.at(l), &|l| gw.at(l), args.min, args.max, args.origin)?;
    let mut out = String::new();
    writeln!(out, "{:>8} {:>10} {:>10}", "L", "simulate", "compensate").unwrap();
    let mut l = args.min;
    while l <= args.max + 1e-9 {
        writeln!(out, "{:>8.1} {:>10.3} {:>10.3}", l, map.forward(l), map.inverse(l)).unwrap();
        l += 10.0;
    }
    archive::write_atomic(&args.output, &archive::encode_lightness(&map))?;
    writeln!(out, "wrote {}", args.output.display()).unwrap();
    Ok(out)
}

fn cmd_compensate(args: &CompensateArgs, conv: &Converter) -> CliResult<String> {
    let img = ImageBuffer::read_png(existing(&args.input)?)?;
    let mut cfg = CompensationConfig::new(args.mode).with_interpolation(args.interpolation);
    cfg.converter = conv.clone();
    if let Some(p) = &args.maps2d {
        for e in archive::decode_maps::<2>(&load(p)?)? {
            let level = e
                .level
                .ok_or_else(|| CliError::Usage("2D map archive entry without a lightness level".into()))?;
            cfg = cfg.with_level(level, e.map);
        }
    }
    if let Some(p) = &args.lightness {
        cfg = cfg.with_lightness(archive::decode_lightness(&load(p)?)?);
    }
    if let Some(p) = &args.map3d {
        let mut maps = archive::decode_maps::<3>(&load(p)?)?;
        if maps.len() != 1 {
            return Err(CliError::Usage(format!("3D map archive holds {} maps, expected 1", maps.len())));
        }
        cfg = cfg.with_map3d(maps.remove(0).map);
    }
    cfg.validate()?;
    let (result, report) = if args.lut {
        let lut = bake_lut(&cfg, LUT_SIZE)?;
        let (_, report) = pipeline::process(&img, &cfg)?;
        (lut.apply(&img), report)
    } else {
        pipeline::process(&img, &cfg)?
    };
    result.write_png(&args.output)?;
    let json = report.to_json();
    if let Some(p) = &args.report {
        archive::write_atomic(p, json.as_bytes())?;
    }
    Ok(json + "\n")
}

fn cmd_stats(args: &StatsArgs, conv: &Converter) -> CliResult<String> {
    let mut out = String::new();
    if let (Some(b), Some(a)) = (&args.before, &args.after) {
        let before = ImageBuffer::read_png(existing(b)?)?;
        let after = ImageBuffer::read_png(existing(a)?)?;
        let method = match args.bins {
            Some(size) => AreaMethod::OccupiedBins { size },
            None => AreaMethod::ConvexHull,
        };
        let expansion = chroma_area_expansion_with(&before, &after, conv, method)?;
        writeln!(out, "area expansion: {expansion:.4}").unwrap();
        writeln!(out, "{:>8} {:>10} {:>10} {:>10}", "image", "L*", "u*", "v*").unwrap();
        for (name, img) in [("before", &before), ("after", &after)] {
            let m = mean_luv(img, conv)?;
            writeln!(out, "{:>8} {:>10.4} {:>10.4} {:>10.4}", name, m.l, m.u, m.v).unwrap();
        }
        return Ok(out);
    }
    if let Some(path) = &args.sheets {
        let scale = SdScale {
            min: args.scale_min,
            max: args.scale_max,
        };
        let sheets = parse_sd_sheets(fs::read(existing(path)?).map_err(Error::from)?.as_slice(), &scale)?;
        let reference = match &args.reference {
            Some(r) => r.clone(),
            None => sheets[0].observer_id.clone(),
        };
        let rows = correlation_table(&sheets, &reference)?;
        writeln!(out, "reference observer: {reference}").unwrap();
        writeln!(out, "{:<16} {:<12} {:<12} {:>8}", "image", "observer", "condition", "r").unwrap();
        for r in rows {
            writeln!(out, "{:<16} {:<12} {:<12} {:>8.4}", r.image_id, r.observer_id, r.condition, r.r).unwrap();
        }
        return Ok(out);
    }
    Err(CliError::Usage("stats needs --before/--after or --sheets".into()))
}

fn cmd_serve(args: &ServeArgs) -> CliResult<String> {
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|_| CliError::Usage(format!("bad address {}:{}", args.host, args.port)))?;
    let mut cfg = ServiceConfig::new(&args.data_dir);
    cfg.static_dir = args.static_dir.clone();
    cfg.seed = args.seed;
    let rt = tokio::runtime::Runtime::new().map_err(Error::from)?;
    rt.block_on(service::serve(addr, cfg))?;
    Ok(String::new())
}

/// Runs a parsed command and returns its standard output.
pub fn execute(cli: &Cli) -> CliResult<String> {
    let conv = cli.white.converter();
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, &conv),
        Command::Fit(a) => cmd_fit(a),
        Command::Chart(a) => cmd_chart(a, &conv),
        Command::Map(a) => cmd_map(a),
        Command::Lightness(a) => cmd_lightness(a),
        Command::Compensate(a) => cmd_compensate(a, &conv),
        Command::Stats(a) => cmd_stats(a, &conv),
        Command::Serve(a) => cmd_serve(a),
    }
}

/// Parses arguments, runs, prints, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(out) => {
            print!("{out}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
