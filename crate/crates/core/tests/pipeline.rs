use std::sync::{Arc, OnceLock};

use chromaweak::colorspace::{Converter, LuvColor, Rgb8, WhitePoint};
use chromaweak::isometry::{build_lightness_map, compose_isometry, Direction, IsometryMap, LightnessMap};
use chromaweak::linalg::{Matrix, Vector};
use chromaweak::metric::{AnalyticMetric, Bounds};
use chromaweak::pipeline::{
    bake_lut, compensate_2d, compensate_2d1d, compensate_3d, map_luv, process, process_color, simulate,
    CompensationConfig, ImageBuffer, Mode, PixelInterpolation, LEVELS, LUT_SIZE,
};
use chromaweak::rnc::{build_chart_2d, build_chart_3d, default_frame_3d, ChartConfig, NormalChart};
use chromaweak::Error;

const ORIGIN_3D: [f64; 3] = [30.0, 0.0, 0.0];

fn chart2(scale: f64) -> Arc<NormalChart<2>> {
    let metric = AnalyticMetric::new(Bounds::from_arrays([-220.0; 2], [220.0; 2]), 0.1, move |_: &Vector<2>| {
        Matrix::<2>::identity() * scale
    });
    let disk = |x: &Vector<2>| x.norm() <= 200.0;
    let chart = build_chart_2d(&metric, Vector::zeros(), 36, Vector::<2>::new(1.0, 0.0), &ChartConfig::default(), &disk);
    Arc::new(chart.unwrap())
}

fn chart3(scale: f64) -> Arc<NormalChart<3>> {
    let origin = Vector::<3>::from(ORIGIN_3D);
    let metric = AnalyticMetric::new(
        Bounds::from_arrays([-220.0, -220.0, -220.0], [280.0, 220.0, 220.0]),
        0.1,
        move |_: &Vector<3>| Matrix::<3>::identity() * scale,
    );
    let ball = move |x: &Vector<3>| (x - origin).norm() <= 200.0;
    let config = ChartConfig {
        radial_spacing: 2.0,
        step: 1.0,
        ..ChartConfig::default()
    };
    Arc::new(build_chart_3d(&metric, origin, 13, 18, default_frame_3d(), &config, &ball).unwrap())
}

struct Fixtures {
    identity2: IsometryMap<2>,
    halving2: IsometryMap<2>,
    identity3: IsometryMap<3>,
    halving3: IsometryMap<3>,
}

fn fixtures() -> &'static Fixtures {
    static F: OnceLock<Fixtures> = OnceLock::new();
    F.get_or_init(|| {
        let (n2, w2) = (chart2(1.0), chart2(4.0));
        let (n3, w3) = (chart3(1.0), chart3(4.0));
        Fixtures {
            identity2: compose_isometry(Arc::clone(&n2), Arc::clone(&n2), Direction::Compensation).unwrap(),
            halving2: compose_isometry(n2, w2, Direction::Compensation).unwrap(),
            identity3: compose_isometry(Arc::clone(&n3), Arc::clone(&n3), Direction::Compensation).unwrap(),
            halving3: compose_isometry(n3, w3, Direction::Compensation).unwrap(),
        }
    })
}

fn with_levels(mode: Mode, map: &IsometryMap<2>) -> CompensationConfig {
    LEVELS
        .iter()
        .fold(CompensationConfig::new(mode), |cfg, &l| cfg.with_level(l, map.clone()))
}

fn sample_image() -> ImageBuffer {
    ImageBuffer::from_fn(48, 32, |x, y| {
        Rgb8::new((20 + x * 4) as u8, (25 + y * 6) as u8, (200 - x * 2 - y) as u8)
    })
}

fn max_channel_diff(a: &ImageBuffer, b: &ImageBuffer) -> i32 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| p.channels().into_iter().zip(q.channels()))
        .map(|(p, q)| (p as i32 - q as i32).abs())
        .max()
        .unwrap()
}

fn luv_of(img: &ImageBuffer) -> Vec<LuvColor> {
    let conv = Converter::new(WhitePoint::D65);
    img.pixels().iter().map(|&c| conv.srgb_to_luv(c)).collect()
}

fn axis(g_w: f64, origin: f64) -> LightnessMap {
    build_lightness_map(&|_| 1.0, &move |_| g_w, 0.0, 100.0, origin).unwrap()
}

#[test]
fn identity_maps_keep_the_image() {
    let f = fixtures();
    let img = sample_image();
    let cfg = with_levels(Mode::Compensate2d, &f.identity2);
    let (out, report) = compensate_2d(&img, &cfg).unwrap();
    assert!(max_channel_diff(&img, &out) <= 1);
    assert_eq!(report.pixels, img.len());
    assert_eq!(report.mapped, img.len());
    assert_eq!(report.fallback, 0);

    let cfg3 = CompensationConfig::new(Mode::Compensate3d).with_map3d(f.identity3.clone());
    let (out3, report3) = compensate_3d(&img, &cfg3).unwrap();
    assert!(max_channel_diff(&img, &out3) <= 1);
    assert_eq!(report3.fallback, 0);
}

#[test]
fn scaling_pair_halves_chroma() {
    let f = fixtures();
    let img = sample_image();
    let cfg = with_levels(Mode::Compensate2d, &f.halving2);
    let before = luv_of(&img);
    let exact = map_luv(&before, &cfg).unwrap();
    for (a, b) in before.iter().zip(&exact) {
        assert!((b.chroma() - a.chroma() / 2.0).norm() < 1e-9);
        assert_eq!(a.l, b.l);
    }
    let (out, report) = process(&img, &cfg).unwrap();
    assert_eq!(report.fallback, 0);
    for (a, b) in before.iter().zip(luv_of(&out)) {
        assert!((b.chroma().norm() - a.chroma().norm() / 2.0).abs() < 1.5, "{a:?} -> {b:?}");
    }
}

#[test]
fn gray_is_fixed() {
    let f = fixtures();
    let img = ImageBuffer::from_fn(16, 1, |x, _| {
        let g = (x * 16 + 7) as u8;
        Rgb8::new(g, g, g)
    });
    for cfg in [
        with_levels(Mode::Compensate2d, &f.halving2),
        with_levels(Mode::Simulate2d, &f.halving2),
    ] {
        let (out, _) = process(&img, &cfg).unwrap();
        assert_eq!(out, img);
    }
}

#[test]
fn simulation_doubles_chroma() {
    let f = fixtures();
    let cfg = with_levels(Mode::Simulate2d, &f.halving2);
    let colors = luv_of(&sample_image());
    let small: Vec<LuvColor> = colors.iter().map(|c| LuvColor::new(c.l, c.u / 2.0, c.v / 2.0)).collect();
    for (a, b) in small.iter().zip(map_luv(&small, &cfg).unwrap()) {
        assert!((b.chroma() - a.chroma() * 2.0).norm() < 1e-9);
    }
    assert!(simulate(&sample_image(), &cfg).is_ok());
    assert!(matches!(
        simulate(&sample_image(), &with_levels(Mode::Compensate2d, &f.halving2)),
        Err(Error::Config(_))
    ));
}

#[test]
fn simulate_undoes_compensate() {
    let f = fixtures();
    let comp = with_levels(Mode::Compensate2d, &f.halving2);
    let sim = comp.clone().with_mode(Mode::Simulate2d);
    let colors = luv_of(&sample_image());
    let back = map_luv(&map_luv(&colors, &comp).unwrap(), &sim).unwrap();
    let conv = Converter::new(WhitePoint::D65);
    for (a, b) in colors.iter().zip(back) {
        assert_eq!(conv.luv_to_srgb(*a).0, conv.luv_to_srgb(b).0);
    }
}

#[test]
fn identity_lightness_reduces_to_2d() {
    let f = fixtures();
    let img = sample_image();
    let cfg = with_levels(Mode::Compensate2d1d, &f.halving2).with_lightness(LightnessMap::identity(0.0, 100.0, 30.0));
    let (a, _) = compensate_2d1d(&img, &cfg).unwrap();
    let (b, _) = compensate_2d(&img, &cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn lightness_pair_halves_about_origin() {
    let f = fixtures();
    let cfg = with_levels(Mode::Compensate2d1d, &f.halving2).with_lightness(axis(4.0, 30.0));
    let colors = luv_of(&sample_image());
    for (a, b) in colors.iter().zip(map_luv(&colors, &cfg).unwrap()) {
        assert!((b.l - (30.0 + (a.l - 30.0) / 2.0)).abs() < 1e-6, "{} -> {}", a.l, b.l);
        assert!((b.chroma() - a.chroma() / 2.0).norm() < 1e-9);
    }
}

#[test]
fn lightness_extremes_are_clamped_and_counted() {
    let f = fixtures();
    // compensation doubles L about 30
    let cfg = with_levels(Mode::Compensate2d1d, &f.identity2).with_lightness(axis(0.25, 30.0));
    let img = ImageBuffer::new(
        3,
        1,
        vec![Rgb8::new(0, 0, 0), Rgb8::new(255, 255, 255), Rgb8::new(119, 119, 119)],
    )
    .unwrap();
    let (out, report) = process(&img, &cfg).unwrap();
    assert_eq!(report.lightness_clamped, 2);
    assert_eq!(out.pixels()[0], Rgb8::new(0, 0, 0));
    assert_eq!(out.pixels()[1], Rgb8::new(255, 255, 255));
    let conv = Converter::new(WhitePoint::D65);
    for c in map_luv(&luv_of(&img), &cfg).unwrap() {
        assert!((0.0..=100.0).contains(&c.l));
    }
    assert!(conv.srgb_to_luv(out.pixels()[2]).l > 50.0);
}

#[test]
fn scaling_3d_contracts_about_origin() {
    let f = fixtures();
    let cfg = CompensationConfig::new(Mode::Compensate3d).with_map3d(f.halving3.clone());
    let o = Vector::<3>::from(ORIGIN_3D);
    let colors = luv_of(&sample_image());
    for (a, b) in colors.iter().zip(map_luv(&colors, &cfg).unwrap()) {
        let expected = o + (a.to_vector() - o) / 2.0;
        assert!((b.to_vector() - expected).norm() < 1e-6, "{a:?} -> {b:?}");
    }
}

#[test]
fn chart_node_maps_to_node() {
    let f = fixtures();
    let cfg = CompensationConfig::new(Mode::Compensate3d).with_map3d(f.halving3.clone());
    let src = f.halving3.source().main();
    let dst = f.halving3.target().main();
    for (ray, k) in [(40, 10), (100, 25), (7, 3)] {
        let node = src.rays()[ray].nodes[k];
        let mapped = map_luv(&[LuvColor::from_vector(&node)], &cfg).unwrap()[0];
        assert!((mapped.to_vector() - dst.rays()[ray].nodes[k]).norm() < 1e-9);
    }
}

#[test]
fn missing_maps_are_config_errors() {
    let img = sample_image();
    for mode in [Mode::Compensate2d, Mode::Compensate2d1d, Mode::Compensate3d, Mode::Simulate3d] {
        assert!(matches!(process(&img, &CompensationConfig::new(mode)), Err(Error::Config(_))));
    }
    let f = fixtures();
    let no_lightness = with_levels(Mode::Compensate2d1d, &f.identity2);
    assert!(matches!(no_lightness.validate(), Err(Error::Config(_))));
    assert!(process_color(Rgb8::new(1, 2, 3), &no_lightness).is_err());
}

#[test]
fn level_ties_go_down() {
    let f = fixtures();
    let cfg = with_levels(Mode::Compensate2d, &f.identity2);
    assert_eq!(cfg.level_index(35.0), Some(0));
    assert_eq!(cfg.level_index(35.1), Some(1));
    assert_eq!(cfg.level_index(0.0), Some(0));
    assert_eq!(cfg.level_index(100.0), Some(4));
}

#[test]
fn nearest_vertex_snaps_to_nodes() {
    let f = fixtures();
    let cfg = with_levels(Mode::Compensate2d, &f.halving2).with_interpolation(PixelInterpolation::NearestVertex);
    let colors = luv_of(&sample_image());
    let dst = f.halving2.target().main();
    for c in map_luv(&colors, &cfg).unwrap() {
        let p = c.chroma();
        assert!(dst.positions().iter().any(|n| (n - p).norm() < 1e-9));
    }
}

#[test]
fn lut_tracks_direct_evaluation() {
    let f = fixtures();
    let img = sample_image();
    let cfg = with_levels(Mode::Compensate2d, &f.halving2);
    let lut = bake_lut(&cfg, LUT_SIZE).unwrap();
    assert_eq!(lut.size(), LUT_SIZE);
    let (direct, _) = process(&img, &cfg).unwrap();
    assert!(max_channel_diff(&direct, &lut.apply(&img)) <= 6);
}

#[test]
fn report_and_digest() {
    let f = fixtures();
    let img = sample_image();
    let a = with_levels(Mode::Compensate2d, &f.halving2);
    let b = with_levels(Mode::Compensate2d, &f.identity2);
    let (_, r) = process(&img, &a).unwrap();
    assert_eq!(r.mapped + r.clamped + r.fallback, r.pixels);
    assert_eq!(r.mode, "2d");
    assert_eq!(a.digest(), a.clone().digest());
    assert_ne!(a.digest(), b.digest());
    assert_ne!(a.digest(), a.clone().with_mode(Mode::Simulate2d).digest());
    let json: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    assert_eq!(json["pixels"], img.len());
    assert_eq!(json["config_digest"], a.digest());
}

#[test]
fn png_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("img.png");
    let img = sample_image();
    img.write_png(&path).unwrap();
    assert_eq!(ImageBuffer::read_png(&path).unwrap(), img);
    assert!(ImageBuffer::read_png(dir.path().join("missing.png")).is_err());
    assert!(ImageBuffer::new(2, 2, vec![Rgb8::new(0, 0, 0); 3]).is_err());
}
