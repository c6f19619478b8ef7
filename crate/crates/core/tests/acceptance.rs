//! Acceptance run: one PASS/FAIL line per primary criterion. Exits
//! non-zero when any criterion fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use chromaweak::analysis::{pearson, scatter_area, AreaMethod};
use chromaweak::colorspace::{Converter, LuvColor, Rgb8, WhitePoint};
use chromaweak::geometry::{christoffel_at, geodesic_length, integrate_geodesic};
use chromaweak::isometry::{build_lightness_map, compose_isometry, isometry_residual, Direction, IsometryMap};
use chromaweak::linalg::{Matrix, Vector};
use chromaweak::metric::{AnalyticMetric, Bounds};
use chromaweak::pipeline::{map_luv, process, CompensationConfig, ImageBuffer, Mode, LEVELS};
use chromaweak::rnc::{build_chart_2d, build_chart_3d, grid_point_ratio, ChartConfig, NormalChart};
use chromaweak::synth::{protocol_dataset, pullback_pair_2d, SynthConfig};
use chromaweak::thresholds::measurement::{DIRECTION_COUNT, REPETITIONS};
use chromaweak::thresholds::{default_directions, fit_ellipsoid, fit_measurements};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn flat<const D: usize>(scale: f64, half: f64) -> AnalyticMetric<D, impl Fn(&Vector<D>) -> Matrix<D> + Sync> {
    AnalyticMetric::new(
        Bounds::from_arrays([-half; D], [half; D]),
        0.1,
        move |_: &Vector<D>| Matrix::<D>::identity() * scale,
    )
}

fn hyperbolic() -> AnalyticMetric<2, impl Fn(&Vector<2>) -> Matrix<2> + Sync> {
    AnalyticMetric::new(Bounds::from_arrays([-10.0, 0.05], [10.0, 20.0]), 1e-5, |x: &Vector<2>| {
        Matrix::<2>::identity() / (x[1] * x[1])
    })
}

fn colorimetry() -> Outcome {
    let conv = Converter::new(WhitePoint::D65);
    let start = Instant::now();
    let mut colors = Vec::with_capacity(17 * 17 * 17 + 100_000);
    let level = |i: u32| ((i * 255) as f64 / 16.0).round() as u8;
    for r in 0..17 {
        for g in 0..17 {
            for b in 0..17 {
                colors.push(Rgb8::new(level(r), level(g), level(b)));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    colors.extend((0..100_000).map(|_| Rgb8::new(rng.gen(), rng.gen(), rng.gen())));
    let mismatches = colors
        .iter()
        .filter(|&&c| conv.luv_to_srgb(conv.srgb_to_luv(c)).0 != c)
        .count();
    let elapsed = start.elapsed();
    ensure(
        mismatches == 0 && elapsed < Duration::from_secs(5),
        format!("{} colors, {mismatches} mismatches, {:.2} s", colors.len(), elapsed.as_secs_f64()),
    )
}

fn christoffel_oracle() -> Outcome {
    let field = hyperbolic();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let x = Vector::<2>::new(rng.gen_range(-5.0..5.0), rng.gen_range(0.5..5.0));
        let g = christoffel_at(&field, &x).map_err(|e| e.to_string())?.gamma;
        let v = x[1];
        // Γ^u_{uv} = Γ^u_{vu} = -1/v, Γ^v_{uu} = 1/v, Γ^v_{vv} = -1/v
        let mut exact = [[[0.0; 2]; 2]; 2];
        exact[0][0][1] = -1.0 / v;
        exact[0][1][0] = -1.0 / v;
        exact[1][0][0] = 1.0 / v;
        exact[1][1][1] = -1.0 / v;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    worst = worst.max((g[i][j][k] - exact[i][j][k]).abs());
                }
            }
        }
    }
    ensure(worst < 1e-4, format!("max component error {worst:.2e} at 100 points"))
}

fn vertical_error(step: f64, s: f64) -> Result<f64, String> {
    let field = hyperbolic();
    let geo = integrate_geodesic(&field, &Vector::<2>::new(0.0, 1.0), &Vector::<2>::new(0.0, 1.0), s, step)
        .map_err(|e| e.to_string())?;
    Ok((geo.end.position - Vector::<2>::new(0.0, s.exp())).norm())
}

fn geodesic_oracle() -> Outcome {
    let s = 2.0;
    let fine = vertical_error(1e-3, s)?;
    let ladder = [0.2, 0.1, 0.05, 0.025];
    let errors = ladder.iter().map(|&h| vertical_error(h, s)).collect::<Result<Vec<_>, _>>()?;
    let orders: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(
        fine < 1e-6 && min_order >= 3.8,
        format!(
            "endpoint error {fine:.2e} at step 1e-3; observed orders {}",
            orders.iter().map(|o| format!("{o:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn flat_charts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let disk2 = |x: &Vector<2>| x.norm() <= 40.0;
    let reference = Vector::<2>::new(0.6, 0.8);
    let c2 = build_chart_2d(&flat::<2>(1.0, 60.0), Vector::zeros(), 36, reference, &ChartConfig::default(), &disk2)
        .map_err(|e| e.to_string())?;
    let mut worst2 = 0.0f64;
    for _ in 0..500 {
        let r = rng.gen_range(1.0..35.0);
        let t: f64 = rng.gen_range(0.0..2.0 * PI);
        let x = Vector::<2>::new(r * t.cos(), r * t.sin());
        let nc = c2.to_normal_coords(&x).map_err(|e| e.to_string())?;
        let theta = (reference[0] * x[1] - reference[1] * x[0]).atan2(reference.dot(&x));
        worst2 = worst2.max((nc.r() - r).abs()).max(r * angle_gap(nc.angles()[0], theta));
    }

    let ball = |x: &Vector<3>| x.norm() <= 40.0;
    let seeds = [Vector::<3>::new(1.0, 0.0, 0.0), Vector::<3>::new(0.0, 0.6, -0.8)];
    let c3 = build_chart_3d(&flat::<3>(1.0, 60.0), Vector::zeros(), 13, 18, seeds, &ChartConfig::default(), &ball)
        .map_err(|e| e.to_string())?;
    let frame = *c3.main().frame();
    let e3 = frame.column(2).into_owned();
    let mut worst3 = 0.0f64;
    for _ in 0..500 {
        let dir = Vector::<3>::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)).normalize();
        let r = rng.gen_range(1.0..35.0);
        let x = dir * r;
        let nc = c3.to_normal_coords(&x).map_err(|e| e.to_string())?;
        let polar = (x.dot(&seeds[0]) / r).clamp(-1.0, 1.0).acos();
        let azimuth = x.dot(&e3).atan2(x.dot(&seeds[1]));
        let a = nc.angles();
        worst3 = worst3
            .max((nc.r() - r).abs())
            .max(r * (a[0] - polar).abs())
            .max(r * polar.sin() * angle_gap(a[1], azimuth));
    }
    ensure(
        worst2 < 1e-6 && worst3 < 1e-6,
        format!("2D (36 rays) max error {worst2:.2e}; 3D (13x18) max error {worst3:.2e}"),
    )
}

fn big_flat_chart(scale: f64) -> Result<Arc<NormalChart<2>>, String> {
    let disk = |x: &Vector<2>| x.norm() <= 200.0;
    build_chart_2d(
        &flat::<2>(scale, 220.0),
        Vector::zeros(),
        36,
        Vector::<2>::new(1.0, 0.0),
        &ChartConfig::default(),
        &disk,
    )
    .map(Arc::new)
    .map_err(|e| e.to_string())
}

fn test_image(size: u32) -> ImageBuffer {
    ImageBuffer::from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64 / (size - 1) as f64, y as f64 / (size - 1) as f64);
        Rgb8::new(
            (30.0 + 200.0 * fx) as u8,
            (30.0 + 200.0 * fy) as u8,
            (30.0 + 200.0 * (1.0 - 0.5 * (fx + fy))) as u8,
        )
    })
}

fn scaling_oracle() -> Outcome {
    let normal = big_flat_chart(1.0)?;
    let weak = big_flat_chart(4.0)?;
    let comp = compose_isometry(Arc::clone(&normal), Arc::clone(&weak), Direction::Compensation)
        .map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut halving = 0.0f64;
    let mut residual = 0.0f64;
    for _ in 0..100 {
        let r = rng.gen_range(2.0..150.0);
        let t: f64 = rng.gen_range(0.0..2.0 * PI);
        let x = Vector::<2>::new(r * t.cos(), r * t.sin());
        let y = comp.apply(&x).map_err(|e| e.to_string())?;
        halving = halving.max((y.point - x / 2.0).norm());
        let res = isometry_residual(&comp, &flat::<2>(1.0, 220.0), &flat::<2>(4.0, 220.0), &x)
            .map_err(|e| e.to_string())?;
        residual = residual.max(res);
    }

    let levels = |map: &IsometryMap<2>, mode: Mode| {
        LEVELS
            .iter()
            .fold(CompensationConfig::new(mode), |cfg, &l| cfg.with_level(l, map.clone()))
    };
    let compensate = levels(&comp, Mode::Compensate2d);
    let simulate = levels(&comp, Mode::Simulate2d);
    let img = test_image(512);
    let conv = &compensate.converter;
    let max_diff = |a: &[Rgb8], b: &[Rgb8]| {
        a.iter()
            .zip(b)
            .flat_map(|(x, y)| x.channels().into_iter().zip(y.channels()))
            .map(|(x, y)| (x as i32 - y as i32).abs())
            .max()
            .unwrap_or(0)
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let worst = pool.install(|| -> Result<i32, String> {
        let luv: Vec<LuvColor> = img.pixels().iter().map(|&c| conv.srgb_to_luv(c)).collect();
        let there = map_luv(&luv, &compensate).map_err(|e| e.to_string())?;
        let back = map_luv(&there, &simulate).map_err(|e| e.to_string())?;
        let rgb: Vec<Rgb8> = back.into_iter().map(|c| conv.luv_to_srgb(c).0).collect();
        Ok(max_diff(img.pixels(), &rgb))
    })?;
    let elapsed = start.elapsed();
    // with an 8-bit image between the two stages, simulation doubles the
    // rounding error of the compensated image; reported, not judged
    let quantized = pool.install(|| -> Result<i32, String> {
        let (c, _) = process(&img, &compensate).map_err(|e| e.to_string())?;
        let (s, _) = process(&c, &simulate).map_err(|e| e.to_string())?;
        Ok(max_diff(img.pixels(), s.pixels()))
    })?;
    ensure(
        halving < 1e-3 && residual < 1e-3 && worst <= 2 && elapsed < Duration::from_secs(60),
        format!(
            "radial halving error {halving:.2e}; max residual {residual:.2e}; \
             512x512 round trip max {worst} counts in {:.1} s single-threaded \
             ({quantized} counts with an 8-bit intermediate image)",
            elapsed.as_secs_f64()
        ),
    )
}

fn distance_preservation() -> Outcome {
    let origin = Vector::<2>::new(10.0, -5.0);
    let pair = pullback_pair_2d(7, origin);
    let bounds = Bounds::from_arrays([-160.0, -160.0], [160.0, 160.0]);
    let normal = AnalyticMetric::new(bounds, 1e-3, |x: &Vector<2>| pair.metric_normal(x));
    let weak = AnalyticMetric::new(bounds, 1e-3, |x: &Vector<2>| pair.metric_weak(x));
    let radius = 70.0;
    let in_normal = |x: &Vector<2>| (x - origin).norm() <= radius;
    let in_weak = |x: &Vector<2>| (pair.simulate(x) - origin).norm() <= radius;
    let reference = Vector::<2>::new(1.0, 0.0);
    let cfg = ChartConfig::default();
    let cn = build_chart_2d(&normal, origin, 36, reference, &cfg, &in_normal).map_err(|e| e.to_string())?;
    let cw = build_chart_2d(&weak, origin, 36, reference, &cfg, &in_weak).map_err(|e| e.to_string())?;
    let comp = compose_isometry(Arc::new(cn), Arc::new(cw), Direction::Compensation).map_err(|e| e.to_string())?;

    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let sample = |rng: &mut ChaCha8Rng| {
        let r = radius * rng.gen::<f64>().sqrt();
        let t: f64 = rng.gen_range(0.0..2.0 * PI);
        origin + Vector::<2>::new(r * t.cos(), r * t.sin())
    };
    let mut errors = Vec::new();
    let mut tries = 0;
    while errors.len() < 200 && tries < 10_000 {
        tries += 1;
        let (a, b) = (sample(&mut rng), sample(&mut rng));
        let pieces = 64;
        let line: Vec<Vector<2>> = (0..=pieces).map(|k| a + (b - a) * (k as f64 / pieces as f64)).collect();
        let mapped: Option<Vec<Vector<2>>> = line
            .iter()
            .map(|p| comp.apply(p).ok().filter(|m| !m.clamped).map(|m| m.point))
            .collect();
        let Some(mapped) = mapped else { continue };
        let d_src = geodesic_length(&normal, &line).map_err(|e| e.to_string())?;
        let d_dst = geodesic_length(&weak, &mapped).map_err(|e| e.to_string())?;
        errors.push((d_src - d_dst).abs() / d_src);
    }
    let worst = errors.iter().copied().fold(0.0, f64::max);
    let mean = errors.iter().sum::<f64>() / errors.len().max(1) as f64;
    ensure(
        errors.len() == 200 && worst < 0.02,
        format!("{} covered pairs; relative error max {:.3}%, mean {:.3}%", errors.len(), worst * 100.0, mean * 100.0),
    )
}

fn lightness_map() -> Outcome {
    let map = build_lightness_map(&|_| 1.0, &|l| (1.0 + l) * (1.0 + l), 0.0, 70.0, 0.0).map_err(|e| e.to_string())?;
    let worst = (0..=700)
        .map(|k| {
            let l = k as f64 * 0.1;
            (map.forward(l) - (l + l * l / 2.0)).abs()
        })
        .fold(0.0, f64::max);
    ensure(worst < 1e-6, format!("max |w(l) - (l + l²/2)| = {worst:.2e} on [0, 70]"))
}

fn random_spd(rng: &mut ChaCha8Rng) -> Matrix<3> {
    let a = Matrix::<3>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
    a * a.transpose() * 0.5 + Matrix::<3>::identity() * 0.2
}

fn ellipsoid_fitting() -> Outcome {
    let dirs: Vec<Vector<3>> = default_directions().iter().map(|d| Vector::<3>::from(*d)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let center = Vector::<3>::new(50.0, 10.0, -5.0);
    let rel = |fit: &Matrix<3>, g: &Matrix<3>| (fit - g).norm() / g.norm();
    let mut clean = 0.0f64;
    let mut noisy = 0.0;
    let trials = 1000;
    for t in 0..trials {
        let g = random_spd(&mut rng);
        let length = |d: &Vector<3>| 1.0 / (d.transpose() * g * d)[0].sqrt();
        if t < 100 {
            let devs: Vec<Vector<3>> = dirs.iter().map(|d| d * length(d)).collect();
            let fit = fit_ellipsoid(center, &devs).map_err(|e| e.to_string())?;
            clean = clean.max(rel(&fit.metric, &g));
        }
        let devs: Vec<Vector<3>> = dirs
            .iter()
            .map(|d| {
                let n: f64 = rng.sample(StandardNormal);
                d * length(d) * (1.0 + 0.02 * n)
            })
            .collect();
        let fit = fit_ellipsoid(center, &devs).map_err(|e| e.to_string())?;
        noisy += rel(&fit.metric, &g);
    }
    noisy /= trials as f64;
    ensure(
        clean < 1e-6 && noisy < 0.05,
        format!("noise-free max error {clean:.2e}; σ=0.02 mean error {:.2}% over {trials} trials", noisy * 100.0),
    )
}

fn statistics() -> Outcome {
    let conv = Converter::new(WhitePoint::D65);
    let img = test_image(64);
    let points: Vec<[f64; 2]> = img
        .pixels()
        .iter()
        .map(|&p| {
            let LuvColor { u, v, .. } = conv.srgb_to_luv(p);
            [u, v]
        })
        .collect();
    let c = 1.7;
    let scaled: Vec<[f64; 2]> = points.iter().map(|p| [p[0] * c, p[1] * c]).collect();
    let expansion = scatter_area(&scaled, AreaMethod::ConvexHull).map_err(|e| e.to_string())?
        / scatter_area(&points, AreaMethod::ConvexHull).map_err(|e| e.to_string())?;
    let expansion_ok = (expansion - c * c).abs() < 1e-6;

    let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let b = [2.0, 1.0, 4.0, 3.0, 6.0, 5.0, 8.0, 7.0];
    let r = pearson(&a, &b).map_err(|e| e.to_string())?;
    let r_ok = (r - 0.9524).abs() < 1e-4;

    let n = big_flat_chart(1.0)?;
    let w = big_flat_chart(4.0)?;
    let ratio = grid_point_ratio(&w, &n).map_err(|e| e.to_string())?;
    let ratio_ok = (ratio - 0.25).abs() < 0.05;
    let quarter = big_flat_chart(0.25)?;
    let inverse = grid_point_ratio(&quarter, &n).map_err(|e| e.to_string())?;

    ensure(
        expansion_ok && r_ok && ratio_ok,
        format!(
            "area expansion {expansion:.9} vs c²={:.9} [{}]; Pearson r {r:.6} vs 0.9524 [{}]; \
             grid_point_ratio {ratio:.4} vs 0.25 [{}] (G_w = G_n/4 gives {inverse:.4})",
            c * c,
            if expansion_ok { "ok" } else { "off" },
            if r_ok { "ok" } else { "off" },
            if ratio_ok { "ok" } else { "off" },
        ),
    )
}

fn protocol_shape() -> Outcome {
    let conv = Converter::new(WhitePoint::D65);
    let set = protocol_dataset(&conv, &SynthConfig::default()).map_err(|e| e.to_string())?;
    let mut parts = Vec::new();
    let mut ok = true;
    for id in set.observers() {
        let sub = set.for_observer(&id).map_err(|e| e.to_string())?;
        let expected = 77 * DIRECTION_COUNT * REPETITIONS as usize;
        let fitted = fit_measurements(&sub).map_err(|e| e.to_string())?;
        ok &= sub.centers.len() == 77 && sub.records.len() == expected && fitted.len() == 77;
        parts.push(format!(
            "{id}: {} centers, {} records, {} ellipsoids",
            sub.centers.len(),
            sub.records.len(),
            fitted.len()
        ));
    }
    ensure(ok, parts.join("; "))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("colorimetry round trip", colorimetry),
        ("christoffel oracle", christoffel_oracle),
        ("geodesic oracle", geodesic_oracle),
        ("flat-chart equivalence", flat_charts),
        ("isometry scaling oracle", scaling_oracle),
        ("distance preservation", distance_preservation),
        ("1D lightness map", lightness_map),
        ("ellipsoid fitting", ellipsoid_fitting),
        ("statistics", statistics),
        ("protocol shape", protocol_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
