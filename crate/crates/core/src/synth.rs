//! Synthetic observers and measurement runs for tests and demos.

use std::f64::consts::PI;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::colorspace::{Converter, LuvColor};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::thresholds::measurement::{DIRECTION_COUNT, REPETITIONS};
use crate::thresholds::{default_directions, MeasurementRecord, MeasurementSet};

/// Centers per lightness plane, L* = 30, 40, ..., 70.
pub const LEVEL_COUNTS: [(f64, usize); 5] = [(30.0, 9), (40.0, 13), (50.0, 19), (60.0, 20), (70.0, 16)];

/// Chroma spacing of the candidate center grid.
const CENTER_SPACING: f64 = 12.0;
/// Centers keep this much room to the gamut boundary.
const CENTER_MARGIN: f64 = 4.0;

/// Confusion direction of the default deutan-like weak observer.
pub const CONFUSION_DIRECTION: [f64; 3] = [0.0, 0.96, 0.28];

/// In-gamut test colors on the five protocol planes, nearest to the
/// neutral axis first.
pub fn protocol_centers(conv: &Converter) -> Vec<LuvColor> {
    let mut out = Vec::with_capacity(77);
    for (l, count) in LEVEL_COUNTS {
        let mut cand = Vec::new();
        for i in -12..=16 {
            for j in -12..=12 {
                let (u, v) = (i as f64 * CENTER_SPACING, j as f64 * CENTER_SPACING);
                let ok = [(0.0, 0.0), (1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)]
                    .iter()
                    .all(|(du, dv)| conv.in_gamut(LuvColor::new(l, u + du * CENTER_MARGIN, v + dv * CENTER_MARGIN)));
                if ok {
                    cand.push((u, v));
                }
            }
        }
        cand.sort_by(|a, b| {
            let ra = a.0.hypot(a.1);
            let rb = b.0.hypot(b.1);
            ra.total_cmp(&rb).then(a.1.atan2(a.0).total_cmp(&b.1.atan2(b.0)))
        });
        out.extend(cand.into_iter().take(count).map(|(u, v)| LuvColor::new(l, u, v)));
    }
    out
}

#[derive(Debug, Clone)]
struct Wave<const D: usize> {
    freq: Vector<D>,
    phase: f64,
    coef: Matrix<D>,
}

/// Smooth SPD field `L(x) L(x)ᵀ` with `L` a lower-triangular base factor
/// plus a few random plane waves. Diagonal wave amplitudes stay below the
/// base diagonal, so `L(x)` never becomes singular.
#[derive(Debug, Clone)]
pub struct SmoothSpd<const D: usize> {
    base: Matrix<D>,
    waves: Vec<Wave<D>>,
}

impl<const D: usize> SmoothSpd<D> {
    /// `jnd` gives the threshold half-length per axis of the base metric;
    /// `amplitude` is the relative modulation strength (below 1).
    pub fn random(seed: u64, jnd: [f64; D], amplitude: f64, wavelength: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = Matrix::<D>::from_fn(|i, j| if i == j { 1.0 / jnd[i] } else { 0.0 });
        let n_waves = 3;
        let waves = (0..n_waves)
            .map(|_| {
                let mut dir = Vector::<D>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                if dir.norm() < 1e-3 {
                    dir[0] = 1.0;
                }
                let lambda = wavelength * rng.gen_range(0.7..1.4);
                let freq = dir.normalize() * (2.0 * PI / lambda);
                let phase = rng.gen_range(0.0..2.0 * PI);
                let coef = Matrix::<D>::from_fn(|i, j| {
                    if j > i {
                        0.0
                    } else {
                        let a = amplitude / n_waves as f64;
                        let scale = if i == j { base[(i, i)] } else { 0.5 * (base[(i, i)] * base[(j, j)]).sqrt() };
                        rng.gen_range(-a..a) * scale
                    }
                });
                Wave { freq, phase, coef }
            })
            .collect();
        Self { base, waves }
    }

    pub fn constant(g: Matrix<D>) -> Result<Self> {
        let base = crate::linalg::cholesky(&g).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            base,
            waves: Vec::new(),
        })
    }

    pub fn metric(&self, x: &Vector<D>) -> Matrix<D> {
        let mut l = self.base;
        for w in &self.waves {
            l += w.coef * (w.freq.dot(x) + w.phase).sin();
        }
        l * l.transpose()
    }
}

/// Metric of an observer who discriminates worse along `direction`:
/// the quadratic form is scaled by `factor²` along that direction.
pub fn weaken<const D: usize>(g: &Matrix<D>, direction: &Vector<D>, factor: f64) -> Matrix<D> {
    let d = direction.normalize();
    let p = Matrix::<D>::identity() - d * d.transpose() * (1.0 - factor);
    p * g * p
}

/// Quadratic diffeomorphism fixing `origin` with identity Jacobian there.
#[derive(Debug, Clone)]
pub struct Warp<const D: usize> {
    origin: Vector<D>,
    /// `c[i][j][k]`, symmetric in `(j, k)`.
    c: Vec<Matrix<D>>,
}

impl<const D: usize> Warp<D> {
    /// The Jacobian deviates from the identity by at most `strength`
    /// (spectral bound) within `radius` of the origin.
    pub fn random(seed: u64, origin: Vector<D>, radius: f64, strength: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<Matrix<D>> = (0..D)
            .map(|_| {
                let m = Matrix::<D>::from_fn(|_, _| rng.gen_range(-1.0..1.0));
                (m + m.transpose()) * 0.5
            })
            .collect();
        // |∂φ_i/∂x_j - δ_ij| ≤ 2 Σ_k |c_ijk| |y_k|; bound the Frobenius norm
        let total: f64 = raw.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt();
        let k = strength / (2.0 * radius * total);
        Self {
            origin,
            c: raw.into_iter().map(|m| m * k).collect(),
        }
    }

    pub fn identity(origin: Vector<D>) -> Self {
        Self {
            origin,
            c: vec![Matrix::<D>::zeros(); D],
        }
    }

    pub fn apply(&self, x: &Vector<D>) -> Vector<D> {
        let y = x - self.origin;
        Vector::<D>::from_fn(|i, _| x[i] + y.dot(&(self.c[i] * y)))
    }

    pub fn jacobian(&self, x: &Vector<D>) -> Matrix<D> {
        let y = x - self.origin;
        let mut j = Matrix::<D>::identity();
        for i in 0..D {
            let row = self.c[i] * y * 2.0;
            for k in 0..D {
                j[(i, k)] += row[k];
            }
        }
        j
    }

    /// Newton inverse; converges for points inside the design radius.
    pub fn inverse(&self, y: &Vector<D>) -> Vector<D> {
        let mut x = *y;
        for _ in 0..50 {
            let r = self.apply(&x) - y;
            if r.norm() < 1e-13 {
                break;
            }
            match crate::linalg::inverse(&self.jacobian(&x)) {
                Some(inv) => x -= inv * r,
                None => break,
            }
        }
        x
    }
}

/// Observer pair related by an exact isometry: the weak metric is the
/// pullback of the normal one through the warp, so the simulation map is
/// the warp itself and compensation is its inverse.
#[derive(Debug, Clone)]
pub struct PullbackPair<const D: usize> {
    pub normal: SmoothSpd<D>,
    pub warp: Warp<D>,
}

impl<const D: usize> PullbackPair<D> {
    pub fn metric_normal(&self, x: &Vector<D>) -> Matrix<D> {
        self.normal.metric(x)
    }

    pub fn metric_weak(&self, x: &Vector<D>) -> Matrix<D> {
        let j = self.warp.jacobian(x);
        j.transpose() * self.normal.metric(&self.warp.apply(x)) * j
    }

    pub fn simulate(&self, x: &Vector<D>) -> Vector<D> {
        self.warp.apply(x)
    }

    pub fn compensate(&self, y: &Vector<D>) -> Vector<D> {
        self.warp.inverse(y)
    }
}

/// Default chroma-plane pair at the given origin.
pub fn pullback_pair_2d(seed: u64, origin: Vector<2>) -> PullbackPair<2> {
    PullbackPair {
        normal: SmoothSpd::random(seed, [1.5, 1.5], 0.35, 90.0),
        warp: Warp::random(seed ^ 0x5eed, origin, 120.0, 0.35),
    }
}

/// Normal observer of the protocol dataset.
pub fn default_normal_observer(seed: u64) -> SmoothSpd<3> {
    SmoothSpd::random(seed, [1.0, 1.5, 1.5], 0.3, 90.0)
}

/// Weak observer: the normal metric weakened along the
/// confusion direction.
pub fn default_weak_metric(normal: &SmoothSpd<3>, x: &Vector<3>) -> Matrix<3> {
    weaken(&normal.metric(x), &Vector::<3>::from(CONFUSION_DIRECTION), 0.45)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    /// Relative standard deviation of the deviation lengths.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 1, noise: 0.0 }
    }
}

fn session_epoch() -> DateTime<Utc> {
    DateTime::from_timestamp(1_700_000_000, 0).expect("valid epoch")
}

/// Records of one observer matching every center in every direction.
pub fn measurement_run(
    observer_id: &str,
    metric: &dyn Fn(&Vector<3>) -> Matrix<3>,
    centers: &[LuvColor],
    config: &SynthConfig,
) -> Result<Vec<MeasurementRecord>> {
    if !(config.noise >= 0.0) {
        return Err(Error::Invalid("noise must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.noise.max(f64::MIN_POSITIVE)).expect("valid deviation");
    let directions = default_directions();
    let mut records = Vec::with_capacity(centers.len() * DIRECTION_COUNT * REPETITIONS as usize);
    let mut t = session_epoch();
    for (ci, c) in centers.iter().enumerate() {
        let x = c.to_vector();
        let g = metric(&x);
        for (k, d) in directions.iter().enumerate() {
            let d = Vector::<3>::from(*d);
            let unit = d / d.dot(&(g * d)).sqrt();
            for rep in 1..=REPETITIONS {
                let scale = if config.noise > 0.0 { 1.0 + normal.sample(&mut rng) } else { 1.0 };
                t += Duration::seconds(7);
                records.push(MeasurementRecord {
                    observer_id: observer_id.to_string(),
                    session_id: format!("{observer_id}-s{:02}", ci / 8),
                    timestamp: t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
                    test_color: *c,
                    direction_index: k,
                    repetition: rep,
                    matched_color: LuvColor::from_vector(&(x + unit * scale)),
                });
            }
        }
    }
    Ok(records)
}

/// Two-observer dataset on the 77 protocol centers.
pub fn protocol_dataset(conv: &Converter, config: &SynthConfig) -> Result<MeasurementSet> {
    let centers = protocol_centers(conv);
    let normal = default_normal_observer(config.seed);
    let mut records = measurement_run("normal", &|x| normal.metric(x), &centers, config)?;
    let weak_cfg = SynthConfig {
        seed: config.seed.wrapping_add(1),
        ..*config
    };
    records.extend(measurement_run("weak", &|x| default_weak_metric(&normal, x), &centers, &weak_cfg)?);
    MeasurementSet::from_records(default_directions(), records)
}

/// Constant observers with `G_w = G_n / 4`: weak ellipsoids have eight
/// times the volume.
pub fn scaling_dataset(conv: &Converter, config: &SynthConfig) -> Result<MeasurementSet> {
    let centers = protocol_centers(conv);
    let mut records = measurement_run("normal", &|_| Matrix::<3>::identity(), &centers, config)?;
    let weak_cfg = SynthConfig {
        seed: config.seed.wrapping_add(1),
        ..*config
    };
    records.extend(measurement_run(
        "weak",
        &|_| Matrix::<3>::identity() * 0.25,
        &centers,
        &weak_cfg,
    )?);
    MeasurementSet::from_records(default_directions(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_centers_shape() {
        let conv = Converter::default();
        let c = protocol_centers(&conv);
        assert_eq!(c.len(), 77);
        for (l, n) in LEVEL_COUNTS {
            assert_eq!(c.iter().filter(|x| x.l == l).count(), n);
        }
        assert!(c.iter().all(|x| conv.in_gamut(*x)));
    }

    #[test]
    fn smooth_field_is_spd() {
        let f = SmoothSpd::<3>::random(7, [1.0, 1.5, 1.5], 0.9, 40.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = Vector::<3>::from_fn(|_, _| rng.gen_range(-150.0..150.0));
            let g = f.metric(&x);
            assert!(crate::linalg::cholesky(&g).is_some());
            assert!((g - g.transpose()).norm() < 1e-12);
        }
    }

    #[test]
    fn warp_inverse_and_pullback() {
        let pair = pullback_pair_2d(4, Vector::<2>::zeros());
        let x = Vector::<2>::new(40.0, -25.0);
        let y = pair.simulate(&x);
        assert!((pair.compensate(&y) - x).norm() < 1e-10);
        assert!((pair.warp.jacobian(&Vector::<2>::zeros()) - Matrix::<2>::identity()).norm() < 1e-15);
        // numeric Jacobian agrees with the analytic one
        let h = 1e-5;
        let mut j = Matrix::<2>::zeros();
        for a in 0..2 {
            let mut e = Vector::<2>::zeros();
            e[a] = h;
            j.set_column(a, &((pair.warp.apply(&(x + e)) - pair.warp.apply(&(x - e))) / (2.0 * h)));
        }
        assert!((j - pair.warp.jacobian(&x)).norm() < 1e-8);
        // pullback metric makes the warp a local isometry
        let v = Vector::<2>::new(0.3, -0.7);
        let jv = pair.warp.jacobian(&x) * v;
        let lhs = v.dot(&(pair.metric_weak(&x) * v));
        let rhs = jv.dot(&(pair.metric_normal(&y) * jv));
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn weaken_scales_along_direction() {
        let d = Vector::<3>::new(0.0, 1.0, 0.0);
        let g = weaken(&Matrix::<3>::identity(), &d, 0.5);
        assert!((d.dot(&(g * d)) - 0.25).abs() < 1e-15);
        let e = Vector::<3>::new(1.0, 0.0, 0.0);
        assert!((e.dot(&(g * e)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn measurement_run_is_seeded_and_exact() {
        let conv = Converter::default();
        let set = protocol_dataset(&conv, &SynthConfig::default()).unwrap();
        assert_eq!(set.records.len(), 2 * 77 * 14 * 4);
        assert_eq!(set.centers.len(), 77);
        let noisy = SynthConfig { seed: 9, noise: 0.02 };
        let a = scaling_dataset(&conv, &noisy).unwrap();
        let b = scaling_dataset(&conv, &noisy).unwrap();
        assert_eq!(a.records, b.records);
    }
}
