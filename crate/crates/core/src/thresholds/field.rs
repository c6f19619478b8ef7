//! Smooth metric-tensor fields on a regular lattice.
//!
//! Construction: scattered ellipsoids are resampled onto the lattice by
//! inverse-distance weighting (power 2, 8 neighbours), each tensor component
//! is Gaussian-smoothed, and queries interpolate the components with a
//! tensor-product cubic B-spline or Akima scheme. Every query result is
//! projected back onto the SPD cone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pack_sym, spd_project, sym_len, unpack_sym, Matrix, Vector};
use crate::metric::{Bounds, MetricSource};

use super::ellipsoid::Ellipsoid;

const MAX_COMPONENTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Interpolation {
    #[default]
    CubicBSpline,
    Akima,
}

impl Interpolation {
    pub fn tag(self) -> u8 {
        match self {
            Interpolation::CubicBSpline => 0,
            Interpolation::Akima => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Interpolation::CubicBSpline),
            1 => Some(Interpolation::Akima),
            _ => None,
        }
    }
}

impl std::str::FromStr for Interpolation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cubic-b-spline" | "bspline" | "b-spline" | "cubic" => Ok(Interpolation::CubicBSpline),
            "akima" => Ok(Interpolation::Akima),
            other => Err(Error::Config(format!("unknown interpolation method {other:?}"))),
        }
    }
}

/// Regular lattice; node `idx` sits at `min + idx * spacing`. Storage is
/// row-major with the last axis fastest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice<const D: usize> {
    pub min: Vector<D>,
    pub spacing: Vector<D>,
    pub counts: [usize; D],
}

impl<const D: usize> Lattice<D> {
    /// Lattice covering `bounds` with spacing at most `target_spacing`.
    pub fn covering(bounds: &Bounds<D>, target_spacing: f64) -> Result<Self> {
        if !(target_spacing > 0.0) {
            return Err(Error::Config("lattice spacing must be positive".into()));
        }
        let mut counts = [1usize; D];
        let mut spacing = Vector::<D>::from_element(target_spacing);
        for a in 0..D {
            let extent = bounds.max[a] - bounds.min[a];
            if !(extent >= 0.0) {
                return Err(Error::Config("domain box has negative extent".into()));
            }
            if extent > 0.0 {
                let cells = (extent / target_spacing - 1e-9).ceil().max(1.0) as usize;
                counts[a] = cells + 1;
                spacing[a] = extent / cells as f64;
            }
        }
        Ok(Self {
            min: bounds.min,
            spacing,
            counts,
        })
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn bounds(&self) -> Bounds<D> {
        let max = Vector::<D>::from_fn(|a, _| {
            self.min[a] + self.spacing[a] * (self.counts[a].saturating_sub(1)) as f64
        });
        Bounds::new(self.min, max)
    }

    pub fn flat_index(&self, idx: &[usize; D]) -> usize {
        let mut n = 0;
        for a in 0..D {
            n = n * self.counts[a] + idx[a];
        }
        n
    }

    pub fn unflatten(&self, mut n: usize) -> [usize; D] {
        let mut idx = [0; D];
        for a in (0..D).rev() {
            idx[a] = n % self.counts[a];
            n /= self.counts[a];
        }
        idx
    }

    pub fn position(&self, idx: &[usize; D]) -> Vector<D> {
        Vector::<D>::from_fn(|a, _| self.min[a] + self.spacing[a] * idx[a] as f64)
    }

    /// Continuous lattice coordinates of `x`, clamped to the lattice.
    fn coords(&self, x: &Vector<D>) -> [f64; D] {
        let mut t = [0.0; D];
        for a in 0..D {
            let hi = (self.counts[a] - 1) as f64;
            let ta = if self.spacing[a] > 0.0 {
                (x[a] - self.min[a]) / self.spacing[a]
            } else {
                0.0
            };
            t[a] = if ta.is_finite() { ta.clamp(0.0, hi) } else { 0.0 };
        }
        t
    }

    fn nearest(&self, x: &Vector<D>) -> [usize; D] {
        let t = self.coords(x);
        let mut idx = [0; D];
        for a in 0..D {
            idx[a] = (t[a].round() as usize).min(self.counts[a] - 1);
        }
        idx
    }

    fn stride(&self, axis: usize) -> usize {
        self.counts[axis + 1..].iter().product()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldConfig<const D: usize> {
    /// Lattice domain; defaults to the bounding box of the ellipsoid centers.
    pub domain: Option<Bounds<D>>,
    pub spacing: f64,
    /// Gaussian kernel width in lattice cells. Zero disables smoothing.
    pub sigma: f64,
    pub method: Interpolation,
    pub neighbors: usize,
    pub idw_power: f64,
}

impl<const D: usize> Default for FieldConfig<D> {
    fn default() -> Self {
        Self {
            domain: None,
            spacing: 5.0,
            sigma: 1.5,
            method: Interpolation::CubicBSpline,
            neighbors: 8,
            idw_power: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricField<const D: usize> {
    pub(crate) lattice: Lattice<D>,
    /// Smoothed SPD samples, `sym_len(D)` packed components per node.
    pub(crate) samples: Vec<f64>,
    pub(crate) coeffs: Vec<f64>,
    pub(crate) sigma: f64,
    pub(crate) method: Interpolation,
    /// Lightness of the chromaticity plane for 2D fields.
    pub(crate) level: Option<f64>,
    pub(crate) observer_id: String,
    /// Ellipsoids the field was built from (empty for sampled fields).
    pub(crate) ellipsoids: Vec<Ellipsoid<D>>,
}

impl<const D: usize> MetricField<D> {
    /// Build from lattice samples that are already smoothed.
    pub fn from_samples(
        lattice: Lattice<D>,
        samples: Vec<f64>,
        sigma: f64,
        method: Interpolation,
    ) -> Result<Self> {
        let nc = sym_len(D);
        if samples.len() != lattice.node_count() * nc {
            return Err(Error::Invalid(format!(
                "expected {} samples, got {}",
                lattice.node_count() * nc,
                samples.len()
            )));
        }
        for node in samples.chunks(nc) {
            let g = unpack_sym::<D>(node);
            if crate::linalg::cholesky(&g).is_none() {
                return Err(Error::NotPositiveDefinite);
            }
        }
        let coeffs = match method {
            Interpolation::CubicBSpline => bspline_coefficients(&lattice, &samples),
            Interpolation::Akima => samples.clone(),
        };
        Ok(Self {
            lattice,
            samples,
            coeffs,
            sigma,
            method,
            level: None,
            observer_id: String::new(),
            ellipsoids: Vec::new(),
        })
    }

    /// Sample a closed-form metric on a lattice (no smoothing).
    pub fn from_fn<F>(bounds: Bounds<D>, spacing: f64, method: Interpolation, f: F) -> Result<Self>
    where
        F: Fn(&Vector<D>) -> Matrix<D>,
    {
        let lattice = Lattice::covering(&bounds, spacing)?;
        let nc = sym_len(D);
        let mut samples = vec![0.0; lattice.node_count() * nc];
        for n in 0..lattice.node_count() {
            let g = spd_project(&f(&lattice.position(&lattice.unflatten(n))))?;
            pack_sym(&g, &mut samples[n * nc..(n + 1) * nc]);
        }
        Self::from_samples(lattice, samples, 0.0, method)
    }

    pub fn constant(bounds: Bounds<D>, spacing: f64, g: Matrix<D>) -> Result<Self> {
        Self::from_fn(bounds, spacing, Interpolation::CubicBSpline, |_| g)
    }

    pub fn with_level(mut self, level: Option<f64>) -> Self {
        self.level = level;
        self
    }

    pub fn with_observer(mut self, id: impl Into<String>) -> Self {
        self.observer_id = id.into();
        self
    }

    pub fn lattice(&self) -> &Lattice<D> {
        &self.lattice
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn method(&self) -> Interpolation {
        self.method
    }

    pub fn level(&self) -> Option<f64> {
        self.level
    }

    pub fn observer_id(&self) -> &str {
        &self.observer_id
    }

    pub fn ellipsoids(&self) -> &[Ellipsoid<D>] {
        &self.ellipsoids
    }

    pub fn node_value(&self, idx: &[usize; D]) -> Matrix<D> {
        let nc = sym_len(D);
        let n = self.lattice.flat_index(idx);
        unpack_sym::<D>(&self.samples[n * nc..(n + 1) * nc])
    }

    /// Interpolated tensor before SPD projection.
    pub fn interpolate_raw(&self, x: &Vector<D>) -> Matrix<D> {
        let t = self.lattice.coords(x);
        let packed = match self.method {
            Interpolation::CubicBSpline => self.eval_bspline(&t),
            Interpolation::Akima => {
                let mut idx = [0usize; D];
                self.eval_akima(&t, 0, &mut idx)
            }
        };
        unpack_sym::<D>(&packed[..sym_len(D)])
    }

    /// SPD metric at `x`; points outside the domain take the value at the
    /// nearest boundary point.
    pub fn metric_at(&self, x: &Vector<D>) -> Matrix<D> {
        let raw = self.interpolate_raw(x);
        spd_project(&raw).unwrap_or_else(|_| self.node_value(&self.lattice.nearest(x)))
    }

    /// Largest relative Frobenius error between the field and its source
    /// ellipsoids, evaluated at the ellipsoid centers.
    pub fn center_reproduction_error(&self) -> f64 {
        self.ellipsoids
            .iter()
            .map(|e| (self.metric_at(&e.center) - e.metric).norm() / e.metric.norm())
            .fold(0.0, f64::max)
    }

    fn eval_bspline(&self, t: &[f64; D]) -> [f64; MAX_COMPONENTS] {
        let nc = sym_len(D);
        let weights: Vec<Vec<(usize, f64)>> = (0..D)
            .map(|a| bspline_weights(t[a], self.lattice.counts[a]))
            .collect();
        let mut out = [0.0; MAX_COMPONENTS];
        let mut combo = [0usize; D];
        loop {
            let mut w = 1.0;
            let mut flat = 0;
            for a in 0..D {
                let (i, wa) = weights[a][combo[a]];
                w *= wa;
                flat = flat * self.lattice.counts[a] + i;
            }
            if w != 0.0 {
                let base = flat * nc;
                for c in 0..nc {
                    out[c] += w * self.coeffs[base + c];
                }
            }
            // odometer increment
            let mut a = D;
            loop {
                if a == 0 {
                    return out;
                }
                a -= 1;
                combo[a] += 1;
                if combo[a] < weights[a].len() {
                    break;
                }
                combo[a] = 0;
            }
        }
    }

    fn eval_akima(&self, t: &[f64; D], axis: usize, idx: &mut [usize; D]) -> [f64; MAX_COMPONENTS] {
        let nc = sym_len(D);
        if axis == D {
            let base = self.lattice.flat_index(idx) * nc;
            let mut out = [0.0; MAX_COMPONENTS];
            out[..nc].copy_from_slice(&self.coeffs[base..base + nc]);
            return out;
        }
        let n = self.lattice.counts[axis];
        if n == 1 {
            idx[axis] = 0;
            return self.eval_akima(t, axis + 1, idx);
        }
        let i = (t[axis].floor() as usize).min(n - 2);
        let f = t[axis] - i as f64;
        let lo = i.saturating_sub(2);
        let hi = (i + 3).min(n - 1);
        let mut values = [[0.0; MAX_COMPONENTS]; 6];
        for j in lo..=hi {
            idx[axis] = j;
            values[j - lo] = self.eval_akima(t, axis + 1, idx);
        }
        let mut out = [0.0; MAX_COMPONENTS];
        let mut line = [0.0; 6];
        for c in 0..nc {
            for j in lo..=hi {
                line[j - lo] = values[j - lo][c];
            }
            out[c] = akima_1d(&line[..=hi - lo], lo, i, f, n);
        }
        out
    }
}

impl<const D: usize> MetricSource<D> for MetricField<D> {
    fn metric(&self, x: &Vector<D>) -> Matrix<D> {
        self.metric_at(x)
    }

    fn bounds(&self) -> Bounds<D> {
        self.lattice.bounds()
    }

    fn derivative_step(&self) -> f64 {
        0.25 * self.lattice.spacing.min()
    }
}

/// Cubic B-spline weights along one axis, with the natural-end extension
/// coefficients folded back into the lattice.
fn bspline_weights(t: f64, n: usize) -> Vec<(usize, f64)> {
    if n == 1 {
        return vec![(0, 1.0)];
    }
    let i = (t.floor() as usize).min(n - 2);
    let f = t - i as f64;
    let f2 = f * f;
    let f3 = f2 * f;
    let w = [
        (1.0 - f).powi(3) / 6.0,
        (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0,
        (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0,
        f3 / 6.0,
    ];
    let mut acc = vec![0.0; n];
    let mut used = Vec::with_capacity(4);
    for (k, wk) in w.iter().enumerate() {
        let j = i as isize - 1 + k as isize;
        if j < 0 {
            // c[-1] = 2 c[0] - c[1]
            acc[0] += 2.0 * wk;
            acc[1] -= wk;
        } else if j as usize >= n {
            // c[n] = 2 c[n-1] - c[n-2]
            acc[n - 1] += 2.0 * wk;
            acc[n - 2] -= wk;
        } else {
            acc[j as usize] += wk;
        }
    }
    let lo = i.saturating_sub(1);
    let hi = (i + 2).min(n - 1);
    for (j, &a) in acc.iter().enumerate().take(hi + 1).skip(lo) {
        used.push((j, a));
    }
    used
}

/// Natural-end interpolating cubic B-spline coefficients, computed by a
/// tridiagonal solve along every lattice line of every axis.
fn bspline_coefficients<const D: usize>(lattice: &Lattice<D>, samples: &[f64]) -> Vec<f64> {
    let nc = sym_len(D);
    let mut c = samples.to_vec();
    for axis in 0..D {
        let n = lattice.counts[axis];
        if n <= 2 {
            continue;
        }
        let stride = lattice.stride(axis) * nc;
        let total = lattice.node_count();
        let mut line = vec![0.0; n];
        for start_node in 0..total {
            if lattice.unflatten(start_node)[axis] != 0 {
                continue;
            }
            for comp in 0..nc {
                let base = start_node * nc + comp;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = c[base + k * stride];
                }
                solve_natural_bspline(&mut line);
                for (k, v) in line.iter().enumerate() {
                    c[base + k * stride] = *v;
                }
            }
        }
    }
    c
}

/// In place: values → coefficients with `c[0] = f[0]`, `c[n-1] = f[n-1]`
/// and `(c[i-1] + 4 c[i] + c[i+1]) / 6 = f[i]` inside.
fn solve_natural_bspline(f: &mut [f64]) {
    let n = f.len();
    if n <= 2 {
        return;
    }
    let m = n - 2;
    let mut rhs: Vec<f64> = (1..n - 1).map(|i| 6.0 * f[i]).collect();
    rhs[0] -= f[0];
    rhs[m - 1] -= f[n - 1];
    // Thomas algorithm: diag 4, off-diagonals 1
    let mut cprime = vec![0.0; m];
    let mut dprime = vec![0.0; m];
    cprime[0] = 1.0 / 4.0;
    dprime[0] = rhs[0] / 4.0;
    for i in 1..m {
        let denom = 4.0 - cprime[i - 1];
        cprime[i] = 1.0 / denom;
        dprime[i] = (rhs[i] - dprime[i - 1]) / denom;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = dprime[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = dprime[i] - cprime[i] * x[i + 1];
    }
    f[1..n - 1].copy_from_slice(&x);
}

/// Akima interpolation on the unit-spaced interval `[i, i+1]` at fraction
/// `f`. `values[k]` holds node `lo + k`; `n` is the full line length.
fn akima_1d(values: &[f64], lo: usize, i: usize, f: f64, n: usize) -> f64 {
    let y = |j: usize| values[j - lo];
    if n == 2 {
        return y(0) + f * (y(1) - y(0));
    }
    let hi = lo + values.len() - 1;
    // slopes m[j] = y[j+1] - y[j] for j in i-2 ..= i+2, extrapolated at ends
    let mut m = [0.0f64; 5];
    let mut known = [false; 5];
    for (k, j) in (i as isize - 2..=i as isize + 2).enumerate() {
        if j >= lo as isize && (j as usize) < hi {
            m[k] = y(j as usize + 1) - y(j as usize);
            known[k] = true;
        }
    }
    for k in (0..5).rev() {
        if !known[k] && k + 2 < 5 && known[k + 1] && known[k + 2] {
            m[k] = 2.0 * m[k + 1] - m[k + 2];
            known[k] = true;
        }
    }
    for k in 0..5 {
        if !known[k] && k >= 2 && known[k - 1] && known[k - 2] {
            m[k] = 2.0 * m[k - 1] - m[k - 2];
            known[k] = true;
        }
    }
    let derivative = |a: f64, b: f64, c: f64, d: f64| -> f64 {
        let w1 = (d - c).abs();
        let w2 = (b - a).abs();
        let scale = a.abs() + b.abs() + c.abs() + d.abs();
        if w1 + w2 <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            0.5 * (b + c)
        } else {
            (w1 * b + w2 * c) / (w1 + w2)
        }
    };
    let t0 = derivative(m[0], m[1], m[2], m[3]);
    let t1 = derivative(m[1], m[2], m[3], m[4]);
    let y0 = y(i);
    let y1 = y(i + 1);
    let f2 = f * f;
    let f3 = f2 * f;
    (2.0 * f3 - 3.0 * f2 + 1.0) * y0
        + (f3 - 2.0 * f2 + f) * t0
        + (-2.0 * f3 + 3.0 * f2) * y1
        + (f3 - f2) * t1
}

fn gaussian_smooth<const D: usize>(lattice: &Lattice<D>, samples: &mut [f64], sigma: f64) {
    if !(sigma > 0.0) {
        return;
    }
    let nc = sym_len(D);
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    for axis in 0..D {
        let n = lattice.counts[axis];
        if n == 1 {
            continue;
        }
        let stride = lattice.stride(axis) * nc;
        let src = samples.to_vec();
        for node in 0..lattice.node_count() {
            let idx = lattice.unflatten(node);
            let pos = idx[axis] as isize;
            let line_start = node * nc - idx[axis] * stride;
            let mut wsum = 0.0;
            let mut acc = [0.0; MAX_COMPONENTS];
            for (k, w) in kernel.iter().enumerate() {
                let j = pos + k as isize - radius;
                if j < 0 || j >= n as isize {
                    continue;
                }
                wsum += w;
                let base = line_start + j as usize * stride;
                for c in 0..nc {
                    acc[c] += w * src[base + c];
                }
            }
            for c in 0..nc {
                samples[node * nc + c] = acc[c] / wsum;
            }
        }
    }
}

fn check_spanning<const D: usize>(ellipsoids: &[Ellipsoid<D>]) -> Result<()> {
    if ellipsoids.len() < D + 1 {
        return Err(Error::Invalid(format!(
            "need at least {} ellipsoids, got {}",
            (D + 1).max(4),
            ellipsoids.len()
        )));
    }
    let n = ellipsoids.len() as f64;
    let mean = ellipsoids
        .iter()
        .fold(Vector::<D>::zeros(), |acc, e| acc + e.center)
        / n;
    let mut scatter = Matrix::<D>::zeros();
    for e in ellipsoids {
        let d = e.center - mean;
        scatter += d * d.transpose();
    }
    let (vals, _) = crate::linalg::symmetric_eigen(&scatter);
    if vals.min() <= 1e-10 * vals.max().max(f64::MIN_POSITIVE) {
        return Err(Error::Degenerate(format!(
            "ellipsoid centers do not span {D} dimensions (all {})",
            if D == 3 { "coplanar" } else { "collinear" }
        )));
    }
    Ok(())
}

/// Resample, smooth and interpolate a set of threshold ellipsoids.
pub fn build_metric_field<const D: usize>(
    ellipsoids: &[Ellipsoid<D>],
    config: &FieldConfig<D>,
) -> Result<MetricField<D>> {
    if ellipsoids.len() < 4 {
        return Err(Error::Invalid(format!(
            "need at least 4 ellipsoids, got {}",
            ellipsoids.len()
        )));
    }
    check_spanning(ellipsoids)?;
    let domain = config.domain.unwrap_or_else(|| {
        let mut min = ellipsoids[0].center;
        let mut max = ellipsoids[0].center;
        for e in ellipsoids {
            min = min.inf(&e.center);
            max = max.sup(&e.center);
        }
        Bounds::new(min, max)
    });
    let lattice = Lattice::covering(&domain, config.spacing)?;
    let nc = sym_len(D);
    let packed: Vec<[f64; MAX_COMPONENTS]> = ellipsoids
        .iter()
        .map(|e| {
            let mut p = [0.0; MAX_COMPONENTS];
            pack_sym(&e.metric, &mut p[..nc]);
            p
        })
        .collect();
    let k = config.neighbors.max(1).min(ellipsoids.len());
    let mut samples = vec![0.0; lattice.node_count() * nc];
    let mut dist: Vec<(f64, usize)> = Vec::with_capacity(ellipsoids.len());
    for node in 0..lattice.node_count() {
        let p = lattice.position(&lattice.unflatten(node));
        dist.clear();
        dist.extend(
            ellipsoids
                .iter()
                .enumerate()
                .map(|(i, e)| ((e.center - p).norm(), i)),
        );
        dist.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &mut dist[..k];
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let out = &mut samples[node * nc..(node + 1) * nc];
        if nearest[0].0 < 1e-9 {
            out.copy_from_slice(&packed[nearest[0].1][..nc]);
            continue;
        }
        let mut wsum = 0.0;
        for &(d, i) in nearest.iter() {
            let w = d.powf(-config.idw_power);
            wsum += w;
            for c in 0..nc {
                out[c] += w * packed[i][c];
            }
        }
        for v in out.iter_mut() {
            *v /= wsum;
        }
    }
    gaussian_smooth(&lattice, &mut samples, config.sigma);
    let mut field = MetricField::from_samples(lattice, samples, config.sigma, config.method)?;
    field.ellipsoids = ellipsoids.to_vec();
    Ok(field)
}

/// `g(l) = G(l, 0, 0)_{LL}` along the neutral axis.
#[derive(Debug, Clone, Copy)]
pub struct AxisMetric<'a> {
    field: &'a MetricField<3>,
}

impl AxisMetric<'_> {
    pub fn at(&self, l: f64) -> f64 {
        self.field.metric_at(&Vector::<3>::new(l, 0.0, 0.0))[(0, 0)]
    }

    pub fn range(&self) -> (f64, f64) {
        let b = self.field.lattice.bounds();
        (b.min[0], b.max[0])
    }
}

pub fn restrict_to_lightness_axis(field: &MetricField<3>) -> Result<AxisMetric<'_>> {
    let b = field.lattice.bounds();
    if !(b.min[1] <= 0.0 && b.max[1] >= 0.0 && b.min[2] <= 0.0 && b.max[2] >= 0.0) {
        return Err(Error::Invalid("field domain does not contain the neutral axis".into()));
    }
    Ok(AxisMetric { field })
}

/// Mean of `det(G_w)^(-1/2) / det(G_n)^(-1/2)` over shared centers,
/// optionally restricted to one lightness level.
pub fn volume_ratio_of<const D: usize>(
    normal: &[Ellipsoid<D>],
    weak: &[Ellipsoid<D>],
    level: Option<f64>,
) -> Result<f64> {
    if normal.len() != weak.len() {
        return Err(Error::Invalid(format!(
            "mismatched centers: {} vs {} ellipsoids",
            normal.len(),
            weak.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for n in normal {
        let w = weak
            .iter()
            .find(|w| (w.center - n.center).norm() < 1e-9)
            .ok_or_else(|| Error::Invalid(format!("mismatched centers: {:?} has no partner", n.center.as_slice())))?;
        if let Some(l) = level {
            if D == 3 && (n.center[0] - l).abs() > 1e-9 {
                continue;
            }
        }
        total += w.relative_volume() / n.relative_volume();
        count += 1;
    }
    if count == 0 {
        return Err(Error::Invalid("no centers at the requested level".into()));
    }
    Ok(total / count as f64)
}

pub fn volume_ratio<const D: usize>(
    field_n: &MetricField<D>,
    field_w: &MetricField<D>,
    level: Option<f64>,
) -> Result<f64> {
    if D == 2 {
        if let (Some(l), Some(fl)) = (level, field_n.level) {
            if (l - fl).abs() > 1e-9 {
                return Err(Error::Invalid(format!("fields are at level {fl}, not {l}")));
            }
        }
    }
    volume_ratio_of(&field_n.ellipsoids, &field_w.ellipsoids, level)
}
