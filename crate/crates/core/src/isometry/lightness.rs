//! One-dimensional isometry between lightness axes by arc-length matching.

use crate::error::{Error, Result};

/// Table nodes per unit of lightness range.
const NODES_PER_UNIT: f64 = 20.0;
/// 5-point Gauss-Legendre nodes and weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// Monotone map `l ↦ w(l)` (simulation direction) with its inverse
/// (compensation direction), tabulated as a monotone cubic Hermite spline.
#[derive(Debug, Clone, PartialEq)]
pub struct LightnessMap {
    origin: f64,
    nodes: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

fn checked(g: &dyn Fn(f64) -> f64, l: f64) -> Result<f64> {
    let v = g(l);
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Invalid(format!("nonpositive metric sample {v} at l = {l}")));
    }
    Ok(v.sqrt())
}

fn segment_integral(g: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * checked(g, mid + half * x)?;
    }
    Ok(acc * half)
}

/// Cumulative arc length `A(t) = ∫_origin^t sqrt(g)` on a uniform grid,
/// extended outward until it spans `[need_lo, need_hi]`.
struct ArcTable {
    start: f64,
    h: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

impl ArcTable {
    fn build(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, origin: f64, h: f64) -> Result<Self> {
        let n = ((hi - lo) / h).round().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        let o_idx = ((origin - lo) / h).floor().clamp(0.0, n as f64) as usize;
        let mut values = vec![0.0; n + 1];
        let node = |i: usize| lo + h * i as f64;
        // node(o_idx) <= origin: anchor there, then integrate outward
        values[o_idx] = -segment_integral(g, node(o_idx), origin)?;
        for i in o_idx + 1..=n {
            values[i] = values[i - 1] + segment_integral(g, node(i - 1), node(i))?;
        }
        for i in (0..o_idx).rev() {
            values[i] = values[i + 1] - segment_integral(g, node(i), node(i + 1))?;
        }
        let slopes = (0..=n).map(|i| checked(g, node(i))).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            start: lo,
            h,
            values,
            slopes,
        })
    }

    fn end(&self) -> f64 {
        self.start + self.h * (self.values.len() - 1) as f64
    }

    fn eval(&self, t: f64) -> f64 {
        let n = self.values.len() - 1;
        let i = (((t - self.start) / self.h).floor().max(0.0) as usize).min(n - 1);
        let u = (t - self.start) / self.h - i as f64;
        hermite(
            self.values[i],
            self.values[i + 1],
            self.slopes[i] * self.h,
            self.slopes[i + 1] * self.h,
            u,
        )
    }

    /// Solve `A(t) = a` for `t` inside the table.
    fn invert(&self, a: f64) -> f64 {
        let i = self.values.partition_point(|&v| v < a).clamp(1, self.values.len() - 1) - 1;
        let (mut lo, mut hi) = (self.start + self.h * i as f64, self.start + self.h * (i + 1) as f64);
        let mut t = lo + (hi - lo) * ((a - self.values[i]) / (self.values[i + 1] - self.values[i])).clamp(0.0, 1.0);
        for _ in 0..60 {
            let f = self.eval(t) - a;
            if f.abs() <= 1e-14 * (1.0 + a.abs()) {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let slope = self.slopes[i].max(self.slopes[i + 1]).max(1e-300);
            let newton = t - f / slope;
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        }
        t
    }
}

fn hermite(y0: f64, y1: f64, m0: f64, m1: f64, u: f64) -> f64 {
    let u2 = u * u;
    let u3 = u2 * u;
    (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * m0 + (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * m1
}

/// Build `w` with `∫_origin^{w(l)} sqrt(g_n) = ∫_origin^l sqrt(g_w)` on
/// `[lo, hi]`.
pub fn build_lightness_map(
    g_n: &dyn Fn(f64) -> f64,
    g_w: &dyn Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    l_origin: f64,
) -> Result<LightnessMap> {
    if !(hi > lo) {
        return Err(Error::Invalid(format!("empty lightness range [{lo}, {hi}]")));
    }
    if !(l_origin >= lo && l_origin <= hi) {
        return Err(Error::Invalid(format!("origin {l_origin} outside [{lo}, {hi}]")));
    }
    let h = 1.0 / NODES_PER_UNIT;
    let weak = ArcTable::build(g_w, lo, hi, l_origin, h)?;
    let need_lo = weak.values[0];
    let need_hi = *weak.values.last().unwrap_or(&0.0);

    // grow the normal-space table until it covers the weak arc lengths
    let (mut n_lo, mut n_hi) = (lo, hi);
    let mut normal = ArcTable::build(g_n, n_lo, n_hi, l_origin, h)?;
    for _ in 0..64 {
        let covered_lo = normal.values[0] <= need_lo;
        let covered_hi = *normal.values.last().unwrap_or(&0.0) >= need_hi;
        if covered_lo && covered_hi {
            break;
        }
        let span = n_hi - n_lo;
        if !covered_lo {
            n_lo -= span;
        }
        if !covered_hi {
            n_hi += span;
        }
        normal = ArcTable::build(g_n, n_lo, n_hi, l_origin, h)?;
    }
    if normal.values[0] > need_lo || normal.end() < n_hi || *normal.values.last().unwrap_or(&0.0) < need_hi {
        return Err(Error::Invalid("normal lightness metric cannot match the weak arc length".into()));
    }

    let nodes: Vec<f64> = (0..weak.values.len()).map(|i| weak.start + weak.h * i as f64).collect();
    let mut values = Vec::with_capacity(nodes.len());
    let mut slopes = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() {
        let w = normal.invert(weak.values[i]);
        values.push(w);
        slopes.push(weak.slopes[i] / checked(g_n, w)?);
    }
    if let Some(o) = nodes.iter().position(|&l| (l - l_origin).abs() < 1e-12) {
        values[o] = l_origin;
    }
    limit_slopes(&nodes, &values, &mut slopes);
    Ok(LightnessMap {
        origin: l_origin,
        nodes,
        values,
        slopes,
    })
}

/// Fritsch–Carlson limiter keeping the Hermite interpolant monotone.
fn limit_slopes(x: &[f64], y: &[f64], m: &mut [f64]) {
    for i in 0..x.len() - 1 {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if delta <= 0.0 {
            m[i] = 0.0;
            m[i + 1] = 0.0;
            continue;
        }
        let a = m[i] / delta;
        let b = m[i + 1] / delta;
        let s = a * a + b * b;
        if s > 9.0 {
            let t = 3.0 / s.sqrt();
            m[i] = t * a * delta;
            m[i + 1] = t * b * delta;
        }
    }
}

impl LightnessMap {
    pub fn identity(lo: f64, hi: f64, origin: f64) -> Self {
        Self {
            origin,
            nodes: vec![lo, hi],
            values: vec![lo, hi],
            slopes: vec![1.0, 1.0],
        }
    }

    pub fn from_table(origin: f64, nodes: Vec<f64>, values: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() || nodes.len() != slopes.len() {
            return Err(Error::Invalid("lightness table needs matching node, value and slope columns".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Invalid("lightness table must be strictly increasing".into()));
        }
        Ok(Self {
            origin,
            nodes,
            values,
            slopes,
        })
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn range(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().unwrap_or(&self.nodes[0]))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slopes(&self) -> &[f64] {
        &self.slopes
    }

    fn interval(&self, l: f64) -> usize {
        self.nodes.partition_point(|&x| x <= l).clamp(1, self.nodes.len() - 1) - 1
    }

    /// Simulation direction: weak lightness to normal lightness.
    pub fn forward(&self, l: f64) -> f64 {
        let n = self.nodes.len();
        if l <= self.nodes[0] {
            return self.values[0] + self.slopes[0] * (l - self.nodes[0]);
        }
        if l >= self.nodes[n - 1] {
            return self.values[n - 1] + self.slopes[n - 1] * (l - self.nodes[n - 1]);
        }
        let i = self.interval(l);
        let h = self.nodes[i + 1] - self.nodes[i];
        hermite(
            self.values[i],
            self.values[i + 1],
            self.slopes[i] * h,
            self.slopes[i + 1] * h,
            (l - self.nodes[i]) / h,
        )
    }

    /// Compensation direction: inverse of [`forward`](Self::forward).
    pub fn inverse(&self, y: f64) -> f64 {
        let n = self.nodes.len();
        if y <= self.values[0] {
            return self.nodes[0] + (y - self.values[0]) / self.slopes[0].max(1e-300);
        }
        if y >= self.values[n - 1] {
            return self.nodes[n - 1] + (y - self.values[n - 1]) / self.slopes[n - 1].max(1e-300);
        }
        let i = self.values.partition_point(|&v| v <= y).clamp(1, n - 1) - 1;
        let (mut lo, mut hi) = (self.nodes[i], self.nodes[i + 1]);
        let mut t = lo + (hi - lo) * (y - self.values[i]) / (self.values[i + 1] - self.values[i]);
        for _ in 0..100 {
            let f = self.forward(t) - y;
            if f == 0.0 {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let h = 1e-7 * (hi - lo).max(1e-9);
            let d = (self.forward(t + h) - self.forward(t - h)) / (2.0 * h);
            let newton = if d > 0.0 { t - f / d } else { f64::NAN };
            t = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo < 1e-15 * (1.0 + t.abs()) {
                break;
            }
        }
        t
    }
}
