//! Christoffel symbols, geodesic shooting and curve length.

use crate::error::{Error, Result};
use crate::linalg::{quadratic_form, spd_inverse, Matrix, Vector};
use crate::metric::MetricSource;

pub const DEFAULT_STEP: f64 = 0.5;
pub const DEFAULT_NODE_SPACING: f64 = 1.0;

/// `gamma[i][j][k]` is Γ^i_{jk}, symmetric in `j, k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel<const D: usize> {
    pub gamma: [[[f64; D]; D]; D],
}

impl<const D: usize> Christoffel<D> {
    /// `a^i = Γ^i_{jk} v^j v^k`.
    pub fn contract(&self, v: &Vector<D>) -> Vector<D> {
        Vector::<D>::from_fn(|i, _| {
            let mut acc = 0.0;
            for j in 0..D {
                for k in 0..D {
                    acc += self.gamma[i][j][k] * v[j] * v[k];
                }
            }
            acc
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.gamma
            .iter()
            .flatten()
            .flatten()
            .fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `∂_a G` at `x` by second-order differences; one-sided near the box edge.
fn metric_derivatives<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    x: &Vector<D>,
) -> [Matrix<D>; D] {
    let h = field.derivative_step();
    let b = field.bounds();
    std::array::from_fn(|a| {
        let mut e = Vector::<D>::zeros();
        e[a] = h;
        let fwd_ok = x[a] + h <= b.max[a];
        let bwd_ok = x[a] - h >= b.min[a];
        match (fwd_ok, bwd_ok) {
            (true, true) | (false, false) => {
                (field.metric(&(x + e)) - field.metric(&(x - e))) / (2.0 * h)
            }
            (true, false) => {
                (field.metric(&(x + e)) * 4.0 - field.metric(&(x + 2.0 * e)) - field.metric(x) * 3.0)
                    / (2.0 * h)
            }
            (false, true) => {
                (field.metric(x) * 3.0 - field.metric(&(x - e)) * 4.0 + field.metric(&(x - 2.0 * e)))
                    / (2.0 * h)
            }
        }
    })
}

fn christoffel_unchecked<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    x: &Vector<D>,
) -> Result<Christoffel<D>> {
    let ginv = spd_inverse(&field.metric(x))?;
    let dg = metric_derivatives(field, x);
    // first kind: [a; j k] = ½ (∂_k g_aj + ∂_j g_ak − ∂_a g_jk)
    let mut first = [[[0.0; D]; D]; D];
    for (a, fa) in first.iter_mut().enumerate() {
        for j in 0..D {
            for k in j..D {
                let v = 0.5 * (dg[k][(a, j)] + dg[j][(a, k)] - dg[a][(j, k)]);
                fa[j][k] = v;
                fa[k][j] = v;
            }
        }
    }
    let mut gamma = [[[0.0; D]; D]; D];
    for (i, gi) in gamma.iter_mut().enumerate() {
        for j in 0..D {
            for k in j..D {
                let v: f64 = (0..D).map(|a| ginv[(i, a)] * first[a][j][k]).sum();
                gi[j][k] = v;
                gi[k][j] = v;
            }
        }
    }
    Ok(Christoffel { gamma })
}

pub fn christoffel_at<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    x: &Vector<D>,
) -> Result<Christoffel<D>> {
    if !field.contains(x) {
        return Err(Error::OutsideDomain);
    }
    christoffel_unchecked(field, x)
}

/// `v / sqrt(vᵀ G v)`.
pub fn unit_normalize<const D: usize>(g: &Matrix<D>, v: &Vector<D>) -> Result<Vector<D>> {
    let q = quadratic_form(g, v);
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(v / q.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicNode<const D: usize> {
    pub position: Vector<D>,
    pub s: f64,
    pub velocity: Vector<D>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// Reached the requested arc length.
    Length,
    /// The next step would have left the metric domain.
    Domain,
    /// The next step would have left the caller's region (the gamut).
    Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Geodesic<const D: usize> {
    /// Nodes at `s = 0, Δs, 2Δs, …`, all inside the region.
    pub nodes: Vec<GeodesicNode<D>>,
    /// Last integrated state (may lie between nodes).
    pub end: GeodesicNode<D>,
    pub initial_direction: Vector<D>,
    pub termination: Termination,
}

impl<const D: usize> Geodesic<D> {
    pub fn positions(&self) -> Vec<Vector<D>> {
        self.nodes.iter().map(|n| n.position).collect()
    }

    pub fn final_s(&self) -> f64 {
        self.end.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicOptions {
    pub max_length: f64,
    pub step: f64,
    pub node_spacing: f64,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            max_length: 400.0,
            step: DEFAULT_STEP,
            node_spacing: DEFAULT_NODE_SPACING,
        }
    }
}

fn acceleration<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    x: &Vector<D>,
    v: &Vector<D>,
) -> Result<Vector<D>> {
    let xc = field.bounds().clamp(x);
    Ok(-christoffel_unchecked(field, &xc)?.contract(v))
}

fn rk4_step<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    x: &Vector<D>,
    v: &Vector<D>,
    h: f64,
) -> Result<(Vector<D>, Vector<D>)> {
    let k1x = *v;
    let k1v = acceleration(field, x, v)?;
    let x2 = x + k1x * (h / 2.0);
    let v2 = v + k1v * (h / 2.0);
    let k2v = acceleration(field, &x2, &v2)?;
    let x3 = x + v2 * (h / 2.0);
    let v3 = v + k2v * (h / 2.0);
    let k3v = acceleration(field, &x3, &v3)?;
    let x4 = x + v3 * h;
    let v4 = v + k3v * h;
    let k4v = acceleration(field, &x4, &v4)?;
    let xn = x + (k1x + v2 * 2.0 + v3 * 2.0 + v4) * (h / 6.0);
    let vn = v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
    Ok((xn, vn))
}

/// Shoot a unit-speed geodesic until `max_length` or the domain boundary.
pub fn integrate_geodesic<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    origin: &Vector<D>,
    direction: &Vector<D>,
    max_length: f64,
    step: f64,
) -> Result<Geodesic<D>> {
    let opts = GeodesicOptions {
        max_length,
        step,
        node_spacing: DEFAULT_NODE_SPACING,
    };
    integrate_geodesic_within(field, origin, direction, &opts, |_| true)
}

/// As [`integrate_geodesic`], additionally stopping before the path leaves
/// the region described by `inside`.
pub fn integrate_geodesic_within<const D: usize, M, F>(
    field: &M,
    origin: &Vector<D>,
    direction: &Vector<D>,
    opts: &GeodesicOptions,
    inside: F,
) -> Result<Geodesic<D>>
where
    M: MetricSource<D> + ?Sized,
    F: Fn(&Vector<D>) -> bool,
{
    if !(opts.step > 0.0) || !opts.step.is_finite() {
        return Err(Error::Config(format!("step must be positive, got {}", opts.step)));
    }
    if !(opts.node_spacing > 0.0) {
        return Err(Error::Config("node spacing must be positive".into()));
    }
    if !field.contains(origin) {
        return Err(Error::OutsideDomain);
    }
    let g0 = field.metric(origin);
    let v0 = unit_normalize(&g0, direction)?;
    let per_node = (opts.node_spacing / opts.step - 1e-9).ceil().max(1.0);
    let h = opts.node_spacing / per_node;

    let first = GeodesicNode {
        position: *origin,
        s: 0.0,
        velocity: v0,
    };
    let mut nodes = vec![first];
    let mut x = *origin;
    let mut v = v0;
    let mut s = 0.0;
    let mut termination = Termination::Length;
    let region_ok = inside(origin);
    if !region_ok {
        termination = Termination::Region;
    }
    while region_ok && s < opts.max_length - 1e-12 {
        let node_target = nodes.len() as f64 * opts.node_spacing;
        let mut h_eff = h.min(opts.max_length - s);
        if node_target - s <= h_eff + 1e-9 {
            h_eff = node_target - s;
        }
        let (xn, vn) = rk4_step(field, &x, &v, h_eff)?;
        if !xn.iter().all(|c| c.is_finite()) || !vn.iter().all(|c| c.is_finite()) {
            termination = Termination::Domain;
            break;
        }
        if !field.contains(&xn) {
            termination = Termination::Domain;
            break;
        }
        if !inside(&xn) {
            termination = Termination::Region;
            break;
        }
        x = xn;
        v = vn;
        s += h_eff;
        if (s - node_target).abs() < 1e-9 {
            s = node_target;
            nodes.push(GeodesicNode {
                position: x,
                s,
                velocity: v,
            });
        }
    }
    Ok(Geodesic {
        nodes,
        end: GeodesicNode {
            position: x,
            s,
            velocity: v,
        },
        initial_direction: v0,
        termination,
    })
}

/// Midpoint-rule length `Σ sqrt(Δxᵀ G(mid) Δx)` of a polyline.
pub fn geodesic_length<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    polyline: &[Vector<D>],
) -> Result<f64> {
    if polyline.len() < 2 {
        return Err(Error::Invalid("a polyline needs at least 2 points".into()));
    }
    Ok(polyline
        .windows(2)
        .map(|w| {
            let d = w[1] - w[0];
            let mid = (w[0] + w[1]) * 0.5;
            quadratic_form(&field.metric(&mid), &d).max(0.0).sqrt()
        })
        .sum())
}

/// Length of the straight segment `a → b` split into `pieces` parts.
pub fn segment_length<const D: usize, M: MetricSource<D> + ?Sized>(
    field: &M,
    a: &Vector<D>,
    b: &Vector<D>,
    pieces: usize,
) -> f64 {
    let n = pieces.max(1);
    let pts: Vec<Vector<D>> = (0..=n).map(|k| a + (b - a) * (k as f64 / n as f64)).collect();
    geodesic_length(field, &pts).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{AnalyticMetric, Bounds};

    fn hyperbolic() -> AnalyticMetric<2, impl Fn(&Vector<2>) -> Matrix<2> + Sync> {
        AnalyticMetric::new(
            Bounds::from_arrays([-10.0, 0.05], [10.0, 50.0]),
            1e-4,
            |x: &Vector<2>| Matrix::<2>::identity() / (x[1] * x[1]),
        )
    }

    fn flat<const D: usize>(scale: f64) -> AnalyticMetric<D, impl Fn(&Vector<D>) -> Matrix<D> + Sync> {
        AnalyticMetric::new(
            Bounds::new(Vector::<D>::from_element(-100.0), Vector::<D>::from_element(100.0)),
            0.1,
            move |_: &Vector<D>| Matrix::<D>::identity() * scale,
        )
    }

    #[test]
    fn constant_field_has_no_christoffels() {
        let c = christoffel_at(&flat::<3>(2.0), &Vector::<3>::new(1.0, 2.0, 3.0)).unwrap();
        assert!(c.max_abs() < 1e-8);
    }

    #[test]
    fn hyperbolic_christoffels() {
        let c = christoffel_at(&hyperbolic(), &Vector::<2>::new(0.3, 1.0)).unwrap();
        let g = c.gamma;
        assert!((g[0][0][1] + 1.0).abs() < 1e-4);
        assert!((g[0][1][0] + 1.0).abs() < 1e-4);
        assert!((g[1][0][0] - 1.0).abs() < 1e-4);
        assert!((g[1][1][1] + 1.0).abs() < 1e-4);
        assert!(g[0][0][0].abs() < 1e-4 && g[0][1][1].abs() < 1e-4 && g[1][0][1].abs() < 1e-4);
    }

    #[test]
    fn conformal_exponential_christoffels() {
        // g = e^{2u} I: Γ^u_uu = 1, Γ^u_vv = -1, Γ^v_uv = 1
        let field = AnalyticMetric::new(
            Bounds::from_arrays([-3.0, -3.0], [3.0, 3.0]),
            1e-4,
            |x: &Vector<2>| Matrix::<2>::identity() * (2.0 * x[0]).exp(),
        );
        let c = christoffel_at(&field, &Vector::<2>::new(0.7, -1.2)).unwrap().gamma;
        assert!((c[0][0][0] - 1.0).abs() < 1e-4);
        assert!((c[0][1][1] + 1.0).abs() < 1e-4);
        assert!((c[1][0][1] - 1.0).abs() < 1e-4);
        assert!(c[0][0][1].abs() < 1e-4 && c[1][0][0].abs() < 1e-4 && c[1][1][1].abs() < 1e-4);
    }

    #[test]
    fn outside_domain_is_an_error() {
        assert!(matches!(
            christoffel_at(&hyperbolic(), &Vector::<2>::new(0.0, -1.0)),
            Err(Error::OutsideDomain)
        ));
    }

    #[test]
    fn flat_geodesic_is_straight() {
        let d = Vector::<3>::new(1.0, -2.0, 0.5);
        let geo = integrate_geodesic(&flat::<3>(1.0), &Vector::<3>::zeros(), &d, 20.0, 0.5).unwrap();
        assert_eq!(geo.nodes.len(), 21);
        for n in &geo.nodes {
            assert!((n.position - d.normalize() * n.s).norm() < 1e-10);
        }
        assert_eq!(geo.termination, Termination::Length);
        assert!((geo.final_s() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_vertical_ray() {
        let geo = integrate_geodesic(
            &hyperbolic(),
            &Vector::<2>::new(0.0, 1.0),
            &Vector::<2>::new(0.0, 1.0),
            2.0,
            1e-3,
        )
        .unwrap();
        for n in &geo.nodes {
            assert!((n.position - Vector::<2>::new(0.0, n.s.exp())).norm() < 1e-6);
        }
    }

    #[test]
    fn hyperbolic_semicircle() {
        let geo = integrate_geodesic(
            &hyperbolic(),
            &Vector::<2>::new(0.0, 1.0),
            &Vector::<2>::new(1.0, 0.0),
            3.0,
            1e-2,
        )
        .unwrap();
        let field = hyperbolic();
        for n in &geo.nodes {
            assert!((n.position.norm() - 1.0).abs() < 1e-6, "{:?}", n.position);
            let speed = quadratic_form(&field.metric(&n.position), &n.velocity).sqrt();
            assert!((speed - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn stops_at_region_boundary() {
        let geo = integrate_geodesic_within(
            &flat::<2>(1.0),
            &Vector::<2>::zeros(),
            &Vector::<2>::new(1.0, 0.0),
            &GeodesicOptions::default(),
            |x| x[0] < 7.3,
        )
        .unwrap();
        assert_eq!(geo.termination, Termination::Region);
        assert_eq!(geo.nodes.len(), 8);
        assert!(geo.nodes.iter().all(|n| n.position[0] < 7.3));
    }

    #[test]
    fn rejects_bad_input() {
        let f = flat::<2>(1.0);
        assert!(integrate_geodesic(&f, &Vector::<2>::zeros(), &Vector::<2>::zeros(), 1.0, 0.5).is_err());
        assert!(integrate_geodesic(&f, &Vector::<2>::zeros(), &Vector::<2>::new(1.0, 0.0), 1.0, 0.0).is_err());
        assert!(matches!(
            integrate_geodesic(&f, &Vector::<2>::new(500.0, 0.0), &Vector::<2>::new(1.0, 0.0), 1.0, 0.5),
            Err(Error::OutsideDomain)
        ));
    }

    #[test]
    fn lengths() {
        let f = flat::<2>(1.0);
        let l = geodesic_length(&f, &[Vector::<2>::zeros(), Vector::<2>::new(3.0, 4.0)]).unwrap();
        assert!((l - 5.0).abs() < 1e-12);
        let f4 = flat::<2>(4.0);
        let l4 = geodesic_length(&f4, &[Vector::<2>::zeros(), Vector::<2>::new(3.0, 4.0)]).unwrap();
        assert!((l4 - 10.0).abs() < 1e-12);
        let hv = segment_length(&hyperbolic(), &Vector::<2>::new(0.0, 1.0), &Vector::<2>::new(0.0, std::f64::consts::E), 2000);
        assert!((hv - 1.0).abs() < 1e-4);
        assert!(geodesic_length(&f, &[Vector::<2>::zeros()]).is_err());
    }

    #[test]
    fn normalization() {
        let v = unit_normalize(&Matrix::<3>::identity(), &Vector::<3>::new(3.0, 4.0, 0.0)).unwrap();
        assert!((v - Vector::<3>::new(0.6, 0.8, 0.0)).norm() < 1e-15);
        let g = Matrix::<3>::from_diagonal(&Vector::<3>::new(4.0, 1.0, 1.0));
        let w = unit_normalize(&g, &Vector::<3>::new(1.0, 0.0, 0.0)).unwrap();
        assert!((w - Vector::<3>::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        assert!((unit_normalize(&g, &w).unwrap() - w).norm() < 1e-15);
        assert!(matches!(unit_normalize(&g, &Vector::<3>::zeros()), Err(Error::ZeroVector)));
    }
}
