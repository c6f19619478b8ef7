//! A single fan of geodesics from one origin and its cell complex.
//!
//! Nodes are labelled by Cartesian normal coordinates `ξ = s · d`, where `d`
//! is the ray's unit direction in the G-orthonormal frame. Cells come from a
//! Kuhn triangulation of the (angles…, radius) index lattice, so two fans
//! with the same layout share cell keys and parameter-space cells.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{integrate_geodesic_within, GeodesicOptions, Termination};
use crate::linalg::{Matrix, Vector};
use crate::metric::MetricSource;

use super::mesh::{signed_volume, BarycentricLocation, CellVertices, SimplexMesh};

/// Cells whose longest edge exceeds this multiple of the median edge count
/// as sparse and route lookups to a patch when one covers the point.
pub const SPARSE_EDGE_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Layout {
    /// `n_angles` rays at equal angles in the plane.
    Fan { n_angles: usize },
    /// Polar/azimuth lattice; polar angles span `[0, π]` including both poles.
    Bundle { n_polar: usize, n_azimuth: usize },
}

impl Layout {
    pub fn dimension(&self) -> usize {
        match self {
            Layout::Fan { .. } => 2,
            Layout::Bundle { .. } => 3,
        }
    }

    pub fn ray_count(&self) -> usize {
        match *self {
            Layout::Fan { n_angles } => n_angles,
            Layout::Bundle { n_polar, n_azimuth } => n_polar * n_azimuth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Layout::Fan { n_angles } if n_angles < 3 => {
                Err(Error::Config(format!("need at least 3 angles, got {n_angles}")))
            }
            Layout::Bundle { n_polar, n_azimuth } if n_polar < 3 || n_azimuth < 3 => Err(Error::Config(
                format!("need at least 3 polar and 3 azimuth samples, got {n_polar}x{n_azimuth}"),
            )),
            _ => Ok(()),
        }
    }

    /// Angular lattice index of ray `r`.
    pub fn angular_index(&self, r: usize) -> [usize; 2] {
        match *self {
            Layout::Fan { .. } => [r, 0],
            Layout::Bundle { n_azimuth, .. } => [r / n_azimuth, r % n_azimuth],
        }
    }

    /// Angles of ray `r` in radians: `[θ]` or `[polar, azimuth]`.
    pub fn angles(&self, r: usize) -> Vec<f64> {
        let ang = self.angular_index(r);
        match *self {
            Layout::Fan { n_angles } => vec![2.0 * PI * ang[0] as f64 / n_angles as f64],
            Layout::Bundle { n_polar, n_azimuth } => vec![
                PI * ang[0] as f64 / (n_polar - 1) as f64,
                2.0 * PI * ang[1] as f64 / n_azimuth as f64,
            ],
        }
    }

    /// Unit direction of ray `r` in frame coordinates.
    pub fn direction<const D: usize>(&self, r: usize) -> Vector<D> {
        let a = self.angles(r);
        let ang = self.angular_index(r);
        let full: [f64; 3] = match *self {
            Layout::Fan { .. } => [a[0].cos(), a[0].sin(), 0.0],
            Layout::Bundle { n_polar, .. } => {
                if ang[0] == 0 {
                    [1.0, 0.0, 0.0]
                } else if ang[0] == n_polar - 1 {
                    [-1.0, 0.0, 0.0]
                } else {
                    let (sp, cp) = a[0].sin_cos();
                    let (sa, ca) = a[1].sin_cos();
                    [cp, sp * ca, sp * sa]
                }
            }
        };
        Vector::<D>::from_fn(|i, _| full[i])
    }

    /// Angular lattice axes as `(points, wraps)`.
    fn axes(&self) -> Vec<(usize, bool)> {
        match *self {
            Layout::Fan { n_angles } => vec![(n_angles, true)],
            Layout::Bundle { n_polar, n_azimuth } => vec![(n_polar, false), (n_azimuth, true)],
        }
    }

    /// Canonical angular index: pole rays collapse onto azimuth 0.
    fn canonical(&self, ang: [usize; 2]) -> [usize; 2] {
        match *self {
            Layout::Bundle { n_polar, .. } if ang[0] == 0 || ang[0] == n_polar - 1 => [ang[0], 0],
            _ => ang,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartConfig {
    /// Arc-length spacing of nodes along each geodesic.
    pub radial_spacing: f64,
    /// RK4 step.
    pub step: f64,
    /// Upper bound on geodesic length.
    pub max_length: f64,
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            radial_spacing: 1.0,
            step: 0.5,
            max_length: 400.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ray<const D: usize> {
    /// Node positions at `s = k · spacing`; `nodes[0]` is the origin.
    pub nodes: Vec<Vector<D>>,
    pub end_s: f64,
    pub termination: Termination,
}

/// Structural cell identity shared by all fans with the same layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub angular: [u16; 2],
    pub ring: u32,
    pub part: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeInfo {
    pub ray: usize,
    pub k: usize,
}

pub type RegionFn<'a, const D: usize> = &'a (dyn Fn(&Vector<D>) -> bool + Sync);

#[derive(Debug, Clone)]
pub struct Fan<const D: usize> {
    origin: Vector<D>,
    frame: Matrix<D>,
    layout: Layout,
    config: ChartConfig,
    rays: Vec<Ray<D>>,
    nodes: Vec<NodeInfo>,
    positions: Vec<Vector<D>>,
    xis: Vec<Vector<D>>,
    cell_keys: Vec<CellKey>,
    cell_lookup: HashMap<CellKey, usize>,
    physical: SimplexMesh<D>,
    parameter: SimplexMesh<D>,
    sparse: Vec<bool>,
    inverted: usize,
    median_edge: f64,
}

fn permutations(d: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, d: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == d {
            out.push(prefix.clone());
            return;
        }
        for a in 0..d {
            if !prefix.contains(&a) {
                prefix.push(a);
                rec(prefix, d, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), d, &mut out);
    out
}

impl<const D: usize> Fan<D> {
    /// Integrate every ray of `layout` from `origin`, using the columns of
    /// `frame` (G-orthonormal at the origin) as the tangent basis.
    pub fn build<M: MetricSource<D> + ?Sized>(
        field: &M,
        origin: Vector<D>,
        frame: Matrix<D>,
        layout: Layout,
        config: ChartConfig,
        region: RegionFn<'_, D>,
    ) -> Result<Self> {
        layout.validate()?;
        if layout.dimension() != D {
            return Err(Error::Config(format!("layout is {}D, chart is {D}D", layout.dimension())));
        }
        if !field.contains(&origin) {
            return Err(Error::OutsideDomain);
        }
        if !region(&origin) {
            return Err(Error::Invalid("chart origin lies outside the region".into()));
        }
        let opts = GeodesicOptions {
            max_length: config.max_length,
            step: config.step,
            node_spacing: config.radial_spacing,
        };
        let rays = (0..layout.ray_count())
            .into_par_iter()
            .map(|r| {
                let tangent = frame * layout.direction::<D>(r);
                let geo = integrate_geodesic_within(field, &origin, &tangent, &opts, region)?;
                Ok(Ray {
                    nodes: geo.positions(),
                    end_s: geo.end.s,
                    termination: geo.termination,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(origin, frame, layout, config, rays))
    }

    /// Derive nodes, cells and search structures from integrated rays.
    pub fn assemble(
        origin: Vector<D>,
        frame: Matrix<D>,
        layout: Layout,
        config: ChartConfig,
        rays: Vec<Ray<D>>,
    ) -> Self {
        let spacing = config.radial_spacing;
        let mut node_ids: HashMap<([usize; 2], usize), u32> = HashMap::new();
        let mut nodes = vec![NodeInfo { ray: 0, k: 0 }];
        let mut positions = vec![origin];
        let mut xis = vec![Vector::<D>::zeros()];
        node_ids.insert(([0, 0], 0), 0);
        for (r, ray) in rays.iter().enumerate() {
            let ang = layout.angular_index(r);
            if layout.canonical(ang) != ang {
                continue;
            }
            let dir = layout.direction::<D>(r);
            for (k, p) in ray.nodes.iter().enumerate().skip(1) {
                node_ids.insert((ang, k), nodes.len() as u32);
                nodes.push(NodeInfo { ray: r, k });
                positions.push(*p);
                xis.push(dir * (k as f64 * spacing));
            }
        }
        let node_id = |ang: [usize; 2], k: usize| -> Option<u32> {
            if k == 0 {
                return Some(0);
            }
            node_ids.get(&(layout.canonical(ang), k)).copied()
        };

        let axes = layout.axes();
        let max_k = rays.iter().map(|r| r.nodes.len()).max().unwrap_or(1);
        let perms = permutations(D);
        let cell_ranges: Vec<usize> = axes
            .iter()
            .map(|&(n, wrap)| if wrap { n } else { n - 1 })
            .collect();
        let param_scale = spacing.powi(D as i32);
        let mut cells: Vec<CellVertices> = Vec::new();
        let mut cell_keys = Vec::new();
        let mut inverted = 0usize;
        let angular_cells: usize = cell_ranges.iter().product();
        for flat in 0..angular_cells {
            let mut base_ang = [0usize; 2];
            let mut rem = flat;
            for a in (0..axes.len()).rev() {
                base_ang[a] = rem % cell_ranges[a];
                rem /= cell_ranges[a];
            }
            for ring in 0..max_k.saturating_sub(1) {
                for (part, perm) in perms.iter().enumerate() {
                    let mut corner = [base_ang[0], base_ang[1], ring];
                    let mut ids = [0u32; 4];
                    let mut ok = true;
                    for m in 0..=D {
                        if m > 0 {
                            let axis = perm[m - 1];
                            if axis == D - 1 {
                                corner[2] += 1;
                            } else {
                                let (n, wrap) = axes[axis];
                                corner[axis] += 1;
                                if wrap {
                                    corner[axis] %= n;
                                }
                            }
                        }
                        match node_id([corner[0], corner[1]], corner[2]) {
                            Some(id) => ids[m] = id,
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if !ok || (0..=D).any(|i| (0..i).any(|j| ids[i] == ids[j])) {
                        continue;
                    }
                    let param: Vec<Vector<D>> = ids[..=D].iter().map(|&i| xis[i as usize]).collect();
                    let vol = signed_volume(&param);
                    if vol.abs() <= 1e-9 * param_scale {
                        continue;
                    }
                    if vol < 0.0 {
                        ids.swap(1, 2);
                    }
                    let phys: Vec<Vector<D>> = ids[..=D].iter().map(|&i| positions[i as usize]).collect();
                    let edge_scale = (1..=D)
                        .map(|i| (phys[i] - phys[0]).norm())
                        .fold(0.0, f64::max)
                        .max(1e-300);
                    if signed_volume(&phys) <= 1e-12 * edge_scale.powi(D as i32) {
                        inverted += 1;
                        continue;
                    }
                    cells.push(ids);
                    cell_keys.push(CellKey {
                        angular: [base_ang[0] as u16, base_ang[1] as u16],
                        ring: ring as u32,
                        part: part as u8,
                    });
                }
            }
        }

        let mut edges: Vec<f64> = Vec::with_capacity(cells.len() * 6);
        let mut max_edges = Vec::with_capacity(cells.len());
        for c in &cells {
            let mut longest: f64 = 0.0;
            for i in 0..=D {
                for j in 0..i {
                    let e = (positions[c[i] as usize] - positions[c[j] as usize]).norm();
                    edges.push(e);
                    longest = longest.max(e);
                }
            }
            max_edges.push(longest);
        }
        let median_edge = if edges.is_empty() {
            0.0
        } else {
            let mid = edges.len() / 2;
            *edges.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        let sparse = max_edges
            .iter()
            .map(|&e| e > SPARSE_EDGE_FACTOR * median_edge)
            .collect();
        let cell_lookup = cell_keys.iter().enumerate().map(|(i, k)| (*k, i)).collect();
        let physical = SimplexMesh::new(&positions, cells.clone());
        let parameter = SimplexMesh::new(&xis, cells);
        Self {
            origin,
            frame,
            layout,
            config,
            rays,
            nodes,
            positions,
            xis,
            cell_keys,
            cell_lookup,
            physical,
            parameter,
            sparse,
            inverted,
            median_edge,
        }
    }

    pub fn origin(&self) -> &Vector<D> {
        &self.origin
    }

    pub fn frame(&self) -> &Matrix<D> {
        &self.frame
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn config(&self) -> &ChartConfig {
        &self.config
    }

    pub fn rays(&self) -> &[Ray<D>] {
        &self.rays
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: usize) -> NodeInfo {
        self.nodes[id]
    }

    pub fn positions(&self) -> &[Vector<D>] {
        &self.positions
    }

    pub fn xis(&self) -> &[Vector<D>] {
        &self.xis
    }

    pub fn cell_count(&self) -> usize {
        self.cell_keys.len()
    }

    pub fn cell_vertices(&self, c: usize) -> &CellVertices {
        self.physical.cell(c)
    }

    pub fn cell_key(&self, c: usize) -> CellKey {
        self.cell_keys[c]
    }

    pub fn cell_by_key(&self, key: &CellKey) -> Option<usize> {
        self.cell_lookup.get(key).copied()
    }

    pub fn is_sparse(&self, c: usize) -> bool {
        self.sparse[c]
    }

    /// Cells dropped because their physical orientation flipped.
    pub fn inverted_cells(&self) -> usize {
        self.inverted
    }

    pub fn median_edge(&self) -> f64 {
        self.median_edge
    }

    pub fn locate(&self, x: &Vector<D>) -> Option<BarycentricLocation> {
        self.physical.locate(&self.positions, x)
    }

    pub fn locate_xi(&self, xi: &Vector<D>) -> Option<BarycentricLocation> {
        self.parameter.locate(&self.xis, xi)
    }

    pub fn nearest(&self, x: &Vector<D>) -> Option<(usize, Vector<D>, f64)> {
        self.physical.nearest(&self.positions, x)
    }

    /// Closest covered point to `x` as a location, with its distance.
    pub fn project(&self, x: &Vector<D>) -> Option<(BarycentricLocation, f64)> {
        let (c, p, d) = self.nearest(x)?;
        let mut w = self.physical.barycentric(&self.positions, c, &p);
        let mut sum = 0.0;
        for wk in w.iter_mut().take(D + 1) {
            *wk = wk.max(0.0);
            sum += *wk;
        }
        for wk in w.iter_mut().take(D + 1) {
            *wk /= sum;
        }
        Some((self.location_in(c, w), d))
    }

    pub fn xi_of(&self, loc: &BarycentricLocation) -> Vector<D> {
        loc.combine(&self.xis)
    }

    pub fn position_of(&self, loc: &BarycentricLocation) -> Vector<D> {
        loc.combine(&self.positions)
    }

    /// Barycentric location with `weights` in cell `c`.
    pub fn location_in(&self, c: usize, weights: [f64; 4]) -> BarycentricLocation {
        BarycentricLocation {
            cell: c,
            vertices: *self.physical.cell(c),
            weights,
        }
    }

    /// Position at normal coordinates `xi`, or `None` beyond the extent.
    pub fn position_at(&self, xi: &Vector<D>) -> Option<Vector<D>> {
        self.locate_xi(xi).map(|loc| self.position_of(&loc))
    }

    /// Shrink `xi` radially onto the covered part of the parameter mesh.
    pub fn clamp_xi(&self, xi: &Vector<D>) -> Vector<D> {
        if self.locate_xi(xi).is_some() {
            return *xi;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.locate_xi(&(xi * mid)).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        xi * lo
    }

    /// True when both fans were built with the same lattice.
    pub fn same_lattice(&self, other: &Fan<D>) -> bool {
        self.layout == other.layout && self.config.radial_spacing == other.config.radial_spacing
    }

    /// Arc length of the last node on ray `r`.
    pub fn extent_along(&self, r: usize) -> f64 {
        (self.rays[r].nodes.len() - 1) as f64 * self.config.radial_spacing
    }
}

/// G-orthonormal frame from one (2D) or two (3D) seed vectors, completed
/// to a positively oriented basis.
pub fn orthonormal_frame<const D: usize>(g: &Matrix<D>, seeds: &[Vector<D>]) -> Result<Matrix<D>> {
    let ginv = crate::linalg::spd_inverse(g)?;
    let inner = |a: &Vector<D>, b: &Vector<D>| (a.transpose() * g * b)[(0, 0)];
    let mut basis: Vec<Vector<D>> = Vec::with_capacity(D);
    for s in seeds.iter().take(D - 1) {
        let mut v = *s;
        let scale = inner(&v, &v).sqrt();
        for b in &basis {
            v -= *b * inner(b, &v);
        }
        let n = inner(&v, &v).sqrt();
        if !(n > 1e-9 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Degenerate("frame vectors are collinear".into()));
        }
        basis.push(v / n);
    }
    if basis.len() != D - 1 {
        return Err(Error::Invalid(format!("need {} frame vectors", D - 1)));
    }
    // normal covector of the span, raised with G⁻¹ so it is G-orthogonal
    let normal: Vector<D> = match D {
        2 => Vector::<D>::from_fn(|i, _| if i == 0 { -basis[0][1] } else { basis[0][0] }),
        3 => {
            let a = &basis[0];
            let b = &basis[1];
            let c = [
                a[1] * b[2] - a[2] * b[1],
                a[2] * b[0] - a[0] * b[2],
                a[0] * b[1] - a[1] * b[0],
            ];
            Vector::<D>::from_fn(|i, _| c[i])
        }
        _ => return Err(Error::Invalid("frames exist for 2D and 3D only".into())),
    };
    let last = ginv * normal;
    let n = inner(&last, &last).sqrt();
    basis.push(last / n);
    Ok(Matrix::<D>::from_columns(&basis))
}
