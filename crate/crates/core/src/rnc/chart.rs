use std::f64::consts::PI;

use crate::colorspace::{Converter, LuvColor, INVARIANT_HUE_475NM};
use crate::error::{Error, Result};
use crate::geometry::{integrate_geodesic_within, GeodesicOptions, Termination};
use crate::linalg::{Matrix, Vector};
use crate::metric::MetricSource;

use super::fan::{orthonormal_frame, ChartConfig, Fan, Layout, RegionFn};
use super::mesh::BarycentricLocation;

pub const DEFAULT_ANGLES: usize = 36;
pub const DEFAULT_POLAR: usize = 13;
pub const DEFAULT_AZIMUTH: usize = 18;
pub const DEFAULT_ORIGIN_3D: [f64; 3] = [30.0, 0.0, 0.0];

/// Step used for the finite-difference Jacobi fields that orient a patch.
const JACOBI_STEP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FanId {
    Main,
    Patch(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartLocation {
    pub fan: FanId,
    pub location: BarycentricLocation,
}

/// Normal coordinates of a point. `xi` is expressed in the main chart's
/// frame; points resolved through a patch also carry the patch index and
/// the patch's own coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalCoords<const D: usize> {
    pub xi: Vector<D>,
    pub patch: Option<(usize, Vector<D>)>,
}

impl<const D: usize> NormalCoords<D> {
    pub fn main(xi: Vector<D>) -> Self {
        Self { xi, patch: None }
    }

    /// From `r` and angles: `[θ]` in 2D, `[polar, azimuth]` in 3D.
    pub fn from_polar(r: f64, angles: &[f64]) -> Result<Self> {
        let xi = match (D, angles.len()) {
            (2, 1) => Vector::<D>::from_fn(|i, _| r * if i == 0 { angles[0].cos() } else { angles[0].sin() }),
            (3, 2) => {
                let (sp, cp) = angles[0].sin_cos();
                let (sa, ca) = angles[1].sin_cos();
                let c = [cp, sp * ca, sp * sa];
                Vector::<D>::from_fn(|i, _| r * c[i])
            }
            _ => return Err(Error::Invalid(format!("{D}D coordinates need {} angles", D - 1))),
        };
        if !(r >= 0.0) {
            return Err(Error::Invalid("radius must be nonnegative".into()));
        }
        Ok(Self::main(xi))
    }

    /// Geodesic distance from the chart origin.
    pub fn r(&self) -> f64 {
        self.xi.norm()
    }

    /// `[θ ∈ [0, 2π)]` in 2D; `[polar ∈ [0, π], azimuth ∈ [0, 2π)]` in 3D.
    pub fn angles(&self) -> Vec<f64> {
        let wrap = |a: f64| if a < 0.0 { a + 2.0 * PI } else { a };
        match D {
            2 => vec![wrap(self.xi[1].atan2(self.xi[0]))],
            _ => {
                let r = self.r();
                let polar = if r > 0.0 { (self.xi[0] / r).clamp(-1.0, 1.0).acos() } else { 0.0 };
                vec![polar, wrap(self.xi[2].atan2(self.xi[1]))]
            }
        }
    }
}

/// Secondary fan rooted at main-chart coordinates `xi0`. Patch coordinates
/// `ξ'` relate to main coordinates by `ξ ≈ xi0 + rotation · ξ'`.
#[derive(Debug, Clone)]
pub struct Patch<const D: usize> {
    pub xi0: Vector<D>,
    pub rotation: Matrix<D>,
    pub fan: Fan<D>,
}

#[derive(Debug, Clone)]
pub struct NormalChart<const D: usize> {
    main: Fan<D>,
    patches: Vec<Patch<D>>,
}

impl<const D: usize> NormalChart<D> {
    pub fn from_parts(main: Fan<D>, patches: Vec<Patch<D>>) -> Self {
        Self { main, patches }
    }

    pub fn main(&self) -> &Fan<D> {
        &self.main
    }

    pub fn patches(&self) -> &[Patch<D>] {
        &self.patches
    }

    pub fn fan(&self, id: FanId) -> Option<&Fan<D>> {
        match id {
            FanId::Main => Some(&self.main),
            FanId::Patch(i) => self.patches.get(i).map(|p| &p.fan),
        }
    }

    pub fn origin(&self) -> &Vector<D> {
        self.main.origin()
    }

    pub fn layout(&self) -> Layout {
        self.main.layout()
    }

    pub fn config(&self) -> &ChartConfig {
        self.main.config()
    }

    /// Containing cell of `x`: the main fan first unless its cell there is
    /// sparse, then each patch in order.
    pub fn locate(&self, x: &Vector<D>) -> Result<ChartLocation> {
        let main = self.main.locate(x);
        if let Some(loc) = main {
            if !self.main.is_sparse(loc.cell) || self.patches.is_empty() {
                return Ok(ChartLocation { fan: FanId::Main, location: loc });
            }
        }
        for (i, p) in self.patches.iter().enumerate() {
            if let Some(loc) = p.fan.locate(x) {
                return Ok(ChartLocation {
                    fan: FanId::Patch(i),
                    location: loc,
                });
            }
        }
        if let Some(loc) = main {
            return Ok(ChartLocation { fan: FanId::Main, location: loc });
        }
        Err(match self.main.nearest(x) {
            Some((cell, _, distance)) => Error::Uncovered { nearest_cell: cell, distance },
            None => Error::Uncovered {
                nearest_cell: 0,
                distance: f64::INFINITY,
            },
        })
    }

    /// Location of the covered point closest to `x` and its distance.
    pub fn locate_nearest(&self, x: &Vector<D>) -> Option<(ChartLocation, f64)> {
        let mut best: Option<(ChartLocation, f64)> = None;
        let fans = std::iter::once((FanId::Main, &self.main))
            .chain(self.patches.iter().enumerate().map(|(i, p)| (FanId::Patch(i), &p.fan)));
        for (id, fan) in fans {
            if let Some((loc, d)) = fan.project(x) {
                if best.as_ref().is_none_or(|(_, bd)| d < *bd) {
                    best = Some((ChartLocation { fan: id, location: loc }, d));
                }
            }
        }
        best
    }

    pub fn coords_at(&self, loc: &ChartLocation) -> NormalCoords<D> {
        match loc.fan {
            FanId::Main => NormalCoords::main(self.main.xi_of(&loc.location)),
            FanId::Patch(i) => {
                let p = &self.patches[i];
                let local = p.fan.xi_of(&loc.location);
                NormalCoords {
                    xi: p.xi0 + p.rotation * local,
                    patch: Some((i, local)),
                }
            }
        }
    }

    pub fn to_normal_coords(&self, x: &Vector<D>) -> Result<NormalCoords<D>> {
        Ok(self.coords_at(&self.locate(x)?))
    }

    pub fn from_normal_coords(&self, nc: &NormalCoords<D>) -> Result<Vector<D>> {
        let (fan, xi) = self.resolve(nc)?;
        fan.position_at(&xi).ok_or(Error::OutsideExtent)
    }

    /// As [`from_normal_coords`](Self::from_normal_coords) but shrinking
    /// out-of-extent coordinates radially; the flag reports clamping.
    pub fn from_normal_coords_clamped(&self, nc: &NormalCoords<D>) -> Result<(Vector<D>, bool)> {
        let (fan, xi) = self.resolve(nc)?;
        if let Some(p) = fan.position_at(&xi) {
            return Ok((p, false));
        }
        let clamped = fan.clamp_xi(&xi);
        fan.position_at(&clamped)
            .map(|p| (p, true))
            .ok_or(Error::OutsideExtent)
    }

    fn resolve(&self, nc: &NormalCoords<D>) -> Result<(&Fan<D>, Vector<D>)> {
        match nc.patch {
            None => Ok((&self.main, nc.xi)),
            Some((i, local)) => self
                .patches
                .get(i)
                .map(|p| (&p.fan, local))
                .ok_or_else(|| Error::ChartMismatch(format!("chart has no patch {i}"))),
        }
    }

    /// Shoot the main geodesic with normal coordinates `xi`; returns the end
    /// point and velocity.
    fn exponential<M: MetricSource<D> + ?Sized>(
        &self,
        field: &M,
        region: RegionFn<'_, D>,
        xi: &Vector<D>,
    ) -> Result<(Vector<D>, Vector<D>)> {
        let len = xi.norm();
        let opts = GeodesicOptions {
            max_length: len,
            step: self.config().step,
            node_spacing: len,
        };
        let tangent = self.main.frame() * (xi / len);
        let geo = integrate_geodesic_within(field, self.main.origin(), &tangent, &opts, region)?;
        if geo.termination != Termination::Length {
            return Err(Error::Invalid(
                "patch origin is not reachable inside the chart region".into(),
            ));
        }
        Ok((geo.end.position, geo.end.velocity))
    }

    /// Add a secondary fan at the point with main normal coordinates `xi0`.
    pub fn add_patch_at<M: MetricSource<D> + ?Sized>(
        &mut self,
        field: &M,
        region: RegionFn<'_, D>,
        xi0: Vector<D>,
    ) -> Result<usize> {
        let len = xi0.norm();
        let (origin, frame, rotation) = if len < 1e-12 {
            (*self.main.origin(), *self.main.frame(), Matrix::<D>::identity())
        } else {
            let dir = xi0 / len;
            let perp = perpendicular(&dir);
            let mut cols = vec![dir, perp];
            if D == 3 {
                let w = Vector::<D>::from_fn(|i, _| {
                    let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                    dir[a] * perp[b] - dir[b] * perp[a]
                });
                cols.push(w);
            }
            let rotation = Matrix::<D>::from_columns(&cols[..D]);
            let (origin, velocity) = self.exponential(field, region, &xi0)?;
            let (plus, _) = self.exponential(field, region, &(xi0 + perp * JACOBI_STEP))?;
            let (minus, _) = self.exponential(field, region, &(xi0 - perp * JACOBI_STEP))?;
            let jacobi = (plus - minus) / (2.0 * JACOBI_STEP);
            let g = field.metric(&origin);
            let frame = orthonormal_frame(&g, &[velocity, jacobi])?;
            (origin, frame, rotation)
        };
        let fan = Fan::build(field, origin, frame, self.layout(), *self.config(), region)?;
        self.patches.push(Patch { xi0, rotation, fan });
        Ok(self.patches.len() - 1)
    }

    /// Add a secondary fan at a point already covered by the main fan.
    pub fn add_patch<M: MetricSource<D> + ?Sized>(
        &mut self,
        field: &M,
        region: RegionFn<'_, D>,
        second_origin: &Vector<D>,
    ) -> Result<usize> {
        let loc = self.main.locate(second_origin).ok_or_else(|| match self.main.nearest(second_origin) {
            Some((cell, _, distance)) => Error::Uncovered { nearest_cell: cell, distance },
            None => Error::OutsideExtent,
        })?;
        let xi0 = self.main.xi_of(&loc);
        self.add_patch_at(field, region, xi0)
    }
}

/// Unit vector orthogonal to unit `dir`: a quarter turn in 2D, otherwise the
/// least-aligned axis with `dir` removed.
fn perpendicular<const D: usize>(dir: &Vector<D>) -> Vector<D> {
    if D == 2 {
        return Vector::<D>::from_fn(|i, _| if i == 0 { -dir[1] } else { dir[0] });
    }
    let axis = (0..D)
        .min_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs()))
        .unwrap_or(0);
    let mut e = Vector::<D>::zeros();
    e[axis] = 1.0;
    (e - dir * dir[axis]).normalize()
}

pub fn build_chart_2d<M: MetricSource<2> + ?Sized>(
    field: &M,
    origin: Vector<2>,
    n_angles: usize,
    ref_direction: Vector<2>,
    config: &ChartConfig,
    region: RegionFn<'_, 2>,
) -> Result<NormalChart<2>> {
    let layout = Layout::Fan { n_angles };
    layout.validate()?;
    if !field.contains(&origin) {
        return Err(Error::OutsideDomain);
    }
    if ref_direction.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    let frame = orthonormal_frame(&field.metric(&origin), &[ref_direction])?;
    let main = Fan::build(field, origin, frame, layout, *config, region)?;
    Ok(NormalChart::from_parts(main, Vec::new()))
}

pub fn build_chart_3d<M: MetricSource<3> + ?Sized>(
    field: &M,
    origin: Vector<3>,
    n_polar: usize,
    n_azimuth: usize,
    frame: [Vector<3>; 2],
    config: &ChartConfig,
    region: RegionFn<'_, 3>,
) -> Result<NormalChart<3>> {
    let layout = Layout::Bundle { n_polar, n_azimuth };
    layout.validate()?;
    if !field.contains(&origin) {
        return Err(Error::OutsideDomain);
    }
    let basis = orthonormal_frame(&field.metric(&origin), &frame)?;
    let main = Fan::build(field, origin, basis, layout, *config, region)?;
    Ok(NormalChart::from_parts(main, Vec::new()))
}

/// Zero-angle reference of 2D charts: the 475 nm hue direction.
pub fn default_reference_2d() -> Vector<2> {
    Vector::<2>::from(INVARIANT_HUE_475NM)
}

/// 3D frame seeds: the lightness axis, then the 475 nm hue direction.
pub fn default_frame_3d() -> [Vector<3>; 2] {
    [
        Vector::<3>::new(1.0, 0.0, 0.0),
        Vector::<3>::new(0.0, INVARIANT_HUE_475NM[0], INVARIANT_HUE_475NM[1]),
    ]
}

/// Ratio of in-gamut node counts, weak over normal.
pub fn grid_point_ratio<const D: usize>(chart_w: &NormalChart<D>, chart_n: &NormalChart<D>) -> Result<f64> {
    if !chart_w.main.same_lattice(&chart_n.main) {
        return Err(Error::ChartMismatch(
            "charts differ in angular or radial resolution".into(),
        ));
    }
    Ok(chart_w.main.node_count() as f64 / chart_n.main.node_count() as f64)
}

/// sRGB gamut as a region of `(L*, u*, v*)` space.
pub fn gamut_region(conv: &Converter) -> impl Fn(&Vector<3>) -> bool + Sync + '_ {
    move |x| conv.in_gamut(LuvColor::from_vector(x))
}

/// sRGB gamut cut at lightness `l`, as a region of the `(u*, v*)` plane.
pub fn gamut_slice(conv: &Converter, l: f64) -> impl Fn(&Vector<2>) -> bool + Sync + '_ {
    move |x| conv.in_gamut(LuvColor::new(l, x[0], x[1]))
}
