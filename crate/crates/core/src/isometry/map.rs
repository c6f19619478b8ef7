use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::metric::MetricSource;
use crate::rnc::{BarycentricLocation, ChartLocation, FanId, NormalChart};

/// Finite-difference step for the Jacobian in [`isometry_residual`].
pub const JACOBIAN_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Weak space to normal space.
    Simulation,
    /// Normal space to weak space.
    Compensation,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Direction::Simulation => Direction::Compensation,
            Direction::Compensation => Direction::Simulation,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Direction::Simulation => 0,
            Direction::Compensation => 1,
        }
    }

    pub fn from_tag(t: u8) -> Option<Self> {
        match t {
            0 => Some(Direction::Simulation),
            1 => Some(Direction::Compensation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mapped<const D: usize> {
    pub point: Vector<D>,
    /// Radial coordinate exceeded the target extent and was shrunk.
    pub clamped: bool,
    /// Input was uncovered and replaced by the nearest covered point.
    pub fallback: bool,
}

/// Point correspondence through matching normal coordinates of two charts.
#[derive(Debug, Clone)]
pub struct IsometryMap<const D: usize> {
    source: Arc<NormalChart<D>>,
    target: Arc<NormalChart<D>>,
    direction: Direction,
}

pub fn compose_isometry<const D: usize>(
    source: Arc<NormalChart<D>>,
    target: Arc<NormalChart<D>>,
    direction: Direction,
) -> Result<IsometryMap<D>> {
    if !source.main().same_lattice(target.main()) {
        return Err(Error::ChartMismatch(format!(
            "charts use different lattices ({:?}, spacing {} vs {:?}, spacing {})",
            source.layout(),
            source.config().radial_spacing,
            target.layout(),
            target.config().radial_spacing
        )));
    }
    if source.patches().len() != target.patches().len() {
        return Err(Error::ChartMismatch(format!(
            "charts have {} and {} patches",
            source.patches().len(),
            target.patches().len()
        )));
    }
    for (i, (a, b)) in source.patches().iter().zip(target.patches()).enumerate() {
        if (a.xi0 - b.xi0).norm() > 1e-9 {
            return Err(Error::ChartMismatch(format!("patch {i} is rooted at different coordinates")));
        }
    }
    Ok(IsometryMap {
        source,
        target,
        direction,
    })
}

impl<const D: usize> IsometryMap<D> {
    pub fn source(&self) -> &Arc<NormalChart<D>> {
        &self.source
    }

    pub fn target(&self) -> &Arc<NormalChart<D>> {
        &self.target
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// The inverse map.
    pub fn reversed(&self) -> Self {
        Self {
            source: Arc::clone(&self.target),
            target: Arc::clone(&self.source),
            direction: self.direction.reversed(),
        }
    }

    fn map_location(&self, loc: &ChartLocation, snap: bool) -> Result<(Vector<D>, bool)> {
        if snap {
            let w = loc.location.weights;
            let k = (0..4).fold(0, |best, i| if w[i] > w[best] { i } else { best });
            let mut one = [0.0; 4];
            one[k] = 1.0;
            let snapped = ChartLocation {
                fan: loc.fan,
                location: BarycentricLocation {
                    weights: one,
                    ..loc.location
                },
            };
            return self.map_location(&snapped, false);
        }
        let src_fan = self
            .source
            .fan(loc.fan)
            .ok_or_else(|| Error::ChartMismatch("missing source fan".into()))?;
        let dst_fan = self
            .target
            .fan(loc.fan)
            .ok_or_else(|| Error::ChartMismatch("missing target fan".into()))?;
        let key = src_fan.cell_key(loc.location.cell);
        if let Some(c) = dst_fan.cell_by_key(&key) {
            let target_loc = dst_fan.location_in(c, loc.location.weights);
            return Ok((dst_fan.position_of(&target_loc), false));
        }
        self.target.from_normal_coords_clamped(&self.source.coords_at(loc))
    }

    pub fn apply(&self, x: &Vector<D>) -> Result<Mapped<D>> {
        self.apply_with(x, false, false)
    }

    /// Like [`apply`](Self::apply), but uncovered inputs use the nearest
    /// covered source point.
    pub fn apply_or_nearest(&self, x: &Vector<D>) -> Result<Mapped<D>> {
        self.apply_with(x, false, true)
    }

    /// `snap` replaces the barycentric combination by the vertex carrying
    /// the largest weight; `nearest` enables the uncovered-point fallback.
    pub fn apply_with(&self, x: &Vector<D>, snap: bool, nearest: bool) -> Result<Mapped<D>> {
        let (loc, fallback) = match self.source.locate(x) {
            Ok(loc) => (loc, false),
            Err(Error::Uncovered { .. }) if nearest => {
                let (loc, _) = self
                    .source
                    .locate_nearest(x)
                    .ok_or_else(|| Error::Invalid("source chart has no cells".into()))?;
                (loc, true)
            }
            Err(e) => return Err(e),
        };
        let (point, clamped) = self.map_location(&loc, snap)?;
        Ok(Mapped {
            point,
            clamped,
            fallback,
        })
    }

    /// Which fan of the source chart answers for `x`.
    pub fn source_fan(&self, x: &Vector<D>) -> Result<FanId> {
        Ok(self.source.locate(x)?.fan)
    }
}

/// Frobenius norm of `G_src(x) − D_fᵀ G_dst(f(x)) D_f`, with `D_f` from
/// central differences of the map.
pub fn isometry_residual<const D: usize, A, B>(
    map: &IsometryMap<D>,
    field_src: &A,
    field_dst: &B,
    x: &Vector<D>,
) -> Result<f64>
where
    A: MetricSource<D> + ?Sized,
    B: MetricSource<D> + ?Sized,
{
    let exact = |p: &Vector<D>| -> Result<Vector<D>> {
        let m = map.apply(p).map_err(|_| {
            Error::Invalid("point too close to the coverage boundary for the difference stencil".into())
        })?;
        if m.clamped {
            return Err(Error::Invalid(
                "point too close to the target extent for the difference stencil".into(),
            ));
        }
        Ok(m.point)
    };
    let fx = exact(x)?;
    let mut jac = Matrix::<D>::zeros();
    for a in 0..D {
        let mut e = Vector::<D>::zeros();
        e[a] = JACOBIAN_STEP;
        let col = (exact(&(x + e))? - exact(&(x - e))?) / (2.0 * JACOBIAN_STEP);
        jac.set_column(a, &col);
    }
    let pulled = jac.transpose() * field_dst.metric(&fx) * jac;
    Ok((field_src.metric(x) - pulled).norm())
}
