//! The `MetricSource` abstraction: anything that yields an SPD metric tensor
//! at a point of a bounded coordinate box.

use crate::linalg::{Matrix, Vector};

/// Axis-aligned box in coordinate space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds<const D: usize> {
    pub min: Vector<D>,
    pub max: Vector<D>,
}

impl<const D: usize> Bounds<D> {
    pub fn new(min: Vector<D>, max: Vector<D>) -> Self {
        Self { min, max }
    }

    pub fn from_arrays(min: [f64; D], max: [f64; D]) -> Self {
        Self::new(Vector::<D>::from(min), Vector::<D>::from(max))
    }

    pub fn contains(&self, x: &Vector<D>) -> bool {
        (0..D).all(|i| x[i] >= self.min[i] && x[i] <= self.max[i])
    }

    pub fn clamp(&self, x: &Vector<D>) -> Vector<D> {
        Vector::<D>::from_fn(|i, _| x[i].clamp(self.min[i], self.max[i]))
    }

    pub fn extent(&self) -> Vector<D> {
        self.max - self.min
    }
}

pub trait MetricSource<const D: usize>: Sync {
    /// Symmetric positive-definite metric tensor at `x` (clamped to the
    /// domain when `x` lies outside).
    fn metric(&self, x: &Vector<D>) -> Matrix<D>;

    fn bounds(&self) -> Bounds<D>;

    /// Step used for central differences of the metric.
    fn derivative_step(&self) -> f64;

    fn contains(&self, x: &Vector<D>) -> bool {
        self.bounds().contains(x)
    }
}

impl<const D: usize, M: MetricSource<D> + ?Sized> MetricSource<D> for &M {
    fn metric(&self, x: &Vector<D>) -> Matrix<D> {
        (**self).metric(x)
    }
    fn bounds(&self) -> Bounds<D> {
        (**self).bounds()
    }
    fn derivative_step(&self) -> f64 {
        (**self).derivative_step()
    }
    fn contains(&self, x: &Vector<D>) -> bool {
        (**self).contains(x)
    }
}

/// A metric given in closed form, used for synthetic observers and oracles.
pub struct AnalyticMetric<const D: usize, F> {
    f: F,
    bounds: Bounds<D>,
    step: f64,
}

impl<const D: usize, F> AnalyticMetric<D, F>
where
    F: Fn(&Vector<D>) -> Matrix<D> + Sync,
{
    pub fn new(bounds: Bounds<D>, step: f64, f: F) -> Self {
        Self { f, bounds, step }
    }
}

impl<const D: usize, F> MetricSource<D> for AnalyticMetric<D, F>
where
    F: Fn(&Vector<D>) -> Matrix<D> + Sync,
{
    fn metric(&self, x: &Vector<D>) -> Matrix<D> {
        (self.f)(&self.bounds.clamp(x))
    }
    fn bounds(&self) -> Bounds<D> {
        self.bounds
    }
    fn derivative_step(&self) -> f64 {
        self.step
    }
}

/// Constant-lightness section of a 3D metric: the `(u*, v*)` block of
/// `G(l, u, v)`. This is the metric of the ellipse cut out of each
/// threshold ellipsoid by the plane `L* = l`.
pub struct ChromaSlice<M> {
    field: M,
    lightness: f64,
}

impl<M: MetricSource<3>> ChromaSlice<M> {
    pub fn new(field: M, lightness: f64) -> Self {
        Self { field, lightness }
    }

    pub fn lightness(&self) -> f64 {
        self.lightness
    }
}

impl<M: MetricSource<3>> MetricSource<2> for ChromaSlice<M> {
    fn metric(&self, x: &Vector<2>) -> Matrix<2> {
        let g = self
            .field
            .metric(&Vector::<3>::new(self.lightness, x[0], x[1]));
        Matrix::<2>::new(g[(1, 1)], g[(1, 2)], g[(2, 1)], g[(2, 2)])
    }

    fn bounds(&self) -> Bounds<2> {
        let b = self.field.bounds();
        Bounds::new(
            Vector::<2>::new(b.min[1], b.min[2]),
            Vector::<2>::new(b.max[1], b.max[2]),
        )
    }

    fn derivative_step(&self) -> f64 {
        self.field.derivative_step()
    }
}
