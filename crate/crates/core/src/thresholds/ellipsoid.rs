use nalgebra::{DMatrix, DVector};

use crate::colorspace::LuvColor;
use crate::error::{Error, Result};
use crate::linalg::{determinant, quadratic_form, spd_project, sym_len, sym_pairs, Matrix, Vector};

use super::measurement::MeasurementSet;

/// Discrimination threshold at `center`: the jnd boundary is `vᵀ G v = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid<const D: usize> {
    pub center: Vector<D>,
    pub metric: Matrix<D>,
}

impl<const D: usize> Ellipsoid<D> {
    /// Volume (area in 2D) up to the dimension's unit-ball constant.
    pub fn relative_volume(&self) -> f64 {
        determinant(&self.metric).powf(-0.5)
    }

    /// Residual `vᵀ G v − 1` of a deviation vector.
    pub fn residual(&self, v: &Vector<D>) -> f64 {
        quadratic_form(&self.metric, v) - 1.0
    }
}

impl Ellipsoid<3> {
    pub fn luv_center(&self) -> LuvColor {
        LuvColor::from_vector(&self.center)
    }

    /// The ellipse cut by the constant-lightness plane through the center.
    pub fn chroma_section(&self) -> Ellipsoid<2> {
        let g = &self.metric;
        Ellipsoid {
            center: Vector::<2>::new(self.center[1], self.center[2]),
            metric: Matrix::<2>::new(g[(1, 1)], g[(1, 2)], g[(2, 1)], g[(2, 2)]),
        }
    }
}

/// Least-squares fit of `vᵀ G v = 1` over the deviation vectors, followed by
/// projection onto the SPD cone.
pub fn fit_ellipsoid<const D: usize>(center: Vector<D>, deviations: &[Vector<D>]) -> Result<Ellipsoid<D>> {
    let unknowns = sym_len(D);
    if deviations.len() < unknowns {
        return Err(Error::DegenerateDirections(format!(
            "{} deviations cannot determine {unknowns} metric components",
            deviations.len()
        )));
    }
    let mut a = DMatrix::<f64>::zeros(deviations.len(), unknowns);
    for (row, v) in deviations.iter().enumerate() {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::Invalid("non-finite deviation".into()));
        }
        for (col, (i, j)) in sym_pairs(D).enumerate() {
            a[(row, col)] = if i == j { v[i] * v[i] } else { 2.0 * v[i] * v[j] };
        }
    }
    let b = DVector::<f64>::from_element(deviations.len(), 1.0);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(Error::DegenerateDirections(
            "deviation vectors do not determine a quadric (coplanar or repeated)".into(),
        ));
    }
    let x = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::DegenerateDirections(e.to_string()))?;
    let mut g = Matrix::<D>::zeros();
    for (n, (i, j)) in sym_pairs(D).enumerate() {
        g[(i, j)] = x[n];
        g[(j, i)] = x[n];
    }
    Ok(Ellipsoid {
        center,
        metric: spd_project(&g)?,
    })
}

/// Fit one ellipsoid per center of a single-observer measurement set.
pub fn fit_measurements(set: &MeasurementSet) -> Result<Vec<Ellipsoid<3>>> {
    if set.observers().len() > 1 {
        return Err(Error::Invalid(
            "measurement set mixes observers; select one first".into(),
        ));
    }
    set.averaged_deviations()
        .into_iter()
        .map(|(center, devs)| {
            fit_ellipsoid(center.to_vector(), &devs).map_err(|e| match e {
                Error::DegenerateDirections(m) => Error::DegenerateDirections(format!(
                    "center ({}, {}, {}): {m}",
                    center.l, center.u, center.v
                )),
                other => other,
            })
        })
        .collect()
}
