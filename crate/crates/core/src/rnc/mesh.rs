//! Triangle/tetrahedron meshes with barycentric point location.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{determinant, inverse, Matrix, Vector};

/// Cells are stored with `D + 1` used vertex slots.
pub type CellVertices = [u32; 4];

/// Weight tolerance for accepting a point as inside a cell.
const INSIDE_TOLERANCE: f64 = 1e-9;
const MAX_BINS_PER_AXIS: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricLocation {
    pub cell: usize,
    pub vertices: CellVertices,
    /// Nonnegative, summing to one; slots beyond `D + 1` are zero.
    pub weights: [f64; 4],
}

impl BarycentricLocation {
    pub fn combine<const D: usize>(&self, values: &[Vector<D>]) -> Vector<D> {
        let mut out = Vector::<D>::zeros();
        for k in 0..=D {
            if self.weights[k] != 0.0 {
                out += values[self.vertices[k] as usize] * self.weights[k];
            }
        }
        out
    }
}

/// Signed volume (times `D!`) of the simplex with the given corners.
pub fn signed_volume<const D: usize>(corners: &[Vector<D>]) -> f64 {
    let m = Matrix::<D>::from_fn(|r, c| corners[c + 1][r] - corners[0][r]);
    determinant(&m)
}

#[derive(Debug, Clone)]
struct BinIndex<const D: usize> {
    min: Vector<D>,
    size: Vector<D>,
    dims: [usize; D],
    bins: Vec<Vec<u32>>,
}

impl<const D: usize> BinIndex<D> {
    fn build(boxes: &[(Vector<D>, Vector<D>)]) -> Self {
        let mut min = Vector::<D>::from_element(f64::INFINITY);
        let mut max = Vector::<D>::from_element(f64::NEG_INFINITY);
        for (lo, hi) in boxes {
            min = min.inf(lo);
            max = max.sup(hi);
        }
        if boxes.is_empty() {
            min = Vector::<D>::zeros();
            max = Vector::<D>::zeros();
        }
        let per_axis = ((boxes.len().max(1) as f64).powf(1.0 / D as f64).ceil() as usize)
            .clamp(1, MAX_BINS_PER_AXIS);
        let dims = [per_axis; D];
        let size = Vector::<D>::from_fn(|a, _| ((max[a] - min[a]) / per_axis as f64).max(1e-12));
        let mut index = Self {
            min,
            size,
            dims,
            bins: vec![Vec::new(); per_axis.pow(D as u32)],
        };
        for (c, (lo, hi)) in boxes.iter().enumerate() {
            let a = index.bin_coords(lo);
            let b = index.bin_coords(hi);
            index.for_each_bin(&a, &b, |bin| bin.push(c as u32));
        }
        index
    }

    fn bin_coords(&self, x: &Vector<D>) -> [usize; D] {
        std::array::from_fn(|a| {
            let t = ((x[a] - self.min[a]) / self.size[a]).floor();
            (t.max(0.0) as usize).min(self.dims[a] - 1)
        })
    }

    fn flat(&self, idx: &[usize; D]) -> usize {
        let mut n = 0;
        for a in 0..D {
            n = n * self.dims[a] + idx[a];
        }
        n
    }

    fn for_each_bin(&mut self, lo: &[usize; D], hi: &[usize; D], mut f: impl FnMut(&mut Vec<u32>)) {
        let mut idx = *lo;
        loop {
            let n = self.flat(&idx);
            f(&mut self.bins[n]);
            let mut a = D;
            loop {
                if a == 0 {
                    return;
                }
                a -= 1;
                idx[a] += 1;
                if idx[a] <= hi[a] {
                    break;
                }
                idx[a] = lo[a];
            }
        }
    }

    fn candidates(&self, x: &Vector<D>) -> &[u32] {
        for a in 0..D {
            let hi = self.min[a] + self.size[a] * self.dims[a] as f64;
            if !(x[a] >= self.min[a] - 1e-9 && x[a] <= hi + 1e-9) {
                return &[];
            }
        }
        &self.bins[self.flat(&self.bin_coords(x))]
    }
}

#[derive(Debug, Clone)]
pub struct SimplexMesh<const D: usize> {
    cells: Vec<CellVertices>,
    inverses: Vec<Matrix<D>>,
    boxes: Vec<(Vector<D>, Vector<D>)>,
    index: BinIndex<D>,
}

impl<const D: usize> SimplexMesh<D> {
    /// `cells` must be non-degenerate for `vertices`.
    pub fn new(vertices: &[Vector<D>], cells: Vec<CellVertices>) -> Self {
        let mut inverses = Vec::with_capacity(cells.len());
        let mut boxes = Vec::with_capacity(cells.len());
        for c in &cells {
            let v0 = vertices[c[0] as usize];
            let t = Matrix::<D>::from_fn(|r, col| vertices[c[col + 1] as usize][r] - v0[r]);
            inverses.push(inverse(&t).unwrap_or_else(Matrix::<D>::zeros));
            let mut lo = v0;
            let mut hi = v0;
            for &v in &c[1..=D] {
                lo = lo.inf(&vertices[v as usize]);
                hi = hi.sup(&vertices[v as usize]);
            }
            boxes.push((lo, hi));
        }
        let index = BinIndex::build(&boxes);
        Self {
            cells,
            inverses,
            boxes,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell(&self, c: usize) -> &CellVertices {
        &self.cells[c]
    }

    /// Raw barycentric weights of `x` in cell `c` (may be negative).
    pub fn barycentric(&self, vertices: &[Vector<D>], c: usize, x: &Vector<D>) -> [f64; 4] {
        let cell = &self.cells[c];
        let rel = self.inverses[c] * (x - vertices[cell[0] as usize]);
        let mut w = [0.0; 4];
        let mut rest = 1.0;
        for k in 0..D {
            w[k + 1] = rel[k];
            rest -= rel[k];
        }
        w[0] = rest;
        w
    }

    fn finish(&self, c: usize, mut w: [f64; 4]) -> BarycentricLocation {
        let mut sum = 0.0;
        for wk in w.iter_mut().take(D + 1) {
            *wk = wk.max(0.0);
            sum += *wk;
        }
        for wk in w.iter_mut().take(D + 1) {
            *wk /= sum;
        }
        BarycentricLocation {
            cell: c,
            vertices: self.cells[c],
            weights: w,
        }
    }

    /// Containing cell of `x`, preferring the most interior candidate.
    pub fn locate(&self, vertices: &[Vector<D>], x: &Vector<D>) -> Option<BarycentricLocation> {
        let mut best: Option<(f64, usize, [f64; 4])> = None;
        for &c in self.index.candidates(x) {
            let c = c as usize;
            let (lo, hi) = &self.boxes[c];
            if (0..D).any(|a| x[a] < lo[a] - 1e-9 || x[a] > hi[a] + 1e-9) {
                continue;
            }
            let w = self.barycentric(vertices, c, x);
            let worst = w[..=D].iter().cloned().fold(f64::INFINITY, f64::min);
            if worst >= -INSIDE_TOLERANCE && best.is_none_or(|(b, _, _)| worst > b) {
                best = Some((worst, c, w));
                if worst >= 0.0 {
                    break;
                }
            }
        }
        best.map(|(_, c, w)| self.finish(c, w))
    }

    /// Closest point of the mesh to `x`: `(cell, point, distance)`.
    pub fn nearest(&self, vertices: &[Vector<D>], x: &Vector<D>) -> Option<(usize, Vector<D>, f64)> {
        let mut best: Option<(usize, Vector<D>, f64)> = None;
        for c in 0..self.cells.len() {
            let (lo, hi) = &self.boxes[c];
            let gap = Vector::<D>::from_fn(|a, _| (lo[a] - x[a]).max(x[a] - hi[a]).max(0.0));
            if let Some((_, _, d)) = best {
                if gap.norm() >= d {
                    continue;
                }
            }
            let corners: Vec<Vector<D>> = self.cells[c][..=D].iter().map(|&v| vertices[v as usize]).collect();
            let p = closest_point_on_simplex(&corners, x);
            let d = (p - x).norm();
            if best.is_none_or(|(_, _, bd)| d < bd) {
                best = Some((c, p, d));
            }
        }
        best
    }
}

/// Closest point to `x` on the simplex spanned by `corners`, found by
/// checking the affine hull of every face.
pub fn closest_point_on_simplex<const D: usize>(corners: &[Vector<D>], x: &Vector<D>) -> Vector<D> {
    let n = corners.len();
    let mut best = corners[0];
    let mut best_d = (corners[0] - x).norm_squared();
    for mask in 1u32..(1 << n) {
        let face: Vec<Vector<D>> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| corners[i]).collect();
        let m = face.len();
        let candidate = if m == 1 {
            Some(face[0])
        } else {
            let base = face[0];
            let e = DMatrix::<f64>::from_fn(D, m - 1, |r, c| face[c + 1][r] - base[r]);
            let rhs = DVector::<f64>::from_fn(D, |r, _| x[r] - base[r]);
            let gram = e.transpose() * &e;
            gram.lu().solve(&(e.transpose() * rhs)).and_then(|mu| {
                let rest = 1.0 - mu.sum();
                if rest < -1e-12 || mu.iter().any(|&v| v < -1e-12) {
                    None
                } else {
                    let mut p = base;
                    for k in 0..m - 1 {
                        p += (face[k + 1] - base) * mu[k];
                    }
                    Some(p)
                }
            })
        };
        if let Some(p) = candidate {
            let d = (p - x).norm_squared();
            if d < best_d {
                best_d = d;
                best = p;
            }
        }
    }
    best
}
