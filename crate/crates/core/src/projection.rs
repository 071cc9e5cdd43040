//! Euclidean projection onto the graph `{(x, y) : y = A x}`.
//!
//! The direct path caches a Cholesky factor of `A^T A + I` (tall, `m >= n`)
//! or `A A^T + I` (wide) and reuses it for every projection. The indirect
//! path runs CGLS on the same least-squares problem and never forms the Gram
//! matrix.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Matrix-free access to `A` and `A^T`.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `out = A x`
    fn apply(&self, x: &[f64], out: &mut [f64]);
    /// `out = A^T y`
    fn apply_transpose(&self, y: &[f64], out: &mut [f64]);
}

impl LinearOperator for DMatrix<f64> {
    fn rows(&self) -> usize {
        self.nrows()
    }

    fn cols(&self) -> usize {
        self.ncols()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (col, &xj) in self.column_iter().zip(x) {
            if xj == 0.0 {
                continue;
            }
            for (o, &aij) in out.iter_mut().zip(col.iter()) {
                *o += aij * xj;
            }
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        for (o, col) in out.iter_mut().zip(self.column_iter()) {
            *o = col.iter().zip(y).map(|(a, b)| a * b).sum();
        }
    }
}

/// Compressed sparse row matrix, usable with the indirect projector.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= rows || j >= cols {
                return Err(Error::InvalidParameter(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in sorted {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            indices.push(j);
            values.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out[(i, self.indices[k])] += self.values[k];
            }
        }
        out
    }
}

impl LinearOperator for CsrMatrix {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let range = self.indptr[i]..self.indptr[i + 1];
            *o = self.indices[range.clone()]
                .iter()
                .zip(&self.values[range])
                .map(|(&j, v)| v * x[j])
                .sum();
        }
    }

    fn apply_transpose(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &yi) in y.iter().enumerate() {
            for k in self.indptr[i]..self.indptr[i + 1] {
                out[self.indices[k]] += self.values[k] * yi;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    #[default]
    Direct,
    Indirect,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    /// `m >= n`: factor `A^T A + I`.
    Tall,
    /// `m < n`: factor `A A^T + I`.
    Wide,
}

impl Orientation {
    pub fn of(m: usize, n: usize) -> Self {
        if m >= n {
            Orientation::Tall
        } else {
            Orientation::Wide
        }
    }
}

/// Cached Cholesky factorization of the reduced projection system.
#[derive(Clone, Debug)]
pub struct DirectProjector {
    a: DMatrix<f64>,
    orientation: Orientation,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl DirectProjector {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("matrix contains non-finite entries".into()));
        }
        let orientation = Orientation::of(a.nrows(), a.ncols());
        let mut gram = match orientation {
            Orientation::Tall => a.transpose() * &a,
            Orientation::Wide => &a * a.transpose(),
        };
        for i in 0..gram.nrows() {
            gram[(i, i)] += 1.0;
        }
        let chol = Cholesky::new(gram.clone())
            .ok_or_else(|| Error::Numeric("Cholesky factorization of the Gram matrix failed".into()))?;
        Ok(DirectProjector {
            a,
            orientation,
            gram,
            chol,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    /// `A^T A + I` or `A A^T + I`.
    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Lower-triangular Cholesky factor `L` with `L L^T = gram`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    /// Projects `(x_in, y_in)` onto the graph of `A`.
    pub fn project_into(&self, x_in: &[f64], y_in: &[f64], x: &mut [f64], y: &mut [f64]) {
        let a = &self.a;
        match self.orientation {
            Orientation::Tall => {
                // x = (A^T A + I)^{-1} (x_in + A^T y_in), y = A x
                let mut rhs = DVector::zeros(a.ncols());
                a.apply_transpose(y_in, rhs.as_mut_slice());
                for (r, &c) in rhs.iter_mut().zip(x_in) {
                    *r += c;
                }
                self.chol.solve_mut(&mut rhs);
                x.copy_from_slice(rhs.as_slice());
                a.apply(x, y);
            }
            Orientation::Wide => {
                // y = y_in + (A A^T + I)^{-1} (A x_in - y_in), x = x_in - A^T (y - y_in)
                let mut rhs = DVector::zeros(a.nrows());
                a.apply(x_in, rhs.as_mut_slice());
                for (r, &d) in rhs.iter_mut().zip(y_in) {
                    *r -= d;
                }
                self.chol.solve_mut(&mut rhs);
                for ((yi, &di), &si) in y.iter_mut().zip(y_in).zip(rhs.iter()) {
                    *yi = di + si;
                }
                a.apply_transpose(rhs.as_slice(), x);
                for (xi, &ci) in x.iter_mut().zip(x_in) {
                    *xi = ci - *xi;
                }
            }
        }
    }
}

/// Result of an iterative projection.
#[derive(Clone, Debug, PartialEq)]
pub struct IndirectProjection {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final `||(A^T A + I) x - (x_in + A^T y_in)|| / ||x_in + A^T y_in||`.
    pub relative_residual: f64,
}

/// CGLS-based projector over any [`LinearOperator`].
#[derive(Clone, Debug)]
pub struct IndirectProjector<Op = DMatrix<f64>> {
    op: Op,
    pub tol: f64,
    pub max_inner: usize,
}

impl<Op: LinearOperator> IndirectProjector<Op> {
    pub fn new(op: Op, tol: f64, max_inner: usize) -> Result<Self> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "projection tolerance must be positive, got {tol}"
            )));
        }
        Ok(IndirectProjector { op, tol, max_inner })
    }

    pub fn operator(&self) -> &Op {
        &self.op
    }

    /// Approximate projection from the warm start `x_warm`, to the stored
    /// tolerance.
    pub fn project(&self, x_in: &[f64], y_in: &[f64], x_warm: &[f64]) -> IndirectProjection {
        self.project_with_tol(x_in, y_in, x_warm, self.tol)
    }

    /// CGLS on `minimize ||A z - (y_in - A x_in)||^2 + ||z||^2`, `x = x_in + z`.
    pub fn project_with_tol(&self, x_in: &[f64], y_in: &[f64], x_warm: &[f64], tol: f64) -> IndirectProjection {
        let (m, n) = (self.op.rows(), self.op.cols());
        let mut z: Vec<f64> = x_warm.iter().zip(x_in).map(|(w, c)| w - c).collect();

        // Normal-equation right-hand side x_in + A^T y_in, for the relative test.
        let mut rhs = vec![0.0; n];
        self.op.apply_transpose(y_in, &mut rhs);
        for (r, &c) in rhs.iter_mut().zip(x_in) {
            *r += c;
        }
        let rhs_norm = norm(&rhs).max(f64::MIN_POSITIVE);

        // residual r = (y_in - A x_in) - A z = y_in - A x_warm
        let mut r = vec![0.0; m];
        self.op.apply(x_warm, &mut r);
        for (ri, &di) in r.iter_mut().zip(y_in) {
            *ri = di - *ri;
        }
        let mut s = vec![0.0; n];
        self.op.apply_transpose(&r, &mut s);
        for (si, &zi) in s.iter_mut().zip(&z) {
            *si -= zi;
        }
        let mut p = s.clone();
        let mut q = vec![0.0; m];
        let mut gamma = dot(&s, &s);
        let mut iterations = 0;
        let mut converged = gamma.sqrt() <= tol * rhs_norm;

        while !converged && iterations < self.max_inner {
            iterations += 1;
            self.op.apply(&p, &mut q);
            let delta = dot(&q, &q) + dot(&p, &p);
            if delta <= 0.0 {
                break;
            }
            let alpha = gamma / delta;
            axpy(alpha, &p, &mut z);
            axpy(-alpha, &q, &mut r);
            self.op.apply_transpose(&r, &mut s);
            for (si, &zi) in s.iter_mut().zip(&z) {
                *si -= zi;
            }
            let next = dot(&s, &s);
            converged = next.sqrt() <= tol * rhs_norm;
            let beta = next / gamma;
            gamma = next;
            for (pi, &si) in p.iter_mut().zip(&s) {
                *pi = si + beta * *pi;
            }
        }

        let x: Vec<f64> = z.iter().zip(x_in).map(|(zi, c)| zi + c).collect();
        let mut y = vec![0.0; m];
        self.op.apply(&x, &mut y);
        IndirectProjection {
            x,
            y,
            iterations,
            converged,
            relative_residual: gamma.sqrt() / rhs_norm,
        }
    }
}

/// Either projector, owning the (pre-conditioned) matrix.
#[derive(Clone, Debug)]
pub enum ProjectorCache {
    Direct(DirectProjector),
    Indirect(IndirectProjector<DMatrix<f64>>),
}

/// Builds the projector for `a`. `tol` and `max_inner` only matter for the
/// indirect mode.
pub fn build_projector(a: DMatrix<f64>, mode: ProjectionMode, tol: f64, max_inner: usize) -> Result<ProjectorCache> {
    match mode {
        ProjectionMode::Direct => DirectProjector::new(a).map(ProjectorCache::Direct),
        ProjectionMode::Indirect => {
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric("matrix contains non-finite entries".into()));
            }
            IndirectProjector::new(a, tol, max_inner).map(ProjectorCache::Indirect)
        }
    }
}

impl ProjectorCache {
    pub fn matrix(&self) -> &DMatrix<f64> {
        match self {
            ProjectorCache::Direct(p) => p.matrix(),
            ProjectorCache::Indirect(p) => p.operator(),
        }
    }

    pub fn mode(&self) -> ProjectionMode {
        match self {
            ProjectorCache::Direct(_) => ProjectionMode::Direct,
            ProjectorCache::Indirect(_) => ProjectionMode::Indirect,
        }
    }

    /// Projects `(x_in, y_in)`. The indirect mode starts from `x = x_in`.
    pub fn project(&self, x_in: &[f64], y_in: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.matrix();
        check_len("projection x", a.ncols(), x_in.len())?;
        check_len("projection y", a.nrows(), y_in.len())?;
        match self {
            ProjectorCache::Direct(p) => {
                let mut x = vec![0.0; x_in.len()];
                let mut y = vec![0.0; y_in.len()];
                p.project_into(x_in, y_in, &mut x, &mut y);
                Ok((x, y))
            }
            ProjectorCache::Indirect(p) => {
                let out = p.project(x_in, y_in, x_in);
                Ok((out.x, out.y))
            }
        }
    }

    /// Warm-started iterative projection. Only valid in indirect mode.
    pub fn project_indirect(&self, x_in: &[f64], y_in: &[f64], x_warm: &[f64]) -> Result<IndirectProjection> {
        let a = self.matrix();
        check_len("projection x", a.ncols(), x_in.len())?;
        check_len("projection y", a.nrows(), y_in.len())?;
        check_len("projection warm start", a.ncols(), x_warm.len())?;
        match self {
            ProjectorCache::Indirect(p) => Ok(p.project(x_in, y_in, x_warm)),
            ProjectorCache::Direct(_) => Err(Error::InvalidParameter(
                "project_indirect requires an indirect projector".into(),
            )),
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
