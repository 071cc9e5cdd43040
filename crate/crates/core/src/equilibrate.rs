//! Diagonal pre-conditioning by regularized Sinkhorn-Knopp equilibration.
//!
//! The scaling vectors come from alternating exact minimization of
//!
//! ```text
//! sum_ij |A_ij|^p d_i e_j - n sum_i log d_i - m sum_j log e_j
//!     + gamma ((1/m) sum_i d_i + (1/n) sum_j e_j)
//! ```
//!
//! over `d` (row block) and `e` (column block). The returned diagonals are
//! `D = d^(1/p)` and `E = e^(1/p)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Error, Result};

/// Diagonal scalings `D = diag(d)`, `E = diag(e)` for a matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equilibration {
    /// Diagonal of `D`, length `m`.
    pub d: Vec<f64>,
    /// Diagonal of `E`, length `n`.
    pub e: Vec<f64>,
    pub p: f64,
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective value after every block update, when requested.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub objective_history: Vec<f64>,
}

impl Equilibration {
    /// The trivial scaling `D = I`, `E = I`.
    pub fn identity(m: usize, n: usize) -> Self {
        Equilibration {
            d: vec![1.0; m],
            e: vec![1.0; n],
            p: 2.0,
            gamma: 0.0,
            iterations: 0,
            converged: true,
            objective_history: Vec::new(),
        }
    }

    /// `D A E` as a new matrix.
    pub fn scale_matrix(&self, a: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = a.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let ej = self.e[j];
            for (v, di) in col.iter_mut().zip(&self.d) {
                *v *= di * ej;
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct EquilibrateOptions {
    pub gamma: f64,
    pub eps: f64,
    pub max_iter: usize,
    pub p: f64,
    pub record_objective: bool,
}

impl EquilibrateOptions {
    /// Defaults for an `m x n` matrix.
    pub fn for_shape(m: usize, n: usize) -> Self {
        EquilibrateOptions {
            gamma: default_gamma(m, n),
            eps: default_eps(m, n),
            max_iter: 300,
            p: 2.0,
            record_objective: false,
        }
    }
}

/// `(m + n) sqrt(machine epsilon)`.
pub fn default_gamma(m: usize, n: usize) -> f64 {
    (m + n) as f64 * f64::EPSILON.sqrt()
}

/// `1e-4 sqrt(max(m, n))`.
pub fn default_eps(m: usize, n: usize) -> f64 {
    1e-4 * (m.max(n) as f64).sqrt()
}

/// Runs regularized Sinkhorn-Knopp with `p = 2`.
pub fn equilibrate(a: &DMatrix<f64>, gamma: f64, eps: f64, max_iter: usize) -> Result<Equilibration> {
    equilibrate_with(
        a,
        &EquilibrateOptions {
            gamma,
            eps,
            max_iter,
            p: 2.0,
            record_objective: false,
        },
    )
}

#[inline]
fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else {
        v.abs().powf(p)
    }
}

pub fn equilibrate_with(a: &DMatrix<f64>, opts: &EquilibrateOptions) -> Result<Equilibration> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Err(Error::Degenerate("empty matrix".into()));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("matrix is identically zero".into()));
    }
    if !(opts.gamma >= 0.0 && opts.gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be nonnegative, got {}",
            opts.gamma
        )));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {}",
            opts.eps
        )));
    }
    let p = opts.p;
    let (mf, nf) = (m as f64, n as f64);
    let row_floor = opts.gamma / mf;
    let col_floor = opts.gamma / nf;

    let mut d = vec![f64::INFINITY; m];
    let mut e = vec![1.0; n];
    let mut acc = vec![0.0; m];
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        iterations += 1;

        // d_i = n / (sum_j |A_ij|^p e_j + gamma/m)
        acc.iter_mut().for_each(|v| *v = row_floor);
        for (col, &ej) in a.column_iter().zip(&e) {
            for (s, &aij) in acc.iter_mut().zip(col.iter()) {
                *s += abs_pow(aij, p) * ej;
            }
        }
        let mut d_change = 0.0;
        for (di, &s) in d.iter_mut().zip(&acc) {
            let next = nf / s;
            d_change += (next - *di).powi(2);
            *di = next;
        }
        if opts.record_objective {
            history.push(sinkhorn_objective(a, &d, &e, opts.gamma, p));
        }

        // e_j = m / (sum_i |A_ij|^p d_i + gamma/n)
        let mut e_change = 0.0;
        for (col, ej) in a.column_iter().zip(e.iter_mut()) {
            let s: f64 = col
                .iter()
                .zip(&d)
                .map(|(&aij, &di)| abs_pow(aij, p) * di)
                .sum::<f64>()
                + col_floor;
            let next = mf / s;
            e_change += (next - *ej).powi(2);
            *ej = next;
        }
        if opts.record_objective {
            history.push(sinkhorn_objective(a, &d, &e, opts.gamma, p));
        }

        if d.iter().chain(&e).any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Degenerate(
                "equilibration produced non-finite scaling; use gamma > 0 for matrices with zero rows or columns"
                    .into(),
            ));
        }
        if d_change.sqrt() <= opts.eps && e_change.sqrt() <= opts.eps {
            converged = true;
            break;
        }
    }

    let root = 1.0 / p;
    Ok(Equilibration {
        d: d.iter().map(|v| v.powf(root)).collect(),
        e: e.iter().map(|v| v.powf(root)).collect(),
        p,
        gamma: opts.gamma,
        iterations,
        converged,
        objective_history: history,
    })
}

/// The regularized equilibration objective at `(u, v) = (log d, log e)`,
/// where `d`, `e` are the raw (`p`-th power) scaling vectors.
pub fn sinkhorn_objective(a: &DMatrix<f64>, d: &[f64], e: &[f64], gamma: f64, p: f64) -> f64 {
    let (m, n) = a.shape();
    let (mf, nf) = (m as f64, n as f64);
    let mut bilinear = 0.0;
    for (col, &ej) in a.column_iter().zip(e) {
        let s: f64 = col
            .iter()
            .zip(d)
            .map(|(&aij, &di)| abs_pow(aij, p) * di)
            .sum();
        bilinear += s * ej;
    }
    let log_d: f64 = d.iter().map(|v| v.ln()).sum();
    let log_e: f64 = e.iter().map(|v| v.ln()).sum();
    let reg = gamma * (d.iter().sum::<f64>() / mf + e.iter().sum::<f64>() / nf);
    bilinear - nf * log_d - mf * log_e + reg
}

/// `||D A E||_F / sqrt(min(m, n))`.
pub fn frobenius_ratio(a: &DMatrix<f64>, d: &[f64], e: &[f64]) -> f64 {
    let (m, n) = a.shape();
    let mut sum = 0.0;
    for (col, &ej) in a.column_iter().zip(e) {
        for (&aij, &di) in col.iter().zip(d) {
            let v = di * aij * ej;
            sum += v * v;
        }
    }
    sum.sqrt() / (m.min(n) as f64).sqrt()
}

/// Rescales `D` and `E` by the same factor so that
/// `||D A E||_F / sqrt(min(m, n)) = 1`.
pub fn rescale_even(eq: &Equilibration, a: &DMatrix<f64>) -> Result<Equilibration> {
    check_len("equilibration rows", a.nrows(), eq.d.len())?;
    check_len("equilibration columns", a.ncols(), eq.e.len())?;
    let ratio = frobenius_ratio(a, &eq.d, &eq.e);
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Degenerate(format!(
            "cannot rescale: ||DAE||_F ratio is {ratio}"
        )));
    }
    let s = ratio.sqrt();
    Ok(Equilibration {
        d: eq.d.iter().map(|v| v / s).collect(),
        e: eq.e.iter().map(|v| v / s).collect(),
        ..eq.clone()
    })
}

/// Diagnostics for how well `D A E` is equilibrated.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibrationReport {
    /// Max relative deviation of the row sums of `|DAE|^p` from their mean.
    pub row_deviation: f64,
    /// Same for column sums.
    pub col_deviation: f64,
    /// `|mean(D^p) - mean(E^p)|`, the mean-entry identity residual.
    pub mean_identity_residual: f64,
    /// The identity residual divided by `max(mean(D^p), mean(E^p))`.
    pub mean_identity_relative: f64,
    pub frobenius_ratio: f64,
    pub within_tol: bool,
}

pub fn check_equilibrated(a: &DMatrix<f64>, d: &[f64], e: &[f64], p: f64, tol: f64) -> Result<EquilibrationReport> {
    check_len("equilibration rows", a.nrows(), d.len())?;
    check_len("equilibration columns", a.ncols(), e.len())?;
    let (m, n) = a.shape();
    let mut rows = vec![0.0; m];
    let mut cols = vec![0.0; n];
    for (j, col) in a.column_iter().enumerate() {
        for (i, &aij) in col.iter().enumerate() {
            let v = abs_pow(d[i] * aij * e[j], p);
            rows[i] += v;
            cols[j] += v;
        }
    }
    let deviation = |sums: &[f64]| {
        let mean = sums.iter().sum::<f64>() / sums.len() as f64;
        if mean == 0.0 {
            return f64::INFINITY;
        }
        sums.iter()
            .map(|s| ((s - mean) / mean).abs())
            .fold(0.0, f64::max)
    };
    let row_deviation = deviation(&rows);
    let col_deviation = deviation(&cols);
    let mean_d = d.iter().map(|v| v.powf(p)).sum::<f64>() / m as f64;
    let mean_e = e.iter().map(|v| v.powf(p)).sum::<f64>() / n as f64;
    let residual = (mean_d - mean_e).abs();
    Ok(EquilibrationReport {
        row_deviation,
        col_deviation,
        mean_identity_residual: residual,
        mean_identity_relative: residual / mean_d.max(mean_e),
        frobenius_ratio: frobenius_ratio(a, d, e),
        within_tol: row_deviation <= tol && col_deviation <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_two_by_two() {
        let a = DMatrix::<f64>::identity(2, 2);
        let eq = equilibrate(&a, 0.0, 1e-12, 10).unwrap();
        let s2 = 2f64.sqrt();
        assert!(close(&eq.d, &[s2, s2], 1e-15));
        assert!(close(&eq.e, &[1.0, 1.0], 1e-15));
        assert!(eq.converged);
        assert_eq!(eq.iterations, 2);
        let r = check_equilibrated(&a, &eq.d, &eq.e, 2.0, 1e-12).unwrap();
        assert!(r.within_tol);
    }

    #[test]
    fn diagonal_one_two() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0]));
        let eq = equilibrate(&a, 0.0, 1e-12, 10).unwrap();
        assert!(close(&eq.d, &[2f64.sqrt(), 0.5f64.sqrt()], 1e-15));
        assert!(close(&eq.e, &[1.0, 1.0], 1e-15));
        let dae = eq.scale_matrix(&a);
        assert!((dae[(0, 0)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((dae[(1, 1)] - 2f64.sqrt()).abs() < 1e-15);

        // continuation: rescaling brings DAE to the identity
        let r = rescale_even(&eq, &a).unwrap();
        let dae = r.scale_matrix(&a);
        assert!((dae - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn large_gamma_gives_scaled_identity() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.1, 1.0]);
        let gamma = 1e12;
        let eq = equilibrate(&a, gamma, 1e-18, 50).unwrap();
        let expect = (6.0 / gamma).sqrt();
        for v in eq.d.iter().chain(&eq.e) {
            assert!((v / expect - 1.0).abs() < 1e-6, "{v} vs {expect}");
        }
    }

    #[test]
    fn zero_matrix_is_degenerate() {
        let a = DMatrix::<f64>::zeros(3, 2);
        assert!(matches!(equilibrate(&a, 1.0, 1e-4, 10), Err(Error::Degenerate(_))));
    }

    #[test]
    fn zero_row_with_gamma_stays_finite() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 0.0, 3.0, -1.0]);
        let eq = equilibrate(&a, 1e-2, 1e-10, 300).unwrap();
        assert!(eq.d.iter().chain(&eq.e).all(|v| v.is_finite() && *v > 0.0));
        // bounded by the regularization floor: d_i^2 <= n m / gamma
        assert!(eq.d[1] * eq.d[1] <= 2.0 * 3.0 / 1e-2 * (1.0 + 1e-12));
        let r = check_equilibrated(&a, &eq.d, &eq.e, 2.0, 1e-3).unwrap();
        assert!(r.row_deviation > 1e-3);
        assert!(!r.within_tol);
    }

    #[test]
    fn zero_row_without_gamma_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 0.0]);
        assert!(matches!(equilibrate(&a, 0.0, 1e-6, 10), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rescale_examples() {
        let a = DMatrix::<f64>::identity(3, 3) * 10.0;
        let eq = Equilibration::identity(3, 3);
        let r = rescale_even(&eq, &a).unwrap();
        let s = 10f64.sqrt();
        assert!(close(&r.d, &[1.0 / s; 3], 1e-15));
        assert!(close(&r.e, &[1.0 / s; 3], 1e-15));

        let id = DMatrix::<f64>::identity(3, 3);
        let r = rescale_even(&eq, &id).unwrap();
        assert!(close(&r.d, &eq.d, 1e-12) && close(&r.e, &eq.e, 1e-12));
    }

    #[test]
    fn rescale_zero_is_degenerate() {
        let a = DMatrix::<f64>::zeros(2, 2);
        assert!(rescale_even(&Equilibration::identity(2, 2), &a).is_err());
    }

    #[test]
    fn mean_identity_at_exact_solution() {
        let a = DMatrix::from_row_slice(3, 4, &[
            1.0, 0.5, 2.0, 0.3, 0.7, 1.5, 0.2, 0.9, 2.5, 0.1, 0.4, 1.1,
        ]);
        let eq = equilibrate(&a, 0.1, 1e-14, 10_000).unwrap();
        assert!(eq.converged);
        let r = check_equilibrated(&a, &eq.d, &eq.e, 2.0, 1e-6).unwrap();
        assert!(r.mean_identity_relative < 1e-8, "{r:?}");
    }

    #[test]
    fn objective_history_is_monotone() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.1, 1.0]);
        let mut opts = EquilibrateOptions::for_shape(2, 3);
        opts.record_objective = true;
        opts.eps = 1e-12;
        let eq = equilibrate_with(&a, &opts).unwrap();
        assert!(eq.objective_history.len() >= 2);
        for w in eq.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }
}
