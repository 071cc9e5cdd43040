//! Dual recovery, unscaling and stopping tests.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{check_len, Result};
use crate::model::{duality_gap, GraphFormProblem};
use crate::projection::{norm, LinearOperator};

/// Residuals and thresholds of the residual-based stopping test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ResidualCheck {
    pub stop: bool,
    pub eps_pri: f64,
    pub eps_dual: f64,
    /// `||A x - y||`
    pub r_pri: f64,
    /// `||A^T nu + mu||`
    pub r_dual: f64,
}

/// Residual test on a half iterate in the original variables:
/// `||A x - y|| <= eps_abs + eps_rel ||y||` and
/// `||A^T nu + mu|| <= eps_abs + eps_rel ||mu||`.
pub fn stop_residual(
    a: &DMatrix<f64>,
    x: &[f64],
    y: &[f64],
    mu: &[f64],
    nu: &[f64],
    eps_abs: f64,
    eps_rel: f64,
) -> Result<ResidualCheck> {
    check_len("x", a.ncols(), x.len())?;
    check_len("y", a.nrows(), y.len())?;
    check_len("mu", a.ncols(), mu.len())?;
    check_len("nu", a.nrows(), nu.len())?;
    let mut ax = vec![0.0; y.len()];
    let mut atnu = vec![0.0; x.len()];
    Ok(residual_check(a, x, y, mu, nu, eps_abs, eps_rel, &mut ax, &mut atnu))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn residual_check(
    a: &DMatrix<f64>,
    x: &[f64],
    y: &[f64],
    mu: &[f64],
    nu: &[f64],
    eps_abs: f64,
    eps_rel: f64,
    ax: &mut [f64],
    atnu: &mut [f64],
) -> ResidualCheck {
    a.apply(x, ax);
    ax.iter_mut().zip(y).for_each(|(v, yi)| *v -= yi);
    a.apply_transpose(nu, atnu);
    atnu.iter_mut().zip(mu).for_each(|(v, mi)| *v += mi);
    let r_pri = norm(ax);
    let r_dual = norm(atnu);
    let eps_pri = eps_abs + eps_rel * norm(y);
    let eps_dual = eps_abs + eps_rel * norm(mu);
    ResidualCheck {
        stop: r_pri <= eps_pri && r_dual <= eps_dual,
        eps_pri,
        eps_dual,
        r_pri,
        r_dual,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapCheck {
    pub stop: bool,
    /// `f(y) + f*(nu) + g(x) + g*(mu)`, possibly `+inf`.
    pub gap: f64,
    pub eps_gap: f64,
}

/// Gap test on a primal and dual feasible tuple:
/// `gap <= eps_abs + eps_rel |f(y) + g(x)|`. An infinite gap never stops.
pub fn stop_gap(
    problem: &GraphFormProblem,
    x: &[f64],
    y: &[f64],
    mu: &[f64],
    nu: &[f64],
    eps_abs: f64,
    eps_rel: f64,
) -> Result<GapCheck> {
    let gap = duality_gap(problem, x, y, mu, nu)?;
    let obj = problem.objective(x, y)?;
    let eps_gap = eps_abs + eps_rel * obj.abs();
    Ok(GapCheck {
        stop: gap.is_finite() && obj.is_finite() && gap <= eps_gap,
        gap,
        eps_gap,
    })
}

/// Dual variables attached to one iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct Duals {
    pub mu_half: Vec<f64>,
    pub nu_half: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
}

/// `mu = -rho xt`, `nu = -rho yt`,
/// `mu_half = -rho (x_half - x + xt)`, `nu_half = -rho (y_half - y + yt)`,
/// where `(x, y, xt, yt)` are the values that entered the prox step.
pub fn recover_duals(
    x: &[f64],
    y: &[f64],
    xt: &[f64],
    yt: &[f64],
    x_half: &[f64],
    y_half: &[f64],
    rho: f64,
) -> Duals {
    let scaled = |v: &[f64]| v.iter().map(|t| -rho * t).collect::<Vec<_>>();
    let half = |h: &[f64], p: &[f64], t: &[f64]| {
        h.iter()
            .zip(p)
            .zip(t)
            .map(|((h, p), t)| -rho * (h - p + t))
            .collect::<Vec<_>>()
    };
    Duals {
        mu_half: half(x_half, x, xt),
        nu_half: half(y_half, y, yt),
        mu: scaled(xt),
        nu: scaled(yt),
    }
}

/// Maps pre-conditioned variables back:
/// `x = E x_hat`, `y = D^{-1} y_hat`, `mu = E^{-1} mu_hat`, `nu = D nu_hat`.
pub fn unscale(
    x_hat: &[f64],
    y_hat: &[f64],
    mu_hat: &[f64],
    nu_hat: &[f64],
    d: &[f64],
    e: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let x = x_hat.iter().zip(e).map(|(v, s)| v * s).collect();
    let y = y_hat.iter().zip(d).map(|(v, s)| v / s).collect();
    let mu = mu_hat.iter().zip(e).map(|(v, s)| v / s).collect();
    let nu = nu_hat.iter().zip(d).map(|(v, s)| v * s).collect();
    (x, y, mu, nu)
}
