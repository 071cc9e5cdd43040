//! Operator splitting on the graph of `A`.
//!
//! All iterates live in the pre-conditioned variables `x_hat = E^{-1} x`,
//! `y_hat = D y` with `A_hat = D A E`. The prox steps are evaluated in the
//! original variables with per-coordinate penalties, so domain constraints of
//! `f` and `g` hold exactly for the half iterate. Stopping is tested on the
//! unscaled half iterate against the original `A`.

mod rho;
mod settings;
mod stopping;

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use rho::{adapt_rho, RhoChange, RhoController};
pub use settings::SolverSettings;
pub use stopping::{recover_duals, stop_gap, stop_residual, unscale, Duals, GapCheck, ResidualCheck};

use crate::equilibrate::{equilibrate_with, rescale_even, EquilibrateOptions, Equilibration};
use crate::error::{check_len, Error, Result};
use crate::model::{GraphFormProblem, SeparableFunction};
use crate::projection::{build_projector, LinearOperator, ProjectorCache};
use crate::prox::prox_separable_into;

const INNER_TOL_MIN: f64 = 1e-10;
const INNER_TOL_MAX: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Solved,
    MaxIterations,
    /// A non-finite value appeared; the last finite iterate is returned.
    Degenerate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    /// `f(y) + g(x)` at the returned point.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    /// Duality gap, only computed when gap stopping is enabled.
    pub gap: Option<f64>,
    pub status: Status,
    pub iterations: usize,
    /// Final value of `rho`.
    pub rho: f64,
    pub solve_time: f64,
    pub setup_time: f64,
}

/// Initial point in the original variables. Either half may be missing, in
/// which case it starts at zero. `rho` replaces the configured initial
/// penalty when set.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct WarmStart {
    pub x: Option<Vec<f64>>,
    pub nu: Option<Vec<f64>>,
    pub rho: Option<f64>,
}

impl WarmStart {
    pub fn from_result(r: &SolveResult) -> Self {
        WarmStart {
            x: Some(r.x.clone()),
            nu: Some(r.nu.clone()),
            rho: Some(r.rho),
        }
    }
}

/// Iterates in the pre-conditioned variables.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub xt: Vec<f64>,
    pub yt: Vec<f64>,
    pub x_half: Vec<f64>,
    pub y_half: Vec<f64>,
    pub mu_half: Vec<f64>,
    pub nu_half: Vec<f64>,
}

impl SolverState {
    fn zeros(m: usize, n: usize) -> Self {
        SolverState {
            x: vec![0.0; n],
            y: vec![0.0; m],
            xt: vec![0.0; n],
            yt: vec![0.0; m],
            x_half: vec![0.0; n],
            y_half: vec![0.0; m],
            mu_half: vec![0.0; n],
            nu_half: vec![0.0; m],
        }
    }
}

/// Passed to the progress callback once per iteration, after the stopping
/// quantities are known and before the projection. `state.x`, `state.y`,
/// `state.xt`, `state.yt` still hold iterate `k`.
pub struct Progress<'a> {
    pub k: usize,
    pub r_pri: f64,
    pub r_dual: f64,
    pub eps_pri: f64,
    pub eps_dual: f64,
    pub rho: f64,
    pub objective: f64,
    pub state: &'a SolverState,
    pub a_hat: &'a DMatrix<f64>,
    pub d: &'a [f64],
    pub e: &'a [f64],
}

pub struct Solver {
    problem: GraphFormProblem,
    settings: SolverSettings,
    scaling: Equilibration,
    projector: ProjectorCache,
    setup_time: f64,
    builds: usize,
}

impl Solver {
    /// Equilibrates `A` (unless disabled) and factors the projection system.
    pub fn new(problem: GraphFormProblem, settings: SolverSettings) -> Result<Self> {
        settings.validate()?;
        let start = Instant::now();
        let a = problem.matrix();
        let scaling = if settings.equilibrate {
            match equilibrate_with(a, &EquilibrateOptions::for_shape(a.nrows(), a.ncols())) {
                Ok(eq) => rescale_even(&eq, a)?,
                // all-zero matrix: nothing to balance
                Err(Error::Degenerate(_)) => Equilibration::identity(a.nrows(), a.ncols()),
                Err(err) => return Err(err),
            }
        } else {
            Equilibration::identity(a.nrows(), a.ncols())
        };
        Self::build(problem, settings, scaling, start)
    }

    /// Uses the given diagonal scalings instead of equilibrating.
    pub fn with_scaling(problem: GraphFormProblem, settings: SolverSettings, d: Vec<f64>, e: Vec<f64>) -> Result<Self> {
        settings.validate()?;
        check_len("row scaling", problem.m(), d.len())?;
        check_len("column scaling", problem.n(), e.len())?;
        if d.iter().chain(&e).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("scalings must be positive and finite".into()));
        }
        let start = Instant::now();
        let scaling = Equilibration {
            d,
            e,
            ..Equilibration::identity(problem.m(), problem.n())
        };
        Self::build(problem, settings, scaling, start)
    }

    fn build(problem: GraphFormProblem, settings: SolverSettings, scaling: Equilibration, start: Instant) -> Result<Self> {
        let a_hat = scaling.scale_matrix(problem.matrix());
        let projector = build_projector(a_hat, settings.projection, INNER_TOL_MAX, settings.max_inner)?;
        Ok(Solver {
            problem,
            settings,
            scaling,
            projector,
            setup_time: start.elapsed().as_secs_f64(),
            builds: 1,
        })
    }

    pub fn problem(&self) -> &GraphFormProblem {
        &self.problem
    }

    pub fn settings(&self) -> &SolverSettings {
        &self.settings
    }

    pub fn scaling(&self) -> &Equilibration {
        &self.scaling
    }

    /// `D A E`
    pub fn scaled_matrix(&self) -> &DMatrix<f64> {
        self.projector.matrix()
    }

    /// Number of projector factorizations performed by this solver.
    pub fn projector_builds(&self) -> usize {
        self.builds
    }

    pub fn setup_time(&self) -> f64 {
        self.setup_time
    }

    /// Replaces `f` and `g`; the matrix, scaling and projector are kept.
    pub fn update_objective(&mut self, f: SeparableFunction, g: SeparableFunction) -> Result<()> {
        self.problem.set_objective(f, g)
    }

    /// Replaces the settings. The projector is rebuilt only when the
    /// projection mode changes.
    pub fn set_settings(&mut self, settings: SolverSettings) -> Result<()> {
        settings.validate()?;
        if settings.projection != self.projector.mode() {
            let start = Instant::now();
            let a_hat = self.projector.matrix().clone();
            self.projector = build_projector(a_hat, settings.projection, INNER_TOL_MAX, settings.max_inner)?;
            self.setup_time = start.elapsed().as_secs_f64();
            self.builds += 1;
        }
        self.settings = settings;
        Ok(())
    }

    pub fn solve(&mut self, warm: Option<&WarmStart>) -> Result<SolveResult> {
        self.solve_with_callback(warm, |_| {})
    }

    pub fn solve_with_callback<F>(&mut self, warm: Option<&WarmStart>, mut callback: F) -> Result<SolveResult>
    where
        F: FnMut(&Progress<'_>),
    {
        let start = Instant::now();
        let s = self.settings.clone();
        let (m, n) = (self.problem.m(), self.problem.n());
        let a = self.problem.matrix();
        let a_hat = self.projector.matrix();
        let (d, e) = (&self.scaling.d[..], &self.scaling.e[..]);
        let (f, g) = (self.problem.f(), self.problem.g());

        let rho0 = match warm.and_then(|w| w.rho) {
            Some(r) if !(r > 0.0 && r.is_finite()) => {
                return Err(Error::InvalidParameter(format!("warm start rho must be positive, got {r}")));
            }
            Some(r) => r,
            None => s.rho0,
        };
        let mut ctl = RhoController::new(rho0, s.delta, s.tau);
        let mut st = SolverState::zeros(m, n);
        if let Some(w) = warm {
            init_warm(&mut st, w, a_hat, d, e, rho0)?;
        }

        // original-variable half iterate and scratch space
        let mut xo = vec![0.0; n];
        let mut yo = vec![0.0; m];
        let mut mu = vec![0.0; n];
        let mut nu = vec![0.0; m];
        let mut vx = vec![0.0; n];
        let mut vy = vec![0.0; m];
        let mut wx = vec![0.0; n];
        let mut wy = vec![0.0; m];
        let mut rx = vec![0.0; n];
        let mut ry = vec![0.0; m];
        let mut x_new = vec![0.0; n];
        let mut y_new = vec![0.0; m];

        if s.verbose {
            eprintln!(
                "{:>6} {:>11} {:>11} {:>11} {:>11} {:>10} {:>13}",
                "iter", "r_pri", "eps_pri", "r_dual", "eps_dual", "rho", "objective"
            );
        }

        let finish = |status, k, rho, x, y, mu, nu, chk: ResidualCheck, obj, gap| SolveResult {
            x,
            y,
            mu,
            nu,
            objective: obj,
            primal_residual: chk.r_pri,
            dual_residual: chk.r_dual,
            eps_pri: chk.eps_pri,
            eps_dual: chk.eps_dual,
            gap,
            status,
            iterations: k,
            rho,
            solve_time: start.elapsed().as_secs_f64(),
            setup_time: self.setup_time,
        };

        for k in 0..s.max_iter {
            let rho = ctl.rho;

            // prox steps, evaluated in the original variables
            for j in 0..n {
                vx[j] = e[j] * (st.x[j] - st.xt[j]);
                wx[j] = rho / (e[j] * e[j]);
            }
            for i in 0..m {
                vy[i] = (st.y[i] - st.yt[i]) / d[i];
                wy[i] = rho * d[i] * d[i];
            }
            prox_separable_into(g, &wx, &vx, &mut xo);
            prox_separable_into(f, &wy, &vy, &mut yo);
            for j in 0..n {
                st.x_half[j] = xo[j] / e[j];
                st.mu_half[j] = -rho * (st.x_half[j] - st.x[j] + st.xt[j]);
                mu[j] = st.mu_half[j] / e[j];
            }
            for i in 0..m {
                st.y_half[i] = yo[i] * d[i];
                st.nu_half[i] = -rho * (st.y_half[i] - st.y[i] + st.yt[i]);
                nu[i] = st.nu_half[i] * d[i];
            }

            let chk = stopping::residual_check(a, &xo, &yo, &mu, &nu, s.abs_tol, s.rel_tol, &mut ry, &mut rx);
            let obj = f.eval_unchecked(&yo) + g.eval_unchecked(&xo);
            callback(&Progress {
                k,
                r_pri: chk.r_pri,
                r_dual: chk.r_dual,
                eps_pri: chk.eps_pri,
                eps_dual: chk.eps_dual,
                rho,
                objective: obj,
                state: &st,
                a_hat,
                d,
                e,
            });
            if s.verbose && (k < 10 || k % 100 == 0) {
                print_row(k, &chk, rho, obj);
            }

            let half_finite = [&xo, &yo, &mu, &nu].iter().all(|v| v.iter().all(|t| t.is_finite()));
            if !half_finite || !chk.r_pri.is_finite() || !chk.r_dual.is_finite() {
                let (x, y, mu, nu) = full_iterate(&st, d, e, rho);
                let chk = stopping::residual_check(a, &x, &y, &mu, &nu, s.abs_tol, s.rel_tol, &mut ry, &mut rx);
                let obj = self.problem.objective(&x, &y)?;
                return Ok(finish(Status::Degenerate, k + 1, rho, x, y, mu, nu, chk, obj, None));
            }

            let mut gap = None;
            if s.gap_stop {
                let (x, y, mu_f, nu_f) = full_iterate(&st, d, e, rho);
                let gc = stop_gap(&self.problem, &x, &y, &mu_f, &nu_f, s.abs_tol, s.rel_tol)?;
                if gc.stop {
                    let chk = stopping::residual_check(a, &x, &y, &mu_f, &nu_f, s.abs_tol, s.rel_tol, &mut ry, &mut rx);
                    let obj = self.problem.objective(&x, &y)?;
                    if s.verbose {
                        print_row(k, &chk, rho, obj);
                    }
                    return Ok(finish(Status::Solved, k + 1, rho, x, y, mu_f, nu_f, chk, obj, Some(gc.gap)));
                }
                gap = Some(gc.gap);
            }

            if chk.stop {
                if s.verbose {
                    print_row(k, &chk, rho, obj);
                }
                return Ok(finish(Status::Solved, k + 1, rho, xo, yo, mu, nu, chk, obj, gap));
            }

            // over-relaxation, then projection of (relaxed + scaled dual)
            for j in 0..n {
                rx[j] = s.alpha * st.x_half[j] + (1.0 - s.alpha) * st.x[j];
                vx[j] = rx[j] + st.xt[j];
            }
            for i in 0..m {
                ry[i] = s.alpha * st.y_half[i] + (1.0 - s.alpha) * st.y[i];
                vy[i] = ry[i] + st.yt[i];
            }
            match &self.projector {
                ProjectorCache::Direct(p) => p.project_into(&vx, &vy, &mut x_new, &mut y_new),
                ProjectorCache::Indirect(p) => {
                    let step = st
                        .x_half
                        .iter()
                        .zip(&st.x)
                        .chain(st.y_half.iter().zip(&st.y))
                        .map(|(h, c)| (h - c) * (h - c))
                        .sum::<f64>()
                        .sqrt();
                    let tol = (0.1 * step).clamp(INNER_TOL_MIN, INNER_TOL_MAX);
                    let out = p.project_with_tol(&vx, &vy, &st.x, tol);
                    x_new.copy_from_slice(&out.x);
                    y_new.copy_from_slice(&out.y);
                }
            }
            for j in 0..n {
                wx[j] = st.xt[j] + rx[j] - x_new[j];
            }
            for i in 0..m {
                wy[i] = st.yt[i] + ry[i] - y_new[i];
            }
            let next_finite = x_new.iter().chain(&y_new).chain(&wx).chain(&wy).all(|v| v.is_finite());
            if !next_finite {
                let (x, y, mu, nu) = full_iterate(&st, d, e, rho);
                let chk = stopping::residual_check(a, &x, &y, &mu, &nu, s.abs_tol, s.rel_tol, &mut ry, &mut rx);
                let obj = self.problem.objective(&x, &y)?;
                return Ok(finish(Status::Degenerate, k + 1, rho, x, y, mu, nu, chk, obj, gap));
            }
            std::mem::swap(&mut st.x, &mut x_new);
            std::mem::swap(&mut st.y, &mut y_new);
            std::mem::swap(&mut st.xt, &mut wx);
            std::mem::swap(&mut st.yt, &mut wy);

            if s.adaptive_rho {
                adapt_rho(&mut ctl, k, chk.r_pri, chk.r_dual, chk.eps_pri, chk.eps_dual, &mut st.xt, &mut st.yt);
            }
        }

        // iteration cap: report the last half iterate
        let rho = ctl.rho;
        let last = s.max_iter;
        let chk = stopping::residual_check(a, &xo, &yo, &mu, &nu, s.abs_tol, s.rel_tol, &mut ry, &mut rx);
        let obj = f.eval_unchecked(&yo) + g.eval_unchecked(&xo);
        if s.verbose {
            print_row(last, &chk, rho, obj);
        }
        Ok(finish(Status::MaxIterations, last, rho, xo, yo, mu, nu, chk, obj, None))
    }
}

/// Builds a solver with `settings` and solves once.
pub fn solve(problem: GraphFormProblem, settings: SolverSettings, warm: Option<&WarmStart>) -> Result<SolveResult> {
    Solver::new(problem, settings)?.solve(warm)
}

fn init_warm(st: &mut SolverState, w: &WarmStart, a_hat: &DMatrix<f64>, d: &[f64], e: &[f64], rho: f64) -> Result<()> {
    if let Some(x0) = &w.x {
        check_len("warm start x", e.len(), x0.len())?;
        for (xh, (v, s)) in st.x.iter_mut().zip(x0.iter().zip(e)) {
            *xh = v / s;
        }
        a_hat.apply(&st.x, &mut st.y);
    }
    if let Some(nu0) = &w.nu {
        check_len("warm start nu", d.len(), nu0.len())?;
        let nu_hat: Vec<f64> = nu0.iter().zip(d).map(|(v, s)| v / s).collect();
        for (t, v) in st.yt.iter_mut().zip(&nu_hat) {
            *t = -v / rho;
        }
        a_hat.apply_transpose(&nu_hat, &mut st.xt);
        st.xt.iter_mut().for_each(|t| *t /= rho);
    }
    let finite = st.x.iter().chain(&st.y).chain(&st.xt).chain(&st.yt).all(|v| v.is_finite());
    if !finite {
        return Err(Error::InvalidParameter("warm start contains non-finite values".into()));
    }
    Ok(())
}

/// Unscaled `(x^k, y^k, mu^k, nu^k)`.
fn full_iterate(st: &SolverState, d: &[f64], e: &[f64], rho: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>) {
    let mu_hat: Vec<f64> = st.xt.iter().map(|t| -rho * t).collect();
    let nu_hat: Vec<f64> = st.yt.iter().map(|t| -rho * t).collect();
    unscale(&st.x, &st.y, &mu_hat, &nu_hat, d, e)
}

fn print_row(k: usize, chk: &ResidualCheck, rho: f64, obj: f64) {
    eprintln!(
        "{:>6} {:>11.4e} {:>11.4e} {:>11.4e} {:>11.4e} {:>10.3e} {:>13.6e}",
        k, chk.r_pri, chk.eps_pri, chk.r_dual, chk.eps_dual, rho, obj
    );
}
