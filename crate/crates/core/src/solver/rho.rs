//! Adaptive proximal parameter.
//!
//! `rho` only moves once one residual has converged: a converged dual residual
//! pushes `rho` up, a converged primal residual pushes it down. The markers
//! `l` and `u` record the last decrease and increase, and `tau` spaces out
//! reversals so the parameter does not flip-flop.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RhoChange {
    Increased,
    Decreased,
    Unchanged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RhoController {
    pub rho: f64,
    pub delta: f64,
    pub tau: f64,
    /// Iteration of the last decrease (`l`).
    pub last_decrease: usize,
    /// Iteration of the last increase (`u`).
    pub last_increase: usize,
}

impl RhoController {
    pub fn new(rho: f64, delta: f64, tau: f64) -> Self {
        RhoController {
            rho,
            delta,
            tau,
            last_decrease: 0,
            last_increase: 0,
        }
    }

    /// Applies one step of the update rule at iteration `k`. Returns the
    /// change and the factor `rho_old / rho_new` that the scaled duals must
    /// be multiplied by.
    pub fn update(
        &mut self,
        k: usize,
        r_pri: f64,
        r_dual: f64,
        eps_pri: f64,
        eps_dual: f64,
    ) -> (RhoChange, f64) {
        let tk = self.tau * k as f64;
        if r_dual < eps_dual && tk > self.last_decrease as f64 {
            self.rho *= self.delta;
            self.last_increase = k;
            (RhoChange::Increased, 1.0 / self.delta)
        } else if r_pri < eps_pri && tk > self.last_increase as f64 {
            self.rho /= self.delta;
            self.last_decrease = k;
            (RhoChange::Decreased, self.delta)
        } else {
            (RhoChange::Unchanged, 1.0)
        }
    }
}

/// [`RhoController::update`] followed by rescaling of the scaled duals.
pub fn adapt_rho(
    ctl: &mut RhoController,
    k: usize,
    r_pri: f64,
    r_dual: f64,
    eps_pri: f64,
    eps_dual: f64,
    xt: &mut [f64],
    yt: &mut [f64],
) -> RhoChange {
    let (change, factor) = ctl.update(k, r_pri, r_dual, eps_pri, eps_dual);
    if change != RhoChange::Unchanged {
        xt.iter_mut().chain(yt.iter_mut()).for_each(|v| *v *= factor);
    }
    change
}
