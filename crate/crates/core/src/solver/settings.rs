use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::ProjectionMode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    /// Initial proximal parameter.
    pub rho0: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Over-relaxation parameter in `(0, 2)`.
    pub alpha: f64,
    pub adaptive_rho: bool,
    /// Multiplicative step for `rho`, `> 1`.
    pub delta: f64,
    /// Spacing between direction changes of `rho`, in `(0, 1]`.
    pub tau: f64,
    pub equilibrate: bool,
    pub gap_stop: bool,
    pub projection: ProjectionMode,
    /// Inner iteration cap for the indirect projector.
    pub max_inner: usize,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            rho0: 1.0,
            abs_tol: 1e-4,
            rel_tol: 1e-3,
            max_iter: 10_000,
            alpha: 1.7,
            adaptive_rho: true,
            delta: 1.05,
            tau: 0.8,
            equilibrate: true,
            gap_stop: false,
            projection: ProjectionMode::Direct,
            max_inner: 500,
            verbose: false,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.abs_tol > 0.0) || !(self.rel_tol > 0.0) {
            return bad(format!(
                "tolerances must be positive, got abs {} rel {}",
                self.abs_tol, self.rel_tol
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return bad(format!("alpha must lie in (0, 2), got {}", self.alpha));
        }
        if !(self.delta > 1.0) {
            return bad(format!("delta must exceed 1, got {}", self.delta));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let s = SolverSettings::default();
        s.validate().unwrap();
        assert_eq!((s.delta, s.tau, s.alpha), (1.05, 0.8, 1.7));
        assert_eq!(s.max_iter, 10_000);
    }

    #[test]
    fn rejects_out_of_range() {
        let cases: Vec<Box<dyn Fn(&mut SolverSettings)>> = vec![
            Box::new(|s| s.alpha = 2.0),
            Box::new(|s| s.alpha = 0.0),
            Box::new(|s| s.delta = 1.0),
            Box::new(|s| s.tau = 0.0),
            Box::new(|s| s.tau = 1.5),
            Box::new(|s| s.rho0 = -1.0),
            Box::new(|s| s.abs_tol = 0.0),
            Box::new(|s| s.max_iter = 0),
        ];
        for f in cases {
            let mut s = SolverSettings::default();
            f(&mut s);
            assert!(s.validate().is_err(), "{s:?}");
        }
    }
}
