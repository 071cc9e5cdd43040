//! Proximal operators.
//!
//! `prox_{h,rho}(v) = argmin_z h(z) + (rho/2)(z - v)^2` for every base
//! function, and the parametric transform that lifts it to full terms
//! `c h(a z - b) + d z + (e/2) z^2`.

use crate::error::{check_len, Error, Result};
use crate::model::{BaseFunction, FunctionTerm, SeparableFunction};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 200;

/// Proximal operator of a base function, with parameter checking.
pub fn prox_base(h: BaseFunction, rho: f64, v: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(base_prox(h, rho, v))
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "proximal parameter must be positive and finite, got {rho}"
        )))
    }
}

/// Proximal operator of `h` at parameter `rho > 0` (not checked).
pub(crate) fn base_prox(h: BaseFunction, rho: f64, v: f64) -> f64 {
    match h {
        BaseFunction::Abs => {
            let t = 1.0 / rho;
            if v > t {
                v - t
            } else if v < -t {
                v + t
            } else {
                0.0
            }
        }
        BaseFunction::Square => rho * v / (1.0 + rho),
        BaseFunction::Huber => {
            if v.abs() <= 1.0 + 1.0 / rho {
                rho * v / (1.0 + rho)
            } else {
                v - v.signum() / rho
            }
        }
        BaseFunction::NegEntr => prox_negentr(rho, v),
        BaseFunction::Logistic => prox_logistic(rho, v),
        BaseFunction::MaxPos0 => {
            if v > 1.0 / rho {
                v - 1.0 / rho
            } else if v < 0.0 {
                v
            } else {
                0.0
            }
        }
        BaseFunction::IndGe0 => v.max(0.0),
        BaseFunction::IndLe0 => v.min(0.0),
        BaseFunction::IndEq0 => 0.0,
        BaseFunction::Zero => v,
    }
}

/// Root of an increasing function on `[lo, hi]` with `phi(lo) <= 0 <= phi(hi)`.
///
/// Newton steps are taken while they stay inside the bracket and at least
/// halve `|phi|`; otherwise the next step bisects. Steep functions such as
/// the sigmoid can make pure Newton bounce between the ends of the bracket.
fn safeguarded_newton(
    phi: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    start: f64,
) -> f64 {
    let mut z = start.clamp(lo, hi);
    let mut best = (f64::INFINITY, z);
    let mut prev = f64::INFINITY;
    for _ in 0..NEWTON_MAX_ITER {
        let (r, dr) = phi(z);
        if r.abs() < best.0 {
            best = (r.abs(), z);
        }
        if r.abs() <= NEWTON_TOL {
            return z;
        }
        if r > 0.0 {
            hi = z;
        } else {
            lo = z;
        }
        if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(f64::MIN_POSITIVE) {
            return z;
        }
        let step = z - r / dr;
        let newton_ok = step > lo && step < hi && step.is_finite() && r.abs() <= 0.5 * prev;
        prev = r.abs();
        z = if newton_ok {
            if (step - z).abs() <= 2.0 * f64::EPSILON * z.abs() {
                return step;
            }
            step
        } else {
            // a bisection step resets the decrease test
            prev = f64::INFINITY;
            0.5 * (lo + hi)
        };
    }
    best.1
}

/// Solves `rho (z - v) + sigmoid(z) = 0`; the root lies in `[v - 1/rho, v]`.
fn prox_logistic(rho: f64, v: f64) -> f64 {
    let phi = |z: f64| {
        let s = sigmoid(z);
        (rho * (z - v) + s, rho + s * (1.0 - s))
    };
    safeguarded_newton(phi, v - 1.0 / rho, v, v - 0.5 / rho)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let t = z.exp();
        t / (1.0 + t)
    }
}

/// Solves `log z + 1 + rho (z - v) = 0` over `z > 0`.
///
/// Newton runs on `t = log z`, where the stationarity function
/// `t + 1 + rho (e^t - v)` is increasing and convex, so tiny minimizers
/// underflow to `z = 0` instead of stalling the iteration.
fn prox_negentr(rho: f64, v: f64) -> f64 {
    // phi(t_hi) >= 0 since both t + 1 and rho (e^t - v) are nonnegative there;
    // phi(t_lo) <= t_lo + 1 + rho (hi - v) = 0.
    let hi = v.max((-1.0f64).exp());
    let t_hi = hi.ln();
    let t_lo = -1.0 - rho * (hi - v);
    let phi = |t: f64| {
        let z = t.exp();
        (t + 1.0 + rho * (z - v), 1.0 + rho * z)
    };
    safeguarded_newton(phi, t_lo, t_hi, v.max(1e-6).ln()).exp()
}

/// Proximal operator of a full parametric term via the transform
/// `(1/a) (prox_{h, (e+rho)/(c a^2)}(a (v rho - d)/(e + rho) - b) + b)`.
pub fn prox_term(term: &FunctionTerm, rho: f64, v: f64) -> f64 {
    let scale = term.e + rho;
    let w = (v * rho - term.d) / scale;
    if term.c == 0.0 {
        return w;
    }
    let a = term.a;
    let inner = base_prox(term.h, scale / (term.c * a * a), a * w - term.b);
    (inner + term.b) / a
}

/// Coordinatewise prox of a separable function with per-coordinate
/// parameters.
pub fn prox_separable(sf: &SeparableFunction, rho: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    check_len("prox parameter vector", sf.len(), rho.len())?;
    check_len("prox argument", sf.len(), v.len())?;
    for &r in rho {
        check_rho(r)?;
    }
    let mut out = vec![0.0; v.len()];
    prox_separable_into(sf, rho, v, &mut out);
    Ok(out)
}

/// Same as [`prox_separable`] with a scalar parameter broadcast to every
/// coordinate.
pub fn prox_separable_scalar(sf: &SeparableFunction, rho: f64, v: &[f64]) -> Result<Vec<f64>> {
    check_len("prox argument", sf.len(), v.len())?;
    check_rho(rho)?;
    Ok(sf
        .terms
        .iter()
        .zip(v)
        .map(|(t, &vi)| prox_term(t, rho, vi))
        .collect())
}

pub(crate) fn prox_separable_into(sf: &SeparableFunction, rho: &[f64], v: &[f64], out: &mut [f64]) {
    for (((o, t), &r), &vi) in out.iter_mut().zip(&sf.terms).zip(rho).zip(v) {
        *o = prox_term(t, r, vi);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Golden-section minimization of a unimodal function on `[lo, hi]`.
    fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..300 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = f(x2);
            }
        }
        0.5 * (lo + hi)
    }

    /// Bisection for an increasing function.
    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn base_examples() {
        assert_eq!(prox_base(BaseFunction::Abs, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(prox_base(BaseFunction::IndGe0, 7.0, -2.0).unwrap(), 0.0);
        assert!(prox_base(BaseFunction::Abs, 0.0, 1.0).is_err());
        assert!(prox_base(BaseFunction::Abs, -1.0, 1.0).is_err());
    }

    #[test]
    fn logistic_matches_bisection() {
        let z = prox_base(BaseFunction::Logistic, 1.0, 1.0).unwrap();
        let oracle = bisect(|z| (z - 1.0) + 1.0 / (1.0 + (-z).exp()), -10.0, 10.0);
        assert!((z - oracle).abs() < 1e-8, "{z} vs {oracle}");
    }

    #[test]
    fn logistic_small_rho_far_argument() {
        // Pure Newton cycles here between the two ends of the bracket.
        let rho = 0.0006985879746785249;
        let v = 1428.702045292902;
        let z = base_prox(BaseFunction::Logistic, rho, v);
        assert!((sigmoid(z) + rho * (z - v)).abs() < 1e-12, "{z}");
        for i in 0..100 {
            let rho = 10f64.powf(-6.0 + 0.12 * i as f64);
            for v in [-1e3, -30.0, -1.0, 0.0, 2.0, 40.0, 1e3, 1.0 / rho] {
                let z = base_prox(BaseFunction::Logistic, rho, v);
                let r = sigmoid(z) + rho * (z - v);
                assert!(r.abs() <= 1e-12 * (1.0 + rho * v.abs()), "rho {rho} v {v}: {r}");
            }
        }
    }

    #[test]
    fn negentr_matches_bisection() {
        let z = prox_base(BaseFunction::NegEntr, 2.0, 1.0).unwrap();
        let oracle = bisect(|z| z.ln() + 1.0 + 2.0 * (z - 1.0), 1e-12, 10.0);
        assert!((z - oracle).abs() < 1e-8, "{z} vs {oracle}");
    }

    #[test]
    fn negentr_extreme_arguments() {
        assert_eq!(prox_base(BaseFunction::NegEntr, 100.0, -50.0).unwrap(), 0.0);
        let z = prox_base(BaseFunction::NegEntr, 1e-2, -10.0).unwrap();
        assert!(z > 0.0);
        let z = prox_base(BaseFunction::NegEntr, 1.0, 1e6).unwrap();
        assert!((z.ln() + 1.0 + (z - 1e6)).abs() < 1e-6);
    }

    #[test]
    fn term_examples() {
        let abs = FunctionTerm::new(BaseFunction::Abs);
        assert_eq!(prox_term(&abs, 1.0, 2.0), 1.0);
        let sq = FunctionTerm::new(BaseFunction::Square);
        assert_eq!(prox_term(&sq, 3.0, 4.0), 3.0);
        for h in BaseFunction::ALL {
            let t = FunctionTerm::new(h);
            for &v in &[-3.0, -0.2, 0.0, 0.7, 5.0] {
                assert_eq!(prox_term(&t, 1.3, v), base_prox(h, 1.3, v));
            }
        }
    }

    #[test]
    fn separable_checks() {
        let sf = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::Abs), 2);
        assert!(prox_separable(&sf, &[1.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(prox_separable(&sf, &[1.0], &[1.0, 1.0]).is_err());
        let out = prox_separable(&sf, &[1.0, 0.5], &[2.0, 2.0]).unwrap();
        assert_eq!(out, vec![1.0, 0.0]);
        let s = prox_separable_scalar(&sf, 1.0, &[2.0, -3.0]).unwrap();
        assert_eq!(s, vec![1.0, -2.0]);
    }

    #[test]
    fn grid_oracle_soft_threshold() {
        let t = FunctionTerm::new(BaseFunction::Abs);
        let best = (0..=40000)
            .map(|i| -2.0 + i as f64 * 1e-4)
            .min_by(|a, b| {
                let fa = t.eval(*a) + 0.5 * (a - 2.0) * (a - 2.0);
                let fb = t.eval(*b) + 0.5 * (b - 2.0) * (b - 2.0);
                fa.partial_cmp(&fb).unwrap()
            })
            .unwrap();
        assert!((best - prox_term(&t, 1.0, 2.0)).abs() < 1e-3);
    }

    fn bracket(rho: f64, v: f64) -> (f64, f64) {
        (v.min(0.0) - 1.0 / rho - 1.0, v.max(0.0) + 1.0 / rho + 1.0)
    }

    /// Closed domain of a base function as an interval.
    fn base_domain(h: BaseFunction) -> (f64, f64) {
        match h {
            BaseFunction::NegEntr | BaseFunction::IndGe0 => (0.0, f64::INFINITY),
            BaseFunction::IndLe0 => (f64::NEG_INFINITY, 0.0),
            BaseFunction::IndEq0 => (0.0, 0.0),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Golden-section search restricted to the domain `{z : a z - b in dom h}`.
    fn golden_in_domain(
        f: impl Fn(f64) -> f64,
        t: &FunctionTerm,
        lo: f64,
        hi: f64,
    ) -> f64 {
        let (dlo, dhi) = base_domain(t.h);
        let (mut zlo, mut zhi) = ((dlo + t.b) / t.a, (dhi + t.b) / t.a);
        if zlo > zhi {
            std::mem::swap(&mut zlo, &mut zhi);
        }
        if zlo == zhi {
            return zlo;
        }
        golden(f, lo.max(zlo), hi.min(zhi))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn base_prox_matches_golden(idx in 0usize..10, log_rho in -2.0f64..2.0, v in -10.0f64..10.0) {
            let h = BaseFunction::ALL[idx];
            let rho = 10f64.powf(log_rho);
            let z = base_prox(h, rho, v);
            let obj = |s: f64| h.eval(s) + 0.5 * rho * (s - v) * (s - v);
            let (lo, hi) = bracket(rho, v);
            let oracle = golden_in_domain(obj, &FunctionTerm::new(h), lo, hi);
            prop_assert!((z - oracle).abs() <= 1e-5 * (1.0 + v.abs()), "{h} rho={rho} v={v}: {z} vs {oracle}");
            prop_assert!(h.eval(z).is_finite());
        }

        #[test]
        fn firmly_nonexpansive(idx in 0usize..10, log_rho in -2.0f64..2.0, v1 in -10.0f64..10.0, v2 in -10.0f64..10.0) {
            let h = BaseFunction::ALL[idx];
            let rho = 10f64.powf(log_rho);
            let (p1, p2) = (base_prox(h, rho, v1), base_prox(h, rho, v2));
            prop_assert!((p1 - p2).abs() <= (v1 - v2).abs() + 1e-10);
            // firm nonexpansiveness: |p1 - p2|^2 <= (p1 - p2)(v1 - v2)
            prop_assert!((p1 - p2).powi(2) <= (p1 - p2) * (v1 - v2) + 1e-9);
        }

        #[test]
        fn transform_matches_direct_minimization(
            idx in 0usize..10,
            a in prop_oneof![-3.0f64..-0.3, 0.3f64..3.0],
            b in -2.0f64..2.0,
            c in 0.1f64..3.0,
            d in -2.0f64..2.0,
            e in 0.0f64..2.0,
            log_rho in -1.0f64..1.0,
            v in -5.0f64..5.0,
        ) {
            let h = BaseFunction::ALL[idx];
            let rho = 10f64.powf(log_rho);
            let t = FunctionTerm { h, a, b, c, d, e };
            let z = prox_term(&t, rho, v);
            let obj = |s: f64| t.eval(s) + 0.5 * rho * (s - v) * (s - v);
            // The minimizer lies within a generous interval around the
            // unconstrained quadratic minimizer and the domain boundary b/a.
            let center = (v * rho - d) / (e + rho);
            let span = 2.0 + center.abs() + (b / a).abs() + c * a.abs() / (e + rho) * 2.0;
            let oracle = golden_in_domain(obj, &t, center - span - (b / a).abs(), center + span + (b / a).abs());
            prop_assert!((z - oracle).abs() <= 1e-5 * (1.0 + v.abs()), "{t:?} rho={rho} v={v}: {z} vs {oracle}");
        }

        #[test]
        fn indicator_prox_lands_in_domain(idx in 6usize..9, log_rho in -2.0f64..2.0, v in -10.0f64..10.0) {
            let h = BaseFunction::ALL[idx];
            let z = base_prox(h, 10f64.powf(log_rho), v);
            prop_assert_eq!(h.eval(z), 0.0);
        }
    }
}
