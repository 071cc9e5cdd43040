//! Graph-form problems and their separable objectives.
//!
//! A problem is `minimize f(y) + g(x) subject to y = Ax`, where `f` and `g`
//! are sums of scalar terms of the form
//!
//! ```text
//! c * h(a * v - b) + d * v + (e / 2) * v^2
//! ```
//!
//! with `h` drawn from a small library of base functions. Extended-real values
//! are represented with `f64::INFINITY`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Scalar base functions available to a [`FunctionTerm`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFunction {
    /// `|x|`
    Abs,
    /// `(1/2) x^2`
    Square,
    /// `(1/2) x^2` for `|x| <= 1`, `|x| - 1/2` otherwise.
    Huber,
    /// `x log x` on `x >= 0`, with `0 log 0 = 0`.
    NegEntr,
    /// `log(1 + e^x)`
    Logistic,
    /// `max(0, x)`
    MaxPos0,
    /// Indicator of `x >= 0`.
    IndGe0,
    /// Indicator of `x <= 0`.
    IndLe0,
    /// Indicator of `x = 0`.
    IndEq0,
    /// The constant zero.
    Zero,
}

impl BaseFunction {
    pub const ALL: [BaseFunction; 10] = [
        BaseFunction::Abs,
        BaseFunction::Square,
        BaseFunction::Huber,
        BaseFunction::NegEntr,
        BaseFunction::Logistic,
        BaseFunction::MaxPos0,
        BaseFunction::IndGe0,
        BaseFunction::IndLe0,
        BaseFunction::IndEq0,
        BaseFunction::Zero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BaseFunction::Abs => "abs",
            BaseFunction::Square => "square",
            BaseFunction::Huber => "huber",
            BaseFunction::NegEntr => "negentr",
            BaseFunction::Logistic => "logistic",
            BaseFunction::MaxPos0 => "maxpos0",
            BaseFunction::IndGe0 => "indge0",
            BaseFunction::IndLe0 => "indle0",
            BaseFunction::IndEq0 => "indeq0",
            BaseFunction::Zero => "zero",
        }
    }

    /// True for the indicator kinds, whose value is either 0 or +inf.
    pub fn is_indicator(self) -> bool {
        matches!(
            self,
            BaseFunction::IndGe0 | BaseFunction::IndLe0 | BaseFunction::IndEq0
        )
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            BaseFunction::Abs => x.abs(),
            BaseFunction::Square => 0.5 * x * x,
            BaseFunction::Huber => {
                if x.abs() <= 1.0 {
                    0.5 * x * x
                } else {
                    x.abs() - 0.5
                }
            }
            BaseFunction::NegEntr => {
                if x < 0.0 {
                    f64::INFINITY
                } else if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            }
            BaseFunction::Logistic => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            BaseFunction::MaxPos0 => x.max(0.0),
            BaseFunction::IndGe0 => indicator(x >= 0.0),
            BaseFunction::IndLe0 => indicator(x <= 0.0),
            BaseFunction::IndEq0 => indicator(x == 0.0),
            BaseFunction::Zero => 0.0,
        }
    }

    /// Convex conjugate `h*(w) = sup_x (w x - h(x))`.
    pub fn conjugate(self, w: f64) -> f64 {
        match self {
            BaseFunction::Abs => indicator(w.abs() <= 1.0),
            BaseFunction::Square => 0.5 * w * w,
            BaseFunction::Huber => {
                if w.abs() <= 1.0 {
                    0.5 * w * w
                } else {
                    f64::INFINITY
                }
            }
            BaseFunction::NegEntr => (w - 1.0).exp(),
            BaseFunction::Logistic => {
                if !(0.0..=1.0).contains(&w) {
                    f64::INFINITY
                } else {
                    xlogx(w) + xlogx(1.0 - w)
                }
            }
            BaseFunction::MaxPos0 => indicator((0.0..=1.0).contains(&w)),
            BaseFunction::IndGe0 => indicator(w <= 0.0),
            BaseFunction::IndLe0 => indicator(w >= 0.0),
            BaseFunction::IndEq0 => 0.0,
            BaseFunction::Zero => indicator(w == 0.0),
        }
    }
}

impl fmt::Display for BaseFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BaseFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        BaseFunction::ALL
            .iter()
            .copied()
            .find(|h| h.name() == lower)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown base function `{s}`")))
    }
}

fn indicator(inside: bool) -> f64 {
    if inside {
        0.0
    } else {
        f64::INFINITY
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

fn one() -> f64 {
    1.0
}

/// One coordinate of a separable objective: `c h(a v - b) + d v + (e/2) v^2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionTerm {
    pub h: BaseFunction,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default)]
    pub b: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub d: f64,
    #[serde(default)]
    pub e: f64,
}

impl FunctionTerm {
    /// The base function with the identity transform.
    pub fn new(h: BaseFunction) -> Self {
        FunctionTerm {
            h,
            a: 1.0,
            b: 0.0,
            c: 1.0,
            d: 0.0,
            e: 0.0,
        }
    }

    pub fn with_a(mut self, a: f64) -> Self {
        self.a = a;
        self
    }

    pub fn with_b(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = c;
        self
    }

    pub fn with_d(mut self, d: f64) -> Self {
        self.d = d;
        self
    }

    pub fn with_e(mut self, e: f64) -> Self {
        self.e = e;
        self
    }

    /// Checks the convexity and well-posedness conditions on the constants.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let all = [self.a, self.b, self.c, self.d, self.e];
        if all.iter().any(|v| !v.is_finite()) {
            return Err("coefficients must be finite".into());
        }
        if self.a == 0.0 {
            return Err("a must be nonzero".into());
        }
        if self.c < 0.0 {
            return Err(format!("c must be nonnegative, got {}", self.c));
        }
        if self.e < 0.0 {
            return Err(format!("e must be nonnegative, got {}", self.e));
        }
        Ok(())
    }

    pub fn eval(&self, v: f64) -> f64 {
        let base = if self.c == 0.0 {
            0.0
        } else {
            let hv = self.h.eval(self.a * v - self.b);
            if hv.is_infinite() {
                return hv;
            }
            self.c * hv
        };
        base + self.d * v + 0.5 * self.e * v * v
    }

    /// Conjugate of the full parametric term.
    ///
    /// With `e = 0` this reduces to the base conjugate through the shift and
    /// scale rules. With `e > 0` the supremum is attained at a proximal point
    /// of `c h(a . - b)` with parameter `e`, which the prox library evaluates.
    pub fn conjugate(&self, w: f64) -> f64 {
        let s = w - self.d;
        if self.e == 0.0 {
            if self.c == 0.0 {
                return indicator(s == 0.0);
            }
            let inner = self.h.conjugate(s / (self.a * self.c));
            if inner.is_infinite() {
                return inner;
            }
            s * self.b / self.a + self.c * inner
        } else {
            let core = FunctionTerm {
                d: 0.0,
                e: 0.0,
                ..*self
            };
            let x = crate::prox::prox_term(&core, self.e, s / self.e);
            let hv = core.eval(x);
            if hv.is_infinite() {
                return f64::INFINITY;
            }
            s * x - hv - 0.5 * self.e * x * x
        }
    }
}

/// A separable function: one [`FunctionTerm`] per coordinate.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeparableFunction {
    pub terms: Vec<FunctionTerm>,
}

impl SeparableFunction {
    pub fn new(terms: Vec<FunctionTerm>) -> Self {
        SeparableFunction { terms }
    }

    /// `len` copies of the same term.
    pub fn repeat(term: FunctionTerm, len: usize) -> Self {
        SeparableFunction {
            terms: vec![term; len],
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        for (index, term) in self.terms.iter().enumerate() {
            term.validate().map_err(|reason| Error::InvalidTerm {
                function: name.to_string(),
                index,
                reason,
            })?;
        }
        Ok(())
    }

    /// Sum of the term values at `v`; `+inf` outside the domain.
    pub fn eval(&self, v: &[f64]) -> Result<f64> {
        check_len("separable function argument", self.len(), v.len())?;
        Ok(self.eval_unchecked(v))
    }

    pub(crate) fn eval_unchecked(&self, v: &[f64]) -> f64 {
        let mut total = 0.0;
        for (term, &vi) in self.terms.iter().zip(v) {
            let t = term.eval(vi);
            if t == f64::INFINITY {
                return t;
            }
            total += t;
        }
        total
    }

    /// Sum of the coordinate conjugates at `w`.
    pub fn eval_conjugate(&self, w: &[f64]) -> Result<f64> {
        check_len("conjugate argument", self.len(), w.len())?;
        let mut total = 0.0;
        for (term, &wi) in self.terms.iter().zip(w) {
            let t = term.conjugate(wi);
            if t == f64::INFINITY {
                return Ok(t);
            }
            total += t;
        }
        Ok(total)
    }
}

/// `minimize f(y) + g(x) subject to y = A x`.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphFormProblem {
    a: DMatrix<f64>,
    f: SeparableFunction,
    g: SeparableFunction,
}

impl GraphFormProblem {
    pub fn new(a: DMatrix<f64>, f: SeparableFunction, g: SeparableFunction) -> Result<Self> {
        check_len("f (rows of A)", a.nrows(), f.len())?;
        check_len("g (columns of A)", a.ncols(), g.len())?;
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "matrix contains non-finite entries".into(),
            ));
        }
        f.validate("f")?;
        g.validate("g")?;
        Ok(GraphFormProblem { a, f, g })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn f(&self) -> &SeparableFunction {
        &self.f
    }

    pub fn g(&self) -> &SeparableFunction {
        &self.g
    }

    /// Number of rows of `A` (length of `y`).
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Number of columns of `A` (length of `x`).
    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    /// Replaces the objective while keeping `A`.
    pub fn set_objective(&mut self, f: SeparableFunction, g: SeparableFunction) -> Result<()> {
        check_len("f (rows of A)", self.m(), f.len())?;
        check_len("g (columns of A)", self.n(), g.len())?;
        f.validate("f")?;
        g.validate("g")?;
        self.f = f;
        self.g = g;
        Ok(())
    }

    /// Primal objective `f(y) + g(x)`.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Ok(self.f.eval(y)? + self.g.eval(x)?)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, SeparableFunction, SeparableFunction) {
        (self.a, self.f, self.g)
    }
}

/// Duality gap `f(y) + f*(nu) + g(x) + g*(mu)`.
pub fn duality_gap(
    problem: &GraphFormProblem,
    x: &[f64],
    y: &[f64],
    mu: &[f64],
    nu: &[f64],
) -> Result<f64> {
    check_len("x", problem.n(), x.len())?;
    check_len("y", problem.m(), y.len())?;
    check_len("mu", problem.n(), mu.len())?;
    check_len("nu", problem.m(), nu.len())?;
    let parts = [
        problem.f.eval(y)?,
        problem.f.eval_conjugate(nu)?,
        problem.g.eval(x)?,
        problem.g.eval_conjugate(mu)?,
    ];
    if parts.contains(&f64::INFINITY) {
        return Ok(f64::INFINITY);
    }
    Ok(parts.iter().sum())
}
