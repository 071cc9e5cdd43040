//! Seeded random instances of nine standard problem families.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` with one stream
//! per array (see [`stream`]), so adding draws to one array never shifts
//! another. Normals use the ziggurat sampler of `rand_distr`. Every
//! `N(mu, s)` below takes `s` as the variance.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BaseFunction, FunctionTerm, GraphFormProblem, SeparableFunction};

/// Stream indices.
pub mod stream {
    pub const MATRIX: u64 = 0;
    pub const PLANTED: u64 = 1;
    pub const NOISE: u64 = 2;
    pub const AUX: u64 = 3;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BasisPursuit,
    EntropyMax,
    HuberFit,
    Lasso,
    Logistic,
    Lp,
    Nnls,
    Portfolio,
    Svm,
}

impl Family {
    pub const ALL: [Family; 9] = [
        Family::BasisPursuit,
        Family::EntropyMax,
        Family::HuberFit,
        Family::Lasso,
        Family::Logistic,
        Family::Lp,
        Family::Nnls,
        Family::Portfolio,
        Family::Svm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::BasisPursuit => "basis_pursuit",
            Family::EntropyMax => "entropy_max",
            Family::HuberFit => "huber_fit",
            Family::Lasso => "lasso",
            Family::Logistic => "logistic",
            Family::Lp => "lp",
            Family::Nnls => "nnls",
            Family::Portfolio => "portfolio",
            Family::Svm => "svm",
        }
    }

    /// Whether the family takes `m < n` (wide). Portfolio counts as wide:
    /// its `m` is the factor count and `n` the asset count.
    pub fn is_wide(self) -> bool {
        matches!(self, Family::EntropyMax | Family::Lasso | Family::Portfolio)
    }

    /// Dimensions whose emitted matrix has roughly `nnz` entries with the
    /// long side `aspect` times the short side.
    pub fn shape_for_nnz(self, nnz: usize, aspect: usize) -> (usize, usize) {
        let aspect = aspect.max(2);
        let short = ((nnz as f64 / aspect as f64).sqrt().round() as usize).max(1);
        let long = short * aspect;
        if self.is_wide() {
            (short, long)
        } else {
            (long, short)
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Family::ALL
            .into_iter()
            .find(|f| f.name().replace('_', "") == key)
            .ok_or_else(|| {
                let names: Vec<_> = Family::ALL.iter().map(|f| f.name()).collect();
                Error::InvalidParameter(format!("unknown family `{s}`, expected one of {}", names.join(", ")))
            })
    }
}

/// What to generate. For [`Family::Portfolio`], `m` is the number of risk
/// factors and `n` the number of assets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
}

impl GenSpec {
    pub fn new(family: Family, m: usize, n: usize, seed: u64) -> Self {
        GenSpec { family, m, n, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidParameter(format!(
                "{}: dimensions must be positive, got m={} n={}",
                self.family, self.m, self.n
            )));
        }
        let ok = if self.family.is_wide() {
            self.m < self.n
        } else {
            self.m > self.n
        };
        if !ok {
            let want = match self.family {
                Family::Portfolio => "assets n > factors m",
                _ if self.family.is_wide() => "m < n",
                _ => "m > n",
            };
            return Err(Error::InvalidParameter(format!(
                "{} requires {want}, got m={} n={}",
                self.family, self.m, self.n
            )));
        }
        Ok(())
    }
}

/// Generating data kept alongside an instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub family: Family,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Shape of the emitted matrix.
    pub rows: usize,
    pub cols: usize,
    /// Planted vector `v`, when the family has one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Right-hand side or labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
    /// Linear cost (LP) or mean return (portfolio).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub fn generate(spec: &GenSpec) -> Result<(GraphFormProblem, Metadata)> {
    spec.validate()?;
    let mut g = Gen::new(spec);
    let (a, f, gf) = match spec.family {
        Family::BasisPursuit => g.basis_pursuit(),
        Family::EntropyMax => g.entropy_max(),
        Family::HuberFit => g.huber_fit(),
        Family::Lasso => g.lasso(),
        Family::Logistic => g.logistic(),
        Family::Lp => g.lp(),
        Family::Nnls => g.nnls(),
        Family::Portfolio => g.portfolio(),
        Family::Svm => g.svm(),
    };
    g.meta.rows = a.nrows();
    g.meta.cols = a.ncols();
    let problem = GraphFormProblem::new(a, f, gf)?;
    Ok((problem, g.meta))
}

struct Gen {
    m: usize,
    n: usize,
    seed: u64,
    meta: Metadata,
}

type Parts = (DMatrix<f64>, SeparableFunction, SeparableFunction);

fn rng(seed: u64, s: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(s);
    r
}

fn normal(mean: f64, var: f64) -> Normal<f64> {
    Normal::new(mean, var.sqrt()).expect("finite variance")
}

fn uniform(lo: f64, hi: f64) -> Uniform<f64> {
    Uniform::new_inclusive(lo, hi).expect("ordered bounds")
}

fn matvec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| a.row(i).iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn matvec_t(a: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    a.column_iter()
        .map(|c| c.iter().zip(u).map(|(x, y)| x * y).sum())
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn terms(h: BaseFunction, offsets: &[f64]) -> SeparableFunction {
    SeparableFunction::new(offsets.iter().map(|&b| FunctionTerm::new(h).with_b(b)).collect())
}

impl Gen {
    fn new(spec: &GenSpec) -> Self {
        Gen {
            m: spec.m,
            n: spec.n,
            seed: spec.seed,
            meta: Metadata {
                family: spec.family,
                m: spec.m,
                n: spec.n,
                seed: spec.seed,
                rows: 0,
                cols: 0,
                planted: None,
                lambda: None,
                b: None,
                c: None,
                notes: Vec::new(),
            },
        }
    }

    fn stream(&self, s: u64) -> ChaCha8Rng {
        rng(self.seed, s)
    }

    /// Row-major sampling so the stream order does not depend on storage.
    fn matrix(&self, rows: usize, cols: usize, dist: impl Distribution<f64>) -> DMatrix<f64> {
        let mut r = self.stream(stream::MATRIX);
        let data: Vec<f64> = (0..rows * cols).map(|_| dist.sample(&mut r)).collect();
        DMatrix::from_row_slice(rows, cols, &data)
    }

    /// `0` with probability 1/2, otherwise `N(0, 1/n)`.
    fn sparse_planted(&self) -> Vec<f64> {
        let mut r = self.stream(stream::PLANTED);
        let nd = normal(0.0, 1.0 / self.n as f64);
        (0..self.n)
            .map(|_| {
                let keep = r.random_bool(0.5);
                let val = nd.sample(&mut r);
                if keep {
                    val
                } else {
                    0.0
                }
            })
            .collect()
    }

    fn gaussian_noise(&self, len: usize, var: f64) -> Vec<f64> {
        let mut r = self.stream(stream::NOISE);
        let nd = normal(0.0, var);
        (0..len).map(|_| nd.sample(&mut r)).collect()
    }

    fn basis_pursuit(&mut self) -> Parts {
        let a = self.matrix(self.m, self.n, normal(0.0, 1.0));
        let v = self.sparse_planted();
        let b = matvec(&a, &v);
        let f = terms(BaseFunction::IndEq0, &b);
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::Abs), self.n);
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        (a, f, g)
    }

    fn entropy_max(&mut self) -> Parts {
        let (m, n) = (self.m, self.n);
        let core = self.matrix(m, n, normal(0.0, n as f64));
        let mut r = self.stream(stream::PLANTED);
        let v: Vec<f64> = (0..n).map(|_| r.random::<f64>()).collect();
        let total: f64 = v.iter().sum();
        let b: Vec<f64> = matvec(&core, &v).into_iter().map(|t| t / total).collect();
        let mut a = core.insert_row(m, 1.0);
        a.row_mut(m).fill(1.0);
        let mut fterms: Vec<FunctionTerm> = b.iter().map(|&bi| FunctionTerm::new(BaseFunction::IndLe0).with_b(bi)).collect();
        fterms.push(FunctionTerm::new(BaseFunction::IndEq0).with_b(1.0));
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::NegEntr), n);
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        self.meta.notes.push(format!("matrix entries drawn with variance n = {n}"));
        (a, SeparableFunction::new(fterms), g)
    }

    fn huber_fit(&mut self) -> Parts {
        let (m, n) = (self.m, self.n);
        let a = self.matrix(m, n, normal(0.0, n as f64));
        let mut r = self.stream(stream::PLANTED);
        let nd = normal(0.0, 1.0 / n as f64);
        let v: Vec<f64> = (0..n).map(|_| nd.sample(&mut r)).collect();
        let mut r = self.stream(stream::NOISE);
        let (inlier, outlier) = (normal(0.0, 0.25), uniform(0.0, 10.0));
        let noise: Vec<f64> = (0..m)
            .map(|_| {
                let clean = r.random_bool(0.95);
                let (x, y) = (inlier.sample(&mut r), outlier.sample(&mut r));
                if clean {
                    x
                } else {
                    y
                }
            })
            .collect();
        let b: Vec<f64> = matvec(&a, &v).iter().zip(&noise).map(|(s, e)| s + e).collect();
        let f = terms(BaseFunction::Huber, &b);
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::Zero), n);
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        self.meta.notes.push(format!("matrix entries drawn with variance n = {n}"));
        (a, f, g)
    }

    fn lasso(&mut self) -> Parts {
        let a = self.matrix(self.m, self.n, normal(0.0, 1.0));
        let v = self.sparse_planted();
        let noise = self.gaussian_noise(self.m, 0.25);
        let b: Vec<f64> = matvec(&a, &v).iter().zip(&noise).map(|(s, e)| s + e).collect();
        let lambda = 0.2 * inf_norm(&matvec_t(&a, &b));
        let f = terms(BaseFunction::Square, &b);
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::Abs).with_c(lambda), self.n);
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        self.meta.lambda = Some(lambda);
        self.meta.notes.push("loss is (1/2)||Ax - b||^2".into());
        (a, f, g)
    }

    fn logistic(&mut self) -> Parts {
        let a = self.matrix(self.m, self.n, normal(0.0, 1.0));
        let v = self.sparse_planted();
        let mut r = self.stream(stream::NOISE);
        let b: Vec<f64> = matvec(&a, &v)
            .iter()
            .map(|z| {
                let p0 = 1.0 / (1.0 + (-z).exp());
                if r.random::<f64>() < p0 {
                    0.0
                } else {
                    1.0
                }
            })
            .collect();
        let centered: Vec<f64> = b.iter().map(|bi| 0.5 - bi).collect();
        let lambda = 0.1 * inf_norm(&matvec_t(&a, &centered));
        let f = SeparableFunction::new(
            b.iter()
                .map(|&bi| FunctionTerm::new(BaseFunction::Logistic).with_d(-bi))
                .collect(),
        );
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::Abs).with_c(lambda), self.n);
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        self.meta.lambda = Some(lambda);
        (a, f, g)
    }

    fn lp(&mut self) -> Parts {
        let (m, n) = (self.m, self.n);
        let a = self.matrix(m, n, normal(0.0, 1.0));
        let mut r = self.stream(stream::PLANTED);
        let nd = normal(0.0, 1.0 / n as f64);
        let v: Vec<f64> = (0..n).map(|_| nd.sample(&mut r)).collect();
        let mut r = self.stream(stream::NOISE);
        let ud = uniform(0.0, 0.1);
        let b: Vec<f64> = matvec(&a, &v).iter().map(|s| s + ud.sample(&mut r)).collect();
        let mut r = self.stream(stream::AUX);
        let u: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
        let c: Vec<f64> = matvec_t(&a, &u).into_iter().map(|t| -t).collect();
        let f = terms(BaseFunction::IndLe0, &b);
        let g = SeparableFunction::new(c.iter().map(|&cj| FunctionTerm::new(BaseFunction::Zero).with_d(cj)).collect());
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        self.meta.c = Some(c);
        (a, f, g)
    }

    fn nnls(&mut self) -> Parts {
        let (m, n) = (self.m, self.n);
        let a = self.matrix(m, n, normal(0.0, 1.0));
        let mut r = self.stream(stream::PLANTED);
        let nd = normal(1.0 / n as f64, 1.0 / n as f64);
        let v: Vec<f64> = (0..n).map(|_| nd.sample(&mut r)).collect();
        let noise = self.gaussian_noise(m, 0.25);
        let b: Vec<f64> = matvec(&a, &v).iter().zip(&noise).map(|(s, e)| s + e).collect();
        let f = terms(BaseFunction::Square, &b);
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::IndGe0), n);
        self.meta.planted = Some(v);
        self.meta.b = Some(b);
        self.meta.notes.push("loss is (1/2)||Ax - b||^2".into());
        (a, f, g)
    }

    fn portfolio(&mut self) -> Parts {
        let (k, n) = (self.m, self.n);
        let gamma = 1.0;
        // F is n x k; the constraint matrix stacks F^T over a row of ones.
        let ft = self.matrix(n, k, normal(0.0, 1.0)).transpose();
        let mut a = ft.insert_row(k, 1.0);
        a.row_mut(k).fill(1.0);
        let mut r = self.stream(stream::AUX);
        let dd = uniform(0.0, (k as f64).sqrt());
        let diag: Vec<f64> = (0..n).map(|_| dd.sample(&mut r)).collect();
        let mut r = self.stream(stream::PLANTED);
        let nd = normal(0.0, 1.0);
        let mu: Vec<f64> = (0..n).map(|_| nd.sample(&mut r)).collect();
        let g = SeparableFunction::new(
            mu.iter()
                .zip(&diag)
                .map(|(&mj, &dj)| FunctionTerm::new(BaseFunction::IndGe0).with_d(-mj).with_e(2.0 * gamma * dj))
                .collect(),
        );
        let mut fterms = vec![FunctionTerm::new(BaseFunction::Zero).with_e(2.0 * gamma); k];
        fterms.push(FunctionTerm::new(BaseFunction::IndEq0).with_b(1.0));
        self.meta.c = Some(mu);
        self.meta.notes.push(format!("risk aversion gamma = {gamma}"));
        self.meta.notes.push(format!("factor count k = {k}, asset count n = {n}"));
        (a, SeparableFunction::new(fterms), g)
    }

    fn svm(&mut self) -> Parts {
        let (m, n) = (self.m, self.n);
        let lambda = 1.0;
        let half = m / 2;
        let labels: Vec<f64> = (0..m).map(|i| if i < half { 1.0 } else { -1.0 }).collect();
        let var = 1.0 / n as f64;
        let (pos, neg) = (normal(1.0 / n as f64, var), normal(-1.0 / n as f64, var));
        let mut r = self.stream(stream::MATRIX);
        let mut data = Vec::with_capacity(m * n);
        for &li in &labels {
            let dist = if li > 0.0 { pos } else { neg };
            data.extend((0..n).map(|_| li * dist.sample(&mut r)));
        }
        let a = DMatrix::from_row_slice(m, n, &data);
        let f = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::MaxPos0).with_b(-1.0).with_c(lambda), m);
        let g = SeparableFunction::repeat(FunctionTerm::new(BaseFunction::Square).with_c(2.0), n);
        self.meta.b = Some(labels);
        self.meta.lambda = Some(lambda);
        self.meta.notes.push("constraint matrix is diag(b) A".into());
        (a, f, g)
    }
}

/// The unlabelled SVM feature matrix, recomputed for checks.
pub fn svm_features(meta: &Metadata, a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let labels = meta.b.as_ref()?;
    let mut out = a.clone();
    for (i, li) in labels.iter().enumerate() {
        out.row_mut(i).scale_mut(*li);
    }
    Some(out)
}
