//! Convex optimization in graph form,
//! `minimize f(y) + g(x) subject to y = A x`,
//! with separable `f` and `g` built from a small library of scalar functions.

pub mod equilibrate;
pub mod error;
pub mod generators;
pub mod io;
pub mod model;
pub mod projection;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use model::{BaseFunction, FunctionTerm, GraphFormProblem, SeparableFunction};
pub use solver::{solve, SolveResult, Solver, SolverSettings, Status, WarmStart};
