//! Least fixed points of monotone systems of polynomial equations `X = f(X)`.
//!
//! The crate parses systems (directly, or as termination systems of
//! probabilistic pushdown automata and back-button processes), analyses their
//! dependence structure, solves them with Kleene iteration, Newton's method or
//! the decomposed Newton method, and certifies how many bits of a Newton
//! iterate are correct.
//!
//! ```
//! use mspsolve::{parse_mspe, newton_solve, Rational, SolveOptions};
//!
//! let f = parse_mspe("X = 1/2*X*X + 1/2;").unwrap();
//! let trace = newton_solve::<Rational>(&f, &SolveOptions::max_iterations(3)).unwrap();
//! assert_eq!(trace.last()[0], Rational::new(7.into(), 8.into()));
//! ```

pub mod certify;
pub mod error;
pub mod generate;
pub mod graph;
pub mod linalg;
pub mod msp;
pub mod parse;
pub mod ppda;
pub mod scalar;
pub mod solve;
pub mod transform;

pub use certify::{
    certify, certify_newton, check_upper, cmin_mbits, cone_vector, search_upper, threshold_cone, threshold_ppda,
    threshold_scc, threshold_size, threshold_strict, valid_bits, Bounds, Certificate, CertifyOptions, Method,
    UpperChoice,
};
pub use error::{Error, Result};
pub use generate::{random_ppda, random_termination_system};
pub use graph::{dependence_graph, SccDag};
pub use linalg::{NumVec, SquareMat};
pub use msp::{Monomial, Msp, Polynomial, SystemKind};
pub use parse::{detect_format, parse_backbutton, parse_mspe, parse_ppda, InputFormat};
pub use ppda::{backbutton_mspe, termination_mspe, BackButton, Ppda, Rule, TerminationSystem};
pub use scalar::{Arith, Mode, Rational, Scalar};
pub use solve::{
    dnm_solve, kleene_solve, kleene_step, kleene_upper, newton_solve, newton_step, IterationTrace, SchemeKind, SolveOptions,
    StopRule,
};
pub use transform::{clean, quadratize, Quadratized};
