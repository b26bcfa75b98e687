//! Monotone polynomial systems `X = f(X)` with non-negative rational
//! coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::OnceLock;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::graph::SccDag;
use crate::linalg::{NumVec, SquareMat};
use crate::scalar::{compact_string, Rational, Scalar};

/// `coeff * prod_v X_v^e_v`, with a strictly positive coefficient.
///
/// Exponents are kept sorted by variable index with every power >= 1, so two
/// monomials with the same signature compare equal on `exps`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    pub coeff: Rational,
    pub exps: Vec<(usize, u32)>,
}

impl Monomial {
    pub fn new(coeff: Rational, exps: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut map = BTreeMap::new();
        for (v, e) in exps {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Monomial {
            coeff,
            exps: map.into_iter().collect(),
        }
    }

    pub fn constant(coeff: Rational) -> Self {
        Monomial { coeff, exps: vec![] }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&(_, e)| e).sum()
    }

    pub fn power_of(&self, var: usize) -> u32 {
        self.exps
            .iter()
            .find(|&&(v, _)| v == var)
            .map(|&(_, e)| e)
            .unwrap_or(0)
    }

    pub fn contains(&self, var: usize) -> bool {
        self.power_of(var) > 0
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        self.exps
            .iter()
            .fold(T::from_rational(&self.coeff), |acc, &(v, e)| acc * x[v].pow(e))
    }

    /// Partial derivative with respect to `var`, evaluated at `x`.
    pub fn eval_derivative<T: Scalar>(&self, var: usize, x: &[T]) -> T {
        let e = self.power_of(var);
        if e == 0 {
            return T::zero();
        }
        let mut acc = T::from_rational(&self.coeff) * T::from_u64(e as u64);
        for &(v, p) in &self.exps {
            let p = if v == var { p - 1 } else { p };
            acc = acc * x[v].pow(p);
        }
        acc
    }
}

/// A canonical polynomial: like terms merged, zero terms dropped, terms sorted
/// by exponent signature. Structural equality is polynomial equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Polynomial {
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(terms: impl IntoIterator<Item = Monomial>) -> Self {
        let mut merged: BTreeMap<Vec<(usize, u32)>, Rational> = BTreeMap::new();
        for m in terms {
            let slot = merged.entry(m.exps).or_insert_with(Rational::zero);
            *slot += m.coeff;
        }
        let mut terms: Vec<Monomial> = merged
            .into_iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|(exps, coeff)| Monomial { coeff, exps })
            .collect();
        terms.sort_by(|a, b| b.degree().cmp(&a.degree()).then_with(|| a.exps.cmp(&b.exps)));
        Polynomial { terms }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn constant_term(&self) -> Rational {
        self.terms
            .iter()
            .find(|m| m.exps.is_empty())
            .map(|m| m.coeff.clone())
            .unwrap_or_else(Rational::zero)
    }

    /// Linear coefficient of `var` (the derivative at 0).
    pub fn linear_coeff(&self, var: usize) -> Rational {
        self.terms
            .iter()
            .find(|m| m.exps == [(var, 1)])
            .map(|m| m.coeff.clone())
            .unwrap_or_else(Rational::zero)
    }

    pub fn mentions(&self, var: usize) -> bool {
        self.terms.iter().any(|m| m.contains(var))
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        self.terms.iter().fold(T::zero(), |acc, m| acc + m.eval(x))
    }
}

/// Where a system came from; gates the pPDA-specific thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SystemKind {
    #[default]
    General,
    /// Termination system of a pPDA; `strict` when every (p, X) pops to every
    /// state with positive probability.
    Termination { strict: bool },
}

/// A monotone system of polynomials `X = f(X)`.
///
/// Invariants: at least one variable, one equation per variable, all
/// coefficients strictly positive.
pub struct Msp {
    names: Vec<String>,
    equations: Vec<Polynomial>,
    kind: SystemKind,
    sccs: OnceLock<SccDag>,
    clean: OnceLock<bool>,
}

impl Msp {
    pub fn new(names: Vec<String>, equations: Vec<Polynomial>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::EmptySystem);
        }
        if names.len() != equations.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                got: equations.len(),
            });
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateVariable(name.clone()));
            }
        }
        let n = names.len();
        for p in &equations {
            for m in p.terms() {
                if m.coeff.is_negative() {
                    return Err(Error::NegativeCoefficient { line: 0, column: 0 });
                }
                if let Some(&(v, _)) = m.exps.iter().find(|&&(v, _)| v >= n) {
                    return Err(Error::UndefinedVariable {
                        name: format!("#{v}"),
                        line: 0,
                        column: 0,
                    });
                }
            }
        }
        Ok(Msp {
            names,
            equations,
            kind: SystemKind::General,
            sccs: OnceLock::new(),
            clean: OnceLock::new(),
        })
    }

    pub fn with_kind(mut self, kind: SystemKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn equations(&self) -> &[Polynomial] {
        &self.equations
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn is_quadratic(&self) -> bool {
        self.equations.iter().all(|p| p.degree() <= 2)
    }

    pub fn is_linear(&self) -> bool {
        self.equations.iter().all(|p| p.degree() <= 1)
    }

    pub fn is_clean(&self) -> bool {
        *self
            .clean
            .get_or_init(|| crate::transform::productive(self).iter().all(|&b| b))
    }

    /// Cached condensation of the dependence graph.
    pub fn scc_dag(&self) -> &SccDag {
        self.sccs.get_or_init(|| SccDag::build(self))
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.scc_dag().sccs.len() == 1
    }

    /// Constant-term vector `f(0)`.
    pub fn constants(&self) -> NumVec<Rational> {
        NumVec(self.equations.iter().map(Polynomial::constant_term).collect())
    }

    /// All stored coefficients.
    pub fn coefficients(&self) -> impl Iterator<Item = &Rational> {
        self.equations.iter().flat_map(|p| p.terms().iter().map(|m| &m.coeff))
    }

    pub fn eval<T: Scalar>(&self, x: &NumVec<T>) -> Result<NumVec<T>> {
        x.check_dim(self.dim())?;
        let y: Vec<T> = self.equations.iter().map(|p| p.eval(x.as_slice())).collect();
        if !y.iter().all(Scalar::is_finite) {
            return Err(Error::NonFinite);
        }
        Ok(NumVec(y))
    }

    /// Jacobian `f'(x)`: entry (i, k) is the partial derivative of f_i by X_k.
    pub fn jacobian<T: Scalar>(&self, x: &NumVec<T>) -> Result<SquareMat<T>> {
        x.check_dim(self.dim())?;
        let n = self.dim();
        let mut jac = SquareMat::<T>::zeros(n);
        for (i, p) in self.equations.iter().enumerate() {
            for m in p.terms() {
                for &(k, _) in &m.exps {
                    let d = m.eval_derivative(k, x.as_slice());
                    jac[(i, k)] = jac[(i, k)].clone() + d;
                }
            }
        }
        Ok(jac)
    }

    /// `f(1) <= 1` componentwise, i.e. the all-ones vector is a verified
    /// upper bound on the least fixed point.
    pub fn ones_is_post_fixed_point(&self) -> bool {
        let one = NumVec::<Rational>::ones(self.dim());
        self.eval(&one).map(|y| y.le(&one)).unwrap_or(false)
    }

    /// The subsystem on `keep` (in the given order) with every other variable
    /// replaced by the value from `values`.
    pub fn restrict(&self, keep: &[usize], values: &[Option<Rational>]) -> Result<Msp> {
        let mut position = vec![None; self.dim()];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = Some(new);
        }
        let mut equations = Vec::with_capacity(keep.len());
        for &old in keep {
            let mut terms = Vec::new();
            for m in self.equations[old].terms() {
                let mut coeff = m.coeff.clone();
                let mut exps = Vec::new();
                for &(v, e) in &m.exps {
                    match position[v] {
                        Some(nv) => exps.push((nv, e)),
                        None => {
                            let val = values[v].as_ref().ok_or(Error::DimensionMismatch {
                                expected: self.dim(),
                                got: keep.len(),
                            })?;
                            coeff *= num_traits::Pow::pow(val, e);
                        }
                    }
                }
                terms.push(Monomial::new(coeff, exps));
            }
            equations.push(Polynomial::new(terms));
        }
        let names = keep.iter().map(|&i| self.names[i].clone()).collect();
        Msp::new(names, equations)
    }

    /// Canonical text in the MSPE input format; parses back to an equal system.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, p) in self.names.iter().zip(&self.equations) {
            out.push_str(name);
            out.push_str(" = ");
            if p.is_zero() {
                out.push('0');
            }
            for (t, m) in p.terms().iter().enumerate() {
                if t > 0 {
                    out.push_str(" + ");
                }
                let unit = m.coeff.is_one() && !m.exps.is_empty();
                if !unit {
                    out.push_str(&compact_string(&m.coeff));
                }
                for (k, &(v, e)) in m.exps.iter().enumerate() {
                    if k > 0 || !unit {
                        out.push('*');
                    }
                    out.push_str(&self.names[v]);
                    if e > 1 {
                        out.push('^');
                        out.push_str(&e.to_string());
                    }
                }
            }
            out.push_str(";\n");
        }
        out
    }
}

impl Clone for Msp {
    fn clone(&self) -> Self {
        Msp {
            names: self.names.clone(),
            equations: self.equations.clone(),
            kind: self.kind,
            sccs: self.sccs.clone(),
            clean: self.clean.clone(),
        }
    }
}

impl PartialEq for Msp {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names && self.equations == other.equations
    }
}

impl fmt::Debug for Msp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Msp")
            .field("names", &self.names)
            .field("equations", &self.equations)
            .field("kind", &self.kind)
            .finish()
    }
}

impl fmt::Display for Msp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
