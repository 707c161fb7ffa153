//! Dense univariate polynomials with multiplication-cost accounting.
//!
//! Coefficients are stored constant term first. Every evaluation routine
//! reports a [`MultCount`] so that schemes can be compared by the cost that
//! matters under leveled homomorphic evaluation: multiplications and the
//! depth of the longest multiplication chain.

mod eval;
mod fit;
mod plan;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{
    eval_horner, eval_paterson_stockmeyer, horner_with, paterson_stockmeyer_with, powers, CountingEvaluator,
    PolyEvaluator, Tracked,
};
pub use fit::fit_least_squares;
pub use plan::{mult_depth_of_plan, Plan, PlanNode};

/// Largest degree any algebraic operation may produce unless overridden.
pub const DEFAULT_DEGREE_CAP: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("result degree {degree} exceeds the cap of {cap}")]
    DegreeLimitExceeded { degree: usize, cap: usize },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("least-squares system is ill-conditioned (relative residual {0:e})")]
    IllConditioned(f64),
    #[error("evaluation plan contains a cycle through node {0}")]
    CyclicPlan(usize),
    #[error("plan node {node} references missing node {target}")]
    DanglingReference { node: usize, target: usize },
    #[error("malformed polynomial text at line {line}: {msg}")]
    Malformed { line: usize, msg: String },
}

/// Multiplication cost of an evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MultCount {
    /// Ciphertext-by-ciphertext multiplications.
    pub ct_mults: u64,
    /// Multiplications by a known constant.
    pub scalar_mults: u64,
    /// Longest chain of multiplications from the input to the result.
    pub depth: u64,
}

/// A dense real polynomial, `coeffs[i]` multiplies `x^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<f64>", into = "Vec<f64>")]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl From<Vec<f64>> for Polynomial {
    fn from(coeffs: Vec<f64>) -> Self {
        Polynomial::new(coeffs)
    }
}

impl From<Polynomial> for Vec<f64> {
    fn from(p: Polynomial) -> Self {
        p.coeffs
    }
}

impl Polynomial {
    /// Builds a polynomial, trimming trailing zeros. An empty list is the
    /// zero polynomial.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && coeffs[coeffs.len() - 1] == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn zero() -> Self {
        Polynomial { coeffs: vec![0.0] }
    }

    pub fn constant(c: f64) -> Self {
        Polynomial::new(vec![c])
    }

    /// The polynomial `x`.
    pub fn identity() -> Self {
        Polynomial { coeffs: vec![0.0, 1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == 0.0
    }

    /// Naive power-sum evaluation, no cost accounting.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n)
            .map(|i| {
                self.coeffs.get(i).copied().unwrap_or(0.0) + other.coeffs.get(i).copied().unwrap_or(0.0)
            })
            .collect();
        Polynomial::new(coeffs)
    }

    pub fn scale(&self, c: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|&a| a * c).collect())
    }

    pub fn add_constant(&self, c: f64) -> Polynomial {
        let mut coeffs = self.coeffs.clone();
        coeffs[0] += c;
        Polynomial::new(coeffs)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial, PolyError> {
        self.mul_with_cap(other, DEFAULT_DEGREE_CAP)
    }

    pub fn mul_with_cap(&self, other: &Polynomial, cap: usize) -> Result<Polynomial, PolyError> {
        if self.is_zero() || other.is_zero() {
            return Ok(Polynomial::zero());
        }
        let degree = self.degree() + other.degree();
        if degree > cap {
            return Err(PolyError::DegreeLimitExceeded { degree, cap });
        }
        let mut out = vec![0.0; degree + 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Ok(Polynomial::new(out))
    }

    /// `self(inner(x))`, evaluated by Horner's rule over polynomials.
    pub fn compose(&self, inner: &Polynomial) -> Result<Polynomial, PolyError> {
        self.compose_with_cap(inner, DEFAULT_DEGREE_CAP)
    }

    pub fn compose_with_cap(&self, inner: &Polynomial, cap: usize) -> Result<Polynomial, PolyError> {
        let degree = self.degree().saturating_mul(inner.degree());
        if degree > cap {
            return Err(PolyError::DegreeLimitExceeded { degree, cap });
        }
        let mut acc = Polynomial::constant(self.coeffs[self.coeffs.len() - 1]);
        for &c in self.coeffs.iter().rev().skip(1) {
            acc = acc.mul_with_cap(inner, cap)?.add_constant(c);
        }
        Ok(acc)
    }

    /// Parses the one-coefficient-per-line text format.
    pub fn from_text(text: &str) -> Result<Polynomial, PolyError> {
        let mut coeffs = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let v = f64::from_str(line).map_err(|e| PolyError::Malformed {
                line: idx + 1,
                msg: e.to_string(),
            })?;
            coeffs.push(v);
        }
        if coeffs.is_empty() {
            return Err(PolyError::Malformed {
                line: 0,
                msg: "no coefficients".into(),
            });
        }
        Ok(Polynomial::new(coeffs))
    }

    /// One coefficient per line, constant term first, shortest round-trip
    /// decimal representation.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                s.push('\n');
            }
            s.push_str(&c.to_string());
        }
        s
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c == 0.0 && !(self.is_zero() && i == 0) {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match i {
                0 => write!(f, "{c}")?,
                1 => write!(f, "{c}·x")?,
                _ => write!(f, "{c}·x^{i}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_trailing_zeros() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.coeffs(), &[1.0, 2.0]);
        assert_eq!(p.degree(), 1);
        assert!(Polynomial::new(vec![]).is_zero());
        assert!(Polynomial::new(vec![0.0, 0.0]).is_zero());
    }

    #[test]
    fn product_of_conjugates() {
        let a = Polynomial::new(vec![1.0, 1.0]);
        let b = Polynomial::new(vec![1.0, -1.0]);
        assert_eq!(a.mul(&b).unwrap().coeffs(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn compose_square_with_shift() {
        let sq = Polynomial::new(vec![0.0, 0.0, 1.0]);
        let shift = Polynomial::new(vec![1.0, 1.0]);
        assert_eq!(sq.compose(&shift).unwrap().coeffs(), &[1.0, 2.0, 1.0]);
    }

    #[test]
    fn degree_cap_is_enforced() {
        let p = Polynomial::new(vec![0.0; 100].into_iter().chain([1.0]).collect());
        let err = p.compose_with_cap(&p, 4096).unwrap_err();
        assert_eq!(
            err,
            PolyError::DegreeLimitExceeded {
                degree: 10000,
                cap: 4096
            }
        );
        assert!(p.mul_with_cap(&p, 150).is_err());
        assert!(p.mul_with_cap(&p, 200).is_ok());
    }

    #[test]
    fn mul_by_zero_is_zero() {
        let p = Polynomial::new(vec![1.0, 2.0, 3.0]);
        assert!(p.mul(&Polynomial::zero()).unwrap().is_zero());
    }

    #[test]
    fn text_format() {
        let p = Polynomial::new(vec![1.1110537229, 0.5, 0.054235537]);
        assert_eq!(p.to_text(), "1.1110537229\n0.5\n0.054235537");
        assert_eq!(Polynomial::from_text(&p.to_text()).unwrap(), p);
        assert_eq!(Polynomial::identity().to_text(), "0\n1");
        assert!(matches!(
            Polynomial::from_text("1\nabc\n"),
            Err(PolyError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn compose_matches_pointwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let p = Polynomial::new((0..6).map(|_| rng.random_range(-1.0..1.0)).collect());
        let q = Polynomial::new((0..5).map(|_| rng.random_range(-1.0..1.0)).collect());
        let pq = p.compose(&q).unwrap();
        assert_eq!(pq.degree(), 20);
        for _ in 0..20 {
            let x: f64 = rng.random_range(-1.0..1.0);
            let want = p.eval(q.eval(x));
            assert!((pq.eval(x) - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }
}
