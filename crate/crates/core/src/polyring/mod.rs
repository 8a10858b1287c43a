//! Exact sparse multivariate polynomial arithmetic.
//!
//! Polynomials are stored as maps from exponent vectors to arbitrary
//! precision rational coefficients, ordered graded reverse-lexicographically
//! so that iteration (and therefore printing and constraint indexing
//! downstream) is deterministic. All arithmetic in this module is exact;
//! floating point enters the pipeline only at SDP assembly.

mod matrix;
mod parse;
mod poly;

pub use matrix::PolyMatrix;
pub use parse::{parse_poly, ParseError, ParseErrorKind};
pub use poly::{monomial_display, rational_to_f64, Polynomial};

use std::cmp::Ordering;

use num_rational::BigRational;
use thiserror::Error;

/// Exact coefficient type used throughout the symbolic layer.
pub type Coeff = BigRational;

/// Errors from polynomial-matrix operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("determinant requires a square matrix, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("matrix dimensions {0}x{1} and {2}x{3} do not multiply")]
    DimensionMismatch(usize, usize, usize, usize),
}

/// A power product `x_1^{a_1} ... x_n^{a_n}`, stored as its exponent vector.
///
/// The `Ord` impl is graded reverse-lexicographic (ascending), so a
/// `BTreeMap` keyed by monomials iterates from the smallest monomial up.
/// Only monomials over the same ambient variable count may be compared.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    /// The constant monomial `1` in `n` variables.
    pub fn one(n: usize) -> Self {
        Monomial { exps: vec![0; n] }
    }

    /// The single variable `x_i` (0-based) in `n` variables.
    pub fn var(n: usize, i: usize) -> Self {
        assert!(i < n, "variable index {i} out of range for {n} variables");
        let mut exps = vec![0; n];
        exps[i] = 1;
        Monomial { exps }
    }

    pub fn from_exponents(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn nvars(&self) -> usize {
        self.exps.len()
    }

    /// Total degree (sum of exponents).
    pub fn degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Exact monomial quotient, or `None` if some exponent would go negative.
    pub fn div(&self, other: &Monomial) -> Option<Monomial> {
        debug_assert_eq!(self.exps.len(), other.exps.len());
        let mut exps = Vec::with_capacity(self.exps.len());
        for (a, b) in self.exps.iter().zip(&other.exps) {
            if a < b {
                return None;
            }
            exps.push(a - b);
        }
        Some(Monomial { exps })
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        debug_assert_eq!(
            self.exps.len(),
            other.exps.len(),
            "comparing monomials from different rings"
        );
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {
                // Same degree: the monomial with the smaller exponent in the
                // rightmost differing position is the larger one.
                for i in (0..self.exps.len()).rev() {
                    match self.exps[i].cmp(&other.exps[i]) {
                        Ordering::Equal => continue,
                        ord => return ord.reverse(),
                    }
                }
                Ordering::Equal
            }
            ord => ord,
        }
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::fmt::Debug for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Monomial({:?})", self.exps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(exps: &[u32]) -> Monomial {
        Monomial::from_exponents(exps.to_vec())
    }

    #[test]
    fn grevlex_orders_by_degree_first() {
        assert!(m(&[2, 0]) > m(&[1, 0]));
        assert!(m(&[0, 3]) > m(&[1, 1]));
    }

    #[test]
    fn grevlex_ties_broken_reverse_lexicographically() {
        // x^2 > x*y > y^2 within degree 2
        assert!(m(&[2, 0]) > m(&[1, 1]));
        assert!(m(&[1, 1]) > m(&[0, 2]));
        // x^4 y^2 > x^2 y^4 within degree 6
        assert!(m(&[4, 2]) > m(&[2, 4]));
        // x > z in three variables
        assert!(m(&[1, 0, 0]) > m(&[0, 0, 1]));
    }

    #[test]
    fn monomial_quotient() {
        assert_eq!(m(&[3, 1]).div(&m(&[1, 1])), Some(m(&[2, 0])));
        assert_eq!(m(&[1, 0]).div(&m(&[0, 1])), None);
    }
}
