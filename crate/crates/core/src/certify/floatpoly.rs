//! Polynomials with double coefficients.
//!
//! These sit on the certificate side of the exact/floating boundary: Gram
//! eigenvectors and multiplier values come back from the solver as doubles
//! and stay doubles until verification lifts them, coefficient by
//! coefficient, to the exact rationals they denote.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use num_rational::BigRational;

use crate::polyring::{monomial_display, parse_poly, Monomial, ParseError, Polynomial};

/// Sparse polynomial over `f64`; zero coefficients are never stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FloatPoly {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl FloatPoly {
    pub fn zero(nvars: usize) -> Self {
        FloatPoly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    /// Round each exact coefficient to the nearest double.
    pub fn from_exact(p: &Polynomial) -> Self {
        Self::from_terms(
            p.nvars(),
            p.terms()
                .map(|(m, c)| (m.clone(), crate::polyring::rational_to_f64(c))),
        )
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &f64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &Monomial) -> f64 {
        self.terms.get(mono).copied().unwrap_or(0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, mono: Monomial, c: f64) {
        assert_eq!(mono.nvars(), self.nvars);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(mono) {
            Entry::Vacant(slot) => {
                slot.insert(c);
            }
            Entry::Occupied(mut slot) => {
                *slot.get_mut() += c;
                if *slot.get() == 0.0 {
                    slot.remove();
                }
            }
        }
    }

    pub fn evaluate(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars);
        let mut acc = 0.0;
        for (mono, &c) in &self.terms {
            let mut term = c;
            for (x, &e) in point.iter().zip(mono.exponents()) {
                if e > 0 {
                    term *= x.powi(e as i32);
                }
            }
            acc += term;
        }
        acc
    }

    /// Lift to the exact polynomial whose coefficients are the rationals
    /// the doubles denote. `None` if any coefficient is not finite.
    pub fn to_exact(&self) -> Option<Polynomial> {
        let mut out = Polynomial::zero(self.nvars);
        for (m, &c) in &self.terms {
            let exact = BigRational::from_float(c)?;
            out = &out + &Polynomial::from_term(self.nvars, m.clone(), exact);
        }
        Some(out)
    }

    /// Rendered with the given variable names, terms in descending order.
    /// Coefficients print as shortest round-trip decimals, so the output
    /// reparses to the identical polynomial.
    pub fn to_text<S: AsRef<str>>(&self, vars: &[S]) -> String {
        assert_eq!(vars.len(), self.nvars);
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (mono, &coeff)) in self.terms.iter().rev().enumerate() {
            let neg = coeff < 0.0;
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mag = coeff.abs();
            if mono.is_one() {
                out.push_str(&format!("{mag}"));
            } else {
                if mag != 1.0 {
                    out.push_str(&format!("{mag}*"));
                }
                out.push_str(&monomial_display(mono, vars));
            }
        }
        out
    }

    /// Parse with the shared polynomial grammar, rounding each exact
    /// coefficient to the nearest double.
    pub fn parse<S: AsRef<str>>(src: &str, vars: &[S]) -> Result<Self, ParseError> {
        Ok(Self::from_exact(&parse_poly(src, vars)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars2() -> Vec<String> {
        vec!["x".to_string(), "y".to_string()]
    }

    #[test]
    fn terms_cancel_and_zeros_vanish() {
        let m = Monomial::var(2, 0);
        let mut p = FloatPoly::zero(2);
        p.add_term(m.clone(), 1.5);
        p.add_term(m.clone(), -1.5);
        assert!(p.is_zero());
        p.add_term(m, 0.0);
        assert!(p.is_zero());
    }

    #[test]
    fn text_matches_the_exact_printer_conventions() {
        let p = FloatPoly::from_terms(
            2,
            [
                (Monomial::from_exponents(vec![2, 0]), -1.0),
                (Monomial::from_exponents(vec![1, 1]), 0.25),
                (Monomial::one(2), -0.5),
            ],
        );
        assert_eq!(p.to_text(&vars2()), "-x^2 + 0.25*x*y - 0.5");
        assert_eq!(FloatPoly::zero(2).to_text(&vars2()), "0");
    }

    #[test]
    fn printing_and_parsing_round_trips_bit_for_bit() {
        let awkward = [0.1 + 0.2, 1.0 / 3.0, -2.0_f64.sqrt(), 1e-9, 123.456];
        let p = FloatPoly::from_terms(
            2,
            awkward
                .iter()
                .enumerate()
                .map(|(k, &c)| (Monomial::from_exponents(vec![k as u32, 1]), c)),
        );
        let text = p.to_text(&vars2());
        let q = FloatPoly::parse(&text, &vars2()).unwrap();
        assert_eq!(p, q);
        for ((ma, ca), (mb, cb)) in p.terms().zip(q.terms()) {
            assert_eq!(ma, mb);
            assert_eq!(ca.to_bits(), cb.to_bits());
        }
        assert_eq!(q.to_text(&vars2()), text);
    }

    #[test]
    fn exact_lift_is_the_denoted_rational() {
        let p = FloatPoly::from_terms(1, [(Monomial::var(1, 0), 0.5)]);
        let exact = p.to_exact().unwrap();
        let half = BigRational::new(1.into(), 2.into());
        assert_eq!(exact.coeff(&Monomial::var(1, 0)), half);
        // 0.1 is not 1/10: the lift preserves the double, not the decimal.
        let q = FloatPoly::constant(1, 0.1).to_exact().unwrap();
        assert_ne!(q.constant_term(), BigRational::new(1.into(), 10.into()));
        assert_eq!(q.constant_term(), BigRational::from_float(0.1).unwrap());
    }

    #[test]
    fn evaluation_matches_exact_evaluation() {
        let vars = vars2();
        let p = FloatPoly::parse("x^2*y - 3*x + 0.5", &vars).unwrap();
        let at = [1.5, -2.0];
        let exact = parse_poly("x^2*y - 3*x + 0.5", &vars).unwrap();
        assert!((p.evaluate(&at) - exact.evaluate_f64(&at)).abs() < 1e-12);
    }
}
