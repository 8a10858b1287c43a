//! Sparse polynomials with exact rational coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Coeff, Monomial};

/// A multivariate polynomial over the rationals.
///
/// Terms are keyed by monomial in ascending graded reverse-lex order and
/// zero coefficients are never stored, so structural equality coincides
/// with mathematical equality.
#[derive(Clone, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, Coeff>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, Coeff::one())
    }

    pub fn constant(nvars: usize, c: Coeff) -> Self {
        let mut p = Self::zero(nvars);
        if !c.is_zero() {
            p.terms.insert(Monomial::one(nvars), c);
        }
        p
    }

    pub fn constant_i64(nvars: usize, c: i64) -> Self {
        Self::constant(nvars, Coeff::from_integer(BigInt::from(c)))
    }

    /// The variable `x_i` (0-based).
    pub fn variable(nvars: usize, i: usize) -> Self {
        let mut p = Self::zero(nvars);
        p.terms.insert(Monomial::var(nvars, i), Coeff::one());
        p
    }

    pub fn from_term(nvars: usize, mono: Monomial, coeff: Coeff) -> Self {
        assert_eq!(mono.nvars(), nvars);
        let mut p = Self::zero(nvars);
        if !coeff.is_zero() {
            p.terms.insert(mono, coeff);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    /// Constant term (zero if absent).
    pub fn constant_term(&self) -> Coeff {
        self.coeff(&Monomial::one(self.nvars))
    }

    /// Total degree; the zero polynomial reports degree 0.
    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .next_back()
            .map(Monomial::degree)
            .unwrap_or(0)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Terms in ascending graded reverse-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    pub fn coeff(&self, mono: &Monomial) -> Coeff {
        self.terms.get(mono).cloned().unwrap_or_else(Coeff::zero)
    }

    /// Largest monomial and its coefficient, if nonzero.
    pub fn leading_term(&self) -> Option<(&Monomial, &Coeff)> {
        self.terms.iter().next_back()
    }

    /// Largest coefficient magnitude, zero for the zero polynomial.
    pub fn max_abs_coeff(&self) -> Coeff {
        self.terms
            .values()
            .map(Signed::abs)
            .max()
            .unwrap_or_else(Coeff::zero)
    }

    /// Sum of coefficient magnitudes.
    pub fn sum_abs_coeff(&self) -> Coeff {
        self.terms.values().map(Signed::abs).sum()
    }

    fn add_term(&mut self, mono: Monomial, coeff: Coeff) {
        if coeff.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mono) {
            Entry::Vacant(e) => {
                e.insert(coeff);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += coeff;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Coeff) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, mono: &Monomial) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, v)| (m.mul(mono), v.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::one(self.nvars);
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    /// Partial derivative with respect to `x_i` (0-based).
    pub fn differentiate(&self, i: usize) -> Polynomial {
        assert!(i < self.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (mono, coeff) in &self.terms {
            let e = mono.exponents()[i];
            if e == 0 {
                continue;
            }
            let mut exps = mono.exponents().to_vec();
            exps[i] -= 1;
            out.add_term(
                Monomial::from_exponents(exps),
                coeff * Coeff::from_integer(BigInt::from(e)),
            );
        }
        out
    }

    /// Gradient as a vector of partials.
    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|i| self.differentiate(i)).collect()
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate(&self, point: &[Coeff]) -> Coeff {
        assert_eq!(point.len(), self.nvars);
        let mut acc = Coeff::zero();
        for (mono, coeff) in &self.terms {
            let mut term = coeff.clone();
            for (x, &e) in point.iter().zip(mono.exponents()) {
                if e > 0 {
                    term *= rat_pow(x, e);
                }
            }
            acc += term;
        }
        acc
    }

    /// Floating-point evaluation; coefficients are rounded once per term.
    pub fn evaluate_f64(&self, point: &[f64]) -> f64 {
        assert_eq!(point.len(), self.nvars);
        let mut acc = 0.0;
        for (mono, coeff) in &self.terms {
            let mut term = rational_to_f64(coeff);
            for (x, &e) in point.iter().zip(mono.exponents()) {
                if e > 0 {
                    term *= x.powi(e as i32);
                }
            }
            acc += term;
        }
        acc
    }

    /// Exact quotient `self / divisor`, or `None` when the division leaves a
    /// remainder. Single-divisor long division: each step cancels the current
    /// leading term, which strictly decreases in the monomial order.
    pub fn exact_div(&self, divisor: &Polynomial) -> Option<Polynomial> {
        assert_eq!(self.nvars, divisor.nvars);
        let (div_mono, div_coeff) = divisor.leading_term()?;
        let mut rem = self.clone();
        let mut quot = Polynomial::zero(self.nvars);
        while let Some((lead_mono, lead_coeff)) = rem.leading_term() {
            let mono = lead_mono.div(div_mono)?;
            let coeff = lead_coeff / div_coeff;
            quot.add_term(mono.clone(), coeff.clone());
            let t = Polynomial::from_term(self.nvars, mono, coeff);
            rem = &rem - &(&t * divisor);
        }
        Some(quot)
    }

    /// Rendered with the given variable names, terms in descending order.
    pub fn to_text<S: AsRef<str>>(&self, vars: &[S]) -> String {
        assert_eq!(vars.len(), self.nvars);
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut out = String::new();
        for (idx, (mono, coeff)) in self.terms.iter().rev().enumerate() {
            let neg = coeff.is_negative();
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mag = coeff.abs();
            let mono_txt = monomial_text(mono, vars);
            match mono_txt {
                None => out.push_str(&format_coeff(&mag)),
                Some(txt) => {
                    if !mag.is_one() {
                        out.push_str(&format_coeff(&mag));
                        out.push('*');
                    }
                    out.push_str(&txt);
                }
            }
        }
        out
    }
}

/// Render one monomial with the given names; the empty monomial is "1".
pub fn monomial_display<S: AsRef<str>>(mono: &Monomial, vars: &[S]) -> String {
    monomial_text(mono, vars).unwrap_or_else(|| "1".to_string())
}

fn monomial_text<S: AsRef<str>>(mono: &Monomial, vars: &[S]) -> Option<String> {
    if mono.is_one() {
        return None;
    }
    let parts: Vec<String> = mono
        .exponents()
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0)
        .map(|(i, &e)| {
            if e == 1 {
                vars[i].as_ref().to_string()
            } else {
                format!("{}^{}", vars[i].as_ref(), e)
            }
        })
        .collect();
    Some(parts.join("*"))
}

fn format_coeff(c: &Coeff) -> String {
    if c.denom().is_one() {
        c.numer().to_string()
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

fn rat_pow(base: &Coeff, mut e: u32) -> Coeff {
    let mut acc = Coeff::one();
    let mut b = base.clone();
    while e > 0 {
        if e & 1 == 1 {
            acc *= &b;
        }
        e >>= 1;
        if e > 0 {
            b = &b * &b;
        }
    }
    acc
}

/// Round a rational to the nearest representable double, ties to even.
///
/// Correct rounding matters: a double printed as its shortest decimal and
/// re-read through the exact parser must come back bit-identical, and the
/// decimal's numerator usually exceeds 2^53.
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.numer().is_zero() {
        return 0.0;
    }
    let neg = r.numer().is_negative();
    let n = r.numer().magnitude();
    let d = r.denom().magnitude();
    let mag = if n.bits() <= 53 && d.bits() <= 53 {
        // Both convert exactly; the division rounds once, correctly.
        n.to_f64().unwrap() / d.to_f64().unwrap()
    } else {
        // Scale by a power of two so the integer quotient keeps 56..58
        // bits, round the quotient to odd on any remainder, and let the
        // final conversion round to nearest: with two guard bits past the
        // 53-bit mantissa the composition equals one correct rounding.
        let shift = n.bits() as i64 - d.bits() as i64 - 56;
        let (num, den) = if shift >= 0 {
            (n.clone(), d.clone() << shift as u64)
        } else {
            (n.clone() << (-shift) as u64, d.clone())
        };
        let q = &num / &den;
        let q = if num == &q * &den {
            q
        } else {
            q | num_bigint::BigUint::from(1u32)
        };
        scale_pow2(q.to_f64().unwrap_or(f64::INFINITY), shift)
    };
    if neg {
        -mag
    } else {
        mag
    }
}

/// `v * 2^e` with the scale applied in exactly representable factors.
fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    let pow2 = |k: i64| f64::from_bits(((k + 1023) as u64) << 52);
    while e > 1023 {
        v *= pow2(1023);
        e -= 1023;
        if !v.is_finite() {
            return v;
        }
    }
    while e < -1022 {
        v *= pow2(-1022);
        e += 1022;
        if v == 0.0 {
            return v;
        }
    }
    v * pow2(e)
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (m.clone(), -c.clone()))
                .collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = (1..=self.nvars).map(|i| format!("x{i}")).collect();
        write!(f, "{}", self.to_text(&names))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: i64) -> Coeff {
        Coeff::from_integer(BigInt::from(v))
    }

    fn xyz() -> (Polynomial, Polynomial, Polynomial) {
        (
            Polynomial::variable(3, 0),
            Polynomial::variable(3, 1),
            Polynomial::variable(3, 2),
        )
    }

    #[test]
    fn arithmetic_cancels_to_zero() {
        let (x, y, _) = xyz();
        let p = &(&x + &y) * &(&x - &y);
        let q = &x.pow(2) - &y.pow(2);
        assert_eq!(p, q);
        assert!((&p - &q).is_zero());
    }

    #[test]
    fn derivative_of_product_matches_leibniz() {
        let (x, y, z) = xyz();
        let p = &(&x * &y) + &z.pow(3);
        let q = &x.pow(2) - &y;
        let lhs = (&p * &q).differentiate(0);
        let rhs = &(&p.differentiate(0) * &q) + &(&p * &q.differentiate(0));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn evaluation_is_a_ring_homomorphism() {
        let (x, y, z) = xyz();
        let p = &(&x * &y) - &z.scale(&big(7));
        let q = &y.pow(2) + &Polynomial::constant_i64(3, 5);
        let pt = vec![
            big(2),
            big(-3),
            Coeff::new(BigInt::from(1), BigInt::from(2)),
        ];
        assert_eq!((&p * &q).evaluate(&pt), p.evaluate(&pt) * q.evaluate(&pt));
        assert_eq!((&p + &q).evaluate(&pt), p.evaluate(&pt) + q.evaluate(&pt));
    }

    #[test]
    fn exact_division_round_trip() {
        let (x, y, _) = xyz();
        let a = &(&x.pow(2) + &y) + &Polynomial::one(3);
        let b = &(&x - &y.pow(3)) + &Polynomial::constant_i64(3, 2);
        let prod = &a * &b;
        assert_eq!(prod.exact_div(&b), Some(a.clone()));
        let with_rem = &prod + &Polynomial::one(3);
        assert_eq!(with_rem.exact_div(&b), None);
    }

    #[test]
    fn text_rendering() {
        let (x, y, z) = xyz();
        let p = &(&x.pow(2).scale(&big(-1)) + &(&x * &y).scale(&big(3)))
            - &z.scale(&Coeff::new(BigInt::from(1), BigInt::from(2)));
        assert_eq!(p.to_text(&["x", "y", "z"]), "-x^2 + 3*x*y - 1/2*z");
        assert_eq!(Polynomial::zero(3).to_text(&["x", "y", "z"]), "0");
    }

    #[test]
    fn degree_and_terms() {
        let (x, y, _) = xyz();
        let p = &(&x.pow(3) * &y) + &y;
        assert_eq!(p.degree(), 4);
        assert_eq!(p.num_terms(), 2);
        assert_eq!(Polynomial::zero(3).degree(), 0);
    }

    #[test]
    fn rational_to_f64_handles_huge_values() {
        let huge = BigInt::from(10).pow(400u32);
        let r = Coeff::new(huge.clone() * 3, huge);
        assert!((rational_to_f64(&r) - 3.0).abs() < 1e-12);
        let tiny = Coeff::new(BigInt::from(1), BigInt::from(10).pow(400u32));
        assert!(rational_to_f64(&tiny).abs() < 1e-300);
        assert_eq!(rational_to_f64(&Coeff::zero()), 0.0);
        assert!(
            (rational_to_f64(&Coeff::new(BigInt::from(-1), BigInt::from(3))) + 1.0 / 3.0).abs()
                < 1e-16
        );
    }

    #[test]
    fn doubles_survive_printing_and_exact_reparsing() {
        // A double rendered by Display and read back through the exact
        // decimal parser must convert to the identical double; certificate
        // round trips depend on this.
        let vars = vec!["x".to_string()];
        let mut values = vec![
            0.1,
            1.0 / 3.0,
            0.1 + 0.2,
            std::f64::consts::PI,
            2.0_f64.sqrt(),
            1e-9,
            6.02214076e23,
            f64::MAX,
            123456789.12345679,
            -7.25e-12,
        ];
        for i in 1..300i32 {
            values.push((i as f64).sin() * (i as f64).exp2().recip() * 1e3);
            values.push((i as f64).cos() * (i as f64 / 7.0));
        }
        for v in values {
            let text = format!("{v}");
            let parsed = crate::polyring::parse_poly(&text, &vars).unwrap();
            let back = rational_to_f64(&parsed.constant_term());
            assert_eq!(back.to_bits(), v.to_bits(), "value {v} reparsed as {back}");
        }
    }
}
