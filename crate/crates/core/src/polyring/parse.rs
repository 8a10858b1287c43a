//! Recursive-descent parser for the polynomial expression grammar.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := ('-'|'+') unary | power
//! power  := atom ('^' natural)*
//! atom   := number | identifier | '(' expr ')'
//! ```
//!
//! Numbers may be integers or decimals; decimals are read exactly as
//! fractions over a power of ten. Division is admitted only when the divisor
//! reduces to a nonzero constant, which keeps every parse a polynomial.

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use super::{Coeff, Polynomial};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at offset {position}: {kind}")]
pub struct ParseError {
    /// Byte offset into the source string.
    pub position: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseErrorKind {
    #[error("unexpected character '{0}'")]
    UnexpectedChar(char),
    #[error("unexpected end of input")]
    UnexpectedEnd,
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("exponents must be non-negative integers")]
    NegativeExponent,
    #[error("exponent does not fit in 32 bits")]
    ExponentOverflow,
    #[error("malformed number literal")]
    MalformedNumber,
    #[error("division by zero")]
    DivisionByZero,
    #[error("division is only supported by nonzero constants")]
    NonConstantDivisor,
}

/// Parse `src` as a polynomial in the named variables.
pub fn parse_poly<S: AsRef<str>>(src: &str, vars: &[S]) -> Result<Polynomial, ParseError> {
    let names: Vec<&str> = vars.iter().map(AsRef::as_ref).collect();
    let mut p = Parser {
        src,
        bytes: src.as_bytes(),
        pos: 0,
        vars: &names,
    };
    let poly = p.expr()?;
    p.skip_ws();
    if p.pos < p.bytes.len() {
        return Err(p.err_here());
    }
    Ok(poly)
}

struct Parser<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    vars: &'a [&'a str],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn err_here(&self) -> ParseError {
        match self.src[self.pos..].chars().next() {
            Some(c) => ParseError {
                position: self.pos,
                kind: ParseErrorKind::UnexpectedChar(c),
            },
            None => ParseError {
                position: self.pos,
                kind: ParseErrorKind::UnexpectedEnd,
            },
        }
    }

    fn expr(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = &acc + &self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Polynomial, ParseError> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    acc = &acc * &self.unary()?;
                }
                Some(b'/') => {
                    self.pos += 1;
                    let at = self.pos;
                    let divisor = self.unary()?;
                    if !divisor.is_constant() {
                        return Err(ParseError {
                            position: at,
                            kind: ParseErrorKind::NonConstantDivisor,
                        });
                    }
                    let c = divisor.constant_term();
                    if c.is_zero() {
                        return Err(ParseError {
                            position: at,
                            kind: ParseErrorKind::DivisionByZero,
                        });
                    }
                    acc = acc.scale(&c.recip());
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(-&self.unary()?)
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Polynomial, ParseError> {
        let mut base = self.atom()?;
        while self.peek() == Some(b'^') {
            self.pos += 1;
            let e = self.natural()?;
            base = base.pow(e);
        }
        Ok(base)
    }

    fn natural(&mut self) -> Result<u32, ParseError> {
        match self.peek() {
            Some(b'-') => Err(ParseError {
                position: self.pos,
                kind: ParseErrorKind::NegativeExponent,
            }),
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                self.src[start..self.pos]
                    .parse::<u32>()
                    .map_err(|_| ParseError {
                        position: start,
                        kind: ParseErrorKind::ExponentOverflow,
                    })
            }
            _ => Err(self.err_here()),
        }
    }

    fn atom(&mut self) -> Result<Polynomial, ParseError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() == Some(b')') {
                    self.pos += 1;
                    Ok(inner)
                } else {
                    Err(self.err_here())
                }
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            _ => Err(self.err_here()),
        }
    }

    fn number(&mut self) -> Result<Polynomial, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let int_part = &self.src[start..self.pos];
        let mut frac_part = "";
        if self.bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let fstart = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            frac_part = &self.src[fstart..self.pos];
            if int_part.is_empty() && frac_part.is_empty() {
                return Err(ParseError {
                    position: start,
                    kind: ParseErrorKind::MalformedNumber,
                });
            }
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = digits.parse().map_err(|_| ParseError {
            position: start,
            kind: ParseErrorKind::MalformedNumber,
        })?;
        let denom = BigInt::from(10u32).pow(frac_part.len() as u32);
        Ok(Polynomial::constant(
            self.vars.len(),
            Coeff::new(numer, denom),
        ))
    }

    fn identifier(&mut self) -> Result<Polynomial, ParseError> {
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.src[start..self.pos];
        match self.vars.iter().position(|v| *v == name) {
            Some(i) => Ok(Polynomial::variable(self.vars.len(), i)),
            None => Err(ParseError {
                position: start,
                kind: ParseErrorKind::UnknownVariable(name.to_string()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn p(src: &str) -> Polynomial {
        parse_poly(src, &["x", "y", "z"]).unwrap()
    }

    #[test]
    fn parses_arithmetic() {
        let expected = {
            let x = Polynomial::variable(3, 0);
            let y = Polynomial::variable(3, 1);
            &(&x.pow(2) - &(&x * &y).scale(&Coeff::from_integer(BigInt::from(2))))
                + &Polynomial::constant_i64(3, 1)
        };
        assert_eq!(p("x^2 - 2*x*y + 1"), expected);
        assert_eq!(p("(x - y)^2 - y^2 + 1"), expected);
    }

    #[test]
    fn decimal_literals_are_exact() {
        let got = p("0.125*x + 2.5");
        let eighth = Coeff::new(BigInt::from(1), BigInt::from(8));
        let fivehalf = Coeff::new(BigInt::from(5), BigInt::from(2));
        let expected =
            &Polynomial::variable(3, 0).scale(&eighth) + &Polynomial::constant(3, fivehalf);
        assert_eq!(got, expected);
    }

    #[test]
    fn constant_division_and_rejection() {
        assert_eq!(
            p("x/4"),
            Polynomial::variable(3, 0).scale(&Coeff::new(BigInt::from(1), BigInt::from(4)))
        );
        assert_eq!(
            p("3/4").constant_term(),
            Coeff::new(BigInt::from(3), BigInt::from(4))
        );
        let err = parse_poly("x/y", &["x", "y"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonConstantDivisor);
        let err = parse_poly("x/(y - y)", &["x", "y"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::DivisionByZero);
    }

    #[test]
    fn error_positions_and_names() {
        let err = parse_poly("x + w^2", &["x", "y"]).unwrap_err();
        assert_eq!(err.position, 4);
        assert_eq!(err.kind, ParseErrorKind::UnknownVariable("w".to_string()));
        assert!(err.to_string().contains("'w'"));

        let err = parse_poly("x^-2", &["x"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NegativeExponent);

        let err = parse_poly("x + ", &["x"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedEnd);

        let err = parse_poly("x ? y", &["x", "y"]).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('?'));
        assert_eq!(err.position, 2);
    }

    #[test]
    fn unary_signs_chain() {
        assert_eq!(p("--x"), Polynomial::variable(3, 0));
        assert_eq!(p("-x^2"), -&Polynomial::variable(3, 0).pow(2));
        assert_eq!(
            p("2 - -3").constant_term(),
            Coeff::from_integer(BigInt::from(5))
        );
    }
}
