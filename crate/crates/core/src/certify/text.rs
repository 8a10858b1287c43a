//! Plain-text certificate format.
//!
//! Key/value lines with polynomials in the same grammar `parse_poly`
//! accepts, so a certificate can be stored, diffed, and re-verified without
//! any binary tooling. Coefficients print as shortest round-trip decimals;
//! parsing recovers them bit for bit.
//!
//! ```text
//! mode: critical
//! d: 1
//! vars: x y z
//! gamma: 0
//! sigma e={}:
//!   term: 1 | y
//!   term: 1 | z
//! sigma e={1}:
//!   term: 1 | 1
//! multiplier J={}: 0
//! multiplier J={1}: 0
//! ```

use std::fmt::Write as _;
use std::str::FromStr;

use crate::critical::{ConstraintSubset, GeneratorMode};

use super::{CertError, Certificate, FloatPoly, MultiplierTerm, SosTerm, SquareTerm};

pub(super) fn render(cert: &Certificate) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mode: {}", cert.mode);
    let _ = writeln!(out, "d: {}", cert.d);
    let _ = writeln!(out, "vars: {}", cert.vars.join(" "));
    let _ = writeln!(out, "gamma: {}", cert.gamma);
    for st in &cert.sos {
        let _ = writeln!(out, "sigma e={}:", st.subset);
        for sq in &st.squares {
            let _ = writeln!(
                out,
                "  term: {} | {}",
                sq.weight,
                sq.poly.to_text(&cert.vars)
            );
        }
    }
    for mt in &cert.multipliers {
        let _ = writeln!(
            out,
            "multiplier {}: {}",
            mt.label,
            mt.poly.to_text(&cert.vars)
        );
    }
    out
}

fn err(line: usize, msg: impl Into<String>) -> CertError {
    CertError::Text {
        line,
        msg: msg.into(),
    }
}

fn parse_subset(txt: &str, line: usize) -> Result<ConstraintSubset, CertError> {
    let inner = txt
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| {
            err(
                line,
                format!("subset '{txt}' must look like {{1,3}} or {{}}"),
            )
        })?;
    if inner.trim().is_empty() {
        return Ok(ConstraintSubset::EMPTY);
    }
    let mut mask = 0u32;
    for part in inner.split(',') {
        let j: u32 = part
            .trim()
            .parse()
            .map_err(|_| err(line, format!("bad constraint index '{}'", part.trim())))?;
        if j == 0 || j > 32 {
            return Err(err(
                line,
                format!("constraint index {j} out of range 1..=32"),
            ));
        }
        mask |= 1 << (j - 1);
    }
    Ok(ConstraintSubset::from_mask(mask))
}

fn parse_f64(txt: &str, line: usize, what: &str) -> Result<f64, CertError> {
    f64::from_str(txt.trim()).map_err(|_| err(line, format!("bad {what} '{}'", txt.trim())))
}

/// Parse the text form produced by [`Certificate::to_text`].
///
/// Blank lines and lines starting with `#` are ignored. Headers may appear
/// in any order but `vars:` must precede every polynomial.
pub fn parse_certificate(src: &str) -> Result<Certificate, CertError> {
    let mut mode: Option<GeneratorMode> = None;
    let mut d: Option<u32> = None;
    let mut vars: Option<Vec<String>> = None;
    let mut gamma: Option<f64> = None;
    let mut sos: Vec<SosTerm> = Vec::new();
    let mut multipliers: Vec<MultiplierTerm> = Vec::new();

    let poly =
        |src: &str, vars: &Option<Vec<String>>, line: usize| -> Result<FloatPoly, CertError> {
            let vars = vars
                .as_ref()
                .ok_or_else(|| err(line, "polynomial before the 'vars:' line"))?;
            FloatPoly::parse(src.trim(), vars).map_err(|e| err(line, e.to_string()))
        };

    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let text = raw.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        if let Some(rest) = text.strip_prefix("mode:") {
            mode = Some(GeneratorMode::from_str(rest.trim()).map_err(|e| err(line, e))?);
        } else if let Some(rest) = text.strip_prefix("d:") {
            d = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| err(line, format!("bad order '{}'", rest.trim())))?,
            );
        } else if let Some(rest) = text.strip_prefix("vars:") {
            vars = Some(rest.split_whitespace().map(str::to_string).collect());
        } else if let Some(rest) = text.strip_prefix("gamma:") {
            gamma = Some(parse_f64(rest, line, "gamma")?);
        } else if let Some(rest) = text.strip_prefix("sigma e=") {
            let subset_txt = rest
                .strip_suffix(':')
                .ok_or_else(|| err(line, "sigma line must end with ':'"))?;
            sos.push(SosTerm {
                subset: parse_subset(subset_txt.trim(), line)?,
                squares: Vec::new(),
            });
        } else if let Some(rest) = text.strip_prefix("term:") {
            let current = sos
                .last_mut()
                .ok_or_else(|| err(line, "'term:' before any 'sigma e=' line"))?;
            let (w, p) = rest
                .split_once('|')
                .ok_or_else(|| err(line, "term must look like 'term: weight | poly'"))?;
            current.squares.push(SquareTerm {
                weight: parse_f64(w, line, "weight")?,
                poly: poly(p, &vars, line)?,
            });
        } else if let Some(rest) = text.strip_prefix("multiplier ") {
            let (label, p) = rest
                .split_once(':')
                .ok_or_else(|| err(line, "multiplier must look like 'multiplier LABEL: poly'"))?;
            multipliers.push(MultiplierTerm {
                label: label.trim().to_string(),
                poly: poly(p, &vars, line)?,
            });
        } else {
            return Err(err(line, format!("unrecognized line '{text}'")));
        }
    }

    Ok(Certificate {
        mode: mode.ok_or(CertError::MissingField("mode"))?,
        d: d.ok_or(CertError::MissingField("d"))?,
        vars: vars.ok_or(CertError::MissingField("vars"))?,
        gamma: gamma.ok_or(CertError::MissingField("gamma"))?,
        sos,
        multipliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Certificate {
        let vars: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        Certificate {
            mode: GeneratorMode::Critical,
            d: 2,
            vars: vars.clone(),
            gamma: -0.1234567890123456,
            sos: vec![
                SosTerm {
                    subset: ConstraintSubset::EMPTY,
                    squares: vec![
                        SquareTerm {
                            weight: 1.5,
                            poly: FloatPoly::parse("x - 0.3333333333333333*y", &vars).unwrap(),
                        },
                        SquareTerm {
                            weight: 2e-3,
                            poly: FloatPoly::parse("1 + x*y", &vars).unwrap(),
                        },
                    ],
                },
                SosTerm {
                    subset: ConstraintSubset::from_indices(&[0, 2]),
                    squares: vec![],
                },
            ],
            multipliers: vec![MultiplierTerm {
                label: "J={1,3}".to_string(),
                poly: FloatPoly::parse("0.1 - x^2", &vars).unwrap(),
            }],
        }
    }

    #[test]
    fn text_round_trips_to_an_equal_certificate() {
        let cert = sample();
        let text = cert.to_text();
        let back = parse_certificate(&text).unwrap();
        assert_eq!(back, cert);
        // and renders to identical bytes again
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let cert = sample();
        let mut text = String::from("# produced by hand\n\n");
        text.push_str(&cert.to_text());
        assert_eq!(parse_certificate(&text).unwrap(), cert);
    }

    #[test]
    fn subset_display_and_parse_agree() {
        for mask in [0u32, 1, 0b101, 0b11010] {
            let subset = ConstraintSubset::from_mask(mask);
            assert_eq!(parse_subset(&subset.to_string(), 1).unwrap(), subset);
        }
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_certificate("mode: critical\nnot a thing\n").unwrap_err();
        match e {
            CertError::Text { line, .. } => assert_eq!(line, 2),
            other => panic!("expected Text error, got {other:?}"),
        }

        let e = parse_certificate("term: 1 | x\n").unwrap_err();
        match e {
            CertError::Text { line, msg } => {
                assert_eq!(line, 1);
                assert!(msg.contains("before any"));
            }
            other => panic!("expected Text error, got {other:?}"),
        }

        // polynomial encountered before the variable list exists
        let e = parse_certificate("mode: critical\nsigma e={}:\nterm: 1 | x\n").unwrap_err();
        match e {
            CertError::Text { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains("vars"));
            }
            other => panic!("expected Text error, got {other:?}"),
        }
    }

    #[test]
    fn missing_headers_are_named() {
        let e = parse_certificate("mode: critical\nd: 1\nvars: x\n").unwrap_err();
        assert!(matches!(e, CertError::MissingField("gamma")));
        let e = parse_certificate("").unwrap_err();
        assert!(matches!(e, CertError::MissingField("mode")));
    }

    #[test]
    fn gamma_and_weights_survive_the_round_trip_bit_for_bit() {
        let mut cert = sample();
        cert.gamma = 0.1 + 0.2; // not exactly representable in short decimal
        cert.sos[0].squares[0].weight = std::f64::consts::PI;
        let back = parse_certificate(&cert.to_text()).unwrap();
        assert_eq!(back.gamma.to_bits(), cert.gamma.to_bits());
        assert_eq!(
            back.sos[0].squares[0].weight.to_bits(),
            cert.sos[0].squares[0].weight.to_bits()
        );
    }
}
