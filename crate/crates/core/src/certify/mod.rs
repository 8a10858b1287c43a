//! Certificates and their independent verification, plus pointwise
//! second-order diagnostics.
//!
//! A certificate spells out the identity behind a reported bound:
//!
//! ```text
//! f - gamma = sum_e sigma_e * g^e + sum_J phi_J * gen_J
//! ```
//!
//! with each `sigma_e` given as an explicit nonnegative combination of
//! squares. Extraction reads the decomposition off the solved Gram blocks;
//! verification recomputes the identity with exact arithmetic on the float
//! coefficients, sharing nothing with the assembly that produced the SDP.

mod floatpoly;
mod pointwise;
mod text;

pub use floatpoly::FloatPoly;
pub use pointwise::{
    check_bhc, check_regularity, local_minimize, BhcReport, BhcTolerances, BhcVerdict,
    DescentSettings, MinimizeReport, RegularityReport,
};
pub use text::parse_certificate;

use num_rational::BigRational;
use num_traits::One;
use thiserror::Error;

use crate::critical::{constraint_product, generators, ConstraintSubset, GeneratorMode, Problem};
use crate::polyring::{rational_to_f64, Polynomial};
use crate::sdpsolve::{SdpSolution, SolveStatus};
use crate::sosrelax::Relaxation;

/// Eigenvalues at or below this are treated as numerical rank deficiency
/// when reading squares off a Gram block.
pub const DEFAULT_EIG_CUT: f64 = 1e-7;
/// Default relative residual allowed by `verify_certificate`.
pub const DEFAULT_VERIFY_TOL: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum CertError {
    #[error("certificate extraction requires an optimal solve, got {0}")]
    NotOptimal(SolveStatus),
    #[error("solution does not match the relaxation: {0}")]
    ShapeMismatch(String),
    #[error("certificate names variables {got:?}, the problem has {expected:?}")]
    VariableMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("negative square weight {weight} under the product for e={subset}")]
    NegativeWeight {
        subset: ConstraintSubset,
        weight: f64,
    },
    #[error("multiplier label '{0}' names no generator of this problem")]
    UnknownGenerator(String),
    #[error("certificate carries a non-finite coefficient")]
    NonFinite,
    #[error("certificate text, line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error("certificate text is missing the '{0}:' line")]
    MissingField(&'static str),
    #[error(transparent)]
    Generator(#[from] crate::critical::GeneratorError),
    #[error("point has {got} coordinates, the problem has {expected} variables")]
    PointArity { expected: usize, got: usize },
}

/// One `weight * poly^2` summand with `weight >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareTerm {
    pub weight: f64,
    pub poly: FloatPoly,
}

/// The weighted-square decomposition attached to one constraint product.
#[derive(Clone, Debug, PartialEq)]
pub struct SosTerm {
    pub subset: ConstraintSubset,
    pub squares: Vec<SquareTerm>,
}

impl SosTerm {
    /// The polynomial `sigma_e = sum weight_i * poly_i^2`, reconstructed
    /// exactly. Individual squares are not unique; comparisons belong here.
    pub fn reconstruct(&self) -> Option<Polynomial> {
        let nvars = self.squares.first().map(|sq| sq.poly.nvars()).unwrap_or(0);
        let mut acc = Polynomial::zero(nvars);
        for sq in &self.squares {
            let p = sq.poly.to_exact()?;
            acc = &acc + &(&p * &p).scale(&BigRational::from_float(sq.weight)?);
        }
        Some(acc)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierTerm {
    pub label: String,
    pub poly: FloatPoly,
}

/// Everything needed to re-check a bound away from the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub mode: GeneratorMode,
    pub d: u32,
    pub vars: Vec<String>,
    pub gamma: f64,
    pub sos: Vec<SosTerm>,
    pub multipliers: Vec<MultiplierTerm>,
}

impl Certificate {
    pub fn to_text(&self) -> String {
        text::render(self)
    }
}

/// Read the weighted squares and ideal multipliers off an optimal solve.
///
/// Each Gram block is eigendecomposed; eigenpairs with eigenvalue above
/// `eig_cut` become squares (largest first), the rest are numerical noise.
pub fn extract_certificate(
    relax: &Relaxation,
    solution: &SdpSolution,
    eig_cut: f64,
) -> Result<Certificate, CertError> {
    if solution.status != SolveStatus::Optimal {
        return Err(CertError::NotOptimal(solution.status));
    }
    if solution.blocks.len() != relax.sdp.block_sizes.len() {
        return Err(CertError::ShapeMismatch(format!(
            "{} blocks in the solution, {} in the relaxation",
            solution.blocks.len(),
            relax.sdp.block_sizes.len()
        )));
    }
    if solution.free_values.len() != relax.sdp.num_free {
        return Err(CertError::ShapeMismatch(format!(
            "{} free values in the solution, {} in the relaxation",
            solution.free_values.len(),
            relax.sdp.num_free
        )));
    }
    let n = relax.problem.nvars();

    let mut sos = Vec::with_capacity(relax.preordering.len());
    for term in &relax.preordering {
        let q = &solution.blocks[term.block];
        if q.nrows() != term.basis.len() || q.ncols() != term.basis.len() {
            return Err(CertError::ShapeMismatch(format!(
                "block {} is {}x{}, its basis has {} monomials",
                term.block,
                q.nrows(),
                q.ncols(),
                term.basis.len()
            )));
        }
        let eig = q.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut squares = Vec::new();
        for &k in &order {
            let lam = eig.eigenvalues[k];
            // Negated so a NaN eigenvalue counts as noise, not as a square.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(lam > eig_cut) {
                continue;
            }
            let u = eig.eigenvectors.column(k);
            let poly = FloatPoly::from_terms(n, term.basis.iter().cloned().zip(u.iter().copied()));
            squares.push(SquareTerm { weight: lam, poly });
        }
        sos.push(SosTerm {
            subset: term.subset,
            squares,
        });
    }

    let mut multipliers = Vec::with_capacity(relax.ideal.len());
    for it in &relax.ideal {
        let mut poly = FloatPoly::zero(n);
        for (k, mu) in it.multiplier_basis.iter().enumerate() {
            poly.add_term(mu.clone(), solution.free_values[it.free_start + k]);
        }
        multipliers.push(MultiplierTerm {
            label: it.label.clone(),
            poly,
        });
    }

    Ok(Certificate {
        mode: relax.mode,
        d: relax.d,
        vars: relax.problem.vars().to_vec(),
        gamma: solution.free_values[relax.gamma_index],
        sos,
        multipliers,
    })
}

/// Outcome of the exact residual check.
#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub pass: bool,
    /// Largest coefficient of `f - gamma - sum(...)`, computed exactly and
    /// rounded only for reporting.
    pub residual_norm: f64,
    /// The allowance `tol * (1 + max |coeff of f|)`.
    pub bound: f64,
}

fn exact(v: f64) -> Result<BigRational, CertError> {
    BigRational::from_float(v).ok_or(CertError::NonFinite)
}

/// Recompute `f - gamma - sum sigma_e g^e - sum phi_J gen_J` with exact
/// arithmetic on the certificate's float coefficients; pass when the
/// largest residual coefficient is at most `tol * (1 + max |coeff of f|)`.
///
/// Generators and products are rebuilt from the problem statement; nothing
/// from the relaxation bookkeeping is consulted.
pub fn verify_certificate(
    problem: &Problem,
    cert: &Certificate,
    tol: f64,
) -> Result<VerifyReport, CertError> {
    if cert.vars != problem.vars() {
        return Err(CertError::VariableMismatch {
            expected: problem.vars().to_vec(),
            got: cert.vars.clone(),
        });
    }
    let n = problem.nvars();
    let s = problem.num_constraints();

    let mut residual = problem.objective() - &Polynomial::constant(n, exact(cert.gamma)?);
    for st in &cert.sos {
        if u64::from(st.subset.mask()) >> s != 0 {
            return Err(CertError::ShapeMismatch(format!(
                "subset {} names constraints beyond the problem's {s}",
                st.subset
            )));
        }
        let mut sigma = Polynomial::zero(n);
        for sq in &st.squares {
            if sq.weight < 0.0 {
                return Err(CertError::NegativeWeight {
                    subset: st.subset,
                    weight: sq.weight,
                });
            }
            if sq.poly.nvars() != n {
                return Err(CertError::ShapeMismatch(format!(
                    "square under e={} has {} variables, expected {n}",
                    st.subset,
                    sq.poly.nvars()
                )));
            }
            let p = sq.poly.to_exact().ok_or(CertError::NonFinite)?;
            sigma = &sigma + &(&p * &p).scale(&exact(sq.weight)?);
        }
        residual = &residual - &(&sigma * &constraint_product(problem, st.subset));
    }

    let gens = generators(problem, cert.mode)?;
    for mt in &cert.multipliers {
        let gen = gens
            .items
            .iter()
            .find(|g| g.label == mt.label)
            .ok_or_else(|| CertError::UnknownGenerator(mt.label.clone()))?;
        if mt.poly.nvars() != n {
            return Err(CertError::ShapeMismatch(format!(
                "multiplier {} has {} variables, expected {n}",
                mt.label,
                mt.poly.nvars()
            )));
        }
        let phi = mt.poly.to_exact().ok_or(CertError::NonFinite)?;
        residual = &residual - &(&phi * &gen.poly);
    }

    let bound = exact(tol)? * (BigRational::one() + problem.objective().max_abs_coeff());
    let norm = residual.max_abs_coeff();
    Ok(VerifyReport {
        pass: norm <= bound,
        residual_norm: rational_to_f64(&norm),
        bound: rational_to_f64(&bound),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::generators;
    use crate::polyring::parse_poly;
    use crate::sdpsolve::{solve, SolverSettings};
    use crate::sosrelax::assemble_relaxation;
    use nalgebra::DMatrix;

    fn paper_problem() -> Problem {
        let vars = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let f = parse_poly("x", &vars).unwrap();
        let g = parse_poly("x - y^2 - z^2", &vars).unwrap();
        Problem::new(vars, f, vec![g]).unwrap()
    }

    fn fp(src: &str, vars: &[String]) -> FloatPoly {
        FloatPoly::parse(src, vars).unwrap()
    }

    fn paper_certificate(gamma: f64) -> Certificate {
        let vars: Vec<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        Certificate {
            mode: GeneratorMode::Critical,
            d: 1,
            vars: vars.clone(),
            gamma,
            sos: vec![
                SosTerm {
                    subset: ConstraintSubset::EMPTY,
                    squares: vec![
                        SquareTerm {
                            weight: 1.0,
                            poly: fp("y", &vars),
                        },
                        SquareTerm {
                            weight: 1.0,
                            poly: fp("z", &vars),
                        },
                    ],
                },
                SosTerm {
                    subset: ConstraintSubset::from_indices(&[0]),
                    squares: vec![SquareTerm {
                        weight: 1.0,
                        poly: fp("1", &vars),
                    }],
                },
            ],
            multipliers: vec![
                MultiplierTerm {
                    label: "J={}".to_string(),
                    poly: FloatPoly::zero(3),
                },
                MultiplierTerm {
                    label: "J={1}".to_string(),
                    poly: FloatPoly::zero(3),
                },
            ],
        }
    }

    #[test]
    fn hand_built_certificate_has_zero_residual() {
        // x - 0 = (y^2 + z^2) + 1 * (x - y^2 - z^2), exactly.
        let report = verify_certificate(&paper_problem(), &paper_certificate(0.0), 1e-6).unwrap();
        assert!(report.pass);
        assert_eq!(report.residual_norm, 0.0);
    }

    #[test]
    fn constant_perturbation_is_caught_exactly() {
        let report = verify_certificate(&paper_problem(), &paper_certificate(0.1), 1e-6).unwrap();
        assert!(!report.pass);
        // gamma = 0.1 shifts the constant coefficient by exactly that double.
        assert_eq!(report.residual_norm, 0.1);
    }

    #[test]
    fn verification_rejects_mismatched_shapes() {
        let mut cert = paper_certificate(0.0);
        cert.vars = vec!["x".to_string()];
        assert!(matches!(
            verify_certificate(&paper_problem(), &cert, 1e-6),
            Err(CertError::VariableMismatch { .. })
        ));

        let mut cert = paper_certificate(0.0);
        cert.multipliers[0].label = "J={7}".to_string();
        assert!(matches!(
            verify_certificate(&paper_problem(), &cert, 1e-6),
            Err(CertError::UnknownGenerator(_))
        ));

        let mut cert = paper_certificate(0.0);
        cert.sos[0].squares[0].weight = -1.0;
        assert!(matches!(
            verify_certificate(&paper_problem(), &cert, 1e-6),
            Err(CertError::NegativeWeight { .. })
        ));
    }

    #[test]
    fn extraction_requires_an_optimal_status() {
        let p = paper_problem();
        let gens = generators(&p, GeneratorMode::Critical).unwrap();
        let relax = assemble_relaxation(&p, &gens, 1).unwrap();
        let mut sol = solve(&relax.sdp, &SolverSettings::default());
        sol.status = SolveStatus::MaxIterations;
        assert!(matches!(
            extract_certificate(&relax, &sol, DEFAULT_EIG_CUT),
            Err(CertError::NotOptimal(_))
        ));
    }

    #[test]
    fn identity_gram_block_reads_off_one_plus_x_squared() {
        // f = x^2 unconstrained at d=1: one Gram block over basis [1, x].
        let vars = vec!["x".to_string()];
        let f = parse_poly("x^2", &vars).unwrap();
        let p = Problem::new(vars.clone(), f, vec![]).unwrap();
        let gens = generators(&p, GeneratorMode::Critical).unwrap();
        let relax = assemble_relaxation(&p, &gens, 1).unwrap();
        assert_eq!(relax.sdp.block_sizes, vec![2]);
        let sol = SdpSolution {
            status: SolveStatus::Optimal,
            objective: 0.0,
            free_values: vec![0.0; relax.sdp.num_free],
            blocks: vec![DMatrix::identity(2, 2)],
            dual_values: vec![0.0; relax.sdp.rows.len()],
            iterations: 0,
            primal_residual: 0.0,
            dual_residual: 0.0,
            relative_gap: 0.0,
            diagnostic: None,
        };
        let cert = extract_certificate(&relax, &sol, DEFAULT_EIG_CUT).unwrap();
        let sigma = cert.sos[0].reconstruct().unwrap();
        assert_eq!(sigma, parse_poly("1 + x^2", &vars).unwrap());

        // All eigenvalues at zero: the block contributes no squares.
        let zero_sol = SdpSolution {
            blocks: vec![DMatrix::zeros(2, 2)],
            ..sol
        };
        let cert = extract_certificate(&relax, &zero_sol, DEFAULT_EIG_CUT).unwrap();
        assert!(cert.sos[0].squares.is_empty());
        assert!(cert.sos[0].reconstruct().unwrap().is_zero());
    }

    #[test]
    fn pipeline_certificate_recovers_the_paper_decomposition() {
        let p = paper_problem();
        let gens = generators(&p, GeneratorMode::Critical).unwrap();
        let relax = assemble_relaxation(&p, &gens, 1).unwrap();
        let sol = solve(&relax.sdp, &SolverSettings::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        let cert = extract_certificate(&relax, &sol, DEFAULT_EIG_CUT).unwrap();
        assert!(cert.gamma.abs() < 1e-6);

        let report = verify_certificate(&p, &cert, DEFAULT_VERIFY_TOL).unwrap();
        assert!(
            report.pass,
            "pipeline certificate failed with residual {}",
            report.residual_norm
        );

        // The (sigma, phi) split is not unique, so individual pieces are not
        // pinned down; shape and nonnegativity of the reconstructions are.
        assert_eq!(cert.sos.len(), 2);
        assert_eq!(cert.sos[0].subset, ConstraintSubset::EMPTY);
        assert_eq!(cert.sos[1].subset, ConstraintSubset::from_indices(&[0]));
        let labels: Vec<&str> = cert.multipliers.iter().map(|m| m.label.as_str()).collect();
        assert_eq!(labels, vec!["J={}", "J={1}"]);
        for st in &cert.sos {
            let sigma = FloatPoly::from_exact(&st.reconstruct().unwrap());
            for pt in [[0.0, 0.0, 0.0], [1.0, -0.5, 0.25], [-2.0, 1.0, 3.0]] {
                assert!(sigma.evaluate(&pt) >= -1e-9);
            }
        }

        // The text form survives a parse and re-verifies.
        let back = parse_certificate(&cert.to_text()).unwrap();
        assert_eq!(back, cert);
        assert!(
            verify_certificate(&p, &back, DEFAULT_VERIFY_TOL)
                .unwrap()
                .pass
        );
    }
}
