//! Assembly of the degree-truncated sum-of-squares relaxation.
//!
//! At relaxation order `d` we search for the largest `Gamma` with
//!
//! ```text
//! f - Gamma = sum_e sigma_e * g^e  +  sum_J phi_J * gen_J,    deg <= 2d
//! ```
//!
//! where `e` ranges over squarefree constraint products admitted by the
//! degree budget, each `sigma_e` is a sum of squares represented by a Gram
//! matrix over a monomial basis, and each `phi_J` is an unrestricted
//! multiplier for an ideal generator. Matching coefficients on both sides,
//! monomial by monomial up to degree `2d`, turns the search into a
//! semidefinite program with one equality row per monomial.
//!
//! Everything up to the coefficient matrices is exact; rationals are rounded
//! to `f64` only when the rows are emitted.

use thiserror::Error;

use crate::critical::{ConstraintSubset, GeneratorMode, GeneratorSet, Problem};
use crate::polyring::{monomial_display, rational_to_f64, Monomial, Polynomial};
use crate::sdpsolve::{solve, SdpSolution, SolveStatus, SolverSettings};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RelaxError {
    #[error("order d={d} truncates at degree {}, below the objective degree {objective_degree}", 2 * d)]
    DegreeTooLow { objective_degree: u32, d: u32 },
    #[error("relaxation order must be at least 1")]
    ZeroOrder,
}

/// All monomials of total degree at most `max_degree`, ascending.
pub fn monomial_basis(nvars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; nvars];
    fill_basis(&mut out, &mut exps, 0, max_degree);
    out.sort();
    out
}

fn fill_basis(out: &mut Vec<Monomial>, exps: &mut Vec<u32>, var: usize, budget: u32) {
    if var == exps.len() {
        out.push(Monomial::from_exponents(exps.clone()));
        return;
    }
    for e in 0..=budget {
        exps[var] = e;
        fill_basis(out, exps, var + 1, budget - e);
    }
    exps[var] = 0;
}

/// One `sigma_e * g^e` summand: a PSD Gram block over `basis`.
#[derive(Clone, Debug)]
pub struct PreorderingTerm {
    /// Which constraints the squarefree product `g^e` multiplies.
    pub subset: ConstraintSubset,
    /// The product polynomial `g^e`.
    pub product: Polynomial,
    /// Gram basis; its span squared times `product` stays within degree `2d`.
    pub basis: Vec<Monomial>,
    /// Index of this term's block in the SDP.
    pub block: usize,
}

/// One `phi_J * gen_J` summand: a free multiplier against an ideal generator.
#[derive(Clone, Debug)]
pub struct IdealTerm {
    pub label: String,
    pub subset: Option<ConstraintSubset>,
    /// The ideal generator this multiplier scales.
    pub generator: Polynomial,
    /// Monomials of the multiplier; one free scalar each.
    pub multiplier_basis: Vec<Monomial>,
    /// Index of the first free variable for this multiplier.
    pub free_start: usize,
}

/// Sparse symmetric coefficient: `A[i][j] = A[j][i] = value` with `i <= j`,
/// entering rows as `value * X_ii` on the diagonal and `2 * value * X_ij`
/// off it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

/// One linear equality `sum <A_b, X_b> + sum c_k v_k = rhs`.
#[derive(Clone, Debug, Default)]
pub struct SdpRow {
    /// Human-readable origin of the row, e.g. the matched monomial.
    pub label: String,
    pub entries: Vec<MatEntry>,
    pub free: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// Equality-form SDP with PSD blocks `X_b` and free scalars `v`:
/// maximize `objective . v` subject to the rows and `X_b` PSD.
#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    /// One label per block; empty strings are allowed.
    pub block_labels: Vec<String>,
    pub num_free: usize,
    /// One label per free scalar; empty strings are allowed.
    pub free_labels: Vec<String>,
    /// Coefficients of the free variables in the maximized objective.
    pub objective: Vec<f64>,
    pub rows: Vec<SdpRow>,
}

impl SdpProblem {
    /// A problem with blank labels, convenient for hand-built instances.
    pub fn plain(
        block_sizes: Vec<usize>,
        num_free: usize,
        objective: Vec<f64>,
        rows: Vec<SdpRow>,
    ) -> Self {
        let block_labels = vec![String::new(); block_sizes.len()];
        let free_labels = vec![String::new(); num_free];
        SdpProblem {
            block_sizes,
            block_labels,
            num_free,
            free_labels,
            objective,
            rows,
        }
    }
}

/// An assembled relaxation plus the bookkeeping needed to map the SDP
/// solution back to polynomials.
#[derive(Clone, Debug)]
pub struct Relaxation {
    pub problem: Problem,
    pub mode: GeneratorMode,
    pub d: u32,
    pub sdp: SdpProblem,
    pub preordering: Vec<PreorderingTerm>,
    pub ideal: Vec<IdealTerm>,
    /// Free-variable index of `Gamma`.
    pub gamma_index: usize,
    /// Monomial labeling each row, aligned with `sdp.rows`.
    pub row_monomials: Vec<Monomial>,
    /// Labels of generators left out at this order (degree over budget or
    /// identically zero).
    pub omitted_generators: Vec<String>,
}

/// The Gram blocks admitted at order `d`: one per squarefree constraint
/// product `g^e` with `deg g^e <= 2d`, each over the largest monomial basis
/// whose squares times the product stay within the budget. Zero products
/// (a constraint may be the zero polynomial) are skipped.
pub fn preordering_terms(problem: &Problem, d: u32) -> Vec<PreorderingTerm> {
    let budget = 2 * d;
    let mut preordering = Vec::new();
    for e in ConstraintSubset::all(problem.num_constraints()) {
        let product = crate::critical::constraint_product(problem, e);
        if product.is_zero() {
            log::debug!("preordering product for e={e} is zero, skipped");
            continue;
        }
        if product.degree() > budget {
            log::debug!(
                "preordering product for e={e} has degree {} > {budget}, skipped",
                product.degree()
            );
            continue;
        }
        let basis = monomial_basis(problem.nvars(), (budget - product.degree()) / 2);
        let block = preordering.len();
        preordering.push(PreorderingTerm {
            subset: e,
            product,
            basis,
            block,
        });
    }
    preordering
}

/// Build the order-`d` relaxation of `problem` against the given generators.
pub fn assemble_relaxation(
    problem: &Problem,
    gens: &GeneratorSet,
    d: u32,
) -> Result<Relaxation, RelaxError> {
    let n = problem.nvars();
    if d == 0 {
        return Err(RelaxError::ZeroOrder);
    }
    let budget = 2 * d;
    if problem.objective().degree() > budget {
        return Err(RelaxError::DegreeTooLow {
            objective_degree: problem.objective().degree(),
            d,
        });
    }

    let preordering = preordering_terms(problem, d);

    let mut ideal = Vec::new();
    let mut omitted = Vec::new();
    let mut free_labels = vec!["Gamma".to_string()];
    let mut free_next = 1; // index 0 is Gamma
    for g in &gens.items {
        if g.poly.is_zero() {
            log::info!("generator {} is identically zero, omitted", g.label);
            omitted.push(g.label.clone());
            continue;
        }
        if g.poly.degree() > budget {
            log::info!(
                "generator {} has degree {} > {budget}, omitted at d={d}",
                g.label,
                g.poly.degree()
            );
            omitted.push(g.label.clone());
            continue;
        }
        let multiplier_basis = monomial_basis(n, budget - g.poly.degree());
        for mu in &multiplier_basis {
            free_labels.push(format!(
                "phi[{}] coefficient of {}",
                g.label,
                monomial_display(mu, problem.vars())
            ));
        }
        let free_start = free_next;
        free_next += multiplier_basis.len();
        ideal.push(IdealTerm {
            label: g.label.clone(),
            subset: g.subset,
            generator: g.poly.clone(),
            multiplier_basis,
            free_start,
        });
    }

    let row_monomials = monomial_basis(n, budget);
    let row_of = |m: &Monomial| -> usize {
        row_monomials
            .binary_search(m)
            .expect("product monomial within degree budget")
    };
    let mut rows: Vec<SdpRow> = row_monomials
        .iter()
        .map(|m| SdpRow {
            label: monomial_display(m, problem.vars()),
            ..SdpRow::default()
        })
        .collect();

    for term in &preordering {
        for i in 0..term.basis.len() {
            for j in i..term.basis.len() {
                let pair = term.basis[i].mul(&term.basis[j]);
                for (mono, coeff) in term.product.terms() {
                    let row = row_of(&pair.mul(mono));
                    rows[row].entries.push(MatEntry {
                        block: term.block,
                        i,
                        j,
                        value: rational_to_f64(coeff),
                    });
                }
            }
        }
    }
    for term in &ideal {
        for (k, mu) in term.multiplier_basis.iter().enumerate() {
            for (mono, coeff) in term.generator.terms() {
                let row = row_of(&mu.mul(mono));
                rows[row]
                    .free
                    .push((term.free_start + k, rational_to_f64(coeff)));
            }
        }
    }
    rows[row_of(&Monomial::one(n))].free.push((0, 1.0));
    for (mono, coeff) in problem.objective().terms() {
        rows[row_of(mono)].rhs = rational_to_f64(coeff);
    }

    // Rows that say 0 = 0 carry no information; drop them, keeping the
    // monomial labels aligned.
    let mut kept_rows = Vec::with_capacity(rows.len());
    let mut kept_monos = Vec::with_capacity(rows.len());
    for (row, mono) in rows.into_iter().zip(row_monomials) {
        if row.entries.is_empty() && row.free.is_empty() && row.rhs == 0.0 {
            continue;
        }
        kept_rows.push(row);
        kept_monos.push(mono);
    }

    let mut objective = vec![0.0; free_next];
    objective[0] = 1.0;
    let sdp = SdpProblem {
        block_sizes: preordering.iter().map(|t| t.basis.len()).collect(),
        block_labels: preordering
            .iter()
            .map(|t| format!("Gram matrix of sigma[e={}]", t.subset))
            .collect(),
        num_free: free_next,
        free_labels,
        objective,
        rows: kept_rows,
    };
    Ok(Relaxation {
        problem: problem.clone(),
        mode: gens.mode,
        d,
        sdp,
        preordering,
        ideal,
        gamma_index: 0,
        row_monomials: kept_monos,
        omitted_generators: omitted,
    })
}

/// Outcome of asking whether a specific `gamma` admits a representation.
#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub gamma: f64,
    /// The relaxation optimum when the solve reached one.
    pub optimum: Option<f64>,
    pub status: SolveStatus,
    /// `None` when the solver did not settle the question.
    pub feasible: Option<bool>,
    pub solution: SdpSolution,
}

/// Decide whether `f - gamma` lies in the truncated cone. The feasible
/// `Gamma` values form a downward-closed interval whose supremum is the
/// relaxation optimum (adding a nonnegative constant to a representable
/// polynomial keeps it representable), so one maximizing solve answers
/// every probe.
pub fn feasibility_probe(
    problem: &Problem,
    gens: &GeneratorSet,
    d: u32,
    gamma: f64,
    settings: &SolverSettings,
) -> Result<ProbeReport, RelaxError> {
    let relax = assemble_relaxation(problem, gens, d)?;
    let solution = solve(&relax.sdp, settings);
    let (optimum, feasible) = match solution.status {
        SolveStatus::Optimal => {
            let opt = solution.objective;
            let slack = settings.gap_tol * (1.0 + opt.abs());
            (Some(opt), Some(gamma <= opt + slack))
        }
        SolveStatus::Unbounded => (None, Some(true)),
        SolveStatus::Infeasible => (None, Some(false)),
        _ => (None, None),
    };
    Ok(ProbeReport {
        gamma,
        optimum,
        status: solution.status,
        feasible,
        solution,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::generators;
    use crate::polyring::parse_poly;

    fn binomial(n: usize, k: usize) -> usize {
        let k = k.min(n - k) as u128;
        let mut acc = 1u128;
        for i in 0..k {
            acc = acc * (n as u128 - i) / (i + 1);
        }
        acc as usize
    }

    #[test]
    fn basis_counts_and_order() {
        for (n, d) in [(1usize, 4u32), (2, 3), (3, 2), (4, 5)] {
            let basis = monomial_basis(n, d);
            assert_eq!(basis.len(), binomial(n + d as usize, d as usize));
            assert!(basis.windows(2).all(|w| w[0] < w[1]));
        }
        let b = monomial_basis(3, 1);
        let names = ["x", "y", "z"];
        let shown: Vec<String> = b
            .iter()
            .map(|m| {
                Polynomial::from_term(
                    3,
                    m.clone(),
                    num_rational::BigRational::from_integer(1.into()),
                )
                .to_text(&names)
            })
            .collect();
        assert_eq!(shown, vec!["1", "z", "y", "x"]);
    }

    fn paper_problem() -> Problem {
        let vars = vec!["x".to_string(), "y".to_string(), "z".to_string()];
        let f = parse_poly("x", &vars).unwrap();
        let g = parse_poly("x - y^2 - z^2", &vars).unwrap();
        Problem::new(vars, f, vec![g]).unwrap()
    }

    fn assemble(p: &Problem, mode: GeneratorMode, d: u32) -> Result<Relaxation, RelaxError> {
        let gens = generators(p, mode).unwrap();
        assemble_relaxation(p, &gens, d)
    }

    #[test]
    fn halfparaboloid_d1_shape() {
        let relax = assemble(&paper_problem(), GeneratorMode::Critical, 1).unwrap();
        assert_eq!(relax.sdp.block_sizes, vec![4, 1]);
        assert_eq!(relax.sdp.num_free, 3); // Gamma + phi for each generator
        assert_eq!(relax.sdp.rows.len(), 10); // C(3+2, 2) monomials, none pruned
        assert_eq!(relax.ideal.len(), 2);
        assert!(relax.omitted_generators.is_empty());
        assert_eq!(relax.gamma_index, 0);
        assert_eq!(relax.sdp.free_labels[0], "Gamma");
        assert_eq!(relax.sdp.block_labels.len(), 2);
        // Constant row carries Gamma and the objective has no constant term.
        let const_row = &relax.sdp.rows[0];
        assert_eq!(const_row.label, "1");
        assert!(const_row.free.contains(&(0, 1.0)));
        assert_eq!(const_row.rhs, 0.0);
        // Row for the monomial x carries rhs 1 from the objective.
        let x_row_idx = relax
            .row_monomials
            .iter()
            .position(|m| m.exponents() == [1, 0, 0])
            .unwrap();
        assert_eq!(relax.sdp.rows[x_row_idx].rhs, 1.0);
        assert_eq!(relax.sdp.rows[x_row_idx].label, "x");
    }

    #[test]
    fn degree_budget_is_enforced() {
        let vars = vec!["x".to_string()];
        let f = parse_poly("x^4", &vars).unwrap();
        let p = Problem::new(vars, f, vec![]).unwrap();
        match assemble(&p, GeneratorMode::Critical, 1) {
            Err(RelaxError::DegreeTooLow {
                objective_degree: 4,
                d: 1,
            }) => {}
            other => panic!("expected degree error, got {other:?}"),
        }
        assert!(assemble(&p, GeneratorMode::Critical, 2).is_ok());
    }

    #[test]
    fn order_zero_is_rejected() {
        let vars = vec!["x".to_string()];
        let f = parse_poly("3", &vars).unwrap();
        let p = Problem::new(vars, f, vec![]).unwrap();
        assert_eq!(
            assemble(&p, GeneratorMode::Critical, 0).unwrap_err(),
            RelaxError::ZeroOrder
        );
    }

    #[test]
    fn high_degree_generators_are_omitted() {
        // Gradient-Gram generator of the Motzkin polynomial has degree 10,
        // which exceeds the budget until d = 5.
        let vars = vec!["x".to_string(), "y".to_string()];
        let f = parse_poly("x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1", &vars).unwrap();
        let p = Problem::new(vars, f, vec![]).unwrap();
        let r3 = assemble(&p, GeneratorMode::Critical, 3).unwrap();
        assert_eq!(r3.ideal.len(), 0);
        assert_eq!(r3.omitted_generators, vec!["J={}".to_string()]);
        let r5 = assemble(&p, GeneratorMode::Critical, 5).unwrap();
        assert_eq!(r5.ideal.len(), 1);
        assert!(r5.omitted_generators.is_empty());
        // Multiplier degree 2d - 10 = 0: one free coefficient plus Gamma.
        assert_eq!(r5.sdp.num_free, 2);
    }

    #[test]
    fn gradient_mode_uses_partials() {
        let vars = vec!["x".to_string()];
        let f = parse_poly("x^4 - 2*x^2", &vars).unwrap();
        let p = Problem::new(vars, f, vec![]).unwrap();
        let relax = assemble(&p, GeneratorMode::Gradient, 2).unwrap();
        assert_eq!(relax.sdp.block_sizes, vec![3]);
        assert_eq!(relax.ideal.len(), 1);
        assert_eq!(relax.ideal[0].label, "df/dx");
        // Generator degree 3 leaves multiplier degree 1: two coefficients.
        assert_eq!(relax.ideal[0].multiplier_basis.len(), 2);
        assert_eq!(relax.sdp.num_free, 3);
        assert!(relax.sdp.free_labels[1].starts_with("phi[df/dx]"));
    }
}
