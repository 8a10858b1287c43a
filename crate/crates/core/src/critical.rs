//! Critical ideals of polynomial optimization problems.
//!
//! For `f` minimized over `K = {g_1 >= 0, ..., g_s >= 0}`, every subset
//! `J` of the constraints contributes one generator `g_J * h_{J^c}` where
//! `g_J` is the product of the constraints in `J` and `h_{J^c}` is the Gram
//! determinant of the gradient of `f` stacked over the gradients of the
//! constraints outside `J`. The generators vanish on every point where some
//! subset of constraints is active and the corresponding first-order
//! optimality condition holds, so the variety they cut out contains all
//! minimizers of `f` on `K` whenever the minimum is attained.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::polyring::{rational_to_f64, PolyMatrix, Polynomial};

/// Hard cap on the number of inequality constraints: the generator family
/// doubles per constraint.
pub const MAX_CONSTRAINTS: usize = 12;

/// Constraint count above which a size warning is logged.
pub const WARN_CONSTRAINTS: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProblemError {
    #[error("a problem needs at least one variable")]
    NoVariables,
    #[error("duplicate variable name '{0}'")]
    DuplicateVariable(String),
    #[error("objective is over {got} variables, expected {expected}")]
    ObjectiveArity { expected: usize, got: usize },
    #[error("constraint {index} is over {got} variables, expected {expected}")]
    ConstraintArity {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("{got} constraints exceed the supported maximum of {max}")]
    TooManyConstraints { got: usize, max: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("gradient mode applies only to unconstrained problems, got {s} constraints")]
    GradientModeConstrained { s: usize },
}

/// A polynomial minimization problem `inf f(x) : g_i(x) >= 0`.
#[derive(Clone, Debug)]
pub struct Problem {
    vars: Vec<String>,
    objective: Polynomial,
    constraints: Vec<Polynomial>,
}

impl Problem {
    pub fn new(
        vars: Vec<String>,
        objective: Polynomial,
        constraints: Vec<Polynomial>,
    ) -> Result<Self, ProblemError> {
        if vars.is_empty() {
            return Err(ProblemError::NoVariables);
        }
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                return Err(ProblemError::DuplicateVariable(v.clone()));
            }
        }
        if objective.nvars() != vars.len() {
            return Err(ProblemError::ObjectiveArity {
                expected: vars.len(),
                got: objective.nvars(),
            });
        }
        for (i, g) in constraints.iter().enumerate() {
            if g.nvars() != vars.len() {
                return Err(ProblemError::ConstraintArity {
                    index: i + 1,
                    expected: vars.len(),
                    got: g.nvars(),
                });
            }
        }
        if constraints.len() > MAX_CONSTRAINTS {
            return Err(ProblemError::TooManyConstraints {
                got: constraints.len(),
                max: MAX_CONSTRAINTS,
            });
        }
        if constraints.len() > WARN_CONSTRAINTS {
            log::warn!(
                "{} constraints produce {} ideal generators; expect long runtimes",
                constraints.len(),
                1usize << constraints.len()
            );
        }
        Ok(Problem {
            vars,
            objective,
            constraints,
        })
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn objective(&self) -> &Polynomial {
        &self.objective
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }
}

/// A subset of the constraint indices `{1, ..., s}`, stored as a bitmask
/// with bit `j` standing for the (0-based) constraint `j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ConstraintSubset(u32);

impl ConstraintSubset {
    pub const EMPTY: ConstraintSubset = ConstraintSubset(0);

    pub fn from_mask(mask: u32) -> Self {
        ConstraintSubset(mask)
    }

    /// Subset from 0-based constraint indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        let mut mask = 0u32;
        for &i in indices {
            assert!(i < 32);
            mask |= 1 << i;
        }
        ConstraintSubset(mask)
    }

    pub fn full(s: usize) -> Self {
        assert!(s <= 32);
        ConstraintSubset(((1u64 << s) - 1) as u32)
    }

    pub fn mask(&self) -> u32 {
        self.0
    }

    pub fn contains(&self, j: usize) -> bool {
        j < 32 && self.0 & (1 << j) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// 0-based member indices, ascending.
    pub fn indices(&self) -> Vec<usize> {
        (0..32).filter(|&j| self.contains(j)).collect()
    }

    pub fn complement(&self, s: usize) -> Self {
        ConstraintSubset(Self::full(s).0 & !self.0)
    }

    /// All `2^s` subsets in ascending bitmask order.
    pub fn all(s: usize) -> impl Iterator<Item = ConstraintSubset> {
        (0..1u64 << s).map(|m| ConstraintSubset(m as u32))
    }
}

/// Prints as a 1-based index set, e.g. `{}`, `{1,3}`.
impl fmt::Display for ConstraintSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.indices().into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}", j + 1)?;
        }
        write!(f, "}}")
    }
}

/// Which ideal the relaxation quotients by.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneratorMode {
    /// Critical ideal over all constraint subsets; the default.
    Critical,
    /// Gradient ideal of the objective; unconstrained problems only.
    Gradient,
}

impl fmt::Display for GeneratorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorMode::Critical => write!(f, "critical"),
            GeneratorMode::Gradient => write!(f, "gradient"),
        }
    }
}

impl FromStr for GeneratorMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "critical" => Ok(GeneratorMode::Critical),
            "gradient" => Ok(GeneratorMode::Gradient),
            other => Err(format!(
                "unknown mode '{other}', expected 'critical' or 'gradient'"
            )),
        }
    }
}

/// One ideal generator, remembered with the subset it came from (critical
/// mode) and a printable label used in certificates and reports.
#[derive(Clone, Debug)]
pub struct Generator {
    pub label: String,
    pub subset: Option<ConstraintSubset>,
    pub poly: Polynomial,
}

/// The generator family of the chosen ideal, in a fixed deterministic order.
#[derive(Clone, Debug)]
pub struct GeneratorSet {
    pub mode: GeneratorMode,
    pub items: Vec<Generator>,
}

/// Product of the constraints in `subset`; the empty product is 1.
pub fn constraint_product(problem: &Problem, subset: ConstraintSubset) -> Polynomial {
    let mut acc = Polynomial::one(problem.nvars());
    for j in subset.indices() {
        acc = &acc * &problem.constraints()[j];
    }
    acc
}

/// The Jacobian-style stack: gradient of the objective on top, then the
/// gradients of the constraints in `subset`, ascending.
pub fn gradient_stack(problem: &Problem, subset: ConstraintSubset) -> PolyMatrix {
    let mut rows = vec![problem.objective().gradient()];
    for j in subset.indices() {
        rows.push(problem.constraints()[j].gradient());
    }
    PolyMatrix::from_rows(problem.nvars(), rows)
}

/// Gram determinant `det(A A^T)` of the gradient stack for `subset`. It
/// vanishes exactly where the stacked gradients are linearly dependent
/// (over the reals), which encodes first-order criticality.
pub fn gradient_gram_det(problem: &Problem, subset: ConstraintSubset) -> Polynomial {
    let a = gradient_stack(problem, subset);
    let gram = a.mul(&a.transpose()).expect("stack times own transpose");
    gram.det().expect("gram matrix is square")
}

/// Generators `g_J * h_{J^c}` for every subset `J`, ascending bitmask order.
pub fn critical_generators(problem: &Problem) -> GeneratorSet {
    let s = problem.num_constraints();
    let items = ConstraintSubset::all(s)
        .map(|j| {
            let g = constraint_product(problem, j);
            let h = gradient_gram_det(problem, j.complement(s));
            Generator {
                label: format!("J={j}"),
                subset: Some(j),
                poly: &g * &h,
            }
        })
        .collect();
    GeneratorSet {
        mode: GeneratorMode::Critical,
        items,
    }
}

/// The partial derivatives of the objective. Only meaningful without
/// constraints, where the critical variety is the classical critical locus.
pub fn gradient_generators(problem: &Problem) -> Result<GeneratorSet, GeneratorError> {
    let s = problem.num_constraints();
    if s > 0 {
        return Err(GeneratorError::GradientModeConstrained { s });
    }
    let items = problem
        .objective()
        .gradient()
        .into_iter()
        .enumerate()
        .map(|(i, poly)| Generator {
            label: format!("df/d{}", problem.vars()[i]),
            subset: None,
            poly,
        })
        .collect();
    Ok(GeneratorSet {
        mode: GeneratorMode::Gradient,
        items,
    })
}

/// Generator family for the requested mode.
pub fn generators(problem: &Problem, mode: GeneratorMode) -> Result<GeneratorSet, GeneratorError> {
    match mode {
        GeneratorMode::Critical => Ok(critical_generators(problem)),
        GeneratorMode::Gradient => gradient_generators(problem),
    }
}

/// Largest generator residual at `point`, each scaled by one plus the
/// generator's coefficient 1-norm so the measure is insensitive to scaling.
pub fn critical_residual(generators: &GeneratorSet, point: &[f64]) -> f64 {
    generators
        .items
        .iter()
        .map(|g| {
            let scale = 1.0 + rational_to_f64(&g.poly.sum_abs_coeff());
            (g.poly.evaluate_f64(point) / scale).abs()
        })
        .fold(0.0, f64::max)
}

/// Whether `point` lies on the variety of the generators, up to `tol`.
pub fn is_critical_point(generators: &GeneratorSet, point: &[f64], tol: f64) -> bool {
    critical_residual(generators, point) <= tol
}
