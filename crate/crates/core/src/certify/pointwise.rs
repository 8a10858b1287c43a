//! Pointwise diagnostics at a candidate minimizer: active-set regularity,
//! the boundary Hessian test, and a penalty descent for locating candidates.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;

use crate::critical::Problem;
use crate::polyring::{rational_to_f64, Polynomial};

use super::CertError;

/// Active constraints at a point and whether their gradients are linearly
/// independent there.
#[derive(Clone, Debug)]
pub struct RegularityReport {
    /// 0-based indices of constraints active at the point.
    pub active: Vec<usize>,
    /// Singular values of the active-gradient matrix, descending. Empty when
    /// nothing is active.
    pub singular_values: Vec<f64>,
    pub regular: bool,
}

fn coeff_scale(p: &Polynomial) -> f64 {
    1.0 + rational_to_f64(&p.sum_abs_coeff())
}

/// Constraints within `act_tol` (relative to coefficient size) of zero are
/// active; the point is regular when their gradients at the point have full
/// row rank, witnessed by the smallest singular value exceeding `rank_tol`.
/// A point with no active constraints is vacuously regular.
pub fn check_regularity(
    problem: &Problem,
    point: &[f64],
    act_tol: f64,
    rank_tol: f64,
) -> Result<RegularityReport, CertError> {
    if point.len() != problem.nvars() {
        return Err(CertError::PointArity {
            expected: problem.nvars(),
            got: point.len(),
        });
    }
    let active: Vec<usize> = problem
        .constraints()
        .iter()
        .enumerate()
        .filter(|(_, g)| g.evaluate_f64(point).abs() <= act_tol * coeff_scale(g))
        .map(|(j, _)| j)
        .collect();
    let n = problem.nvars();
    let k = active.len();
    if k == 0 {
        return Ok(RegularityReport {
            active,
            singular_values: Vec::new(),
            regular: true,
        });
    }
    let grads: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| {
            let g = &problem.constraints()[j];
            (0..n)
                .map(|i| g.differentiate(i).evaluate_f64(point))
                .collect()
        })
        .collect();
    let mat = DMatrix::from_fn(k, n, |r, c| grads[r][c]);
    let mut sv: Vec<f64> = mat
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    // k gradients in n-space are independent only if k <= n and the smallest
    // of the k singular values clears the rank tolerance.
    let regular = k <= n && sv.len() == k && sv[k - 1] > rank_tol;
    Ok(RegularityReport {
        active,
        singular_values: sv,
        regular,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BhcVerdict {
    Holds,
    Fails,
    Inconclusive,
}

impl std::fmt::Display for BhcVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BhcVerdict::Holds => write!(f, "holds"),
            BhcVerdict::Fails => write!(f, "fails"),
            BhcVerdict::Inconclusive => write!(f, "inconclusive"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct BhcTolerances {
    /// The test presumes the objective vanishes at the point.
    pub zero_tol: f64,
    /// Activity threshold for constraints.
    pub act_tol: f64,
    /// Smallest singular value certifying gradient independence.
    pub rank_tol: f64,
    /// Allowed stationarity residual after fitting multipliers.
    pub res_tol: f64,
    /// Multipliers must exceed this to count as strictly positive.
    pub pos_tol: f64,
    /// Reduced Hessian eigenvalues must exceed this.
    pub pd_tol: f64,
}

impl Default for BhcTolerances {
    fn default() -> Self {
        BhcTolerances {
            zero_tol: 1e-6,
            act_tol: 1e-6,
            rank_tol: 1e-6,
            res_tol: 1e-6,
            pos_tol: 1e-6,
            pd_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BhcReport {
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub active: Vec<usize>,
    pub regular: bool,
    pub singular_values: Vec<f64>,
    /// Least-squares multipliers, aligned with `active`.
    pub multipliers: Vec<f64>,
    /// `max |grad f - sum a_j grad g_j|` at the point.
    pub stationarity_residual: f64,
    /// Smallest eigenvalue of the Lagrangian Hessian restricted to the
    /// tangent space of the active constraints; `None` when that space is
    /// zero-dimensional or the test stopped earlier.
    pub reduced_hessian_min_eig: Option<f64>,
    pub verdict: BhcVerdict,
    pub notes: Vec<String>,
}

fn hessian_at(p: &Polynomial, point: &[f64]) -> DMatrix<f64> {
    let n = point.len();
    let partials: Vec<Polynomial> = (0..n).map(|i| p.differentiate(i)).collect();
    DMatrix::from_fn(n, n, |i, j| {
        partials[i].differentiate(j).evaluate_f64(point)
    })
}

/// Second-order test at a candidate global minimizer with value zero.
///
/// Holds when the point is feasible and regular, the objective vanishes,
/// stationarity has strictly positive multipliers on every active
/// constraint, and the Lagrangian Hessian is positive definite on the
/// tangent space of the active gradients. Anything the test cannot decide
/// (objective not zero, infeasible point, irregular active set) comes back
/// as `Inconclusive` rather than an error.
pub fn check_bhc(
    problem: &Problem,
    point: &[f64],
    tols: &BhcTolerances,
) -> Result<BhcReport, CertError> {
    let reg = check_regularity(problem, point, tols.act_tol, tols.rank_tol)?;
    let n = problem.nvars();
    let fval = problem.objective().evaluate_f64(point);
    let mut report = BhcReport {
        point: point.to_vec(),
        objective_value: fval,
        active: reg.active.clone(),
        regular: reg.regular,
        singular_values: reg.singular_values,
        multipliers: Vec::new(),
        stationarity_residual: f64::NAN,
        reduced_hessian_min_eig: None,
        verdict: BhcVerdict::Inconclusive,
        notes: Vec::new(),
    };

    if fval.abs() > tols.zero_tol * coeff_scale(problem.objective()) {
        report.notes.push(format!(
            "objective is {fval} at the point; the test presumes value zero"
        ));
        return Ok(report);
    }
    for (j, g) in problem.constraints().iter().enumerate() {
        if g.evaluate_f64(point) < -tols.act_tol * coeff_scale(g) {
            report
                .notes
                .push(format!("constraint {} is violated at the point", j + 1));
            return Ok(report);
        }
    }
    if !report.regular {
        report
            .notes
            .push("active constraint gradients are not linearly independent".to_string());
        return Ok(report);
    }

    let grad_f: Vec<f64> = (0..n)
        .map(|i| problem.objective().differentiate(i).evaluate_f64(point))
        .collect();
    let grad_scale = 1.0 + grad_f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let k = report.active.len();
    if k == 0 {
        report.stationarity_residual = grad_scale - 1.0;
    } else {
        // grad f = sum_j a_j grad g_j in least squares; G^T is n x k.
        let gt = DMatrix::from_fn(n, k, |i, c| {
            problem.constraints()[report.active[c]]
                .differentiate(i)
                .evaluate_f64(point)
        });
        let rhs = DVector::from_row_slice(&grad_f);
        let a = match gt.clone().svd(true, true).solve(&rhs, 1e-12) {
            Ok(a) => a,
            Err(msg) => {
                report.notes.push(format!("multiplier solve failed: {msg}"));
                return Ok(report);
            }
        };
        let res = &gt * &a - &rhs;
        report.stationarity_residual = res.amax();
        report.multipliers = a.iter().copied().collect();
    }
    if report.stationarity_residual > tols.res_tol * grad_scale {
        report.verdict = BhcVerdict::Fails;
        report.notes.push(format!(
            "point is not stationary: residual {} exceeds tolerance",
            report.stationarity_residual
        ));
        return Ok(report);
    }
    for (idx, &a) in report.multipliers.iter().enumerate() {
        // Negated so a NaN multiplier fails instead of passing.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(a > tols.pos_tol) {
            report.verdict = BhcVerdict::Fails;
            report.notes.push(format!(
                "multiplier {a} on constraint {} is not strictly positive",
                report.active[idx] + 1
            ));
            return Ok(report);
        }
    }

    // Lagrangian built exactly; only its second derivatives are evaluated
    // in floats.
    let mut lagrangian = problem.objective().clone();
    for (idx, &j) in report.active.iter().enumerate() {
        let a = match BigRational::from_float(report.multipliers[idx]) {
            Some(a) => a,
            None => {
                report.notes.push("multiplier is not finite".to_string());
                return Ok(report);
            }
        };
        lagrangian = &lagrangian - &problem.constraints()[j].scale(&a);
    }
    let h = hessian_at(&lagrangian, point);

    let z = if k == 0 {
        DMatrix::identity(n, n)
    } else {
        let gt = DMatrix::from_fn(n, k, |i, c| {
            problem.constraints()[report.active[c]]
                .differentiate(i)
                .evaluate_f64(point)
        });
        // Null space of the k x n gradient matrix G: eigenvectors of G^T G
        // for its n - k smallest eigenvalues (zero up to roundoff, since
        // regularity gives G full row rank).
        let eig = (&gt * gt.transpose()).symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let cols: Vec<_> = order[..n - k]
            .iter()
            .map(|&c| eig.eigenvectors.column(c).into_owned())
            .collect();
        DMatrix::from_columns(&cols)
    };
    if z.ncols() == 0 {
        report.verdict = BhcVerdict::Holds;
        report.notes.push(
            "active gradients span the whole space; the Hessian condition is vacuous".to_string(),
        );
        return Ok(report);
    }
    let reduced = z.transpose() * &h * &z;
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let min_eig = sym
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    report.reduced_hessian_min_eig = Some(min_eig);
    if min_eig > tols.pd_tol {
        report.verdict = BhcVerdict::Holds;
    } else {
        report.verdict = BhcVerdict::Fails;
        report.notes.push(format!(
            "reduced Hessian has eigenvalue {min_eig}, not positive definite"
        ));
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct DescentSettings {
    /// Iteration budget per penalty stage.
    pub max_iterations: usize,
    /// Stop a stage when `max |grad F| <= grad_tol * (1 + |F|)`.
    pub grad_tol: f64,
    /// Quadratic penalty weights, applied in order; ignored when the
    /// problem has no constraints.
    pub penalty_stages: Vec<f64>,
    /// Iterates beyond this norm count as divergence.
    pub divergence_radius: f64,
}

impl Default for DescentSettings {
    fn default() -> Self {
        DescentSettings {
            max_iterations: 2000,
            grad_tol: 1e-10,
            penalty_stages: vec![1e2, 1e4, 1e6, 1e8],
            divergence_radius: 1e8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MinimizeReport {
    pub point: Vec<f64>,
    /// Objective value at the final point (without penalty).
    pub value: f64,
    /// `max |grad F|` of the last penalized stage at the final point.
    pub penalty_gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
}

/// Penalty descent toward a local minimizer of `f` over the feasible set.
///
/// Minimizes `f + rho * sum max(0, -g_j)^2` by backtracking gradient
/// descent, sweeping `rho` through the configured stages. Unconstrained
/// objectives skip the penalty. An objective that keeps improving forever
/// (such as `f = x`) is reported as diverged, not an error.
pub fn local_minimize(
    problem: &Problem,
    start: &[f64],
    settings: &DescentSettings,
) -> Result<MinimizeReport, CertError> {
    let n = problem.nvars();
    if start.len() != n {
        return Err(CertError::PointArity {
            expected: n,
            got: start.len(),
        });
    }
    let grad_f: Vec<Polynomial> = (0..n)
        .map(|i| problem.objective().differentiate(i))
        .collect();
    let grad_g: Vec<Vec<Polynomial>> = problem
        .constraints()
        .iter()
        .map(|g| (0..n).map(|i| g.differentiate(i)).collect())
        .collect();

    let value = |x: &[f64], rho: f64| -> f64 {
        let mut v = problem.objective().evaluate_f64(x);
        for g in problem.constraints() {
            let gv = g.evaluate_f64(x);
            if gv < 0.0 {
                v += rho * gv * gv;
            }
        }
        v
    };
    let gradient = |x: &[f64], rho: f64| -> Vec<f64> {
        let mut grad: Vec<f64> = grad_f.iter().map(|p| p.evaluate_f64(x)).collect();
        for (j, g) in problem.constraints().iter().enumerate() {
            let gv = g.evaluate_f64(x);
            if gv < 0.0 {
                for (i, item) in grad.iter_mut().enumerate() {
                    *item += 2.0 * rho * gv * grad_g[j][i].evaluate_f64(x);
                }
            }
        }
        grad
    };

    let stages: Vec<f64> = if problem.num_constraints() == 0 || settings.penalty_stages.is_empty() {
        vec![0.0]
    } else {
        settings.penalty_stages.clone()
    };

    let mut x = start.to_vec();
    let mut iterations = 0usize;
    let mut converged = false;
    let mut grad_norm = f64::NAN;
    for &rho in &stages {
        let mut step = 1.0f64;
        converged = false;
        for _ in 0..settings.max_iterations {
            let val = value(&x, rho);
            if !val.is_finite() || x.iter().any(|v| v.abs() > settings.divergence_radius) {
                return Ok(MinimizeReport {
                    value: problem.objective().evaluate_f64(&x),
                    point: x,
                    penalty_gradient_norm: grad_norm,
                    iterations,
                    converged: false,
                    diverged: true,
                });
            }
            let grad = gradient(&x, rho);
            grad_norm = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if grad_norm <= settings.grad_tol * (1.0 + val.abs()) {
                converged = true;
                break;
            }
            let slope: f64 = grad.iter().map(|v| v * v).sum();
            let mut accepted = false;
            for _ in 0..60 {
                let cand: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
                let cval = value(&cand, rho);
                if cval.is_finite() && cval <= val - 1e-4 * step * slope {
                    x = cand;
                    step *= 2.0;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            iterations += 1;
            if !accepted {
                // No decrease at any step length: as stationary as float
                // arithmetic allows at this stage.
                break;
            }
        }
    }

    Ok(MinimizeReport {
        value: problem.objective().evaluate_f64(&x),
        penalty_gradient_norm: grad_norm,
        point: x,
        iterations,
        converged,
        diverged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyring::parse_poly;

    fn problem(vars: &[&str], f: &str, gs: &[&str]) -> Problem {
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let f = parse_poly(f, &vars).unwrap();
        let gs = gs.iter().map(|g| parse_poly(g, &vars).unwrap()).collect();
        Problem::new(vars, f, gs).unwrap()
    }

    fn halfparaboloid() -> Problem {
        problem(&["x", "y", "z"], "x", &["x - y^2 - z^2"])
    }

    #[test]
    fn regularity_at_the_paraboloid_vertex() {
        let rep = check_regularity(&halfparaboloid(), &[0.0; 3], 1e-6, 1e-6).unwrap();
        assert_eq!(rep.active, vec![0]);
        assert!(rep.regular);
        assert!((rep.singular_values[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cusp_constraint_is_active_but_irregular() {
        // g = x^3 vanishes at 0 together with its gradient.
        let p = problem(&["x"], "x", &["x^3"]);
        let rep = check_regularity(&p, &[0.0], 1e-6, 1e-6).unwrap();
        assert_eq!(rep.active, vec![0]);
        assert!(!rep.regular);
        assert!(rep.singular_values[0].abs() < 1e-12);
    }

    #[test]
    fn interior_points_are_vacuously_regular() {
        let rep = check_regularity(&halfparaboloid(), &[1.0, 0.0, 0.0], 1e-6, 1e-6).unwrap();
        assert!(rep.active.is_empty());
        assert!(rep.regular);
        assert!(rep.singular_values.is_empty());
    }

    #[test]
    fn arity_mismatch_is_an_error() {
        assert!(matches!(
            check_regularity(&halfparaboloid(), &[0.0], 1e-6, 1e-6),
            Err(CertError::PointArity {
                expected: 3,
                got: 1
            })
        ));
        assert!(matches!(
            check_bhc(&halfparaboloid(), &[0.0, 0.0], &BhcTolerances::default()),
            Err(CertError::PointArity { .. })
        ));
    }

    #[test]
    fn bhc_holds_at_the_paraboloid_vertex() {
        let rep = check_bhc(&halfparaboloid(), &[0.0; 3], &BhcTolerances::default()).unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Holds);
        assert_eq!(rep.active, vec![0]);
        assert!((rep.multipliers[0] - 1.0).abs() < 1e-9);
        assert!(rep.stationarity_residual < 1e-12);
        // L = x - (x - y^2 - z^2) = y^2 + z^2 restricted to span{y,z}.
        let min_eig = rep.reduced_hessian_min_eig.unwrap();
        assert!((min_eig - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bhc_holds_for_the_univariate_quartic() {
        // 6x^2 + 8x^3 + 3x^4 has an unconstrained minimum at 0 with f'' = 12.
        let p = problem(&["x"], "6*x^2 + 8*x^3 + 3*x^4", &[]);
        let rep = check_bhc(&p, &[0.0], &BhcTolerances::default()).unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Holds);
        assert!(rep.multipliers.is_empty());
        assert!((rep.reduced_hessian_min_eig.unwrap() - 12.0).abs() < 1e-12);
    }

    #[test]
    fn flat_direction_makes_bhc_fail() {
        // x^2 in two variables: minimum at the origin, but the Hessian is
        // singular along y.
        let p = problem(&["x", "y"], "x^2", &[]);
        let rep = check_bhc(&p, &[0.0, 0.0], &BhcTolerances::default()).unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Fails);
        assert!(rep.reduced_hessian_min_eig.unwrap().abs() < 1e-12);
    }

    #[test]
    fn nonzero_objective_value_is_inconclusive() {
        let rep = check_bhc(
            &halfparaboloid(),
            &[1.0, 0.0, 0.0],
            &BhcTolerances::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Inconclusive);
        assert!(rep.notes[0].contains("value zero"));
    }

    #[test]
    fn infeasible_point_is_inconclusive() {
        let rep = check_bhc(
            &halfparaboloid(),
            &[0.0, 1.0, 0.0],
            &BhcTolerances::default(),
        )
        .unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Inconclusive);
        assert!(rep.notes[0].contains("violated"));
    }

    #[test]
    fn irregular_active_set_is_inconclusive() {
        let p = problem(&["x"], "x^2", &["x^3"]);
        let rep = check_bhc(&p, &[0.0], &BhcTolerances::default()).unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Inconclusive);
        assert!(rep.notes[0].contains("linearly independent"));
    }

    #[test]
    fn nonstationary_zero_fails() {
        // f = x vanishes at the origin of the unconstrained line but has
        // gradient 1 there.
        let p = problem(&["x"], "x", &[]);
        let rep = check_bhc(&p, &[0.0], &BhcTolerances::default()).unwrap();
        assert_eq!(rep.verdict, BhcVerdict::Fails);
        assert!((rep.stationarity_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_hessian_matches_central_differences() {
        let vars: Vec<String> = ["x", "y"].iter().map(|s| s.to_string()).collect();
        let p = parse_poly("x^3*y - 2*x*y^2 + x^2 - y + 1", &vars).unwrap();
        let pt = [0.7, -0.4];
        let h = hessian_at(&p, &pt);
        let step = 1e-5;
        for i in 0..2 {
            for j in 0..2 {
                let probe = |si: f64, sj: f64| {
                    let mut q = pt;
                    q[i] += si * step;
                    q[j] += sj * step;
                    p.evaluate_f64(&q)
                };
                let fd = (probe(1.0, 1.0) - probe(1.0, -1.0) - probe(-1.0, 1.0)
                    + probe(-1.0, -1.0))
                    / (4.0 * step * step);
                assert!(
                    (h[(i, j)] - fd).abs() <= 1e-4 * (1.0 + h[(i, j)].abs()),
                    "H[{i}{j}] = {} vs fd {}",
                    h[(i, j)],
                    fd
                );
            }
        }
    }

    #[test]
    fn descent_finds_the_quadratic_minimum() {
        let p = problem(&["x", "y"], "x^2 - 2*x + 1 + 2*y^2 + 2*y + 0.5", &[]);
        let rep = local_minimize(&p, &[5.0, -3.0], &DescentSettings::default()).unwrap();
        assert!(rep.converged);
        assert!(!rep.diverged);
        assert!((rep.point[0] - 1.0).abs() < 1e-8);
        assert!((rep.point[1] + 0.5).abs() < 1e-8);
    }

    #[test]
    fn descent_reaches_the_motzkin_well() {
        let p = problem(&["x", "y"], "x^4*y^2 + x^2*y^4 - 3*x^2*y^2 + 1", &[]);
        let rep = local_minimize(&p, &[0.9, 1.1], &DescentSettings::default()).unwrap();
        assert!(!rep.diverged);
        assert!((rep.point[0] - 1.0).abs() < 1e-6, "x = {}", rep.point[0]);
        assert!((rep.point[1] - 1.0).abs() < 1e-6, "y = {}", rep.point[1]);
        assert!(rep.value.abs() < 1e-10);
    }

    #[test]
    fn penalty_descent_slides_to_the_constrained_vertex() {
        let rep = local_minimize(
            &halfparaboloid(),
            &[1.0, 0.3, 0.3],
            &DescentSettings::default(),
        )
        .unwrap();
        assert!(!rep.diverged);
        for (i, v) in rep.point.iter().enumerate() {
            assert!(v.abs() < 1e-6, "coordinate {i} is {v}");
        }
    }

    #[test]
    fn unbounded_descent_reports_divergence() {
        let p = problem(&["x"], "x", &[]);
        let rep = local_minimize(&p, &[0.0], &DescentSettings::default()).unwrap();
        assert!(rep.diverged);
        assert!(!rep.converged);
    }
}
