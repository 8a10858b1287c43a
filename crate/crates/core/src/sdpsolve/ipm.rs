//! Infeasible-start primal-dual path-following interior-point iteration
//! with the HKM search direction and Mehrotra's predictor-corrector.
//!
//! Internal convention: minimize `c . v` subject to `A(X) + F v = b`,
//! `X` PSD, `v` free, where `c` is the negated external objective. The
//! dual carries multipliers `y` with slack `S = -A*(y)` (the cost matrix
//! is zero). Each iteration eliminates `(dX, dS)` from the linearized
//! complementarity condition `H(X S) = sigma mu I`, solves the Schur
//! system in `(dy, dv)`, and recovers the matrix directions:
//!
//! ```text
//! [ M  F ] [dy]   [ rp - A(G) ]        M_ij = <A_i, H(X A_j S^-1)>
//! [ F' -d] [dv] = [ rf        ]        G    = sigma mu S^-1 - X - Corr - H(X Rd S^-1)
//! dS = Rd - A*(dy)
//! dX = G + H(X A*(dy) S^-1)
//! ```
//!
//! The tiny diagonal `d` keeps the system factorable when `F` has
//! dependent columns, which happens whenever an ideal multiplier shares a
//! monomial with `Gamma`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SdpSolution, SolveStatus, SolverSettings};
use crate::sosrelax::SdpProblem;

/// Fraction-to-boundary step damping.
const TAU: f64 = 0.98;
/// Quasidefinite regularization of the Schur system.
const REG: f64 = 1e-10;
/// Tolerance relaxation accepted when the iteration breaks down early:
/// degenerate optimal faces routinely defeat the last two or three digits.
const REDUCED: f64 = 1e3;
/// Step bound standing in for "unblocked".
const BIG_STEP: f64 = 1e30;
/// Multiplier magnitude that triggers a Farkas-certificate test.
const FARKAS_SCALE: f64 = 1e8;
const FARKAS_TOL: f64 = 1e-8;

/// Most accurate iterate visited so far. The endgame can stall and slide
/// off the cone long after the path has passed a serviceable point, so the
/// failure handling judges this snapshot rather than the dying state.
struct BestIterate {
    iteration: usize,
    v: DVector<f64>,
    x: Vec<DMatrix<f64>>,
    y: DVector<f64>,
    prim: f64,
    dual: f64,
    gap: f64,
}

pub(super) fn run(sdp: &SdpProblem, kept: &[usize], settings: &SolverSettings) -> SdpSolution {
    let sizes = &sdp.block_sizes;
    let nb = sizes.len();
    let p = sdp.num_free;
    let m = kept.len();
    let total_dim: usize = sizes.iter().sum();

    // Dense symmetric coefficient matrices per kept row.
    let a_dense: Vec<Vec<DMatrix<f64>>> = kept
        .iter()
        .map(|&r| {
            let mut blocks: Vec<DMatrix<f64>> =
                sizes.iter().map(|&sz| DMatrix::zeros(sz, sz)).collect();
            for e in &sdp.rows[r].entries {
                blocks[e.block][(e.i, e.j)] += e.value;
                if e.i != e.j {
                    blocks[e.block][(e.j, e.i)] += e.value;
                }
            }
            blocks
        })
        .collect();
    let mut f_dense = DMatrix::<f64>::zeros(m, p);
    for (k, &r) in kept.iter().enumerate() {
        for &(col, c) in &sdp.rows[r].free {
            f_dense[(k, col)] += c;
        }
    }
    let b = DVector::<f64>::from_iterator(m, kept.iter().map(|&r| sdp.rows[r].rhs));
    let c_free = DVector::<f64>::from_iterator(p, sdp.objective.iter().map(|&o| -o));
    let bnorm = 1.0 + vinf(&b);
    let cnorm = 1.0 + vinf(&c_free);

    let eta = 1.0 + vinf(&b);
    let mut x: Vec<DMatrix<f64>> = sizes
        .iter()
        .map(|&sz| DMatrix::identity(sz, sz) * eta)
        .collect();
    let mut s = x.clone();
    let mut y = DVector::<f64>::zeros(m);
    let mut v = DVector::<f64>::zeros(p);

    let report = |status: SolveStatus,
                  diagnostic: Option<String>,
                  iterations: usize,
                  v: &DVector<f64>,
                  x: &[DMatrix<f64>],
                  y: &DVector<f64>,
                  prim: f64,
                  dual: f64,
                  gap: f64| {
        if settings.verbosity >= 1 {
            log::debug!(
                "ipm done: {status} after {iterations} iterations, \
                 prim {prim:.3e} dual {dual:.3e} gap {gap:.3e}"
            );
        }
        SdpSolution {
            status,
            objective: sdp
                .objective
                .iter()
                .zip(v.iter())
                .map(|(o, vi)| o * vi)
                .sum(),
            free_values: v.iter().copied().collect(),
            blocks: x.to_vec(),
            dual_values: y.iter().copied().collect(),
            iterations,
            primal_residual: prim,
            dual_residual: dual,
            relative_gap: gap,
            diagnostic,
        }
    };

    let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut best_score = f64::INFINITY;
    let mut best: Option<BestIterate> = None;
    let mut stop: Option<(SolveStatus, usize, String)> = None;
    for iter in 0..settings.max_iterations {
        let rp = &b - &apply_a(&a_dense, &x) - &f_dense * &v;
        let astar_y = apply_a_star(&a_dense, &y, sizes);
        let rd: Vec<DMatrix<f64>> = s.iter().zip(&astar_y).map(|(sb, ab)| -sb - ab).collect();
        let rf = &c_free - f_dense.tr_mul(&y);
        let mu = x.iter().zip(&s).map(|(xb, sb)| xb.dot(sb)).sum::<f64>() / total_dim.max(1) as f64;
        let pobj = c_free.dot(&v);
        let dobj = b.dot(&y);
        let prim_res = vinf(&rp) / bnorm;
        let dual_res = rd.iter().map(minf).fold(vinf(&rf), f64::max) / cnorm;
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        last = (prim_res, dual_res, gap);
        let score = (prim_res / settings.feas_tol)
            .max(dual_res / settings.feas_tol)
            .max(gap / settings.gap_tol);
        if score < best_score {
            best_score = score;
            best = Some(BestIterate {
                iteration: iter,
                v: v.clone(),
                x: x.clone(),
                y: y.clone(),
                prim: prim_res,
                dual: dual_res,
                gap,
            });
        }
        if settings.verbosity >= 2 {
            log::debug!(
                "ipm iter {iter}: mu {mu:.3e} prim {prim_res:.3e} dual {dual_res:.3e} gap {gap:.3e}"
            );
        }
        if !prim_res.is_finite() || !dual_res.is_finite() || !mu.is_finite() {
            stop = Some((
                SolveStatus::NumericalFailure,
                iter,
                "iterates left the representable range".into(),
            ));
            break;
        }
        if prim_res <= settings.feas_tol && dual_res <= settings.feas_tol && gap <= settings.gap_tol
        {
            return report(
                SolveStatus::Optimal,
                None,
                iter,
                &v,
                &x,
                &y,
                prim_res,
                dual_res,
                gap,
            );
        }
        let external = -pobj;
        if external > 1.0 / settings.feas_tol && vinf(&rp) / (1.0 + vinf(&v)) <= 1e-6 {
            return report(
                SolveStatus::Unbounded,
                Some(
                    "relaxation admits every Gamma: the critical variety may be \
                     empty or the truncated ideal contains 1 at this degree"
                        .into(),
                ),
                iter,
                &v,
                &x,
                &y,
                prim_res,
                dual_res,
                gap,
            );
        }
        let ynorm = vinf(&y);
        if ynorm > FARKAS_SCALE {
            let yh = &y / ynorm;
            let by = b.dot(&yh);
            let fty = f_dense.tr_mul(&yh);
            let lmax = apply_a_star(&a_dense, &yh, sizes)
                .iter()
                .map(eig_max)
                .fold(f64::NEG_INFINITY, f64::max);
            if by > FARKAS_TOL && lmax <= FARKAS_TOL && vinf(&fty) <= FARKAS_TOL {
                return report(
                    SolveStatus::Infeasible,
                    Some(
                        "diverging multipliers yield a Farkas certificate: \
                         no PSD solution satisfies the equalities"
                            .into(),
                    ),
                    iter,
                    &v,
                    &x,
                    &y,
                    prim_res,
                    dual_res,
                    gap,
                );
            }
        }

        let Some(chol_x) = factor(&x) else {
            stop = Some((
                SolveStatus::NumericalFailure,
                iter,
                "primal iterate lost positive definiteness".into(),
            ));
            break;
        };
        let Some(chol_s) = factor(&s) else {
            stop = Some((
                SolveStatus::NumericalFailure,
                iter,
                "dual slack lost positive definiteness".into(),
            ));
            break;
        };
        let sinv: Vec<DMatrix<f64>> = chol_s.iter().map(Cholesky::inverse).collect();

        // Schur complement M and the regularized saddle system.
        let w: Vec<Vec<DMatrix<f64>>> = (0..m)
            .map(|j| {
                (0..nb)
                    .map(|bi| hsym(&x[bi] * &a_dense[j][bi] * &sinv[bi]))
                    .collect()
            })
            .collect();
        let mut kmat = DMatrix::<f64>::zeros(m + p, m + p);
        for i in 0..m {
            for j in i..m {
                let mut acc = 0.0;
                for bi in 0..nb {
                    acc += a_dense[i][bi].dot(&w[j][bi]);
                }
                // A true Schur complement is symmetric; enforce it.
                kmat[(i, j)] = acc;
                kmat[(j, i)] = acc;
            }
        }
        for i in 0..m {
            for k in 0..p {
                kmat[(i, m + k)] = f_dense[(i, k)];
                kmat[(m + k, i)] = f_dense[(i, k)];
            }
        }
        // Factor a quasidefinite shift of the saddle matrix; the solves
        // below refine against the unshifted system, so the shift keeps the
        // factorization alive without biasing the directions.
        let mut kreg = kmat.clone();
        for i in 0..m {
            kreg[(i, i)] += REG;
        }
        for k in 0..p {
            kreg[(m + k, m + k)] -= REG;
        }
        let lu = kreg.lu();

        let xrds: Vec<DMatrix<f64>> = (0..nb)
            .map(|bi| hsym(&x[bi] * &rd[bi] * &sinv[bi]))
            .collect();
        let solve_dir = |g: &[DMatrix<f64>]| {
            let r1 = &rp - &apply_a(&a_dense, g);
            let mut rhs = DVector::<f64>::zeros(m + p);
            rhs.rows_mut(0, m).copy_from(&r1);
            rhs.rows_mut(m, p).copy_from(&rf);
            let mut sol = lu.solve(&rhs)?;
            // Safeguarded iterative refinement. The saddle matrix grows a
            // condition number like 1/mu, where a raw LU solve loses the
            // digits the endgame needs; refining against the unshifted
            // system recovers them as long as each pass helps.
            let mut res = &rhs - &kmat * &sol;
            let mut best_res = vinf(&res);
            let floor = 1e-14 * (1.0 + vinf(&rhs));
            for _ in 0..3 {
                if best_res <= floor {
                    break;
                }
                let Some(corr) = lu.solve(&res) else { break };
                let cand = &sol + &corr;
                let cres = &rhs - &kmat * &cand;
                let cnorm = vinf(&cres);
                if cnorm >= best_res {
                    break;
                }
                sol = cand;
                res = cres;
                best_res = cnorm;
            }
            let dy = sol.rows(0, m).into_owned();
            let dv = sol.rows(m, p).into_owned();
            let astar_dy = apply_a_star(&a_dense, &dy, sizes);
            let ds: Vec<DMatrix<f64>> = rd.iter().zip(&astar_dy).map(|(r, a)| r - a).collect();
            let dx: Vec<DMatrix<f64>> = (0..nb)
                .map(|bi| &g[bi] + hsym(&x[bi] * &astar_dy[bi] * &sinv[bi]))
                .collect();
            Some((dy, dv, dx, ds))
        };

        // Predictor: sigma = 0, no correction.
        let g_aff: Vec<DMatrix<f64>> = (0..nb).map(|bi| -&x[bi] - &xrds[bi]).collect();
        let Some((_, _, dx_aff, ds_aff)) = solve_dir(&g_aff) else {
            stop = Some((
                SolveStatus::NumericalFailure,
                iter,
                "saddle system is singular".into(),
            ));
            break;
        };
        let ap_aff = max_step(&chol_x, &dx_aff).min(1.0);
        let ad_aff = max_step(&chol_s, &ds_aff).min(1.0);
        let mu_aff = (0..nb)
            .map(|bi| (&x[bi] + &dx_aff[bi] * ap_aff).dot(&(&s[bi] + &ds_aff[bi] * ad_aff)))
            .sum::<f64>()
            .max(0.0)
            / total_dim.max(1) as f64;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };

        // Corrector with centering.
        let g: Vec<DMatrix<f64>> = (0..nb)
            .map(|bi| {
                let corr = hsym(&dx_aff[bi] * &ds_aff[bi] * &sinv[bi]);
                &sinv[bi] * (sigma * mu) - &x[bi] - corr - &xrds[bi]
            })
            .collect();
        let Some((dy, dv, dx, ds)) = solve_dir(&g) else {
            stop = Some((
                SolveStatus::NumericalFailure,
                iter,
                "saddle system is singular".into(),
            ));
            break;
        };
        let mut ap = (TAU * max_step(&chol_x, &dx)).min(1.0);
        let mut ad = (TAU * max_step(&chol_s, &ds)).min(1.0);
        // Near a degenerate face the corrector can fling the path away from
        // an almost-converged state (mu and the primal residual both jump).
        // mu is bilinear and rp linear in the step lengths, so candidate
        // steps are cheap to score; halve until the step stops regressing.
        let c00: f64 = x.iter().zip(&s).map(|(a, b)| a.dot(b)).sum();
        let c01: f64 = x.iter().zip(&ds).map(|(a, b)| a.dot(b)).sum();
        let c10: f64 = dx.iter().zip(&s).map(|(a, b)| a.dot(b)).sum();
        let c11: f64 = dx.iter().zip(&ds).map(|(a, b)| a.dot(b)).sum();
        let aw = apply_a(&a_dense, &dx) + &f_dense * &dv;
        let denom = total_dim.max(1) as f64;
        for _ in 0..8 {
            let mu_cand = (c00 + ad * c01 + ap * c10 + ap * ad * c11) / denom;
            let rp_cand = vinf(&(&rp - &aw * ap)) / bnorm;
            if mu_cand <= 4.0 * mu
                && (rp_cand <= 10.0 * prim_res || rp_cand <= 10.0 * settings.feas_tol)
            {
                break;
            }
            ap *= 0.5;
            ad *= 0.5;
        }
        for bi in 0..nb {
            x[bi] += &dx[bi] * ap;
            s[bi] += &ds[bi] * ad;
        }
        y += &dy * ad;
        v += &dv * ap;
    }
    let (fail_status, fail_iter, fail_msg) = stop.unwrap_or_else(|| {
        (
            SolveStatus::MaxIterations,
            settings.max_iterations,
            format!(
                "no convergence within {} iterations",
                settings.max_iterations
            ),
        )
    });
    // The path often visits an iterate inside the reduced-accuracy window
    // and deteriorates afterwards; prefer that iterate over the state the
    // iteration died in.
    if best_score <= REDUCED {
        let bi = best.expect("finite score implies a recorded iterate");
        return report(
            SolveStatus::Optimal,
            Some(format!("stopped at reduced accuracy: {fail_msg}")),
            bi.iteration,
            &bi.v,
            &bi.x,
            &bi.y,
            bi.prim,
            bi.dual,
            bi.gap,
        );
    }
    report(
        fail_status,
        Some(fail_msg),
        fail_iter,
        &v,
        &x,
        &y,
        last.0,
        last.1,
        last.2,
    )
}

fn vinf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn minf(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

fn hsym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

fn factor(blocks: &[DMatrix<f64>]) -> Option<Vec<Cholesky<f64, Dyn>>> {
    blocks.iter().map(|b| Cholesky::new(b.clone())).collect()
}

fn apply_a(a_dense: &[Vec<DMatrix<f64>>], x: &[DMatrix<f64>]) -> DVector<f64> {
    DVector::from_iterator(
        a_dense.len(),
        a_dense
            .iter()
            .map(|row| row.iter().zip(x).map(|(ab, xb)| ab.dot(xb)).sum()),
    )
}

fn apply_a_star(
    a_dense: &[Vec<DMatrix<f64>>],
    y: &DVector<f64>,
    sizes: &[usize],
) -> Vec<DMatrix<f64>> {
    let mut out: Vec<DMatrix<f64>> = sizes.iter().map(|&sz| DMatrix::zeros(sz, sz)).collect();
    for (row, &yr) in a_dense.iter().zip(y.iter()) {
        if yr == 0.0 {
            continue;
        }
        for (ob, ab) in out.iter_mut().zip(row) {
            *ob += ab * yr;
        }
    }
    out
}

fn eig_max(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .fold(f64::NEG_INFINITY, |a, &l| a.max(l))
}

/// Largest step `alpha` keeping `P + alpha D` PSD, per blocks, via the
/// eigenvalues of `L^-1 D L^-T` for the Cholesky factor `L` of `P`.
fn max_step(chol: &[Cholesky<f64, Dyn>], d: &[DMatrix<f64>]) -> f64 {
    let mut step = BIG_STEP;
    for (c, db) in chol.iter().zip(d) {
        if db.nrows() == 0 {
            continue;
        }
        let l = c.l();
        let mut t = db.clone();
        if !l.solve_lower_triangular_mut(&mut t) {
            return 0.0;
        }
        let mut tt = t.transpose();
        if !l.solve_lower_triangular_mut(&mut tt) {
            return 0.0;
        }
        let z = hsym(tt);
        let lmin = z
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &v| a.min(v));
        if lmin < -1e-14 {
            step = step.min(-1.0 / lmin);
        }
    }
    step
}
