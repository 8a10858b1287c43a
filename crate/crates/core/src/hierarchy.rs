//! Problem files, the sweep over relaxation orders, and reporting.
//!
//! A problem file is TOML:
//!
//! ```toml
//! vars = ["x", "y", "z"]
//! objective = "x"
//! constraints = ["x - y^2 - z^2"]
//!
//! [options]
//! mode = "critical"
//! d_min = 1
//! d_max = 3
//! minimizers = [[0.0, 0.0, 0.0]]
//! ```
//!
//! `run_hierarchy` sweeps the order `d`, solving one SDP per level; bounds
//! are non-decreasing in `d`, and the sweep stops early once successive
//! bounds agree to `conv_tol`. Stabilization is a heuristic stopping rule,
//! not a proof that the common value is the infimum, and is flagged as such
//! in reports.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{
    extract_certificate, verify_certificate, BhcTolerances, CertError, Certificate,
};
use crate::critical::{generators, GeneratorError, GeneratorMode, Problem, ProblemError};
use crate::polyring::parse_poly;
use crate::sdpsolve::{solve, SolveStatus, SolverSettings};
use crate::sosrelax::assemble_relaxation;

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("problem file: {0}")]
    Toml(String),
    #[error("{context}: {source}")]
    Parse {
        context: String,
        source: crate::polyring::ParseError,
    },
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error("options: {0}")]
    BadOption(String),
    #[error("d_min = {d_min} is below ceil(deg f / 2) = {required}")]
    DegreeTooLow { d_min: u32, required: u32 },
    #[error("empty degree range: d_max = {d_max} < d_min = {d_min}")]
    EmptyRange { d_min: u32, d_max: u32 },
}

/// Everything `run_hierarchy` needs beyond the problem itself.
#[derive(Clone, Debug)]
pub struct HierarchyOptions {
    pub mode: GeneratorMode,
    /// Lowest order; `None` means `ceil(deg f / 2)`.
    pub d_min: Option<u32>,
    /// Highest order; `None` means `d_min + 4`.
    pub d_max: Option<u32>,
    /// Successive bounds within this distance stop the sweep.
    pub conv_tol: f64,
    /// Eigenvalue cutoff for certificate extraction.
    pub eig_cut: f64,
    /// Residual tolerance for certificate verification.
    pub verify_tol: f64,
    pub solver: SolverSettings,
    /// Candidate minimizers supplied by the problem file, for second-order
    /// checks downstream.
    pub minimizers: Vec<Vec<f64>>,
    pub bhc: BhcTolerances,
}

impl Default for HierarchyOptions {
    fn default() -> Self {
        HierarchyOptions {
            mode: GeneratorMode::Critical,
            d_min: None,
            d_max: None,
            conv_tol: 1e-6,
            eig_cut: crate::certify::DEFAULT_EIG_CUT,
            verify_tol: crate::certify::DEFAULT_VERIFY_TOL,
            solver: SolverSettings::default(),
            minimizers: Vec::new(),
            bhc: BhcTolerances::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileOptions {
    mode: Option<String>,
    d_min: Option<u32>,
    d_max: Option<u32>,
    conv_tol: Option<f64>,
    eig_cut: Option<f64>,
    verify_tol: Option<f64>,
    feas_tol: Option<f64>,
    gap_tol: Option<f64>,
    max_iterations: Option<usize>,
    minimizers: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSchema {
    vars: Vec<String>,
    objective: String,
    #[serde(default)]
    constraints: Vec<String>,
    #[serde(default)]
    options: FileOptions,
}

/// Parse problem-file text into a problem and the options it requests.
pub fn parse_problem_file(src: &str) -> Result<(Problem, HierarchyOptions), HierarchyError> {
    let file: FileSchema = toml::from_str(src).map_err(|e| HierarchyError::Toml(e.to_string()))?;
    let objective =
        parse_poly(&file.objective, &file.vars).map_err(|source| HierarchyError::Parse {
            context: "objective".to_string(),
            source,
        })?;
    let mut constraints = Vec::with_capacity(file.constraints.len());
    for (i, g) in file.constraints.iter().enumerate() {
        constraints.push(
            parse_poly(g, &file.vars).map_err(|source| HierarchyError::Parse {
                context: format!("constraint {}", i + 1),
                source,
            })?,
        );
    }
    let problem = Problem::new(file.vars, objective, constraints)?;

    let mut options = HierarchyOptions::default();
    let o = file.options;
    if let Some(mode) = o.mode {
        options.mode = mode.parse().map_err(HierarchyError::BadOption)?;
    }
    options.d_min = o.d_min;
    options.d_max = o.d_max;
    if let Some(v) = o.conv_tol {
        options.conv_tol = v;
    }
    if let Some(v) = o.eig_cut {
        options.eig_cut = v;
    }
    if let Some(v) = o.verify_tol {
        options.verify_tol = v;
    }
    if let Some(v) = o.feas_tol {
        options.solver.feas_tol = v;
    }
    if let Some(v) = o.gap_tol {
        options.solver.gap_tol = v;
    }
    if let Some(v) = o.max_iterations {
        options.solver.max_iterations = v;
    }
    if let Some(pts) = o.minimizers {
        let n = problem.nvars();
        for pt in &pts {
            if pt.len() != n {
                return Err(HierarchyError::BadOption(format!(
                    "minimizer {pt:?} has {} coordinates, the problem has {n} variables",
                    pt.len()
                )));
            }
        }
        options.minimizers = pts;
    }
    Ok((problem, options))
}

pub fn load_problem(path: &Path) -> Result<(Problem, HierarchyOptions), HierarchyError> {
    let src = std::fs::read_to_string(path).map_err(|source| HierarchyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_problem_file(&src)
}

/// One relaxation order of the sweep.
#[derive(Clone, Debug)]
pub struct HierarchyRow {
    pub d: u32,
    pub status: SolveStatus,
    /// `f*_d` when the solve is optimal.
    pub bound: Option<f64>,
    pub solve_seconds: f64,
    pub block_dims: Vec<usize>,
    pub num_free: usize,
    pub iterations: usize,
    /// Whether the extracted certificate passed exact verification; `None`
    /// when there was nothing to extract.
    pub verified: Option<bool>,
    pub residual_norm: Option<f64>,
    pub certificate: Option<Certificate>,
    pub diagnostics: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct HierarchyResult {
    pub mode: GeneratorMode,
    pub d_min: u32,
    pub d_max: u32,
    pub conv_tol: f64,
    pub rows: Vec<HierarchyRow>,
    /// Two successive optimal bounds agreed to `conv_tol`.
    pub stabilized: bool,
    /// First order of the stable pair.
    pub stabilized_at: Option<u32>,
}

/// The order every sweep must start at or above.
pub fn minimum_order(problem: &Problem) -> u32 {
    problem.objective().degree().div_ceil(2).max(1)
}

/// Solve the relaxation at each order in the configured range.
///
/// Levels run in ascending order; each level assembles, solves, extracts,
/// and verifies, capturing failures in its own row rather than aborting the
/// sweep. Unbounded levels carry the solver's diagnostic (the infimum may
/// not be attained, in which case every order stays unbounded).
pub fn run_hierarchy(
    problem: &Problem,
    options: &HierarchyOptions,
) -> Result<HierarchyResult, HierarchyError> {
    let required = minimum_order(problem);
    let d_min = options.d_min.unwrap_or(required);
    if d_min < required {
        return Err(HierarchyError::DegreeTooLow { d_min, required });
    }
    let d_max = options.d_max.unwrap_or(d_min + 4);
    if d_max < d_min {
        return Err(HierarchyError::EmptyRange { d_min, d_max });
    }
    let gens = generators(problem, options.mode)?;

    let mut rows: Vec<HierarchyRow> = Vec::new();
    let mut stabilized = false;
    let mut stabilized_at = None;
    for d in d_min..=d_max {
        let mut row = HierarchyRow {
            d,
            status: SolveStatus::NumericalFailure,
            bound: None,
            solve_seconds: 0.0,
            block_dims: Vec::new(),
            num_free: 0,
            iterations: 0,
            verified: None,
            residual_norm: None,
            certificate: None,
            diagnostics: Vec::new(),
        };
        let relax = match assemble_relaxation(problem, &gens, d) {
            Ok(r) => r,
            Err(e) => {
                row.diagnostics.push(format!("assembly failed: {e}"));
                rows.push(row);
                continue;
            }
        };
        if !relax.omitted_generators.is_empty() {
            row.diagnostics.push(format!(
                "generators omitted at this order (zero or above the degree budget): {}",
                relax.omitted_generators.join(", ")
            ));
        }
        row.block_dims = relax.sdp.block_sizes.clone();
        row.num_free = relax.sdp.num_free;

        let clock = Instant::now();
        let sol = solve(&relax.sdp, &options.solver);
        row.solve_seconds = clock.elapsed().as_secs_f64();
        row.status = sol.status;
        row.iterations = sol.iterations;
        if let Some(diag) = &sol.diagnostic {
            row.diagnostics.push(diag.clone());
        }
        if sol.status == SolveStatus::Optimal {
            row.bound = Some(sol.objective);
            match extract_certificate(&relax, &sol, options.eig_cut) {
                Ok(cert) => match verify_certificate(problem, &cert, options.verify_tol) {
                    Ok(report) => {
                        row.verified = Some(report.pass);
                        row.residual_norm = Some(report.residual_norm);
                        row.certificate = Some(cert);
                    }
                    Err(e) => row.diagnostics.push(format!("verification failed: {e}")),
                },
                Err(e) => row.diagnostics.push(format!("extraction failed: {e}")),
            }
        }

        let prev = rows.last().and_then(|r| r.bound);
        let curr = row.bound;
        rows.push(row);
        if let (Some(a), Some(b)) = (prev, curr) {
            if (a - b).abs() <= options.conv_tol {
                stabilized = true;
                stabilized_at = Some(d - 1);
                break;
            }
        }
    }

    Ok(HierarchyResult {
        mode: options.mode,
        d_min,
        d_max,
        conv_tol: options.conv_tol,
        rows,
        stabilized,
        stabilized_at,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Structured,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "structured" => Ok(ReportFormat::Structured),
            other => Err(format!(
                "unknown format '{other}', expected 'table' or 'structured'"
            )),
        }
    }
}

#[derive(Serialize)]
struct RowJson<'a> {
    d: u32,
    status: String,
    bound: Option<f64>,
    solve_seconds: f64,
    block_dims: &'a [usize],
    num_free: usize,
    iterations: usize,
    verified: Option<bool>,
    residual_norm: Option<f64>,
    certificate: Option<String>,
    diagnostics: &'a [String],
}

#[derive(Serialize)]
struct ResultJson<'a> {
    mode: String,
    d_min: u32,
    d_max: u32,
    conv_tol: f64,
    stabilized: bool,
    stabilized_at: Option<u32>,
    rows: Vec<RowJson<'a>>,
}

/// Render the sweep either as a human table or as JSON carrying every row
/// field plus the serialized certificates.
pub fn report(result: &HierarchyResult, format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => render_table(result),
        ReportFormat::Structured => {
            let mirror = ResultJson {
                mode: result.mode.to_string(),
                d_min: result.d_min,
                d_max: result.d_max,
                conv_tol: result.conv_tol,
                stabilized: result.stabilized,
                stabilized_at: result.stabilized_at,
                rows: result
                    .rows
                    .iter()
                    .map(|r| RowJson {
                        d: r.d,
                        status: r.status.to_string(),
                        bound: r.bound,
                        solve_seconds: r.solve_seconds,
                        block_dims: &r.block_dims,
                        num_free: r.num_free,
                        iterations: r.iterations,
                        verified: r.verified,
                        residual_norm: r.residual_norm,
                        certificate: r.certificate.as_ref().map(|c| c.to_text()),
                        diagnostics: &r.diagnostics,
                    })
                    .collect(),
            };
            let mut text = serde_json::to_string_pretty(&mirror).expect("report serialization");
            text.push('\n');
            text
        }
    }
}

fn render_table(result: &HierarchyResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "mode {}, orders {}..={}\n",
        result.mode, result.d_min, result.d_max
    ));
    out.push_str(&format!(
        "{:>3}  {:<17} {:>18} {:>9}  {:<16} {}\n",
        "d", "status", "bound", "time_s", "blocks", "verified"
    ));
    for r in &result.rows {
        let bound = r
            .bound
            .map(|b| format!("{b:>18.9e}"))
            .unwrap_or_else(|| format!("{:>18}", "-"));
        let verified = match r.verified {
            Some(true) => "yes",
            Some(false) => "NO",
            None => "-",
        };
        let blocks = format!("{:?}", r.block_dims);
        out.push_str(&format!(
            "{:>3}  {:<17} {} {:>9.3}  {:<16} {}\n",
            r.d,
            r.status.to_string(),
            bound,
            r.solve_seconds,
            blocks,
            verified
        ));
    }
    for r in &result.rows {
        for note in &r.diagnostics {
            out.push_str(&format!("d={}: {}\n", r.d, note));
        }
    }
    if result.stabilized {
        out.push_str(&format!(
            "bounds stabilized at d={} (successive change <= {:e}; heuristic, not a proof of exactness)\n",
            result.stabilized_at.unwrap_or(result.d_min),
            result.conv_tol
        ));
    } else if result.rows.iter().any(|r| r.bound.is_some()) {
        out.push_str("bounds did not stabilize within the degree range\n");
    }
    out
}

/// Run the second-order test at each supplied point and append the verdicts
/// to a report body.
pub fn bhc_summary(
    problem: &Problem,
    points: &[Vec<f64>],
    tols: &BhcTolerances,
) -> Result<String, CertError> {
    let mut out = String::new();
    for pt in points {
        let rep = crate::certify::check_bhc(problem, pt, tols)?;
        out.push_str(&format!(
            "boundary Hessian condition at {:?}: {}\n",
            rep.point, rep.verdict
        ));
        for note in &rep.notes {
            out.push_str(&format!("  {note}\n"));
        }
    }
    Ok(out)
}
