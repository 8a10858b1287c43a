//! Command line driver: load a problem file, sweep the relaxation orders,
//! and print the bound table or a structured report.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when no order produced a
//! bound, 3 when the sweep only hit the unbounded diagnostic (the infimum is
//! likely not attained).

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::Parser;
use critsos::certify::check_bhc;
use critsos::critical::{generators, GeneratorMode};
use critsos::hierarchy::{
    load_problem, minimum_order, report, run_hierarchy, HierarchyOptions, HierarchyResult,
    ReportFormat,
};
use critsos::sdpsolve::export_sdpa;
use critsos::sosrelax::assemble_relaxation;
use critsos::SolveStatus;

fn parse_mode(s: &str) -> Result<GeneratorMode, String> {
    GeneratorMode::from_str(s)
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    ReportFormat::from_str(s)
}

fn parse_point(s: &str) -> Result<Point, String> {
    let coords = s
        .split(',')
        .map(|c| f64::from_str(c.trim()).map_err(|_| format!("bad coordinate '{}'", c.trim())))
        .collect::<Result<Vec<f64>, String>>()?;
    if coords.is_empty() {
        return Err("a point needs at least one coordinate".to_string());
    }
    Ok(Point(coords))
}

#[derive(Clone, Debug)]
struct Point(Vec<f64>);

/// Lower-bound a polynomial over a semi-algebraic set with certified
/// sum-of-squares relaxations over its critical ideal.
#[derive(Parser, Debug)]
#[command(name = "critsos", version)]
struct Args {
    /// Problem file (TOML; see the repository README for the schema)
    input: PathBuf,

    /// Ideal generators: "critical" (default) or "gradient" (unconstrained
    /// problems only)
    #[arg(long, env = "CRITSOS_MODE", value_parser = parse_mode)]
    mode: Option<GeneratorMode>,

    /// Lowest relaxation order (default: ceil(deg f / 2))
    #[arg(long, env = "CRITSOS_DMIN")]
    dmin: Option<u32>,

    /// Highest relaxation order (default: dmin + 4)
    #[arg(long, env = "CRITSOS_DMAX")]
    dmax: Option<u32>,

    /// Solver feasibility tolerance
    #[arg(long, env = "CRITSOS_TOL_FEAS")]
    tol_feas: Option<f64>,

    /// Solver duality-gap tolerance
    #[arg(long, env = "CRITSOS_TOL_GAP")]
    tol_gap: Option<f64>,

    /// Allowed eigenvalue dip when the solver validates a block
    #[arg(long, env = "CRITSOS_TOL_EIG")]
    tol_eig: Option<f64>,

    /// Eigenvalue cutoff when reading squares off a Gram block
    #[arg(long, env = "CRITSOS_TOL_EIG_CUT")]
    tol_eig_cut: Option<f64>,

    /// Residual tolerance for exact certificate verification
    #[arg(long, env = "CRITSOS_TOL_VERIFY")]
    tol_verify: Option<f64>,

    /// Successive-bound distance that stops the sweep
    #[arg(long, env = "CRITSOS_TOL_CONV")]
    tol_conv: Option<f64>,

    /// Objective-value tolerance of the boundary Hessian test
    #[arg(long, env = "CRITSOS_TOL_BHC_ZERO")]
    tol_bhc_zero: Option<f64>,

    /// Constraint activity tolerance of the boundary Hessian test
    #[arg(long, env = "CRITSOS_TOL_BHC_ACT")]
    tol_bhc_act: Option<f64>,

    /// Gradient-rank tolerance of the boundary Hessian test
    #[arg(long, env = "CRITSOS_TOL_BHC_RANK")]
    tol_bhc_rank: Option<f64>,

    /// Stationarity-residual tolerance of the boundary Hessian test
    #[arg(long, env = "CRITSOS_TOL_BHC_RES")]
    tol_bhc_res: Option<f64>,

    /// Multiplier-positivity tolerance of the boundary Hessian test
    #[arg(long, env = "CRITSOS_TOL_BHC_POS")]
    tol_bhc_pos: Option<f64>,

    /// Reduced-Hessian definiteness tolerance of the boundary Hessian test
    #[arg(long, env = "CRITSOS_TOL_BHC_PD")]
    tol_bhc_pd: Option<f64>,

    /// Solver iteration cap per level
    #[arg(long, env = "CRITSOS_MAX_ITERATIONS")]
    max_iterations: Option<usize>,

    /// Write one SDPA sparse file per level into this directory
    #[arg(long, env = "CRITSOS_EXPORT_SDPA", value_name = "DIR")]
    export_sdpa: Option<PathBuf>,

    /// Write the best verified certificate to this path
    #[arg(long, env = "CRITSOS_CERTIFICATE", value_name = "PATH")]
    certificate: Option<PathBuf>,

    /// Run the boundary Hessian test at this point, e.g. "0,0,0"
    /// (repeatable; checked in addition to the file's minimizers)
    #[arg(long = "check-bhc", env = "CRITSOS_CHECK_BHC", value_parser = parse_point)]
    check_bhc: Vec<Point>,

    /// Output format: "table" or "structured" (JSON)
    #[arg(long, env = "CRITSOS_FORMAT", value_parser = parse_format, default_value = "table")]
    format: ReportFormat,

    /// Increase solver logging (-v per-solve summaries, -vv per iteration)
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

fn apply_flags(options: &mut HierarchyOptions, args: &Args) {
    if let Some(m) = args.mode {
        options.mode = m;
    }
    if args.dmin.is_some() {
        options.d_min = args.dmin;
    }
    if args.dmax.is_some() {
        options.d_max = args.dmax;
    }
    if let Some(v) = args.tol_feas {
        options.solver.feas_tol = v;
    }
    if let Some(v) = args.tol_gap {
        options.solver.gap_tol = v;
    }
    if let Some(v) = args.tol_eig {
        options.solver.eig_tol = v;
    }
    if let Some(v) = args.tol_eig_cut {
        options.eig_cut = v;
    }
    if let Some(v) = args.tol_verify {
        options.verify_tol = v;
    }
    if let Some(v) = args.tol_conv {
        options.conv_tol = v;
    }
    if let Some(v) = args.tol_bhc_zero {
        options.bhc.zero_tol = v;
    }
    if let Some(v) = args.tol_bhc_act {
        options.bhc.act_tol = v;
    }
    if let Some(v) = args.tol_bhc_rank {
        options.bhc.rank_tol = v;
    }
    if let Some(v) = args.tol_bhc_res {
        options.bhc.res_tol = v;
    }
    if let Some(v) = args.tol_bhc_pos {
        options.bhc.pos_tol = v;
    }
    if let Some(v) = args.tol_bhc_pd {
        options.bhc.pd_tol = v;
    }
    if let Some(v) = args.max_iterations {
        options.solver.max_iterations = v;
    }
    options.solver.verbosity = args.verbose;
}

fn export_levels(
    problem: &critsos::Problem,
    options: &HierarchyOptions,
    dir: &PathBuf,
    stem: &str,
) -> Result<(), String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let gens = generators(problem, options.mode).map_err(|e| e.to_string())?;
    let d_min = options.d_min.unwrap_or_else(|| minimum_order(problem));
    let d_max = options.d_max.unwrap_or(d_min + 4);
    for d in d_min..=d_max {
        let relax = assemble_relaxation(problem, &gens, d).map_err(|e| e.to_string())?;
        let path = dir.join(format!("{stem}_d{d}.dat-s"));
        std::fs::write(&path, export_sdpa(&relax.sdp))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    }
    Ok(())
}

fn best_certificate(result: &HierarchyResult) -> Option<&critsos::Certificate> {
    result
        .rows
        .iter()
        .rev()
        .find(|r| r.verified == Some(true))
        .or_else(|| result.rows.iter().rev().find(|r| r.certificate.is_some()))
        .and_then(|r| r.certificate.as_ref())
}

fn exit_code(result: &HierarchyResult) -> ExitCode {
    if result.rows.iter().any(|r| r.status == SolveStatus::Optimal) {
        ExitCode::SUCCESS
    } else if result
        .rows
        .iter()
        .any(|r| r.status == SolveStatus::Unbounded)
    {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    // Die quietly when stdout closes early (`critsos ... | head`) instead
    // of panicking mid-print; Rust ignores SIGPIPE by default.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let args = Args::parse();
    let mut logger = env_logger::Builder::from_default_env();
    if args.verbose >= 2 {
        logger.filter_level(log::LevelFilter::Debug);
    } else if args.verbose == 1 {
        logger.filter_level(log::LevelFilter::Info);
    }
    logger.init();

    let (problem, mut options) = match load_problem(&args.input) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    apply_flags(&mut options, &args);

    let mut bhc_points = options.minimizers.clone();
    bhc_points.extend(args.check_bhc.iter().map(|p| p.0.clone()));
    for pt in &bhc_points {
        if pt.len() != problem.nvars() {
            eprintln!(
                "error: point {:?} has {} coordinates, the problem has {} variables",
                pt,
                pt.len(),
                problem.nvars()
            );
            return ExitCode::from(1);
        }
    }

    if let Some(dir) = &args.export_sdpa {
        let stem = args
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "problem".to_string());
        if let Err(e) = export_levels(&problem, &options, dir, &stem) {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }

    let result = match run_hierarchy(&problem, &options) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    let bhc_reports: Vec<_> = match bhc_points
        .iter()
        .map(|pt| check_bhc(&problem, pt, &options.bhc))
        .collect::<Result<_, _>>()
    {
        Ok(reports) => reports,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };

    // Artifacts land before anything is printed, so a consumer closing
    // stdout early (SIGPIPE) cannot cost the caller the certificate.
    if let Some(path) = &args.certificate {
        match best_certificate(&result) {
            Some(cert) => {
                if let Err(e) = std::fs::write(path, cert.to_text()) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            None => eprintln!("warning: no certificate to write"),
        }
    }

    match args.format {
        ReportFormat::Table => {
            print!("{}", report(&result, ReportFormat::Table));
            for rep in &bhc_reports {
                println!(
                    "boundary Hessian condition at {:?}: {}",
                    rep.point, rep.verdict
                );
                for note in &rep.notes {
                    println!("  {note}");
                }
            }
        }
        ReportFormat::Structured => {
            let text = report(&result, ReportFormat::Structured);
            let mut value: serde_json::Value =
                serde_json::from_str(&text).expect("structured report is JSON");
            value["bhc"] = serde_json::Value::from(
                bhc_reports
                    .iter()
                    .map(|rep| {
                        serde_json::json!({
                            "point": rep.point,
                            "verdict": rep.verdict.to_string(),
                            "objective_value": rep.objective_value,
                            "active": rep.active,
                            "regular": rep.regular,
                            "multipliers": rep.multipliers,
                            "stationarity_residual": rep.stationarity_residual,
                            "reduced_hessian_min_eig": rep.reduced_hessian_min_eig,
                            "notes": rep.notes,
                        })
                    })
                    .collect::<Vec<_>>(),
            );
            println!("{}", serde_json::to_string_pretty(&value).expect("report"));
        }
    }

    exit_code(&result)
}
