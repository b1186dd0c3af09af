//! Command line front end: reads a JSON problem file, runs validation,
//! spectra, expansions, convergence reports, and the finite difference
//! cross-check, and emits JSON (stdout, plus files under --out) and CSV.
//!
//! Exit codes: 0 success, 1 failed validation or a failed numerical check,
//! 2 malformed file or invocation.  Output is deterministic: repeated runs
//! on the same file and flags produce identical bytes.

mod input;

use clap::{Parser, Subcommand};
use input::{Failure, Parsed};
use serde::Serialize;
use slnev_core::nevpair::{
    classify_infinity, eta_relation, validate_pair, Case, ClassifyConfig, EntirePair,
    EtaRelation, SamplingPlan,
};
use slnev_core::oracle;
use slnev_core::problem::Problem;
use slnev_core::{
    expansion_terms, find_eigenvalues, l2_report, uniform_report, CharacteristicPair,
    ExpansionTerm, ScanOptions, TargetFunction,
};
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "slnev",
    version,
    about = "Spectral solver for weighted Sturm-Liouville problems with \
             lambda-dependent right boundary conditions"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("bad lower edge: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("bad upper edge: {e}"))?;
    if !(lo < hi) {
        return Err(format!("window must satisfy lo < hi, got {lo}:{hi}"));
    }
    Ok((lo, hi))
}

#[derive(Subcommand)]
enum Cmd {
    /// Check coefficients, the boundary pair, and its classification
    Validate {
        file: PathBuf,
    },
    /// Eigenvalues t_k and residues xi_k inside the window
    Spectrum {
        file: PathBuf,
        /// Spectral window lo:hi (overrides the file)
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        /// Directory for spectrum.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partial sums S_K of the eigenfunction expansion of the target
    Expand {
        file: PathBuf,
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        /// Comma separated list of partial sum lengths
        #[arg(long = "K", value_delimiter = ',')]
        k: Vec<usize>,
        /// Number of x samples in the CSV
        #[arg(long, default_value_t = 201)]
        grid: usize,
        /// Directory for expand.csv and expand.json
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Eligibility and sup-norm convergence report for the target
    Converge {
        file: PathBuf,
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        #[arg(long = "K", value_delimiter = ',')]
        k: Vec<usize>,
        /// Number of x samples behind the sup norms
        #[arg(long, default_value_t = 1025)]
        grid: usize,
        /// Fail instead of reporting ineligibility when the image f is absent
        #[arg(long)]
        strict: bool,
        /// Directory for converge.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check engine eigenvalues against the finite difference pencil
    OracleCompare {
        file: PathBuf,
        #[arg(long, value_parser = parse_window, allow_hyphen_values = true)]
        window: Option<(f64, f64)>,
        /// Number of grid intervals of the pencil
        #[arg(long, default_value_t = 4096)]
        grid: usize,
        /// Directory for oracle_compare.json
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    };
    std::process::exit(code);
}

fn run(cmd: Cmd) -> Result<i32, Failure> {
    match cmd {
        Cmd::Validate { file } => cmd_validate(&file),
        Cmd::Spectrum { file, window, out } => cmd_spectrum(&file, window, out.as_deref()),
        Cmd::Expand {
            file,
            window,
            k,
            grid,
            out,
        } => cmd_expand(&file, window, &k, grid, &out),
        Cmd::Converge {
            file,
            window,
            k,
            grid,
            strict,
            out,
        } => cmd_converge(&file, window, &k, grid, strict, out.as_deref()),
        Cmd::OracleCompare {
            file,
            window,
            grid,
            out,
        } => cmd_oracle_compare(&file, window, grid, out.as_deref()),
    }
}

/// Serializes pretty JSON with a trailing newline, prints it, and mirrors it
/// into `dir/name` when a directory is given.
fn emit_json<T: Serialize>(value: &T, dir: Option<&Path>, name: &str) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Run(format!("serialization failed: {e}")))?;
    text.push('\n');
    print!("{text}");
    write_out(dir, name, &text)
}

fn write_out(dir: Option<&Path>, name: &str, text: &str) -> Result<(), Failure> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Run(format!("cannot create {}: {e}", dir.display())))?;
        let path = dir.join(name);
        std::fs::write(&path, text)
            .map_err(|e| Failure::Run(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

/// 17 significant digits, enough to round-trip any f64.
fn sig17(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// validate

#[derive(Serialize)]
struct PairVerdict {
    valid: bool,
    degenerate: bool,
    nevanlinna_violation: f64,
    symmetry_violation: f64,
    realness_violation: f64,
    min_magnitude_ratio: f64,
    violations: Vec<String>,
}

#[derive(Serialize)]
struct ValidateOut {
    coefficients_ok: bool,
    coefficient_error: Option<String>,
    delta_nontrivial: Option<bool>,
    pair: Option<PairVerdict>,
    pair_error: Option<String>,
    case: Option<u8>,
    degenerate_pair: Option<bool>,
    eta: Option<String>,
    classification_error: Option<String>,
    pass: bool,
}

fn eta_text(relation: &EtaRelation) -> String {
    match relation {
        EtaRelation::Gamma0Zero => "Gamma0b y = 0".into(),
        EtaRelation::Robin { d_inf } => {
            format!("Gamma1b y = d_inf * Gamma0b y with d_inf = {d_inf}")
        }
        EtaRelation::BothZero => "Gamma0b y = 0 and Gamma1b y = 0".into(),
    }
}

fn cmd_validate(file: &Path) -> Result<i32, Failure> {
    let parsed = input::parse_file(file)?;

    // Coefficient side: a trivial weight is reported as its own verdict, any
    // other rejection as a coefficient error.
    let problem_res = Problem::new(
        parsed.a,
        parsed.b,
        parsed.regularity,
        parsed.p.clone(),
        parsed.q.clone(),
        parsed.delta.clone(),
        parsed.left_angle,
        parsed.tol,
    );
    let (coefficients_ok, coefficient_error, delta_nontrivial) = match &problem_res {
        Ok(_) => (true, None, Some(true)),
        Err(slnev_core::SlError::TrivialWeight) => (true, None, Some(false)),
        Err(e) => (false, Some(e.to_string()), None),
    };

    // Pair side: evaluate the defining inequalities over the sampling plan
    // and name each violated one.
    let pair_res = EntirePair::new(parsed.pair_c0.clone(), parsed.pair_c1.clone());
    let (pair, pair_error) = match &pair_res {
        Ok(p) => {
            let report = validate_pair(p, &SamplingPlan::default());
            let mut violations = Vec::new();
            if report.nevanlinna_violation > 1e-9 {
                violations.push(format!(
                    "Nevanlinna inequality Im(lambda) Im(C1 conj(C0)) >= 0 violated \
                     (worst {:.3e})",
                    report.nevanlinna_violation
                ));
            }
            if report.symmetry_violation > 1e-9 {
                violations.push(format!(
                    "conjugate symmetry C(conj lambda) = conj(C(lambda)) violated \
                     (worst {:.3e})",
                    report.symmetry_violation
                ));
            }
            if report.realness_violation > 1e-9 {
                violations.push(format!(
                    "realness on the real axis violated (worst {:.3e})",
                    report.realness_violation
                ));
            }
            if !report.pass && violations.is_empty() {
                violations.push(format!(
                    "possible common zero of C0 and C1 (magnitude ratio {:.3e})",
                    report.min_magnitude_ratio
                ));
            }
            (
                Some(PairVerdict {
                    valid: report.pass,
                    degenerate: report.degenerate,
                    nevanlinna_violation: report.nevanlinna_violation,
                    symmetry_violation: report.symmetry_violation,
                    realness_violation: report.realness_violation,
                    min_magnitude_ratio: report.min_magnitude_ratio,
                    violations,
                }),
                None,
            )
        }
        Err(e) => (None, Some(e.to_string())),
    };
    let pair_valid = pair.as_ref().map(|p| p.valid).unwrap_or(false);

    // Classification of tau at infinity, only meaningful for a valid pair.
    let (case, degenerate_pair, eta, classification_error) = match &pair_res {
        Ok(p) if pair_valid => match classify_infinity(p, &ClassifyConfig::default()) {
            Ok(class) => {
                let number = match class.case {
                    Case::Case1 | Case::DegeneratePair => 1,
                    Case::Case2 => 2,
                    Case::Case3 => 3,
                };
                (
                    Some(number),
                    Some(class.case == Case::DegeneratePair),
                    Some(eta_text(&eta_relation(&class))),
                    None,
                )
            }
            Err(e) => (None, None, None, Some(e.to_string())),
        },
        _ => (None, None, None, None),
    };

    let pass = coefficients_ok
        && delta_nontrivial == Some(true)
        && pair_valid
        && case.is_some();
    let out = ValidateOut {
        coefficients_ok,
        coefficient_error,
        delta_nontrivial,
        pair,
        pair_error,
        case,
        degenerate_pair,
        eta,
        classification_error,
        pass,
    };
    emit_json(&out, None, "")?;
    Ok(if pass { 0 } else { 1 })
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Serialize)]
struct SpectrumRow {
    t_k: f64,
    xi_k: f64,
}

fn cmd_spectrum(
    file: &Path,
    window: Option<(f64, f64)>,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    let parsed = input::parse_file(file)?;
    let built = parsed.build()?;
    let window = parsed.window_or(window)?;
    let cp = CharacteristicPair::new(built.problem, built.pair, built.mode)
        .map_err(|e| Failure::Run(e.to_string()))?;
    let dsf = find_eigenvalues(&cp, window, &ScanOptions::default())
        .map_err(|e| Failure::Run(e.to_string()))?;
    let rows: Vec<SpectrumRow> = dsf
        .eigenvalues
        .iter()
        .map(|ev| SpectrumRow {
            t_k: ev.t,
            xi_k: ev.xi,
        })
        .collect();
    emit_json(&rows, out, "spectrum.json")?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// expand

#[derive(Serialize)]
struct ResidualRow {
    #[serde(rename = "K")]
    k: usize,
    l2_residual: f64,
    parseval_defect: f64,
}

#[derive(Serialize)]
struct ExpandOut {
    bhat_k: Vec<f64>,
    weights: Vec<f64>,
    norm: f64,
    residuals: Vec<ResidualRow>,
    parseval_defect: f64,
}

struct Prepared<'a> {
    cp: CharacteristicPair,
    target: TargetFunction<'a>,
    terms: Vec<ExpansionTerm>,
    ks: Vec<usize>,
}

/// Shared front half of expand and converge: engine objects, the target,
/// all expansion terms in the window, and the cleaned K list.
fn prepare_expansion(
    parsed: &Parsed,
    window: Option<(f64, f64)>,
    k: &[usize],
) -> Result<Prepared<'static>, Failure> {
    let target_exprs = parsed
        .target
        .as_ref()
        .ok_or_else(|| Failure::Run("problem file has no target block".into()))?;
    let target = TargetFunction::from_exprs(
        target_exprs.y.clone(),
        target_exprs.dy.clone(),
        target_exprs.f_y.clone(),
    )
    .map_err(|e| Failure::Schema(format!("bad target: {e}")))?;

    let built = parsed.build()?;
    let window = parsed.window_or(window)?;
    let cp = CharacteristicPair::new(built.problem, built.pair, built.mode)
        .map_err(|e| Failure::Run(e.to_string()))?;
    let dsf = find_eigenvalues(&cp, window, &ScanOptions::default())
        .map_err(|e| Failure::Run(e.to_string()))?;
    let terms = expansion_terms(cp.problem(), cp.b_eff(), &dsf, &target)
        .map_err(|e| Failure::Run(e.to_string()))?;

    let mut ks: Vec<usize> = if k.is_empty() {
        vec![terms.len()]
    } else {
        k.iter().map(|&k| k.min(terms.len())).collect()
    };
    ks.sort_unstable();
    ks.dedup();
    Ok(Prepared {
        cp,
        target,
        terms,
        ks,
    })
}

fn cmd_expand(
    file: &Path,
    window: Option<(f64, f64)>,
    k: &[usize],
    grid: usize,
    out: &Path,
) -> Result<i32, Failure> {
    let parsed = input::parse_file(file)?;
    let prep = prepare_expansion(&parsed, window, k)?;
    let problem = prep.cp.problem();
    let l2 = l2_report(problem, prep.cp.b_eff(), &prep.target, &prep.terms, &prep.ks)
        .map_err(|e| Failure::Run(e.to_string()))?;

    // CSV: x, target, one partial sum column per K, then individual terms.
    let kmax = prep.ks.last().copied().unwrap_or(0);
    let grid = grid.max(2);
    let (a, b) = (problem.a, prep.cp.b_eff());
    let mut csv = String::from("x,y");
    for &k in &prep.ks {
        csv.push_str(&format!(",S_{k}"));
    }
    for j in 0..kmax {
        csv.push_str(&format!(",term_{j}"));
    }
    csv.push('\n');
    for i in 0..grid {
        let x = a + (b - a) * i as f64 / (grid - 1) as f64;
        csv.push_str(&sig17(x));
        csv.push(',');
        csv.push_str(&sig17(prep.target.value(x)));
        let values: Vec<f64> = prep.terms[..kmax].iter().map(|t| t.value(x)).collect();
        let mut prefix = 0.0;
        let mut sums = Vec::with_capacity(kmax + 1);
        sums.push(0.0);
        for v in &values {
            prefix += v;
            sums.push(prefix);
        }
        for &k in &prep.ks {
            csv.push(',');
            csv.push_str(&sig17(sums[k]));
        }
        for v in &values {
            csv.push(',');
            csv.push_str(&sig17(*v));
        }
        csv.push('\n');
    }
    write_out(Some(out), "expand.csv", &csv)?;

    let summary = ExpandOut {
        bhat_k: prep.terms.iter().map(|t| t.yhat).collect(),
        weights: prep.terms.iter().map(|t| t.weight()).collect(),
        norm: l2.norm,
        residuals: l2
            .rows
            .iter()
            .map(|r| ResidualRow {
                k: r.k,
                l2_residual: r.l2_residual,
                parseval_defect: r.parseval_defect,
            })
            .collect(),
        parseval_defect: l2.rows.last().map(|r| r.parseval_defect).unwrap_or(0.0),
    };
    emit_json(&summary, Some(out), "expand.json")?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// converge

#[derive(Serialize)]
struct ConvergeOut {
    relation: EtaRelation,
    report: slnev_core::UniformReport,
}

fn cmd_converge(
    file: &Path,
    window: Option<(f64, f64)>,
    k: &[usize],
    grid: usize,
    strict: bool,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    let parsed = input::parse_file(file)?;
    let prep = prepare_expansion(&parsed, window, k)?;
    let class = classify_infinity(
        &EntirePair::new(parsed.pair_c0.clone(), parsed.pair_c1.clone())
            .map_err(|e| Failure::Run(e.to_string()))?,
        &ClassifyConfig::default(),
    )
    .map_err(|e| Failure::Run(e.to_string()))?;
    let relation = eta_relation(&class);
    let report = uniform_report(
        &prep.cp,
        &relation,
        &prep.target,
        &prep.terms,
        &prep.ks,
        grid,
        strict,
    )
    .map_err(|e| Failure::Run(e.to_string()))?;
    let outv = ConvergeOut { relation, report };
    emit_json(&outv, out, "converge.json")?;
    Ok(0)
}

// ---------------------------------------------------------------------------
// oracle-compare

#[derive(Serialize)]
struct CompareRow {
    k: usize,
    engine: f64,
    oracle: f64,
    gap: f64,
}

#[derive(Serialize)]
struct CompareOut {
    n: usize,
    window: [f64; 2],
    engine_count: usize,
    oracle_count: usize,
    rows: Vec<CompareRow>,
    max_gap: Option<f64>,
    tolerance: f64,
    pass: bool,
}

const COMPARE_TOL: f64 = 1e-3;

fn cmd_oracle_compare(
    file: &Path,
    window: Option<(f64, f64)>,
    n: usize,
    out: Option<&Path>,
) -> Result<i32, Failure> {
    let parsed = input::parse_file(file)?;
    let built = parsed.build()?;
    let window = parsed.window_or(window)?;

    // The pencil only models pairs affine in lambda; refuse the rest.
    let row = oracle::affine_pair_parts(&built.pair)
        .map_err(|e| Failure::Schema(format!("oracle scope: {e}")))?;
    let pencil = oracle::discretize(&built.problem, row, n)
        .map_err(|e| Failure::Run(e.to_string()))?;
    let oracle_ts = oracle::pencil_eigenvalues(&pencil, window)
        .map_err(|e| Failure::Run(e.to_string()))?;

    let cp = CharacteristicPair::new(built.problem, built.pair, built.mode)
        .map_err(|e| Failure::Run(e.to_string()))?;
    let dsf = find_eigenvalues(&cp, window, &ScanOptions::default())
        .map_err(|e| Failure::Run(e.to_string()))?;
    let engine_ts: Vec<f64> = dsf.eigenvalues.iter().map(|ev| ev.t).collect();

    let max_gap = oracle::match_sets(&engine_ts, &oracle_ts).ok();
    let rows = if engine_ts.len() == oracle_ts.len() {
        engine_ts
            .iter()
            .zip(oracle_ts.iter())
            .enumerate()
            .map(|(k, (&e, &o))| CompareRow {
                k,
                engine: e,
                oracle: o,
                gap: (e - o).abs(),
            })
            .collect()
    } else {
        Vec::new()
    };
    let pass = max_gap.map(|g| g <= COMPARE_TOL).unwrap_or(false);
    let outv = CompareOut {
        n,
        window: [window.0, window.1],
        engine_count: engine_ts.len(),
        oracle_count: oracle_ts.len(),
        rows,
        max_gap,
        tolerance: COMPARE_TOL,
        pass,
    };
    emit_json(&outv, out, "oracle_compare.json")?;
    Ok(if pass { 0 } else { 1 })
}
