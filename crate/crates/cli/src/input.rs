//! Problem file schema and its conversion into engine types.
//!
//! The file is a single JSON document.  Unknown keys are rejected so that a
//! typo in a tolerance name fails loudly instead of silently running with
//! defaults.  Schema problems exit with code 2, semantic (validation)
//! problems with code 1; the split is made here by returning different
//! failure variants.

use serde::Deserialize;
use slnev_core::expr::Expr;
use slnev_core::nevpair::EntirePair;
use slnev_core::problem::{Problem, Regularity, RightEndpoint, Tolerances};
use slnev_core::CharMode;
use std::path::Path;

/// A command failure, split by exit code: schema and usage problems exit 2,
/// runtime and validation problems exit 1.
#[derive(Debug)]
pub enum Failure {
    Schema(String),
    Run(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Schema(_) => 2,
            Failure::Run(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Schema(m) | Failure::Run(m) => m,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    interval: IntervalSpec,
    coefficients: CoefficientSpec,
    left_bc: LeftBcSpec,
    #[serde(default)]
    right_pair: Option<RightPairSpec>,
    #[serde(default)]
    right_bc_constant: Option<RightBcConstantSpec>,
    #[serde(default)]
    window: Option<[f64; 2]>,
    #[serde(default)]
    tolerances: Option<ToleranceSpec>,
    #[serde(default)]
    target: Option<TargetSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalSpec {
    a: f64,
    b: EndpointSpec,
    regularity: String,
}

/// The right endpoint is a number or the string "inf".
#[derive(Deserialize)]
#[serde(untagged)]
enum EndpointSpec {
    Finite(f64),
    Named(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoefficientSpec {
    p: String,
    q: String,
    delta: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LeftBcSpec {
    #[serde(rename = "B")]
    b: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RightPairSpec {
    #[serde(rename = "C0")]
    c0: String,
    #[serde(rename = "C1")]
    c1: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RightBcConstantSpec {
    #[serde(rename = "B1")]
    b1: f64,
}

/// Every tolerance is optional; missing entries take the documented
/// defaults (ode_rel 1e-10, ode_abs 1e-12, quad 1e-10, root 1e-12,
/// tail 1e-8).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ToleranceSpec {
    #[serde(default)]
    ode_rel: Option<f64>,
    #[serde(default)]
    ode_abs: Option<f64>,
    #[serde(default)]
    quad: Option<f64>,
    #[serde(default)]
    root: Option<f64>,
    #[serde(default)]
    tail: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetSpec {
    y: String,
    #[serde(default)]
    dy: Option<String>,
    #[serde(default)]
    f_y: Option<String>,
}

/// Schema-checked file contents with all expressions parsed, before any
/// semantic validation has run.
pub struct Parsed {
    pub a: f64,
    pub b: RightEndpoint,
    pub regularity: Regularity,
    pub mode: CharMode,
    pub p: Expr,
    pub q: Expr,
    pub delta: Expr,
    pub left_angle: f64,
    pub pair_c0: Expr,
    pub pair_c1: Expr,
    pub tol: Tolerances,
    pub window: Option<(f64, f64)>,
    pub target: Option<ParsedTarget>,
}

pub struct ParsedTarget {
    pub y: Expr,
    pub dy: Option<Expr>,
    pub f_y: Option<Expr>,
}

/// Engine objects for commands past validation.
pub struct Built {
    pub problem: Problem,
    pub pair: EntirePair,
    pub mode: CharMode,
}

fn parse_expr(what: &str, text: &str) -> Result<Expr, Failure> {
    Expr::parse(text)
        .map_err(|e| Failure::Schema(format!("cannot parse {what} expression {text:?}: {e}")))
}

pub fn parse_file(path: &Path) -> Result<Parsed, Failure> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| Failure::Schema(format!("cannot read {}: {e}", path.display())))?;
    let file: ProblemFile = serde_json::from_str(&raw)
        .map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))?;

    let b = match file.interval.b {
        EndpointSpec::Finite(v) if v.is_finite() => RightEndpoint::Finite(v),
        EndpointSpec::Finite(v) => {
            return Err(Failure::Schema(format!("interval.b must be finite, got {v}")))
        }
        EndpointSpec::Named(s) if s == "inf" => RightEndpoint::Infinite,
        EndpointSpec::Named(s) => {
            return Err(Failure::Schema(format!(
                "interval.b must be a number or \"inf\", got {s:?}"
            )))
        }
    };
    let (regularity, mode) = match file.interval.regularity.as_str() {
        "regular" => (Regularity::Regular, CharMode::RegularDirect),
        "quasiregular" => (Regularity::Quasiregular, CharMode::QuasiregularW),
        other => {
            return Err(Failure::Schema(format!(
                "interval.regularity must be \"regular\" or \"quasiregular\", got {other:?}"
            )))
        }
    };

    let (pair_c0, pair_c1) = match (&file.right_pair, &file.right_bc_constant) {
        (Some(rp), None) => (
            parse_expr("right_pair.C0", &rp.c0)?,
            parse_expr("right_pair.C1", &rp.c1)?,
        ),
        (None, Some(rc)) => (Expr::Num(rc.b1.cos()), Expr::Num(rc.b1.sin())),
        (Some(_), Some(_)) => {
            return Err(Failure::Schema(
                "give right_pair or right_bc_constant, not both".into(),
            ))
        }
        (None, None) => {
            return Err(Failure::Schema(
                "one of right_pair or right_bc_constant is required".into(),
            ))
        }
    };

    let mut tol = Tolerances::default();
    if let Some(ts) = &file.tolerances {
        if let Some(v) = ts.ode_rel {
            tol.ode_rel = v;
        }
        if let Some(v) = ts.ode_abs {
            tol.ode_abs = v;
        }
        if let Some(v) = ts.quad {
            tol.quad = v;
        }
        if let Some(v) = ts.root {
            tol.root = v;
        }
        if let Some(v) = ts.tail {
            tol.tail = v;
        }
    }

    let target = match &file.target {
        Some(ts) => Some(ParsedTarget {
            y: parse_expr("target.y", &ts.y)?,
            dy: ts
                .dy
                .as_deref()
                .map(|s| parse_expr("target.dy", s))
                .transpose()?,
            f_y: ts
                .f_y
                .as_deref()
                .map(|s| parse_expr("target.f_y", s))
                .transpose()?,
        }),
        None => None,
    };

    Ok(Parsed {
        a: file.interval.a,
        b,
        regularity,
        mode,
        p: parse_expr("coefficients.p", &file.coefficients.p)?,
        q: parse_expr("coefficients.q", &file.coefficients.q)?,
        delta: parse_expr("coefficients.delta", &file.coefficients.delta)?,
        left_angle: file.left_bc.b,
        pair_c0,
        pair_c1,
        tol,
        window: file.window.map(|w| (w[0], w[1])),
        target,
    })
}

impl Parsed {
    /// Builds the engine problem and pair, treating any rejection as a
    /// validation failure (exit 1).
    pub fn build(&self) -> Result<Built, Failure> {
        let problem = Problem::new(
            self.a,
            self.b,
            self.regularity,
            self.p.clone(),
            self.q.clone(),
            self.delta.clone(),
            self.left_angle,
            self.tol.clone(),
        )
        .map_err(|e| Failure::Run(format!("problem rejected: {e}")))?;
        let pair = EntirePair::new(self.pair_c0.clone(), self.pair_c1.clone())
            .map_err(|e| Failure::Run(format!("boundary pair rejected: {e}")))?;
        Ok(Built {
            problem,
            pair,
            mode: self.mode,
        })
    }

    /// Window from the file unless overridden on the command line.
    pub fn window_or(&self, flag: Option<(f64, f64)>) -> Result<(f64, f64), Failure> {
        flag.or(self.window).ok_or_else(|| {
            Failure::Schema("no spectral window: set `window` in the file or pass --window lo:hi".into())
        })
    }
}
