//! Eigenfunction expansions and convergence reports.
//!
//! Given discrete spectral data (t_k, xi_k), a target function y expands as
//!
//! ```text
//! S_K(x) = sum_{k<K} xi_k yhat_k phi(x, t_k),
//! yhat_k = int phi(x, t_k) delta(x) y(x) dx,
//! ```
//!
//! with phi(., t_k) the left fundamental solution at the eigenvalue.  When
//! the right boundary pair depends on the spectral parameter the terms are
//! not mutually orthogonal, so the weighted L2 residual ||y - S_K|| is
//! measured by quadrature rather than through a Parseval identity; the
//! Parseval defect |  ||y||^2 - sum xi yhat^2 | is reported separately as a
//! diagnostic.  Both quantities use the weighted seminorm: nothing off the
//! support of delta is visible to them.
//!
//! Sup-norm convergence is guaranteed only for targets that match the
//! boundary behavior of the expansion on both ends and lie in the operator
//! domain.  `uniform_report` checks that membership and reports grid sup
//! residuals either way, marking reports whose target falls outside the
//! guaranteed class.

use crate::expr::{Expr, Slot};
use crate::nevpair::EtaRelation;
use crate::problem::{Problem, SlError, Trajectory};
use crate::spectrum::DiscreteSpectralFunction;
use crate::Complex64;
use crate::characteristic::CharacteristicPair;
use serde::Serialize;

/// A function to expand, with optional classical derivative and image data.
///
/// `y` alone is enough for coefficients and L2 reports.  The derivative
/// feeds the quasi-derivative y^[1] = p y' used by boundary checks and the
/// derivative-series residual; when absent it is replaced by a finite
/// difference and the report carries a warning flag.  The image f is the
/// right-hand side with -(y^[1])' + q y = delta * f; it is required to
/// certify membership in the operator domain.
pub struct TargetFunction<'a> {
    y: Box<dyn Fn(f64) -> f64 + 'a>,
    dy: Option<Box<dyn Fn(f64) -> f64 + 'a>>,
    image: Option<Box<dyn Fn(f64) -> f64 + 'a>>,
}

impl<'a> TargetFunction<'a> {
    pub fn new<F: Fn(f64) -> f64 + 'a>(y: F) -> Self {
        TargetFunction {
            y: Box::new(y),
            dy: None,
            image: None,
        }
    }

    pub fn with_derivative<F: Fn(f64) -> f64 + 'a>(mut self, dy: F) -> Self {
        self.dy = Some(Box::new(dy));
        self
    }

    pub fn with_image<F: Fn(f64) -> f64 + 'a>(mut self, f: F) -> Self {
        self.image = Some(Box::new(f));
        self
    }

    /// Builds a target from coefficient-slot expressions (functions of x
    /// only).  Evaluation errors inside quadrature surface as NaN and are
    /// caught by the quadrature error estimate.
    pub fn from_exprs(
        y: Expr,
        dy: Option<Expr>,
        image: Option<Expr>,
    ) -> Result<TargetFunction<'static>, SlError> {
        for e in [Some(&y), dy.as_ref(), image.as_ref()].into_iter().flatten() {
            e.check_slot(Slot::Coefficient)?;
        }
        let lift = |e: Expr| move |x: f64| e.eval_real(x, 0.0).unwrap_or(f64::NAN);
        Ok(TargetFunction {
            y: Box::new(lift(y)),
            dy: dy.map(|e| Box::new(lift(e)) as Box<dyn Fn(f64) -> f64>),
            image: image.map(|e| Box::new(lift(e)) as Box<dyn Fn(f64) -> f64>),
        })
    }

    pub fn value(&self, x: f64) -> f64 {
        (self.y)(x)
    }

    pub fn derivative(&self, x: f64) -> Option<f64> {
        self.dy.as_ref().map(|f| f(x))
    }

    pub fn image(&self, x: f64) -> Option<f64> {
        self.image.as_ref().map(|f| f(x))
    }

    pub fn has_derivative(&self) -> bool {
        self.dy.is_some()
    }

    pub fn has_image(&self) -> bool {
        self.image.is_some()
    }

    /// y' at x, from the supplied derivative or a finite difference.  The
    /// flag is true when a finite difference was used.  Near the interval
    /// ends the centered stencil is replaced by a second order one-sided
    /// formula so the endpoint accuracy stays at O(h^2).
    fn derivative_or_fd(&self, x: f64, lo: f64, hi: f64) -> (f64, bool) {
        if let Some(f) = &self.dy {
            return (f(x), false);
        }
        let h = 1e-6 * (hi - lo).max(1.0);
        let d = if x - h < lo {
            (-3.0 * self.value(x) + 4.0 * self.value(x + h) - self.value(x + 2.0 * h))
                / (2.0 * h)
        } else if x + h > hi {
            (3.0 * self.value(x) - 4.0 * self.value(x - h) + self.value(x - 2.0 * h))
                / (2.0 * h)
        } else {
            (self.value(x + h) - self.value(x - h)) / (2.0 * h)
        };
        (d, true)
    }
}

/// One term of the expansion: y_k(x) = xi_k yhat_k phi(x, t_k).
#[derive(Serialize)]
pub struct ExpansionTerm {
    pub k: usize,
    pub t: f64,
    pub xi: f64,
    pub yhat: f64,
    #[serde(skip)]
    phi: Trajectory,
}

impl ExpansionTerm {
    /// Coefficient of phi(., t_k) in the partial sum.
    pub fn weight(&self) -> f64 {
        self.xi * self.yhat
    }

    pub fn value(&self, x: f64) -> f64 {
        self.weight() * self.phi.value(x).re
    }

    /// Quasi-derivative of the term, xi yhat phi^[1](x, t_k).
    pub fn quasi(&self, x: f64) -> f64 {
        self.weight() * self.phi.quasi_derivative(x).re
    }

    pub fn phi_value(&self, x: f64) -> f64 {
        self.phi.value(x).re
    }

    pub fn phi_quasi(&self, x: f64) -> f64 {
        self.phi.quasi_derivative(x).re
    }
}

fn real_part_checked(v: Complex64, what: &'static str) -> Result<f64, SlError> {
    if v.im.abs() > 1e-9 * (1.0 + v.re.abs()) {
        return Err(SlError::NonConvergent {
            what,
            detail: format!("imaginary residue {:.3e} in a real quantity", v.im),
        });
    }
    Ok(v.re)
}

fn pairing_with_target(
    problem: &Problem,
    phi: &Trajectory,
    y: &TargetFunction,
    lo: f64,
    hi: f64,
) -> Result<f64, SlError> {
    let v = problem.integrate_weighted(
        |x, _| Ok(phi.value(x) * y.value(x)),
        lo,
        hi,
    )?;
    real_part_checked(v, "fourier coefficient")
}

/// Fourier coefficient yhat = int phi(x, t) delta(x) y(x) dx over [a, b_eff].
pub fn fourier_coefficient(
    problem: &Problem,
    b_eff: f64,
    t: f64,
    y: &TargetFunction,
) -> Result<f64, SlError> {
    let phi = problem.phi(Complex64::new(t, 0.0), b_eff, true)?;
    pairing_with_target(problem, &phi, y, problem.a, b_eff)
}

/// Builds the k-th expansion term for the eigenvalue (t, xi).
pub fn eigenfunction_term(
    problem: &Problem,
    b_eff: f64,
    k: usize,
    t: f64,
    xi: f64,
    y: &TargetFunction,
) -> Result<ExpansionTerm, SlError> {
    let phi = problem.phi(Complex64::new(t, 0.0), b_eff, true)?;
    let yhat = pairing_with_target(problem, &phi, y, problem.a, b_eff)?;
    Ok(ExpansionTerm {
        k,
        t,
        xi,
        yhat,
        phi,
    })
}

/// All terms for the eigenvalues in `dsf`, indexed in order.
pub fn expansion_terms(
    problem: &Problem,
    b_eff: f64,
    dsf: &DiscreteSpectralFunction,
    y: &TargetFunction,
) -> Result<Vec<ExpansionTerm>, SlError> {
    dsf.eigenvalues
        .iter()
        .enumerate()
        .map(|(k, ev)| eigenfunction_term(problem, b_eff, k, ev.t, ev.xi, y))
        .collect()
}

/// Value of the partial sum built from the given prefix of terms.
pub fn partial_sum(terms: &[ExpansionTerm], x: f64) -> f64 {
    terms.iter().map(|term| term.value(x)).sum()
}

/// Quasi-derivative of the partial sum.
pub fn partial_sum_quasi(terms: &[ExpansionTerm], x: f64) -> f64 {
    terms.iter().map(|term| term.quasi(x)).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct L2Row {
    pub k: usize,
    /// || y - S_k || in the weighted seminorm, by quadrature.
    pub l2_residual: f64,
    /// | ||y||^2 - sum_{j<k} xi_j yhat_j^2 |.
    pub parseval_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct L2Report {
    /// ||y|| in the weighted seminorm.
    pub norm: f64,
    pub rows: Vec<L2Row>,
}

/// Weighted L2 residuals of the partial sums S_K for each requested K.
/// Entries of `ks` beyond the number of terms are clamped.
pub fn l2_report(
    problem: &Problem,
    b_eff: f64,
    y: &TargetFunction,
    terms: &[ExpansionTerm],
    ks: &[usize],
) -> Result<L2Report, SlError> {
    let a = problem.a;
    let norm_sq = real_part_checked(
        problem.integrate_weighted(
            |x, _| {
                let v = y.value(x);
                Ok(Complex64::new(v * v, 0.0))
            },
            a,
            b_eff,
        )?,
        "target norm",
    )?;

    let mut sorted: Vec<usize> = ks.iter().map(|&k| k.min(terms.len())).collect();
    sorted.sort_unstable();
    sorted.dedup();

    let mut rows = Vec::with_capacity(sorted.len());
    for &k in &sorted {
        let head = &terms[..k];
        let res_sq = real_part_checked(
            problem.integrate_weighted(
                |x, _| {
                    let r = y.value(x) - partial_sum(head, x);
                    Ok(Complex64::new(r * r, 0.0))
                },
                a,
                b_eff,
            )?,
            "expansion residual",
        )?;
        let energy: f64 = head.iter().map(|term| term.xi * term.yhat * term.yhat).sum();
        rows.push(L2Row {
            k,
            l2_residual: res_sq.max(0.0).sqrt(),
            parseval_defect: (norm_sq - energy).abs(),
        });
    }
    Ok(L2Report {
        norm: norm_sq.max(0.0).sqrt(),
        rows,
    })
}

/// Domain-membership verdict behind a uniform convergence claim.
#[derive(Debug, Clone, Serialize)]
pub struct EligibilityReport {
    pub eligible: bool,
    /// |cos(B) y(a) + sin(B) y^[1](a)|.
    pub left_defect: f64,
    /// Defect in the limit relation at the right end (shape depends on the
    /// case of the boundary pair).
    pub right_defect: f64,
    /// Max sampled |-(y^[1])' + q y - delta f| when the image was supplied.
    pub image_residual: Option<f64>,
    /// True when y' had to be approximated by finite differences.
    pub used_fd_derivative: bool,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformRow {
    pub k: usize,
    /// max |y - S_k| over the report grid.
    pub sup_residual: f64,
    /// max |y^[1] - S_k^[1]| over the grid, when a derivative was supplied.
    pub sup_residual_quasi: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformReport {
    pub eligibility: EligibilityReport,
    pub rows: Vec<UniformRow>,
    pub grid_points: usize,
}

const BC_DEFECT_TOL: f64 = 1e-6;
const IMAGE_RESIDUAL_TOL: f64 = 1e-3;

fn coefficient_at(name: &'static str, e: &Expr, x: f64) -> Result<f64, SlError> {
    e.eval_real(x, 0.0).map_err(|source| SlError::Coefficient {
        name,
        x,
        source,
    })
}

/// Quasi-derivative y^[1](x) = p(x) y'(x) of the target.
fn target_quasi(
    problem: &Problem,
    y: &TargetFunction,
    x: f64,
    lo: f64,
    hi: f64,
) -> Result<(f64, bool), SlError> {
    let p = coefficient_at("p", &problem.p, x)?;
    let (dy, fd) = y.derivative_or_fd(x, lo, hi);
    Ok((p * dy, fd))
}

fn image_residual(
    problem: &Problem,
    y: &TargetFunction,
    lo: f64,
    hi: f64,
) -> Result<Option<(f64, f64, bool)>, SlError> {
    if !y.has_image() {
        return Ok(None);
    }
    let mut knots = vec![lo];
    knots.extend(problem.breakpoints(lo, hi));
    knots.push(hi);
    let h = 1e-5 * (hi - lo).max(1.0);
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    let mut used_fd = false;
    for seg in knots.windows(2) {
        let (s0, s1) = (seg[0], seg[1]);
        if s1 - s0 <= 8.0 * h {
            continue;
        }
        // Stay clear of piece edges so the centered differences never
        // straddle a coefficient kink.
        let m0 = s0 + 3.0 * h;
        let m1 = s1 - 3.0 * h;
        let n = 48;
        for i in 0..=n {
            let x = m0 + (m1 - m0) * i as f64 / n as f64;
            let (ql, fl) = target_quasi(problem, y, x - h, lo, hi)?;
            let (qr, fr) = target_quasi(problem, y, x + h, lo, hi)?;
            used_fd |= fl || fr;
            let dq = (qr - ql) / (2.0 * h);
            let qv = coefficient_at("q", &problem.q, x)?;
            let dv = coefficient_at("delta", &problem.delta, x)?;
            let f = y.image(x).unwrap_or(f64::NAN);
            let r = (-dq + qv * y.value(x) - dv * f).abs();
            worst = worst.max(r);
            scale = scale.max((qv * y.value(x)).abs()).max((dv * f).abs());
        }
    }
    Ok(Some((worst, scale, used_fd)))
}

/// Sup-norm residual report for the partial sums, with a domain-membership
/// check against the boundary relation of the pair's case at infinity.
///
/// The grid has `grid_n` equispaced points on [a, b_eff] merged with the
/// coefficient breakpoints.  When `strict` is set, a missing image function
/// is an error; otherwise the target is marked ineligible and the residual
/// rows are still produced.
pub fn uniform_report(
    cp: &CharacteristicPair,
    relation: &EtaRelation,
    y: &TargetFunction,
    terms: &[ExpansionTerm],
    ks: &[usize],
    grid_n: usize,
    strict: bool,
) -> Result<UniformReport, SlError> {
    let problem = cp.problem();
    let a = problem.a;
    let b = cp.b_eff();
    if strict && !y.has_image() {
        return Err(SlError::Unsupported {
            what: "uniform convergence eligibility",
            detail: "target image f with l[y] = delta f was not supplied",
        });
    }

    let mut reasons = Vec::new();
    let mut used_fd = false;

    // Grid: equispaced points joined with the coefficient breakpoints.
    let n = grid_n.max(2);
    let mut grid: Vec<f64> = (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect();
    grid.extend(problem.breakpoints(a, b));
    grid.sort_by(|u, v| u.partial_cmp(v).unwrap());
    grid.dedup();

    let scale = grid
        .iter()
        .map(|&x| y.value(x).abs())
        .fold(1.0f64, f64::max);

    // Left condition: cos(B) y(a) + sin(B) y^[1](a) = 0.
    let bb = problem.left_angle;
    let (q_a, fd_a) = target_quasi(problem, y, a, a, b)?;
    used_fd |= fd_a;
    let left_defect = (bb.cos() * y.value(a) + bb.sin() * q_a).abs();
    if left_defect > BC_DEFECT_TOL * scale {
        reasons.push(format!(
            "left boundary defect {:.3e} exceeds {:.1e}",
            left_defect,
            BC_DEFECT_TOL * scale
        ));
    }

    // Right condition through the case relation of the pair.  Regular
    // problems read the classical end data directly; quasiregular ones go
    // through the regularized traces.
    let (q_b, fd_b) = target_quasi(problem, y, b, a, b)?;
    used_fd |= fd_b;
    let (g0, g1) = match problem.regularity {
        crate::problem::Regularity::Regular => (y.value(b), q_b),
        crate::problem::Regularity::Quasiregular => cp.bracket_traces(y.value(b), q_b),
    };
    let right_defect = match relation {
        EtaRelation::Gamma0Zero => g0.abs(),
        EtaRelation::Robin { d_inf } => (g1 - d_inf * g0).abs(),
        EtaRelation::BothZero => g0.abs() + g1.abs(),
    };
    if right_defect > BC_DEFECT_TOL * scale {
        reasons.push(format!(
            "right boundary defect {:.3e} exceeds {:.1e}",
            right_defect,
            BC_DEFECT_TOL * scale
        ));
    }

    let image_res = match image_residual(problem, y, a, b)? {
        Some((worst, img_scale, fd)) => {
            used_fd |= fd;
            if worst > IMAGE_RESIDUAL_TOL * img_scale {
                reasons.push(format!(
                    "image residual {:.3e} exceeds {:.1e}: f does not match l[y]/delta",
                    worst,
                    IMAGE_RESIDUAL_TOL * img_scale
                ));
            }
            Some(worst)
        }
        None => {
            reasons.push("image f with l[y] = delta f was not supplied".to_string());
            None
        }
    };

    let eligibility = EligibilityReport {
        eligible: reasons.is_empty(),
        left_defect,
        right_defect,
        image_residual: image_res,
        used_fd_derivative: used_fd,
        reasons,
    };

    // Residual rows.  Term values are accumulated once per grid point and
    // sampled at each requested prefix length.
    let mut sorted: Vec<usize> = ks.iter().map(|&k| k.min(terms.len())).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let with_quasi = y.has_derivative();

    let mut sup = vec![0.0f64; sorted.len()];
    let mut sup_q = vec![0.0f64; sorted.len()];
    for &x in &grid {
        let yx = y.value(x);
        let yq = if with_quasi {
            target_quasi(problem, y, x, a, b)?.0
        } else {
            0.0
        };
        let mut s = 0.0;
        let mut sq = 0.0;
        let mut at = 0;
        // Handle K = 0 rows before any term is added.
        while at < sorted.len() && sorted[at] == 0 {
            sup[at] = sup[at].max(yx.abs());
            sup_q[at] = sup_q[at].max(yq.abs());
            at += 1;
        }
        for (j, term) in terms.iter().enumerate() {
            if at >= sorted.len() {
                break;
            }
            s += term.value(x);
            if with_quasi {
                sq += term.quasi(x);
            }
            while at < sorted.len() && sorted[at] == j + 1 {
                sup[at] = sup[at].max((yx - s).abs());
                sup_q[at] = sup_q[at].max((yq - sq).abs());
                at += 1;
            }
        }
    }

    let rows = sorted
        .iter()
        .zip(sup.iter().zip(sup_q.iter()))
        .map(|(&k, (&r, &rq))| UniformRow {
            k,
            sup_residual: r,
            sup_residual_quasi: if with_quasi { Some(rq) } else { None },
        })
        .collect();

    Ok(UniformReport {
        eligibility,
        rows,
        grid_points: grid.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characteristic::CharMode;
    use crate::nevpair::EntirePair;
    use crate::problem::{Regularity, RightEndpoint, Tolerances};
    use crate::spectrum::{find_eigenvalues, ScanOptions};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn expr(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn base_problem() -> Problem {
        Problem::new(
            0.0,
            RightEndpoint::Finite(1.0),
            Regularity::Regular,
            expr("1"),
            expr("0"),
            expr("1"),
            FRAC_PI_2,
            Tolerances::default(),
        )
        .unwrap()
    }

    fn tangent_pair_cp() -> CharacteristicPair {
        let pair = EntirePair::new(expr("lambda"), expr("-1")).unwrap();
        CharacteristicPair::new(base_problem(), pair, CharMode::RegularDirect).unwrap()
    }

    fn dirichlet_cp() -> CharacteristicPair {
        let pair = EntirePair::new(expr("1"), expr("0")).unwrap();
        CharacteristicPair::new(base_problem(), pair, CharMode::RegularDirect).unwrap()
    }

    fn spectral_terms(
        cp: &CharacteristicPair,
        hi: f64,
        y: &TargetFunction,
    ) -> Vec<ExpansionTerm> {
        let dsf = find_eigenvalues(cp, (-1.0, hi), &ScanOptions::default()).unwrap();
        expansion_terms(cp.problem(), cp.b_eff(), &dsf, y).unwrap()
    }

    // s1 solves s = -tan(s); first positive eigenvalue of the tangent pair
    // is t1 = s1^2.
    const S1: f64 = 2.028_757_838_110_434_223_6;

    #[test]
    fn constant_target_coefficients() {
        let cp = tangent_pair_cp();
        let y = TargetFunction::new(|_| 1.0);
        // t0 = 0: phi(x, 0) = 1, so yhat0 = int_0^1 delta = 1.
        let y0 = fourier_coefficient(cp.problem(), 1.0, 0.0, &y).unwrap();
        assert_relative_eq!(y0, 1.0, max_relative = 1e-10);
        // t1 = s1^2: yhat1 = int_0^1 cos(s1 x) dx = sin(s1)/s1.
        let y1 = fourier_coefficient(cp.problem(), 1.0, S1 * S1, &y).unwrap();
        assert_relative_eq!(y1, 0.442_120_592_954_998_391_34, max_relative = 1e-9);
    }

    #[test]
    fn constant_target_leading_terms() {
        let cp = tangent_pair_cp();
        let y = TargetFunction::new(|_| 1.0);
        let terms = spectral_terms(&cp, 210.0, &y);
        assert_eq!(terms.len(), 6);
        // xi0 = 1/2, yhat0 = 1: the k = 0 term is identically 1/2.
        assert_relative_eq!(terms[0].weight(), 0.5, max_relative = 1e-8);
        for &x in &[0.0, 0.37, 1.0] {
            assert_relative_eq!(terms[0].value(x), 0.5, max_relative = 1e-8);
        }
        assert_relative_eq!(
            terms[1].weight(),
            0.739_659_488_127_402_451_5,
            max_relative = 1e-7
        );
        assert_relative_eq!(partial_sum(&terms[..1], 0.4), 0.5, max_relative = 1e-8);
        assert_eq!(partial_sum(&terms[..0], 0.4), 0.0);
    }

    #[test]
    fn constant_target_l2_report() {
        let cp = tangent_pair_cp();
        let y = TargetFunction::new(|_| 1.0);
        let terms = spectral_terms(&cp, 210.0, &y);
        let report = l2_report(cp.problem(), 1.0, &y, &terms, &[1, 3, 5]).unwrap();
        assert_relative_eq!(report.norm, 1.0, max_relative = 1e-10);
        let res: Vec<f64> = report.rows.iter().map(|r| r.l2_residual).collect();
        assert!(res[0] > res[1] && res[1] > res[2], "not decreasing: {res:?}");
        // Frozen residual of the five-term sum.
        assert_relative_eq!(res[2], 0.217_931_998_6, max_relative = 1e-6);
        for row in &report.rows {
            // Bessel: the quadratic energy never exceeds the norm.
            assert!(row.parseval_defect >= -1e-8);
        }
        let defects: Vec<f64> = report.rows.iter().map(|r| r.parseval_defect).collect();
        assert!(defects[0] > defects[1] && defects[1] > defects[2]);
    }

    #[test]
    fn eigenfunction_reproduction() {
        let cp = dirichlet_cp();
        let probe = TargetFunction::new(|_| 1.0);
        let terms0 = spectral_terms(&cp, 200.0, &probe);
        assert_eq!(terms0.len(), 5);
        // Expand the k = 1 eigenfunction itself.
        let t1 = terms0[1].t;
        assert_relative_eq!(t1, (1.5 * PI) * (1.5 * PI), max_relative = 1e-9);
        let phi1 = cp
            .problem()
            .phi(Complex64::new(t1, 0.0), 1.0, true)
            .unwrap();
        let y = TargetFunction::new(|x| phi1.value(x).re);
        let dsf = find_eigenvalues(&cp, (-1.0, 200.0), &ScanOptions::default()).unwrap();
        let terms = expansion_terms(cp.problem(), 1.0, &dsf, &y).unwrap();
        // Only the matching coefficient survives.
        for (k, term) in terms.iter().enumerate() {
            if k == 1 {
                assert_relative_eq!(term.weight(), 1.0, max_relative = 1e-8);
            } else {
                assert!(term.weight().abs() < 1e-8, "k={k}: {}", term.weight());
            }
        }
        let mut worst = 0.0f64;
        for i in 0..=200 {
            let x = i as f64 / 200.0;
            worst = worst.max((partial_sum(&terms, x) - y.value(x)).abs());
        }
        assert!(worst < 1e-6, "reproduction error {worst:.3e}");
    }

    #[test]
    fn weight_support_insensitivity() {
        // Weight vanishing on (1/2, 1]: values of y off the support must not
        // influence the coefficients.
        let problem = Problem::new(
            0.0,
            RightEndpoint::Finite(1.0),
            Regularity::Regular,
            expr("1"),
            expr("0"),
            expr("indicator(0, 1/2)"),
            FRAC_PI_2,
            Tolerances::default(),
        )
        .unwrap();
        let smooth = TargetFunction::new(|x| x);
        let jolted = TargetFunction::new(|x| if x > 0.55 { x + 7.0 } else { x });
        let c1 = fourier_coefficient(&problem, 1.0, 7.3, &smooth).unwrap();
        let c2 = fourier_coefficient(&problem, 1.0, 7.3, &jolted).unwrap();
        assert_relative_eq!(c1, c2, max_relative = 1e-12);
    }

    #[test]
    fn uniform_report_eligible_eigenfunction() {
        let cp = dirichlet_cp();
        let y = TargetFunction::from_exprs(
            expr("cos(3*pi*x/2)"),
            Some(expr("-(3*pi/2)*sin(3*pi*x/2)")),
            Some(expr("((3*pi/2)^2)*cos(3*pi*x/2)")),
        )
        .unwrap();
        let terms = spectral_terms(&cp, 200.0, &y);
        let relation = EtaRelation::Gamma0Zero;
        let report =
            uniform_report(&cp, &relation, &y, &terms, &[1, 2, 4], 513, true).unwrap();
        assert!(
            report.eligibility.eligible,
            "reasons: {:?}",
            report.eligibility.reasons
        );
        assert!(!report.eligibility.used_fd_derivative);
        assert!(report.eligibility.image_residual.unwrap() < 1e-6);
        let rows = &report.rows;
        assert_eq!(rows.len(), 3);
        // S_1 misses the target entirely; S_2 captures it exactly.
        assert!(rows[0].sup_residual > 0.9);
        assert!(rows[1].sup_residual < 1e-6, "{}", rows[1].sup_residual);
        assert!(rows[2].sup_residual < 1e-6);
        assert!(rows[1].sup_residual_quasi.unwrap() < 1e-5);
    }

    #[test]
    fn uniform_report_ineligible_constant() {
        // y = 1 violates the right-end relation of the tangent pair (case 1
        // asks for a vanishing trace); the report must still carry rows.
        let cp = tangent_pair_cp();
        let y = TargetFunction::from_exprs(expr("1"), Some(expr("0")), Some(expr("0"))).unwrap();
        let terms = spectral_terms(&cp, 210.0, &y);
        let report = uniform_report(
            &cp,
            &EtaRelation::Gamma0Zero,
            &y,
            &terms,
            &[2, 6],
            257,
            false,
        )
        .unwrap();
        assert!(!report.eligibility.eligible);
        assert!(report.eligibility.left_defect < 1e-12);
        assert_relative_eq!(report.eligibility.right_defect, 1.0, max_relative = 1e-12);
        assert!(report
            .eligibility
            .reasons
            .iter()
            .any(|r| r.contains("right boundary")));
        assert_eq!(report.rows.len(), 2);
        assert!(report.rows[0].sup_residual > 0.0);
    }

    #[test]
    fn uniform_report_strict_requires_image() {
        let cp = tangent_pair_cp();
        let y = TargetFunction::new(|_| 1.0);
        let terms: Vec<ExpansionTerm> = Vec::new();
        let err = uniform_report(
            &cp,
            &EtaRelation::Gamma0Zero,
            &y,
            &terms,
            &[0],
            65,
            true,
        )
        .unwrap_err();
        assert!(matches!(err, SlError::Unsupported { .. }));
    }

    #[test]
    fn fd_fallback_flags_report() {
        let cp = dirichlet_cp();
        let y = TargetFunction::from_exprs(
            expr("cos(3*pi*x/2)"),
            None,
            Some(expr("((3*pi/2)^2)*cos(3*pi*x/2)")),
        )
        .unwrap();
        let terms = spectral_terms(&cp, 30.0, &y);
        let report = uniform_report(
            &cp,
            &EtaRelation::Gamma0Zero,
            &y,
            &terms,
            &[2],
            129,
            false,
        )
        .unwrap();
        assert!(report.eligibility.used_fd_derivative);
        // FD derivative is good to ~1e-9 here, well inside the membership
        // tolerance.
        assert!(
            report.eligibility.eligible,
            "reasons: {:?}",
            report.eligibility.reasons
        );
    }
}
