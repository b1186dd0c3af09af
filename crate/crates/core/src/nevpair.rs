//! Entire Nevanlinna pairs (C0, C1): the lambda-dependent boundary data at
//! the right endpoint.
//!
//! A pair of real entire functions without common zeros is a Nevanlinna pair
//! when tau = -C0/C1 is a Nevanlinna function (maps the upper half-plane to
//! its closure) or C1 is identically zero.  The behaviour of tau along the
//! imaginary axis classifies the pair into one of three cases that determine
//! the limiting boundary relation satisfied by expansion sums.

use num_complex::Complex64;
use serde::Serialize;

use crate::expr::{EvalError, Expr, Slot};
use crate::problem::SlError;

/// Value of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtComplex {
    Finite(Complex64),
    Infinity,
}

impl ExtComplex {
    pub fn finite(self) -> Option<Complex64> {
        match self {
            ExtComplex::Finite(v) => Some(v),
            ExtComplex::Infinity => None,
        }
    }
}

/// A pair of entire functions of lambda, intended to satisfy the Nevanlinna
/// pair conditions.  `realness` records whether both components evaluated
/// real on a real sampling grid at construction time.
#[derive(Debug, Clone)]
pub struct EntirePair {
    pub c0: Expr,
    pub c1: Expr,
    pub realness: bool,
}

impl EntirePair {
    /// Builds a pair from two expressions in lambda alone.  Rejects
    /// expressions referencing x or indicators, and pairs that vanish
    /// identically (both components) on a sampling grid.
    pub fn new(c0: Expr, c1: Expr) -> Result<Self, SlError> {
        c0.check_slot(Slot::BoundaryPair)?;
        c1.check_slot(Slot::BoundaryPair)?;
        let mut any_nonzero = false;
        let mut realness = true;
        for i in 0..33 {
            let t = -8.0 + 0.5 * i as f64;
            let lam = Complex64::new(t, 0.0);
            let (v0, v1) = match (c0.eval_complex(0.0, lam), c1.eval_complex(0.0, lam)) {
                (Ok(a), Ok(b)) => (a, b),
                _ => continue,
            };
            let scale = v0.norm().max(v1.norm()).max(1.0);
            if v0.norm() + v1.norm() > 1e-14 * scale {
                any_nonzero = true;
            }
            if v0.im.abs() + v1.im.abs() > 1e-12 * scale {
                realness = false;
            }
        }
        if !any_nonzero {
            return Err(SlError::Pair(
                "both components vanish identically on the sampling grid".into(),
            ));
        }
        Ok(EntirePair { c0, c1, realness })
    }

    /// The constant self-adjoint pair (cos angle, sin angle).
    pub fn from_angle(angle: f64) -> Self {
        EntirePair {
            c0: Expr::Num(angle.cos()),
            c1: Expr::Num(angle.sin()),
            realness: true,
        }
    }

    pub fn eval(&self, lambda: Complex64) -> Result<(Complex64, Complex64), EvalError> {
        Ok((
            self.c0.eval_complex(0.0, lambda)?,
            self.c1.eval_complex(0.0, lambda)?,
        ))
    }

    /// tau(lambda) = -C0(lambda) / C1(lambda) on the extended plane.
    pub fn tau(&self, lambda: Complex64) -> Result<ExtComplex, EvalError> {
        let (c0, c1) = self.eval(lambda)?;
        let scale = c0.norm().max(c1.norm());
        if c1.norm() <= 1e-300 * scale.max(1.0) {
            return Ok(ExtComplex::Infinity);
        }
        Ok(ExtComplex::Finite(-c0 / c1))
    }

    /// True when C1 vanishes at 32 sample points spread over reals and the
    /// imaginary axis.
    pub fn c1_identically_zero(&self) -> bool {
        let mut samples = Vec::with_capacity(32);
        for i in 0..24 {
            samples.push(Complex64::new(-5.5 + 0.5 * i as f64, 0.0));
        }
        for i in 0..8 {
            samples.push(Complex64::new(0.3 * i as f64, 1.0 + i as f64));
        }
        samples.iter().all(|&lam| {
            match (self.c0.eval_complex(0.0, lam), self.c1.eval_complex(0.0, lam)) {
                (Ok(c0), Ok(c1)) => c1.norm() <= 1e-14 * c0.norm().max(1.0),
                _ => true,
            }
        })
    }
}

/// Where validate_pair evaluates the pair conditions.
#[derive(Debug, Clone)]
pub struct SamplingPlan {
    /// Real segment [lo, hi] sampled with `n_real` points.
    pub real_lo: f64,
    pub real_hi: f64,
    pub n_real: usize,
    /// Heights of horizontal sampling lines; each is used at +h and -h.
    pub heights: Vec<f64>,
    /// Points per horizontal line.
    pub n_per_height: usize,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            real_lo: -100.0,
            real_hi: 100.0,
            n_real: 201,
            heights: vec![0.1, 1.0, 10.0],
            n_per_height: 101,
        }
    }
}

/// Worst-case violations of the pair conditions over a sampling plan.
/// Violations are scaled by |C0|^2 + |C1|^2 at the sample.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    /// Worst negative part of Im(lambda) * Im(C1 * conj(C0)), scaled.
    pub nevanlinna_violation: f64,
    /// Worst |C1(conj l) conj(C0(l)) - conj(C1(l)) C0(conj l)|, scaled.
    pub symmetry_violation: f64,
    /// Worst |Im C0| + |Im C1| on the real segment, scaled by level.
    pub realness_violation: f64,
    /// min over samples of (|C0|^2+|C1|^2) divided by its max: a value
    /// near zero flags a common zero near a sample point.
    pub min_magnitude_ratio: f64,
    /// C1 vanished at every probe.
    pub degenerate: bool,
    /// Samples where evaluation failed (overflow etc).
    pub eval_failures: usize,
    pub samples_used: usize,
    pub pass: bool,
}

const PAIR_TOL: f64 = 1e-9;

/// Evaluates the Nevanlinna pair conditions on the sampling plan and
/// reports the worst scaled violation of each.
pub fn validate_pair(pair: &EntirePair, plan: &SamplingPlan) -> ValidationReport {
    let mut lams: Vec<Complex64> = Vec::new();
    let n_real = plan.n_real.max(2);
    for i in 0..n_real {
        let t = plan.real_lo + (plan.real_hi - plan.real_lo) * i as f64 / (n_real - 1) as f64;
        lams.push(Complex64::new(t, 0.0));
    }
    let n_h = plan.n_per_height.max(2);
    for &h in &plan.heights {
        for i in 0..n_h {
            let t = plan.real_lo + (plan.real_hi - plan.real_lo) * i as f64 / (n_h - 1) as f64;
            lams.push(Complex64::new(t, h));
            lams.push(Complex64::new(t, -h));
        }
    }

    let mut nev = 0.0f64;
    let mut sym = 0.0f64;
    let mut real_v = 0.0f64;
    let mut s_min = f64::INFINITY;
    let mut s_max = 0.0f64;
    let mut failures = 0usize;
    let mut used = 0usize;
    for &lam in &lams {
        let here = pair.eval(lam);
        let there = pair.eval(lam.conj());
        let ((c0, c1), (c0c, c1c)) = match (here, there) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                failures += 1;
                continue;
            }
        };
        used += 1;
        let s = c0.norm_sqr() + c1.norm_sqr();
        s_min = s_min.min(s);
        s_max = s_max.max(s);
        if s == 0.0 {
            continue;
        }
        if lam.im != 0.0 {
            let orient = lam.im * (c1 * c0.conj()).im;
            nev = nev.max(-orient / s);
        } else {
            real_v = real_v.max((c0.im.abs() + c1.im.abs()) / s.sqrt());
        }
        let sym_res = (c1c * c0.conj() - c1.conj() * c0c).norm();
        sym = sym.max(sym_res / s);
    }
    let ratio = if s_max > 0.0 { s_min / s_max } else { 0.0 };
    let degenerate = pair.c1_identically_zero();
    let pass = nev <= PAIR_TOL
        && sym <= PAIR_TOL
        && real_v <= PAIR_TOL
        && ratio > 1e-16
        && used > 0;
    ValidationReport {
        nevanlinna_violation: nev,
        symmetry_violation: sym,
        realness_violation: real_v,
        min_magnitude_ratio: ratio,
        degenerate,
        eval_failures: failures,
        samples_used: used,
        pass,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Case1,
    Case2,
    Case3,
    DegeneratePair,
}

/// Behaviour of tau at infinity along the imaginary axis.
///
/// `dhat_inf` is `f64::INFINITY` in Case 3 (serialized as null; JSON has no
/// infinity literal).  `d_inf` is present only in Case 2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CaseClassification {
    pub case: Case,
    pub b_inf: f64,
    pub dhat_inf: f64,
    pub d_inf: Option<f64>,
}

/// Ladder of heights y for estimating the limits of tau(iy), and the
/// monotone growth factor beyond which y Im tau(iy) is declared unbounded.
#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    pub ladder: Vec<f64>,
    pub growth_factor: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            ladder: vec![1e2, 1e3, 1e4, 1e5, 1e6, 1e7, 1e8],
            growth_factor: 1e6,
        }
    }
}

fn stabilized(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()) || (a - b).abs() <= 1e-300
}

/// Guarded Aitken extrapolation of the tail of a stabilizing sequence.
fn aitken(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 3 {
        return v[n - 1];
    }
    let (a, b, c) = (v[n - 3], v[n - 2], v[n - 1]);
    let denom = (c - b) - (b - a);
    let scale = a.abs().max(b.abs()).max(c.abs()).max(1e-300);
    if denom.abs() <= 1e-9 * scale {
        return c;
    }
    let ext = c - (c - b) * (c - b) / denom;
    // Reject wild extrapolations: keep within the recent bracket.
    if (ext - c).abs() > (c - b).abs() * 10.0 {
        c
    } else {
        ext
    }
}

pub fn classify_infinity(
    pair: &EntirePair,
    config: &ClassifyConfig,
) -> Result<CaseClassification, SlError> {
    if pair.c1_identically_zero() {
        return Ok(CaseClassification {
            case: Case::DegeneratePair,
            b_inf: 0.0,
            dhat_inf: 0.0,
            d_inf: None,
        });
    }
    // Evaluate tau along the ladder; entire functions of exponential type
    // overflow f64 quickly, so keep the valid prefix.
    let mut ys: Vec<f64> = Vec::new();
    let mut taus: Vec<Complex64> = Vec::new();
    let mut first_failure: Option<String> = None;
    for &y in &config.ladder {
        match pair.tau(Complex64::new(0.0, y)) {
            Ok(ExtComplex::Finite(t)) => {
                ys.push(y);
                taus.push(t);
            }
            Ok(ExtComplex::Infinity) => {
                first_failure = Some(format!("tau(i*{y:e}) is infinite"));
                break;
            }
            Err(e) => {
                first_failure = Some(format!("tau(i*{y:e}) failed: {e}"));
                break;
            }
        }
    }
    if ys.len() < 3 {
        let samples = ys
            .iter()
            .zip(&taus)
            .map(|(y, t)| format!("y={y:e}: tau={t}"))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(SlError::NonConvergent {
            what: "case classification at infinity",
            detail: format!(
                "only {} usable ladder points ({}){}",
                ys.len(),
                samples,
                first_failure
                    .map(|f| format!("; {f}"))
                    .unwrap_or_default()
            ),
        });
    }

    let b: Vec<f64> = ys.iter().zip(&taus).map(|(y, t)| t.im / y).collect();
    let n = b.len();
    let b_scale = b[0].abs().max(1.0);
    let b_nonzero = {
        let tail_stable = stabilized(b[n - 1], b[n - 2], 1e-2);
        let shrinking = (1..n).all(|j| b[j].abs() <= b[j - 1].abs() * 0.9 + 1e-300)
            || b[n - 1].abs() <= 1e-12 * b_scale;
        if b[n - 1].abs() <= 1e-12 * b_scale {
            false
        } else if tail_stable && b[n - 1].abs() > 1e-6 * b_scale {
            true
        } else if shrinking {
            false
        } else {
            let samples = ys
                .iter()
                .zip(&b)
                .map(|(y, v)| format!("y={y:e}: Im tau/y={v:e}"))
                .collect::<Vec<_>>()
                .join("; ");
            return Err(SlError::NonConvergent {
                what: "limit of tau(iy)/(iy)",
                detail: samples,
            });
        }
    };
    if b_nonzero {
        return Ok(CaseClassification {
            case: Case::Case1,
            b_inf: aitken(&b),
            dhat_inf: f64::INFINITY,
            d_inf: None,
        });
    }

    // B = 0: decide whether dhat = y Im tau(iy) stays bounded.
    let dhat: Vec<f64> = ys.iter().zip(&taus).map(|(y, t)| y * t.im).collect();
    let growing = (1..n).all(|j| dhat[j] >= dhat[j - 1] - 1e-300)
        && dhat[n - 1] >= config.growth_factor * dhat[0].max(1e-300);
    if growing {
        return Ok(CaseClassification {
            case: Case::Case3,
            b_inf: 0.0,
            dhat_inf: f64::INFINITY,
            d_inf: None,
        });
    }
    let re: Vec<f64> = taus.iter().map(|t| t.re).collect();
    let dhat_stable = stabilized(dhat[n - 1], dhat[n - 2], 1e-2)
        || dhat[n - 1].abs() <= 1e-9 * dhat[0].abs().max(1.0);
    let re_stable = stabilized(re[n - 1], re[n - 2], 1e-2)
        || (re[n - 1] - re[n - 2]).abs() <= 1e-9 * re[0].abs().max(1.0);
    if dhat_stable && re_stable {
        return Ok(CaseClassification {
            case: Case::Case2,
            b_inf: 0.0,
            dhat_inf: aitken(&dhat),
            d_inf: Some(aitken(&re)),
        });
    }
    let samples = ys
        .iter()
        .zip(&dhat)
        .map(|(y, v)| format!("y={y:e}: y*Im tau={v:e}"))
        .collect::<Vec<_>>()
        .join("; ");
    Err(SlError::NonConvergent {
        what: "limit of y*Im tau(iy)",
        detail: samples,
    })
}

/// Boundary relation satisfied in the limit by the expansion of any function
/// in the range of the spectral transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaRelation {
    /// Trace of the solution vanishes at b.
    Gamma0Zero,
    /// Second trace is coupled to the first: Gamma1 = d_inf * Gamma0.
    Robin { d_inf: f64 },
    /// Both traces vanish at b.
    BothZero,
}

pub fn eta_relation(class: &CaseClassification) -> EtaRelation {
    match class.case {
        Case::Case1 | Case::DegeneratePair => EtaRelation::Gamma0Zero,
        Case::Case2 => EtaRelation::Robin {
            d_inf: class.d_inf.unwrap_or(0.0),
        },
        Case::Case3 => EtaRelation::BothZero,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c0: &str, c1: &str) -> EntirePair {
        EntirePair::new(Expr::parse(c0).unwrap(), Expr::parse(c1).unwrap()).unwrap()
    }

    #[test]
    fn golden_pair_passes() {
        let p = pair("lambda", "-1");
        let r = validate_pair(&p, &SamplingPlan::default());
        assert!(r.pass, "{r:?}");
        assert!(p.realness);
        // At lambda = i the orientation term equals Im(lambda) exactly.
        let lam = Complex64::new(0.0, 1.0);
        let (c0, c1) = p.eval(lam).unwrap();
        assert!(((c1 * c0.conj()).im - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_pair_passes() {
        let p = EntirePair::from_angle(1.0);
        let r = validate_pair(&p, &SamplingPlan::default());
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn reversed_orientation_fails() {
        // tau = 1/lambda maps the upper half-plane to the lower one.
        let p = pair("-1", "lambda");
        let r = validate_pair(&p, &SamplingPlan::default());
        assert!(!r.pass, "{r:?}");
        assert!(r.nevanlinna_violation > 1e-3);
    }

    #[test]
    fn tau_values() {
        let p = pair("lambda", "-1");
        let lam = Complex64::new(0.0, 1.0);
        assert_eq!(p.tau(lam).unwrap(), ExtComplex::Finite(lam));

        let z = pair("0", "1");
        assert_eq!(
            z.tau(lam).unwrap(),
            ExtComplex::Finite(Complex64::new(0.0, 0.0))
        );

        let d = pair("1", "0");
        assert_eq!(d.tau(lam).unwrap(), ExtComplex::Infinity);
    }

    #[test]
    fn classify_linear_tau_is_case1() {
        let p = pair("lambda", "-1");
        let c = classify_infinity(&p, &ClassifyConfig::default()).unwrap();
        assert_eq!(c.case, Case::Case1);
        assert!((c.b_inf - 1.0).abs() < 1e-12, "b_inf = {}", c.b_inf);
    }

    #[test]
    fn classify_constant_tau_is_case2() {
        let p = EntirePair::from_angle(1.0);
        let c = classify_infinity(&p, &ClassifyConfig::default()).unwrap();
        assert_eq!(c.case, Case::Case2);
        assert_eq!(c.b_inf, 0.0);
        assert!(c.dhat_inf.abs() < 1e-12);
        let d = c.d_inf.unwrap();
        assert!((d + 1.0 / (1.0f64).tan()).abs() < 1e-12, "d_inf = {d}");
    }

    #[test]
    fn classify_reciprocal_tau_is_case2_with_unit_dhat() {
        // tau = -1/lambda: y Im tau(iy) = 1 for every y.
        let p = pair("1", "lambda");
        let c = classify_infinity(&p, &ClassifyConfig::default()).unwrap();
        assert_eq!(c.case, Case::Case2);
        assert!((c.dhat_inf - 1.0).abs() < 1e-12);
        assert!(c.d_inf.unwrap().abs() < 1e-12);
    }

    #[test]
    fn classify_cotangent_tau_is_case3_on_small_ladder() {
        // tau = -pi cot(pi lambda): tau(iy) -> i pi, so y Im tau grows like
        // pi y.  cosh overflows past y ~ 230, hence the small ladder.
        let p = pair("pi * cos(pi * lambda)", "sin(pi * lambda)");
        let cfg = ClassifyConfig {
            ladder: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            growth_factor: 10.0,
        };
        let c = classify_infinity(&p, &cfg).unwrap();
        assert_eq!(c.case, Case::Case3);
        assert!(c.dhat_inf.is_infinite());
    }

    #[test]
    fn classify_overflowing_ladder_errors() {
        let p = pair("pi * cos(pi * lambda)", "sin(pi * lambda)");
        let err = classify_infinity(&p, &ClassifyConfig::default()).unwrap_err();
        assert!(matches!(err, SlError::NonConvergent { .. }), "{err}");
    }

    #[test]
    fn degenerate_pair_detected() {
        let p = pair("1", "0");
        let c = classify_infinity(&p, &ClassifyConfig::default()).unwrap();
        assert_eq!(c.case, Case::DegeneratePair);
        assert_eq!(eta_relation(&c), EtaRelation::Gamma0Zero);
    }

    #[test]
    fn eta_mapping_follows_case() {
        let mk = |case| CaseClassification {
            case,
            b_inf: 0.0,
            dhat_inf: 0.0,
            d_inf: Some(2.5),
        };
        assert_eq!(eta_relation(&mk(Case::Case1)), EtaRelation::Gamma0Zero);
        assert_eq!(
            eta_relation(&mk(Case::Case2)),
            EtaRelation::Robin { d_inf: 2.5 }
        );
        assert_eq!(eta_relation(&mk(Case::Case3)), EtaRelation::BothZero);
    }

    #[test]
    fn classification_invariant_under_real_shift() {
        // tau = lambda and tau = lambda + 3 give the same case and B.
        let p = pair("lambda", "-1");
        let q = pair("lambda + 3", "-1");
        let cp = classify_infinity(&p, &ClassifyConfig::default()).unwrap();
        let cq = classify_infinity(&q, &ClassifyConfig::default()).unwrap();
        assert_eq!(cp.case, cq.case);
        assert!((cp.b_inf - cq.b_inf).abs() < 1e-10);
    }

    #[test]
    fn rescaled_pair_same_tau_and_case() {
        // Multiplying both components by e^lambda leaves tau untouched.
        let p = pair("lambda", "-1");
        let g = pair("lambda * exp(lambda)", "-exp(lambda)");
        for im in [0.5, 2.0, -1.5] {
            let lam = Complex64::new(0.3, im);
            let a = p.tau(lam).unwrap().finite().unwrap();
            let b = g.tau(lam).unwrap().finite().unwrap();
            assert!((a - b).norm() < 1e-12 * a.norm().max(1.0));
        }
        // |exp(iy)| = 1, so the rescaled pair survives the default ladder.
        let cg = classify_infinity(&g, &ClassifyConfig::default()).unwrap();
        assert_eq!(cg.case, Case::Case1);
        assert!((cg.b_inf - 1.0).abs() < 1e-10);
    }

    #[test]
    fn both_zero_pair_rejected() {
        let e = EntirePair::new(Expr::parse("0").unwrap(), Expr::parse("0").unwrap());
        assert!(matches!(e, Err(SlError::Pair(_))));
    }
}
