//! Eigenvalue location and residues: the poles of m are the real zeros of
//! the entire denominator Psi, refined from sign-change brackets and
//! certified complete against an argument-principle count over a rectangle
//! enclosing the window.

use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::characteristic::CharacteristicPair;
use crate::problem::SlError;
use crate::quad;

/// An eigenvalue t with the residue data of m at t.
///
/// `xi` is the jump of the spectral function: xi = -res_t m > 0.
/// Serializes as {"t": .., "xi": ..} only.
#[derive(Debug, Clone, Copy)]
pub struct Eigenvalue {
    pub t: f64,
    pub xi: f64,
    pub psi_deriv: f64,
    /// |Psi'(t)| * max(1,|t|) / (|Phi(t)| + 1): a scale-free simplicity
    /// measure; values near zero indicate a multiple zero.
    pub multiplicity_check: f64,
}

impl Serialize for Eigenvalue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Eigenvalue", 2)?;
        st.serialize_field("t", &self.t)?;
        st.serialize_field("xi", &self.xi)?;
        st.end()
    }
}

#[derive(Debug, Clone, Default)]
pub struct ScanDiagnostics {
    pub psi_evaluations: usize,
    pub grid_points: usize,
    pub refinement_levels: u32,
    pub sign_changes: usize,
    pub tangential_candidates: usize,
    /// Refined points excluded because Phi and Psi vanish together.
    pub spurious_common_zeros: Vec<f64>,
    /// Winding number / 2 pi of Psi around the window rectangle.
    pub contour_count: Option<f64>,
}

/// Sorted eigenvalues in a window together with scan diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteSpectralFunction {
    pub window: (f64, f64),
    pub eigenvalues: Vec<Eigenvalue>,
    #[serde(skip)]
    pub diagnostics: ScanDiagnostics,
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Initial grid spacing as a fraction of the expected zero spacing.
    pub theta: f64,
    /// Maximum grid halvings while waiting for the sign-change count to
    /// stabilize.
    pub max_refinements: u32,
    /// Cross-check completeness with the argument principle.
    pub contour_check: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            theta: 0.5,
            max_refinements: 14,
            contour_check: true,
        }
    }
}

struct PsiEval<'a> {
    cp: &'a CharacteristicPair,
    count: usize,
}

impl PsiEval<'_> {
    fn phi_psi(&mut self, lambda: Complex64) -> Result<(Complex64, Complex64), SlError> {
        self.count += 1;
        self.cp.eval(lambda)
    }

    fn psi_real(&mut self, t: f64) -> Result<f64, SlError> {
        let (_, psi) = self.phi_psi(Complex64::new(t, 0.0))?;
        Ok(psi.re)
    }
}

/// Expected spacing scale of sqrt(t): the zero density of Psi grows like
/// S / pi in sqrt(t), with S the weighted travel time of the interval.
fn travel_time(cp: &CharacteristicPair) -> Result<f64, SlError> {
    let prob = cp.problem();
    let (a, b) = (prob.a, cp.b_eff());
    let knots = prob.breakpoints(a, b);
    let (s, _) = quad::integrate(
        |x, side| {
            let d = prob
                .delta
                .eval_real_sided(x, side, 0.0)
                .map_err(|e| quad::QuadError::Integrand { x, source: e })?;
            let p = prob
                .p
                .eval_real_sided(x, side, 0.0)
                .map_err(|e| quad::QuadError::Integrand { x, source: e })?;
            Ok(Complex64::new((d / p).max(0.0).sqrt(), 0.0))
        },
        a,
        b,
        &knots,
        1e-9,
    )?;
    Ok(s.re.max(1e-6))
}

/// Locates all eigenvalues in `window` and computes their residues.
pub fn find_eigenvalues(
    cp: &CharacteristicPair,
    window: (f64, f64),
    opts: &ScanOptions,
) -> Result<DiscreteSpectralFunction, SlError> {
    let (lo, hi) = window;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(SlError::BadInterval { a: lo, b: hi });
    }
    let mut ev = PsiEval { cp, count: 0 };
    let travel = travel_time(cp)?;
    let mut diag = ScanDiagnostics::default();

    // March with spacing theta * (local zero spacing), halving theta until
    // the number of sign changes is the same on two consecutive levels.
    let mut theta = opts.theta;
    let mut prev_count: Option<usize> = None;
    let mut grid: Vec<(f64, f64)> = Vec::new();
    let mut stabilized = false;
    for level in 0..=opts.max_refinements {
        grid.clear();
        let mut t = lo;
        loop {
            grid.push((t, ev.psi_real(t)?));
            if t >= hi {
                break;
            }
            let h = theta * 2.0 * std::f64::consts::PI * t.abs().max(1.0).sqrt() / travel;
            t = (t + h).min(hi);
        }
        let count = grid
            .windows(2)
            .filter(|w| w[0].1 != 0.0 && w[0].1.signum() != w[1].1.signum())
            .count();
        diag.refinement_levels = level;
        diag.grid_points = grid.len();
        if prev_count == Some(count) {
            stabilized = true;
            break;
        }
        prev_count = Some(count);
        theta *= 0.5;
    }
    if !stabilized {
        return Err(SlError::NonConvergent {
            what: "sign-change count under grid refinement",
            detail: format!(
                "count still changing after {} halvings (last {:?})",
                opts.max_refinements, prev_count
            ),
        });
    }
    diag.sign_changes = prev_count.unwrap_or(0);

    // Refine each bracket.
    let root_tol = cp.problem().tol.root;
    let mut roots: Vec<f64> = Vec::new();
    for w in grid.windows(2) {
        let ((ta, fa), (tb, fb)) = (w[0], w[1]);
        if fa == 0.0 {
            roots.push(ta);
            continue;
        }
        if fa.signum() != fb.signum() {
            roots.push(refine_bracket(&mut ev, ta, tb, fa, fb, root_tol)?);
        }
    }
    if let Some(&(tl, fl)) = grid.last() {
        if fl == 0.0 {
            roots.push(tl);
        }
    }

    // Tangential zeros: interior local minima of |Psi| that dip below
    // 1e-8 * scale without a sign change.
    let psi_scale = grid.iter().fold(0.0f64, |m, &(_, f)| m.max(f.abs()));
    for i in 1..grid.len().saturating_sub(1) {
        let (tm, fm) = grid[i];
        let (_, fl) = grid[i - 1];
        let (_, fr) = grid[i + 1];
        if fm.abs() < fl.abs() && fm.abs() < fr.abs() && fm != 0.0
            && fl.signum() == fr.signum()
            && fm.abs() < 1e-8 * psi_scale
        {
            diag.tangential_candidates += 1;
            // A genuine tangential zero has even multiplicity, hence is not
            // simple; report it unless it is a spurious common zero.
            let (phi, psi) = ev.phi_psi(Complex64::new(tm, 0.0))?;
            let scale = phi.norm() + psi.norm() + 1.0;
            if phi.norm() < 1e-10 * scale && psi.norm() < 1e-10 * scale {
                diag.spurious_common_zeros.push(tm);
            } else {
                return Err(SlError::NonSimpleZero {
                    t: tm,
                    psi_deriv: 0.0,
                });
            }
        }
    }

    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots.dedup_by(|x, y| (*x - *y).abs() <= 10.0 * root_tol * x.abs().max(1.0));

    // Drop refined points where Phi vanishes along with Psi: the transform
    // has no pole there.
    let mut eigenvalues = Vec::with_capacity(roots.len());
    for &t in &roots {
        let (phi, _) = ev.phi_psi(Complex64::new(t, 0.0))?;
        let dpsi = psi_derivative(&mut ev, t)?;
        let scale = phi.norm() + dpsi.abs() * t.abs().max(1.0) + 1.0;
        if phi.norm() < 1e-10 * scale {
            diag.spurious_common_zeros.push(t);
            continue;
        }
        eigenvalues.push(residue_from_parts(t, phi, dpsi)?);
    }

    if opts.contour_check {
        let n_zeros = eigenvalues.len() + diag.spurious_common_zeros.len();
        let winding = contour_count(&mut ev, lo, hi, &roots)?;
        diag.contour_count = Some(winding);
        if (winding - n_zeros as f64).abs() > 0.25 {
            return Err(SlError::CountMismatch {
                lo,
                hi,
                scanned: n_zeros,
                contour: winding,
            });
        }
    }

    diag.psi_evaluations = ev.count;
    Ok(DiscreteSpectralFunction {
        window,
        eigenvalues,
        diagnostics: diag,
    })
}

/// Safeguarded secant/bisection refinement inside a sign-change bracket.
fn refine_bracket(
    ev: &mut PsiEval,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    root_tol: f64,
) -> Result<f64, SlError> {
    debug_assert!(fa.signum() != fb.signum());
    for _ in 0..200 {
        if (b - a).abs() <= root_tol * a.abs().max(1.0) {
            break;
        }
        // Secant proposal, clipped into the open bracket; fall back to the
        // midpoint when it degenerates.
        let mut m = b - fb * (b - a) / (fb - fa);
        let width = b - a;
        if !m.is_finite() || m <= a + 0.01 * width || m >= b - 0.01 * width {
            m = 0.5 * (a + b);
        }
        let fm = ev.psi_real(m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
            fb = fm;
        }
    }
    let (mut t, mut ft) = if fa.abs() <= fb.abs() { (a, fa) } else { (b, fb) };
    // Newton polish with the complex-step derivative pushes the root to
    // machine precision; the guarded steps never leave the widened bracket.
    let width = b - a;
    for _ in 0..3 {
        let dpsi = psi_derivative(ev, t)?;
        if dpsi == 0.0 {
            break;
        }
        let step = ft / dpsi;
        let next = t - step;
        if !next.is_finite() || next < a - width || next > b + width {
            break;
        }
        t = next;
        if step.abs() <= 1e-15 * t.abs().max(1.0) {
            break;
        }
        ft = ev.psi_real(t)?;
        if ft == 0.0 {
            break;
        }
    }
    Ok(t)
}

/// Psi'(t) by the complex step: the evaluation path is analytic in lambda
/// and real on the real axis, so Im Psi(t + ih) / h differentiates the
/// computed function itself to O(h^2) with no cancellation.
fn psi_derivative(ev: &mut PsiEval, t: f64) -> Result<f64, SlError> {
    let h = 1e-8 * t.abs().max(1.0);
    let (_, psi) = ev.phi_psi(Complex64::new(t, h))?;
    Ok(psi.im / h)
}

fn residue_from_parts(t: f64, phi: Complex64, dpsi: f64) -> Result<Eigenvalue, SlError> {
    let multiplicity_check = dpsi.abs() * t.abs().max(1.0) / (phi.norm() + 1.0);
    if multiplicity_check <= 1e-10 {
        return Err(SlError::NonSimpleZero { t, psi_deriv: dpsi });
    }
    // res_t m = Phi(t) / Psi'(t); the spectral jump is its negative.
    let xi = -phi.re / dpsi;
    if xi <= 0.0 {
        return Err(SlError::ResidueSign { t, xi });
    }
    Ok(Eigenvalue {
        t,
        xi,
        psi_deriv: dpsi,
        multiplicity_check,
    })
}

/// Residue data of m at a refined zero t of Psi.
pub fn residue_at(cp: &CharacteristicPair, t: f64) -> Result<Eigenvalue, SlError> {
    let mut ev = PsiEval { cp, count: 0 };
    let (phi, _) = ev.phi_psi(Complex64::new(t, 0.0))?;
    let dpsi = psi_derivative(&mut ev, t)?;
    residue_from_parts(t, phi, dpsi)
}

/// Winding number of Psi around the rectangle [lo - pad, hi + pad] x
/// [-H, H], divided by 2 pi: the number of zeros inside (Psi is entire and
/// zero-free on the contour by construction of pad).
fn contour_count(
    ev: &mut PsiEval,
    lo: f64,
    hi: f64,
    roots: &[f64],
) -> Result<f64, SlError> {
    let span = hi - lo;
    // Keep the contour away from located zeros.
    let mut pad = 1e-3 * span;
    for _ in 0..40 {
        let clear = roots
            .iter()
            .all(|&r| (r - (lo - pad)).abs() > 2.0 * pad && (r - (hi + pad)).abs() > 2.0 * pad);
        if clear {
            break;
        }
        pad *= 0.5;
    }
    let h = (0.02 * span).max(0.5);
    let corners = [
        Complex64::new(lo - pad, -h),
        Complex64::new(hi + pad, -h),
        Complex64::new(hi + pad, h),
        Complex64::new(lo - pad, h),
        Complex64::new(lo - pad, -h),
    ];
    let mut total = 0.0f64;
    // Initial nodes per edge: enough that each expected zero contributes
    // at most ~pi of phase per segment.
    let n0 = (roots.len() * 4).max(16);
    for e in 0..4 {
        total += edge_phase(ev, corners[e], corners[e + 1], n0)?;
    }
    Ok(total / (2.0 * std::f64::consts::PI))
}

/// Total change of arg Psi along the segment, subdividing until each piece
/// turns by at most pi/2.
fn edge_phase(
    ev: &mut PsiEval,
    z0: Complex64,
    z1: Complex64,
    n0: usize,
) -> Result<f64, SlError> {
    let mut stack: Vec<(f64, Complex64, f64, Complex64, u32)> = Vec::new();
    let value = |ev: &mut PsiEval, s: f64| -> Result<Complex64, SlError> {
        let z = z0 + (z1 - z0) * s;
        let (_, psi) = ev.phi_psi(z)?;
        if psi.norm() == 0.0 {
            return Err(SlError::NonConvergent {
                what: "argument principle contour",
                detail: format!("Psi vanishes on the contour at {z}"),
            });
        }
        Ok(psi)
    };
    let mut nodes: Vec<(f64, Complex64)> = Vec::with_capacity(n0 + 1);
    for i in 0..=n0 {
        let s = i as f64 / n0 as f64;
        nodes.push((s, value(ev, s)?));
    }
    let mut total = 0.0;
    for w in nodes.windows(2) {
        stack.push((w[0].0, w[0].1, w[1].0, w[1].1, 0));
    }
    while let Some((sa, va, sb, vb, depth)) = stack.pop() {
        let dphase = (vb / va).arg();
        // |dphase| < pi/2 guarantees the branch of the increment.
        if dphase.abs() <= std::f64::consts::FRAC_PI_2 {
            total += dphase;
            continue;
        }
        if depth >= 40 {
            return Err(SlError::NonConvergent {
                what: "argument principle contour",
                detail: format!(
                    "phase step {dphase:.3} not resolved between s={sa} and s={sb}"
                ),
            });
        }
        let sm = 0.5 * (sa + sb);
        let vm = value(ev, sm)?;
        stack.push((sa, va, sm, vm, depth + 1));
        stack.push((sm, vm, sb, vb, depth + 1));
    }
    Ok(total)
}
