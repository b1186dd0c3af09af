//! Independent brute-force eigenvalue computations used by tests.
//!
//! Two oracles live here.  `bisect_root` nails roots of closed-form
//! characteristic equations (the reference for problems with known
//! transcendental spectra).  `discretize` + `pencil_eigenvalues` build a
//! second-order finite-difference matrix pencil A v = lambda B v for
//! problems whose right boundary pair is affine in lambda,
//!
//! ```text
//! (M0 - lambda N0) y(b) + (M1 - lambda N1) (py')(b) = 0,
//! ```
//!
//! and solve it either densely (QZ, tolerant of singular mass matrices) or
//! through a scaled determinant recurrence with bisection when the grid is
//! too large for a dense solve.  Everything here is deliberately simple and
//! shares no code with the shooting engine; three-digit agreement is the
//! design target, not efficiency.

use crate::nevpair::EntirePair;
use crate::problem::{Problem, RightEndpoint, SlError};
use crate::Complex64;

/// Plain bisection for a continuous function with a sign change.
pub fn bisect_root<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64, SlError> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(SlError::NonConvergent {
            what: "bisection",
            detail: format!("no sign change on [{lo}, {hi}]: f = {flo:e}, {fhi:e}"),
        });
    }
    for _ in 0..240 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Constant and slope of an affine boundary pair: C_j(lambda) = M_j - lambda N_j.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryRow {
    pub m0: f64,
    pub n0: f64,
    pub m1: f64,
    pub n1: f64,
}

/// Extracts (M0, N0, M1, N1) from a pair that is affine in lambda, erring
/// when it is not.  Affinity is checked by sampling at real and complex
/// points away from the interpolation nodes.
pub fn affine_pair_parts(pair: &EntirePair) -> Result<BoundaryRow, SlError> {
    let at = |lam: Complex64| -> Result<(Complex64, Complex64), SlError> {
        pair.eval(lam)
            .map_err(|e| SlError::Pair(format!("pair evaluation failed: {e}")))
    };
    let (c00, c10) = at(Complex64::new(0.0, 0.0))?;
    let (c01, c11) = at(Complex64::new(1.0, 0.0))?;
    let row = BoundaryRow {
        m0: c00.re,
        n0: (c00 - c01).re,
        m1: c10.re,
        n1: (c10 - c11).re,
    };
    let probes = [
        Complex64::new(-3.0, 0.0),
        Complex64::new(2.5, 0.0),
        Complex64::new(7.0, 0.0),
        Complex64::new(0.0, 4.0),
        Complex64::new(1.0, 2.0),
    ];
    let scale = 1.0 + row.m0.abs() + row.n0.abs() + row.m1.abs() + row.n1.abs();
    for lam in probes {
        let (v0, v1) = at(lam)?;
        let p0 = Complex64::new(row.m0, 0.0) - lam * row.n0;
        let p1 = Complex64::new(row.m1, 0.0) - lam * row.n1;
        let local = scale * (1.0 + lam.norm());
        if (v0 - p0).norm() > 1e-8 * local || (v1 - p1).norm() > 1e-8 * local {
            return Err(SlError::Unsupported {
                what: "matrix pencil oracle",
                detail: "right boundary pair is not affine in lambda",
            });
        }
    }
    Ok(row)
}

/// Finite-difference generalized eigenvalue pencil A v = lambda B v.
///
/// The leading block is a symmetric tridiagonal stiffness matrix against a
/// nonnegative diagonal mass.  A lambda-affine right boundary condition is
/// kept exactly by one extra companion unknown w = (py')(b): the last
/// stiffness row balances the boundary half cell against -w, and the border
/// row (M0 - lambda N0) y_end + (M1 - lambda N1) w = 0 closes the system.
#[derive(Debug, Clone)]
pub struct Pencil {
    a_diag: Vec<f64>,
    a_off: Vec<f64>,
    b_diag: Vec<f64>,
    bc: Option<BoundaryRow>,
    /// Grid intervals behind `discretize`; 0 for hand-built pencils.
    pub n: usize,
}

impl Pencil {
    /// A bare tridiagonal pencil with diagonal mass and no boundary border.
    pub fn from_parts(a_diag: Vec<f64>, a_off: Vec<f64>, b_diag: Vec<f64>) -> Result<Self, SlError> {
        if a_diag.is_empty() || a_off.len() + 1 != a_diag.len() || b_diag.len() != a_diag.len() {
            return Err(SlError::Unsupported {
                what: "pencil assembly",
                detail: "inconsistent tridiagonal dimensions",
            });
        }
        for (i, &m) in b_diag.iter().enumerate() {
            if m < 0.0 {
                return Err(SlError::NegativeDelta {
                    x: i as f64,
                    value: m,
                });
            }
        }
        Ok(Pencil {
            a_diag,
            a_off,
            b_diag,
            bc: None,
            n: 0,
        })
    }

    /// Total number of unknowns (grid values plus the companion, if any).
    pub fn dim(&self) -> usize {
        self.a_diag.len() + usize::from(self.bc.is_some())
    }
}

/// Builds the pencil for a problem with a finite right endpoint and a
/// lambda-affine right pair on an n-interval uniform grid.
///
/// Fluxes use midpoint samples of p; the q and delta terms lump the cell
/// averages from quarter-point samples, which keeps jump discontinuities
/// aligned with grid nodes second-order accurate.  The left condition
/// cos(B) y(a) + sin(B) (py')(a) = 0 is folded into the first row (or
/// eliminates the first node entirely when sin B = 0).
pub fn discretize(problem: &Problem, bc: BoundaryRow, n: usize) -> Result<Pencil, SlError> {
    if n < 16 {
        return Err(SlError::Unsupported {
            what: "pencil grid",
            detail: "need at least 16 intervals",
        });
    }
    let b = match problem.b {
        RightEndpoint::Finite(b) => b,
        RightEndpoint::Infinite => {
            return Err(SlError::Unsupported {
                what: "pencil grid",
                detail: "right endpoint must be finite (truncate first)",
            })
        }
    };
    let a = problem.a;
    let h = (b - a) / n as f64;
    let sample = |e: &crate::expr::Expr, name: &'static str, x: f64| -> Result<f64, SlError> {
        e.eval_real(x, 0.0)
            .map_err(|source| SlError::Coefficient { name, x, source })
    };

    // Midpoint fluxes p_{i+1/2}.
    let mut p_mid = Vec::with_capacity(n);
    for i in 0..n {
        let x = a + (i as f64 + 0.5) * h;
        let v = sample(&problem.p, "p", x)?;
        if !(v > 0.0) {
            return Err(SlError::NonPositiveP { x, value: v });
        }
        p_mid.push(v);
    }
    // Cell averages of q and delta around each node (half cells at the ends).
    let mut q_cell = Vec::with_capacity(n + 1);
    let mut d_cell = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = a + i as f64 * h;
        let (ql, qr, dl, dr);
        if i == 0 {
            qr = sample(&problem.q, "q", x + 0.25 * h)?;
            dr = sample(&problem.delta, "delta", x + 0.25 * h)?;
            ql = qr;
            dl = dr;
        } else if i == n {
            ql = sample(&problem.q, "q", x - 0.25 * h)?;
            dl = sample(&problem.delta, "delta", x - 0.25 * h)?;
            qr = ql;
            dr = dl;
        } else {
            ql = sample(&problem.q, "q", x - 0.25 * h)?;
            qr = sample(&problem.q, "q", x + 0.25 * h)?;
            dl = sample(&problem.delta, "delta", x - 0.25 * h)?;
            dr = sample(&problem.delta, "delta", x + 0.25 * h)?;
        }
        let d = 0.5 * (dl + dr);
        if d < 0.0 {
            return Err(SlError::NegativeDelta { x, value: d });
        }
        q_cell.push(0.5 * (ql + qr));
        d_cell.push(d);
    }

    let sin_b = problem.left_angle.sin();
    let dirichlet_left = sin_b.abs() <= 1e-12;
    let first = usize::from(dirichlet_left);
    let m = n + 1 - first;
    let mut a_diag = Vec::with_capacity(m);
    let mut a_off = Vec::with_capacity(m - 1);
    let mut b_diag = Vec::with_capacity(m);
    for i in first..=n {
        let (diag, mass) = if i == 0 {
            // Half cell at a with the Robin flux from the left condition.
            let cot = problem.left_angle.cos() / sin_b;
            (
                p_mid[0] / h - cot + 0.5 * h * q_cell[0],
                0.5 * h * d_cell[0],
            )
        } else if i == n {
            // Half cell at b balanced against the companion unknown.
            (
                p_mid[n - 1] / h + 0.5 * h * q_cell[n],
                0.5 * h * d_cell[n],
            )
        } else {
            (
                (p_mid[i - 1] + p_mid[i]) / h + h * q_cell[i],
                h * d_cell[i],
            )
        };
        a_diag.push(diag);
        b_diag.push(mass);
        if i < n {
            a_off.push(-p_mid[i] / h);
        }
    }
    Ok(Pencil {
        a_diag,
        a_off,
        b_diag,
        bc: Some(bc),
        n,
    })
}

// LAPACK generalized nonsymmetric eigensolver (QZ), used for dense pencils.
extern "C" {
    fn dggev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        b: *mut f64,
        ldb: *const i32,
        alphar: *mut f64,
        alphai: *mut f64,
        beta: *mut f64,
        vl: *mut f64,
        ldvl: *const i32,
        vr: *mut f64,
        ldvr: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
}

/// Dense assembly of (A, B) in column-major order.
fn assemble_dense(p: &Pencil) -> (Vec<f64>, Vec<f64>, usize) {
    let m = p.a_diag.len();
    let dim = p.dim();
    let mut a = vec![0.0; dim * dim];
    let mut b = vec![0.0; dim * dim];
    let idx = |r: usize, c: usize| r + c * dim;
    for i in 0..m {
        a[idx(i, i)] = p.a_diag[i];
        b[idx(i, i)] = p.b_diag[i];
        if i + 1 < m {
            a[idx(i, i + 1)] = p.a_off[i];
            a[idx(i + 1, i)] = p.a_off[i];
        }
    }
    if let Some(bc) = &p.bc {
        let w = dim - 1;
        a[idx(m - 1, w)] = -1.0;
        a[idx(w, m - 1)] = bc.m0;
        a[idx(w, w)] = bc.m1;
        b[idx(w, m - 1)] = bc.n0;
        b[idx(w, w)] = bc.n1;
    }
    (a, b, dim)
}

fn dense_eigenvalues(p: &Pencil, window: (f64, f64)) -> Result<Vec<f64>, SlError> {
    let (mut a, mut b, dim) = assemble_dense(p);
    let n = dim as i32;
    let mut alphar = vec![0.0f64; dim];
    let mut alphai = vec![0.0f64; dim];
    let mut beta = vec![0.0f64; dim];
    let mut dummy = [0.0f64; 1];
    let one = 1i32;
    let jobv = b'N';
    let mut info = 0i32;
    // Workspace query, then the real solve.
    let mut work_len = -1i32;
    let mut work = vec![0.0f64; 1];
    unsafe {
        dggev_(
            &jobv,
            &jobv,
            &n,
            a.as_mut_ptr(),
            &n,
            b.as_mut_ptr(),
            &n,
            alphar.as_mut_ptr(),
            alphai.as_mut_ptr(),
            beta.as_mut_ptr(),
            dummy.as_mut_ptr(),
            &one,
            dummy.as_mut_ptr(),
            &one,
            work.as_mut_ptr(),
            &work_len,
            &mut info,
        );
    }
    if info != 0 {
        return Err(SlError::NonConvergent {
            what: "dense pencil solve",
            detail: format!("workspace query failed with info = {info}"),
        });
    }
    work_len = work[0] as i32;
    work = vec![0.0f64; work_len.max(8 * n) as usize];
    unsafe {
        dggev_(
            &jobv,
            &jobv,
            &n,
            a.as_mut_ptr(),
            &n,
            b.as_mut_ptr(),
            &n,
            alphar.as_mut_ptr(),
            alphai.as_mut_ptr(),
            beta.as_mut_ptr(),
            dummy.as_mut_ptr(),
            &one,
            dummy.as_mut_ptr(),
            &one,
            work.as_mut_ptr(),
            &work_len,
            &mut info,
        );
    }
    if info != 0 {
        return Err(SlError::NonConvergent {
            what: "dense pencil solve",
            detail: format!("QZ iteration failed with info = {info}"),
        });
    }
    let beta_scale = beta.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    if beta_scale == 0.0 {
        return Err(SlError::NonConvergent {
            what: "dense pencil solve",
            detail: "pencil is numerically defective (all beta zero)".to_string(),
        });
    }
    let mut out = Vec::new();
    for i in 0..dim {
        // Infinite eigenvalues from mass-null directions have beta ~ 0.
        if beta[i].abs() <= 1e-10 * beta_scale {
            continue;
        }
        let lam = alphar[i] / beta[i];
        let imag = alphai[i] / beta[i];
        if imag.abs() > 1e-6 * lam.abs().max(1.0) {
            continue;
        }
        if lam >= window.0 && lam <= window.1 {
            out.push(lam);
        }
    }
    out.sort_by(|u, v| u.partial_cmp(v).unwrap());
    Ok(out)
}

/// Characteristic determinant det(A - lambda B) up to a positive factor,
/// through the scaled three-term minor recurrence.  Only the sign and the
/// zero set are meaningful.
fn det_scaled(p: &Pencil, lam: f64) -> f64 {
    let m = p.a_diag.len();
    let mut prev = 1.0f64; // D_{-1}
    let mut cur = p.a_diag[0] - lam * p.b_diag[0]; // D_0
    let rescale = |u: &mut f64, v: &mut f64| {
        let s = u.abs().max(v.abs());
        if s > 1e150 {
            *u *= 1e-150;
            *v *= 1e-150;
        } else if s < 1e-150 && s > 0.0 {
            *u *= 1e150;
            *v *= 1e150;
        }
    };
    for i in 1..m {
        let d = p.a_diag[i] - lam * p.b_diag[i];
        let e = p.a_off[i - 1];
        let next = d * cur - e * e * prev;
        prev = cur;
        cur = next;
        rescale(&mut prev, &mut cur);
    }
    match &p.bc {
        None => cur,
        // Border expansion: det = c1 D_m + c0 D_{m-1} with the companion
        // column carrying a single -1 in the last stiffness row.
        Some(bc) => {
            let c0 = bc.m0 - lam * bc.n0;
            let c1 = bc.m1 - lam * bc.n1;
            c1 * cur + c0 * prev
        }
    }
}

fn scan_eigenvalues(p: &Pencil, window: (f64, f64)) -> Result<Vec<f64>, SlError> {
    let (lo, hi) = window;
    let span = hi - lo;
    let nudge = 1e-12 * span.max(1.0);
    let eval = |x: f64| {
        let v = det_scaled(p, x);
        if v == 0.0 {
            det_scaled(p, x + nudge)
        } else {
            v
        }
    };
    let mut count_prev = usize::MAX;
    let mut stable = 0usize;
    let mut grid_n = 512usize;
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    loop {
        brackets.clear();
        let mut x0 = lo;
        let mut f0 = eval(x0);
        for i in 1..=grid_n {
            let x1 = lo + span * i as f64 / grid_n as f64;
            let f1 = eval(x1);
            if f0.signum() != f1.signum() {
                brackets.push((x0, x1));
            }
            x0 = x1;
            f0 = f1;
        }
        if brackets.len() == count_prev {
            stable += 1;
            if stable >= 2 {
                break;
            }
        } else {
            stable = 0;
        }
        count_prev = brackets.len();
        grid_n *= 2;
        if grid_n > (1 << 20) {
            return Err(SlError::NonConvergent {
                what: "pencil scan",
                detail: format!(
                    "sign-change count did not stabilize (last count {})",
                    brackets.len()
                ),
            });
        }
    }
    let mut out = Vec::with_capacity(brackets.len());
    for &(blo, bhi) in &brackets {
        let mid = 0.5 * (blo + bhi);
        let tol = 1e-12 * mid.abs().max(1.0);
        out.push(bisect_root(|x| det_scaled(p, x), blo, bhi, tol)?);
    }
    Ok(out)
}

/// Grid size at and below which the dense QZ path is used.
const DENSE_CUTOFF: usize = 600;

/// Real generalized eigenvalues of the pencil inside the window, sorted.
///
/// Small pencils go through dense QZ, which tolerates singular mass
/// matrices and reports the finite spectrum (infinite eigenvalues are
/// filtered by the |beta| threshold).  Large pencils use the determinant
/// sign scan, which never materializes the matrices.
pub fn pencil_eigenvalues(p: &Pencil, window: (f64, f64)) -> Result<Vec<f64>, SlError> {
    if !(window.0 < window.1) {
        return Err(SlError::BadInterval {
            a: window.0,
            b: window.1,
        });
    }
    if p.dim() <= DENSE_CUTOFF {
        dense_eigenvalues(p, window)
    } else {
        scan_eigenvalues(p, window)
    }
}

/// Nearest-neighbor bijective matching of two sorted eigenvalue lists.
/// Returns the largest absolute gap; errors when the counts differ.
pub fn match_sets(xs: &[f64], ys: &[f64]) -> Result<f64, SlError> {
    if xs.len() != ys.len() {
        return Err(SlError::NonConvergent {
            what: "eigenvalue matching",
            detail: format!("count mismatch: {} vs {}", xs.len(), ys.len()),
        });
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(|u, v| u.partial_cmp(v).unwrap());
    ys.sort_by(|u, v| u.partial_cmp(v).unwrap());
    Ok(xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max))
}
