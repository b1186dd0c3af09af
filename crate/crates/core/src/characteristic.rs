//! The entire numerator/denominator pair (Phi, Psi) and the meromorphic
//! function m = Phi / Psi characterizing the boundary value problem.
//!
//! Two construction routes are provided.  The direct route evaluates the
//! fundamental solutions at the right endpoint and applies the boundary pair
//! to the classical traces (y(b), (py')(b)):
//!
//!   Phi = psi(b) C0 + psi^[1](b) C1,   Psi = phi(b) C0 + phi^[1](b) C1.
//!
//! The w-route expresses the same functions through weighted integrals
//! against the lambda = 0 fundamental system,
//!
//!   w1 = 1 + l int psi0 D phi_l    w2 = l int psi0 D psi_l
//!   w3 =   - l int phi0 D phi_l    w4 = 1 - l int phi0 D psi_l,
//!
//! which stay meaningful when b is singular or infinite.  These integrals
//! are the regularized boundary traces of phi_l and psi_l: with
//! G0 y = lim_b (psi0^[1] y - psi0 y^[1]) and G1 y = lim_b (-phi0^[1] y +
//! phi0 y^[1]) one has (w1, w2, w3, w4) = (G0 phi_l, G0 psi_l, G1 phi_l,
//! G1 psi_l).  On a problem declared regular the user pair addresses the
//! classical traces, and (G0; G1) differs from (y(b); y^[1](b)) by an
//! SL(2, R) change of frame, so the w-route applies the frame-converted
//! pair
//!
//!   C0_eff = C0 phi0(b) + C1 phi0^[1](b),
//!   C1_eff = C0 psi0(b) + C1 psi0^[1](b);
//!
//! this makes the two routes produce identical functions, not merely
//! functions with equal zero sets.  On a problem declared quasiregular the
//! regularized traces are the only boundary data available and the pair is
//! applied to them as given.

use num_complex::Complex64;

use crate::nevpair::EntirePair;
use crate::problem::{Problem, Regularity, RightEndpoint, SlError, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CharMode {
    /// Classical traces at a finite regular endpoint.
    RegularDirect,
    /// Regularized traces through the w-integrals.
    QuasiregularW,
}

/// Evaluator of (Phi, Psi) for one problem and one boundary pair.
///
/// Construction integrates and caches the lambda = 0 fundamental system
/// (and, for an infinite endpoint, fixes the truncation point); evaluation
/// at any complex lambda is then independent of other evaluations.
#[derive(Debug)]
pub struct CharacteristicPair {
    problem: Problem,
    pair: EntirePair,
    mode: CharMode,
    b_eff: f64,
    phi0: Trajectory,
    psi0: Trajectory,
    /// (phi0(b), phi0^[1](b), psi0(b), psi0^[1](b)) when the pair must be
    /// converted from classical to regularized traces.
    frame: Option<[f64; 4]>,
}

impl CharacteristicPair {
    pub fn new(problem: Problem, pair: EntirePair, mode: CharMode) -> Result<Self, SlError> {
        let b_eff = match problem.b {
            RightEndpoint::Finite(b) => {
                if mode == CharMode::RegularDirect && problem.regularity != Regularity::Regular {
                    return Err(SlError::Unsupported {
                        what: "direct endpoint evaluation",
                        detail: "problem is declared quasiregular; use the w-route",
                    });
                }
                b
            }
            RightEndpoint::Infinite => {
                if mode == CharMode::RegularDirect {
                    return Err(SlError::Unsupported {
                        what: "direct endpoint evaluation",
                        detail: "right endpoint is infinite; use the w-route",
                    });
                }
                choose_truncation(&problem)?
            }
        };
        let (phi0, psi0) = problem.phi_psi(Complex64::new(0.0, 0.0), b_eff, true)?;
        let frame = if mode == CharMode::QuasiregularW
            && problem.regularity == Regularity::Regular
        {
            let pe = phi0.end_state();
            let se = psi0.end_state();
            Some([pe[0].re, pe[1].re, se[0].re, se[1].re])
        } else {
            None
        };
        Ok(CharacteristicPair {
            problem,
            pair,
            mode,
            b_eff,
            phi0,
            psi0,
            frame,
        })
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn pair(&self) -> &EntirePair {
        &self.pair
    }

    pub fn mode(&self) -> CharMode {
        self.mode
    }

    /// Right end of the interval used by evaluations (the truncation point
    /// when b is infinite).
    pub fn b_eff(&self) -> f64 {
        self.b_eff
    }

    /// Regularized traces (G0 y, G1 y) of a function from its classical end
    /// data (y(b_eff), y^[1](b_eff)), through the cached lambda = 0 system.
    pub fn bracket_traces(&self, y_b: f64, y1_b: f64) -> (f64, f64) {
        let pe = self.phi0.end_state();
        let se = self.psi0.end_state();
        let g0 = se[1].re * y_b - se[0].re * y1_b;
        let g1 = -pe[1].re * y_b + pe[0].re * y1_b;
        (g0, g1)
    }

    /// The boundary pair actually combined with the traces at `lambda`:
    /// frame-converted on regular problems evaluated via the w-route,
    /// as supplied otherwise.
    pub fn effective_pair(&self, lambda: Complex64) -> Result<(Complex64, Complex64), SlError> {
        let (c0, c1) = self
            .pair
            .eval(lambda)
            .map_err(|e| SlError::Coefficient {
                name: "boundary pair",
                x: f64::NAN,
                source: e,
            })?;
        match self.frame {
            None => Ok((c0, c1)),
            Some([phi_b, phi1_b, psi_b, psi1_b]) => {
                Ok((c0 * phi_b + c1 * phi1_b, c0 * psi_b + c1 * psi1_b))
            }
        }
    }

    /// The four w-integrals at `lambda` over [a, b_eff].
    pub fn w_coeffs(&self, lambda: Complex64) -> Result<[Complex64; 4], SlError> {
        let a = self.problem.a;
        let (phi_l, psi_l) = self.problem.phi_psi(lambda, self.b_eff, true)?;
        let one = Complex64::new(1.0, 0.0);
        let i1 = self.problem.weighted_pairing(&self.psi0, &phi_l, a, self.b_eff)?;
        let i2 = self.problem.weighted_pairing(&self.psi0, &psi_l, a, self.b_eff)?;
        let i3 = self.problem.weighted_pairing(&self.phi0, &phi_l, a, self.b_eff)?;
        let i4 = self.problem.weighted_pairing(&self.phi0, &psi_l, a, self.b_eff)?;
        Ok([
            one + lambda * i1,
            lambda * i2,
            -lambda * i3,
            one - lambda * i4,
        ])
    }

    /// (Phi, Psi) at `lambda`.
    pub fn eval(&self, lambda: Complex64) -> Result<(Complex64, Complex64), SlError> {
        match self.mode {
            CharMode::RegularDirect => {
                let (c0, c1) = self.effective_pair(lambda)?;
                let (phi, psi) = self.problem.phi_psi(lambda, self.b_eff, false)?;
                let pe = phi.end_state();
                let se = psi.end_state();
                Ok((se[0] * c0 + se[1] * c1, pe[0] * c0 + pe[1] * c1))
            }
            CharMode::QuasiregularW => {
                let (c0, c1) = self.effective_pair(lambda)?;
                let [w1, w2, w3, w4] = self.w_coeffs(lambda)?;
                Ok((w2 * c0 + w4 * c1, w1 * c0 + w3 * c1))
            }
        }
    }

    /// Phi(lambda) / Psi(lambda), guarded against pole proximity.
    pub fn m_value(&self, lambda: Complex64) -> Result<Complex64, SlError> {
        let (phi, psi) = self.eval(lambda)?;
        let scale = phi.norm() + psi.norm() + 1.0;
        if psi.norm() < 1e-13 * scale {
            return Err(SlError::PoleProximity {
                re: lambda.re,
                im: lambda.im,
            });
        }
        Ok(phi / psi)
    }
}

/// Truncation point for an infinite right endpoint: the smallest b on the
/// doubling ladder a + 2^j past which the weighted mass of the lambda = 0
/// fundamental system stops changing (twice in a row) at the tail tolerance.
fn choose_truncation(problem: &Problem) -> Result<f64, SlError> {
    let a = problem.a;
    let tol = problem.tol.tail;
    let mut prev: Option<f64> = None;
    let mut stable = 0u32;
    for j in 3..=40u32 {
        let b = a + (2.0f64).powi(j as i32);
        let (phi0, psi0) = problem.phi_psi(Complex64::new(0.0, 0.0), b, true)?;
        let total = problem
            .integrate_weighted(
                |x, _| {
                    let u = phi0.value(x);
                    let v = psi0.value(x);
                    Ok(Complex64::new(u.norm_sqr() + v.norm_sqr(), 0.0))
                },
                a,
                b,
            )?
            .re;
        if let Some(p) = prev {
            if (total - p).abs() <= tol * total.abs().max(1.0) {
                stable += 1;
                if stable >= 2 {
                    return Ok(b);
                }
            } else {
                stable = 0;
            }
        }
        prev = Some(total);
    }
    Err(SlError::NonConvergent {
        what: "truncation of the infinite endpoint",
        detail: format!(
            "weighted mass of the lambda = 0 system still changing at b = a + 2^40 (last total {prev:?}); \
             the problem may not be quasiregular"
        ),
    })
}
