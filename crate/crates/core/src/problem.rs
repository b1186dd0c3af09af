//! Problem container: coefficients, interval, left boundary angle, and the
//! machinery that turns them into fundamental-solution trajectories.
//!
//! The differential expression is -(p y')' + q y = lambda * delta * y on
//! [a, b) in quasi-derivative form: with u = y and v = p y' the system is
//! u' = v / p, v' = (q - lambda * delta) u.  The weight delta may vanish on
//! subintervals; p must be positive; q is real and locally integrable.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::expr::{EvalError, Expr, ParseError, Slot, SlotError};
use crate::ode::{Integrator, OdeError, Solution, State};
use crate::quad::{self, QuadError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum SlError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Slot(#[from] SlotError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error("coefficient {name} evaluation failed at x = {x}: {source}")]
    Coefficient {
        name: &'static str,
        x: f64,
        #[source]
        source: EvalError,
    },
    #[error("p must be strictly positive; p({x}) = {value}")]
    NonPositiveP { x: f64, value: f64 },
    #[error("delta must be nonnegative; delta({x}) = {value}")]
    NegativeDelta { x: f64, value: f64 },
    #[error("delta vanishes identically on the studied interval")]
    TrivialWeight,
    #[error("invalid interval: a = {a}, b = {b}")]
    BadInterval { a: f64, b: f64 },
    #[error("left boundary angle must be finite, got {0}")]
    BadAngle(f64),
    #[error("invalid boundary pair: {0}")]
    Pair(String),
    #[error("evaluation too close to a pole of m at lambda = {re}+{im}i")]
    PoleProximity { re: f64, im: f64 },
    #[error("{what} did not converge: {detail}")]
    NonConvergent { what: &'static str, detail: String },
    #[error("{what} is not supported here: {detail}")]
    Unsupported {
        what: &'static str,
        detail: &'static str,
    },
    #[error(
        "eigenvalue count mismatch in [{lo}, {hi}]: scan found {scanned}, argument principle counted {contour:.3}"
    )]
    CountMismatch {
        lo: f64,
        hi: f64,
        scanned: usize,
        contour: f64,
    },
    #[error("zero of the denominator at t = {t} is not simple: |Psi'| = {psi_deriv:e} below threshold")]
    NonSimpleZero { t: f64, psi_deriv: f64 },
    #[error("residue at t = {t} has the wrong sign: xi = {xi:e}")]
    ResidueSign { t: f64, xi: f64 },
}

/// Right endpoint of the base interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RightEndpoint {
    Finite(f64),
    Infinite,
}

/// How the right endpoint is treated when forming the characteristic pair.
///
/// `Regular` evaluates solutions at b directly and applies the boundary pair
/// to the classical trace (y(b), (py')(b)).  `Quasiregular` applies the pair
/// to the bracket traces defined through the lambda = 0 fundamental system,
/// which remain meaningful when b is singular or infinite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Regular,
    Quasiregular,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative tolerance of the adaptive integrator.
    pub ode_rel: f64,
    /// Absolute tolerance of the adaptive integrator.
    pub ode_abs: f64,
    /// Quadrature tolerance for weighted inner products.
    pub quad: f64,
    /// Root refinement tolerance (relative to max(1, |t|)).
    pub root: f64,
    /// Tail criterion for truncation of an infinite endpoint.
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            ode_rel: 1e-10,
            ode_abs: 1e-12,
            quad: 1e-11,
            root: 1e-10,
            tail: 1e-10,
        }
    }
}

/// A fundamental solution evaluated along the interval, with dense output.
#[derive(Debug, Clone)]
pub struct Trajectory {
    sol: Solution,
    ic: State,
    pub lambda: Complex64,
}

impl Trajectory {
    /// State (y, py') at `x`.  Requires dense output; clamps to the endpoint
    /// states outside the integration range.
    pub fn eval(&self, x: f64) -> State {
        if x <= self.sol.x0 {
            return self.ic;
        }
        if x >= self.sol.x_end || self.sol.steps.is_empty() {
            assert!(
                !self.sol.steps.is_empty() || x >= self.sol.x_end,
                "interior evaluation of a trajectory integrated without dense output"
            );
            return self.sol.y_end;
        }
        let idx = self.sol.steps.partition_point(|s| s.x0 <= x);
        self.sol.steps[idx.saturating_sub(1)].eval(x)
    }

    pub fn value(&self, x: f64) -> Complex64 {
        self.eval(x)[0]
    }

    pub fn quasi_derivative(&self, x: f64) -> Complex64 {
        self.eval(x)[1]
    }

    /// Terminal state (y, py') at the right end of the integration range.
    pub fn end_state(&self) -> State {
        self.sol.y_end
    }

    pub fn x_end(&self) -> f64 {
        self.sol.x_end
    }

    pub fn n_steps(&self) -> usize {
        self.sol.n_steps
    }
}

/// The full boundary value problem data on [a, b).
#[derive(Debug, Clone)]
pub struct Problem {
    pub a: f64,
    pub b: RightEndpoint,
    pub regularity: Regularity,
    pub p: Expr,
    pub q: Expr,
    pub delta: Expr,
    /// Left boundary angle B: solutions satisfy
    /// cos(B) y(a) + sin(B) (py')(a) = 0 for the phi family.
    pub left_angle: f64,
    pub tol: Tolerances,
}

impl Problem {
    /// Builds and validates a problem.  Coefficient expressions must not
    /// reference lambda; p must be positive and delta nonnegative and not
    /// identically zero (checked on a sampling grid and by quadrature).
    pub fn new(
        a: f64,
        b: RightEndpoint,
        regularity: Regularity,
        p: Expr,
        q: Expr,
        delta: Expr,
        left_angle: f64,
        tol: Tolerances,
    ) -> Result<Self, SlError> {
        if !a.is_finite() {
            return Err(SlError::BadInterval { a, b: f64::NAN });
        }
        if let RightEndpoint::Finite(bv) = b {
            if !bv.is_finite() || bv <= a {
                return Err(SlError::BadInterval { a, b: bv });
            }
        }
        if !left_angle.is_finite() {
            return Err(SlError::BadAngle(left_angle));
        }
        for (e, _name) in [(&p, "p"), (&q, "q"), (&delta, "delta")] {
            e.check_slot(Slot::Coefficient)?;
        }
        let prob = Problem {
            a,
            b,
            regularity,
            p,
            q,
            delta,
            left_angle,
            tol,
        };
        prob.validate_coefficients()?;
        Ok(prob)
    }

    /// Right end of the interval actually used for validation and as the
    /// default truncation seed when b is infinite.
    pub fn validation_span(&self) -> f64 {
        match self.b {
            RightEndpoint::Finite(b) => b,
            RightEndpoint::Infinite => self.a + 16.0,
        }
    }

    fn validate_coefficients(&self) -> Result<(), SlError> {
        let hi = self.validation_span();
        let knots = self.breakpoints(self.a, hi);
        let mut bounds = vec![self.a];
        bounds.extend_from_slice(&knots);
        bounds.push(hi);
        // Sample each smooth piece, including points near its edges.
        for seg in bounds.windows(2) {
            let (lo, up) = (seg[0], seg[1]);
            let side = 0.5 * (lo + up);
            for i in 0..=64 {
                let x = lo + (up - lo) * i as f64 / 64.0;
                let pv = self.p.eval_real_sided(x, side, 0.0).map_err(|e| {
                    SlError::Coefficient {
                        name: "p",
                        x,
                        source: e,
                    }
                })?;
                if !(pv > 0.0) {
                    return Err(SlError::NonPositiveP { x, value: pv });
                }
                self.q
                    .eval_real_sided(x, side, 0.0)
                    .map_err(|e| SlError::Coefficient {
                        name: "q",
                        x,
                        source: e,
                    })?;
                let dv = self.delta.eval_real_sided(x, side, 0.0).map_err(|e| {
                    SlError::Coefficient {
                        name: "delta",
                        x,
                        source: e,
                    }
                })?;
                if dv < 0.0 {
                    return Err(SlError::NegativeDelta { x, value: dv });
                }
            }
        }
        let (mass, _) = quad::integrate(
            |x, side| {
                self.delta
                    .eval_real_sided(x, side, 0.0)
                    .map(|v| Complex64::new(v, 0.0))
                    .map_err(|e| QuadError::Integrand { x, source: e })
            },
            self.a,
            hi,
            &knots,
            self.tol.quad.max(1e-12),
        )?;
        if mass.re <= 0.0 {
            return Err(SlError::TrivialWeight);
        }
        Ok(())
    }

    /// Interior coefficient breakpoints in (lo, hi), sorted and deduplicated.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = self.p.breakpoints(lo, hi);
        out.extend(self.q.breakpoints(lo, hi));
        out.extend(self.delta.breakpoints(lo, hi));
        out.sort_by(|u, v| u.partial_cmp(v).unwrap());
        out.dedup();
        out
    }

    fn rhs(
        &self,
        lambda: Complex64,
    ) -> impl FnMut(f64, f64, &State) -> Result<State, OdeError> + '_ {
        move |x, side, y| {
            let wrap = |e: EvalError| OdeError::Coefficient { x, source: e };
            let p = self.p.eval_real_sided(x, side, 0.0).map_err(wrap)?;
            if p == 0.0 {
                return Err(OdeError::Coefficient {
                    x,
                    source: EvalError::DivisionByZero,
                });
            }
            let q = self.q.eval_real_sided(x, side, 0.0).map_err(wrap)?;
            let d = self.delta.eval_real_sided(x, side, 0.0).map_err(wrap)?;
            Ok([
                y[1] / p,
                (Complex64::new(q, 0.0) - lambda * d) * y[0],
            ])
        }
    }

    fn integrate_ic(
        &self,
        lambda: Complex64,
        ic: State,
        b_eff: f64,
        dense: bool,
    ) -> Result<Trajectory, SlError> {
        let integ = Integrator {
            rtol: self.tol.ode_rel,
            atol: self.tol.ode_abs,
            ..Integrator::default()
        };
        let knots = self.breakpoints(self.a, b_eff);
        let sol = integ.solve(self.rhs(lambda), self.a, b_eff, ic, &knots, dense)?;
        Ok(Trajectory {
            sol,
            ic,
            lambda,
        })
    }

    /// Initial state of the phi family: (sin B, -cos B) at a.
    pub fn phi_ic(&self) -> State {
        let b = self.left_angle;
        [
            Complex64::new(b.sin(), 0.0),
            Complex64::new(-b.cos(), 0.0),
        ]
    }

    /// Initial state of the psi family: (cos B, sin B) at a.
    pub fn psi_ic(&self) -> State {
        let b = self.left_angle;
        [Complex64::new(b.cos(), 0.0), Complex64::new(b.sin(), 0.0)]
    }

    /// The solution with phi-type initial data at `lambda`, integrated to
    /// `b_eff`.
    pub fn phi(&self, lambda: Complex64, b_eff: f64, dense: bool) -> Result<Trajectory, SlError> {
        self.integrate_ic(lambda, self.phi_ic(), b_eff, dense)
    }

    /// The solution with psi-type initial data at `lambda`.
    pub fn psi(&self, lambda: Complex64, b_eff: f64, dense: bool) -> Result<Trajectory, SlError> {
        self.integrate_ic(lambda, self.psi_ic(), b_eff, dense)
    }

    /// Both fundamental solutions at once.
    pub fn phi_psi(
        &self,
        lambda: Complex64,
        b_eff: f64,
        dense: bool,
    ) -> Result<(Trajectory, Trajectory), SlError> {
        Ok((
            self.phi(lambda, b_eff, dense)?,
            self.psi(lambda, b_eff, dense)?,
        ))
    }

    /// Integral of f(x) * delta(x) over [lo, hi] with panel splits at the
    /// coefficient breakpoints.
    pub fn integrate_weighted<F>(&self, mut f: F, lo: f64, hi: f64) -> Result<Complex64, SlError>
    where
        F: FnMut(f64, f64) -> Result<Complex64, QuadError>,
    {
        let knots = self.breakpoints(lo, hi);
        let (v, _) = quad::integrate(
            |x, side| {
                let d = self
                    .delta
                    .eval_real_sided(x, side, 0.0)
                    .map_err(|e| QuadError::Integrand { x, source: e })?;
                if d == 0.0 {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                Ok(f(x, side)? * d)
            },
            lo,
            hi,
            &knots,
            self.tol.quad,
        )?;
        Ok(v)
    }

    /// Bilinear pairing int u(x) v(x) delta(x) dx over [lo, hi].
    /// No conjugation: the pairing stays analytic in lambda.
    pub fn weighted_pairing(
        &self,
        u: &Trajectory,
        v: &Trajectory,
        lo: f64,
        hi: f64,
    ) -> Result<Complex64, SlError> {
        self.integrate_weighted(|x, _| Ok(u.value(x) * v.value(x)), lo, hi)
    }
}
