//! Adaptive Dormand-Prince 5(4) integration for the first-order system
//! underlying the spectral problem, with quartic dense output.
//!
//! The state is two complex components (the solution and its
//! quasi-derivative); the right-hand side is linear in the state but is
//! supplied as a closure so the integrator stays independent of the
//! coefficient representation.  Integration is segmented: interior knots
//! (coefficient breakpoints) are always step boundaries, and the right-hand
//! side receives the midpoint of the current segment as a piece selector so
//! that discontinuous coefficients are sampled on the correct side.

use num_complex::Complex64;

use crate::expr::EvalError;

pub type State = [Complex64; 2];

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OdeError {
    #[error("coefficient evaluation failed at x = {x}: {source}")]
    Coefficient {
        x: f64,
        #[source]
        source: EvalError,
    },
    #[error("step size underflow at x = {x} (h = {h:e})")]
    StepSizeUnderflow { x: f64, h: f64 },
    #[error("step budget exhausted after {steps} steps at x = {x}")]
    TooManySteps { steps: usize, x: f64 },
    #[error("integration interval is empty or reversed: [{x0}, {x1}]")]
    BadInterval { x0: f64, x1: f64 },
}

/// One accepted step with the dense-output polynomial of both components.
#[derive(Debug, Clone)]
pub struct DenseStep {
    pub x0: f64,
    pub h: f64,
    /// Coefficients rcont1..rcont5 per component.
    pub c: [[Complex64; 5]; 2],
}

impl DenseStep {
    /// Interpolated state at `x` in `[x0, x0+h]`.
    pub fn eval(&self, x: f64) -> State {
        let theta = (x - self.x0) / self.h;
        let th1 = 1.0 - theta;
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (i, c) in self.c.iter().enumerate() {
            out[i] = c[0] + theta * (c[1] + th1 * (c[2] + theta * (c[3] + th1 * c[4])));
        }
        out
    }

    /// Derivative of the interpolant at `x` (d/dx of both components).
    pub fn eval_deriv(&self, x: f64) -> State {
        let theta = (x - self.x0) / self.h;
        let th1 = 1.0 - theta;
        let mut out = [Complex64::new(0.0, 0.0); 2];
        for (i, c) in self.c.iter().enumerate() {
            // d/dtheta of c0 + th*(c1 + th1*(c2 + th*(c3 + th1*c4)))
            let inner = c[3] + th1 * c[4];
            let d_inner = -c[4];
            let mid = c[2] + theta * inner;
            let d_mid = inner + theta * d_inner;
            let d = c[1] + th1 * mid + theta * (-mid + th1 * d_mid);
            out[i] = d / self.h;
        }
        out
    }
}

/// Integration result.  `steps` is empty when dense output was not requested.
#[derive(Debug, Clone)]
pub struct Solution {
    pub x0: f64,
    pub x_end: f64,
    pub y_end: State,
    pub steps: Vec<DenseStep>,
    pub n_steps: usize,
    pub n_rejected: usize,
}

pub struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Integrator {
            rtol: 1e-10,
            atol: 1e-12,
            max_steps: 20_000_000,
        }
    }
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Error coefficients (5th order minus embedded 4th order weights).
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Dense output weights.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

impl Integrator {
    /// Integrates from `x0` to `x1` (`x0 < x1`).  `knots` lists interior
    /// breakpoints; every knot in `(x0, x1)` becomes a hard step boundary.
    ///
    /// `f(x, side, y)` evaluates the right-hand side; `side` is the midpoint
    /// of the current inter-knot segment.
    pub fn solve<F>(
        &self,
        mut f: F,
        x0: f64,
        x1: f64,
        y0: State,
        knots: &[f64],
        dense: bool,
    ) -> Result<Solution, OdeError>
    where
        F: FnMut(f64, f64, &State) -> Result<State, OdeError>,
    {
        if !(x0 < x1) {
            return Err(OdeError::BadInterval { x0, x1 });
        }
        let mut bounds = vec![x0];
        for &k in knots {
            if k > x0 && k < x1 {
                bounds.push(k);
            }
        }
        bounds.push(x1);
        bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bounds.dedup();

        let mut sol = Solution {
            x0,
            x_end: x1,
            y_end: y0,
            steps: Vec::new(),
            n_steps: 0,
            n_rejected: 0,
        };
        let mut y = y0;
        let mut h_carry: Option<f64> = None;
        for seg in bounds.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            let side = 0.5 * (lo + hi);
            let h = self.solve_segment(&mut f, lo, hi, side, &mut y, h_carry, dense, &mut sol)?;
            h_carry = Some(h);
        }
        sol.y_end = y;
        Ok(sol)
    }

    #[allow(clippy::too_many_arguments)]
    fn solve_segment<F>(
        &self,
        f: &mut F,
        lo: f64,
        hi: f64,
        side: f64,
        y: &mut State,
        h_start: Option<f64>,
        dense: bool,
        sol: &mut Solution,
    ) -> Result<f64, OdeError>
    where
        F: FnMut(f64, f64, &State) -> Result<State, OdeError>,
    {
        let span = hi - lo;
        let mut x = lo;
        let mut k1 = f(x, side, y)?;
        let mut h = match h_start {
            Some(h) => h.min(span),
            None => self.initial_step(f, lo, side, y, &k1, span)?,
        };
        loop {
            if sol.n_steps + sol.n_rejected > self.max_steps {
                return Err(OdeError::TooManySteps {
                    steps: sol.n_steps + sol.n_rejected,
                    x,
                });
            }
            let mut last = false;
            if x + h >= hi - 1e-14 * span {
                h = hi - x;
                last = true;
            }
            if h <= f64::EPSILON * 16.0 * x.abs().max(1.0) && !last {
                return Err(OdeError::StepSizeUnderflow { x, h });
            }

            // Stages.
            let yt = |c: &[(f64, &State)]| -> State {
                let mut out = *y;
                for (a, k) in c {
                    out[0] += h * a * k[0];
                    out[1] += h * a * k[1];
                }
                out
            };
            let k2 = f(x + C2 * h, side, &yt(&[(A21, &k1)]))?;
            let k3 = f(x + C3 * h, side, &yt(&[(A31, &k1), (A32, &k2)]))?;
            let k4 = f(x + C4 * h, side, &yt(&[(A41, &k1), (A42, &k2), (A43, &k3)]))?;
            let k5 = f(
                x + C5 * h,
                side,
                &yt(&[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let k6 = f(
                x + h,
                side,
                &yt(&[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = yt(&[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
            let k7 = f(x + h, side, &y_new)?;

            // Embedded error estimate.
            let mut err_sq = 0.0;
            for i in 0..2 {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i]
                        + E7 * k7[i]);
                let sk = self.atol + self.rtol * y[i].norm().max(y_new[i].norm());
                err_sq += (e.norm() / sk).powi(2);
            }
            let err = (err_sq / 2.0).sqrt();

            if err <= 1.0 {
                if dense {
                    let mut c = [[Complex64::new(0.0, 0.0); 5]; 2];
                    for i in 0..2 {
                        let ydiff = y_new[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        c[i][0] = y[i];
                        c[i][1] = ydiff;
                        c[i][2] = bspl;
                        c[i][3] = ydiff - h * k7[i] - bspl;
                        c[i][4] = h
                            * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i]
                                + D7 * k7[i]);
                    }
                    sol.steps.push(DenseStep { x0: x, h, c });
                }
                sol.n_steps += 1;
                x += h;
                *y = y_new;
                k1 = k7; // first-same-as-last
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
                h *= fac;
                if last || x >= hi {
                    return Ok(h);
                }
            } else {
                sol.n_rejected += 1;
                let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                h *= fac;
            }
        }
    }

    fn initial_step<F>(
        &self,
        f: &mut F,
        x: f64,
        side: f64,
        y: &State,
        k1: &State,
        span: f64,
    ) -> Result<f64, OdeError>
    where
        F: FnMut(f64, f64, &State) -> Result<State, OdeError>,
    {
        let sk = |v: &State, i: usize| self.atol + self.rtol * v[i].norm();
        let d0 = (0..2).map(|i| (y[i].norm() / sk(y, i)).powi(2)).sum::<f64>().sqrt();
        let d1 = (0..2).map(|i| (k1[i].norm() / sk(y, i)).powi(2)).sum::<f64>().sqrt();
        let h0 = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        }
        .min(span);
        // One explicit Euler probe to estimate the second derivative scale.
        let y1 = [y[0] + h0 * k1[0], y[1] + h0 * k1[1]];
        let k2 = f(x + h0, side, &y1)?;
        let d2 = (0..2)
            .map(|i| ((k2[i] - k1[i]).norm() / sk(y, i)).powi(2))
            .sum::<f64>()
            .sqrt()
            / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / dm).powf(0.2)
        };
        Ok(h1.min(100.0 * h0).min(span))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    /// y'' = -omega^2 y as the first-order system, exact solution cos(omega x).
    fn harmonic(omega: f64) -> impl FnMut(f64, f64, &State) -> Result<State, OdeError> {
        move |_x, _side, y| Ok([y[1], -omega * omega * y[0]])
    }

    #[test]
    fn cosine_endpoint() {
        let integ = Integrator::default();
        let sol = integ
            .solve(harmonic(3.0), 0.0, 2.0, [c(1.0), c(0.0)], &[], false)
            .unwrap();
        assert_relative_eq!(sol.y_end[0].re, (6.0f64).cos(), max_relative = 1e-9);
        assert_relative_eq!(sol.y_end[1].re, -3.0 * (6.0f64).sin(), max_relative = 1e-9);
        assert!(sol.y_end[0].im.abs() < 1e-12);
    }

    #[test]
    fn dense_output_accuracy() {
        let integ = Integrator::default();
        let sol = integ
            .solve(harmonic(5.0), 0.0, 3.0, [c(1.0), c(0.0)], &[], true)
            .unwrap();
        assert!(!sol.steps.is_empty());
        for i in 0..=300 {
            let x = 3.0 * i as f64 / 300.0;
            let step = sol
                .steps
                .iter()
                .find(|s| x >= s.x0 - 1e-12 && x <= s.x0 + s.h + 1e-12)
                .unwrap();
            let v = step.eval(x);
            assert!(
                (v[0].re - (5.0 * x).cos()).abs() < 1e-8,
                "x={x}: {} vs {}",
                v[0].re,
                (5.0 * x).cos()
            );
        }
    }

    #[test]
    fn dense_derivative_consistent() {
        let integ = Integrator::default();
        let sol = integ
            .solve(harmonic(2.0), 0.0, 1.0, [c(1.0), c(0.0)], &[], true)
            .unwrap();
        let s = &sol.steps[sol.steps.len() / 2];
        let xm = s.x0 + 0.37 * s.h;
        let d = s.eval_deriv(xm);
        // y' should equal the second component, and y'' = -4 y.
        let v = s.eval(xm);
        assert_relative_eq!(d[0].re, v[1].re, max_relative = 1e-6);
        assert_relative_eq!(d[1].re, -4.0 * v[0].re, max_relative = 1e-5);
    }

    #[test]
    fn knots_are_step_boundaries() {
        let integ = Integrator::default();
        let sol = integ
            .solve(harmonic(1.0), 0.0, 1.0, [c(1.0), c(0.0)], &[0.25, 0.5], true)
            .unwrap();
        for knot in [0.25, 0.5] {
            assert!(
                sol.steps.iter().any(|s| (s.x0 - knot).abs() < 1e-14),
                "no step starts at {knot}"
            );
        }
    }

    #[test]
    fn complex_lambda_gives_complex_solution() {
        // y' = i y, y(1) = e^{i}.
        let integ = Integrator::default();
        let f = |_x: f64, _s: f64, y: &State| -> Result<State, OdeError> {
            Ok([Complex64::i() * y[0], c(0.0)])
        };
        let sol = integ.solve(f, 0.0, 1.0, [c(1.0), c(0.0)], &[], false).unwrap();
        assert_relative_eq!(sol.y_end[0].re, 1.0f64.cos(), max_relative = 1e-10);
        assert_relative_eq!(sol.y_end[0].im, 1.0f64.sin(), max_relative = 1e-10);
    }
}
