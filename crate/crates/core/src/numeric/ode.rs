//! Dormand–Prince 5(4) integrator for small autonomous systems, keeping every
//! accepted node together with its exact derivative so the trajectory can be
//! reconstructed by cubic Hermite interpolation.

use crate::scalar::Scalar;

use super::hermite_value;
use super::NumericError;

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

// Error coefficients: 5th-order weights minus embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions<S> {
    pub rel_tol: S,
    pub abs_tol: S,
    pub initial_step: Option<S>,
    pub max_step: S,
    pub max_steps: usize,
}

impl<S: Scalar> OdeOptions<S> {
    pub fn with_tol(tol: S) -> Self {
        let tol = tol.max(S::tol_floor());
        Self {
            rel_tol: tol,
            abs_tol: tol,
            initial_step: None,
            max_step: S::infinity(),
            max_steps: 1_000_000,
        }
    }
}

/// Accepted nodes of an integration, with derivatives at each node.
#[derive(Debug, Clone)]
pub struct OdeTrajectory<S, const N: usize> {
    pub t: Vec<S>,
    pub y: Vec<[S; N]>,
    pub dy: Vec<[S; N]>,
    /// `true` when the stop predicate fired (as opposed to reaching `t_end`).
    pub stopped: bool,
}

impl<S: Scalar, const N: usize> OdeTrajectory<S, N> {
    /// Index `k` of the node interval `[t_k, t_{k+1}]` containing `t` (clamped).
    pub fn interval(&self, t: S) -> usize {
        let last = self.t.len().saturating_sub(2);
        match self.t.binary_search_by(|p| p.partial_cmp(&t).expect("finite grid")) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Component `c` of the Hermite interpolant at `t`.
    pub fn eval(&self, t: S, c: usize) -> S {
        if self.t.len() == 1 {
            return self.y[0][c];
        }
        let k = self.interval(t);
        hermite_value(
            self.t[k],
            self.t[k + 1],
            self.y[k][c],
            self.y[k + 1][c],
            self.dy[k][c],
            self.dy[k + 1][c],
            t,
        )
    }
}

impl<S: Scalar, const N: usize> OdeTrajectory<S, N> {
    /// Inserts nodes until the Hermite interpolant matches an accurate
    /// re-integration at every interval midpoint to within
    /// `tol · max(1, |y|)` in each component.
    pub fn refine_for_interpolation<F>(
        &mut self,
        rhs: F,
        opts: OdeOptions<S>,
        tol: S,
    ) -> Result<(), NumericError>
    where
        F: Fn(&[S; N]) -> [S; N],
    {
        let mut k = 0;
        let mut inserted = 0usize;
        while k + 1 < self.t.len() {
            let (t0, t1) = (self.t[k], self.t[k + 1]);
            let half = (t1 - t0) * S::lit(0.5);
            let mid = integrate_autonomous(&rhs, self.y[k], half, opts, |_, _| false)?;
            let y_mid = *mid.y.last().expect("nonempty");
            let tm = t0 + half;
            let bad = (0..N).any(|c| {
                (self.eval(tm, c) - y_mid[c]).abs() > tol * y_mid[c].abs().max(S::one())
            });
            if bad && half > S::epsilon() * t1.abs().max(S::one()) * S::lit(16.0) {
                self.t.insert(k + 1, tm);
                self.y.insert(k + 1, y_mid);
                self.dy.insert(k + 1, rhs(&y_mid));
                inserted += 1;
                if inserted > opts.max_steps {
                    return Err(NumericError::StepBudget { t: tm.as_f64() });
                }
            } else {
                k += 1;
            }
        }
        Ok(())
    }
}

fn combine<S: Scalar, const N: usize>(y: &[S; N], h: S, terms: &[(f64, &[S; N])]) -> [S; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = S::zero();
        for (c, k) in terms {
            acc = acc + S::lit(*c) * k[i];
        }
        *o = *o + h * acc;
    }
    out
}

/// Integrates `y' = rhs(y)` from `(0, y0)` until `t_end`, or until
/// `stop(t, y)` returns true after an accepted step.
pub fn integrate_autonomous<S, const N: usize, F, P>(
    rhs: F,
    y0: [S; N],
    t_end: S,
    opts: OdeOptions<S>,
    mut stop: P,
) -> Result<OdeTrajectory<S, N>, NumericError>
where
    S: Scalar,
    F: Fn(&[S; N]) -> [S; N],
    P: FnMut(S, &[S; N]) -> bool,
{
    let mut t = S::zero();
    let mut y = y0;
    let mut k1 = rhs(&y);
    let mut traj = OdeTrajectory {
        t: vec![t],
        y: vec![y],
        dy: vec![k1],
        stopped: false,
    };
    if stop(t, &y) {
        traj.stopped = true;
        return Ok(traj);
    }

    let err_norm = |err: &[S; N], a: &[S; N], b: &[S; N]| -> S {
        let mut acc = S::zero();
        for i in 0..N {
            let sc = opts.abs_tol + opts.rel_tol * a[i].abs().max(b[i].abs());
            let e = err[i] / sc;
            acc = acc + e * e;
        }
        (acc / S::lit(N as f64)).sqrt()
    };

    let mut h = match opts.initial_step {
        Some(h) => h,
        None => {
            // Hairer–Wanner starting-step heuristic.
            let zero = [S::zero(); N];
            let d0 = err_norm(&y, &zero, &y);
            let d1 = err_norm(&k1, &zero, &y);
            let h0 = if d0 < S::lit(1e-5) || d1 < S::lit(1e-5) {
                S::lit(1e-6)
            } else {
                S::lit(0.01) * d0 / d1
            };
            h0.min(opts.max_step)
        }
    };

    let safety = S::lit(0.9);
    let mut steps = 0usize;
    while t < t_end {
        if steps >= opts.max_steps {
            return Err(NumericError::StepBudget { t: t.as_f64() });
        }
        steps += 1;
        h = h.min(t_end - t).min(opts.max_step);
        if h <= t.abs() * S::epsilon() * S::lit(4.0) {
            return Err(NumericError::StepUnderflow { t: t.as_f64() });
        }
        let k2 = rhs(&combine(&y, h, &[(A21, &k1)]));
        let k3 = rhs(&combine(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = rhs(&combine(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]));
        let k5 = rhs(&combine(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
        let k6 = rhs(&combine(
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ));
        let y_new = combine(
            &y,
            h,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
        );
        let k7 = rhs(&y_new);
        let mut err = [S::zero(); N];
        for i in 0..N {
            err[i] = h
                * (S::lit(E1) * k1[i]
                    + S::lit(E3) * k3[i]
                    + S::lit(E4) * k4[i]
                    + S::lit(E5) * k5[i]
                    + S::lit(E6) * k6[i]
                    + S::lit(E7) * k7[i]);
        }
        let en = err_norm(&err, &y, &y_new);
        if !en.is_finite() {
            h = h * S::lit(0.1);
            continue;
        }
        if en <= S::one() {
            t = t + h;
            y = y_new;
            k1 = k7;
            traj.t.push(t);
            traj.y.push(y);
            traj.dy.push(k1);
            if stop(t, &y) {
                traj.stopped = true;
                return Ok(traj);
            }
            let fac = if en == S::zero() {
                S::lit(5.0)
            } else {
                (safety * en.powf(S::lit(-0.2))).min(S::lit(5.0))
            };
            h = h * fac.max(S::lit(0.2));
        } else {
            h = h * (safety * en.powf(S::lit(-0.2))).max(S::lit(0.2));
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_growth_to_tolerance() {
        let traj = integrate_autonomous(
            |y: &[f64; 1]| [0.1 * y[0]],
            [1.0],
            5.0,
            OdeOptions::with_tol(1e-11),
            |_, _| false,
        )
        .unwrap();
        let end = *traj.y.last().unwrap();
        assert!((end[0] - 0.5f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn refinement_tightens_dense_output() {
        let rhs = |y: &[f64; 1]| [0.1 * y[0]];
        let opts = OdeOptions::with_tol(1e-11);
        let mut traj = integrate_autonomous(rhs, [1.0], 5.0, opts, |_, _| false).unwrap();
        let coarse = (traj.eval(2.345, 0) - (0.2345f64).exp()).abs();
        traj.refine_for_interpolation(rhs, opts, 1e-12).unwrap();
        let fine = (traj.eval(2.345, 0) - (0.2345f64).exp()).abs();
        assert!(fine < 1e-11 && fine <= coarse, "{coarse} -> {fine}");
        assert!(traj.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stop_predicate_halts_after_crossing() {
        let traj = integrate_autonomous(
            |y: &[f64; 2]| [y[1], -y[0]],
            [0.0, 1.0],
            10.0,
            OdeOptions::with_tol(1e-9),
            |_, y| y[0] >= 0.5,
        )
        .unwrap();
        assert!(traj.stopped);
        let n = traj.t.len();
        assert!(traj.y[n - 1][0] >= 0.5 && traj.y[n - 2][0] < 0.5);
    }

    #[test]
    fn node_derivatives_are_rhs_values() {
        let traj = integrate_autonomous(
            |y: &[f64; 1]| [y[0] * (1.0 - y[0])],
            [0.1],
            3.0,
            OdeOptions::with_tol(1e-8),
            |_, _| false,
        )
        .unwrap();
        for (y, dy) in traj.y.iter().zip(&traj.dy) {
            assert_eq!(dy[0], y[0] * (1.0 - y[0]));
        }
    }
}
