//! Deterministic numerical kernels: quadrature, ODE integration,
//! interpolation and bracketing root finders.

pub mod ode;
pub mod quad;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumericError {
    #[error("integration interval is not finite")]
    InvalidInterval,
    #[error("integrand produced a non-finite value")]
    NonFinite,
    #[error("quadrature did not converge (value {value}, error estimate {error})")]
    QuadratureBudget { value: f64, error: f64 },
    #[error("ODE step budget exhausted at t = {t}")]
    StepBudget { t: f64 },
    #[error("ODE step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("root is not bracketed")]
    NotBracketed,
    #[error("table must have at least two strictly increasing abscissae")]
    BadTable,
}

/// Cubic Hermite interpolant on `[t0, t1]` with endpoint values and slopes.
#[inline]
pub fn hermite_value<S: Scalar>(t0: S, t1: S, y0: S, y1: S, d0: S, d1: S, t: S) -> S {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let two = S::lit(2.0);
    let three = S::lit(3.0);
    let h00 = two * s3 - three * s2 + S::one();
    let h10 = s3 - two * s2 + s;
    let h01 = three * s2 - two * s3;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite_value`] with respect to `t`.
#[inline]
pub fn hermite_slope<S: Scalar>(t0: S, t1: S, y0: S, y1: S, d0: S, d1: S, t: S) -> S {
    let h = t1 - t0;
    let s = (t - t0) / h;
    let s2 = s * s;
    let six = S::lit(6.0);
    let dh00 = six * s2 - six * s;
    let dh10 = S::lit(3.0) * s2 - S::lit(4.0) * s + S::one();
    let dh01 = six * s - six * s2;
    let dh11 = S::lit(3.0) * s2 - S::lit(2.0) * s;
    (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1
}

/// Bisection for a sign change of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`.
pub fn bisect<S: Scalar, F: FnMut(S) -> S>(
    mut f: F,
    mut a: S,
    mut b: S,
    tol: S,
) -> Result<S, NumericError> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == S::zero() {
        return Ok(a);
    }
    if fb == S::zero() {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericError::NotBracketed);
    }
    for _ in 0..400 {
        let m = (a + b) * S::lit(0.5);
        if (b - a).abs() <= tol || m <= a.min(b) || m >= a.max(b) {
            return Ok(m);
        }
        let fm = f(m);
        if fm == S::zero() {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok((a + b) * S::lit(0.5))
}

/// Shape-preserving (Fritsch–Carlson) monotone cubic interpolant of tabulated
/// data; constant extension outside the table.
#[derive(Debug, Clone)]
pub struct MonotoneCubic<S> {
    x: Vec<S>,
    y: Vec<S>,
    d: Vec<S>,
}

impl<S: Scalar> MonotoneCubic<S> {
    pub fn new(x: Vec<S>, y: Vec<S>) -> Result<Self, NumericError> {
        let n = x.len();
        if n < 2 || y.len() != n || x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(NumericError::BadTable);
        }
        let secants: Vec<S> = (0..n - 1)
            .map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k]))
            .collect();
        let mut d = vec![S::zero(); n];
        d[0] = secants[0];
        d[n - 1] = secants[n - 2];
        for k in 1..n - 1 {
            let (a, b) = (secants[k - 1], secants[k]);
            d[k] = if a * b <= S::zero() {
                S::zero()
            } else {
                (a + b) * S::lit(0.5)
            };
        }
        for k in 0..n - 1 {
            let delta = secants[k];
            if delta == S::zero() {
                d[k] = S::zero();
                d[k + 1] = S::zero();
                continue;
            }
            let alpha = d[k] / delta;
            let beta = d[k + 1] / delta;
            let mag = alpha * alpha + beta * beta;
            if mag > S::lit(9.0) {
                let tau = S::lit(3.0) / mag.sqrt();
                d[k] = tau * alpha * delta;
                d[k + 1] = tau * beta * delta;
            }
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (S, S) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    fn locate(&self, u: S) -> Option<usize> {
        let n = self.x.len();
        if u <= self.x[0] || u >= self.x[n - 1] {
            return None;
        }
        Some(match self.x.binary_search_by(|p| p.partial_cmp(&u).expect("finite")) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        })
    }

    pub fn value(&self, u: S) -> S {
        match self.locate(u) {
            Some(k) => hermite_value(
                self.x[k],
                self.x[k + 1],
                self.y[k],
                self.y[k + 1],
                self.d[k],
                self.d[k + 1],
                u,
            ),
            None if u <= self.x[0] => self.y[0],
            None => self.y[self.y.len() - 1],
        }
    }

    pub fn slope(&self, u: S) -> S {
        match self.locate(u) {
            Some(k) => hermite_slope(
                self.x[k],
                self.x[k + 1],
                self.y[k],
                self.y[k + 1],
                self.d[k],
                self.d[k + 1],
                u,
            ),
            None => S::zero(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |t: f64| 2.0 * t * t * t - t + 0.5;
        let df = |t: f64| 6.0 * t * t - 1.0;
        let (a, b) = (0.3, 1.7);
        for &t in &[0.3, 0.5, 1.0, 1.7] {
            let v = hermite_value(a, b, f(a), f(b), df(a), df(b), t);
            let s = hermite_slope(a, b, f(a), f(b), df(a), df(b), t);
            assert!((v - f(t)).abs() < 1e-12);
            assert!((s - df(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert_eq!(
            bisect(|x: f64| x * x + 1.0, 0.0, 2.0, 1e-14),
            Err(NumericError::NotBracketed)
        );
    }

    #[test]
    fn monotone_cubic_preserves_monotonicity() {
        let x = vec![0.0, 0.1, 0.2, 0.5, 1.0];
        let y = vec![0.0, 0.0, 0.5, 0.52, 2.0];
        let m = MonotoneCubic::new(x, y).unwrap();
        let mut prev = m.value(0.0);
        for i in 1..=1000 {
            let v = m.value(i as f64 / 1000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert_eq!(m.value(-1.0), 0.0);
        assert_eq!(m.value(2.0), 2.0);
    }

    #[test]
    fn monotone_cubic_rejects_bad_tables() {
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(MonotoneCubic::new(vec![0.0], vec![1.0]).is_err());
    }
}
