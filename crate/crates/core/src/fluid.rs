//! Fluid limit `x' = Σ l_i F_i(x)` and the deterministic hitting time `τ_r`.
//!
//! The ODE is integrated together with `∫ C`, where `C = Σ l_i F_i'(x_t)`, so
//! that downstream rate computations get `exp(∫_u^t C)` from the same dense
//! output instead of nested quadrature.

use thiserror::Error;

use crate::model::{ModelError, ModelSpec};
use crate::numeric::ode::{integrate_autonomous, OdeOptions, OdeTrajectory};
use crate::numeric::quad::{integrate, QuadOptions};
use crate::numeric::{bisect, hermite_slope, NumericError};
use crate::scalar::Scalar;

/// Default tolerance for `τ_r` and the fluid path.
pub const DEFAULT_TAU_TOL: f64 = 1e-10;

/// Drift below which `τ_r` is refused (integrand `1/drift` too close to its pole).
pub const MIN_DRIFT: f64 = 1e-8;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FluidError {
    #[error("level {r} is outside ({x}, {x_inf})")]
    Range { r: f64, x: f64, x_inf: f64 },
    #[error("drift {drift} at level {r} is below the singularity guard")]
    NearEquilibrium { r: f64, drift: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("fluid path stalled at x = {x} (t = {t}) before reaching {r_stop}")]
    StallDetected { x: f64, t: f64, r_stop: f64 },
    #[error("quadrature τ = {quadrature} and ODE event τ = {event} disagree by more than {allowed}")]
    Consistency {
        quadrature: f64,
        event: f64,
        allowed: f64,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Dense solution of the fluid ODE on `[0, horizon]`.
///
/// Between nodes the path is the cubic Hermite interpolant whose node slopes
/// are the exact drift values, so `x'(t_k) = drift(x_{t_k})` holds exactly.
#[derive(Debug, Clone)]
pub struct FluidPath<S> {
    traj: OdeTrajectory<S, 2>,
    tolerance: S,
}

impl<S: Scalar> FluidPath<S> {
    pub fn times(&self) -> &[S] {
        &self.traj.t
    }

    pub fn len(&self) -> usize {
        self.traj.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traj.t.is_empty()
    }

    pub fn horizon(&self) -> S {
        *self.traj.t.last().expect("nonempty trajectory")
    }

    pub fn tolerance(&self) -> S {
        self.tolerance
    }

    pub fn node_value(&self, k: usize) -> S {
        self.traj.y[k][0]
    }

    pub fn node_slope(&self, k: usize) -> S {
        self.traj.dy[k][0]
    }

    /// `x_t`.
    pub fn value(&self, t: S) -> S {
        self.traj.eval(t, 0)
    }

    /// `dx_t/dt` of the interpolant.
    pub fn slope(&self, t: S) -> S {
        if self.traj.t.len() == 1 {
            return self.traj.dy[0][0];
        }
        let k = self.traj.interval(t);
        hermite_slope(
            self.traj.t[k],
            self.traj.t[k + 1],
            self.traj.y[k][0],
            self.traj.y[k + 1][0],
            self.traj.dy[k][0],
            self.traj.dy[k + 1][0],
            t,
        )
    }

    /// `∫_0^t C(ρ) dρ`.
    pub fn cum_c(&self, t: S) -> S {
        self.traj.eval(t, 1)
    }

    /// First `t` with `x_t = level`, located on the dense interpolant.
    pub fn event_time(&self, level: S) -> Option<S> {
        let xs = &self.traj.y;
        if level <= xs[0][0] {
            return Some(S::zero());
        }
        let k = xs.iter().position(|y| y[0] >= level)?;
        let (a, b) = (self.traj.t[k - 1], self.traj.t[k]);
        let tol = S::epsilon() * b.abs().max(S::one());
        bisect(|t| self.value(t) - level, a, b, tol).ok()
    }

    /// `(t_k, x_{t_k})` rows, optionally resampled on a uniform grid.
    pub fn samples(&self, uniform_points: Option<usize>) -> Vec<(S, S)> {
        match uniform_points {
            None => self
                .traj
                .t
                .iter()
                .zip(&self.traj.y)
                .map(|(&t, y)| (t, y[0]))
                .collect(),
            Some(m) => {
                let m = m.max(2);
                let h = self.horizon() / S::lit((m - 1) as f64);
                (0..m)
                    .map(|i| {
                        let t = h * S::lit(i as f64);
                        (t, self.value(t))
                    })
                    .collect()
            }
        }
    }
}

fn check_level<S: Scalar>(model: &ModelSpec<S>, from: S, r: S) -> Result<(), FluidError> {
    let x_inf = model.x_infinity();
    if !(r > from && r < x_inf && model.domain().contains(r)) {
        return Err(FluidError::Range {
            r: r.as_f64(),
            x: from.as_f64(),
            x_inf: x_inf.as_f64(),
        });
    }
    Ok(())
}

/// Integrates the fluid ODE from the model's start density until `x_t ≥ r_stop`.
pub fn solve_fluid<S: Scalar>(model: &ModelSpec<S>, r_stop: S, tol: S) -> Result<FluidPath<S>, FluidError> {
    solve_fluid_from(model, model.start(), r_stop, tol)
}

/// [`solve_fluid`] from an arbitrary start density in `[x, x_∞)`.
pub fn solve_fluid_from<S: Scalar>(
    model: &ModelSpec<S>,
    start: S,
    r_stop: S,
    tol: S,
) -> Result<FluidPath<S>, FluidError> {
    if !(tol > S::zero()) {
        return Err(FluidError::BadTolerance(tol.as_f64()));
    }
    check_level(model, start, r_stop)?;
    let stall = S::lit(1e-14).max(S::tol_floor());
    // Local error is controlled two orders below `tol` so that accumulated
    // global error in event times stays within `tol · τ`.
    let opts = OdeOptions::with_tol(tol * S::lit(0.01));
    let rhs = |y: &[S; 2]| [model.drift_at(y[0]), model.drift_slope_at(y[0])];
    let mut traj = integrate_autonomous(rhs, [start, S::zero()], S::lit(1e12), opts, |_, y| {
        y[0] >= r_stop || model.drift_at(y[0]) <= stall * y[0].abs().max(S::one())
    })?;
    let last = traj.y.last().expect("nonempty")[0];
    if last < r_stop {
        return Err(FluidError::StallDetected {
            x: last.as_f64(),
            t: traj.t.last().expect("nonempty").as_f64(),
            r_stop: r_stop.as_f64(),
        });
    }
    traj.refine_for_interpolation(rhs, opts, opts.rel_tol)?;
    Ok(FluidPath {
        traj,
        tolerance: tol,
    })
}

/// Both estimates of `τ_r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauEstimates<S> {
    /// `∫_x^r du / drift(u)` by adaptive Gauss–Kronrod.
    pub quadrature: S,
    /// First passage of the fluid ODE solution through `r`.
    pub event: S,
    /// Agreement threshold that was applied.
    pub allowed: S,
}

impl<S: Scalar> TauEstimates<S> {
    pub fn agree(&self) -> bool {
        (self.quadrature - self.event).abs() <= self.allowed
    }
}

/// `∫_a^b du / drift(u)` with relative tolerance `tol`.
pub fn tau_quadrature<S: Scalar>(model: &ModelSpec<S>, a: S, b: S, tol: S) -> Result<S, FluidError> {
    check_level(model, a, b)?;
    let d = model.drift_at(b);
    if d < S::lit(MIN_DRIFT) {
        return Err(FluidError::NearEquilibrium {
            r: b.as_f64(),
            drift: d.as_f64(),
        });
    }
    let q = integrate(|u| model.drift_at(u).recip(), a, b, QuadOptions::relative(tol))?;
    Ok(q.value)
}

/// Computes `τ_r` by quadrature and by ODE event location.
pub fn tau_estimates<S: Scalar>(model: &ModelSpec<S>, r: S, tol: S) -> Result<TauEstimates<S>, FluidError> {
    if !(tol > S::zero()) {
        return Err(FluidError::BadTolerance(tol.as_f64()));
    }
    let quadrature = tau_quadrature(model, model.start(), r, tol)?;
    let path = solve_fluid(model, r, tol)?;
    let event = path.event_time(r).ok_or(FluidError::StallDetected {
        x: path.node_value(path.len() - 1).as_f64(),
        t: path.horizon().as_f64(),
        r_stop: r.as_f64(),
    })?;
    // Floor: time resolution of the level itself in floating point.
    let resolution = S::lit(10.0) * S::epsilon() * r.abs().max(S::one()) / model.drift_at(r);
    let allowed = (S::lit(10.0) * tol.max(S::tol_floor()) * quadrature).max(resolution);
    Ok(TauEstimates {
        quadrature,
        event,
        allowed,
    })
}

/// `τ_r`, cross-validated between quadrature and the ODE event time.
pub fn tau_of_r<S: Scalar>(model: &ModelSpec<S>, r: S, tol: S) -> Result<S, FluidError> {
    let est = tau_estimates(model, r, tol)?;
    if !est.agree() {
        return Err(FluidError::Consistency {
            quadrature: est.quadrature.as_f64(),
            event: est.event.as_f64(),
            allowed: est.allowed.as_f64(),
        });
    }
    Ok(est.quadrature)
}

/// `x'(τ_r) = drift(r)`.
pub fn fluid_derivative_at_tau<S: Scalar>(
    model: &ModelSpec<S>,
    path: &FluidPath<S>,
    r: S,
) -> Result<S, FluidError> {
    check_level(model, model.start(), r)?;
    if r > path.node_value(path.len() - 1) {
        return Err(FluidError::Range {
            r: r.as_f64(),
            x: model.start().as_f64(),
            x_inf: path.node_value(path.len() - 1).as_f64(),
        });
    }
    Ok(model.drift_at(r))
}
