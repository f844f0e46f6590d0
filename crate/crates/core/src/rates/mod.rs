//! Analytic deviation quantities along the fluid path.
//!
//! With `C(t) = Σ l_i F_i'(x_t)` and `β(t) = Σ l_i² F_i(x_t)`:
//!
//! * `σ²(r) = ∫_x^r Σ l_i² F_i(u) / (Σ l_i F_i(u))³ du` is the asymptotic
//!   variance of `√n(τ_r^n - τ_r)`, and `t² / (2σ²(r))` the moderate-deviation
//!   rate of both hitting-time tails;
//! * `I_T(f) = ½ ∫_0^T (f' - C f)² / β` is the moderate-deviation functional
//!   of the centred path, minimised under `f(T) = a` in closed form;
//! * `J_T` and `K_T` are the large-deviation functionals of the jump chain
//!   and of its diffusion approximation.

mod legendre;
mod path;
mod variational;

pub use legendre::{local_ld_rate, local_ld_rate_with_argmax, LEGENDRE_BRACKET};
pub use path::{
    path_rate_i, path_rate_j, path_rate_k, PathQuadrature, PathRate, PathStatus, PiecewiseLinearPath,
};
pub use variational::{variational_minimum, VariationalMinimum, DEFAULT_EXTREMAL_KNOTS};

use thiserror::Error;

use crate::fluid::{solve_fluid, tau_of_r, FluidError, FluidPath, MIN_DRIFT};
use crate::model::ModelSpec;
use crate::numeric::quad::{integrate, integrate_pieces, QuadOptions};
use crate::numeric::NumericError;
use crate::scalar::Scalar;

/// Relative tolerance of the `σ²(r)` quadrature.
pub const CLT_VARIANCE_TOL: f64 = 1e-10;

/// Denominators `∫ β e^{2∫C}` below this are treated as degenerate.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-14;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RateError {
    #[error("level {r} is outside ({x}, {x_inf})")]
    Range { r: f64, x: f64, x_inf: f64 },
    #[error("horizon {t} is outside (0, {horizon}]")]
    Horizon { t: f64, horizon: f64 },
    #[error("local variance vanishes at the start density {x}")]
    DegenerateStart { x: f64 },
    #[error("denominator ∫β e^(2∫C) = {value} is degenerate")]
    DegenerateDenominator { value: f64 },
    #[error("path must have strictly increasing knots starting at 0 and covering [0, {needed}]")]
    BadPath { needed: f64 },
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// `C`, `β` and `∫C` along a fluid path, with the model they derive from.
#[derive(Debug, Clone)]
pub struct RateProfile<S> {
    model: ModelSpec<S>,
    fluid: FluidPath<S>,
}

impl<S: Scalar> RateProfile<S> {
    /// Solves the fluid path up to `r_stop` at tolerance `tol`.
    pub fn new(model: &ModelSpec<S>, r_stop: S, tol: S) -> Result<Self, RateError> {
        let x = model.start();
        if !(model.beta_at(x) > S::zero()) {
            return Err(RateError::DegenerateStart { x: x.as_f64() });
        }
        let fluid = solve_fluid(model, r_stop, tol)?;
        Ok(Self {
            model: model.clone(),
            fluid,
        })
    }

    pub fn model(&self) -> &ModelSpec<S> {
        &self.model
    }

    pub fn fluid(&self) -> &FluidPath<S> {
        &self.fluid
    }

    pub fn horizon(&self) -> S {
        self.fluid.horizon()
    }

    /// `C(t) = Σ l_i F_i'(x_t)`.
    pub fn c(&self, t: S) -> S {
        self.model.drift_slope_at(self.fluid.value(t))
    }

    /// `β(t) = Σ l_i² F_i(x_t)`.
    pub fn beta(&self, t: S) -> S {
        self.model.beta_at(self.fluid.value(t))
    }

    /// `∫_0^t C`.
    pub fn cum_c(&self, t: S) -> S {
        self.fluid.cum_c(t)
    }

    fn check_level(&self, r: S) -> Result<(), RateError> {
        let x = self.model.start();
        let x_inf = self.model.x_infinity();
        if !(r > x && r < x_inf && self.model.domain().contains(r)) {
            return Err(RateError::Range {
                r: r.as_f64(),
                x: x.as_f64(),
                x_inf: x_inf.as_f64(),
            });
        }
        let d = self.model.drift_at(r);
        if d < S::lit(MIN_DRIFT) {
            return Err(FluidError::NearEquilibrium {
                r: r.as_f64(),
                drift: d.as_f64(),
            }
            .into());
        }
        Ok(())
    }

    fn check_horizon(&self, t: S) -> Result<(), RateError> {
        if !(t > S::zero() && t <= self.horizon()) {
            return Err(RateError::Horizon {
                t: t.as_f64(),
                horizon: self.horizon().as_f64(),
            });
        }
        Ok(())
    }

    /// Fluid nodes strictly inside `(0, t)` with both endpoints added.
    pub(crate) fn breakpoints(&self, t: S) -> Vec<S> {
        let mut pts = vec![S::zero()];
        pts.extend(
            self.fluid
                .times()
                .iter()
                .copied()
                .filter(|&s| s > S::zero() && s < t),
        );
        pts.push(t);
        pts
    }

    /// `∫_0^t β(u) e^{2∫_u^t C} du`.
    pub fn noise_integral(&self, t: S) -> Result<S, RateError> {
        self.check_horizon(t)?;
        let end = self.cum_c(t);
        let v = integrate_pieces(
            |u| self.beta(u) * (S::lit(2.0) * (end - self.cum_c(u))).exp(),
            &self.breakpoints(t),
            QuadOptions::relative(S::lit(1e-13)),
        )?;
        Ok(v)
    }

    /// `σ²(r) = ∫_x^r β(u) / drift(u)³ du`.
    pub fn clt_variance(&self, r: S) -> Result<S, RateError> {
        self.check_level(r)?;
        clt_variance_quadrature(&self.model, r, S::lit(CLT_VARIANCE_TOL))
    }

    /// `t² / (2σ²(r))`, shared by the upper and lower tail.
    pub fn mdp_rate(&self, r: S, t: S) -> Result<S, RateError> {
        let s2 = self.clt_variance(r)?;
        Ok(t * t / (S::lit(2.0) * s2))
    }

    /// Evaluates both sides of
    /// `∫_0^{τ_r} β e^{2∫_u^{τ_r} C} du = x'(τ_r)² σ²(r)` by independent routes:
    /// the left side in the time domain along the fluid path, the right side
    /// in the density domain.
    pub fn check_eq37_identity(&self, r: S) -> Result<IdentityCheck<S>, RateError> {
        self.check_level(r)?;
        let tau = tau_of_r(&self.model, r, self.fluid.tolerance())?;
        let lhs = self.noise_integral(tau)?;
        let slope = self.model.drift_at(r);
        let rhs = slope * slope * self.clt_variance(r)?;
        let relerr = if rhs == S::zero() {
            lhs.abs()
        } else {
            ((lhs - rhs) / rhs).abs()
        };
        Ok(IdentityCheck { lhs, rhs, relerr })
    }
}

/// `∫_x^r β / drift³` at relative tolerance `tol`, without a fluid path.
pub fn clt_variance_quadrature<S: Scalar>(model: &ModelSpec<S>, r: S, tol: S) -> Result<S, RateError> {
    let q = integrate(
        |u| {
            let d = model.drift_at(u);
            model.beta_at(u) / (d * d * d)
        },
        model.start(),
        r,
        QuadOptions::relative(tol),
    )?;
    Ok(q.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityCheck<S> {
    pub lhs: S,
    pub rhs: S,
    pub relerr: S,
}
