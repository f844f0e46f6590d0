//! One-dimensional density-dependent jump families: jump sizes `l_i`, rate
//! functions `F_i`, start density and the state domain.
//!
//! From density `u` the scaled chain `X^n` jumps by `l_i` at rate
//! `n F_i(X^n / n)`. The drift `Σ l_i F_i(u)` drives the fluid limit and
//! `Σ l_i² F_i(u)` is the local variance.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::numeric::{bisect, MonotoneCubic, NumericError};
use crate::scalar::Scalar;

/// Default number of validation grid points.
pub const DEFAULT_GRID_POINTS: usize = 10_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("a model needs at least one jump")]
    NoJumps,
    #[error("{jumps} jump sizes but {rates} rate functions")]
    ArityMismatch { jumps: usize, rates: usize },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("domain [{lo}, {hi}] is empty or does not contain the start density {start}")]
    BadDomain { lo: f64, hi: f64, start: f64 },
    #[error("rate function {index} is {value} at the origin, must vanish")]
    NonzeroAtOrigin { index: usize, value: f64 },
    #[error("rate function {index} is negative ({value}) at u = {u}")]
    NegativeRate { index: usize, u: f64, value: f64 },
    #[error("rate function {index} has a non-finite derivative at u = {u}")]
    UnboundedDerivative { index: usize, u: f64 },
    #[error("drift at the start density is {drift}, must be positive")]
    NonpositiveStartDrift { drift: f64 },
    #[error("density {u} is outside the model domain [{lo}, {hi}]")]
    OutOfDomain { u: f64, lo: f64, hi: f64 },
    #[error("jump size {value} is not finite and nonzero")]
    BadJump { value: f64 },
    #[error("rate table: {0}")]
    Table(#[from] NumericError),
}

type ScalarFn<S> = Arc<dyn Fn(S) -> S + Send + Sync>;

/// A rate function `u ↦ F(u)` with access to its derivative.
#[derive(Clone)]
pub enum RateFn<S> {
    /// `F(u) = coef · u`
    Linear { coef: S },
    /// `F(u) = coef · u (1 - u)`
    Logistic { coef: S },
    /// Monotone-cubic interpolation of tabulated `(u, F(u))` pairs.
    Tabulated(MonotoneCubic<S>),
    /// User closure; derivative by central differences when `derivative` is `None`.
    Closure {
        value: ScalarFn<S>,
        derivative: Option<ScalarFn<S>>,
    },
}

impl<S: Scalar> RateFn<S> {
    pub fn closure<F>(f: F) -> Self
    where
        F: Fn(S) -> S + Send + Sync + 'static,
    {
        RateFn::Closure {
            value: Arc::new(f),
            derivative: None,
        }
    }

    pub fn tabulated(u: Vec<S>, f: Vec<S>) -> Result<Self, ModelError> {
        Ok(RateFn::Tabulated(MonotoneCubic::new(u, f)?))
    }

    #[inline]
    pub fn value(&self, u: S) -> S {
        match self {
            RateFn::Linear { coef } => *coef * u,
            RateFn::Logistic { coef } => *coef * u * (S::one() - u),
            RateFn::Tabulated(table) => table.value(u),
            RateFn::Closure { value, .. } => value(u),
        }
    }

    pub fn derivative(&self, u: S) -> S {
        match self {
            RateFn::Linear { coef } => *coef,
            RateFn::Logistic { coef } => *coef * (S::one() - S::lit(2.0) * u),
            RateFn::Tabulated(table) => table.slope(u),
            RateFn::Closure {
                derivative: Some(d),
                ..
            } => d(u),
            RateFn::Closure { value, .. } => {
                let h = fd_step::<S>() * u.abs().max(S::one());
                (value(u + h) - value(u - h)) / (S::lit(2.0) * h)
            }
        }
    }
}

fn fd_step<S: Scalar>() -> S {
    // 1e-6 in double precision; single precision needs a coarser step.
    if S::epsilon() > S::lit(1e-10) {
        S::epsilon().cbrt()
    } else {
        S::lit(1e-6)
    }
}

impl<S: fmt::Debug> fmt::Debug for RateFn<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateFn::Linear { coef } => write!(f, "Linear({coef:?})"),
            RateFn::Logistic { coef } => write!(f, "Logistic({coef:?})"),
            RateFn::Tabulated(_) => write!(f, "Tabulated"),
            RateFn::Closure { derivative, .. } => write!(
                f,
                "Closure(derivative: {})",
                if derivative.is_some() { "analytic" } else { "finite difference" }
            ),
        }
    }
}

/// Closed interval of admissible densities; `hi` may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain<S> {
    pub lo: S,
    pub hi: S,
}

impl<S: Scalar> Domain<S> {
    pub fn new(lo: S, hi: S) -> Self {
        Self { lo, hi }
    }

    pub fn unit() -> Self {
        Self::new(S::zero(), S::one())
    }

    pub fn half_line() -> Self {
        Self::new(S::zero(), S::infinity())
    }

    #[inline]
    pub fn contains(&self, u: S) -> bool {
        u >= self.lo && u <= self.hi
    }
}

/// A validated density-dependent family. Immutable once built.
#[derive(Debug, Clone)]
pub struct ModelSpec<S> {
    jumps: Vec<S>,
    rates: Vec<RateFn<S>>,
    start: S,
    domain: Domain<S>,
    label: String,
    x_inf: S,
}

/// Incremental construction of a [`ModelSpec`]; validation happens in [`build`](Self::build).
#[derive(Debug, Clone)]
pub struct ModelBuilder<S> {
    jumps: Vec<S>,
    rates: Vec<RateFn<S>>,
    start: S,
    domain: Domain<S>,
    label: String,
    grid_points: usize,
}

impl<S: Scalar> ModelBuilder<S> {
    pub fn new(label: impl Into<String>) -> Self {
        Self {
            jumps: Vec::new(),
            rates: Vec::new(),
            start: S::zero(),
            domain: Domain::half_line(),
            label: label.into(),
            grid_points: DEFAULT_GRID_POINTS,
        }
    }

    pub fn jump(mut self, size: S, rate: RateFn<S>) -> Self {
        self.jumps.push(size);
        self.rates.push(rate);
        self
    }

    pub fn start(mut self, x: S) -> Self {
        self.start = x;
        self
    }

    pub fn domain(mut self, lo: S, hi: S) -> Self {
        self.domain = Domain::new(lo, hi);
        self
    }

    pub fn grid_points(mut self, points: usize) -> Self {
        self.grid_points = points.max(2);
        self
    }

    pub fn build(self) -> Result<ModelSpec<S>, ModelError> {
        let ModelBuilder {
            jumps,
            rates,
            start,
            domain,
            label,
            grid_points,
        } = self;
        if jumps.is_empty() {
            return Err(ModelError::NoJumps);
        }
        if jumps.len() != rates.len() {
            return Err(ModelError::ArityMismatch {
                jumps: jumps.len(),
                rates: rates.len(),
            });
        }
        if let Some(&l) = jumps.iter().find(|l| !l.is_finite() || **l == S::zero()) {
            return Err(ModelError::BadJump { value: l.as_f64() });
        }
        if !(domain.lo.is_finite() && domain.lo <= domain.hi && domain.contains(start)) {
            return Err(ModelError::BadDomain {
                lo: domain.lo.as_f64(),
                hi: domain.hi.as_f64(),
                start: start.as_f64(),
            });
        }
        let origin_tol = S::lit(1e-12).max(S::tol_floor());
        for (index, rate) in rates.iter().enumerate() {
            let value = rate.value(S::zero());
            if !(value.abs() <= origin_tol) {
                return Err(ModelError::NonzeroAtOrigin {
                    index,
                    value: value.as_f64(),
                });
            }
        }

        // Rates must be nonnegative with finite derivative on the declared domain.
        let hi_eff = if domain.hi.is_finite() {
            domain.hi
        } else {
            domain.lo + S::lit(10.0) * start.abs().max(S::one())
        };
        let span = hi_eff - domain.lo;
        let steps = S::lit((grid_points - 1) as f64);
        for k in 0..grid_points {
            let u = domain.lo + span * S::lit(k as f64) / steps;
            for (index, rate) in rates.iter().enumerate() {
                let value = rate.value(u);
                if !(value >= S::zero()) {
                    return Err(ModelError::NegativeRate {
                        index,
                        u: u.as_f64(),
                        value: value.as_f64(),
                    });
                }
                if !rate.derivative(u).is_finite() {
                    return Err(ModelError::UnboundedDerivative { index, u: u.as_f64() });
                }
            }
        }

        let mut model = ModelSpec {
            jumps,
            rates,
            start,
            domain,
            label,
            x_inf: S::infinity(),
        };
        let d0 = model.drift_at(start);
        if !(d0 > S::zero()) {
            return Err(ModelError::NonpositiveStartDrift { drift: d0.as_f64() });
        }
        model.x_inf = model.locate_x_infinity(grid_points);
        Ok(model)
    }
}

impl<S: Scalar> ModelSpec<S> {
    pub fn builder(label: impl Into<String>) -> ModelBuilder<S> {
        ModelBuilder::new(label)
    }

    /// Birth–death chain: `l = (+1, -1)`, `F₁(u) = λu`, `F₂(u) = θu` on `[0, ∞)`.
    pub fn birth_death(lambda: S, theta: S, x: S) -> Result<Self, ModelError> {
        check_param("lambda", lambda)?;
        check_param("theta", theta)?;
        ModelBuilder::new(format!("birth_death(lambda={lambda}, theta={theta}, x={x})"))
            .jump(S::one(), RateFn::Linear { coef: lambda })
            .jump(-S::one(), RateFn::Linear { coef: theta })
            .start(x)
            .domain(S::zero(), S::infinity())
            .build()
    }

    /// SIS epidemic on the complete graph: `l = (+1, -1)`,
    /// `F₁(u) = λu(1-u)`, `F₂(u) = θu` on `[0, 1]`.
    pub fn sis(lambda: S, theta: S, x: S) -> Result<Self, ModelError> {
        check_param("lambda", lambda)?;
        check_param("theta", theta)?;
        ModelBuilder::new(format!("sis(lambda={lambda}, theta={theta}, x={x})"))
            .jump(S::one(), RateFn::Logistic { coef: lambda })
            .jump(-S::one(), RateFn::Linear { coef: theta })
            .start(x)
            .domain(S::zero(), S::one())
            .build()
    }

    /// Yule process: a single `+1` jump at rate `λu`.
    pub fn pure_birth(lambda: S, x: S) -> Result<Self, ModelError> {
        check_param("lambda", lambda)?;
        ModelBuilder::new(format!("pure_birth(lambda={lambda}, x={x})"))
            .jump(S::one(), RateFn::Linear { coef: lambda })
            .start(x)
            .domain(S::zero(), S::infinity())
            .build()
    }

    pub fn jumps(&self) -> &[S] {
        &self.jumps
    }

    pub fn rates(&self) -> &[RateFn<S>] {
        &self.rates
    }

    pub fn num_jumps(&self) -> usize {
        self.jumps.len()
    }

    pub fn start(&self) -> S {
        self.start
    }

    pub fn domain(&self) -> Domain<S> {
        self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    fn check_domain(&self, u: S) -> Result<(), ModelError> {
        if self.domain.contains(u) {
            Ok(())
        } else {
            Err(ModelError::OutOfDomain {
                u: u.as_f64(),
                lo: self.domain.lo.as_f64(),
                hi: self.domain.hi.as_f64(),
            })
        }
    }

    /// `Σ l_i F_i(u)`.
    pub fn drift(&self, u: S) -> Result<S, ModelError> {
        self.check_domain(u)?;
        Ok(self.drift_at(u))
    }

    /// `Σ l_i² F_i(u)`.
    pub fn beta_of_u(&self, u: S) -> Result<S, ModelError> {
        self.check_domain(u)?;
        Ok(self.beta_at(u))
    }

    /// [`drift`](Self::drift) without the domain check.
    #[inline]
    pub fn drift_at(&self, u: S) -> S {
        self.jumps
            .iter()
            .zip(&self.rates)
            .fold(S::zero(), |acc, (&l, f)| acc + l * f.value(u))
    }

    /// [`beta_of_u`](Self::beta_of_u) without the domain check.
    #[inline]
    pub fn beta_at(&self, u: S) -> S {
        self.jumps
            .iter()
            .zip(&self.rates)
            .fold(S::zero(), |acc, (&l, f)| acc + l * l * f.value(u))
    }

    /// `Σ l_i F_i'(u)`, the linearised drift.
    #[inline]
    pub fn drift_slope_at(&self, u: S) -> S {
        self.jumps
            .iter()
            .zip(&self.rates)
            .fold(S::zero(), |acc, (&l, f)| acc + l * f.derivative(u))
    }

    /// `Σ F_i(u)`: total jump intensity per unit of `n`.
    #[inline]
    pub fn total_rate_at(&self, u: S) -> S {
        self.rates.iter().fold(S::zero(), |acc, f| acc + f.value(u))
    }

    /// First zero of the drift strictly above the start density, or `+∞`.
    pub fn x_infinity(&self) -> S {
        self.x_inf
    }

    fn locate_x_infinity(&self, grid_points: usize) -> S {
        let x = self.start;
        let bisect_tol = S::lit(1e-12).max(S::tol_floor() * x.abs().max(S::one()));
        let root_between = |a: S, b: S| {
            bisect(|u| self.drift_at(u), a, b, bisect_tol).unwrap_or(b)
        };
        let mut prev = x;
        if self.domain.hi.is_finite() {
            let span = self.domain.hi - x;
            if span <= S::zero() {
                return S::infinity();
            }
            let steps = S::lit(grid_points as f64);
            for k in 1..=grid_points {
                let u = if k == grid_points {
                    self.domain.hi
                } else {
                    x + span * S::lit(k as f64) / steps
                };
                if self.drift_at(u) <= S::zero() {
                    return root_between(prev, u);
                }
                prev = u;
            }
            S::infinity()
        } else {
            // Geometric scan out to 1e12 times the start scale.
            let scale = x.abs().max(S::one());
            let limit = x + scale * S::lit(1e12);
            let mut k = 1;
            loop {
                let u = x + scale * (S::lit(2.0).powf(S::lit(k as f64 / 100.0)) - S::one());
                if u > limit || !u.is_finite() {
                    return S::infinity();
                }
                if self.drift_at(u) <= S::zero() {
                    return root_between(prev, u);
                }
                prev = u;
                k += 1;
            }
        }
    }

    /// Central-difference Lipschitz estimate `L = M · max|l_i| · max|F_i'|`
    /// over `points` evenly spaced densities in `[lo, hi]`.
    pub fn lipschitz_estimate(&self, lo: S, hi: S, points: usize) -> S {
        let max_jump = self.jumps.iter().fold(S::zero(), |m, l| m.max(l.abs()));
        let mut max_slope = S::zero();
        let steps = S::lit((points.max(2) - 1) as f64);
        for k in 0..points.max(2) {
            let u = lo + (hi - lo) * S::lit(k as f64) / steps;
            for f in &self.rates {
                max_slope = max_slope.max(f.derivative(u).abs());
            }
        }
        S::lit(self.jumps.len() as f64) * max_jump * max_slope
    }
}

fn check_param<S: Scalar>(name: &'static str, value: S) -> Result<(), ModelError> {
    if value.is_finite() && value >= S::zero() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter {
            name,
            value: value.as_f64(),
        })
    }
}
