//! Euler–Maruyama simulation of the diffusion approximation
//! `dZ = drift(Z) dt + sqrt(β(Z)/n) dW` and its first passage to `r`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fluid::{tau_of_r, FluidError, DEFAULT_TAU_TOL};
use crate::model::ModelSpec;
use crate::rng::StreamKey;
use crate::ssa::{CensorReason, HittingSample};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiffusionError {
    #[error("system size n must be positive")]
    InvalidN,
    #[error("step dt = {dt} must be positive and at most τ_r/100 = {limit}")]
    StepTooLarge { dt: f64, limit: f64 },
    #[error("horizon t_max must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error(transparent)]
    Fluid(#[from] FluidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionConfig {
    pub n: u64,
    pub dt: f64,
    /// Detects crossings between grid points via the Brownian-bridge law.
    pub bridge_correction: bool,
    /// When false the Gaussian increments are multiplied by zero, leaving the
    /// Euler scheme for the fluid ODE (the random stream is still consumed).
    pub noise: bool,
    pub seed: u64,
    pub t_max: f64,
}

impl DiffusionConfig {
    /// `dt = min(10⁻³, τ_r/10³)`, bridge on, noise on, `t_max = 10 τ_r`.
    pub fn for_level(model: &ModelSpec<f64>, n: u64, r: f64, seed: u64) -> Result<Self, DiffusionError> {
        let tau = tau_of_r(model, r, DEFAULT_TAU_TOL)?;
        Ok(Self {
            n,
            dt: default_dt(tau),
            bridge_correction: true,
            noise: true,
            seed,
            t_max: 10.0 * tau,
        })
    }
}

/// `min(10⁻³, τ_r/10³)`.
pub fn default_dt(tau_r: f64) -> f64 {
    1e-3f64.min(tau_r / 1e3)
}

/// Prepared diffusion runner for one `(model, config, r)`.
#[derive(Debug, Clone)]
pub struct Diffusion<'a> {
    model: &'a ModelSpec<f64>,
    cfg: DiffusionConfig,
    r: f64,
    tau_r: f64,
}

impl<'a> Diffusion<'a> {
    pub fn new(model: &'a ModelSpec<f64>, cfg: DiffusionConfig, r: f64) -> Result<Self, DiffusionError> {
        if cfg.n == 0 {
            return Err(DiffusionError::InvalidN);
        }
        let tau_r = tau_of_r(model, r, DEFAULT_TAU_TOL)?;
        let limit = tau_r / 100.0;
        if !(cfg.dt > 0.0 && cfg.dt <= limit) {
            return Err(DiffusionError::StepTooLarge { dt: cfg.dt, limit });
        }
        if !(cfg.t_max > 0.0 && cfg.t_max.is_finite()) {
            return Err(DiffusionError::BadHorizon(cfg.t_max));
        }
        Ok(Self { model, cfg, r, tau_r })
    }

    pub fn config(&self) -> &DiffusionConfig {
        &self.cfg
    }

    pub fn tau_r(&self) -> f64 {
        self.tau_r
    }

    /// Drift and local variance with negative rate values clamped to zero.
    fn coefficients(&self, z: f64, clamped: &mut u64) -> (f64, f64) {
        let mut drift = 0.0;
        let mut beta = 0.0;
        for (&l, f) in self.model.jumps().iter().zip(self.model.rates()) {
            let v = f.value(z);
            let v = if v >= 0.0 && v.is_finite() {
                v
            } else {
                *clamped += 1;
                0.0
            };
            drift += l * v;
            beta += l * l * v;
        }
        (drift, beta)
    }

    pub fn run(&self, replica: u64) -> HittingSample {
        self.simulate(replica, 1)
    }

    /// Runs at step `factor·dt`, building each increment from `factor`
    /// consecutive draws of the `dt` stream, so the result is coupled to
    /// [`run`](Self::run) through a common Brownian path. The bridge test of
    /// a coarse step uses the first uniform of its group.
    pub fn run_coarsened(&self, replica: u64, factor: u32) -> HittingSample {
        self.simulate(replica, factor.max(1))
    }

    fn simulate(&self, replica: u64, factor: u32) -> HittingSample {
        let key = StreamKey::new(self.cfg.seed, replica);
        let mut rng = key.rng();
        let n = self.cfg.n as f64;
        let dt = self.cfg.dt * factor as f64;
        let sqrt_dt = self.cfg.dt.sqrt();
        let r = self.r;
        let mut z = self.model.start();
        let mut t = 0.0;
        let mut steps = 0u64;
        let mut clamped = 0u64;

        let (reason, tau) = loop {
            if z >= r {
                break (CensorReason::None, t);
            }
            let (drift, beta) = self.coefficients(z, &mut clamped);
            // Sum of `factor` increments over sub-steps of length cfg.dt.
            let mut w = 0.0;
            let mut u = 0.0;
            for j in 0..factor {
                let xi: f64 = rng.sample(StandardNormal);
                let v: f64 = rng.random();
                w += xi;
                if j == 0 {
                    u = v;
                }
            }
            let noise = if self.cfg.noise { (beta / n).sqrt() * sqrt_dt * w } else { 0.0 };
            let z_next = z + drift * dt + noise;
            steps += 1;
            if z_next >= r {
                let frac = ((r - z) / (z_next - z)).clamp(0.0, 1.0);
                z = z_next;
                break (CensorReason::None, t + frac * dt);
            }
            if self.cfg.bridge_correction && self.cfg.noise && beta > 0.0 {
                let p = (-2.0 * (r - z) * (r - z_next) * n / (beta * dt)).exp();
                if u < p {
                    z = r;
                    break (CensorReason::None, t + 0.5 * dt);
                }
            }
            z = z_next;
            t += dt;
            if z <= 0.0 && self.coefficients(z, &mut clamped).0 <= 0.0 {
                break (CensorReason::Extinct, t);
            }
            if t >= self.cfg.t_max {
                break (CensorReason::Horizon, self.cfg.t_max);
            }
        };
        HittingSample {
            hit: reason == CensorReason::None,
            tau,
            events: steps,
            terminal_state: (z * n).round() as i64,
            terminal_density: z,
            key,
            censor_reason: reason,
            clamped_rates: clamped,
        }
    }
}

/// Simulates one replica (stream 0 of `cfg.seed`) of the diffusion hitting time.
pub fn simulate_diffusion_hitting(
    model: &ModelSpec<f64>,
    cfg: DiffusionConfig,
    r: f64,
) -> Result<HittingSample, DiffusionError> {
    Ok(Diffusion::new(model, cfg, r)?.run(0))
}
