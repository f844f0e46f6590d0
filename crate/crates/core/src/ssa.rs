//! Exact event-driven simulation of the jump chain and its first passage
//! above `n·r`.
//!
//! The state is kept as an integer multiple of the jump lattice `1/d`, where
//! `d` is the smallest denominator making every jump size integral, so
//! repeated jumps never accumulate rounding error.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::ModelSpec;
use crate::rng::StreamKey;

/// Largest lattice denominator searched for rational jump sizes.
pub const MAX_LATTICE_DENOMINATOR: i64 = 1_000_000;

/// Default horizon as a multiple of `τ_r`.
pub const DEFAULT_T_MAX_MULTIPLIER: f64 = 10.0;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SsaError {
    #[error("system size n must be positive")]
    InvalidN,
    #[error("level {r} is outside ({x}, {x_inf})")]
    Range { r: f64, x: f64, x_inf: f64 },
    #[error("horizon t_max must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("jump sizes are not multiples of 1/d for any d ≤ {MAX_LATTICE_DENOMINATOR}")]
    NonLattice,
    #[error("record stride must be positive")]
    BadStride,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorReason {
    None,
    /// Total jump rate fell to zero before the level was reached.
    Extinct,
    /// `t_max` elapsed before the level was reached.
    Horizon,
}

impl CensorReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            CensorReason::None => "none",
            CensorReason::Extinct => "extinct",
            CensorReason::Horizon => "horizon",
        }
    }
}

/// Outcome of one replica.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HittingSample {
    pub hit: bool,
    /// Hitting time when `hit`; otherwise the time the run stopped.
    pub tau: f64,
    /// Jumps executed (time steps for the diffusion engine).
    pub events: u64,
    /// Final state in lattice units (`X·d`, or `round(n·Z)` for the diffusion).
    pub terminal_state: i64,
    /// Final state divided by `n`.
    pub terminal_density: f64,
    pub key: StreamKey,
    pub censor_reason: CensorReason,
    /// Rate evaluations that returned a negative or non-finite value and were
    /// clamped to zero.
    pub clamped_rates: u64,
}

/// Finds the smallest `d` making every `l·d` an integer.
fn lattice_denominator(jumps: &[f64]) -> Option<i64> {
    (1..=MAX_LATTICE_DENOMINATOR).find(|&d| {
        jumps.iter().all(|&l| {
            let v = l * d as f64;
            (v - v.round()).abs() <= 1e-9 * l.abs().max(1.0)
        })
    })
}

fn ceil_tolerant(v: f64) -> i64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * v.abs().max(1.0) {
        r as i64
    } else {
        v.ceil() as i64
    }
}

/// Prepared simulator for one `(model, n, r, t_max)`; replicas differ only
/// in their stream key.
#[derive(Debug, Clone)]
pub struct Ssa<'a> {
    model: &'a ModelSpec<f64>,
    n: f64,
    denom: i64,
    steps: Vec<i64>,
    start: i64,
    target: i64,
    t_max: f64,
}

impl<'a> Ssa<'a> {
    pub fn new(model: &'a ModelSpec<f64>, n: u64, r: f64, t_max: f64) -> Result<Self, SsaError> {
        if n == 0 {
            return Err(SsaError::InvalidN);
        }
        let x = model.start();
        let x_inf = model.x_infinity();
        if !(r > x && r < x_inf) {
            return Err(SsaError::Range { r, x, x_inf });
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(SsaError::BadHorizon(t_max));
        }
        let denom = lattice_denominator(model.jumps()).ok_or(SsaError::NonLattice)?;
        let steps = model
            .jumps()
            .iter()
            .map(|&l| (l * denom as f64).round() as i64)
            .collect();
        let nf = n as f64;
        let nx = nf * x;
        let x0 = nx.round();
        if (nx - x0).abs() > 1e-9 * nx.abs().max(1.0) {
            log::warn!("n·x = {nx} is not an integer; starting from {x0}");
        }
        Ok(Self {
            model,
            n: nf,
            denom,
            steps,
            start: x0 as i64 * denom,
            target: ceil_tolerant(nf * r * denom as f64),
            t_max,
        })
    }

    /// Lattice denominator `d`.
    pub fn denominator(&self) -> i64 {
        self.denom
    }

    /// Initial state in lattice units.
    pub fn start_state(&self) -> i64 {
        self.start
    }

    /// Smallest lattice state counted as a hit.
    pub fn target_state(&self) -> i64 {
        self.target
    }

    fn density(&self, k: i64) -> f64 {
        k as f64 / (self.denom as f64 * self.n)
    }

    pub fn run(&self, key: StreamKey) -> HittingSample {
        self.simulate(key, None)
    }

    /// Runs one replica and records `(t, X/n)` at the start, after every
    /// `stride`-th jump, and at termination.
    pub fn run_path(&self, key: StreamKey, stride: u64) -> Result<(HittingSample, Vec<(f64, f64)>), SsaError> {
        if stride == 0 {
            return Err(SsaError::BadStride);
        }
        let mut rec = Vec::new();
        let s = self.simulate(key, Some((stride, &mut rec)));
        Ok((s, rec))
    }

    fn simulate(&self, key: StreamKey, mut record: Option<(u64, &mut Vec<(f64, f64)>)>) -> HittingSample {
        let mut rng = key.rng();
        let rates = self.model.rates();
        let m = rates.len();
        let mut a = vec![0.0f64; m];
        let mut k = self.start;
        let mut t = 0.0f64;
        let mut events = 0u64;
        let mut clamped = 0u64;
        if let Some((_, rec)) = record.as_mut() {
            rec.push((t, self.density(k)));
        }

        let reason = loop {
            if k >= self.target {
                break CensorReason::None;
            }
            let u = self.density(k);
            let mut total = 0.0;
            for (ai, f) in a.iter_mut().zip(rates) {
                let v = f.value(u);
                *ai = if v > 0.0 && v.is_finite() {
                    self.n * v
                } else {
                    if v != 0.0 {
                        clamped += 1;
                    }
                    0.0
                };
                total += *ai;
            }
            if !(total > 0.0) {
                break CensorReason::Extinct;
            }
            let wait: f64 = rng.sample(Exp1);
            t += wait / total;
            if t > self.t_max {
                t = self.t_max;
                break CensorReason::Horizon;
            }
            let mut pick = rng.random::<f64>() * total;
            let mut i = 0;
            while i + 1 < m {
                if pick < a[i] {
                    break;
                }
                pick -= a[i];
                i += 1;
            }
            // Guard against rounding landing on a zero-rate reaction.
            while a[i] == 0.0 {
                i -= 1;
            }
            k += self.steps[i];
            events += 1;
            if let Some((stride, rec)) = record.as_mut() {
                if events.is_multiple_of(*stride) {
                    rec.push((t, self.density(k)));
                }
            }
        };

        if let Some((stride, rec)) = record {
            if events == 0 || !events.is_multiple_of(stride) {
                rec.push((t, self.density(k)));
            }
        }
        HittingSample {
            hit: reason == CensorReason::None,
            tau: t,
            events,
            terminal_state: k,
            terminal_density: self.density(k),
            key,
            censor_reason: reason,
            clamped_rates: clamped,
        }
    }
}

/// Simulates one replica until `X ≥ n·r`, extinction, or `t_max`.
pub fn simulate_hitting(
    model: &ModelSpec<f64>,
    n: u64,
    r: f64,
    key: StreamKey,
    t_max: f64,
) -> Result<HittingSample, SsaError> {
    Ok(Ssa::new(model, n, r, t_max)?.run(key))
}

/// Like [`simulate_hitting`], also returning the recorded trajectory.
pub fn simulate_path(
    model: &ModelSpec<f64>,
    n: u64,
    r: f64,
    key: StreamKey,
    t_max: f64,
    record_stride: u64,
) -> Result<(HittingSample, Vec<(f64, f64)>), SsaError> {
    Ssa::new(model, n, r, t_max)?.run_path(key, record_stride)
}
