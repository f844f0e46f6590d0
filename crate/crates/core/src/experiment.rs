//! Replica batches and the empirical moderate-deviation and CLT statistics
//! built from them.
//!
//! With scaled deviations `d = (n/a_n)(τ_r^n - τ_r)`, the upper tail at `t`
//! counts `d > t` and the lower tail counts `d < -t`. Tail estimates are
//! `-(n/a_n²) ln(count/m)`, compared with `t²/(2σ²(r))`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ModelConfig;
use crate::diffusion::{default_dt, Diffusion, DiffusionConfig, DiffusionError};
use crate::fluid::{tau_of_r, FluidError, DEFAULT_TAU_TOL};
use crate::model::{ModelError, ModelSpec};
use crate::rates::{RateError, RateProfile};
use crate::rng::{StreamKey, DEFAULT_SEED};
use crate::ssa::{CensorReason, HittingSample, Ssa, SsaError, DEFAULT_T_MAX_MULTIPLIER};
use crate::stats::{anderson_darling_normal, mean_variance, wilson_interval, Z95};

/// Tail counts below this are reported but not compared with theory.
pub const MIN_TAIL_COUNT: u64 = 30;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("none of the {m} replicas reached the level")]
    AllCensored { m: u64 },
    #[error("tail counts over different time grids cannot be merged")]
    GridMismatch,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fluid(#[from] FluidError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Ssa(#[from] SsaError),
    #[error(transparent)]
    Diffusion(#[from] DiffusionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    #[default]
    Ssa,
    Diffusion,
}

impl Engine {
    pub fn as_str(&self) -> &'static str {
        match self {
            Engine::Ssa => "ssa",
            Engine::Diffusion => "diffusion",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiffusionSettings {
    /// Step size; `None` picks `min(10⁻³, τ_r/10³)`.
    pub dt: Option<f64>,
    pub bridge_correction: bool,
    pub noise: bool,
}

impl Default for DiffusionSettings {
    fn default() -> Self {
        Self {
            dt: None,
            bridge_correction: true,
            noise: true,
        }
    }
}

fn default_alpha() -> f64 {
    0.9
}

fn default_t_grid() -> Vec<f64> {
    (0..=12).map(|k| 0.25 * k as f64).collect()
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_t_max_multiplier() -> f64 {
    DEFAULT_T_MAX_MULTIPLIER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub n: u64,
    /// `a_n = n^alpha`, with `0.5 < alpha < 1`.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub r: f64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    pub replicas: u64,
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub engine: Engine,
    /// `t_max = t_max_multiplier · τ_r`.
    #[serde(default = "default_t_max_multiplier")]
    pub t_max_multiplier: f64,
    #[serde(default)]
    pub diffusion: DiffusionSettings,
}

impl ExperimentConfig {
    /// Birth–death `λ = 1.1, θ = 1, x = 1`, `r = 2`, `n = m = 10⁴`, `a_n = n^0.9`.
    pub fn birth_death_example() -> Self {
        Self {
            model: ModelConfig::birth_death_example(),
            n: 10_000,
            alpha: default_alpha(),
            r: 2.0,
            t_grid: default_t_grid(),
            replicas: 10_000,
            master_seed: DEFAULT_SEED,
            engine: Engine::Ssa,
            t_max_multiplier: DEFAULT_T_MAX_MULTIPLIER,
            diffusion: DiffusionSettings::default(),
        }
    }

    /// SIS `λ = 3, θ = 1, x = 1/2`, `r = 0.6`, `n = m = 10⁴`, `a_n = n^0.9`.
    pub fn sis_example() -> Self {
        Self {
            model: ModelConfig::sis_example(),
            r: 0.6,
            ..Self::birth_death_example()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidConfig(m.into()));
        if !(self.alpha > 0.5 && self.alpha < 1.0) {
            return bad("alpha must lie in (0.5, 1)");
        }
        if self.n == 0 {
            return bad("n must be positive");
        }
        if self.replicas == 0 {
            return bad("replicas must be at least 1");
        }
        if self.t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return bad("t_grid entries must be finite and nonnegative");
        }
        if !(self.t_max_multiplier > 0.0 && self.t_max_multiplier.is_finite()) {
            return bad("t_max_multiplier must be positive");
        }
        Ok(())
    }

    pub fn a_n(&self) -> f64 {
        (self.n as f64).powf(self.alpha)
    }
}

/// Hitting samples of one engine for one configuration.
#[derive(Debug, Clone)]
pub struct ReplicaBatch {
    pub engine: Engine,
    pub tau_r: f64,
    pub samples: Vec<HittingSample>,
}

impl ReplicaBatch {
    pub fn hits(&self) -> u64 {
        self.samples.iter().filter(|s| s.hit).count() as u64
    }
}

/// Runs `cfg.replicas` replicas of `engine` in parallel on the current rayon
/// pool; replica `i` uses stream `(cfg.master_seed, i)`.
pub fn run_replicas(
    cfg: &ExperimentConfig,
    model: &ModelSpec<f64>,
    engine: Engine,
) -> Result<ReplicaBatch, ExperimentError> {
    cfg.validate()?;
    let tau_r = tau_of_r(model, cfg.r, DEFAULT_TAU_TOL)?;
    let t_max = cfg.t_max_multiplier * tau_r;
    let samples = match engine {
        Engine::Ssa => {
            let sim = Ssa::new(model, cfg.n, cfg.r, t_max)?;
            (0..cfg.replicas)
                .into_par_iter()
                .map(|i| sim.run(StreamKey::new(cfg.master_seed, i)))
                .collect()
        }
        Engine::Diffusion => {
            let dcfg = DiffusionConfig {
                n: cfg.n,
                dt: cfg.diffusion.dt.unwrap_or_else(|| default_dt(tau_r)),
                bridge_correction: cfg.diffusion.bridge_correction,
                noise: cfg.diffusion.noise,
                seed: cfg.master_seed,
                t_max,
            };
            let sim = Diffusion::new(model, dcfg, cfg.r)?;
            (0..cfg.replicas).into_par_iter().map(|i| sim.run(i)).collect()
        }
    };
    Ok(ReplicaBatch {
        engine,
        tau_r,
        samples,
    })
}

/// Per-`t` tail counts; a commutative monoid under [`TailCounts::merge`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCounts {
    pub t_grid: Vec<f64>,
    pub upper: Vec<u64>,
    pub lower: Vec<u64>,
    pub m: u64,
    pub hits: u64,
    pub extinct: u64,
    pub horizon: u64,
}

impl TailCounts {
    pub fn empty(t_grid: &[f64]) -> Self {
        Self {
            t_grid: t_grid.to_vec(),
            upper: vec![0; t_grid.len()],
            lower: vec![0; t_grid.len()],
            m: 0,
            hits: 0,
            extinct: 0,
            horizon: 0,
        }
    }

    /// Adds one replica. A censored replica counts as never hitting: it is in
    /// every upper tail and in no lower tail.
    pub fn observe(&mut self, s: &HittingSample, tau_r: f64, scale: f64) {
        self.m += 1;
        match s.censor_reason {
            CensorReason::None => {
                self.hits += 1;
                let d = scale * (s.tau - tau_r);
                for (k, &t) in self.t_grid.iter().enumerate() {
                    if d > t {
                        self.upper[k] += 1;
                    }
                    if d < -t {
                        self.lower[k] += 1;
                    }
                }
            }
            reason => {
                if reason == CensorReason::Extinct {
                    self.extinct += 1;
                } else {
                    self.horizon += 1;
                }
                self.upper.iter_mut().for_each(|c| *c += 1);
            }
        }
    }

    pub fn from_samples(samples: &[HittingSample], tau_r: f64, scale: f64, t_grid: &[f64]) -> Self {
        let mut c = Self::empty(t_grid);
        for s in samples {
            c.observe(s, tau_r, scale);
        }
        c
    }

    pub fn merge(mut self, other: &TailCounts) -> Result<Self, ExperimentError> {
        if self.t_grid != other.t_grid {
            return Err(ExperimentError::GridMismatch);
        }
        for (a, b) in self.upper.iter_mut().zip(&other.upper) {
            *a += b;
        }
        for (a, b) in self.lower.iter_mut().zip(&other.lower) {
            *a += b;
        }
        self.m += other.m;
        self.hits += other.hits;
        self.extinct += other.extinct;
        self.horizon += other.horizon;
        Ok(self)
    }

    pub fn censored(&self) -> u64 {
        self.m - self.hits
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub t: f64,
    pub upper_count: u64,
    pub lower_count: u64,
    pub upper_est: f64,
    pub lower_est: f64,
    /// Wilson 95% band of the upper estimate.
    pub upper_band: (f64, f64),
    /// Wilson 95% band of the lower estimate.
    pub lower_band: (f64, f64),
    /// `t²/(2σ²(r))`, shared by both tails.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCurve {
    pub engine: Engine,
    pub n: u64,
    pub a_n: f64,
    pub m: u64,
    pub tau_r: f64,
    pub censored_fraction: f64,
    pub rows: Vec<CurveRow>,
}

/// `-(n/a_n²) ln(count/m)`, `+∞` for a zero count.
fn tail_estimate(count: u64, m: u64, c: f64) -> f64 {
    if count == 0 {
        f64::INFINITY
    } else {
        -c * (count as f64 / m as f64).ln() + 0.0
    }
}

/// Wilson interval of `count/m` mapped through `p ↦ -(n/a_n²) ln p`.
fn tail_band(count: u64, m: u64, c: f64) -> (f64, f64) {
    let (lo, hi) = wilson_interval(count, m, Z95);
    let map = |p: f64| if p <= 0.0 { f64::INFINITY } else { -c * p.ln() + 0.0 };
    (map(hi), map(lo))
}

impl EmpiricalCurve {
    pub fn from_counts(
        counts: &TailCounts,
        engine: Engine,
        n: u64,
        a_n: f64,
        tau_r: f64,
        rate: impl Fn(f64) -> Result<f64, RateError>,
    ) -> Result<Self, ExperimentError> {
        let c = n as f64 / (a_n * a_n);
        let m = counts.m;
        let rows = counts
            .t_grid
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                Ok(CurveRow {
                    t,
                    upper_count: counts.upper[k],
                    lower_count: counts.lower[k],
                    upper_est: tail_estimate(counts.upper[k], m, c),
                    lower_est: tail_estimate(counts.lower[k], m, c),
                    upper_band: tail_band(counts.upper[k], m, c),
                    lower_band: tail_band(counts.lower[k], m, c),
                    rate: rate(t)?,
                })
            })
            .collect::<Result<Vec<_>, RateError>>()?;
        Ok(Self {
            engine,
            n,
            a_n,
            m,
            tau_r,
            censored_fraction: counts.censored() as f64 / m as f64,
            rows,
        })
    }
}

fn profile_for(cfg: &ExperimentConfig, model: &ModelSpec<f64>) -> Result<RateProfile<f64>, ExperimentError> {
    Ok(RateProfile::new(model, cfg.r, DEFAULT_TAU_TOL)?)
}

/// Builds the curve of `batch` for `cfg`.
pub fn curve_from_batch(
    cfg: &ExperimentConfig,
    profile: &RateProfile<f64>,
    batch: &ReplicaBatch,
) -> Result<EmpiricalCurve, ExperimentError> {
    let m = batch.samples.len() as u64;
    if batch.hits() == 0 {
        return Err(ExperimentError::AllCensored { m });
    }
    let a_n = cfg.a_n();
    let scale = cfg.n as f64 / a_n;
    let counts = TailCounts::from_samples(&batch.samples, batch.tau_r, scale, &cfg.t_grid);
    if counts.censored() > 0 {
        log::warn!(
            "{} of {m} replicas censored ({} extinct, {} at horizon)",
            counts.censored(),
            counts.extinct,
            counts.horizon
        );
    }
    EmpiricalCurve::from_counts(&counts, batch.engine, cfg.n, a_n, batch.tau_r, |t| {
        profile.mdp_rate(cfg.r, t)
    })
}

/// Empirical moderate-deviation curve for `cfg.engine`.
pub fn run_mdp_experiment(cfg: &ExperimentConfig) -> Result<EmpiricalCurve, ExperimentError> {
    let model = cfg.model.build()?;
    let profile = profile_for(cfg, &model)?;
    let batch = run_replicas(cfg, &model, cfg.engine)?;
    curve_from_batch(cfg, &profile, &batch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltSummary {
    pub tau_r: f64,
    pub m: u64,
    pub hits: u64,
    pub sample_mean: f64,
    pub standard_error: f64,
    /// Sample variance of `√n(τ_r^n - τ_r)` over hitting replicas.
    pub sample_var_scaled: f64,
    /// `σ²(r)`.
    pub predicted_var: f64,
    /// Anderson–Darling `A²` against a fitted normal; reported, not tested.
    pub anderson_darling: f64,
}

/// CLT statistics of `batch`; censored replicas are excluded.
pub fn clt_from_batch(batch: &ReplicaBatch, n: u64, predicted_var: f64) -> Result<CltSummary, ExperimentError> {
    let m = batch.samples.len() as u64;
    let taus: Vec<f64> = batch.samples.iter().filter(|s| s.hit).map(|s| s.tau).collect();
    if taus.is_empty() {
        return Err(ExperimentError::AllCensored { m });
    }
    let (mean, var) = mean_variance(&taus);
    let k = taus.len() as f64;
    let scaled: Vec<f64> = taus.iter().map(|t| (n as f64).sqrt() * (t - batch.tau_r)).collect();
    Ok(CltSummary {
        tau_r: batch.tau_r,
        m,
        hits: taus.len() as u64,
        sample_mean: mean,
        standard_error: (var / k).sqrt(),
        sample_var_scaled: n as f64 * var,
        predicted_var,
        anderson_darling: anderson_darling_normal(&scaled),
    })
}

/// Mean and scaled variance of the hitting time against `σ²(r)`.
pub fn run_clt_experiment(cfg: &ExperimentConfig) -> Result<CltSummary, ExperimentError> {
    let model = cfg.model.build()?;
    let profile = profile_for(cfg, &model)?;
    let batch = run_replicas(cfg, &model, cfg.engine)?;
    clt_from_batch(&batch, cfg.n, profile.clt_variance(cfg.r)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub t: f64,
    pub ssa: CurveRow,
    pub diffusion: CurveRow,
    /// Both upper counts reach [`MIN_TAIL_COUNT`].
    pub comparable: bool,
    /// The two upper-tail Wilson bands overlap.
    pub bands_overlap: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineComparison {
    pub ssa: EmpiricalCurve,
    pub diffusion: EmpiricalCurve,
    pub rows: Vec<ComparisonRow>,
}

impl EngineComparison {
    pub fn new(ssa: EmpiricalCurve, diffusion: EmpiricalCurve) -> Result<Self, ExperimentError> {
        if ssa.rows.len() != diffusion.rows.len() || ssa.rows.iter().zip(&diffusion.rows).any(|(a, b)| a.t != b.t) {
            return Err(ExperimentError::GridMismatch);
        }
        let rows = ssa
            .rows
            .iter()
            .zip(&diffusion.rows)
            .map(|(a, b)| ComparisonRow {
                t: a.t,
                ssa: *a,
                diffusion: *b,
                comparable: a.upper_count >= MIN_TAIL_COUNT && b.upper_count >= MIN_TAIL_COUNT,
                bands_overlap: a.upper_band.0 <= b.upper_band.1 && b.upper_band.0 <= a.upper_band.1,
            })
            .collect();
        Ok(Self { ssa, diffusion, rows })
    }

    /// Every comparable row has overlapping bands.
    pub fn consistent(&self) -> bool {
        self.rows.iter().filter(|r| r.comparable).all(|r| r.bands_overlap)
    }
}

/// Runs both engines on `cfg` (ignoring `cfg.engine`) and pairs their curves.
pub fn compare_engines(cfg: &ExperimentConfig) -> Result<EngineComparison, ExperimentError> {
    let model = cfg.model.build()?;
    let profile = profile_for(cfg, &model)?;
    let ssa = curve_from_batch(cfg, &profile, &run_replicas(cfg, &model, Engine::Ssa)?)?;
    let diffusion = curve_from_batch(cfg, &profile, &run_replicas(cfg, &model, Engine::Diffusion)?)?;
    EngineComparison::new(ssa, diffusion)
}

/// True when `value` lies in the closed band.
pub fn band_contains(band: (f64, f64), value: f64) -> bool {
    band.0 <= value && value <= band.1
}
