//! Exact first-passage computations for small integer-lattice chains.
//!
//! Every state at or above the target is lumped into one absorbing hit
//! state, so chains with upward-absorbing targets need no truncation from
//! above. States with zero outflow are absorbing non-hit states.

use thiserror::Error;

use crate::model::ModelSpec;

/// Absolute truncation error of the Poisson series in [`exact_survival`].
pub const UNIFORMIZATION_TOL: f64 = 1e-12;

/// Largest `Λ·t` accepted by [`exact_survival`].
pub const MAX_UNIFORMIZATION_LOAD: f64 = 1e7;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum OracleError {
    #[error("the oracle needs integer jump sizes, got {0}")]
    NonIntegerJumps(f64),
    #[error("system size n must be positive")]
    InvalidN,
    #[error("target level n·r = {0} must lie above the start state")]
    BadTarget(f64),
    #[error("state {state} is outside 0..{target}")]
    BadStart { state: i64, target: i64 },
    #[error("jump from state {from} leaves the nonnegative lattice")]
    LeavesLattice { from: i64 },
    #[error("first-passage system is singular (pivot {pivot} at row {row})")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("Λ·t = {load} exceeds the uniformization budget {MAX_UNIFORMIZATION_LOAD}; shorten the time grid or reduce n")]
    OverflowGuard { load: f64 },
    #[error("time grid must be finite and nonnegative")]
    BadGrid,
}

/// Generator of the chain `X` restricted to `{0, …, target - 1}` plus a lumped
/// absorbing hit state.
#[derive(Debug, Clone)]
pub struct TruncatedChain {
    target: i64,
    steps: Vec<i64>,
    /// `rates[k][i]`: rate of jump `i` out of state `k`.
    rates: Vec<Vec<f64>>,
}

impl TruncatedChain {
    /// Builds the chain for `X` with rates `n·F_i(k/n)`, hit set
    /// `{k ≥ ceil(n·r)}`; when `absorb_zero` is set, state 0 is made absorbing.
    pub fn new(model: &ModelSpec<f64>, n: u64, r: f64, absorb_zero: bool) -> Result<Self, OracleError> {
        if n == 0 {
            return Err(OracleError::InvalidN);
        }
        let steps = model
            .jumps()
            .iter()
            .map(|&l| {
                if l.fract() == 0.0 && l != 0.0 {
                    Ok(l as i64)
                } else {
                    Err(OracleError::NonIntegerJumps(l))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let nf = n as f64;
        let level = nf * r;
        let target = {
            let rounded = level.round();
            if (level - rounded).abs() <= 1e-9 * level.abs().max(1.0) {
                rounded as i64
            } else {
                level.ceil() as i64
            }
        };
        if target < 1 {
            return Err(OracleError::BadTarget(level));
        }
        let rates = (0..target)
            .map(|k| {
                if absorb_zero && k == 0 {
                    return vec![0.0; steps.len()];
                }
                let u = k as f64 / nf;
                model
                    .rates()
                    .iter()
                    .map(|f| (nf * f.value(u)).max(0.0))
                    .collect()
            })
            .collect::<Vec<Vec<f64>>>();
        for (k, row) in rates.iter().enumerate() {
            for (&l, &q) in steps.iter().zip(row) {
                if q > 0.0 && k as i64 + l < 0 {
                    return Err(OracleError::LeavesLattice { from: k as i64 });
                }
            }
        }
        Ok(Self { target, steps, rates })
    }

    /// Chain with explicit per-state rates for jumps `steps`.
    pub fn from_rates(steps: Vec<i64>, rates: Vec<Vec<f64>>) -> Result<Self, OracleError> {
        let target = rates.len() as i64;
        for (k, row) in rates.iter().enumerate() {
            for (&l, &q) in steps.iter().zip(row) {
                if q > 0.0 && k as i64 + l < 0 {
                    return Err(OracleError::LeavesLattice { from: k as i64 });
                }
            }
        }
        Ok(Self { target, steps, rates })
    }

    /// First state of the lumped hit set.
    pub fn target(&self) -> i64 {
        self.target
    }

    pub fn outflow(&self, k: usize) -> f64 {
        self.rates[k].iter().sum()
    }

    /// Largest total outflow over transient states.
    pub fn max_outflow(&self) -> f64 {
        (0..self.rates.len()).map(|k| self.outflow(k)).fold(0.0, f64::max)
    }

    /// Destination of an active jump `i` from `k`, with `None` for the hit
    /// state; inactive jumps are skipped.
    fn dest(&self, k: usize, i: usize) -> Option<Option<usize>> {
        if self.rates[k][i] == 0.0 {
            return None;
        }
        let j = k as i64 + self.steps[i];
        Some((j < self.target).then_some(j as usize))
    }

    fn bandwidths(&self) -> (usize, usize) {
        let down = self.steps.iter().map(|&l| (-l).max(0)).max().unwrap_or(0) as usize;
        let up = self.steps.iter().map(|&l| l.max(0)).max().unwrap_or(0) as usize;
        (down, up)
    }

    fn check_start(&self, start: i64) -> Result<(), OracleError> {
        if start < 0 {
            return Err(OracleError::BadStart {
                state: start,
                target: self.target,
            });
        }
        Ok(())
    }
}

/// Banded matrix `(q_k I - Q_TT)` stored row-wise on diagonals
/// `k - p ..= k + q`, factorised once and reused for several right-hand sides.
struct BandLu {
    n: usize,
    p: usize,
    q: usize,
    a: Vec<f64>,
}

impl BandLu {
    fn width(&self) -> usize {
        self.p + self.q + 1
    }

    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        let w = self.width();
        &mut self.a[i * w + (j + self.p - i)]
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.width() + (j + self.p - i)]
    }

    fn factor(chain: &TruncatedChain) -> Result<Self, OracleError> {
        let n = chain.rates.len();
        let (p, q) = chain.bandwidths();
        let mut lu = BandLu {
            n,
            p,
            q,
            a: vec![0.0; n * (p + q + 1)],
        };
        for k in 0..n {
            let out = chain.outflow(k);
            if out == 0.0 {
                *lu.at(k, k) = 1.0;
                continue;
            }
            *lu.at(k, k) += out;
            for i in 0..chain.steps.len() {
                if let Some(Some(j)) = chain.dest(k, i) {
                    *lu.at(k, j) -= chain.rates[k][i];
                }
            }
        }
        // No pivoting: the matrix is a nonsingular M-matrix whenever the
        // system is solvable, and then elimination is stable.
        for k in 0..n {
            let pivot = lu.get(k, k);
            let scale = (k.saturating_sub(p)..=(k + q).min(n - 1))
                .map(|j| lu.get(k, j).abs())
                .fold(0.0, f64::max);
            if !(pivot.abs() > 1e-13 * scale.max(f64::MIN_POSITIVE)) {
                return Err(OracleError::SingularSystem { row: k, pivot });
            }
            for i in k + 1..=(k + p).min(n - 1) {
                let f = lu.get(i, k) / pivot;
                if f == 0.0 {
                    continue;
                }
                *lu.at(i, k) = f;
                for j in k + 1..=(k + q).min(n - 1) {
                    let v = lu.get(k, j);
                    *lu.at(i, j) -= f * v;
                }
            }
        }
        Ok(lu)
    }

    #[allow(clippy::needless_range_loop)]
    fn solve(&self, b: &mut [f64]) {
        let (n, p, q) = (self.n, self.p, self.q);
        for i in 0..n {
            let mut s = b[i];
            for k in i.saturating_sub(p)..i {
                s -= self.get(i, k) * b[k];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + q).min(n - 1) {
                s -= self.get(i, j) * b[j];
            }
            b[i] = s / self.get(i, i);
        }
    }
}

/// First-passage moments from one start state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingMoments {
    pub hit_probability: f64,
    /// `E[τ | hit]`.
    pub conditional_mean: f64,
    /// `E[τ² | hit]`.
    pub conditional_second_moment: f64,
    /// `E[τ]`, infinite unless the target is reached almost surely.
    pub mean: f64,
    /// `E[τ²]`, infinite unless the target is reached almost surely.
    pub second_moment: f64,
}

/// Solves for `h = P(hit)`, `E[τ 1_hit]` and `E[τ² 1_hit]` on all transient
/// states and reports them at `start`.
pub fn exact_mean_hitting(chain: &TruncatedChain, start: i64) -> Result<HittingMoments, OracleError> {
    chain.check_start(start)?;
    if start >= chain.target {
        return Ok(HittingMoments {
            hit_probability: 1.0,
            conditional_mean: 0.0,
            conditional_second_moment: 0.0,
            mean: 0.0,
            second_moment: 0.0,
        });
    }
    let n = chain.rates.len();
    let lu = BandLu::factor(chain)?;
    let mut h: Vec<f64> = (0..n)
        .map(|k| {
            (0..chain.steps.len())
                .filter(|&i| chain.dest(k, i) == Some(None))
                .map(|i| chain.rates[k][i])
                .sum()
        })
        .collect();
    lu.solve(&mut h);
    let absorbing = |k: usize| chain.outflow(k) == 0.0;
    let mut m1: Vec<f64> = (0..n).map(|k| if absorbing(k) { 0.0 } else { h[k] }).collect();
    lu.solve(&mut m1);
    let mut m2: Vec<f64> = (0..n).map(|k| if absorbing(k) { 0.0 } else { 2.0 * m1[k] }).collect();
    lu.solve(&mut m2);

    let s = start as usize;
    let p = h[s].clamp(0.0, 1.0);
    let (cm, cm2) = if p > 0.0 {
        (m1[s] / h[s], m2[s] / h[s])
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    let sure = (1.0 - p).abs() <= 1e-12;
    Ok(HittingMoments {
        hit_probability: p,
        conditional_mean: cm,
        conditional_second_moment: cm2,
        mean: if sure { cm } else { f64::INFINITY },
        second_moment: if sure { cm2 } else { f64::INFINITY },
    })
}

/// `P(τ > t)` on each grid time by uniformization of the transient generator.
pub fn exact_survival(chain: &TruncatedChain, start: i64, t_grid: &[f64]) -> Result<Vec<f64>, OracleError> {
    chain.check_start(start)?;
    if t_grid.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(OracleError::BadGrid);
    }
    if start >= chain.target {
        return Ok(vec![0.0; t_grid.len()]);
    }
    let lambda = chain.max_outflow();
    if lambda == 0.0 {
        return Ok(vec![1.0; t_grid.len()]);
    }
    let t_max = t_grid.iter().copied().fold(0.0, f64::max);
    let load = lambda * t_max;
    if load > MAX_UNIFORMIZATION_LOAD {
        return Err(OracleError::OverflowGuard { load });
    }

    // Number of uniformized steps needed for the largest time.
    let steps_for = |lt: f64| -> usize {
        if lt == 0.0 {
            return 0;
        }
        let mut lw = -lt;
        let mut k = 0usize;
        loop {
            k += 1;
            lw += lt.ln() - (k as f64).ln();
            let ratio = lt / (k as f64 + 1.0);
            if (k as f64) > lt && lw.exp() / (1.0 - ratio) < UNIFORMIZATION_TOL {
                return k;
            }
        }
    };
    let k_max = steps_for(load);

    // s[k] = mass not yet absorbed in the hit state after k uniformized steps.
    let n = chain.rates.len();
    let mut pi = vec![0.0; n];
    pi[start as usize] = 1.0;
    let mut s = Vec::with_capacity(k_max + 1);
    s.push(1.0);
    let mut next = vec![0.0; n];
    for _ in 0..k_max {
        next.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..n {
            let mass = pi[k];
            if mass == 0.0 {
                continue;
            }
            let out = chain.outflow(k);
            next[k] += mass * (1.0 - out / lambda);
            for i in 0..chain.steps.len() {
                if let Some(Some(j)) = chain.dest(k, i) {
                    next[j] += mass * chain.rates[k][i] / lambda;
                }
            }
        }
        std::mem::swap(&mut pi, &mut next);
        s.push(pi.iter().sum::<f64>().min(1.0));
    }

    Ok(t_grid
        .iter()
        .map(|&t| {
            let lt = lambda * t;
            if lt == 0.0 {
                return 1.0;
            }
            let kt = steps_for(lt).min(k_max);
            let mut lw = -lt;
            let mut acc = lw.exp() * s[0];
            for (k, &sk) in s.iter().enumerate().take(kt + 1).skip(1) {
                lw += lt.ln() - (k as f64).ln();
                acc += lw.exp() * sk;
            }
            acc.clamp(0.0, 1.0)
        })
        .collect())
}
