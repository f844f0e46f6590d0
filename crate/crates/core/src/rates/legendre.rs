use crate::model::ModelSpec;
use crate::scalar::Scalar;

/// Search interval for the dual variable `b`.
pub const LEGENDRE_BRACKET: f64 = 50.0;

/// `l(u, y) = sup_b { b·y - Σ F_i(u)(e^{b·l_i} - 1) }`.
///
/// Returns `+∞` when `y` lies outside the cone spanned by the active jumps.
pub fn local_ld_rate<S: Scalar>(model: &ModelSpec<S>, u: S, y: S) -> S {
    local_ld_rate_with_argmax(model, u, y).0
}

/// Like [`local_ld_rate`], also returning the maximiser when it is finite.
/// On the boundary of the reachable cone the supremum is a limit as
/// `|b| → ∞` and no maximiser is returned.
pub fn local_ld_rate_with_argmax<S: Scalar>(model: &ModelSpec<S>, u: S, y: S) -> (S, Option<S>) {
    let active: Vec<(S, S)> = model
        .jumps()
        .iter()
        .zip(model.rates())
        .map(|(&l, f)| (l, f.value(u)))
        .filter(|&(_, f)| f > S::zero())
        .collect();
    if active.is_empty() {
        return if y == S::zero() {
            (S::zero(), Some(S::zero()))
        } else {
            (S::infinity(), None)
        };
    }
    let any_up = active.iter().any(|&(l, _)| l > S::zero());
    let any_down = active.iter().any(|&(l, _)| l < S::zero());
    let total: S = active.iter().fold(S::zero(), |acc, &(_, f)| acc + f);
    if !any_down {
        if y < S::zero() {
            return (S::infinity(), None);
        }
        if y == S::zero() {
            return (total, None);
        }
    }
    if !any_up {
        if y > S::zero() {
            return (S::infinity(), None);
        }
        if y == S::zero() {
            return (total, None);
        }
    }

    let cap = S::max_value().ln() - S::lit(2.0);
    let ex = |z: S| z.min(cap).exp();
    let phi = |b: S| {
        active
            .iter()
            .fold(b * y, |acc, &(l, f)| acc - f * (ex(b * l) - S::one()))
    };
    let dphi = |b: S| {
        active
            .iter()
            .fold(y, |acc, &(l, f)| acc - f * l * ex(b * l))
    };
    let d2phi = |b: S| {
        active
            .iter()
            .fold(S::zero(), |acc, &(l, f)| acc - f * l * l * ex(b * l))
    };

    let mut lo = -S::lit(LEGENDRE_BRACKET);
    let mut hi = S::lit(LEGENDRE_BRACKET);
    let g0 = dphi(S::zero());
    if g0 == S::zero() {
        return (S::zero(), Some(S::zero()));
    }
    if dphi(lo) <= S::zero() {
        return (phi(lo), Some(lo));
    }
    if dphi(hi) >= S::zero() {
        return (phi(hi), Some(hi));
    }
    // φ' is decreasing; keep [lo, hi] bracketing its root.
    let mut b = S::zero();
    if g0 > S::zero() {
        lo = b;
    } else {
        hi = b;
    }
    for _ in 0..200 {
        let g = dphi(b);
        if g == S::zero() {
            break;
        }
        if g > S::zero() {
            lo = lo.max(b);
        } else {
            hi = hi.min(b);
        }
        let h = d2phi(b);
        let mut next = b - g / h;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) * S::lit(0.5);
        }
        let done = (next - b).abs() <= S::epsilon() * S::lit(4.0) * b.abs().max(S::one());
        b = next;
        if done || hi - lo <= S::epsilon() * S::lit(4.0) * b.abs().max(S::one()) {
            break;
        }
    }
    (phi(b).max(S::zero()), Some(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_sup(model: &ModelSpec<f64>, u: f64, y: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0.0;
        let phi = |b: f64| {
            b * y
                - model
                    .jumps()
                    .iter()
                    .zip(model.rates())
                    .map(|(&l, f)| f.value(u) * ((b * l).exp() - 1.0))
                    .sum::<f64>()
        };
        for k in 0..=200_000 {
            let b = -5.0 + k as f64 * 5e-5;
            let v = phi(b);
            if v > best {
                best = v;
                arg = b;
            }
        }
        for k in 0..=20_000 {
            let b = arg - 5e-5 + k as f64 * 5e-9;
            best = best.max(phi(b));
        }
        best
    }

    #[test]
    fn birth_death_at_zero_velocity() {
        let m = ModelSpec::birth_death(1.1, 1.0, 1.0).unwrap();
        let (v, b) = local_ld_rate_with_argmax(&m, 1.0, 0.0);
        assert!((v - (2.1 - 2.0 * 1.1f64.sqrt())).abs() < 1e-13);
        assert!((b.unwrap() + 0.5 * 1.1f64.ln()).abs() < 1e-12);
        assert!((v - grid_sup(&m, 1.0, 0.0)).abs() < 1e-9);
    }

    #[test]
    fn zero_on_the_fluid_velocity() {
        let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
        for &u in &[0.1, 0.4, 0.6] {
            assert_eq!(local_ld_rate(&m, u, m.drift_at(u)), 0.0);
        }
    }

    #[test]
    fn matches_grid_on_sis() {
        let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
        for &(u, y) in &[(0.5, 0.0), (0.3, 1.2), (0.6, -0.4)] {
            let v = local_ld_rate(&m, u, y);
            assert!((v - grid_sup(&m, u, y)).abs() < 1e-8, "{u} {y}");
        }
    }

    #[test]
    fn pure_birth_cone() {
        let m = ModelSpec::pure_birth(2.0, 1.0).unwrap();
        assert_eq!(local_ld_rate(&m, 1.0, -0.1), f64::INFINITY);
        assert_eq!(local_ld_rate(&m, 1.0, 0.0), 2.0);
        // y log(y/F) - y + F
        let y = 3.0;
        let want = y * (y / 2.0f64).ln() - y + 2.0;
        assert!((local_ld_rate(&m, 1.0, y) - want).abs() < 1e-12);
    }

    #[test]
    fn inactive_state() {
        let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
        assert_eq!(local_ld_rate(&m, 0.0, 0.0), 0.0);
        assert_eq!(local_ld_rate(&m, 0.0, 0.1), f64::INFINITY);
    }
}
