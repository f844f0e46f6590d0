use crate::numeric::quad::{integrate, QuadOptions};
use crate::scalar::Scalar;

use super::path::PiecewiseLinearPath;
use super::{RateError, RateProfile, DEGENERATE_DENOMINATOR};

/// Knots of the returned extremal path.
pub const DEFAULT_EXTREMAL_KNOTS: usize = 2000;

/// Minimum of `I_T` over paths with `f(0) = 0`, `f(T) = a`, and its minimiser.
#[derive(Debug, Clone)]
pub struct VariationalMinimum<S> {
    /// `a² / (2D)`.
    pub value: S,
    /// `D = ∫_0^T β(u) e^{2∫_u^T C} du`.
    pub denominator: S,
    /// Extremal path sampled on `knots + 1` equally spaced points.
    pub path: PiecewiseLinearPath<S>,
}

/// Closed-form minimum of the moderate-deviation path functional at horizon
/// `t_end` and endpoint `a`.
///
/// The minimiser is `f(t) = a e^{∫_T^t C} G(t) / G(T)` with
/// `G(t) = ∫_0^t β(u) e^{2∫_u^T C} du`; `G` is accumulated segment by
/// segment on the output grid.
pub fn variational_minimum<S: Scalar>(
    profile: &RateProfile<S>,
    t_end: S,
    a: S,
    knots: usize,
) -> Result<VariationalMinimum<S>, RateError> {
    if !(t_end > S::zero() && t_end <= profile.horizon()) {
        return Err(RateError::Horizon {
            t: t_end.as_f64(),
            horizon: profile.horizon().as_f64(),
        });
    }
    let segments = knots.max(1);
    let end = profile.cum_c(t_end);
    let grid: Vec<S> = (0..=segments)
        .map(|k| t_end * S::lit(k as f64) / S::lit(segments as f64))
        .collect();
    let g = |u: S| profile.beta(u) * (S::lit(2.0) * (end - profile.cum_c(u))).exp();
    let opts = QuadOptions::relative(S::lit(1e-13));

    let mut cumulative = Vec::with_capacity(grid.len());
    cumulative.push(S::zero());
    let nodes = profile.fluid().times();
    for w in grid.windows(2) {
        // Split at fluid nodes so each quadrature piece is smooth.
        let mut acc = S::zero();
        let mut left = w[0];
        for &s in nodes.iter().filter(|&&s| s > w[0] && s < w[1]) {
            acc = acc + integrate(g, left, s, opts)?.value;
            left = s;
        }
        acc = acc + integrate(g, left, w[1], opts)?.value;
        cumulative.push(*cumulative.last().expect("nonempty") + acc);
    }
    let denominator = cumulative[segments];
    if !(denominator >= S::lit(DEGENERATE_DENOMINATOR)) {
        return Err(RateError::DegenerateDenominator {
            value: denominator.as_f64(),
        });
    }
    let values: Vec<S> = grid
        .iter()
        .zip(&cumulative)
        .map(|(&t, &gt)| a * (profile.cum_c(t) - end).exp() * (gt / denominator))
        .collect();
    let path = PiecewiseLinearPath::new(grid, values).expect("strictly increasing grid");
    Ok(VariationalMinimum {
        value: a * a / (S::lit(2.0) * denominator),
        denominator,
        path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelSpec;
    use crate::rates::{path_rate_i, PathQuadrature};

    #[test]
    fn birth_death_denominator_closed_form() {
        // β = 2.1 e^{0.1u}, C = 0.1: D = 2.1 e^{0.2T} (1 - e^{-0.1T}) / 0.1.
        let m = ModelSpec::birth_death(1.1, 1.0, 1.0).unwrap();
        let p = RateProfile::new(&m, 3.0, 1e-10).unwrap();
        let t = 5.0;
        let vm = variational_minimum(&p, t, 1.0, 200).unwrap();
        let d = 21.0 * (0.2f64 * t).exp() * (1.0 - (-0.1f64 * t).exp());
        assert!((vm.denominator - d).abs() / d < 1e-9);
        assert_eq!(vm.path.values()[0], 0.0);
        assert!((vm.path.values()[200] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extremal_path_attains_minimum() {
        let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
        let p = RateProfile::new(&m, 0.66, 1e-10).unwrap();
        let t = 0.8 * p.horizon();
        let vm = variational_minimum(&p, t, 0.7, DEFAULT_EXTREMAL_KNOTS).unwrap();
        let i: crate::rates::PathRate<f64> = path_rate_i(&p, &vm.path, t, PathQuadrature::default()).unwrap();
        assert!((i.value - vm.value).abs() / vm.value < 1e-6, "{} {}", i.value, vm.value);
    }

    #[test]
    fn rejects_horizon_beyond_path() {
        let m = ModelSpec::birth_death(1.1, 1.0, 1.0).unwrap();
        let p = RateProfile::new(&m, 2.0, 1e-10).unwrap();
        assert!(matches!(
            variational_minimum(&p, 1e3, 1.0, 10),
            Err(RateError::Horizon { .. })
        ));
    }
}
