use crate::model::ModelSpec;
use crate::scalar::Scalar;

use super::legendre::local_ld_rate;
use super::{RateError, RateProfile};

/// Below this `β` is treated as zero in path functionals.
const BETA_FLOOR: f64 = 1e-14;

/// Continuous piecewise-linear path through `(knots[k], values[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearPath<S> {
    knots: Vec<S>,
    values: Vec<S>,
}

impl<S: Scalar> PiecewiseLinearPath<S> {
    /// Knots must be finite and strictly increasing; at least two are needed.
    pub fn new(knots: Vec<S>, values: Vec<S>) -> Option<Self> {
        let ok = knots.len() >= 2
            && knots.len() == values.len()
            && knots.iter().chain(&values).all(|v| v.is_finite())
            && knots.windows(2).all(|w| w[1] > w[0]);
        ok.then_some(Self { knots, values })
    }

    /// Samples `f` on `segments + 1` equally spaced knots of `[0, t_end]`.
    pub fn from_fn(mut f: impl FnMut(S) -> S, t_end: S, segments: usize) -> Option<Self> {
        let segments = segments.max(1);
        let knots: Vec<S> = (0..=segments)
            .map(|k| t_end * S::lit(k as f64) / S::lit(segments as f64))
            .collect();
        let values = knots.iter().map(|&t| f(t)).collect();
        Self::new(knots, values)
    }

    pub fn knots(&self) -> &[S] {
        &self.knots
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn start(&self) -> S {
        self.knots[0]
    }

    pub fn end(&self) -> S {
        self.knots[self.knots.len() - 1]
    }

    fn segment(&self, t: S) -> usize {
        let last = self.knots.len() - 2;
        match self.knots.binary_search_by(|p| p.partial_cmp(&t).expect("finite")) {
            Ok(i) => i.min(last),
            Err(0) => 0,
            Err(i) => (i - 1).min(last),
        }
    }

    /// Linear interpolation, extended linearly beyond the end knots.
    pub fn value(&self, t: S) -> S {
        let k = self.segment(t);
        self.values[k] + self.segment_slope(k) * (t - self.knots[k])
    }

    pub fn slope(&self, t: S) -> S {
        self.segment_slope(self.segment(t))
    }

    fn segment_slope(&self, k: usize) -> S {
        (self.values[k + 1] - self.values[k]) / (self.knots[k + 1] - self.knots[k])
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: S) -> Self {
        Self {
            knots: self.knots.clone(),
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }
}

/// Composite midpoint rule with `subpoints` nodes per path segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathQuadrature {
    pub subpoints: usize,
}

impl Default for PathQuadrature {
    fn default() -> Self {
        Self { subpoints: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathStatus {
    Finite,
    /// The path does not start where the functional requires.
    InitialMismatch,
    /// Nonzero excess velocity where the local variance vanishes.
    BetaVanishes { at: f64 },
    /// Velocity outside the cone of available jumps.
    Unreachable { at: f64 },
    /// The path leaves the model domain.
    OutOfDomain { at: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRate<S> {
    pub value: S,
    pub status: PathStatus,
}

impl<S: Scalar> PathRate<S> {
    fn infinite(status: PathStatus) -> Self {
        Self {
            value: S::infinity(),
            status,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.status == PathStatus::Finite
    }
}

/// The last knot may fall short of `t_end` by rounding, e.g. `T·k/k`.
fn check_cover<S: Scalar>(f: &PiecewiseLinearPath<S>, t_end: S) -> Result<(), RateError> {
    let slack = S::tol_floor() * t_end.abs().max(S::one());
    if f.start() != S::zero() || f.end() < t_end - slack || !(t_end > S::zero()) {
        return Err(RateError::BadPath {
            needed: t_end.as_f64(),
        });
    }
    Ok(())
}

/// Sums the midpoint rule over `[0, t_end]` for `integrand(t, f(t), f'(t))`.
fn midpoint_sum<S, G>(
    f: &PiecewiseLinearPath<S>,
    t_end: S,
    quad: PathQuadrature,
    mut integrand: G,
) -> PathRate<S>
where
    S: Scalar,
    G: FnMut(S, S, S) -> Result<S, PathStatus>,
{
    let m = quad.subpoints.max(1);
    let mut total = S::zero();
    for k in 0..f.knots.len() - 1 {
        let a = f.knots[k];
        if a >= t_end {
            break;
        }
        let b = f.knots[k + 1].min(t_end);
        let s = f.segment_slope(k);
        let h = (b - a) / S::lit(m as f64);
        let mut acc = S::zero();
        for i in 0..m {
            let t = a + h * (S::lit(i as f64) + S::lit(0.5));
            let fu = f.values[k] + s * (t - a);
            match integrand(t, fu, s) {
                Ok(v) => acc = acc + v,
                Err(status) => return PathRate::infinite(status),
            }
        }
        total = total + acc * h;
    }
    PathRate {
        value: total,
        status: PathStatus::Finite,
    }
}

fn start_matches<S: Scalar>(f: &PiecewiseLinearPath<S>, target: S) -> bool {
    let scale = f
        .values
        .iter()
        .fold(target.abs().max(S::one()), |m, v| m.max(v.abs()));
    (f.values[0] - target).abs() <= S::tol_floor() * scale
}

fn weighted_square<S: Scalar>(excess: S, beta: S, t: S) -> Result<S, PathStatus> {
    if beta < S::lit(BETA_FLOOR) {
        if excess == S::zero() {
            return Ok(S::zero());
        }
        return Err(PathStatus::BetaVanishes { at: t.as_f64() });
    }
    Ok(excess * excess / beta)
}

/// `I_T(f) = ½ ∫_0^T (f' - C f)² / β` for a centred path with `f(0) = 0`.
pub fn path_rate_i<S: Scalar>(
    profile: &RateProfile<S>,
    f: &PiecewiseLinearPath<S>,
    t_end: S,
    quad: PathQuadrature,
) -> Result<PathRate<S>, RateError> {
    check_cover(f, t_end)?;
    if t_end > profile.horizon() {
        return Err(RateError::Horizon {
            t: t_end.as_f64(),
            horizon: profile.horizon().as_f64(),
        });
    }
    if !start_matches(f, S::zero()) {
        return Ok(PathRate::infinite(PathStatus::InitialMismatch));
    }
    let mut r = midpoint_sum(f, t_end, quad, |t, fu, s| {
        weighted_square(s - profile.c(t) * fu, profile.beta(t), t)
    });
    r.value = r.value * S::lit(0.5);
    Ok(r)
}

/// `J_T(f) = ∫_0^T l(f, f')` for a density path with `f(0) = x`.
pub fn path_rate_j<S: Scalar>(
    model: &ModelSpec<S>,
    f: &PiecewiseLinearPath<S>,
    t_end: S,
    quad: PathQuadrature,
) -> Result<PathRate<S>, RateError> {
    check_cover(f, t_end)?;
    if !start_matches(f, model.start()) {
        return Ok(PathRate::infinite(PathStatus::InitialMismatch));
    }
    let domain = model.domain();
    Ok(midpoint_sum(f, t_end, quad, |t, fu, s| {
        if !domain.contains(fu) {
            return Err(PathStatus::OutOfDomain { at: t.as_f64() });
        }
        let v = local_ld_rate(model, fu, s);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(PathStatus::Unreachable { at: t.as_f64() })
        }
    }))
}

/// `K_T(f) = ∫_0^T (f' - drift(f))² / β(f)` for a density path with `f(0) = x`.
pub fn path_rate_k<S: Scalar>(
    model: &ModelSpec<S>,
    f: &PiecewiseLinearPath<S>,
    t_end: S,
    quad: PathQuadrature,
) -> Result<PathRate<S>, RateError> {
    check_cover(f, t_end)?;
    if !start_matches(f, model.start()) {
        return Ok(PathRate::infinite(PathStatus::InitialMismatch));
    }
    let domain = model.domain();
    Ok(midpoint_sum(f, t_end, quad, |t, fu, s| {
        if !domain.contains(fu) {
            return Err(PathStatus::OutOfDomain { at: t.as_f64() });
        }
        weighted_square(s - model.drift_at(fu), model.beta_at(fu), t)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bd() -> ModelSpec<f64> {
        ModelSpec::birth_death(1.1, 1.0, 1.0).unwrap()
    }

    #[test]
    fn path_construction_and_evaluation() {
        assert!(PiecewiseLinearPath::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_none());
        assert!(PiecewiseLinearPath::new(vec![0.0], vec![1.0]).is_none());
        let p = PiecewiseLinearPath::new(vec![0.0, 1.0, 3.0], vec![0.0, 2.0, 1.0]).unwrap();
        assert_eq!(p.value(0.5), 1.0);
        assert_eq!(p.value(2.0), 1.5);
        assert_eq!(p.slope(2.0), -0.5);
        assert_eq!(p.value(1.0), 2.0);
    }

    #[test]
    fn i_rate_of_zero_path_is_zero() {
        let profile = RateProfile::new(&bd(), 2.5, 1e-10).unwrap();
        let f = PiecewiseLinearPath::from_fn(|_| 0.0, 5.0, 10).unwrap();
        let r = path_rate_i(&profile, &f, 5.0, PathQuadrature::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.is_finite());
    }

    #[test]
    fn i_rate_rejects_nonzero_start() {
        let profile = RateProfile::new(&bd(), 2.5, 1e-10).unwrap();
        let f = PiecewiseLinearPath::from_fn(|t| 1.0 + t, 5.0, 10).unwrap();
        let r = path_rate_i(&profile, &f, 5.0, PathQuadrature::default()).unwrap();
        assert_eq!(r.status, PathStatus::InitialMismatch);
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn i_rate_closed_form_on_birth_death() {
        // C = 0.1, β(t) = 2.1 e^{0.1 t}; f(t) = t gives ½∫(1 - 0.1 t)² / (2.1 e^{0.1 t}).
        let profile = RateProfile::new(&bd(), 2.5, 1e-10).unwrap();
        let f = PiecewiseLinearPath::from_fn(|t| t, 4.0, 1).unwrap();
        let r = path_rate_i(&profile, &f, 4.0, PathQuadrature { subpoints: 4000 }).unwrap();
        let g = |t: f64| (1.0 - 0.1 * t).powi(2) / (2.1 * (0.1 * t).exp());
        let n = 20_000;
        let h = 4.0 / n as f64;
        let mut acc = g(0.0) + g(4.0);
        for k in 1..n {
            acc += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
        }
        let want = 0.5 * acc * h / 3.0;
        assert!((r.value - want).abs() / want < 1e-7, "{} vs {want}", r.value);
    }

    #[test]
    fn fluid_path_has_zero_ld_cost() {
        let m = bd();
        let f = PiecewiseLinearPath::from_fn(|t: f64| (0.1 * t).exp(), 3.0, 3000).unwrap();
        let j = path_rate_j(&m, &f, 3.0, PathQuadrature::default()).unwrap();
        let k = path_rate_k(&m, &f, 3.0, PathQuadrature::default()).unwrap();
        assert!(j.value < 1e-9 && k.value < 1e-8, "{j:?} {k:?}");
    }

    #[test]
    fn pure_birth_cannot_decrease() {
        let m = ModelSpec::pure_birth(1.0, 1.0).unwrap();
        let f = PiecewiseLinearPath::from_fn(|t| 1.0 - 0.1 * t, 1.0, 4).unwrap();
        let j = path_rate_j(&m, &f, 1.0, PathQuadrature::default()).unwrap();
        assert!(matches!(j.status, PathStatus::Unreachable { .. }));
    }

    #[test]
    fn sis_path_leaving_domain() {
        let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
        let f = PiecewiseLinearPath::from_fn(|t| 0.5 - t, 1.0, 4).unwrap();
        let k = path_rate_k(&m, &f, 1.0, PathQuadrature::default()).unwrap();
        assert!(matches!(k.status, PathStatus::OutOfDomain { .. }));
    }

    #[test]
    fn bad_cover_is_an_error() {
        let m = bd();
        let f = PiecewiseLinearPath::from_fn(|t| 1.0 + t, 1.0, 4).unwrap();
        assert!(matches!(
            path_rate_k(&m, &f, 2.0, PathQuadrature::default()),
            Err(RateError::BadPath { .. })
        ));
        let t_end = 0.8412595947728566;
        let short = PiecewiseLinearPath::new(vec![0.0, t_end * (1.0 - 1e-15)], vec![0.0, 0.1]).unwrap();
        assert!(path_rate_k(&m, &short, t_end, PathQuadrature::default()).is_ok());
    }
}
