//! Adaptive Gauss–Kronrod (7/15) quadrature.

// Published constants are kept at their printed precision.
#![allow(clippy::excessive_precision)]

use crate::scalar::Scalar;

use super::NumericError;

// 15-point Kronrod abscissae (positive half, descending) and weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// 7-point Gauss weights, attached to the odd-indexed Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and subdivision budget for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<S> {
    pub abs_tol: S,
    pub rel_tol: S,
    pub max_intervals: usize,
}

impl<S: Scalar> QuadOptions<S> {
    pub fn relative(rel_tol: S) -> Self {
        Self {
            abs_tol: S::zero(),
            rel_tol,
            max_intervals: 4000,
        }
    }

    pub fn with_abs(mut self, abs_tol: S) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult<S> {
    pub value: S,
    pub error: S,
    pub intervals: usize,
    pub evaluations: usize,
}

#[derive(Clone, Copy)]
struct Segment<S> {
    a: S,
    b: S,
    value: S,
    error: S,
}

/// One G7/K15 panel on `[a, b]`: returns (Kronrod estimate, |K15 - G7|).
pub fn gk15<S: Scalar, F: FnMut(S) -> S>(f: &mut F, a: S, b: S) -> (S, S) {
    let half = (b - a) * S::lit(0.5);
    let center = (a + b) * S::lit(0.5);
    let fc = f(center);
    let mut kronrod = fc * S::lit(WGK[7]);
    let mut gauss = fc * S::lit(WG[3]);
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * S::lit(x);
        let sum = f(center - dx) + f(center + dx);
        kronrod = kronrod + sum * S::lit(w);
        if j % 2 == 1 {
            gauss = gauss + sum * S::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Globally adaptive integration of `f` over `[a, b]`, bisecting the panel
/// with the largest error estimate until the total estimate meets
/// `max(abs_tol, rel_tol * |value|)`.
pub fn integrate<S, F>(mut f: F, a: S, b: S, opts: QuadOptions<S>) -> Result<QuadResult<S>, NumericError>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    if a == b {
        return Ok(QuadResult {
            value: S::zero(),
            error: S::zero(),
            intervals: 0,
            evaluations: 0,
        });
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(NumericError::InvalidInterval);
    }
    let rel_tol = opts.rel_tol.max(S::tol_floor());
    let (value, error) = gk15(&mut f, a, b);
    let mut segments = vec![Segment { a, b, value, error }];
    let mut evaluations = 15;

    loop {
        let total: S = segments.iter().fold(S::zero(), |acc, s| acc + s.value);
        let err: S = segments.iter().fold(S::zero(), |acc, s| acc + s.error);
        if !total.is_finite() {
            return Err(NumericError::NonFinite);
        }
        let target = opts.abs_tol.max(rel_tol * total.abs());
        if err <= target {
            return Ok(QuadResult {
                value: total,
                error: err,
                intervals: segments.len(),
                evaluations,
            });
        }
        if segments.len() >= opts.max_intervals {
            return Err(NumericError::QuadratureBudget {
                value: total.as_f64(),
                error: err.as_f64(),
            });
        }
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, S::neg_infinity()), |(bi, be), (i, s)| {
                if s.error > be {
                    (i, s.error)
                } else {
                    (bi, be)
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = (seg.a + seg.b) * S::lit(0.5);
        if mid <= seg.a || mid >= seg.b {
            // Panel cannot be split further at this precision.
            return Ok(QuadResult {
                value: total,
                error: err,
                intervals: segments.len() + 1,
                evaluations,
            });
        }
        let (v1, e1) = gk15(&mut f, seg.a, mid);
        let (v2, e2) = gk15(&mut f, mid, seg.b);
        evaluations += 30;
        segments.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        segments.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
}

/// Integrates piecewise over the given breakpoints (sorted ascending), each
/// piece adaptively with the same relative tolerance. Useful when the
/// integrand is only piecewise smooth.
pub fn integrate_pieces<S, F>(
    mut f: F,
    breakpoints: &[S],
    opts: QuadOptions<S>,
) -> Result<S, NumericError>
where
    S: Scalar,
    F: FnMut(S) -> S,
{
    let mut total = S::zero();
    for w in breakpoints.windows(2) {
        total = total + integrate(&mut f, w[0], w[1], opts)?.value;
    }
    Ok(total)
}
