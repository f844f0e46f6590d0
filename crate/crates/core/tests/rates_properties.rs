use ddhit::model::ModelSpec;
use ddhit::rates::{
    local_ld_rate, path_rate_i, variational_minimum, PathQuadrature, PiecewiseLinearPath, RateProfile,
};
use proptest::prelude::*;

fn sis_profile() -> RateProfile<f64> {
    let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
    RateProfile::new(&m, 0.66, 1e-10).unwrap()
}

fn bd_profile() -> RateProfile<f64> {
    let m = ModelSpec::birth_death(1.1, 1.0, 1.0).unwrap();
    RateProfile::new(&m, 3.0, 1e-10).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn i_rate_scales_quadratically(
        interior in prop::collection::vec(-2.0f64..2.0, 3..12),
        c in -4.0f64..4.0,
    ) {
        let p = bd_profile();
        let t_end = 5.0;
        let mut values = vec![0.0];
        values.extend(interior);
        let knots: Vec<f64> = (0..values.len())
            .map(|k| t_end * k as f64 / (values.len() - 1) as f64)
            .collect();
        let f = PiecewiseLinearPath::new(knots, values).unwrap();
        let q = PathQuadrature::default();
        let base = path_rate_i(&p, &f, t_end, q).unwrap().value;
        let scaled = path_rate_i(&p, &f.scaled(c), t_end, q).unwrap().value;
        prop_assert!((scaled - c * c * base).abs() <= 1e-10 * (1.0 + c * c * base));
    }

    #[test]
    fn closed_form_minimum_is_a_lower_bound(
        interior in prop::collection::vec(-3.0f64..3.0, 1..10),
        a in -2.0f64..2.0,
        frac in 0.2f64..1.0,
    ) {
        let p = sis_profile();
        let t_end = frac * p.horizon();
        let mut values = vec![0.0];
        values.extend(interior);
        values.push(a);
        let knots: Vec<f64> = (0..values.len())
            .map(|k| t_end * k as f64 / (values.len() - 1) as f64)
            .collect();
        let f = PiecewiseLinearPath::new(knots, values).unwrap();
        let min = variational_minimum(&p, t_end, a, 200).unwrap().value;
        let i = path_rate_i(&p, &f, t_end, PathQuadrature { subpoints: 64 }).unwrap().value;
        prop_assert!(i >= min * (1.0 - 1e-6) - 1e-12, "{} < {}", i, min);
    }

    #[test]
    fn local_rate_is_nonnegative_and_convex(
        u in 0.05f64..0.95,
        y1 in -2.0f64..2.0,
        y2 in -2.0f64..2.0,
        w in 0.0f64..1.0,
    ) {
        let m = ModelSpec::sis(3.0, 1.0, 0.5).unwrap();
        let l1 = local_ld_rate(&m, u, y1);
        let l2 = local_ld_rate(&m, u, y2);
        let lm = local_ld_rate(&m, u, w * y1 + (1.0 - w) * y2);
        prop_assert!(l1 >= 0.0 && l2 >= 0.0);
        prop_assert!(lm <= w * l1 + (1.0 - w) * l2 + 1e-10 * (1.0 + l1 + l2));
    }

    #[test]
    fn time_and_density_forms_of_the_variance_agree(r in 1.05f64..2.9) {
        let c = bd_profile().check_eq37_identity(r).unwrap();
        prop_assert!(c.relerr < 1e-8, "{:?}", c);
    }

    #[test]
    fn variance_identity_on_sis(r in 0.51f64..0.65) {
        let c = sis_profile().check_eq37_identity(r).unwrap();
        prop_assert!(c.relerr < 1e-8, "{:?}", c);
    }
}
