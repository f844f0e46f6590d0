use ddhit::experiment::TailCounts;
use ddhit::ssa::{CensorReason, HittingSample};
use ddhit::StreamKey;
use proptest::prelude::*;

fn sample(i: u64, tau: f64, reason: CensorReason) -> HittingSample {
    HittingSample {
        hit: reason == CensorReason::None,
        tau,
        events: 0,
        terminal_state: 0,
        terminal_density: 0.0,
        key: StreamKey::new(0, i),
        censor_reason: reason,
        clamped_rates: 0,
    }
}

fn samples() -> impl Strategy<Value = Vec<HittingSample>> {
    prop::collection::vec((5.0f64..9.0, 0u8..20), 1..200).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (tau, c))| {
                let reason = match c {
                    0 => CensorReason::Extinct,
                    1 => CensorReason::Horizon,
                    _ => CensorReason::None,
                };
                sample(i as u64, tau, reason)
            })
            .collect()
    })
}

const GRID: [f64; 6] = [0.0, 0.5, 1.0, 1.5, 2.0, 3.0];

proptest! {
    #[test]
    fn merging_batches_matches_one_pass(s in samples(), cut1 in 0usize..200, cut2 in 0usize..200) {
        let (a, b) = (cut1.min(cut2).min(s.len()), cut1.max(cut2).min(s.len()));
        let whole = TailCounts::from_samples(&s, 6.9, 2.5, &GRID);
        let parts: Vec<TailCounts> = [&s[..a], &s[a..b], &s[b..]]
            .iter()
            .map(|p| TailCounts::from_samples(p, 6.9, 2.5, &GRID))
            .collect();
        let left = parts[0].clone().merge(&parts[1]).unwrap().merge(&parts[2]).unwrap();
        let right = parts[0].clone().merge(&parts[1].clone().merge(&parts[2]).unwrap()).unwrap();
        let swapped = parts[2].clone().merge(&parts[0]).unwrap().merge(&parts[1]).unwrap();
        prop_assert_eq!(&left, &whole);
        prop_assert_eq!(&right, &whole);
        prop_assert_eq!(&swapped, &whole);
    }

    #[test]
    fn tail_counts_are_monotone_and_partition_at_zero(s in samples()) {
        let c = TailCounts::from_samples(&s, 6.9, 2.5, &GRID);
        prop_assert!(c.upper.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.lower.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(c.upper[0] + c.lower[0] <= c.m);
        prop_assert!(c.upper.iter().all(|&u| u >= c.censored()));
        prop_assert_eq!(c.hits + c.censored(), c.m);
    }
}
