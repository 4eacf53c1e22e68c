use proptest::prelude::*;

use pitdist::classify::{fit_qda, synthetic_clusters};
use pitdist::ingest::{filter_energy, pit_values, EventSeries};
use pitdist::metrics::{self, all_distances, kolmogorov, wasserstein_exact_oracle};
use pitdist::{Metric, PitSample};

fn pit_vec() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..20.0, 1..60)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_nonnegative(xs in pit_vec()) {
        let s = PitSample::new(xs).unwrap();
        let d = all_distances(&s, 4_000).unwrap();
        for m in Metric::ALL {
            prop_assert!(d.get(m) >= 0.0, "{m} = {}", d.get(m));
        }
        prop_assert!(d.kappa <= 1.0);
    }

    #[test]
    fn homogeneity(xs in pit_vec(), c in 0.01f64..100.0) {
        let s = PitSample::new(xs).unwrap();
        let t = s.scaled(c).unwrap();
        let w = wasserstein_exact_oracle(&s);
        prop_assert!((wasserstein_exact_oracle(&t) - c * w).abs() <= 1e-9 * c * w.max(1e-300) + 1e-300);
        let a = all_distances(&s, 4_000).unwrap();
        let b = all_distances(&t, 4_000).unwrap();
        prop_assert!((b.w - c * a.w).abs() <= 1e-9 * c * a.w + 1e-15);
        prop_assert!((b.z2 - c * c * a.z2).abs() <= 1e-9 * c * c * a.z2 + 1e-15);
        prop_assert!((b.nw - a.nw).abs() <= 1e-9 * a.nw + 1e-15);
        prop_assert!((b.nz2 - a.nz2).abs() <= 1e-9 * a.nz2 + 1e-15);
        prop_assert!((kolmogorov(&t).value - kolmogorov(&s).value).abs() <= 1e-12);
    }

    #[test]
    fn grid_wasserstein_matches_exact(xs in pit_vec()) {
        let s = PitSample::new(xs).unwrap();
        let grid = metrics::wasserstein(&s, metrics::DEFAULT_GRID_POINTS).unwrap().value;
        prop_assert!((grid - wasserstein_exact_oracle(&s)).abs() < 1e-4);
    }

    #[test]
    fn pits_never_straddle_gaps(
        times in prop::collection::vec(0.0f64..1000.0, 2..200),
        gaps in prop::collection::vec((0.0f64..1000.0, 0.1f64..50.0), 0..6),
    ) {
        let events: Vec<(f64, f64)> = times.iter().map(|&t| (t, 1.0)).collect();
        let gaps: Vec<(f64, f64)> = gaps.iter().map(|&(a, w)| (a, a + w)).collect();
        let s = EventSeries::from_events("p", events, &gaps).unwrap();
        let mut allowed = Vec::new();
        for w in s.arrivals.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b > a && !gaps.iter().any(|&(g0, g1)| g0 < b && a < g1) {
                allowed.push(b - a);
            }
        }
        prop_assert_eq!(pit_values(&s), allowed);
        for &t in &s.arrivals {
            prop_assert!(!gaps.iter().any(|&(g0, g1)| g0 <= t && t < g1));
        }
    }

    #[test]
    fn energy_filter_is_idempotent(energies in prop::collection::vec(0.01f64..12.0, 0..100)) {
        let events: Vec<(f64, f64)> = energies.iter().enumerate().map(|(i, &e)| (i as f64, e)).collect();
        let s = EventSeries::from_events("e", events, &[]).unwrap();
        let once = filter_energy(&s, 0.5, 8.0).unwrap();
        prop_assert_eq!(&filter_energy(&once, 0.5, 8.0).unwrap(), &once);
        prop_assert!(once.energies.iter().all(|&e| (0.5..=8.0).contains(&e)));
    }

    #[test]
    fn posteriors_sum_to_one(x in -10.0f64..10.0, y in -10.0f64..10.0, seed in 0u64..50) {
        let (p, l) = synthetic_clusters(20, seed);
        let m = fit_qda(&p, &l, 0.0).unwrap();
        let r = m.predict(&[x, y]).unwrap();
        let total: f64 = r.posteriors.iter().map(|q| q.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(r.posteriors.iter().all(|q| q.1 >= 0.0));
    }
}
