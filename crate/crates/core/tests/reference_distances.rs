//! Reference distances `d(F, G_1)` for the mean-one study laws, checked
//! against values computed independently with 20-digit arithmetic.

use pitdist::simstudy::{true_distance, TRUE_DISTANCE_POINTS};
use pitdist::{DistKind, Metric, RefDistribution};

const FROZEN: [(DistKind, f64, f64, f64); 4] = [
    (DistKind::Weibull, 0.9, 0.0685227868566, 0.1194178761556),
    (DistKind::Weibull, 1.1, 0.0578043950168, 0.0857537872893),
    (DistKind::Gamma, 0.9, 0.0356990915684, 1.0 / 18.0),
    (DistKind::Gamma, 1.1, 0.0312188673961, 1.0 / 22.0),
];

#[test]
fn frozen_values() {
    for (kind, shape, nw, nz2) in FROZEN {
        let d = RefDistribution::mean_one(kind, shape).unwrap();
        let w = true_distance(&d, Metric::NormWasserstein, TRUE_DISTANCE_POINTS).unwrap();
        let z = true_distance(&d, Metric::NormZolotarev2, TRUE_DISTANCE_POINTS).unwrap();
        assert!((w - nw).abs() < 1e-7, "{kind}({shape}) nw {w} vs {nw}");
        assert!((z - nz2).abs() < 1e-7, "{kind}({shape}) nz2 {z} vs {nz2}");
    }
}

#[test]
fn two_grids_agree() {
    for (kind, shape, ..) in FROZEN {
        let d = RefDistribution::mean_one(kind, shape).unwrap();
        for m in [Metric::NormWasserstein, Metric::NormZolotarev2] {
            let coarse = true_distance(&d, m, 100_000).unwrap();
            let fine = true_distance(&d, m, 1_000_000).unwrap();
            assert!((coarse - fine).abs() < 1e-6, "{kind}({shape}) {m}: {coarse} vs {fine}");
        }
    }
}

#[test]
fn unnormalized_scale_with_the_mean() {
    let base = RefDistribution::mean_one(DistKind::Gamma, 0.9).unwrap();
    let scaled = RefDistribution::new(DistKind::Gamma, 0.9, base.scale() * 3.0).unwrap();
    let w1 = true_distance(&base, Metric::Wasserstein, 200_000).unwrap();
    let w3 = true_distance(&scaled, Metric::Wasserstein, 200_000).unwrap();
    let z1 = true_distance(&base, Metric::Zolotarev2, 200_000).unwrap();
    let z3 = true_distance(&scaled, Metric::Zolotarev2, 200_000).unwrap();
    assert!((w3 - 3.0 * w1).abs() < 1e-9);
    assert!((z3 - 9.0 * z1).abs() < 1e-8);
    let nw3 = true_distance(&scaled, Metric::NormWasserstein, 200_000).unwrap();
    assert!((nw3 - w1).abs() < 1e-9);
}
