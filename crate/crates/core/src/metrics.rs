//! Empirical distances from a sample's empirical cdf `F_n` to the exponential
//! law `G_mu` whose mean equals the sample mean.
//!
//! Wasserstein and Zolotarev distances follow the order-statistic forms
//!
//! ```text
//! w(F_n, G)  = X(1) - mu G(X(1)) + int_{X(1)}^{X(n)} |F_n - G| + mu exp(-X(n)/mu)
//! z2(F_n, G) = 2 int_{X(1)}^{X(n)} ( I(t) )_+ dt + mu^2 - a2 / 2,
//!   I(t)     = -X(1) + mu G(X(1)) + int_{X(1)}^t (F_n - G)
//! ```
//!
//! with the middle integrals evaluated by the trapezoid rule on the equispaced
//! grid `X(1) + k delta`, `k = 0..=grid_points`. Cells that contain a jump of
//! `F_n` are split at the jump so the rule never straddles a discontinuity;
//! the running integral `I` is accumulated as a prefix sum in the same pass.
//! The Kolmogorov distance is evaluated exactly at the jump points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::PitSample;

pub const DEFAULT_GRID_POINTS: usize = 20_000;
pub const FINE_GRID_POINTS: usize = 2_000_000;

/// Negative Zolotarev values above `-NEGATIVE_TOLERANCE * mu^2` are rounding
/// noise and get clamped; anything below is reported as a failure.
const NEGATIVE_TOLERANCE: f64 = 1e-6;
const EXP_REFRESH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "kappa")]
    Kolmogorov,
    #[serde(rename = "w")]
    Wasserstein,
    #[serde(rename = "z2")]
    Zolotarev2,
    #[serde(rename = "nw")]
    NormWasserstein,
    #[serde(rename = "nz2")]
    NormZolotarev2,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Kolmogorov,
        Metric::Wasserstein,
        Metric::Zolotarev2,
        Metric::NormWasserstein,
        Metric::NormZolotarev2,
    ];

    pub fn short_name(&self) -> &'static str {
        match self {
            Metric::Kolmogorov => "kappa",
            Metric::Wasserstein => "w",
            Metric::Zolotarev2 => "z2",
            Metric::NormWasserstein => "nw",
            Metric::NormZolotarev2 => "nz2",
        }
    }

    pub fn is_normalized(&self) -> bool {
        matches!(self, Metric::NormWasserstein | Metric::NormZolotarev2)
    }

    /// Degree of homogeneity under `x -> c x`.
    pub fn homogeneity(&self) -> i32 {
        match self {
            Metric::Wasserstein => 1,
            Metric::Zolotarev2 => 2,
            _ => 0,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kappa" | "kolmogorov" | "ks" => Ok(Metric::Kolmogorov),
            "w" | "wasserstein" => Ok(Metric::Wasserstein),
            "z2" | "zolotarev" | "zolotarev2" => Ok(Metric::Zolotarev2),
            "nw" | "norm-wasserstein" => Ok(Metric::NormWasserstein),
            "nz2" | "norm-zolotarev" | "norm-zolotarev2" => Ok(Metric::NormZolotarev2),
            other => Err(Error::InvalidParameter(format!("unknown metric {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEstimate {
    pub metric: Metric,
    pub value: f64,
    pub n: usize,
    /// Quadrature grid size; 0 for the grid-free Kolmogorov distance.
    pub grid_points: usize,
}

/// All five distances of one sample, from a single grid pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceSet {
    pub n: usize,
    pub mean: f64,
    pub kappa: f64,
    pub w: f64,
    pub z2: f64,
    pub nw: f64,
    pub nz2: f64,
    pub grid_points: usize,
}

impl DistanceSet {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Kolmogorov => self.kappa,
            Metric::Wasserstein => self.w,
            Metric::Zolotarev2 => self.z2,
            Metric::NormWasserstein => self.nw,
            Metric::NormZolotarev2 => self.nz2,
        }
    }
}

/// Kolmogorov distance `sup_t |F_n(t) - G_mu(t)|`, evaluated on both sides of
/// every jump of `F_n`.
pub fn kolmogorov(sample: &PitSample) -> DistanceEstimate {
    let n = sample.len() as f64;
    let mu = sample.mean();
    let value = sample
        .values()
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = -(-x / mu).exp_m1();
            (((i + 1) as f64 / n) - g).abs().max((i as f64 / n - g).abs())
        })
        .fold(0.0, f64::max);
    DistanceEstimate {
        metric: Metric::Kolmogorov,
        value,
        n: sample.len(),
        grid_points: 0,
    }
}

struct GridIntegrals {
    /// `int_{X(1)}^{X(n)} |F_n - G|`
    abs_middle: f64,
    /// `int_{X(1)}^{X(n)} (I(t))_+ dt`
    zolotarev_positive: f64,
}

fn check_grid(grid_points: usize) -> Result<()> {
    if grid_points == 0 {
        return Err(Error::InvalidParameter("grid_points must be >= 1".into()));
    }
    Ok(())
}

fn grid_pass(sample: &PitSample, grid_points: usize) -> GridIntegrals {
    let xs = sample.values();
    let (lo, hi) = (sample.min(), sample.max());
    let mu = sample.mean();
    if xs.len() == 1 || lo == hi {
        return GridIntegrals {
            abs_middle: 0.0,
            zolotarev_positive: 0.0,
        };
    }
    let n = xs.len() as f64;
    let step = (hi - lo) / grid_points as f64;
    let decay = (-step / mu).exp();
    let half = 0.5 * step;

    // Survival of G at the current node, refreshed periodically so the
    // multiplicative recurrence cannot drift.
    let mut surv = (-lo / mu).exp();
    let mut below = xs.partition_point(|&x| x <= lo);
    // I(X(1)) = -X(1) + mu G(X(1))
    let mut running = -lo - mu * (-lo / mu).exp_m1();
    let mut prev_pos = running.max(0.0);
    let (mut abs_acc, mut pos_acc) = (0.0, 0.0);
    let mut left = lo;
    for k in 1..=grid_points {
        let right = if k == grid_points { hi } else { lo + k as f64 * step };
        let right_surv = if k % EXP_REFRESH == 0 || k == grid_points {
            (-right / mu).exp()
        } else {
            surv * decay
        };
        let level = below as f64 / n;
        if below < xs.len() && xs[below] <= right {
            // F_n jumps inside the cell: apply the trapezoid rule on each
            // piece where F_n is constant.
            let (mut p, mut p_surv, mut c) = (left, surv, level);
            while below < xs.len() && xs[below] <= right {
                let v = xs[below];
                while below < xs.len() && xs[below] == v {
                    below += 1;
                }
                let v_surv = (-v / mu).exp();
                let (hp, hv) = (c - 1.0 + p_surv, c - 1.0 + v_surv);
                abs_acc += (v - p) * (hp.abs() + hv.abs());
                running += 0.5 * (v - p) * (hp + hv);
                p = v;
                p_surv = v_surv;
                c = below as f64 / n;
            }
            let (hp, hr) = (c - 1.0 + p_surv, c - 1.0 + right_surv);
            abs_acc += (right - p) * (hp.abs() + hr.abs());
            running += 0.5 * (right - p) * (hp + hr);
        } else {
            // F_n(x) - G(x) = F_n(x) - 1 + exp(-x / mu)
            let (hl, hr) = (level - 1.0 + surv, level - 1.0 + right_surv);
            abs_acc += step * (hl.abs() + hr.abs());
            running += half * (hl + hr);
        }
        let pos = running.max(0.0);
        pos_acc += prev_pos + pos;
        prev_pos = pos;
        surv = right_surv;
        left = right;
    }
    GridIntegrals {
        abs_middle: 0.5 * abs_acc,
        zolotarev_positive: half * pos_acc,
    }
}

fn wasserstein_from(sample: &PitSample, middle: f64) -> f64 {
    let mu = sample.mean();
    let (lo, hi) = (sample.min(), sample.max());
    // X(1) - mu G(X(1)) = int_0^{X(1)} G
    let head = lo + mu * (-lo / mu).exp_m1();
    let tail = mu * (-hi / mu).exp();
    head + middle + tail
}

fn zolotarev_from(sample: &PitSample, positive: f64) -> Result<f64> {
    let mu = sample.mean();
    let value = 2.0 * positive + mu * mu - 0.5 * sample.second_moment();
    if value < -NEGATIVE_TOLERANCE * mu * mu {
        return Err(Error::QuadratureFailure { value });
    }
    Ok(value.max(0.0))
}

/// Wasserstein distance `int_0^inf |F_n - G_mu|`; middle integral by the
/// trapezoid rule on `grid_points` equal subintervals of `[X(1), X(n)]`.
pub fn wasserstein(sample: &PitSample, grid_points: usize) -> Result<DistanceEstimate> {
    check_grid(grid_points)?;
    let g = grid_pass(sample, grid_points);
    Ok(DistanceEstimate {
        metric: Metric::Wasserstein,
        value: wasserstein_from(sample, g.abs_middle),
        n: sample.len(),
        grid_points,
    })
}

/// Zolotarev distance `int_0^inf |int_t^inf (F_n - G_mu)| dt`.
pub fn zolotarev2(sample: &PitSample, grid_points: usize) -> Result<DistanceEstimate> {
    check_grid(grid_points)?;
    let g = grid_pass(sample, grid_points);
    Ok(DistanceEstimate {
        metric: Metric::Zolotarev2,
        value: zolotarev_from(sample, g.zolotarev_positive)?,
        n: sample.len(),
        grid_points,
    })
}

/// Scale-free versions: Wasserstein over `mu`, Zolotarev over `mu^2`.
pub fn normalized(
    sample: &PitSample,
    metric: Metric,
    grid_points: usize,
) -> Result<DistanceEstimate> {
    let mu = sample.mean();
    let (base, divisor) = match metric {
        Metric::NormWasserstein => (wasserstein(sample, grid_points)?, mu),
        Metric::NormZolotarev2 => (zolotarev2(sample, grid_points)?, mu * mu),
        other => return Err(Error::UnsupportedMetric(other.to_string())),
    };
    Ok(DistanceEstimate {
        metric,
        value: base.value / divisor,
        ..base
    })
}

pub fn distance(sample: &PitSample, metric: Metric, grid_points: usize) -> Result<DistanceEstimate> {
    match metric {
        Metric::Kolmogorov => Ok(kolmogorov(sample)),
        Metric::Wasserstein => wasserstein(sample, grid_points),
        Metric::Zolotarev2 => zolotarev2(sample, grid_points),
        Metric::NormWasserstein | Metric::NormZolotarev2 => normalized(sample, metric, grid_points),
    }
}

pub fn all_distances(sample: &PitSample, grid_points: usize) -> Result<DistanceSet> {
    check_grid(grid_points)?;
    let g = grid_pass(sample, grid_points);
    let mu = sample.mean();
    let w = wasserstein_from(sample, g.abs_middle);
    let z2 = zolotarev_from(sample, g.zolotarev_positive)?;
    Ok(DistanceSet {
        n: sample.len(),
        mean: mu,
        kappa: kolmogorov(sample).value,
        w,
        z2,
        nw: w / mu,
        nz2: z2 / (mu * mu),
        grid_points,
    })
}

/// `int_a^b (c - G_mu)` in closed form.
fn signed_piece(c: f64, a: f64, b: f64, mu: f64) -> f64 {
    mu * ((-a / mu).exp() - (-b / mu).exp()) - (1.0 - c) * (b - a)
}

/// Exact `int_0^inf |F_n - G_mu|`, integrating each constant piece of `F_n`
/// in closed form and splitting at the crossing `t* = -mu ln(1 - i/n)`.
pub fn wasserstein_exact_oracle(sample: &PitSample) -> f64 {
    let xs = sample.values();
    let mu = sample.mean();
    let n = xs.len();
    let mut total = wasserstein_from(sample, 0.0);
    for i in 1..n {
        let (a, b) = (xs[i - 1], xs[i]);
        if b <= a {
            continue;
        }
        let c = i as f64 / n as f64;
        let cross = -mu * (-c).ln_1p();
        if cross > a && cross < b {
            total += signed_piece(c, a, cross, mu).abs() + signed_piece(c, cross, b, mu).abs();
        } else {
            total += signed_piece(c, a, b, mu).abs();
        }
    }
    total
}

/// Zolotarev distance on a 2,000,000-point grid.
pub fn zolotarev2_fine_oracle(sample: &PitSample) -> Result<f64> {
    Ok(zolotarev2(sample, FINE_GRID_POINTS)?.value)
}
