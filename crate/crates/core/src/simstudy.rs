//! Monte Carlo study of the standardized estimation error
//! `delta_n(d, F) = sqrt(n) (d(F_n, G_mu_hat) - d(F, G_mu))` across sample
//! sizes, set against draws of its limit `delta_inf(d, F)`.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{self, BridgeConfig, DEFAULT_GRID_SUBINTERVALS, DEFAULT_TOL};
use crate::distributions::{DistKind, RefDistribution};
use crate::error::{Error, Result};
use crate::metrics::{self, Metric, DEFAULT_GRID_POINTS};
use crate::rng::{derive_key, stream_rng};
use crate::sample::PitSample;
use crate::stats;

pub const DEFAULT_SIZES: [usize; 4] = [100, 500, 1000, 5000];
pub const DEFAULT_REPLICATES: usize = 10_000;
pub const MIN_REPLICATES: usize = 100;
/// Points used for the reference distances `d(F, G_1)`.
pub const TRUE_DISTANCE_POINTS: usize = 1_000_000;
/// Tail mass ignored by the reference quadrature.
pub const TRUE_DISTANCE_TOL: f64 = 1e-12;

const SAMPLE_STREAM: u64 = 0x5A4D;
const LIMIT_STREAM: u64 = 0x1171;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// `(kind, shape)`; every law is rescaled to mean 1.
    pub distributions: Vec<(DistKind, f64)>,
    pub sizes: Vec<usize>,
    pub replicates: usize,
    pub metrics: Vec<Metric>,
    pub seed: u64,
    pub grid_points: usize,
    pub bridge_grid_subintervals: usize,
    pub bridge_tol: f64,
}

impl StudyConfig {
    pub fn new(seed: u64) -> Self {
        Self {
            distributions: vec![
                (DistKind::Exponential, 1.0),
                (DistKind::Weibull, 0.9),
                (DistKind::Weibull, 1.1),
                (DistKind::Gamma, 0.9),
                (DistKind::Gamma, 1.1),
            ],
            sizes: DEFAULT_SIZES.to_vec(),
            replicates: DEFAULT_REPLICATES,
            metrics: vec![Metric::NormWasserstein, Metric::NormZolotarev2],
            seed,
            grid_points: DEFAULT_GRID_POINTS,
            bridge_grid_subintervals: DEFAULT_GRID_SUBINTERVALS,
            bridge_tol: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.distributions.is_empty() || self.metrics.is_empty() {
            return Err(Error::Config("study needs distributions and metrics".into()));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] < 2 {
            return Err(Error::Config(format!(
                "sizes must be strictly ascending and >= 2, got {:?}",
                self.sizes
            )));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::Config(format!(
                "replicates must be >= {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if let Some(m) = self.metrics.iter().find(|m| !m.is_normalized()) {
            return Err(Error::UnsupportedMetric(m.to_string()));
        }
        for &(kind, shape) in &self.distributions {
            RefDistribution::mean_one(kind, shape)?;
        }
        self.bridge(0).validate()
    }

    fn bridge(&self, seed: u64) -> BridgeConfig {
        BridgeConfig {
            horizon: None,
            grid_subintervals: self.bridge_grid_subintervals,
            tol: self.bridge_tol,
            reps: self.replicates,
            seed,
        }
    }
}

fn dist_coords(dist: &RefDistribution) -> [u64; 2] {
    let kind = match dist.kind() {
        DistKind::Exponential => 0,
        DistKind::Weibull => 1,
        DistKind::Gamma => 2,
    };
    [kind, dist.shape().to_bits()]
}

/// `d(F, G_mu)` for the normalized metric `metric`, by trapezoidal quadrature
/// of `|F - G|` (Wasserstein) or `|pi_G - pi_F|` with the stop-loss
/// transforms `pi(t) = int_t^inf (1 - F)` (Zolotarev) on `points` nodes.
pub fn true_distance(dist: &RefDistribution, metric: Metric, points: usize) -> Result<f64> {
    if points < 2 {
        return Err(Error::InvalidParameter("quadrature needs at least 2 points".into()));
    }
    let mu = dist.mean();
    let g = RefDistribution::exponential(mu)?;
    let horizon = dist.horizon(TRUE_DISTANCE_TOL).max(g.horizon(TRUE_DISTANCE_TOL));
    let h = horizon / (points - 1) as f64;
    let integrand = |t: f64| match metric {
        Metric::Wasserstein | Metric::NormWasserstein => (dist.cdf(t) - g.cdf(t)).abs(),
        Metric::Zolotarev2 | Metric::NormZolotarev2 => (g.stop_loss(t) - dist.stop_loss(t)).abs(),
        Metric::Kolmogorov => unreachable!(),
    };
    if metric == Metric::Kolmogorov {
        return Err(Error::UnsupportedMetric(metric.to_string()));
    }
    let inner: f64 = (1..points - 1)
        .into_par_iter()
        .map(|i| integrand(i as f64 * h))
        .sum();
    let raw = h * (inner + 0.5 * (integrand(0.0) + integrand(horizon)));
    Ok(match metric {
        Metric::NormWasserstein => raw / mu,
        Metric::NormZolotarev2 => raw / (mu * mu),
        _ => raw,
    })
}

/// Sample size of a cell; `None` is the limit law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellSize(pub Option<usize>);

impl std::fmt::Display for CellSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(n) => write!(f, "{n}"),
            None => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub distribution: String,
    pub metric: Metric,
    pub n: CellSize,
    pub replicate: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StudyTable {
    pub draws: Vec<Draw>,
    /// `(distribution, metric, d(F, G_1))`
    pub true_distances: Vec<(String, Metric, f64)>,
}

impl StudyTable {
    /// Draws of one cell in replicate order.
    pub fn cell(&self, distribution: &str, metric: Metric, n: CellSize) -> Vec<f64> {
        self.draws
            .iter()
            .filter(|d| d.distribution == distribution && d.metric == metric && d.n == n)
            .map(|d| d.value)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(["distribution", "metric", "n", "replicate", "value"])
            .map_err(io)?;
        for d in &self.draws {
            w.write_record([
                d.distribution.clone(),
                d.metric.short_name().to_string(),
                d.n.to_string(),
                d.replicate.to_string(),
                format!("{:?}", d.value),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws of `delta_n` for one distribution and size, all requested metrics
/// evaluated on the same samples.
pub fn finite_sample_draws(
    dist: &RefDistribution,
    n: usize,
    replicates: usize,
    metrics_wanted: &[Metric],
    truth: &[f64],
    grid_points: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let [kind, shape] = dist_coords(dist);
    let key = derive_key(seed, &[SAMPLE_STREAM, kind, shape, n as u64]);
    let root_n = (n as f64).sqrt();
    let per_rep: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(key, r as u64);
            let sample = PitSample::new(dist.draw_n(n, &mut rng))?;
            let d = metrics::all_distances(&sample, grid_points)?;
            Ok(metrics_wanted
                .iter()
                .zip(truth)
                .map(|(&m, &t)| root_n * (d.get(m) - t))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..metrics_wanted.len())
        .map(|j| per_rep.iter().map(|v| v[j]).collect())
        .collect())
}

/// Draws of `delta_inf(d, F)` for the study settings.
pub fn limit_draws(cfg: &StudyConfig, dist: &RefDistribution, metric: Metric) -> Result<Vec<f64>> {
    let [kind, shape] = dist_coords(dist);
    let seed = derive_key(cfg.seed, &[LIMIT_STREAM, kind, shape]);
    Ok(asymptotics::sample_delta_infinity(metric, dist, &cfg.bridge(seed))?.draws)
}

/// Runs every cell of the study. Output is in the order distribution, metric,
/// size (the limit last), replicate, and depends only on the configuration.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyTable> {
    cfg.validate()?;
    let mut table = StudyTable::default();
    for &(kind, shape) in &cfg.distributions {
        let dist = RefDistribution::mean_one(kind, shape)?;
        let label = dist.label();
        let truth = cfg
            .metrics
            .iter()
            .map(|&m| {
                if kind == DistKind::Exponential {
                    Ok(0.0)
                } else {
                    true_distance(&dist, m, TRUE_DISTANCE_POINTS)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut by_size = Vec::with_capacity(cfg.sizes.len());
        for &n in &cfg.sizes {
            log::info!("{label}: n = {n}");
            by_size.push(finite_sample_draws(
                &dist,
                n,
                cfg.replicates,
                &cfg.metrics,
                &truth,
                cfg.grid_points,
                cfg.seed,
            )?);
        }
        for (j, &metric) in cfg.metrics.iter().enumerate() {
            table.true_distances.push((label.clone(), metric, truth[j]));
            for (&n, draws) in cfg.sizes.iter().zip(&by_size) {
                push_cell(&mut table, &label, metric, CellSize(Some(n)), &draws[j]);
            }
            log::info!("{label}: limit law for {metric}");
            let limit = limit_draws(cfg, &dist, metric)?;
            push_cell(&mut table, &label, metric, CellSize(None), &limit);
        }
    }
    Ok(table)
}

fn push_cell(table: &mut StudyTable, label: &str, metric: Metric, n: CellSize, values: &[f64]) {
    table
        .draws
        .extend(values.iter().enumerate().map(|(replicate, &value)| Draw {
            distribution: label.to_string(),
            metric,
            n,
            replicate,
            value,
        }));
}

/// Tukey boxplot statistics with linearly interpolated quartiles and whiskers
/// at the most extreme values within 1.5 IQR of the box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub n_outliers: usize,
}

pub fn box_stats(cell: &str, values: &[f64]) -> Result<BoxStats> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("cell {cell} has no draws")));
    }
    let sorted = stats::sorted_copy(values);
    let q1 = stats::quantile_sorted(&sorted, 0.25);
    let median = stats::quantile_sorted(&sorted, 0.5);
    let q3 = stats::quantile_sorted(&sorted, 0.75);
    let fence = 1.5 * (q3 - q1);
    let (lo_fence, hi_fence) = (q1 - fence, q3 + fence);
    let inside: Vec<f64> = sorted
        .iter()
        .copied()
        .filter(|&v| v >= lo_fence && v <= hi_fence)
        .collect();
    Ok(BoxStats {
        count: sorted.len(),
        q1,
        median,
        q3,
        whisker_lo: inside[0],
        whisker_hi: inside[inside.len() - 1],
        n_outliers: sorted.len() - inside.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub distribution: String,
    pub metric: Metric,
    pub n: CellSize,
    #[serde(flatten)]
    pub stats: BoxStats,
}

/// Boxplot statistics per cell, in the order cells first appear.
pub fn summarize(table: &StudyTable) -> Result<Vec<CellSummary>> {
    if table.draws.is_empty() {
        return Err(Error::InvalidParameter("study table has no draws".into()));
    }
    let mut order = Vec::new();
    let mut cells: BTreeMap<(String, Metric, CellSize), Vec<f64>> = BTreeMap::new();
    for d in &table.draws {
        let key = (d.distribution.clone(), d.metric, d.n);
        cells
            .entry(key.clone())
            .or_insert_with(|| {
                order.push(key);
                Vec::new()
            })
            .push(d.value);
    }
    order
        .into_iter()
        .map(|key| {
            let name = format!("{}/{}/{}", key.0, key.1.short_name(), key.2);
            let stats = box_stats(&name, &cells[&key])?;
            Ok(CellSummary {
                distribution: key.0,
                metric: key.1,
                n: key.2,
                stats,
            })
        })
        .collect()
}
