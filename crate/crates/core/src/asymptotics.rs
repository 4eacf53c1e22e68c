//! Asymptotic laws of the plug-in distances.
//!
//! The limit processes are functionals of an `F`-Brownian bridge
//! `B_F = B o F`. Each path is generated on the equispaced grid
//! `t_k = k T / K`, `k = 0..=K`, by summing independent Gaussian increments
//! of a Brownian motion over the sorted times `u_k = F(t_k)` and applying the
//! bridge transform `B(u) = W(u) - u W(1)`. Integrals over `[0, inf)` are
//! truncated at the horizon `T` and evaluated by the trapezoid rule.
//!
//! For each metric the limit process is affine in the path:
//!
//! ```text
//! X_w(t)   = B_F(t) - (t / mu^2) e^{-t/mu} J
//! X_nw(t)  = (1/mu) [ B_F(t) + (g_nw(t) - (t / mu^2) e^{-t/mu}) J ]
//! X_z2(t)  = S(t) - (1 + t/mu) e^{-t/mu} J
//! X_nz2(t) = (1/mu^2) [ S(t) + (2 mu g_nz2(t) - (1 + t/mu) e^{-t/mu}) J ]
//! ```
//!
//! with `J = int_0^inf B_F` and `S(t) = int_t^inf B_F`. The limit of the
//! standardized error is
//! `int_{g = 0} |X| + int_{g != 0} X sgn(g)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::RefDistribution;
use crate::error::{Error, Result};
use crate::metrics::{self, Metric, DEFAULT_GRID_POINTS};
use crate::rng::{derive_key, stream_rng};
use crate::sample::PitSample;
use crate::stats;

pub const DEFAULT_GRID_SUBINTERVALS: usize = 50_000;
pub const DEFAULT_TOL: f64 = 1e-6;
pub const DEFAULT_REPS: usize = 10_000;
pub const DEFAULT_BOOTSTRAP_REPS: usize = 999;
pub const MIN_GRID_SUBINTERVALS: usize = 1_000;
pub const MIN_RESAMPLES: usize = 200;
/// `|g_d(t)| <= ZERO_TOL` places `t` in the zero set of `g_d`.
pub const ZERO_TOL: f64 = 1e-10;

const DELTA_STREAM: u64 = 0x0de1_7a00;
const BOOTSTRAP_STREAM: u64 = 0xb007_0000;
const GOF_STREAM: u64 = 0x0600_f000;

/// Discretization and Monte Carlo settings for limit-law sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Truncation horizon `T`; derived from the reference law when `None`.
    pub horizon: Option<f64>,
    pub grid_subintervals: usize,
    /// Tail tolerance of the horizon rule `T = ceil(F^{-1}(1 - tol))`.
    pub tol: f64,
    pub reps: usize,
    pub seed: u64,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            horizon: None,
            grid_subintervals: DEFAULT_GRID_SUBINTERVALS,
            tol: DEFAULT_TOL,
            reps: DEFAULT_REPS,
            seed: 0,
        }
    }
}

impl BridgeConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_subintervals < MIN_GRID_SUBINTERVALS {
            return Err(Error::Config(format!(
                "grid_subintervals must be >= {MIN_GRID_SUBINTERVALS}, got {}",
                self.grid_subintervals
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!("tol must lie in (0, 1), got {}", self.tol)));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if let Some(t) = self.horizon {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("horizon must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Distribution that drives the bridge time change and the functions `g_d`.
pub trait Reference: Sync {
    fn mean(&self) -> f64;
    fn cdf(&self, t: f64) -> f64;
    /// `int_t^inf (1 - F)`.
    fn stop_loss(&self, t: f64) -> f64;
    fn default_horizon(&self, tol: f64) -> f64;
    fn describe(&self) -> String;
}

impl Reference for RefDistribution {
    fn mean(&self) -> f64 {
        RefDistribution::mean(self)
    }

    fn cdf(&self, t: f64) -> f64 {
        RefDistribution::cdf(self, t)
    }

    fn stop_loss(&self, t: f64) -> f64 {
        RefDistribution::stop_loss(self, t)
    }

    fn default_horizon(&self, tol: f64) -> f64 {
        self.horizon(tol)
    }

    fn describe(&self) -> String {
        self.label()
    }
}

/// The empirical cdf of a sample, plugged into the limit processes.
#[derive(Debug, Clone)]
pub struct EmpiricalReference {
    sample: PitSample,
    suffix: Vec<f64>,
}

impl EmpiricalReference {
    pub fn new(sample: &PitSample) -> Self {
        Self {
            suffix: sample.suffix_sums(),
            sample: sample.clone(),
        }
    }
}

impl Reference for EmpiricalReference {
    fn mean(&self) -> f64 {
        self.sample.mean()
    }

    fn cdf(&self, t: f64) -> f64 {
        self.sample.ecdf(t)
    }

    fn stop_loss(&self, t: f64) -> f64 {
        self.sample.stop_loss_with(&self.suffix, t)
    }

    /// `F_n^{-1}(1 - tol)` is the sample maximum for any `tol < 1/n`.
    fn default_horizon(&self, _tol: f64) -> f64 {
        self.sample.max().ceil()
    }

    fn describe(&self) -> String {
        format!("empirical(n={})", self.sample.len())
    }
}

/// Time grid on `[0, T]` with the reference quantities every path needs.
#[derive(Debug, Clone)]
pub struct LimitGrid {
    times: Vec<f64>,
    cdf: Vec<f64>,
    sqrt_increments: Vec<f64>,
    sqrt_final: f64,
    /// `F - G_mu` at the nodes.
    cdf_gap: Vec<f64>,
    /// `int_t^inf (F - G_mu)` at the nodes.
    tail_gap: Vec<f64>,
    step: f64,
    mean: f64,
    reference: String,
}

impl LimitGrid {
    pub fn new<R: Reference + ?Sized>(reference: &R, cfg: &BridgeConfig) -> Result<Self> {
        cfg.validate()?;
        let mean = reference.mean();
        let target = RefDistribution::exponential(mean)?;
        let horizon = cfg
            .horizon
            .unwrap_or_else(|| reference.default_horizon(cfg.tol).max(1.0));
        let k = cfg.grid_subintervals;
        let step = horizon / k as f64;
        let times: Vec<f64> = (0..=k)
            .map(|i| if i == k { horizon } else { i as f64 * step })
            .collect();
        let cdf: Vec<f64> = times.iter().map(|&t| reference.cdf(t)).collect();
        let mut sqrt_increments = Vec::with_capacity(k + 1);
        let mut prev = 0.0;
        for &u in &cdf {
            sqrt_increments.push((u - prev).max(0.0).sqrt());
            prev = u;
        }
        let sqrt_final = (1.0 - prev).max(0.0).sqrt();
        let cdf_gap = times
            .iter()
            .zip(&cdf)
            .map(|(&t, &u)| u - target.cdf(t))
            .collect();
        let tail_gap = times
            .iter()
            .map(|&t| target.stop_loss(t) - reference.stop_loss(t))
            .collect();
        Ok(Self {
            times,
            cdf,
            sqrt_increments,
            sqrt_final,
            cdf_gap,
            tail_gap,
            step,
            mean,
            reference: reference.describe(),
        })
    }

    /// Number of nodes, `grid_subintervals + 1`.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn reference(&self) -> &str {
        &self.reference
    }

    /// The deterministic sign carrier `g_d` at the grid nodes.
    pub fn sign_carrier(&self, metric: Metric) -> Result<Vec<f64>> {
        let mu = self.mean;
        Ok(match metric {
            Metric::Wasserstein => self.cdf_gap.clone(),
            Metric::NormWasserstein => self.cdf_gap.iter().map(|g| g / mu).collect(),
            Metric::Zolotarev2 => self.tail_gap.clone(),
            Metric::NormZolotarev2 => self.tail_gap.iter().map(|g| g / (mu * mu)).collect(),
            Metric::Kolmogorov => return Err(Error::UnsupportedMetric(metric.to_string())),
        })
    }

    /// Trapezoid weights of the nodes.
    fn weight(&self, k: usize) -> f64 {
        if k == 0 || k + 1 == self.times.len() {
            0.5 * self.step
        } else {
            self.step
        }
    }
}

/// Writes one `F`-Brownian bridge path into `out` (resized to the grid).
pub fn simulate_bridge_path_into<R: Rng + ?Sized>(grid: &LimitGrid, rng: &mut R, out: &mut Vec<f64>) {
    out.clear();
    let mut w = 0.0;
    for &s in &grid.sqrt_increments {
        if s > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            w += s * z;
        }
        out.push(w);
    }
    let w1 = if grid.sqrt_final > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        w + grid.sqrt_final * z
    } else {
        w
    };
    for (b, &u) in out.iter_mut().zip(&grid.cdf) {
        *b -= u * w1;
    }
}

/// Discretized path of `B_F` at the grid nodes.
pub fn simulate_bridge_path<R: Rng + ?Sized>(grid: &LimitGrid, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    simulate_bridge_path_into(grid, rng, &mut out);
    out
}

/// Affine map from a bridge path to the limit process of one metric.
#[derive(Debug, Clone)]
struct LimitKernel {
    /// Multiplies `B_F(t)` (Wasserstein family) or `int_t^inf B_F` (Zolotarev).
    scale: f64,
    uses_tail: bool,
    /// Coefficient of `int_0^inf B_F` at each node.
    drift: Vec<f64>,
}

impl LimitKernel {
    fn new(metric: Metric, grid: &LimitGrid) -> Result<Self> {
        let mu = grid.mean;
        let g = grid.sign_carrier(metric)?;
        let decay = |t: f64| (-t / mu).exp();
        let t = &grid.times;
        let (scale, uses_tail, drift): (f64, bool, Vec<f64>) = match metric {
            Metric::Wasserstein => (
                1.0,
                false,
                t.iter().map(|&t| -(t / (mu * mu)) * decay(t)).collect(),
            ),
            Metric::NormWasserstein => (
                1.0 / mu,
                false,
                t.iter()
                    .zip(&g)
                    .map(|(&t, &g)| (g - (t / (mu * mu)) * decay(t)) / mu)
                    .collect(),
            ),
            Metric::Zolotarev2 => (
                1.0,
                true,
                t.iter().map(|&t| -(1.0 + t / mu) * decay(t)).collect(),
            ),
            Metric::NormZolotarev2 => (
                1.0 / (mu * mu),
                true,
                t.iter()
                    .zip(&g)
                    .map(|(&t, &g)| (2.0 * mu * g - (1.0 + t / mu) * decay(t)) / (mu * mu))
                    .collect(),
            ),
            Metric::Kolmogorov => return Err(Error::UnsupportedMetric(metric.to_string())),
        };
        Ok(Self {
            scale,
            uses_tail,
            drift,
        })
    }

    /// Replaces `path` with the tail integrals `int_{t_k}^T B_F` when needed
    /// and returns `int_0^T B_F`.
    fn prepare(&self, grid: &LimitGrid, path: &mut [f64]) -> f64 {
        let half = 0.5 * grid.step;
        if self.uses_tail {
            let mut acc = 0.0;
            let mut next = path[path.len() - 1];
            path[path.len() - 1] = 0.0;
            for k in (0..path.len() - 1).rev() {
                let b = path[k];
                acc += half * (b + next);
                next = b;
                path[k] = acc;
            }
            acc
        } else {
            let inner: f64 = path[1..path.len() - 1].iter().sum();
            half * (path[0] + path[path.len() - 1]) + grid.step * inner
        }
    }
}

/// Discretized trajectory of the limit process `X_{metric, F}` for one path.
pub fn limit_process(metric: Metric, grid: &LimitGrid, path: &[f64]) -> Result<Vec<f64>> {
    if path.len() != grid.len() {
        return Err(Error::Dimension(format!(
            "path has {} nodes, grid has {}",
            path.len(),
            grid.len()
        )));
    }
    let kernel = LimitKernel::new(metric, grid)?;
    let mut work = path.to_vec();
    let total = kernel.prepare(grid, &mut work);
    Ok(work
        .iter()
        .zip(&kernel.drift)
        .map(|(&v, &d)| kernel.scale * v + d * total)
        .collect())
}

/// `int_{g = 0} |X| + int_{g != 0} X sgn(g)` by the trapezoid rule.
pub fn delta_functional(grid: &LimitGrid, trajectory: &[f64], sign_carrier: &[f64]) -> f64 {
    trajectory
        .iter()
        .zip(sign_carrier)
        .enumerate()
        .map(|(k, (&x, &g))| {
            let v = if g.abs() <= ZERO_TOL { x.abs() } else { x * g.signum() };
            grid.weight(k) * v
        })
        .sum()
}

/// Monte Carlo draws from a limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLawDraws {
    pub metric: Metric,
    pub reference: String,
    pub draws: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    pub horizon: f64,
    pub grid_subintervals: usize,
}

impl LimitLawDraws {
    pub fn quantile(&self, p: f64) -> f64 {
        stats::quantile(&self.draws, p)
    }

    pub fn mean(&self) -> f64 {
        stats::mean(&self.draws)
    }

    pub fn std_dev(&self) -> f64 {
        stats::std_dev(&self.draws)
    }

    /// Single-column CSV with a `value` header.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "value")?;
        for d in &self.draws {
            writeln!(out, "{d}")?;
        }
        Ok(())
    }
}

struct Workspace {
    path: Vec<f64>,
}

fn draw_delta(
    grid: &LimitGrid,
    kernel: &LimitKernel,
    sign: &[f64],
    key: u64,
    rep: usize,
    ws: &mut Workspace,
) -> f64 {
    let mut rng = stream_rng(key, rep as u64);
    simulate_bridge_path_into(grid, &mut rng, &mut ws.path);
    let total = kernel.prepare(grid, &mut ws.path);
    ws.path
        .iter()
        .zip(&kernel.drift)
        .zip(sign)
        .enumerate()
        .map(|(k, ((&v, &d), &g))| {
            let x = kernel.scale * v + d * total;
            let v = if g.abs() <= ZERO_TOL { x.abs() } else { x * g.signum() };
            grid.weight(k) * v
        })
        .sum()
}

/// Draws from the limit `delta_inf(d, F)` of `sqrt(n) (d(F_n, G) - d(F, G_mu))`.
///
/// Replicate `r` uses stream `r` of the key derived from `cfg.seed`, so the
/// draws depend only on the seed, never on the thread count.
pub fn sample_delta_infinity<R: Reference + ?Sized>(
    metric: Metric,
    reference: &R,
    cfg: &BridgeConfig,
) -> Result<LimitLawDraws> {
    let grid = LimitGrid::new(reference, cfg)?;
    sample_delta_infinity_on(metric, &grid, cfg)
}

/// As [`sample_delta_infinity`], on a prebuilt grid.
pub fn sample_delta_infinity_on(
    metric: Metric,
    grid: &LimitGrid,
    cfg: &BridgeConfig,
) -> Result<LimitLawDraws> {
    cfg.validate()?;
    let kernel = LimitKernel::new(metric, grid)?;
    let sign = grid.sign_carrier(metric)?;
    let key = derive_key(cfg.seed, &[DELTA_STREAM]);
    let draws: Vec<f64> = (0..cfg.reps)
        .into_par_iter()
        .map_init(
            || Workspace {
                path: Vec::with_capacity(grid.len()),
            },
            |ws, rep| draw_delta(grid, &kernel, &sign, key, rep, ws),
        )
        .collect();
    Ok(LimitLawDraws {
        metric,
        reference: grid.reference.clone(),
        draws,
        reps: cfg.reps,
        seed: cfg.seed,
        horizon: grid.horizon(),
        grid_subintervals: grid.len() - 1,
    })
}

fn require_normalized(metric: Metric) -> Result<()> {
    if metric.is_normalized() {
        Ok(())
    } else {
        Err(Error::UnsupportedMetric(format!(
            "{metric} (its null law depends on the unknown mean)"
        )))
    }
}

/// Null law `||X_{d, G_1}||_1` of `sqrt(n) d(F_n, G)` for exponential data.
pub fn null_law(metric: Metric, cfg: &BridgeConfig) -> Result<LimitLawDraws> {
    require_normalized(metric)?;
    sample_delta_infinity(metric, &RefDistribution::exponential(1.0)?, cfg)
}

type NullKey = (Metric, Option<u64>, usize, u64, usize, u64);

/// [`null_law`], memoized per (metric, config) for the life of the process.
pub fn null_law_cached(metric: Metric, cfg: &BridgeConfig) -> Result<Arc<LimitLawDraws>> {
    static CACHE: OnceLock<Mutex<HashMap<NullKey, Arc<LimitLawDraws>>>> = OnceLock::new();
    let key = (
        metric,
        cfg.horizon.map(f64::to_bits),
        cfg.grid_subintervals,
        cfg.tol.to_bits(),
        cfg.reps,
        cfg.seed,
    );
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("null-law cache poisoned").get(&key) {
        return Ok(Arc::clone(hit));
    }
    let draws = Arc::new(null_law(metric, cfg)?);
    cache
        .lock()
        .expect("null-law cache poisoned")
        .insert(key, Arc::clone(&draws));
    Ok(draws)
}

/// Settings shared by interval estimation and testing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub bridge: BridgeConfig,
    pub bootstrap_reps: usize,
    pub grid_points: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            bridge: BridgeConfig::default(),
            bootstrap_reps: DEFAULT_BOOTSTRAP_REPS,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl InferenceConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            bridge: BridgeConfig::with_seed(seed),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    AsymptoticNormal,
    AsymptoticQuantile,
    BootstrapPercentile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
    pub estimate: f64,
    pub level: f64,
    pub method: CiMethod,
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("level must lie in (0, 1), got {level}")))
    }
}

/// Confidence interval for `d(F, G_mu)`.
///
/// The asymptotic methods plug `F_n` into the limit process and simulate
/// `delta_inf(d, F_n)`: the normal interval is `d_n -/+ z sd / sqrt(n)` with the
/// Monte Carlo standard deviation, the quantile interval is
/// `[d_n - q_hi / sqrt(n), d_n - q_lo / sqrt(n)]`. The bootstrap interval takes
/// percentiles of the distance recomputed on resamples of the data.
pub fn confidence_interval(
    sample: &PitSample,
    metric: Metric,
    level: f64,
    method: CiMethod,
    cfg: &InferenceConfig,
) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let alpha = 1.0 - level;
    let estimate = metrics::distance(sample, metric, cfg.grid_points)?.value;
    let root_n = (sample.len() as f64).sqrt();
    let (lo, hi) = match method {
        CiMethod::AsymptoticNormal | CiMethod::AsymptoticQuantile => {
            if cfg.bridge.reps < MIN_RESAMPLES {
                return Err(Error::Config(format!(
                    "asymptotic intervals need at least {MIN_RESAMPLES} Monte Carlo draws"
                )));
            }
            if sample.len() < 30 {
                log::warn!("asymptotic interval with only {} observations", sample.len());
            }
            let reference = EmpiricalReference::new(sample);
            let law = sample_delta_infinity(metric, &reference, &cfg.bridge)?;
            if method == CiMethod::AsymptoticNormal {
                let half = stats::normal_quantile(1.0 - alpha / 2.0) * law.std_dev() / root_n;
                (estimate - half, estimate + half)
            } else {
                let sorted = stats::sorted_copy(&law.draws);
                (
                    estimate - stats::quantile_sorted(&sorted, 1.0 - alpha / 2.0) / root_n,
                    estimate - stats::quantile_sorted(&sorted, alpha / 2.0) / root_n,
                )
            }
        }
        CiMethod::BootstrapPercentile => {
            if cfg.bootstrap_reps < MIN_RESAMPLES {
                return Err(Error::Config(format!(
                    "bootstrap needs at least {MIN_RESAMPLES} resamples"
                )));
            }
            let key = derive_key(cfg.bridge.seed, &[BOOTSTRAP_STREAM]);
            let xs = sample.values();
            let boot: Vec<f64> = (0..cfg.bootstrap_reps)
                .into_par_iter()
                .map(|b| {
                    let mut rng = stream_rng(key, b as u64);
                    let resample: Vec<f64> =
                        (0..xs.len()).map(|_| xs[rng.random_range(0..xs.len())]).collect();
                    let s = PitSample::new(resample)?;
                    Ok(metrics::distance(&s, metric, cfg.grid_points)?.value)
                })
                .collect::<Result<_>>()?;
            let sorted = stats::sorted_copy(&boot);
            (
                stats::quantile_sorted(&sorted, alpha / 2.0),
                stats::quantile_sorted(&sorted, 1.0 - alpha / 2.0),
            )
        }
    };
    Ok(ConfidenceInterval {
        lo,
        hi,
        estimate,
        level,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GofMethod {
    Asymptotic,
    ParametricBootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub metric: Metric,
    pub n: usize,
    /// `sqrt(n) d(F_n, G_mu_hat)`
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub level: f64,
    pub method: GofMethod,
    pub reps: usize,
    pub seed: u64,
}

pub const MIN_GOF_SAMPLE: usize = 20;

/// Test of `H0: F is exponential`, rejecting for large `sqrt(n) d`.
///
/// The asymptotic p-value is the share of null-law draws at or above the
/// statistic; the parametric bootstrap recomputes the statistic on samples of
/// size `n` from the exponential law with mean `mu_hat`.
pub fn gof_exponentiality(
    sample: &PitSample,
    metric: Metric,
    level: f64,
    method: GofMethod,
    cfg: &InferenceConfig,
) -> Result<GofResult> {
    require_normalized(metric)?;
    check_level(level)?;
    let n = sample.len();
    if n < MIN_GOF_SAMPLE {
        return Err(Error::InvalidParameter(format!(
            "goodness-of-fit test needs at least {MIN_GOF_SAMPLE} observations, got {n}"
        )));
    }
    let root_n = (n as f64).sqrt();
    let statistic = root_n * metrics::distance(sample, metric, cfg.grid_points)?.value;
    let (exceed, reps) = match method {
        GofMethod::Asymptotic => {
            let law = null_law_cached(metric, &cfg.bridge)?;
            (law.draws.iter().filter(|&&d| d >= statistic).count(), law.reps)
        }
        GofMethod::ParametricBootstrap => {
            if cfg.bootstrap_reps == 0 {
                return Err(Error::Config("bootstrap_reps must be >= 1".into()));
            }
            let null = RefDistribution::exponential(sample.mean())?;
            let key = derive_key(cfg.bridge.seed, &[GOF_STREAM]);
            let boot: Vec<f64> = (0..cfg.bootstrap_reps)
                .into_par_iter()
                .map(|b| {
                    let mut rng = stream_rng(key, b as u64);
                    let s = PitSample::new(null.draw_n(n, &mut rng))?;
                    Ok(root_n * metrics::distance(&s, metric, cfg.grid_points)?.value)
                })
                .collect::<Result<_>>()?;
            (boot.iter().filter(|&&d| d >= statistic).count(), boot.len())
        }
    };
    let p_value = exceed as f64 / reps as f64;
    Ok(GofResult {
        metric,
        n,
        statistic,
        p_value,
        reject: p_value <= level,
        level,
        method,
        reps,
        seed: cfg.bridge.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::DistKind;
    use approx::assert_abs_diff_eq;

    fn small_cfg(seed: u64, reps: usize) -> BridgeConfig {
        BridgeConfig {
            grid_subintervals: 2_000,
            reps,
            seed,
            ..BridgeConfig::default()
        }
    }

    fn exp1() -> RefDistribution {
        RefDistribution::exponential(1.0).unwrap()
    }

    #[test]
    fn horizon_follows_tail_rule() {
        let grid = LimitGrid::new(&exp1(), &BridgeConfig::default()).unwrap();
        // -ln(1e-6) = 13.8155...
        assert_eq!(grid.horizon(), 14.0);
        assert_eq!(grid.len(), DEFAULT_GRID_SUBINTERVALS + 1);
        let sample = PitSample::new(vec![0.4, 2.2, 7.3]).unwrap();
        let emp = LimitGrid::new(&EmpiricalReference::new(&sample), &BridgeConfig::default()).unwrap();
        assert_eq!(emp.horizon(), 8.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BridgeConfig::default();
        cfg.grid_subintervals = 999;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = BridgeConfig::default();
        cfg.tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = BridgeConfig::default();
        cfg.horizon = Some(-1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bridge_is_pinned() {
        let grid = LimitGrid::new(&exp1(), &small_cfg(1, 1)).unwrap();
        let mut rng = stream_rng(3, 0);
        for _ in 0..20 {
            let path = simulate_bridge_path(&grid, &mut rng);
            assert_eq!(path[0], 0.0);
            // Var at the horizon is F(T)(1 - F(T)) <= 1e-6
            assert!(path[path.len() - 1].abs() < 0.01);
        }
    }

    #[test]
    fn bridge_covariance() {
        let grid = LimitGrid::new(&exp1(), &small_cfg(1, 1)).unwrap();
        let node = |target: f64| {
            grid.cdf_values()
                .iter()
                .position(|&u| u >= target)
                .unwrap()
        };
        let (k3, k5, k6) = (node(0.3), node(0.5), node(0.6));
        let (u3, u5, u6) = (grid.cdf_values()[k3], grid.cdf_values()[k5], grid.cdf_values()[k6]);
        let reps = 5000;
        let (mut s5, mut s55, mut s3, mut s6, mut s36) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in 0..reps {
            let mut rng = stream_rng(99, r);
            let p = simulate_bridge_path(&grid, &mut rng);
            s5 += p[k5];
            s55 += p[k5] * p[k5];
            s3 += p[k3];
            s6 += p[k6];
            s36 += p[k3] * p[k6];
        }
        let n = reps as f64;
        let var5 = s55 / n - (s5 / n).powi(2);
        let cov36 = s36 / n - (s3 / n) * (s6 / n);
        assert_abs_diff_eq!(var5, u5 * (1.0 - u5), epsilon = 0.02);
        assert_abs_diff_eq!(var5, 0.25, epsilon = 0.02);
        assert_abs_diff_eq!(cov36, u3.min(u6) - u3 * u6, epsilon = 0.02);
        assert_abs_diff_eq!(cov36, 0.12, epsilon = 0.02);
    }

    #[test]
    fn limit_process_is_linear() {
        let dist = RefDistribution::mean_one(DistKind::Gamma, 0.9).unwrap();
        let grid = LimitGrid::new(&dist, &small_cfg(1, 1)).unwrap();
        let mut rng = stream_rng(5, 0);
        let path = simulate_bridge_path(&grid, &mut rng);
        let zero = vec![0.0; grid.len()];
        for metric in [
            Metric::Wasserstein,
            Metric::NormWasserstein,
            Metric::Zolotarev2,
            Metric::NormZolotarev2,
        ] {
            assert!(limit_process(metric, &grid, &zero).unwrap().iter().all(|&x| x == 0.0));
            let x = limit_process(metric, &grid, &path).unwrap();
            let scaled: Vec<f64> = path.iter().map(|p| -2.5 * p).collect();
            let xs = limit_process(metric, &grid, &scaled).unwrap();
            for (a, b) in x.iter().zip(&xs) {
                assert_abs_diff_eq!(-2.5 * a, *b, epsilon = 1e-12);
            }
        }
        assert!(matches!(
            limit_process(Metric::Wasserstein, &grid, &path[1..]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            limit_process(Metric::Kolmogorov, &grid, &path),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn exponential_reference_has_vanishing_sign_carrier() {
        for mu in [1.0, 3.0] {
            let grid = LimitGrid::new(&RefDistribution::exponential(mu).unwrap(), &small_cfg(1, 1)).unwrap();
            for metric in [Metric::NormWasserstein, Metric::NormZolotarev2] {
                assert!(grid.sign_carrier(metric).unwrap().iter().all(|&g| g == 0.0));
            }
        }
    }

    #[test]
    fn normalized_process_on_the_null() {
        // g = 0, so X_nw = X_w / mu pointwise
        let mu = 2.0;
        let grid = LimitGrid::new(&RefDistribution::exponential(mu).unwrap(), &small_cfg(1, 1)).unwrap();
        let mut rng = stream_rng(8, 0);
        let path = simulate_bridge_path(&grid, &mut rng);
        let w = limit_process(Metric::Wasserstein, &grid, &path).unwrap();
        let nw = limit_process(Metric::NormWasserstein, &grid, &path).unwrap();
        for (a, b) in w.iter().zip(&nw) {
            assert_abs_diff_eq!(a / mu, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn delta_draws_are_norms_on_the_null() {
        let cfg = small_cfg(4, 50);
        let draws = sample_delta_infinity(Metric::NormZolotarev2, &exp1(), &cfg).unwrap();
        assert_eq!(draws.draws.len(), 50);
        assert!(draws.draws.iter().all(|&d| d >= 0.0));
        let grid = LimitGrid::new(&exp1(), &cfg).unwrap();
        // recompute replicate 7 by hand
        let key = derive_key(cfg.seed, &[DELTA_STREAM]);
        let mut rng = stream_rng(key, 7);
        let path = simulate_bridge_path(&grid, &mut rng);
        let x = limit_process(Metric::NormZolotarev2, &grid, &path).unwrap();
        let sign = grid.sign_carrier(Metric::NormZolotarev2).unwrap();
        assert_abs_diff_eq!(delta_functional(&grid, &x, &sign), draws.draws[7], epsilon = 1e-12);
    }

    #[test]
    fn draws_are_deterministic() {
        let cfg = small_cfg(11, 30);
        let a = null_law(Metric::NormWasserstein, &cfg).unwrap();
        let b = null_law(Metric::NormWasserstein, &cfg).unwrap();
        assert_eq!(a, b);
        let c = null_law_cached(Metric::NormWasserstein, &cfg).unwrap();
        assert_eq!(a.draws, c.draws);
        assert!(null_law(Metric::Wasserstein, &cfg).is_err());
    }

    #[test]
    fn interval_and_test_contracts() {
        let sample = exp1().sample(100, 2).unwrap();
        let mut cfg = InferenceConfig::with_seed(1);
        cfg.bridge.grid_subintervals = 2_000;
        cfg.bridge.reps = 200;
        cfg.bootstrap_reps = 200;
        cfg.grid_points = 2_000;
        assert!(confidence_interval(&sample, Metric::NormWasserstein, 1.0, CiMethod::BootstrapPercentile, &cfg).is_err());
        assert!(confidence_interval(&sample, Metric::NormWasserstein, 0.0, CiMethod::AsymptoticNormal, &cfg).is_err());
        let mut few = cfg;
        few.bridge.reps = 199;
        assert!(matches!(
            confidence_interval(&sample, Metric::NormZolotarev2, 0.9, CiMethod::AsymptoticNormal, &few),
            Err(Error::Config(_))
        ));
        few.bootstrap_reps = 10;
        assert!(matches!(
            confidence_interval(&sample, Metric::NormZolotarev2, 0.9, CiMethod::BootstrapPercentile, &few),
            Err(Error::Config(_))
        ));
        for method in [CiMethod::AsymptoticNormal, CiMethod::AsymptoticQuantile, CiMethod::BootstrapPercentile] {
            let ci = confidence_interval(&sample, Metric::NormZolotarev2, 0.9, method, &cfg).unwrap();
            assert!(ci.lo <= ci.hi, "{method:?}");
        }
        let normal = confidence_interval(&sample, Metric::NormWasserstein, 0.9, CiMethod::AsymptoticNormal, &cfg).unwrap();
        assert!(normal.lo < normal.estimate && normal.estimate < normal.hi);

        assert!(matches!(
            gof_exponentiality(&sample, Metric::Wasserstein, 0.05, GofMethod::Asymptotic, &cfg),
            Err(Error::UnsupportedMetric(_))
        ));
        let tiny = exp1().sample(19, 2).unwrap();
        assert!(gof_exponentiality(&tiny, Metric::NormWasserstein, 0.05, GofMethod::Asymptotic, &cfg).is_err());
        for method in [GofMethod::Asymptotic, GofMethod::ParametricBootstrap] {
            let r = gof_exponentiality(&sample, Metric::NormZolotarev2, 0.05, method, &cfg).unwrap();
            assert!((0.0..=1.0).contains(&r.p_value));
            assert_eq!(r.reject, r.p_value <= 0.05);
            assert_eq!(r.reps, 200);
        }
    }
}
