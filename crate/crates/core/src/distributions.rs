//! Analytic reference laws: the exponential target and the Weibull and gamma
//! alternatives used to generate data.

use std::fmt;

use rand::distr::Open01;
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::sample::PitSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Exponential,
    Weibull,
    Gamma,
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistKind::Exponential => "exponential",
            DistKind::Weibull => "weibull",
            DistKind::Gamma => "gamma",
        })
    }
}

impl std::str::FromStr for DistKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exp" | "exponential" => Ok(DistKind::Exponential),
            "weibull" => Ok(DistKind::Weibull),
            "gamma" => Ok(DistKind::Gamma),
            other => Err(Error::InvalidParameter(format!("unknown distribution {other}"))),
        }
    }
}

/// A positive continuous law with shape `a` and scale `lambda`.
///
/// * exponential: `F(t) = 1 - exp(-t / lambda)` (shape is fixed at 1)
/// * Weibull: `F(t) = 1 - exp(-(t / lambda)^a)`
/// * gamma: density `x^(a-1) exp(-x / lambda) / (Gamma(a) lambda^a)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefDistribution {
    kind: DistKind,
    shape: f64,
    scale: f64,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

impl RefDistribution {
    pub fn new(kind: DistKind, shape: f64, scale: f64) -> Result<Self> {
        check_positive("shape", shape)?;
        check_positive("scale", scale)?;
        let shape = if kind == DistKind::Exponential { 1.0 } else { shape };
        Ok(Self { kind, shape, scale })
    }

    /// Exponential law `G_mu` with mean `mu`.
    pub fn exponential(mu: f64) -> Result<Self> {
        check_positive("mean", mu)?;
        Self::new(DistKind::Exponential, 1.0, mu)
    }

    /// Member of `kind` with the given shape, rescaled to have mean 1.
    pub fn mean_one(kind: DistKind, shape: f64) -> Result<Self> {
        check_positive("shape", shape)?;
        let scale = match kind {
            DistKind::Exponential => 1.0,
            DistKind::Weibull => 1.0 / gamma(1.0 + 1.0 / shape),
            DistKind::Gamma => 1.0 / shape,
        };
        Self::new(kind, shape, scale)
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn shape(&self) -> f64 {
        self.shape
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            DistKind::Exponential => self.scale,
            DistKind::Weibull => self.scale * gamma(1.0 + 1.0 / self.shape),
            DistKind::Gamma => self.shape * self.scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            DistKind::Exponential => self.scale * self.scale,
            DistKind::Weibull => {
                let g1 = gamma(1.0 + 1.0 / self.shape);
                let g2 = gamma(1.0 + 2.0 / self.shape);
                self.scale * self.scale * (g2 - g1 * g1)
            }
            DistKind::Gamma => self.shape * self.scale * self.scale,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.kind {
            DistKind::Exponential => -(-t / self.scale).exp_m1(),
            DistKind::Weibull => -(-(t / self.scale).powf(self.shape)).exp_m1(),
            DistKind::Gamma => gamma_lr(self.shape, t / self.scale),
        }
    }

    /// Survival function `1 - F(t)`, accurate in the upper tail.
    pub fn sf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match self.kind {
            DistKind::Exponential => (-t / self.scale).exp(),
            DistKind::Weibull => (-(t / self.scale).powf(self.shape)).exp(),
            DistKind::Gamma => gamma_ur(self.shape, t / self.scale),
        }
    }

    pub fn pdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let (a, s) = (self.shape, self.scale);
        match self.kind {
            DistKind::Exponential => (-t / s).exp() / s,
            DistKind::Weibull => a / s * (t / s).powf(a - 1.0) * (-(t / s).powf(a)).exp(),
            DistKind::Gamma => {
                ((a - 1.0) * (t / s).ln() - t / s - statrs::function::gamma::ln_gamma(a)).exp() / s
            }
        }
    }

    /// Inverse cdf. Gamma has no closed form and uses bracketed bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        match self.kind {
            DistKind::Exponential => -self.scale * (-p).ln_1p(),
            DistKind::Weibull => self.scale * (-(-p).ln_1p()).powf(1.0 / self.shape),
            DistKind::Gamma => self.gamma_quantile(p),
        }
    }

    fn gamma_quantile(&self, p: f64) -> f64 {
        let mut hi = self.mean().max(1e-300);
        while self.cdf(hi) < p {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Stop-loss transform `int_t^inf (1 - F(x)) dx = E[(X - t)_+]`.
    pub fn stop_loss(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return self.mean();
        }
        let (a, s) = (self.shape, self.scale);
        match self.kind {
            DistKind::Exponential => s * (-t / s).exp(),
            DistKind::Weibull => {
                let z = (t / s).powf(a);
                s * gamma(1.0 + 1.0 / a) * gamma_ur(1.0 / a, z)
            }
            DistKind::Gamma => {
                let z = t / s;
                a * s * gamma_ur(a + 1.0, z) - t * gamma_ur(a, z)
            }
        }
    }

    /// Smallest integer `T >= F^{-1}(1 - tol)`.
    pub fn horizon(&self, tol: f64) -> f64 {
        self.quantile(1.0 - tol).ceil()
    }

    /// One draw, strictly positive. Exponential and Weibull are inverse-cdf
    /// based; gamma uses the Marsaglia-Tsang sampler.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            DistKind::Exponential => {
                let u: f64 = rng.sample(Open01);
                self.scale * -u.ln()
            }
            DistKind::Weibull => {
                let u: f64 = rng.sample(Open01);
                self.scale * (-u.ln()).powf(1.0 / self.shape)
            }
            DistKind::Gamma => {
                let g = Gamma::new(self.shape, self.scale).expect("validated parameters");
                loop {
                    let x = g.sample(rng);
                    if x > 0.0 {
                        return x;
                    }
                }
            }
        }
    }

    pub fn draw_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// `n` i.i.d. draws from a fresh stream seeded by `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<PitSample> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        let mut rng = stream_rng(seed, 0);
        PitSample::new(self.draw_n(n, &mut rng))
    }

    pub fn label(&self) -> String {
        match self.kind {
            DistKind::Exponential => format!("exp({})", self.scale),
            _ => format!("{}({})", self.kind, self.shape),
        }
    }
}

impl fmt::Display for RefDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}
