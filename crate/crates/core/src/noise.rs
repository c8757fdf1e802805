//! Logconcave noise families in standard (zero-location, unit-scale) form.
//!
//! Coordinates are i.i.d.; location and scale enter only through the
//! location-scale model in [`crate::likelihood`]. All three families are
//! symmetric about zero, which the tail-stable log-CDF relies on:
//! `log S(t) = log F(-t)`.

use std::f64::consts::{LN_2, PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// ln(sqrt(2π))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument the Gaussian log-CDF switches from `erfc` to the
/// asymptotic Mills-ratio series.
const GAUSS_SERIES_CUTOFF: f64 = -20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Laplace,
    Logistic,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Gaussian, Family::Laplace, Family::Logistic];

    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Laplace => "laplace",
            Family::Logistic => "logistic",
        }
    }

    /// Univariate standard log-density.
    pub fn log_pdf(self, t: f64) -> f64 {
        match self {
            Family::Gaussian => -0.5 * t * t - LN_SQRT_2PI,
            Family::Laplace => -t.abs() - LN_2,
            Family::Logistic => {
                let a = t.abs();
                -a - 2.0 * (-a).exp().ln_1p()
            }
        }
    }

    pub fn pdf(self, t: f64) -> f64 {
        if t.is_infinite() {
            return 0.0;
        }
        self.log_pdf(t).exp()
    }

    /// d/dt log p(t). The Laplace score at 0 is taken as 0.
    pub fn score(self, t: f64) -> f64 {
        match self {
            Family::Gaussian => -t,
            Family::Laplace => -t.signum() * f64::from(u8::from(t != 0.0)),
            Family::Logistic => -(0.5 * t).tanh(),
        }
    }

    /// log F(t), finite and monotone far into both tails.
    pub fn log_cdf(self, t: f64) -> f64 {
        if t.is_nan() {
            return f64::NAN;
        }
        if t == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        if t == f64::INFINITY {
            return 0.0;
        }
        match self {
            Family::Gaussian => gaussian_log_cdf(t),
            Family::Laplace => {
                if t < 0.0 {
                    t - LN_2
                } else {
                    (-0.5 * (-t).exp()).ln_1p()
                }
            }
            Family::Logistic => -softplus(-t),
        }
    }

    /// log(1 - F(t)).
    pub fn log_sf(self, t: f64) -> f64 {
        self.log_cdf(-t)
    }

    pub fn cdf(self, t: f64) -> f64 {
        self.log_cdf(t).exp()
    }

    /// F^{-1}(p) for p in (0, 1); ±∞ at the endpoints.
    pub fn quantile(self, p: f64) -> f64 {
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        match self {
            Family::Gaussian => gaussian_quantile(p),
            Family::Laplace => {
                if p < 0.5 {
                    (2.0 * p).ln()
                } else {
                    -(2.0 * (1.0 - p)).ln()
                }
            }
            Family::Logistic => (p / (1.0 - p)).ln(),
        }
    }

    pub fn variance(self) -> f64 {
        match self {
            Family::Gaussian => 1.0,
            Family::Laplace => 2.0,
            Family::Logistic => PI * PI / 3.0,
        }
    }

    pub(crate) fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Family::Gaussian => rng.sample(StandardNormal),
            Family::Laplace | Family::Logistic => {
                let u: f64 = rng.sample(Open01);
                self.quantile(u)
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Family::Gaussian),
            "laplace" => Ok(Family::Laplace),
            "logistic" => Ok(Family::Logistic),
            _ => Err(Error::UnknownNoise(s.to_string())),
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn gaussian_log_cdf(t: f64) -> f64 {
    if t > 0.0 {
        (-0.5 * libm::erfc(t / SQRT_2)).ln_1p()
    } else if t > GAUSS_SERIES_CUTOFF {
        (0.5 * libm::erfc(-t / SQRT_2)).ln()
    } else {
        // Φ(t) = φ(t)/|t| · Σ_k (-1)^k (2k-1)!! / t^{2k}
        let inv_t2 = 1.0 / (t * t);
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..=12 {
            term *= -((2 * k - 1) as f64) * inv_t2;
            sum += term;
        }
        -0.5 * t * t - LN_SQRT_2PI - (-t).ln() + sum.ln()
    }
}

/// Acklam's rational approximation refined by one Halley step.
fn gaussian_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };

    let e = 0.5 * libm::erfc(-x / SQRT_2) - p;
    let u = e * (2.0 * PI).sqrt() * (0.5 * x * x).exp();
    x - u / (1.0 + 0.5 * x * u)
}

/// Anything with a log-density on R^n. The logconcavity self-check is
/// generic over this so that non-logconcave densities can be probed too.
pub trait LogDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, w: &[f64]) -> f64;
}

/// A product of i.i.d. standard univariate members of one family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseModel {
    family: Family,
    dim: usize,
}

impl NoiseModel {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel(
                "noise dimension must be positive".into(),
            ));
        }
        Ok(Self { family, dim })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Σ_j log p₁(w[j]).
    pub fn log_pdf(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim, w.len())?;
        Ok(w.iter().map(|&t| self.family.log_pdf(t)).sum())
    }

    pub fn log_cdf(&self, t: f64) -> f64 {
        self.family.log_cdf(t)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.family.quantile(p)
    }

    /// `count` i.i.d. draws. The same `(seed, count)` always yields the
    /// same points.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let mut w = vec![0.0; self.dim];
                self.fill(&mut rng, &mut w);
                w
            })
            .collect()
    }

    pub(crate) fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.family.draw(rng);
        }
    }

    pub fn check_logconcavity(&self, trials: usize, seed: u64) -> LogconcavityReport {
        check_logconcavity(self, trials, seed)
    }
}

impl LogDensity for NoiseModel {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, w: &[f64]) -> f64 {
        w.iter().map(|&t| self.family.log_pdf(t)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogconcavityReport {
    pub trials: usize,
    pub violations: usize,
    /// Smallest `log p(w_α) - [α log p(w₁) + (1-α) log p(w₀)]` seen.
    pub worst_gap: f64,
}

pub const LOGCONCAVITY_SLACK: f64 = 1e-9;

/// Random-triple test of the log-domain midpoint inequality. Endpoints are
/// drawn uniformly from `[-10, 10]^n`, α uniformly from `[0, 1]`.
pub fn check_logconcavity<D: LogDensity + ?Sized>(
    density: &D,
    trials: usize,
    seed: u64,
) -> LogconcavityReport {
    let n = density.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w0 = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut wa = vec![0.0; n];
    let mut violations = 0;
    let mut worst_gap = f64::INFINITY;
    for _ in 0..trials {
        for j in 0..n {
            w0[j] = rng.random_range(-10.0..=10.0);
            w1[j] = rng.random_range(-10.0..=10.0);
        }
        let alpha: f64 = rng.random();
        for j in 0..n {
            wa[j] = alpha * w1[j] + (1.0 - alpha) * w0[j];
        }
        let gap = density.log_density(&wa)
            - (alpha * density.log_density(&w1) + (1.0 - alpha) * density.log_density(&w0));
        if gap < -LOGCONCAVITY_SLACK {
            violations += 1;
        }
        worst_gap = worst_gap.min(gap);
    }
    LogconcavityReport {
        trials,
        violations,
        worst_gap,
    }
}
