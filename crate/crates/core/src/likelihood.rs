//! Continuous and quantized likelihoods of the location-scale model
//! `y = Ψ^{-1}(S x + w)`.
//!
//! The quantized likelihood of a code `z` is the noise probability of
//! `W_z(x, Ψ) = {w : Ψ^{-1}(w + S x) ∈ Q^{-1}(z)}`. When the region is a
//! box and `Ψ` is diagonal this factorizes into per-coordinate CDF
//! differences (the *exact path*); otherwise it is estimated by Monte Carlo.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::noise::{Family, NoiseModel};
use crate::quantizer::{BoxRegion, Code, Quantizer, Region};

/// Off-diagonal magnitude below which a fixed scale counts as diagonal.
pub const DIAGONAL_TOLERANCE: f64 = 1e-12;

/// Minimum Monte-Carlo draw count.
pub const MIN_MC_COUNT: usize = 100;

/// Scale parameter Ψ, tagged by the structure the estimator relies on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScaleSpec", into = "ScaleSpec")]
pub enum Scale {
    /// A fixed positive-definite matrix.
    Fixed(DMatrix<f64>),
    /// `ψ I_n`.
    Scalar(f64),
    /// `diag(λ)`.
    Diagonal(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleSpec {
    Fixed(Vec<Vec<f64>>),
    Scalar(f64),
    Diagonal(Vec<f64>),
}

impl TryFrom<ScaleSpec> for Scale {
    type Error = Error;

    fn try_from(spec: ScaleSpec) -> Result<Self> {
        Ok(match spec {
            ScaleSpec::Scalar(v) => Scale::Scalar(v),
            ScaleSpec::Diagonal(v) => Scale::Diagonal(v),
            ScaleSpec::Fixed(rows) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidModel("fixed scale must be square".into()));
                }
                Scale::Fixed(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        })
    }
}

impl From<Scale> for ScaleSpec {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Scalar(v) => ScaleSpec::Scalar(v),
            Scale::Diagonal(v) => ScaleSpec::Diagonal(v),
            Scale::Fixed(m) => ScaleSpec::Fixed(
                (0..m.nrows())
                    .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                    .collect(),
            ),
        }
    }
}

impl Scale {
    pub fn identity(n: usize) -> Self {
        Scale::Fixed(DMatrix::identity(n, n))
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Scale::Fixed(_) => "fixed",
            Scale::Scalar(_) => "scalar",
            Scale::Diagonal(_) => "diagonal",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Scale::Scalar(psi) => {
                if !(*psi > 0.0) || !psi.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "scalar scale must be positive, got {psi}"
                    )));
                }
            }
            Scale::Diagonal(lambda) => {
                check_dim(n, lambda.len())?;
                if let Some(v) = lambda.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
                    return Err(Error::InvalidModel(format!(
                        "diagonal scale entries must be positive, got {v}"
                    )));
                }
            }
            Scale::Fixed(m) => {
                check_dim(n, m.nrows())?;
                check_dim(n, m.ncols())?;
                let size = m.amax().max(1.0);
                if (m - m.transpose()).amax() > 1e-12 * size {
                    return Err(Error::InvalidModel("fixed scale must be symmetric".into()));
                }
                if m.clone().cholesky().is_none() {
                    return Err(Error::InvalidModel(
                        "fixed scale must be positive definite".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn matrix(&self, n: usize) -> DMatrix<f64> {
        match self {
            Scale::Fixed(m) => m.clone(),
            Scale::Scalar(psi) => DMatrix::identity(n, n) * *psi,
            Scale::Diagonal(l) => DMatrix::from_diagonal(&DVector::from_column_slice(l)),
        }
    }

    /// Diagonal entries when Ψ is (numerically) diagonal.
    pub fn diagonal(&self, n: usize) -> Option<Vec<f64>> {
        match self {
            Scale::Scalar(psi) => Some(vec![*psi; n]),
            Scale::Diagonal(l) => Some(l.clone()),
            Scale::Fixed(m) => {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        if i != j && m[(i, j)].abs() >= DIAGONAL_TOLERANCE {
                            return None;
                        }
                    }
                }
                Some(m.diagonal().iter().copied().collect())
            }
        }
    }

    /// Free scale parameters: `[ψ]`, `λ`, or nothing for a fixed scale.
    pub fn params(&self) -> Vec<f64> {
        match self {
            Scale::Fixed(_) => Vec::new(),
            Scale::Scalar(psi) => vec![*psi],
            Scale::Diagonal(l) => l.clone(),
        }
    }

    pub(crate) fn with_params(&self, p: &[f64]) -> Scale {
        match self {
            Scale::Fixed(m) => Scale::Fixed(m.clone()),
            Scale::Scalar(_) => Scale::Scalar(p[0]),
            Scale::Diagonal(_) => Scale::Diagonal(p.to_vec()),
        }
    }

    pub fn log_det(&self, n: usize) -> f64 {
        match self {
            Scale::Scalar(psi) => n as f64 * psi.ln(),
            Scale::Diagonal(l) => l.iter().map(|v| v.ln()).sum(),
            Scale::Fixed(m) => {
                let chol = m.clone().cholesky().expect("validated positive definite");
                2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>()
            }
        }
    }

    /// `Ψ v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Scale::Scalar(psi) => v.iter().map(|x| psi * x).collect(),
            Scale::Diagonal(l) => v.iter().zip(l).map(|(x, d)| d * x).collect(),
            Scale::Fixed(m) => (m * DVector::from_column_slice(v))
                .iter()
                .copied()
                .collect(),
        }
    }

    /// A reusable `v ↦ Ψ^{-1} v` map.
    pub(crate) fn inverse(&self) -> ScaleInverse {
        match self {
            Scale::Scalar(psi) => ScaleInverse::Diagonal(vec![1.0 / psi]),
            Scale::Diagonal(l) => ScaleInverse::Diagonal(l.iter().map(|d| 1.0 / d).collect()),
            Scale::Fixed(m) => match self.diagonal(m.nrows()) {
                Some(d) => ScaleInverse::Diagonal(d.iter().map(|v| 1.0 / v).collect()),
                None => ScaleInverse::Dense(
                    m.clone()
                        .cholesky()
                        .expect("validated positive definite")
                        .inverse(),
                ),
            },
        }
    }
}

pub(crate) enum ScaleInverse {
    /// Length 1 means a scalar multiple of the identity.
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

impl ScaleInverse {
    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        match self {
            ScaleInverse::Diagonal(d) if d.len() == 1 => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = d[0] * x;
                }
            }
            ScaleInverse::Diagonal(d) => {
                for ((o, x), s) in out.iter_mut().zip(v).zip(d) {
                    *o = s * x;
                }
            }
            ScaleInverse::Dense(m) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..v.len()).map(|j| m[(i, j)] * v[j]).sum();
                }
            }
        }
    }
}

/// Observation matrix `S` (n×m), location `x` (m) and scale `Ψ` (n×n).
#[derive(Debug, Clone, PartialEq)]
pub struct LocationScaleModel {
    s: DMatrix<f64>,
    x: Vec<f64>,
    scale: Scale,
}

impl LocationScaleModel {
    pub fn new(s: DMatrix<f64>, x: Vec<f64>, scale: Scale) -> Result<Self> {
        if s.nrows() == 0 || s.ncols() == 0 {
            return Err(Error::InvalidModel(
                "observation matrix must be nonempty".into(),
            ));
        }
        check_dim(s.ncols(), x.len())?;
        scale.validate(s.nrows())?;
        Ok(Self { s, x, scale })
    }

    /// The 1-D model with `S = 1`.
    pub fn scalar(x: f64, scale: Scale) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, 1.0), vec![x], scale)
    }

    pub fn n(&self) -> usize {
        self.s.nrows()
    }

    pub fn m(&self) -> usize {
        self.s.ncols()
    }

    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn scale(&self) -> &Scale {
        &self.scale
    }

    pub fn with_params(&self, x: Vec<f64>, scale: Scale) -> Result<Self> {
        Self::new(self.s.clone(), x, scale)
    }

    /// `S x`.
    pub fn location(&self) -> Vec<f64> {
        (&self.s * DVector::from_column_slice(&self.x))
            .iter()
            .copied()
            .collect()
    }

    /// `w = Ψ y - S x`.
    pub fn noise_of(&self, y: &[f64]) -> Vec<f64> {
        let py = self.scale.apply(y);
        py.iter().zip(self.location()).map(|(a, b)| a - b).collect()
    }

    /// `y = Ψ^{-1}(w + S x)`.
    pub fn observation_of(&self, w: &[f64]) -> Vec<f64> {
        let v: Vec<f64> = w.iter().zip(self.location()).map(|(a, b)| a + b).collect();
        let mut y = vec![0.0; v.len()];
        self.scale.inverse().apply_into(&v, &mut y);
        y
    }
}

/// `log p_w(Ψ y - S x)`: the likelihood for fixed data, without the
/// Jacobian, so it is not a density in `y`.
pub fn continuous_loglik_without_jacobian(
    model: &LocationScaleModel,
    noise: &NoiseModel,
    y: &[f64],
) -> Result<f64> {
    check_dim(model.n(), noise.dim())?;
    check_dim(model.n(), y.len())?;
    noise.log_pdf(&model.noise_of(y))
}

/// `log p_w(Ψ y - S x) + log det Ψ`, a proper log-density of `y`.
pub fn continuous_loglik(model: &LocationScaleModel, noise: &NoiseModel, y: &[f64]) -> Result<f64> {
    Ok(continuous_loglik_without_jacobian(model, noise, y)? + model.scale.log_det(model.n()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ExactBox,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub count: usize,
    pub seed: u64,
}

/// A log-probability, `≤ 0`, with its Monte-Carlo standard error on the
/// log scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodValue {
    pub log_value: f64,
    pub std_error: f64,
    pub method: Method,
    /// Monte-Carlo run with no hits: `log_value` is `-∞`.
    pub underflow: bool,
}

impl LikelihoodValue {
    fn exact(log_value: f64) -> Self {
        Self {
            log_value: log_value.min(0.0),
            std_error: 0.0,
            method: Method::ExactBox,
            underflow: false,
        }
    }
}

/// `log(1 - exp(x))` for `x ≤ 0`.
fn log1mexp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `F(t) - 1/2` for `t ≥ 0`, without cancellation near zero.
fn mass_from_zero(family: Family, t: f64) -> f64 {
    match family {
        Family::Gaussian => 0.5 * libm::erf(t / std::f64::consts::SQRT_2),
        Family::Laplace => -0.5 * (-t).exp_m1(),
        Family::Logistic => 0.5 * (0.5 * t).tanh(),
    }
}

/// `log(F(u) - F(l))` for `l ≤ u`, stable in both tails and across zero.
pub fn log_interval_prob(family: Family, l: f64, u: f64) -> f64 {
    if !(l < u) {
        return f64::NEG_INFINITY;
    }
    if l == f64::NEG_INFINITY {
        return family.log_cdf(u);
    }
    if u == f64::INFINITY {
        return family.log_sf(l);
    }
    if l >= 0.0 {
        let (sl, su) = (family.log_sf(l), family.log_sf(u));
        if sl == f64::NEG_INFINITY {
            return sl;
        }
        sl + log1mexp(su - sl)
    } else if u <= 0.0 {
        let (fl, fu) = (family.log_cdf(l), family.log_cdf(u));
        if fu == f64::NEG_INFINITY {
            return fu;
        }
        fu + log1mexp(fl - fu)
    } else {
        (mass_from_zero(family, u) + mass_from_zero(family, -l)).ln()
    }
}

/// Transformed noise-space edges `(l, u) = (d a - c, d b - c)` of one box
/// side; infinite edges stay infinite.
fn noise_edges(d: f64, a: f64, b: f64, c: f64) -> (f64, f64) {
    let l = if a == f64::NEG_INFINITY { a } else { d * a - c };
    let u = if b == f64::INFINITY { b } else { d * b - c };
    (l, u)
}

/// Exact-path ingredients shared by the value and the gradient.
pub(crate) struct ExactSetup {
    family: Family,
    diag: Vec<f64>,
    loc: Vec<f64>,
}

impl ExactSetup {
    pub(crate) fn new(model: &LocationScaleModel, noise: &NoiseModel) -> Result<Self> {
        check_dim(model.n(), noise.dim())?;
        let diag = model
            .scale
            .diagonal(model.n())
            .ok_or_else(|| Error::ExactPathUnavailable("scale is not diagonal".into()))?;
        Ok(Self {
            family: noise.family(),
            diag,
            loc: model.location(),
        })
    }

    pub(crate) fn from_parts(family: Family, diag: Vec<f64>, loc: Vec<f64>) -> Self {
        Self { family, diag, loc }
    }

    pub(crate) fn loglik(&self, b: &BoxRegion) -> f64 {
        let mut total = 0.0;
        for j in 0..self.diag.len() {
            let (l, u) = noise_edges(self.diag[j], b.lower()[j], b.upper()[j], self.loc[j]);
            total += log_interval_prob(self.family, l, u);
            if total == f64::NEG_INFINITY {
                break;
            }
        }
        total
    }

    /// Returns `(log L, ∂ log L/∂(S x)_j, ∂ log L/∂d_j)`.
    pub(crate) fn grad(&self, b: &BoxRegion) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let n = self.diag.len();
        let mut total = 0.0;
        let mut d_loc = vec![0.0; n];
        let mut d_diag = vec![0.0; n];
        for j in 0..n {
            let (a, bb) = (b.lower()[j], b.upper()[j]);
            let (l, u) = noise_edges(self.diag[j], a, bb, self.loc[j]);
            let log_p = log_interval_prob(self.family, l, u);
            if log_p == f64::NEG_INFINITY {
                return Err(Error::ZeroProbability);
            }
            total += log_p;
            // f(edge) / P, zero at infinite edges
            let ratio = |t: f64| {
                if t.is_infinite() {
                    0.0
                } else {
                    (self.family.log_pdf(t) - log_p).exp()
                }
            };
            let (ru, rl) = (ratio(u), ratio(l));
            d_loc[j] = rl - ru;
            let bu = if bb.is_infinite() { 0.0 } else { bb * ru };
            let al = if a.is_infinite() { 0.0 } else { a * rl };
            d_diag[j] = bu - al;
        }
        Ok((total, d_loc, d_diag))
    }
}

fn exact_region(q: &Quantizer, z: &Code) -> Result<BoxRegion> {
    match q.region(z)? {
        Region::Box(b) => Ok(b),
        Region::Polytope(_) => Err(Error::ExactPathUnavailable(
            "quantization region is not a box".into(),
        )),
    }
}

/// `log P_w[W_z(x, Ψ)]`.
///
/// Without `mc` the exact box formula is used and the configuration must
/// allow it. With `mc` the probability is the hit fraction of
/// `Ψ^{-1}(w + S x) ∈ Q^{-1}(z)` over `mc.count` noise draws.
pub fn quantized_loglik(
    model: &LocationScaleModel,
    noise: &NoiseModel,
    q: &Quantizer,
    z: &Code,
    mc: Option<&McSettings>,
) -> Result<LikelihoodValue> {
    check_dim(model.n(), q.dim())?;
    match mc {
        None => {
            let setup = ExactSetup::new(model, noise)?;
            let region = exact_region(q, z)?;
            Ok(LikelihoodValue::exact(setup.loglik(&region)))
        }
        Some(mc) => monte_carlo_loglik(model, noise, &q.region(z)?, mc),
    }
}

/// Monte-Carlo estimate of the noise probability of an arbitrary convex
/// region's preimage.
pub fn monte_carlo_loglik(
    model: &LocationScaleModel,
    noise: &NoiseModel,
    region: &Region,
    mc: &McSettings,
) -> Result<LikelihoodValue> {
    check_dim(model.n(), noise.dim())?;
    check_dim(model.n(), region.dim())?;
    if mc.count < MIN_MC_COUNT {
        return Err(Error::McCountTooSmall(mc.count));
    }
    let n = model.n();
    let loc = model.location();
    let inv = model.scale.inverse();
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    let mut w = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut hits = 0usize;
    for _ in 0..mc.count {
        noise.fill(&mut rng, &mut w);
        for (wj, cj) in w.iter_mut().zip(&loc) {
            *wj += cj;
        }
        inv.apply_into(&w, &mut y);
        if region.contains(&y) {
            hits += 1;
        }
    }
    Ok(hit_fraction_value(hits, mc.count))
}

pub(crate) fn hit_fraction_value(hits: usize, count: usize) -> LikelihoodValue {
    if hits == 0 {
        return LikelihoodValue {
            log_value: f64::NEG_INFINITY,
            std_error: f64::INFINITY,
            method: Method::MonteCarlo,
            underflow: true,
        };
    }
    let nf = count as f64;
    let p = hits as f64 / nf;
    // delta method: se(log p̂) = se(p̂)/p̂; keep it positive when every draw hits
    let p_se = p.min(1.0 - 0.5 / nf);
    LikelihoodValue {
        log_value: p.ln(),
        std_error: ((1.0 - p_se) / (nf * p_se)).sqrt(),
        method: Method::MonteCarlo,
        underflow: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedGradient {
    pub log_value: f64,
    pub d_x: Vec<f64>,
    /// One entry for a scalar scale, `n` for a diagonal scale, none for a
    /// fixed scale.
    pub d_scale: Vec<f64>,
}

/// Exact-path gradient of `log L(x, Ψ | z)` with respect to `x` and the
/// free scale parameters.
pub fn grad_quantized_loglik(
    model: &LocationScaleModel,
    noise: &NoiseModel,
    q: &Quantizer,
    z: &Code,
) -> Result<QuantizedGradient> {
    check_dim(model.n(), q.dim())?;
    let setup = ExactSetup::new(model, noise)?;
    let region = exact_region(q, z)?;
    let (log_value, d_loc, d_diag) = setup.grad(&region)?;
    Ok(QuantizedGradient {
        log_value,
        d_x: chain_location(model.s(), &d_loc),
        d_scale: chain_scale(model.scale(), &d_diag),
    })
}

/// `Sᵀ g`.
pub(crate) fn chain_location(s: &DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    (0..s.ncols())
        .map(|k| (0..s.nrows()).map(|j| s[(j, k)] * g[j]).sum())
        .collect()
}

pub(crate) fn chain_scale(scale: &Scale, d_diag: &[f64]) -> Vec<f64> {
    match scale {
        Scale::Fixed(_) => Vec::new(),
        Scale::Scalar(_) => vec![d_diag.iter().sum()],
        Scale::Diagonal(_) => d_diag.to_vec(),
    }
}

/// Sum of per-observation log-likelihoods.
///
/// Monte-Carlo observation `i` uses seed `mc.seed ^ i`. Terms are computed
/// in parallel and summed in index order.
pub fn dataset_loglik(
    model: &LocationScaleModel,
    noise: &NoiseModel,
    q: &Quantizer,
    codes: &[Code],
    mc: Option<&McSettings>,
) -> Result<LikelihoodValue> {
    if codes.is_empty() {
        return Err(Error::Precondition("dataset has no observations".into()));
    }
    let terms: Vec<LikelihoodValue> = match mc {
        None => {
            // identical codes share one evaluation
            let unique: BTreeMap<&Code, ()> = codes.iter().map(|c| (c, ())).collect();
            let values: BTreeMap<&Code, LikelihoodValue> = unique
                .into_keys()
                .collect::<Vec<_>>()
                .into_par_iter()
                .map(|c| Ok((c, quantized_loglik(model, noise, q, c, None)?)))
                .collect::<Result<_>>()?;
            codes.iter().map(|c| values[c]).collect()
        }
        Some(mc) => codes
            .par_iter()
            .enumerate()
            .map(|(i, c)| {
                let per_obs = McSettings {
                    count: mc.count,
                    seed: mc.seed ^ i as u64,
                };
                quantized_loglik(model, noise, q, c, Some(&per_obs))
            })
            .collect::<Result<_>>()?,
    };
    let mut log_value = 0.0;
    let mut var = 0.0;
    let mut underflow = false;
    for t in &terms {
        log_value += t.log_value;
        var += t.std_error * t.std_error;
        underflow |= t.underflow;
    }
    Ok(LikelihoodValue {
        log_value,
        std_error: if mc.is_some() { var.sqrt() } else { 0.0 },
        method: if mc.is_some() {
            Method::MonteCarlo
        } else {
            Method::ExactBox
        },
        underflow,
    })
}

/// Draws `count` codes `Q(Ψ^{-1}(S x + w))`. Deterministic per seed.
pub fn simulate_codes(
    model: &LocationScaleModel,
    noise: &NoiseModel,
    q: &Quantizer,
    count: usize,
    seed: u64,
) -> Result<Vec<Code>> {
    check_dim(model.n(), noise.dim())?;
    check_dim(model.n(), q.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = vec![0.0; model.n()];
    (0..count)
        .map(|_| {
            noise.fill(&mut rng, &mut w);
            q.quantize(&model.observation_of(&w))
        })
        .collect()
}
