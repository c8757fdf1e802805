//! Set geometry behind the logconcavity result: noise regions, weighted
//! Minkowski combinations, the parameter-combination inclusions, and the
//! hulls generated by matrix pairs that sum to the identity.
//!
//! Every check here is a brute-force sampling oracle. Nothing is proved;
//! the reports carry counts and worst-case margins.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::likelihood::{LocationScaleModel, Scale};
use crate::noise::NoiseModel;
use crate::quantizer::{gaussian_vector, BoxRegion, Code, Halfspace, Polytope, Quantizer, Region};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn lerp(v0: &[f64], v1: &[f64], alpha: f64) -> Vec<f64> {
    v0.iter()
        .zip(v1)
        .map(|(a, b)| alpha * b + (1.0 - alpha) * a)
        .collect()
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "weight {alpha} is outside [0, 1]"
        )))
    }
}

// ---------------------------------------------------------------------------
// Noise regions

/// Whether `w` is in the noise region `W_z(x, Ψ) = {Ψ y - S x : Q(y) = z}`.
pub fn noise_region_membership(
    w: &[f64],
    z: &Code,
    model: &LocationScaleModel,
    q: &Quantizer,
) -> Result<bool> {
    check_dim(model.n(), w.len())?;
    check_dim(model.n(), q.dim())?;
    let region = q.region(z)?;
    Ok(region.contains(&model.observation_of(w)))
}

/// The noise region as an explicit [`Region`].
///
/// Boxes stay boxes under a diagonal scale. Otherwise the image is a
/// polytope, which requires the quantization region to be bounded.
pub fn noise_region(model: &LocationScaleModel, region: &Region) -> Result<Region> {
    let n = model.n();
    check_dim(n, region.dim())?;
    let loc = model.location();
    if let (Region::Box(b), Some(d)) = (region, model.scale().diagonal(n)) {
        let lower = (0..n)
            .map(|j| {
                if b.lower()[j].is_finite() {
                    d[j] * b.lower()[j] - loc[j]
                } else {
                    b.lower()[j]
                }
            })
            .collect();
        let upper = (0..n)
            .map(|j| {
                if b.upper()[j].is_finite() {
                    d[j] * b.upper()[j] - loc[j]
                } else {
                    b.upper()[j]
                }
            })
            .collect();
        return Ok(Region::Box(BoxRegion::new(lower, upper)?));
    }
    if !region.is_bounded() {
        return Err(Error::InvalidRegion(
            "the image of an unbounded box under a non-diagonal scale is not representable".into(),
        ));
    }
    // n·y ≤ o with y = Ψ^{-1}(w + c) becomes (Ψ^{-1} n)·w ≤ o - (Ψ^{-1} n)·c
    let inv = model
        .scale()
        .matrix(n)
        .try_inverse()
        .ok_or_else(|| Error::InvalidModel("scale is singular".into()))?;
    let hs = region
        .halfspaces()
        .into_iter()
        .map(|h| {
            let a: Vec<f64> = (&inv * DVector::from_vec(h.normal))
                .iter()
                .copied()
                .collect();
            let offset = h.offset - dot(&a, &loc);
            Halfspace::new(a, offset)
        })
        .collect();
    Ok(Region::Polytope(Polytope::new(hs)?))
}

// ---------------------------------------------------------------------------
// Sampled sets and Minkowski combinations

/// A finite sample standing in for a set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSet {
    pub points: Vec<Vec<f64>>,
    pub label: String,
}

impl SampledSet {
    pub fn new(points: Vec<Vec<f64>>, label: impl Into<String>) -> Result<Self> {
        let n = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Precondition("sampled set is empty".into()))?;
        for p in &points {
            check_dim(n, p.len())?;
        }
        Ok(Self {
            points,
            label: label.into(),
        })
    }

    pub fn from_region(
        region: &Region,
        count: usize,
        seed: u64,
        label: impl Into<String>,
    ) -> Result<Self> {
        Self::new(region.sample(count, seed)?.points, label)
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    /// Coordinate-wise `(min, max)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for p in &self.points {
            for j in 0..n {
                lo[j] = lo[j].min(p[j]);
                hi[j] = hi[j].max(p[j]);
            }
        }
        (lo, hi)
    }
}

/// `pairs` random points `α w₁ + (1-α) w₀` with `w_i` drawn from `A_i`.
pub fn minkowski_combine(
    a0: &SampledSet,
    a1: &SampledSet,
    alpha: f64,
    pairs: usize,
    seed: u64,
) -> Result<SampledSet> {
    check_dim(a0.dim(), a1.dim())?;
    check_alpha(alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..pairs.max(1))
        .map(|_| {
            let w0 = &a0.points[rng.random_range(0..a0.points.len())];
            let w1 = &a1.points[rng.random_range(0..a1.points.len())];
            if alpha == 0.0 {
                w0.clone()
            } else if alpha == 1.0 {
                w1.clone()
            } else {
                lerp(w0, w1, alpha)
            }
        })
        .collect();
    SampledSet::new(points, format!("{}+{}", a0.label, a1.label))
}

/// How [`MinkowskiSet::contains`] decides membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MembershipMethod {
    /// `α ∈ {0, 1}`: membership in one of the sets.
    Endpoint,
    /// Both sets are boxes: interval arithmetic.
    Interval,
    /// Dimension ≤ 2: support-function test over the facet normals of both
    /// sets, which are exactly the facet normals of the sum.
    Support,
    /// Alternating projections between `A₀` and `(w - α A₁)/(1-α)`.
    DecompositionSearch,
}

#[derive(Debug, Clone)]
enum Decider {
    Endpoint0,
    Endpoint1,
    Interval { lower: Vec<f64>, upper: Vec<f64> },
    Support(Vec<(Vec<f64>, f64)>),
    Search,
}

/// The weighted Minkowski combination `A_α = α A₁ + (1-α) A₀` of two
/// convex regions, with a membership oracle.
#[derive(Debug, Clone)]
pub struct MinkowskiSet {
    a0: Region,
    a1: Region,
    alpha: f64,
    decider: Decider,
}

/// Decomposition-search tolerance on the residual in `w`.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-6;
const SEARCH_ITERATIONS: usize = 10_000;

impl MinkowskiSet {
    pub fn new(a0: Region, a1: Region, alpha: f64) -> Result<Self> {
        check_dim(a0.dim(), a1.dim())?;
        check_alpha(alpha)?;
        let n = a0.dim();
        let decider = if alpha == 0.0 {
            Decider::Endpoint0
        } else if alpha == 1.0 {
            Decider::Endpoint1
        } else if let (Region::Box(b0), Region::Box(b1)) = (&a0, &a1) {
            let mix = |x0: f64, x1: f64| {
                if x0.is_infinite() || x1.is_infinite() {
                    if x0.is_infinite() {
                        x0
                    } else {
                        x1
                    }
                } else {
                    alpha * x1 + (1.0 - alpha) * x0
                }
            };
            Decider::Interval {
                lower: (0..n).map(|j| mix(b0.lower()[j], b1.lower()[j])).collect(),
                upper: (0..n).map(|j| mix(b0.upper()[j], b1.upper()[j])).collect(),
            }
        } else if n <= 2 {
            let mut normals: Vec<Vec<f64>> = Vec::new();
            for r in [&a0, &a1] {
                let hs = match r {
                    Region::Box(_) => axis_normals(n),
                    Region::Polytope(p) => {
                        p.halfspaces().iter().map(|h| h.normal.clone()).collect()
                    }
                };
                for u in hs {
                    let len = norm(&u);
                    let u: Vec<f64> = u.iter().map(|v| v / len).collect();
                    if !normals.iter().any(|v| dist(v, &u) < 1e-12) {
                        normals.push(u);
                    }
                }
            }
            let bounds = normals
                .into_iter()
                .filter_map(|u| {
                    let h = alpha * a1.support(&u) + (1.0 - alpha) * a0.support(&u);
                    h.is_finite().then_some((u, h))
                })
                .collect();
            Decider::Support(bounds)
        } else {
            Decider::Search
        };
        Ok(Self {
            a0,
            a1,
            alpha,
            decider,
        })
    }

    pub fn method(&self) -> MembershipMethod {
        match self.decider {
            Decider::Endpoint0 | Decider::Endpoint1 => MembershipMethod::Endpoint,
            Decider::Interval { .. } => MembershipMethod::Interval,
            Decider::Support(_) => MembershipMethod::Support,
            Decider::Search => MembershipMethod::DecompositionSearch,
        }
    }

    pub fn dim(&self) -> usize {
        self.a0.dim()
    }

    pub fn contains(&self, w: &[f64]) -> bool {
        match &self.decider {
            Decider::Endpoint0 => self.a0.contains(w),
            Decider::Endpoint1 => self.a1.contains(w),
            Decider::Interval { lower, upper } => w
                .iter()
                .enumerate()
                .all(|(j, &v)| lower[j] <= v && (v < upper[j] || upper[j] == f64::INFINITY)),
            Decider::Support(bounds) => bounds
                .iter()
                .all(|(u, h)| dot(u, w) <= h + 1e-12 * (1.0 + h.abs())),
            Decider::Search => self.decompose(w).is_some(),
        }
    }

    /// A pair `(w₀, w₁) ∈ A₀ × A₁` with `α w₁ + (1-α) w₀ ≈ w`, found by
    /// alternating projections. `None` if the residual stays above
    /// [`DECOMPOSITION_TOLERANCE`].
    pub fn decompose(&self, w: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let a = self.alpha;
        if a == 0.0 {
            return self.a0.contains(w).then(|| (w.to_vec(), w.to_vec()));
        }
        if a == 1.0 {
            return self.a1.contains(w).then(|| (w.to_vec(), w.to_vec()));
        }
        // B = c - k A₁ is the set of w₀ for which (w - (1-α) w₀)/α ∈ A₁
        let c: Vec<f64> = w.iter().map(|v| v / (1.0 - a)).collect();
        let k = a / (1.0 - a);
        let w1_of = |w0: &[f64]| -> Vec<f64> {
            w.iter()
                .zip(w0)
                .map(|(wv, v)| (wv - (1.0 - a) * v) / a)
                .collect()
        };
        let project_b = |v: &[f64]| -> Vec<f64> {
            let t: Vec<f64> = c.iter().zip(v).map(|(ci, vi)| (ci - vi) / k).collect();
            let p = project(&self.a1, &t);
            c.iter().zip(&p).map(|(ci, pi)| ci - k * pi).collect()
        };
        let mut v = project(&self.a0, w);
        for _ in 0..SEARCH_ITERATIONS {
            let b = project_b(&v);
            let next = project(&self.a0, &b);
            if (1.0 - a) * dist(&b, &next) <= DECOMPOSITION_TOLERANCE {
                let w1 = w1_of(&next);
                return Some((next, w1));
            }
            if dist(&next, &v) < 1e-15 * (1.0 + norm(&v)) {
                break;
            }
            v = next;
        }
        None
    }
}

fn axis_normals(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * n);
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[j] = s;
            out.push(e);
        }
    }
    out
}

/// Euclidean projection onto a closed convex region. Boxes clamp; polytopes
/// use Dykstra's algorithm over the halfspaces.
pub fn project(region: &Region, v: &[f64]) -> Vec<f64> {
    match region {
        Region::Box(b) => v
            .iter()
            .enumerate()
            .map(|(j, &x)| x.max(b.lower()[j]).min(b.upper()[j]))
            .collect(),
        Region::Polytope(p) => {
            let hs = p.halfspaces();
            if hs.iter().all(|h| h.contains(v)) {
                return v.to_vec();
            }
            let mut x = v.to_vec();
            let mut incr = vec![vec![0.0; v.len()]; hs.len()];
            for _ in 0..5_000 {
                let mut change = 0.0;
                for (h, inc) in hs.iter().zip(incr.iter_mut()) {
                    let y: Vec<f64> = x.iter().zip(inc.iter()).map(|(a, b)| a + b).collect();
                    let excess = dot(&h.normal, &y) - h.offset;
                    let proj: Vec<f64> = if excess > 0.0 {
                        let s = excess / dot(&h.normal, &h.normal);
                        y.iter().zip(&h.normal).map(|(a, n)| a - s * n).collect()
                    } else {
                        y.clone()
                    };
                    for i in 0..x.len() {
                        inc[i] = y[i] - proj[i];
                    }
                    change += dist(&proj, &x);
                    x = proj;
                }
                if change < 1e-14 * (1.0 + norm(&x)) {
                    break;
                }
            }
            x
        }
    }
}

// ---------------------------------------------------------------------------
// Prékopa's inequality by Monte Carlo

/// Monte-Carlo estimates of `P[A_α]`, `P[A₀]`, `P[A₁]` and the inequality
/// `log P[A_α] ≥ α log P[A₁] + (1-α) log P[A₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrekopaReport {
    pub alpha: f64,
    pub log_p_alpha: f64,
    pub log_p0: f64,
    pub log_p1: f64,
    /// `log P[A_α]`.
    pub lhs: f64,
    /// `α log P[A₁] + (1-α) log P[A₀]`.
    pub rhs: f64,
    /// `lhs - rhs`.
    pub margin: f64,
    /// Combined standard error of `margin` on the log scale.
    pub std_error: f64,
    pub passed: bool,
    /// Some estimate had no hits; nothing can be concluded.
    pub inconclusive: bool,
    pub method: MembershipMethod,
}

pub const MIN_PREKOPA_COUNT: usize = 100_000;
const CHUNK: usize = 1 << 15;

/// Number of noise draws landing in `set`, over `count` draws from the
/// stream `stream` of `seed`.
fn mc_hits<F>(noise: &NoiseModel, count: usize, seed: u64, stream: u64, set: F) -> usize
where
    F: Fn(&[f64]) -> bool + Sync,
{
    let chunks = count.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((stream << 32) | c as u64);
            let len = CHUNK.min(count - c * CHUNK);
            let mut w = vec![0.0; noise.dim()];
            let mut hits = 0;
            for _ in 0..len {
                noise.fill(&mut rng, &mut w);
                hits += set(&w) as usize;
            }
            hits
        })
        .sum()
}

fn log_estimate(hits: usize, count: usize) -> (f64, f64) {
    if hits == 0 {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let p = hits as f64 / count as f64;
    (p.ln(), ((1.0 - p) / (count as f64 * p)).sqrt())
}

pub fn prekopa_check(
    noise: &NoiseModel,
    a0: &Region,
    a1: &Region,
    alpha: f64,
    mc_count: usize,
    seed: u64,
) -> Result<PrekopaReport> {
    check_dim(noise.dim(), a0.dim())?;
    if mc_count < MIN_PREKOPA_COUNT {
        return Err(Error::McCountTooSmall(mc_count));
    }
    let set = MinkowskiSet::new(a0.clone(), a1.clone(), alpha)?;
    let (lp_a, se_a) = log_estimate(
        mc_hits(noise, mc_count, seed, 0, |w| set.contains(w)),
        mc_count,
    );
    let (lp_0, se_0) = log_estimate(
        mc_hits(noise, mc_count, seed, 1, |w| a0.contains(w)),
        mc_count,
    );
    let (lp_1, se_1) = log_estimate(
        mc_hits(noise, mc_count, seed, 2, |w| a1.contains(w)),
        mc_count,
    );
    let inconclusive = [lp_a, lp_0, lp_1].iter().any(|v| v.is_infinite());
    let rhs = alpha * lp_1 + (1.0 - alpha) * lp_0;
    let se =
        (se_a * se_a + alpha * alpha * se_1 * se_1 + (1.0 - alpha).powi(2) * se_0 * se_0).sqrt();
    let margin = lp_a - rhs;
    Ok(PrekopaReport {
        alpha,
        log_p_alpha: lp_a,
        log_p0: lp_0,
        log_p1: lp_1,
        lhs: lp_a,
        rhs,
        margin,
        std_error: se,
        passed: !inconclusive && margin >= -4.0 * se,
        inconclusive,
        method: set.method(),
    })
}

// ---------------------------------------------------------------------------
// Parameter combinations

fn mix_scale(s0: &Scale, s1: &Scale, alpha: f64, n: usize) -> Scale {
    match (s0, s1) {
        (Scale::Scalar(a), Scale::Scalar(b)) => Scale::Scalar(alpha * b + (1.0 - alpha) * a),
        (Scale::Diagonal(a), Scale::Diagonal(b)) => Scale::Diagonal(lerp(a, b, alpha)),
        _ => Scale::Fixed(s1.matrix(n) * alpha + s0.matrix(n) * (1.0 - alpha)),
    }
}

/// The model at `(x_α, Ψ_α)` on the segment between two endpoints that
/// share `S`.
pub fn combine_models(
    m0: &LocationScaleModel,
    m1: &LocationScaleModel,
    alpha: f64,
) -> Result<LocationScaleModel> {
    check_alpha(alpha)?;
    if m0.s() != m1.s() {
        return Err(Error::InvalidModel(
            "endpoints must share the observation matrix".into(),
        ));
    }
    let x = lerp(m0.x(), m1.x(), alpha);
    let scale = mix_scale(m0.scale(), m1.scale(), alpha, m0.n());
    LocationScaleModel::new(m0.s().clone(), x, scale)
}

/// Splits `w = Ψ_α y - S x_α` into `w_i = Ψ_i y - S x_i`, which satisfy
/// `w = α w₁ + (1-α) w₀`.
pub fn lemma2_decompose(
    w: &[f64],
    y: &[f64],
    m0: &LocationScaleModel,
    m1: &LocationScaleModel,
    alpha: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mid = combine_models(m0, m1, alpha)?;
    check_dim(mid.n(), w.len())?;
    check_dim(mid.n(), y.len())?;
    let expected = mid.noise_of(y);
    let err = dist(&expected, w);
    if err > 1e-9 * (1.0 + norm(w)) {
        return Err(Error::Precondition(format!(
            "w is not Ψ_α y - S x_α (residual {err:e})"
        )));
    }
    Ok((m0.noise_of(y), m1.noise_of(y)))
}

/// Which scale restriction makes the Minkowski combination of noise
/// regions a noise region again.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleCase {
    /// `Ψ₀ = Ψ₁`.
    A,
    /// `Ψ_i = ψ_i I`.
    B,
    /// `Ψ_i` diagonal (with box regions).
    C,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recombination {
    pub y: Vec<f64>,
    pub c0: DMatrix<f64>,
    pub c1: DMatrix<f64>,
}

fn is_scalar_identity(m: &DMatrix<f64>) -> bool {
    let d = m[(0, 0)];
    m.iter().enumerate().all(|(k, &v)| {
        let (r, c) = (k % m.nrows(), k / m.nrows());
        if r == c {
            (v - d).abs() <= 1e-12 * d.abs().max(1.0)
        } else {
            v.abs() <= 1e-12
        }
    })
}

fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.iter()
        .enumerate()
        .all(|(k, &v)| k % m.nrows() == k / m.nrows() || v.abs() <= 1e-12)
}

/// `C_i = (α₀Ψ₀ + α₁Ψ₁)^{-1} α_i Ψ_i` and `y = C₀ y₀ + C₁ y₁`.
///
/// If `y_i` are observations behind `w_i ∈ A_i`, then `w_α` is the noise of
/// `y` at `(x_α, Ψ_α)`. The case is checked against the scale structure.
pub fn lemma3_recombine(
    y0: &[f64],
    y1: &[f64],
    scale0: &Scale,
    scale1: &Scale,
    alpha: f64,
    case: ScaleCase,
) -> Result<Recombination> {
    check_alpha(alpha)?;
    let n = y0.len();
    check_dim(n, y1.len())?;
    scale0.validate(n)?;
    scale1.validate(n)?;
    let (p0, p1) = (scale0.matrix(n), scale1.matrix(n));
    let ok = match case {
        ScaleCase::A => (&p0 - &p1).amax() <= 1e-12 * p0.amax().max(1.0),
        ScaleCase::B => is_scalar_identity(&p0) && is_scalar_identity(&p1),
        ScaleCase::C => is_diagonal(&p0) && is_diagonal(&p1),
    };
    if !ok {
        return Err(Error::Precondition(format!(
            "scales do not have the structure of case {case:?}"
        )));
    }
    let (a0, a1) = (1.0 - alpha, alpha);
    let mix = &p0 * a0 + &p1 * a1;
    let inv = mix
        .try_inverse()
        .ok_or_else(|| Error::InvalidModel("combined scale is singular".into()))?;
    let c0 = &inv * (&p0 * a0);
    let c1 = &inv * (&p1 * a1);
    let y = &c0 * DVector::from_column_slice(y0) + &c1 * DVector::from_column_slice(y1);
    Ok(Recombination {
        y: y.iter().copied().collect(),
        c0,
        c1,
    })
}

// ---------------------------------------------------------------------------
// Matrix-combination hulls

/// Outcome of a two-sided hull check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullReport {
    pub dim: usize,
    /// Points generated from random matrices.
    pub samples: usize,
    /// Generated points that fell outside the claimed hull.
    pub containment_failures: usize,
    /// Largest distance outside the hull (≤ 0 when contained).
    pub max_excess: f64,
    /// Hull points for which a matrix was constructed.
    pub reconstructions: usize,
    pub reconstruction_failures: usize,
    pub max_reconstruction_error: f64,
    /// Targets on the degenerate ray that were not reconstructed.
    pub skipped: usize,
}

impl HullReport {
    pub fn passed(&self) -> bool {
        self.containment_failures == 0 && self.reconstruction_failures == 0
    }
}

pub const HULL_TOLERANCE: f64 = 1e-9;

/// `C y₀ + (I - C) y₁` for random diagonal `C` with entries in `[0, 1]`.
pub fn diag_hull_points(y0: &[f64], y1: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            y0.iter()
                .zip(y1)
                .map(|(a, b)| {
                    let c: f64 = rng.random();
                    c * a + (1.0 - c) * b
                })
                .collect()
        })
        .collect()
}

/// Random symmetric PSD matrix with spectral radius ≤ 1: a random
/// orthogonal basis (QR of a Gaussian matrix) with eigenvalues uniform in
/// `[0, 1]`.
pub fn random_psd_contraction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let eig = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| rng.random::<f64>()));
    let c = &q * eig * q.transpose();
    (&c + c.transpose()) * 0.5
}

/// `C y₀ + (I - C) y₁` for random PSD `C` with spectral radius ≤ 1.
pub fn psd_hull_points(y0: &[f64], y1: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = y0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v0 = DVector::from_column_slice(y0);
    let v1 = DVector::from_column_slice(y1);
    (0..count)
        .map(|_| {
            let c = random_psd_contraction(&mut rng, n);
            let p = &c * &v0 + (DMatrix::identity(n, n) - &c) * &v1;
            p.iter().copied().collect()
        })
        .collect()
}

/// Checks that diagonal matrices in `[0, 1]` summing to the identity
/// generate exactly the coordinate box spanned by `y₀` and `y₁`.
///
/// Forward: `samples` random matrices stay in the box. Backward: `targets`
/// random box points plus every box corner are rebuilt from the per-
/// coordinate weights `(y[j] - y₁[j]) / (y₀[j] - y₁[j])`.
pub fn diag_box_hull_check(
    y0: &[f64],
    y1: &[f64],
    samples: usize,
    targets: usize,
    seed: u64,
) -> Result<HullReport> {
    let n = y0.len();
    check_dim(n, y1.len())?;
    if n == 0 || n > 10 {
        return Err(Error::Precondition(
            "hull checks support dimensions 1 to 10".into(),
        ));
    }
    let lo: Vec<f64> = y0.iter().zip(y1).map(|(a, b)| a.min(*b)).collect();
    let hi: Vec<f64> = y0.iter().zip(y1).map(|(a, b)| a.max(*b)).collect();
    let mut report = HullReport {
        dim: n,
        samples,
        containment_failures: 0,
        max_excess: f64::NEG_INFINITY,
        reconstructions: 0,
        reconstruction_failures: 0,
        max_reconstruction_error: 0.0,
        skipped: 0,
    };
    for p in diag_hull_points(y0, y1, samples, seed) {
        let excess = (0..n)
            .map(|j| (lo[j] - p[j]).max(p[j] - hi[j]))
            .fold(f64::NEG_INFINITY, f64::max);
        report.max_excess = report.max_excess.max(excess);
        if excess > HULL_TOLERANCE {
            report.containment_failures += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let corners = (0..1usize << n).map(|mask| {
        (0..n)
            .map(|j| if mask >> j & 1 == 1 { hi[j] } else { lo[j] })
            .collect::<Vec<f64>>()
    });
    let random: Vec<Vec<f64>> = (0..targets)
        .map(|_| {
            (0..n)
                .map(|j| lo[j] + rng.random::<f64>() * (hi[j] - lo[j]))
                .collect()
        })
        .collect();
    for y in corners.chain(random) {
        let weights: Vec<f64> = (0..n)
            .map(|j| {
                if y0[j] == y1[j] {
                    0.0
                } else {
                    (y[j] - y1[j]) / (y0[j] - y1[j])
                }
            })
            .collect();
        let rebuilt: Vec<f64> = (0..n)
            .map(|j| weights[j] * y0[j] + (1.0 - weights[j]) * y1[j])
            .collect();
        let err = dist(&rebuilt, &y);
        let in_range = weights
            .iter()
            .all(|w| (-HULL_TOLERANCE..=1.0 + HULL_TOLERANCE).contains(w));
        report.reconstructions += 1;
        report.max_reconstruction_error = report.max_reconstruction_error.max(err);
        if err > HULL_TOLERANCE || !in_range {
            report.reconstruction_failures += 1;
        }
    }
    Ok(report)
}

/// Center and radius of the ball `B((y₀+y₁)/2, ‖y₁-y₀‖/2)`.
pub fn ball_of(y0: &[f64], y1: &[f64]) -> (Vec<f64>, f64) {
    let c = lerp(y0, y1, 0.5);
    (c, 0.5 * dist(y0, y1))
}

/// The rank-one matrix `ỹỹᵀ / ỹᵀỹ₀` with `ỹ = y - y₁`, `ỹ₀ = y₀ - y₁`,
/// which maps the pair to `y`. `Ok(None)` on the degenerate ray
/// `ỹᵀỹ₀ = 0, ỹ ≠ 0`.
pub fn ball_point_matrix(y0: &[f64], y1: &[f64], y: &[f64]) -> Result<Option<DMatrix<f64>>> {
    let n = y0.len();
    check_dim(n, y1.len())?;
    check_dim(n, y.len())?;
    let t = DVector::from_iterator(n, y.iter().zip(y1).map(|(a, b)| a - b));
    let t0 = DVector::from_iterator(n, y0.iter().zip(y1).map(|(a, b)| a - b));
    if t.norm() == 0.0 {
        return Ok(Some(DMatrix::zeros(n, n)));
    }
    let denom = t.dot(&t0);
    if denom <= 0.0 {
        return Ok(None);
    }
    Ok(Some(&t * t.transpose() / denom))
}

/// Checks that PSD matrices with spectral radius ≤ 1 summing to the
/// identity generate the ball spanned by `y₀` and `y₁`.
///
/// Forward: points from random contractions stay within the radius.
/// Backward: random ball points are rebuilt with the rank-one matrix, whose
/// only nonzero eigenvalue (its trace) must lie in `[0, 1]`.
pub fn psd_ball_hull_check(
    y0: &[f64],
    y1: &[f64],
    samples: usize,
    targets: usize,
    seed: u64,
) -> Result<HullReport> {
    let n = y0.len();
    check_dim(n, y1.len())?;
    if n == 0 || n > 10 {
        return Err(Error::Precondition(
            "hull checks support dimensions 1 to 10".into(),
        ));
    }
    let (center, radius) = ball_of(y0, y1);
    let mut report = HullReport {
        dim: n,
        samples,
        containment_failures: 0,
        max_excess: f64::NEG_INFINITY,
        reconstructions: 0,
        reconstruction_failures: 0,
        max_reconstruction_error: 0.0,
        skipped: 0,
    };
    for p in psd_hull_points(y0, y1, samples, seed) {
        let excess = dist(&p, &center) - radius;
        report.max_excess = report.max_excess.max(excess);
        if excess > HULL_TOLERANCE {
            report.containment_failures += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let v0 = DVector::from_column_slice(y0);
    let v1 = DVector::from_column_slice(y1);
    let mut fixed = vec![y1.to_vec(), center.clone()];
    fixed.push(y0.to_vec());
    let random = (0..targets).map(|_| {
        let dir = gaussian_vector(&mut rng, n);
        let len = norm(&dir);
        let r = radius * rng.random::<f64>().powf(1.0 / n as f64);
        center
            .iter()
            .zip(&dir)
            .map(|(c, d)| c + r * d / len)
            .collect::<Vec<f64>>()
    });
    let all: Vec<Vec<f64>> = fixed.drain(..).chain(random).collect();
    for y in all {
        let Some(c) = ball_point_matrix(y0, y1, &y)? else {
            report.skipped += 1;
            continue;
        };
        let trace = c.trace();
        let rebuilt = &c * &v0 + (DMatrix::identity(n, n) - &c) * &v1;
        let err = dist(rebuilt.as_slice(), &y);
        report.reconstructions += 1;
        report.max_reconstruction_error = report.max_reconstruction_error.max(err);
        if err > HULL_TOLERANCE || !(-HULL_TOLERANCE..=1.0 + HULL_TOLERANCE).contains(&trace) {
            report.reconstruction_failures += 1;
        }
    }
    Ok(report)
}

/// Two points of a box whose ball protrudes from it, plus a protruding
/// ball point that the rank-one construction still reaches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallOutsideBox {
    pub y0: Vec<f64>,
    pub y1: Vec<f64>,
    pub witness: Vec<f64>,
    /// How far the witness lies outside the box.
    pub excess: f64,
}

/// Searches random pairs inside a bounded box for one whose generated ball
/// leaves the box. A hit shows that general PSD combinations of box points
/// escape the box.
pub fn ball_outside_box_search(
    region: &BoxRegion,
    trials: usize,
    seed: u64,
) -> Result<Option<BallOutsideBox>> {
    if !region.is_bounded() {
        return Err(Error::Precondition("the search needs a bounded box".into()));
    }
    let r = Region::Box(region.clone());
    let pts = r.sample(2 * trials, seed)?.points;
    let n = region.dim();
    for pair in pts.chunks_exact(2) {
        let (y0, y1) = (&pair[0], &pair[1]);
        let (c, rad) = ball_of(y0, y1);
        for j in 0..n {
            for s in [1.0, -1.0] {
                let mut witness = c.clone();
                witness[j] += s * rad;
                let excess = (region.lower()[j] - witness[j]).max(witness[j] - region.upper()[j]);
                if excess > 1e-9 && ball_point_matrix(y0, y1, &witness)?.is_some() {
                    return Ok(Some(BallOutsideBox {
                        y0: y0.clone(),
                        y1: y1.clone(),
                        witness,
                        excess,
                    }));
                }
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Convexity of noise regions

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChordReport {
    pub chords: usize,
    pub violations: usize,
}

/// Random chords of `W_z(x, Ψ)`: endpoints `Ψ y_i - S x` for `y_i` sampled
/// in the quantization region, checked at a random interior weight.
pub fn noise_region_chords(
    model: &LocationScaleModel,
    region: &Region,
    chords: usize,
    seed: u64,
) -> Result<ChordReport> {
    check_dim(model.n(), region.dim())?;
    let pts = region.sample(2 * chords, seed)?.points;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut violations = 0;
    for pair in pts.chunks_exact(2) {
        let w0 = model.noise_of(&pair[0]);
        let w1 = model.noise_of(&pair[1]);
        let a: f64 = rng.random();
        let w = lerp(&w0, &w1, a);
        let y = model.observation_of(&w);
        // rounding may put boundary points a hair outside
        if !region.contains(&y) && dist(&y, &project(region, &y)) > 1e-9 * (1.0 + norm(&y)) {
            violations += 1;
        }
    }
    Ok(ChordReport { chords, violations })
}

// ---------------------------------------------------------------------------
// Point-cloud output

/// Writes labelled point clouds as CSV with header `dim0,dim1,...,label`.
pub fn write_point_csv<W: Write>(out: W, sets: &[SampledSet]) -> Result<()> {
    let n = sets
        .first()
        .map(SampledSet::dim)
        .ok_or_else(|| Error::Precondition("no point sets to write".into()))?;
    for s in sets {
        check_dim(n, s.dim())?;
    }
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Precondition(format!("csv output failed: {e}"));
    let mut header: Vec<String> = (0..n).map(|j| format!("dim{j}")).collect();
    header.push("label".into());
    w.write_record(&header).map_err(io)?;
    for s in sets {
        for p in &s.points {
            let mut rec: Vec<String> = p.iter().map(f64::to_string).collect();
            rec.push(s.label.clone());
            w.write_record(&rec).map_err(io)?;
        }
    }
    w.flush()
        .map_err(|e| Error::Precondition(format!("csv output failed: {e}")))?;
    Ok(())
}
