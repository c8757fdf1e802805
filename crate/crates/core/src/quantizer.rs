//! Quantizers `Q: R^n → Z` and their convex inverse images.
//!
//! Boundary convention: boxes are half-open `[a, b)` per coordinate;
//! polytopes are closed and ties on shared facets go to the lowest code in
//! lexicographic order. Boundaries are null sets under continuous noise, so
//! the convention only buys determinism.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// A quantization code: one integer per logical index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Code(pub Vec<i64>);

impl Code {
    /// The code a [`PolytopeList`] emits for points outside every listed
    /// region.
    pub const OUTSIDE: i64 = i64::MIN;

    pub fn outside() -> Self {
        Code(vec![Self::OUTSIDE])
    }

    pub fn is_outside(&self) -> bool {
        self.0 == [Self::OUTSIDE]
    }
}

impl From<Vec<i64>> for Code {
    fn from(v: Vec<i64>) -> Self {
        Code(v)
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Closed halfspace `normal · y ≤ offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn slack(&self, y: &[f64]) -> f64 {
        self.offset - dot(&self.normal, y)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        dot(&self.normal, y) <= self.offset
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Axis-aligned box `∏ [lower_j, upper_j)` with possibly infinite ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim(lower.len(), upper.len())?;
        if lower.is_empty() {
            return Err(Error::InvalidRegion(
                "box must have at least one dimension".into(),
            ));
        }
        for (j, (&a, &b)) in lower.iter().zip(&upper).enumerate() {
            if a.is_nan() || b.is_nan() || !(a < b) || a == f64::INFINITY || b == f64::NEG_INFINITY
            {
                return Err(Error::InvalidRegion(format!(
                    "box side {j} must satisfy lower < upper, got [{a}, {b})"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        assert_eq!(y.len(), self.dim(), "point dimension does not match box");
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&a, &b))| a <= v && (v < b || b == f64::INFINITY))
    }
}

/// Bounded polytope given as an intersection of closed halfspaces.
///
/// Construction enumerates the vertices, which certifies that the region is
/// bounded and has an interior point (the vertex centroid).
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vec<f64>>,
    interior: Vec<f64>,
}

const UNBOUNDED_PROBE: f64 = 1e7;
const MAX_VERTEX_COMBINATIONS: u128 = 2_000_000;

impl Polytope {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        let dim = halfspaces
            .first()
            .map(|h| h.normal.len())
            .ok_or_else(|| Error::InvalidRegion("polytope needs halfspaces".into()))?;
        if dim == 0 {
            return Err(Error::InvalidRegion(
                "polytope dimension must be positive".into(),
            ));
        }
        for h in &halfspaces {
            check_dim(dim, h.normal.len())?;
            if !h.offset.is_finite() || h.normal.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidRegion(
                    "halfspace entries must be finite".into(),
                ));
            }
            if h.normal.iter().all(|&v| v == 0.0) {
                return Err(Error::InvalidRegion(
                    "halfspace normal must be nonzero".into(),
                ));
            }
        }

        // A far-away probe box exposes unbounded directions as vertices on
        // the probe faces.
        let mut probed = halfspaces.clone();
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            probed.push(Halfspace::new(e.clone(), UNBOUNDED_PROBE));
            e[j] = -1.0;
            probed.push(Halfspace::new(e, UNBOUNDED_PROBE));
        }
        let vertices = enumerate_vertices(dim, &probed)?;
        if vertices.is_empty() {
            return Err(Error::InvalidRegion("polytope is empty".into()));
        }
        if vertices
            .iter()
            .any(|v| v.iter().any(|c| c.abs() >= UNBOUNDED_PROBE * (1.0 - 1e-9)))
        {
            return Err(Error::InvalidRegion(
                "polytope is unbounded; use a box for unbounded regions".into(),
            ));
        }
        let mut interior = vec![0.0; dim];
        for v in &vertices {
            for (c, x) in interior.iter_mut().zip(v) {
                *c += x / vertices.len() as f64;
            }
        }
        for h in &halfspaces {
            let scale = 1.0 + h.offset.abs() + norm(&h.normal);
            if h.slack(&interior) <= 1e-10 * scale {
                return Err(Error::InvalidRegion("polytope has empty interior".into()));
            }
        }
        Ok(Self {
            dim,
            halfspaces,
            vertices,
            interior,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn interior_point(&self) -> &[f64] {
        &self.interior
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        assert_eq!(y.len(), self.dim, "point dimension does not match polytope");
        self.halfspaces.iter().all(|h| h.contains(y))
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for v in &self.vertices {
            for j in 0..self.dim {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
        (lo, hi)
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

fn enumerate_vertices(dim: usize, hs: &[Halfspace]) -> Result<Vec<Vec<f64>>> {
    if hs.len() < dim {
        return Ok(Vec::new());
    }
    if binomial(hs.len(), dim) > MAX_VERTEX_COMBINATIONS {
        return Err(Error::InvalidRegion(format!(
            "{} halfspaces in dimension {dim} is too large for vertex enumeration",
            hs.len()
        )));
    }
    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut idx: Vec<usize> = (0..dim).collect();
    loop {
        let a = DMatrix::from_fn(dim, dim, |r, c| hs[idx[r]].normal[c]);
        let b = DVector::from_fn(dim, |r, _| hs[idx[r]].offset);
        if let Some(sol) = a.lu().solve(&b) {
            let v: Vec<f64> = sol.iter().copied().collect();
            let feasible = v.iter().all(|c| c.is_finite())
                && hs.iter().all(|h| {
                    h.slack(&v) >= -1e-9 * (1.0 + h.offset.abs() + norm(&h.normal) * norm(&v))
                });
            if feasible
                && !vertices
                    .iter()
                    .any(|w| dist(w, &v) < 1e-9 * (1.0 + norm(&v)))
            {
                vertices.push(v);
            }
        }
        // next combination
        let mut i = dim;
        loop {
            if i == 0 {
                return Ok(vertices);
            }
            i -= 1;
            if idx[i] < hs.len() - dim + i {
                idx[i] += 1;
                for k in i + 1..dim {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Convex inverse image `Q^{-1}(z)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box(BoxRegion),
    Polytope(Polytope),
}

/// Points drawn by [`Region::sample`] together with the rejection rate.
#[derive(Debug, Clone)]
pub struct RegionSample {
    pub points: Vec<Vec<f64>>,
    pub proposals: usize,
}

impl RegionSample {
    pub fn acceptance_rate(&self) -> f64 {
        self.points.len() as f64 / self.proposals.max(1) as f64
    }
}

const MIN_ACCEPTANCE: f64 = 1e-6;
const ACCEPTANCE_CHECK_AFTER: usize = 10_000_000;

impl Region {
    pub fn dim(&self) -> usize {
        match self {
            Region::Box(b) => b.dim(),
            Region::Polytope(p) => p.dim(),
        }
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        match self {
            Region::Box(b) => b.contains(y),
            Region::Polytope(p) => p.contains(y),
        }
    }

    pub fn as_box(&self) -> Option<&BoxRegion> {
        match self {
            Region::Box(b) => Some(b),
            Region::Polytope(_) => None,
        }
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            Region::Box(b) => b.is_bounded(),
            Region::Polytope(_) => true,
        }
    }

    /// Facet halfspaces. For boxes only the finite sides appear.
    pub fn halfspaces(&self) -> Vec<Halfspace> {
        match self {
            Region::Polytope(p) => p.halfspaces().to_vec(),
            Region::Box(b) => {
                let n = b.dim();
                let mut out = Vec::new();
                for j in 0..n {
                    if b.upper[j].is_finite() {
                        let mut e = vec![0.0; n];
                        e[j] = 1.0;
                        out.push(Halfspace::new(e, b.upper[j]));
                    }
                    if b.lower[j].is_finite() {
                        let mut e = vec![0.0; n];
                        e[j] = -1.0;
                        out.push(Halfspace::new(e, -b.lower[j]));
                    }
                }
                out
            }
        }
    }

    /// Support function `sup_{y ∈ R} u·y`, possibly `+∞`.
    pub fn support(&self, u: &[f64]) -> f64 {
        match self {
            Region::Box(b) => u
                .iter()
                .zip(b.lower.iter().zip(&b.upper))
                .map(|(&c, (&a, &h))| {
                    if c > 0.0 {
                        c * h
                    } else if c < 0.0 {
                        c * a
                    } else {
                        0.0
                    }
                })
                .sum(),
            Region::Polytope(p) => p
                .vertices
                .iter()
                .map(|v| dot(u, v))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Deterministic sample of `count` points inside the region.
    ///
    /// Bounded regions are sampled uniformly by rejection from the bounding
    /// box. Unbounded box sides use an exponential tail beyond the finite
    /// bound (a Laplace draw when both ends are infinite).
    pub fn sample(&self, count: usize, seed: u64) -> Result<RegionSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.dim();
        let (lo, hi) = match self {
            Region::Box(b) => (b.lower.clone(), b.upper.clone()),
            Region::Polytope(p) => p.bounding_box(),
        };
        let mut points = Vec::with_capacity(count);
        let mut proposals = 0usize;
        let mut y = vec![0.0; n];
        while points.len() < count {
            for j in 0..n {
                y[j] = draw_interval(&mut rng, lo[j], hi[j]);
            }
            proposals += 1;
            if self.contains(&y) {
                points.push(y.clone());
            } else if proposals >= ACCEPTANCE_CHECK_AFTER {
                let rate = points.len() as f64 / proposals as f64;
                if rate < MIN_ACCEPTANCE {
                    return Err(Error::DegenerateRegion(rate, proposals));
                }
            }
        }
        Ok(RegionSample { points, proposals })
    }
}

fn draw_interval<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => {
            if a == b {
                a
            } else {
                rng.random_range(a..=b)
            }
        }
        (true, false) => a + rng.sample::<f64, _>(Exp1),
        (false, true) => b - rng.sample::<f64, _>(Exp1),
        (false, false) => {
            let e: f64 = rng.sample(Exp1);
            if rng.random::<bool>() {
                e
            } else {
                -e
            }
        }
    }
}

/// Independent monotone scalar quantizers, one per coordinate. Bin `k` of
/// dimension `j` is `[t_{k-1}, t_k)` with `t_{-1} = -∞` and `t_{K} = +∞`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcBank {
    thresholds: Vec<Vec<f64>>,
}

impl AdcBank {
    pub fn new(thresholds: Vec<Vec<f64>>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(Error::InvalidQuantizer(
                "ADC bank needs at least one dimension".into(),
            ));
        }
        for (j, t) in thresholds.iter().enumerate() {
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidQuantizer(format!(
                    "thresholds of dimension {j} must be finite"
                )));
            }
            if t.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::InvalidQuantizer(format!(
                    "thresholds of dimension {j} must be strictly increasing"
                )));
            }
        }
        Ok(Self { thresholds })
    }

    pub fn thresholds(&self) -> &[Vec<f64>] {
        &self.thresholds
    }

    pub fn dim(&self) -> usize {
        self.thresholds.len()
    }

    pub fn bins(&self, j: usize) -> usize {
        self.thresholds[j].len() + 1
    }

    fn bin_of(&self, j: usize, v: f64) -> usize {
        self.thresholds[j].partition_point(|&t| t <= v)
    }

    fn edges(&self, j: usize, k: usize) -> (f64, f64) {
        let t = &self.thresholds[j];
        let a = if k == 0 { f64::NEG_INFINITY } else { t[k - 1] };
        let b = if k == t.len() { f64::INFINITY } else { t[k] };
        (a, b)
    }

    /// Every code, in lexicographic order.
    pub fn codes(&self) -> Vec<Code> {
        let mut out = vec![Vec::new()];
        for j in 0..self.dim() {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..self.bins(j) as i64).map(move |k| {
                        let mut c = prefix.clone();
                        c.push(k);
                        c
                    })
                })
                .collect();
        }
        out.into_iter().map(Code).collect()
    }
}

/// Regular flat-top hexagonal tiling of the plane with axial `(q, r)` codes.
/// Cell `(q, r)` is centred at `pitch · (3q/2, √3 (r + q/2))` and `pitch` is
/// the circumradius.
#[derive(Debug, Clone, PartialEq)]
pub struct HexQuantizer {
    pitch: f64,
}

const SQRT_3: f64 = 1.732_050_807_568_877_2;

const AXIAL_NEIGHBOURS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];

impl HexQuantizer {
    pub fn new(pitch: f64) -> Result<Self> {
        if !(pitch > 0.0) || !pitch.is_finite() {
            return Err(Error::InvalidQuantizer(format!(
                "hexagon pitch must be positive and finite, got {pitch}"
            )));
        }
        Ok(Self { pitch })
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn apothem(&self) -> f64 {
        self.pitch * SQRT_3 / 2.0
    }

    pub fn center(&self, q: i64, r: i64) -> [f64; 2] {
        let (q, r) = (q as f64, r as f64);
        [1.5 * self.pitch * q, SQRT_3 * self.pitch * (r + 0.5 * q)]
    }

    /// The cell containing `y` by axial rounding, plus its six neighbours.
    pub fn candidates(&self, y: &[f64]) -> [(i64, i64); 7] {
        let fq = (2.0 / 3.0) * y[0] / self.pitch;
        let fr = (-y[0] / 3.0 + SQRT_3 / 3.0 * y[1]) / self.pitch;
        let fs = -fq - fr;
        let (mut q, mut r, s) = (fq.round(), fr.round(), fs.round());
        let (dq, dr, ds) = ((q - fq).abs(), (r - fr).abs(), (s - fs).abs());
        if dq > dr && dq > ds {
            q = -r - s;
        } else if dr > ds {
            r = -q - s;
        }
        let (q, r) = (q as i64, r as i64);
        let mut out = [(q, r); 7];
        for (slot, (dq, dr)) in out[1..].iter_mut().zip(AXIAL_NEIGHBOURS) {
            *slot = (q + dq, r + dr);
        }
        out
    }

    fn cell_halfspaces(&self, q: i64, r: i64) -> Vec<Halfspace> {
        let c = self.center(q, r);
        let ap = self.apothem();
        (0..6)
            .map(|k| {
                let theta = (30.0 + 60.0 * k as f64).to_radians();
                let normal = vec![theta.cos(), theta.sin()];
                let offset = ap + normal[0] * c[0] + normal[1] * c[1];
                Halfspace::new(normal, offset)
            })
            .collect()
    }

    pub fn cell(&self, q: i64, r: i64) -> Polytope {
        Polytope::new(self.cell_halfspaces(q, r)).expect("hexagon cell is a bounded polytope")
    }

    fn quantize(&self, y: &[f64]) -> Code {
        let mut cands = self.candidates(y);
        cands.sort();
        let inside =
            |&&(q, r): &&(i64, i64)| self.cell_halfspaces(q, r).iter().all(|h| h.contains(y));
        if let Some(&(q, r)) = cands.iter().find(inside) {
            return Code(vec![q, r]);
        }
        // Rounding can leave an ulp-wide gap between neighbouring facets.
        let d2 = |&(q, r): &(i64, i64)| {
            let c = self.center(q, r);
            (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2)
        };
        let best = cands
            .iter()
            .min_by(|a, b| d2(a).total_cmp(&d2(b)).then(a.cmp(b)))
            .expect("seven candidates");
        Code(vec![best.0, best.1])
    }
}

/// An explicit finite list of coded convex polytopes; everything else maps
/// to [`Code::outside`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeList {
    dim: usize,
    regions: Vec<(i64, Polytope)>,
}

const OVERLAP_SAMPLES: usize = 256;

impl PolytopeList {
    pub fn new(mut regions: Vec<(i64, Polytope)>) -> Result<Self> {
        let dim = regions
            .first()
            .map(|(_, p)| p.dim())
            .ok_or_else(|| Error::InvalidQuantizer("polytope list is empty".into()))?;
        let mut seen = BTreeSet::new();
        for (code, p) in &regions {
            check_dim(dim, p.dim())?;
            if *code == Code::OUTSIDE {
                return Err(Error::InvalidQuantizer(format!(
                    "code {code} is reserved for the outside region"
                )));
            }
            if !seen.insert(*code) {
                return Err(Error::InvalidQuantizer(format!("duplicate code {code}")));
            }
        }
        regions.sort_by_key(|(c, _)| *c);
        for (i, (ci, pi)) in regions.iter().enumerate() {
            let pts = Region::Polytope(pi.clone()).sample(OVERLAP_SAMPLES, i as u64)?;
            for (cj, pj) in regions.iter().filter(|(cj, _)| cj != ci) {
                if pts.points.iter().any(|y| pj.contains(y)) {
                    return Err(Error::InvalidQuantizer(format!(
                        "regions {ci} and {cj} overlap"
                    )));
                }
            }
        }
        Ok(Self { dim, regions })
    }

    pub fn regions(&self) -> &[(i64, Polytope)] {
        &self.regions
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuantizerSpec", into = "QuantizerSpec")]
pub enum Quantizer {
    Adc(AdcBank),
    Hex(HexQuantizer),
    Polytopes(PolytopeList),
}

impl Quantizer {
    pub fn adc(thresholds: Vec<Vec<f64>>) -> Result<Self> {
        AdcBank::new(thresholds).map(Quantizer::Adc)
    }

    pub fn hex(pitch: f64) -> Result<Self> {
        HexQuantizer::new(pitch).map(Quantizer::Hex)
    }

    pub fn polytopes(regions: Vec<(i64, Polytope)>) -> Result<Self> {
        PolytopeList::new(regions).map(Quantizer::Polytopes)
    }

    pub fn dim(&self) -> usize {
        match self {
            Quantizer::Adc(a) => a.dim(),
            Quantizer::Hex(_) => 2,
            Quantizer::Polytopes(p) => p.dim,
        }
    }

    pub fn as_adc(&self) -> Option<&AdcBank> {
        match self {
            Quantizer::Adc(a) => Some(a),
            _ => None,
        }
    }

    pub fn quantize(&self, y: &[f64]) -> Result<Code> {
        check_dim(self.dim(), y.len())?;
        Ok(match self {
            Quantizer::Adc(a) => Code(
                y.iter()
                    .enumerate()
                    .map(|(j, &v)| a.bin_of(j, v) as i64)
                    .collect(),
            ),
            Quantizer::Hex(h) => h.quantize(y),
            Quantizer::Polytopes(list) => list
                .regions
                .iter()
                .find(|(_, p)| p.contains(y))
                .map(|(c, _)| Code(vec![*c]))
                .unwrap_or_else(Code::outside),
        })
    }

    pub fn region(&self, z: &Code) -> Result<Region> {
        match self {
            Quantizer::Adc(a) => {
                if z.0.len() != a.dim() {
                    return Err(Error::UnknownCode(z.clone()));
                }
                let mut lower = Vec::with_capacity(a.dim());
                let mut upper = Vec::with_capacity(a.dim());
                for (j, &k) in z.0.iter().enumerate() {
                    if k < 0 || k as usize >= a.bins(j) {
                        return Err(Error::UnknownCode(z.clone()));
                    }
                    let (lo, hi) = a.edges(j, k as usize);
                    lower.push(lo);
                    upper.push(hi);
                }
                Ok(Region::Box(BoxRegion::new(lower, upper)?))
            }
            Quantizer::Hex(h) => match z.0.as_slice() {
                &[q, r] => Ok(Region::Polytope(h.cell(q, r))),
                _ => Err(Error::UnknownCode(z.clone())),
            },
            Quantizer::Polytopes(list) => {
                if z.is_outside() {
                    return Err(Error::OutsideCode);
                }
                match z.0.as_slice() {
                    &[k] => list
                        .regions
                        .iter()
                        .find(|(c, _)| *c == k)
                        .map(|(_, p)| Region::Polytope(p.clone()))
                        .ok_or_else(|| Error::UnknownCode(z.clone())),
                    _ => Err(Error::UnknownCode(z.clone())),
                }
            }
        }
    }
}

/// JSON description of a quantizer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum QuantizerSpec {
    Adc { thresholds: Vec<Vec<f64>> },
    Hex { pitch: f64 },
    Polytopes { regions: Vec<PolytopeSpec> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolytopeSpec {
    pub code: i64,
    pub halfspaces: Vec<Halfspace>,
}

impl TryFrom<QuantizerSpec> for Quantizer {
    type Error = Error;

    fn try_from(spec: QuantizerSpec) -> Result<Self> {
        match spec {
            QuantizerSpec::Adc { thresholds } => Quantizer::adc(thresholds),
            QuantizerSpec::Hex { pitch } => Quantizer::hex(pitch),
            QuantizerSpec::Polytopes { regions } => {
                let regions = regions
                    .into_iter()
                    .map(|r| Ok((r.code, Polytope::new(r.halfspaces)?)))
                    .collect::<Result<Vec<_>>>()?;
                Quantizer::polytopes(regions)
            }
        }
    }
}

impl From<Quantizer> for QuantizerSpec {
    fn from(q: Quantizer) -> Self {
        match q {
            Quantizer::Adc(a) => QuantizerSpec::Adc {
                thresholds: a.thresholds,
            },
            Quantizer::Hex(h) => QuantizerSpec::Hex { pitch: h.pitch },
            Quantizer::Polytopes(list) => QuantizerSpec::Polytopes {
                regions: list
                    .regions
                    .into_iter()
                    .map(|(code, p)| PolytopeSpec {
                        code,
                        halfspaces: p.halfspaces,
                    })
                    .collect(),
            },
        }
    }
}

/// Random unit-Gaussian direction helper shared by the geometry oracles.
pub(crate) fn gaussian_vector<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}
