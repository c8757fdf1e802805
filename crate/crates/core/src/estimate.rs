//! Maximum-likelihood fitting on the exact path.
//!
//! The quantized log-likelihood is concave in `x` for a fixed scale, jointly
//! in `(x, ψ)` for `Ψ = ψ I`, and jointly in `(x, λ)` for `Ψ = diag(λ)` with
//! an ADC bank. A projected first-order ascent with Armijo backtracking
//! therefore reaches the global maximum over `{scale ≥ floor}`, provided one
//! exists. When it does not (the data admit a direction along which every
//! bin probability grows) the fit is flagged as diverging instead.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::likelihood::{chain_location, chain_scale, ExactSetup, LocationScaleModel, Scale};
use crate::noise::{Family, NoiseModel};
use crate::quantizer::{AdcBank, BoxRegion, Code, Quantizer, Region};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMode {
    /// Ψ fixed; estimate `x` only.
    LocationOnly,
    /// Estimate `x` and `ψ` in `Ψ = ψ I`.
    LocationScalarScale,
    /// Estimate `x` and `λ` in `Ψ = diag(λ)`.
    LocationDiagScale,
}

impl FitMode {
    fn matches(self, scale: &Scale) -> bool {
        matches!(
            (self, scale),
            (FitMode::LocationOnly, Scale::Fixed(_))
                | (FitMode::LocationScalarScale, Scale::Scalar(_))
                | (FitMode::LocationDiagScale, Scale::Diagonal(_))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineSearch {
    pub initial: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        Self {
            initial: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub mode: FitMode,
    pub x0: Vec<f64>,
    pub scale0: Scale,
    #[serde(default = "default_grad_tol")]
    pub grad_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default)]
    pub step: LineSearch,
    #[serde(default = "default_scale_floor")]
    pub scale_floor: f64,
}

fn default_grad_tol() -> f64 {
    1e-8
}

fn default_max_iters() -> usize {
    500
}

fn default_scale_floor() -> f64 {
    1e-8
}

impl FitConfig {
    pub fn new(mode: FitMode, x0: Vec<f64>, scale0: Scale) -> Self {
        Self {
            mode,
            x0,
            scale0,
            grad_tol: default_grad_tol(),
            max_iters: default_max_iters(),
            step: LineSearch::default(),
            scale_floor: default_scale_floor(),
        }
    }
}

/// Everything about the model except the parameters being estimated.
#[derive(Debug, Clone)]
pub struct ModelTemplate {
    pub s: DMatrix<f64>,
    pub noise: NoiseModel,
    pub quantizer: Quantizer,
}

impl ModelTemplate {
    pub fn new(s: DMatrix<f64>, noise: NoiseModel, quantizer: Quantizer) -> Result<Self> {
        check_dim(s.nrows(), noise.dim())?;
        check_dim(s.nrows(), quantizer.dim())?;
        Ok(Self {
            s,
            noise,
            quantizer,
        })
    }

    pub fn model(&self, x: Vec<f64>, scale: Scale) -> Result<LocationScaleModel> {
        LocationScaleModel::new(self.s.clone(), x, scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub iteration: usize,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub x_hat: Vec<f64>,
    pub scale_hat: Scale,
    pub final_loglik: f64,
    pub iterations: usize,
    /// Norm of the projected gradient at the final iterate.
    pub gradient_norm: f64,
    pub trajectory: Vec<TrajectoryPoint>,
    pub converged: bool,
    /// The supremum is approached along a ray and never attained.
    pub diverged: bool,
    /// Approximate standard errors of `(x, scale params)` from the
    /// finite-difference observed information; `None` when it is not
    /// positive definite.
    pub std_errors: Option<Vec<f64>>,
    /// Number of initializations tried before a finite likelihood was found.
    pub init_attempts: usize,
}

/// A smooth objective over `θ = (x, free scale params)`.
trait Objective {
    /// `None` when the gradient is undefined (zero likelihood).
    fn value_grad(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)>;
}

struct Layout {
    m: usize,
    n: usize,
    scale: Scale,
}

impl Layout {
    fn split<'a>(&self, theta: &'a [f64]) -> (&'a [f64], Scale) {
        let (x, p) = theta.split_at(self.m);
        (x, self.scale.with_params(p))
    }

    fn diag(&self, theta: &[f64]) -> Vec<f64> {
        let (_, scale) = self.split(theta);
        scale.diagonal(self.n).expect("diagonal scale")
    }
}

fn mat_vec(s: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (s * DVector::from_column_slice(x))
        .iter()
        .copied()
        .collect()
}

/// Σ_z count(z) · log L(θ | z) over the distinct observed codes.
struct QuantizedObjective<'a> {
    s: &'a DMatrix<f64>,
    family: Family,
    layout: Layout,
    groups: Vec<(BoxRegion, f64)>,
}

impl QuantizedObjective<'_> {
    fn setup(&self, theta: &[f64]) -> ExactSetup {
        let (x, _) = self.layout.split(theta);
        ExactSetup::from_parts(self.family, self.layout.diag(theta), mat_vec(self.s, x))
    }
}

impl Objective for QuantizedObjective<'_> {
    fn value_grad(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let setup = self.setup(theta);
        let (_, scale) = self.layout.split(theta);
        let mut total = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for (b, count) in &self.groups {
            let (v, d_loc, d_diag) = setup.grad(b).ok()?;
            total += count * v;
            let gx = chain_location(self.s, &d_loc);
            let gs = chain_scale(&scale, &d_diag);
            for (g, d) in grad.iter_mut().zip(gx.iter().chain(&gs)) {
                *g += count * d;
            }
        }
        Some((total, grad))
    }
}

/// Continuous log-likelihood (with Jacobian) of pseudo-observations.
struct ContinuousObjective<'a> {
    s: &'a DMatrix<f64>,
    family: Family,
    layout: Layout,
    /// Distinct pseudo-observations with their counts.
    data: Vec<(Vec<f64>, f64)>,
}

impl Objective for ContinuousObjective<'_> {
    fn value_grad(&self, theta: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (x, scale) = self.layout.split(theta);
        let n = self.layout.n;
        let loc = mat_vec(self.s, x);
        let log_det = scale.log_det(n);
        let mut total = 0.0;
        let mut d_loc = vec![0.0; n];
        let mut d_diag = vec![0.0; n];
        let mut count = 0.0;
        for (y, k) in &self.data {
            let py = scale.apply(y);
            let mut term = log_det;
            for j in 0..n {
                let w = py[j] - loc[j];
                term += self.family.log_pdf(w);
                let sc = self.family.score(w);
                d_loc[j] -= k * sc;
                d_diag[j] += k * sc * y[j];
            }
            total += k * term;
            count += k;
        }
        let mut grad = chain_location(self.s, &d_loc);
        let gs: Vec<f64> = match &scale {
            Scale::Fixed(_) => Vec::new(),
            Scale::Scalar(psi) => vec![d_diag.iter().sum::<f64>() + count * n as f64 / psi],
            Scale::Diagonal(l) => d_diag.iter().zip(l).map(|(g, v)| g + count / v).collect(),
        };
        grad.extend(gs);
        total.is_finite().then_some((total, grad))
    }
}

struct AscentOutcome {
    theta: Vec<f64>,
    value: f64,
    gradient_norm: f64,
    iterations: usize,
    trajectory: Vec<TrajectoryPoint>,
    converged: bool,
}

/// Relative size of the rounding error in a summed log-likelihood.
pub const ROUNDING_SLACK: f64 = 16.0 * f64::EPSILON;

fn rounding_level(f: f64) -> f64 {
    ROUNDING_SLACK * f.abs().max(1.0)
}

/// Whether the log-likelihood never drops by more than its rounding level.
pub fn is_monotone(trajectory: &[TrajectoryPoint]) -> bool {
    trajectory
        .windows(2)
        .all(|w| w[1].loglik >= w[0].loglik - rounding_level(w[0].loglik))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Projected gradient ascent with Armijo backtracking onto
/// `θ_k ≥ lower_k`. After the first iteration the trial step is the
/// Barzilai–Borwein estimate. Accepted steps never lower the objective by
/// more than its rounding level.
fn projected_ascent(
    obj: &dyn Objective,
    theta0: Vec<f64>,
    lower: &[f64],
    cfg: &FitConfig,
    never_converge: bool,
) -> Result<AscentOutcome> {
    let project = |t: &mut Vec<f64>| {
        for (v, lo) in t.iter_mut().zip(lower) {
            *v = v.max(*lo);
        }
    };
    let projected_grad = |t: &[f64], g: &[f64]| -> Vec<f64> {
        t.iter()
            .zip(g)
            .zip(lower)
            .map(|((v, d), lo)| if *v <= *lo && *d < 0.0 { 0.0 } else { *d })
            .collect()
    };

    let mut theta = theta0;
    project(&mut theta);
    let (mut f, mut g) = obj.value_grad(&theta).ok_or(Error::InfeasibleStart(1))?;
    let mut trajectory = vec![TrajectoryPoint {
        iteration: 0,
        loglik: f,
    }];
    let mut trial = cfg.step.initial;
    let mut converged = false;
    let mut iterations = 0;
    let mut pg_norm = norm(&projected_grad(&theta, &g));

    while iterations < cfg.max_iters {
        if !never_converge && pg_norm <= cfg.grad_tol {
            converged = true;
            break;
        }
        let mut t = trial;
        let resolution = rounding_level(f);
        let accepted = loop {
            let mut cand: Vec<f64> = theta.iter().zip(&g).map(|(v, d)| v + t * d).collect();
            project(&mut cand);
            if cand == theta {
                break None;
            }
            let ascent: f64 = cand
                .iter()
                .zip(&theta)
                .zip(&g)
                .map(|((c, v), d)| (c - v) * d)
                .sum();
            if let Some((fc, gc)) = obj.value_grad(&cand) {
                let sufficient = fc >= f + cfg.step.sufficient_decrease * ascent;
                let resolved = cfg.step.sufficient_decrease * ascent > resolution
                    || fc > f + resolution
                    || norm(&projected_grad(&cand, &gc)) < pg_norm;
                if sufficient && resolved {
                    break Some((cand, fc, gc));
                }
            }
            t *= cfg.step.shrink;
            if t < 1e-300 {
                break None;
            }
        };
        let accepted = accepted.or_else(|| {
            newton_polish(
                obj,
                &theta,
                f,
                &g,
                pg_norm,
                resolution,
                &project,
                &projected_grad,
            )
        });
        let Some((cand, fc, gc)) =
            accepted.or_else(|| never_converge.then(|| (theta.clone(), f, g.clone())))
        else {
            // no representable ascent step left
            break;
        };
        iterations += 1;
        let s: Vec<f64> = cand.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        trial = if sy < 0.0 && ss > 0.0 {
            (ss / -sy).clamp(1e-12, 1e12)
        } else {
            (t / cfg.step.shrink).min(1e12)
        };
        theta = cand;
        f = fc;
        g = gc;
        pg_norm = norm(&projected_grad(&theta, &g));
        trajectory.push(TrajectoryPoint {
            iteration: iterations,
            loglik: f,
        });
    }
    if !never_converge && !converged && pg_norm <= cfg.grad_tol {
        converged = true;
    }
    Ok(AscentOutcome {
        theta,
        value: f,
        gradient_norm: pg_norm,
        iterations,
        trajectory,
        converged,
    })
}

/// Observed information: the negated, symmetrized central-difference Hessian.
fn observed_information(obj: &dyn Objective, theta: &[f64]) -> Option<DMatrix<f64>> {
    let p = theta.len();
    let mut hess = DMatrix::zeros(p, p);
    for k in 0..p {
        let h = 1e-5 * theta[k].abs().max(1.0);
        let mut tp = theta.to_vec();
        let mut tm = theta.to_vec();
        tp[k] += h;
        tm[k] -= h;
        let (_, gp) = obj.value_grad(&tp)?;
        let (_, gm) = obj.value_grad(&tm)?;
        for i in 0..p {
            hess[(i, k)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    Some(-(&hess + hess.transpose()) * 0.5)
}

/// Scaled Newton steps for when the line search stalls at the rounding level
/// of f. A step must shrink the projected gradient; among those, one that does
/// not lower f is preferred, otherwise a drop of at most `resolution` is taken.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
fn newton_polish(
    obj: &dyn Objective,
    theta: &[f64],
    f: f64,
    g: &[f64],
    pg_norm: f64,
    resolution: f64,
    project: &dyn Fn(&mut Vec<f64>),
    projected_grad: &dyn Fn(&[f64], &[f64]) -> Vec<f64>,
) -> Option<(Vec<f64>, f64, Vec<f64>)> {
    let info = observed_information(obj, theta)?;
    let step = info.cholesky()?.solve(&DVector::from_column_slice(g));
    let mut fallback = None;
    for scale in [1.0, 0.9, 0.75, 0.5, 0.25] {
        let mut cand: Vec<f64> = theta
            .iter()
            .zip(step.iter())
            .map(|(v, d)| v + scale * d)
            .collect();
        project(&mut cand);
        if cand == theta {
            continue;
        }
        let Some((fc, gc)) = obj.value_grad(&cand) else {
            continue;
        };
        if norm(&projected_grad(&cand, &gc)) >= pg_norm {
            continue;
        }
        if fc >= f {
            return Some((cand, fc, gc));
        }
        if fallback.is_none() && fc >= f - resolution {
            fallback = Some((cand, fc, gc));
        }
    }
    fallback
}

/// Standard errors from the finite-difference observed information.
fn observed_information_se(obj: &dyn Objective, theta: &[f64]) -> Option<Vec<f64>> {
    let p = theta.len();
    let cov = observed_information(obj, theta)?.cholesky()?.inverse();
    Some((0..p).map(|k| cov[(k, k)].sqrt()).collect())
}

fn require_adc(q: &Quantizer) -> Result<&AdcBank> {
    q.as_adc().ok_or_else(|| {
        Error::InvalidConfig("fitting requires an ADC-bank quantizer (box regions)".into())
    })
}

fn validate(template: &ModelTemplate, codes: &[Code], cfg: &FitConfig) -> Result<Layout> {
    if codes.is_empty() {
        return Err(Error::Precondition("dataset has no observations".into()));
    }
    if !cfg.mode.matches(&cfg.scale0) {
        return Err(Error::InvalidConfig(format!(
            "mode {:?} does not match a {} scale",
            cfg.mode,
            cfg.scale0.tag()
        )));
    }
    if !(cfg.grad_tol > 0.0) || !(cfg.scale_floor > 0.0) {
        return Err(Error::InvalidConfig(
            "grad_tol and scale_floor must be positive".into(),
        ));
    }
    let ls = cfg.step;
    if !(ls.initial > 0.0)
        || !(0.0 < ls.shrink && ls.shrink < 1.0)
        || !(0.0 < ls.sufficient_decrease && ls.sufficient_decrease < 1.0)
    {
        return Err(Error::InvalidConfig(
            "invalid line-search parameters".into(),
        ));
    }
    let n = template.s.nrows();
    check_dim(template.s.ncols(), cfg.x0.len())?;
    cfg.scale0.validate(n)?;
    if cfg.scale0.diagonal(n).is_none() {
        return Err(Error::ExactPathUnavailable(
            "fitting needs a diagonal scale".into(),
        ));
    }
    Ok(Layout {
        m: template.s.ncols(),
        n,
        scale: cfg.scale0.clone(),
    })
}

fn group_codes(q: &Quantizer, codes: &[Code]) -> Result<Vec<(BoxRegion, f64)>> {
    let mut counts: BTreeMap<&Code, usize> = BTreeMap::new();
    for c in codes {
        *counts.entry(c).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(c, k)| match q.region(c)? {
            Region::Box(b) => Ok((b, k as f64)),
            Region::Polytope(_) => unreachable!("ADC regions are boxes"),
        })
        .collect()
}

fn lower_bounds(layout: &Layout, floor: f64) -> Vec<f64> {
    let k = layout.scale.params().len();
    let mut lower = vec![f64::NEG_INFINITY; layout.m];
    lower.extend(std::iter::repeat_n(floor, k));
    lower
}

fn theta_of(x: &[f64], scale: &Scale) -> Vec<f64> {
    let mut t = x.to_vec();
    t.extend(scale.params());
    t
}

/// Pseudo-observation for each code under the midpoint rule: bounded bins
/// map to their midpoint; an unbounded end bin maps one bin-width beyond
/// its threshold, using the width of the adjacent bounded bin (or 1 when
/// the dimension has fewer than two thresholds).
pub fn bin_midpoints(adc: &AdcBank, code: &Code) -> Result<Vec<f64>> {
    if code.0.len() != adc.dim() {
        return Err(Error::UnknownCode(code.clone()));
    }
    code.0
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let t = &adc.thresholds()[j];
            if k < 0 || k as usize > t.len() {
                return Err(Error::UnknownCode(code.clone()));
            }
            let k = k as usize;
            let width = |i: usize| if t.len() >= 2 { t[i + 1] - t[i] } else { 1.0 };
            Ok(if t.is_empty() {
                0.0
            } else if k == 0 {
                t[0] - width(0)
            } else if k == t.len() {
                t[k - 1] + width(t.len().saturating_sub(2))
            } else {
                0.5 * (t[k - 1] + t[k])
            })
        })
        .collect()
}

/// Least-squares location from pseudo-observations: `(SᵀS)^{-1} Sᵀ Ψ ȳ`.
fn grouped_midpoints(adc: &AdcBank, codes: &[Code]) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut counts: BTreeMap<&Code, usize> = BTreeMap::new();
    for c in codes {
        *counts.entry(c).or_default() += 1;
    }
    counts
        .into_iter()
        .map(|(c, k)| Ok((bin_midpoints(adc, c)?, k as f64)))
        .collect()
}

fn midpoint_location(
    s: &DMatrix<f64>,
    scale: &Scale,
    pseudo: &[(Vec<f64>, f64)],
) -> Option<Vec<f64>> {
    let n = s.nrows();
    let mut mean = vec![0.0; n];
    let mut total = 0.0;
    for (y, k) in pseudo {
        for (m, v) in mean.iter_mut().zip(y) {
            *m += k * v;
        }
        total += k;
    }
    for m in &mut mean {
        *m /= total;
    }
    let rhs = s.transpose() * DVector::from_vec(scale.apply(&mean));
    let gram = s.transpose() * s;
    gram.lu().solve(&rhs).map(|v| v.iter().copied().collect())
}

const INIT_RETRIES: usize = 10;

/// Maximum-likelihood fit of the quantized model.
pub fn fit(template: &ModelTemplate, codes: &[Code], cfg: &FitConfig) -> Result<FitReport> {
    let layout = validate(template, codes, cfg)?;
    let adc = require_adc(&template.quantizer)?;
    let groups = group_codes(&template.quantizer, codes)?;
    let obj = QuantizedObjective {
        s: &template.s,
        family: template.noise.family(),
        layout,
        groups,
    };
    let lower = lower_bounds(&obj.layout, cfg.scale_floor);

    // Zero-likelihood starts: move x to the midpoint least-squares estimate
    // and widen the noise (halve the scale) until the likelihood is finite.
    let mut theta0 = theta_of(&cfg.x0, &cfg.scale0);
    let mut attempts = 1;
    if obj.value_grad(&theta0).is_none() {
        let pseudo = grouped_midpoints(adc, codes)?;
        let mut found = false;
        let mut scale = cfg.scale0.clone();
        for _ in 0..INIT_RETRIES {
            attempts += 1;
            let x =
                midpoint_location(&template.s, &scale, &pseudo).unwrap_or_else(|| cfg.x0.clone());
            let t = theta_of(&x, &scale);
            if obj.value_grad(&t).is_some() {
                theta0 = t;
                found = true;
                break;
            }
            if matches!(scale, Scale::Fixed(_)) {
                break;
            }
            scale = scale.with_params(&scale.params().iter().map(|v| v / 2.0).collect::<Vec<_>>());
        }
        if !found {
            return Err(Error::InfeasibleStart(attempts));
        }
    }

    let diverged = recession_direction(&obj).is_some();
    let out = projected_ascent(&obj, theta0, &lower, cfg, diverged)?;
    let std_errors = if diverged {
        None
    } else {
        observed_information_se(&obj, &out.theta)
    };
    let (x, scale) = obj.layout.split(&out.theta);
    Ok(FitReport {
        x_hat: x.to_vec(),
        scale_hat: scale,
        final_loglik: out.value,
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
        trajectory: out.trajectory,
        converged: out.converged,
        diverged,
        std_errors,
        init_attempts: attempts,
    })
}

/// Continuous-data MLE on bin midpoints, the quantization-ignoring
/// baseline. Gaussian noise with a fixed scale reduces to least squares.
pub fn fit_ignoring_quantization(
    template: &ModelTemplate,
    codes: &[Code],
    cfg: &FitConfig,
) -> Result<FitReport> {
    let layout = validate(template, codes, cfg)?;
    let adc = require_adc(&template.quantizer)?;
    let pseudo = grouped_midpoints(adc, codes)?;
    let obj = ContinuousObjective {
        s: &template.s,
        family: template.noise.family(),
        layout,
        data: pseudo,
    };

    if template.noise.family() == Family::Gaussian && cfg.mode == FitMode::LocationOnly {
        let x = midpoint_location(&template.s, &cfg.scale0, &obj.data)
            .ok_or_else(|| Error::InvalidModel("observation matrix is rank deficient".into()))?;
        let theta = theta_of(&x, &cfg.scale0);
        let (value, grad) = obj.value_grad(&theta).ok_or(Error::InfeasibleStart(1))?;
        let gradient_norm = norm(&grad);
        return Ok(FitReport {
            x_hat: x,
            scale_hat: cfg.scale0.clone(),
            final_loglik: value,
            iterations: 0,
            gradient_norm,
            trajectory: vec![TrajectoryPoint {
                iteration: 0,
                loglik: value,
            }],
            converged: true,
            diverged: false,
            std_errors: observed_information_se(&obj, &theta),
            init_attempts: 1,
        });
    }

    let lower = lower_bounds(&obj.layout, cfg.scale_floor);
    let out = projected_ascent(&obj, theta_of(&cfg.x0, &cfg.scale0), &lower, cfg, false)?;
    let (x, scale) = obj.layout.split(&out.theta);
    Ok(FitReport {
        x_hat: x.to_vec(),
        scale_hat: scale,
        final_loglik: out.value,
        iterations: out.iterations,
        gradient_norm: out.gradient_norm,
        std_errors: observed_information_se(&obj, &out.theta),
        trajectory: out.trajectory,
        converged: out.converged,
        diverged: false,
        init_attempts: 1,
    })
}

/// A nonzero direction `d` in parameter space along which no observed
/// bin's noise interval shrinks and at least one grows. Its existence means
/// the likelihood increases forever along `d` and has no maximizer.
fn recession_direction(obj: &QuantizedObjective<'_>) -> Option<Vec<f64>> {
    let m = obj.layout.m;
    let n = obj.layout.n;
    let k = obj.layout.scale.params().len();
    let p = m + k;
    // d(diag_j)/d(scale params)
    let diag_row = |j: usize| -> Vec<f64> {
        let mut r = vec![0.0; k];
        match obj.layout.scale {
            Scale::Fixed(_) => {}
            Scale::Scalar(_) => r[0] = 1.0,
            Scale::Diagonal(_) => r[j] = 1.0,
        }
        r
    };
    // Each row r encodes r·d ≥ 0.
    let mut growth_rows: Vec<Vec<f64>> = Vec::new();
    for (b, _) in &obj.groups {
        for j in 0..n {
            let dd = diag_row(j);
            // upper edge u = d_j b - (Sx)_j must not decrease
            if b.upper()[j].is_finite() {
                let mut r: Vec<f64> = (0..m).map(|c| -obj.s[(j, c)]).collect();
                r.extend(dd.iter().map(|v| v * b.upper()[j]));
                growth_rows.push(r);
            }
            // lower edge l = d_j a - (Sx)_j must not increase
            if b.lower()[j].is_finite() {
                let mut r: Vec<f64> = (0..m).map(|c| obj.s[(j, c)]).collect();
                r.extend(dd.iter().map(|v| -v * b.lower()[j]));
                growth_rows.push(r);
            }
        }
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for r in growth_rows {
        let nr = norm(&r);
        if nr == 0.0 {
            continue;
        }
        let r: Vec<f64> = r.iter().map(|v| v / nr).collect();
        if !rows
            .iter()
            .any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-12))
        {
            rows.push(r);
        }
    }
    let objective: Vec<f64> = (0..p).map(|c| rows.iter().map(|r| r[c]).sum()).collect();
    // the scale floor only permits growing scales at infinity
    let mut all_rows = rows;
    for i in 0..k {
        let mut r = vec![0.0; p];
        r[m + i] = 1.0;
        all_rows.push(r);
    }
    if objective.iter().all(|v| *v == 0.0) {
        // every edge is infinite: the likelihood is constant
        return None;
    }
    let (value, d) = lp::max_in_cone(&objective, &all_rows);
    (value > 1e-9).then_some(d)
}

mod lp {
    /// Maximize `c·d` subject to `r·d ≥ 0` for every row and `|d_k| ≤ 1`,
    /// with a dense tableau simplex (Bland's rule). `d = 0` is feasible, so
    /// the slack basis is a valid start.
    pub(super) fn max_in_cone(c: &[f64], rows: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let p = c.len();
        let nv = 2 * p; // d = d⁺ - d⁻
        let nc = rows.len() + nv;
        let width = nv + nc + 1;
        let mut tab = vec![vec![0.0; width]; nc + 1];
        for (i, r) in rows.iter().enumerate() {
            // -r·d⁺ + r·d⁻ ≤ 0
            for k in 0..p {
                tab[i][k] = -r[k];
                tab[i][p + k] = r[k];
            }
            tab[i][nv + i] = 1.0;
        }
        for k in 0..nv {
            let i = rows.len() + k;
            tab[i][k] = 1.0;
            tab[i][nv + i] = 1.0;
            tab[i][width - 1] = 1.0;
        }
        // objective row stores -c
        for k in 0..p {
            tab[nc][k] = -c[k];
            tab[nc][p + k] = c[k];
        }
        let mut basis: Vec<usize> = (nv..nv + nc).collect();
        const EPS: f64 = 1e-12;
        for _ in 0..10_000 {
            let Some(enter) = (0..nv + nc).find(|&j| tab[nc][j] < -EPS) else {
                break;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..nc {
                if tab[i][enter] > EPS {
                    let ratio = tab[i][width - 1] / tab[i][enter];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((li, _)) = leave else { break };
            let pivot = tab[li][enter];
            for v in tab[li].iter_mut() {
                *v /= pivot;
            }
            let prow = tab[li].clone();
            for (i, row) in tab.iter_mut().enumerate() {
                if i != li {
                    let f = row[enter];
                    if f != 0.0 {
                        for (v, pv) in row.iter_mut().zip(&prow) {
                            *v -= f * pv;
                        }
                    }
                }
            }
            basis[li] = enter;
        }
        let mut vars = vec![0.0; nv];
        for (i, &b) in basis.iter().enumerate() {
            if b < nv {
                vars[b] = tab[i][width - 1];
            }
        }
        let d: Vec<f64> = (0..p).map(|k| vars[k] - vars[p + k]).collect();
        let value = c.iter().zip(&d).map(|(a, b)| a * b).sum();
        (value, d)
    }

}
