//! Acceptance criteria AC-01 to AC-11.
//!
//! Each criterion runs against oracles computed here (statrs distributions,
//! closed forms, direct matrix algebra) rather than the library's own
//! helpers, and prints one `[PASS]` or `[FAIL]` line.

use std::io::Write;
use std::num::NonZeroUsize;
use std::time::{Duration, Instant};

use gauss_quad::GaussLegendre;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use quantlik::estimate::{fit, FitConfig, FitMode, ModelTemplate};
use quantlik::geometry::{
    ball_of, ball_point_matrix, diag_box_hull_check, diag_hull_points, prekopa_check,
    psd_ball_hull_check, psd_hull_points,
};
use quantlik::suite::{nonconvex_grid_search, nonconvex_loglik, FIGURE_Y0, FIGURE_Y1};
use quantlik::{
    continuous_loglik_without_jacobian, grad_quantized_loglik, quantized_loglik, simulate_codes,
    BoxRegion, Code, Family, Halfspace, LocationScaleModel, McSettings, NoiseModel, Polytope,
    Quantizer, Region, Scale,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::distribution::{Continuous, ContinuousCDF, Laplace, Normal};

// ---------------------------------------------------------------------------
// Oracles

fn oracle_cdf(family: Family, t: f64) -> f64 {
    match family {
        Family::Gaussian => Normal::new(0.0, 1.0).unwrap().cdf(t),
        Family::Laplace => Laplace::new(0.0, 1.0).unwrap().cdf(t),
        Family::Logistic => 1.0 / (1.0 + (-t).exp()),
    }
}

fn oracle_sf(family: Family, t: f64) -> f64 {
    match family {
        Family::Gaussian => Normal::new(0.0, 1.0).unwrap().sf(t),
        Family::Laplace => Laplace::new(0.0, 1.0).unwrap().sf(t),
        Family::Logistic => 1.0 / (1.0 + t.exp()),
    }
}

/// `F(hi) - F(lo)`. Finite intervals integrate the density on panels of
/// width at most 0.25 split at the origin, which keeps full relative
/// precision on narrow bins where a CDF difference would cancel.
fn oracle_interval(family: Family, lo: f64, hi: f64) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (false, false) => 1.0,
        (false, true) => oracle_cdf(family, hi),
        (true, false) => oracle_sf(family, lo),
        (true, true) => {
            let rule = GaussLegendre::new(NonZeroUsize::new(20).unwrap());
            let mut cuts = vec![lo, hi];
            if lo < 0.0 && hi > 0.0 {
                cuts.insert(1, 0.0);
            }
            cuts.windows(2)
                .map(|w| {
                    let panels = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
                    let h = (w[1] - w[0]) / panels as f64;
                    (0..panels)
                        .map(|k| {
                            let a = w[0] + k as f64 * h;
                            rule.integrate(a, a + h, |t| oracle_ln_pdf(family, t).exp())
                        })
                        .sum::<f64>()
                })
                .sum()
        }
    }
}

fn oracle_ln_pdf(family: Family, t: f64) -> f64 {
    match family {
        Family::Gaussian => Normal::new(0.0, 1.0).unwrap().ln_pdf(t),
        Family::Laplace => Laplace::new(0.0, 1.0).unwrap().ln_pdf(t),
        Family::Logistic => {
            let e = (-t).exp();
            (e / (1.0 + e).powi(2)).ln()
        }
    }
}

/// `P[d_j a_j - (Sx)_j ≤ w_j < d_j b_j - (Sx)_j for all j]` by direct
/// products of CDF differences.
fn oracle_box_prob(family: Family, diag: &[f64], loc: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    (0..diag.len())
        .map(|j| {
            let hi = if upper[j].is_finite() {
                diag[j] * upper[j] - loc[j]
            } else {
                f64::INFINITY
            };
            let lo = if lower[j].is_finite() {
                diag[j] * lower[j] - loc[j]
            } else {
                f64::NEG_INFINITY
            };
            oracle_interval(family, lo, hi)
        })
        .product()
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, m, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn sorted_thresholds(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let mut t: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[1] - w[0] > 1e-2) {
            return t;
        }
    }
}

fn any_family(rng: &mut ChaCha8Rng) -> Family {
    [Family::Gaussian, Family::Laplace, Family::Logistic][rng.random_range(0..3)]
}

fn positive(rng: &mut ChaCha8Rng) -> f64 {
    rng.random_range(0.3..3.0)
}

/// Bin edges of code `z` under per-coordinate thresholds.
fn bin_edges(thresholds: &[Vec<f64>], z: &Code) -> (Vec<f64>, Vec<f64>) {
    thresholds
        .iter()
        .zip(&z.0)
        .map(|(t, &k)| {
            let k = k as usize;
            let lo = if k == 0 { f64::NEG_INFINITY } else { t[k - 1] };
            let hi = if k == t.len() { f64::INFINITY } else { t[k] };
            (lo, hi)
        })
        .unzip()
}

struct AdcCase {
    s: DMatrix<f64>,
    thresholds: Vec<Vec<f64>>,
    q: Quantizer,
    family: Family,
    noise: NoiseModel,
}

fn adc_case(rng: &mut ChaCha8Rng, max_levels: usize) -> AdcCase {
    let n = rng.random_range(1..=3);
    let m = rng.random_range(1..=3);
    let thresholds: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let k = rng.random_range(1..=max_levels);
            sorted_thresholds(rng, k)
        })
        .collect();
    let family = any_family(rng);
    AdcCase {
        s: gaussian_matrix(rng, n, m),
        q: Quantizer::adc(thresholds.clone()).unwrap(),
        thresholds,
        family,
        noise: NoiseModel::new(family, n).unwrap(),
    }
}

fn random_code(rng: &mut ChaCha8Rng, thresholds: &[Vec<f64>]) -> Code {
    Code(
        thresholds
            .iter()
            .map(|t| rng.random_range(0..=t.len()) as i64)
            .collect(),
    )
}

fn mat_vec(s: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (s * DVector::from_column_slice(x))
        .iter()
        .copied()
        .collect()
}

fn mean(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| 0.5 * (u + v)).collect()
}

// ---------------------------------------------------------------------------
// Criteria

struct Outcome {
    passed: bool,
    summary: String,
}

fn outcome(passed: bool, summary: String) -> Outcome {
    Outcome { passed, summary }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

/// Sign quantizer, Gaussian noise: the code-1 likelihood is Φ(x).
fn ac01() -> Outcome {
    let start = Instant::now();
    let q = Quantizer::adc(vec![vec![0.0]]).unwrap();
    let noise = NoiseModel::new(Family::Gaussian, 1).unwrap();
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..61 {
        let x = -3.0 + 0.1 * i as f64;
        let model = LocationScaleModel::new(
            DMatrix::from_element(1, 1, 1.0),
            vec![x],
            Scale::identity(1),
        )
        .unwrap();
        let got = quantized_loglik(&model, &noise, &q, &Code(vec![1]), None)
            .unwrap()
            .log_value;
        worst = worst.max((got - std.cdf(x).ln()).abs());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-9 && within(elapsed, 1.0),
        format!(
            "61-point grid, max |Δlog| = {worst:.2e}, {:.3} s",
            elapsed.as_secs_f64()
        ),
    )
}

#[derive(Clone, Copy, Debug)]
enum Case {
    Fixed,
    Scalar,
    Diagonal,
}

/// Returns (violations, oracle mismatches, worst gap).
fn scale_case_tally(case: Case, seed: u64) -> (usize, usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut mismatches = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let c = adc_case(&mut rng, 4);
        let (n, m) = c.s.shape();
        let z = random_code(&mut rng, &c.thresholds);
        let (lower, upper) = bin_edges(&c.thresholds, &z);
        let (d0, d1): (Vec<f64>, Vec<f64>) = match case {
            Case::Fixed => {
                let d: Vec<f64> = (0..n).map(|_| positive(&mut rng)).collect();
                (d.clone(), d)
            }
            Case::Scalar => {
                let (a, b) = (positive(&mut rng), positive(&mut rng));
                (vec![a; n], vec![b; n])
            }
            Case::Diagonal => (
                (0..n).map(|_| positive(&mut rng)).collect(),
                (0..n).map(|_| positive(&mut rng)).collect(),
            ),
        };
        let x0 = gaussian_vec(&mut rng, m, 1.5);
        let x1 = gaussian_vec(&mut rng, m, 1.5);
        let scale_of = |d: &[f64]| match case {
            Case::Fixed => Scale::Fixed(DMatrix::from_diagonal(&DVector::from_column_slice(d))),
            Case::Scalar => Scale::Scalar(d[0]),
            Case::Diagonal => Scale::Diagonal(d.to_vec()),
        };
        let dm = mean(&d0, &d1);
        let xm = mean(&x0, &x1);
        let mut eval = |x: &[f64], d: &[f64]| -> f64 {
            let model = LocationScaleModel::new(c.s.clone(), x.to_vec(), scale_of(d)).unwrap();
            let v = quantized_loglik(&model, &c.noise, &c.q, &z, None)
                .unwrap()
                .log_value;
            let p = oracle_box_prob(c.family, d, &mat_vec(&c.s, x), &lower, &upper);
            if p >= 1e-6 && (v - p.ln()).abs() > 1e-9 {
                mismatches += 1;
            }
            v
        };
        let (f0, f1, fm) = (eval(&x0, &d0), eval(&x1, &d1), eval(&xm, &dm));
        let rhs = 0.5 * (f0 + f1);
        if rhs == f64::NEG_INFINITY {
            continue;
        }
        let gap = fm - rhs;
        worst = worst.min(gap);
        if gap.is_nan() || gap < -1e-9 {
            violations += 1;
        }
    }
    (violations, mismatches, worst)
}

fn ac02() -> Outcome {
    let mut parts = Vec::new();
    let mut passed = true;
    for (k, case) in [Case::Fixed, Case::Scalar, Case::Diagonal]
        .into_iter()
        .enumerate()
    {
        let start = Instant::now();
        let (violations, mismatches, worst) = scale_case_tally(case, 0x0200 + k as u64);
        let elapsed = start.elapsed();
        passed &= violations == 0 && mismatches == 0 && within(elapsed, 30.0);
        parts.push(format!(
            "{case:?}: {violations} violations, {mismatches} oracle mismatches, worst gap {worst:.2e}, {:.2} s",
            elapsed.as_secs_f64()
        ));
    }
    outcome(passed, parts.join("; "))
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = gaussian_matrix(rng, n, n);
    let p = &a * a.transpose() / n as f64 + DMatrix::identity(n, n) * 0.2;
    (&p + p.transpose()) * 0.5
}

/// Continuous likelihood `p_w(Ψ y - S x)` at midpoints of random endpoint
/// pairs with non-diagonal PD scales.
fn ac03() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0300);
    let mut violations = 0;
    let mut mismatches = 0;
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let family = any_family(&mut rng);
        let noise = NoiseModel::new(family, n).unwrap();
        let s = gaussian_matrix(&mut rng, n, m);
        let y = gaussian_vec(&mut rng, n, 1.5);
        let (p0, p1) = (random_pd(&mut rng, n), random_pd(&mut rng, n));
        let (x0, x1) = (
            gaussian_vec(&mut rng, m, 1.5),
            gaussian_vec(&mut rng, m, 1.5),
        );
        let pm = (&p0 + &p1) * 0.5;
        let xm = mean(&x0, &x1);
        let mut eval = |psi: &DMatrix<f64>, x: &[f64]| -> f64 {
            let model =
                LocationScaleModel::new(s.clone(), x.to_vec(), Scale::Fixed(psi.clone())).unwrap();
            let v = continuous_loglik_without_jacobian(&model, &noise, &y).unwrap();
            let w = psi * DVector::from_column_slice(&y) - &s * DVector::from_column_slice(x);
            let oracle: f64 = w.iter().map(|t| oracle_ln_pdf(family, *t)).sum();
            if (v - oracle).abs() > 1e-9 * (1.0 + oracle.abs()) {
                mismatches += 1;
            }
            v
        };
        let (f0, f1, fm) = (eval(&p0, &x0), eval(&p1, &x1), eval(&pm, &xm));
        let gap = fm - 0.5 * (f0 + f1);
        worst = worst.min(gap);
        if gap.is_nan() || gap < -1e-9 {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && mismatches == 0,
        format!("1000 instances, {violations} violations, {mismatches} oracle mismatches, worst gap {worst:.2e}"),
    )
}

/// A rotated regular hexagon with the given center and apothem.
fn hexagon(center: [f64; 2], apothem: f64, angle: f64) -> Region {
    let hs = (0..6)
        .map(|k| {
            let t = angle + k as f64 * std::f64::consts::FRAC_PI_3;
            let u = vec![t.cos(), t.sin()];
            let offset = apothem + u[0] * center[0] + u[1] * center[1];
            Halfspace::new(u, offset)
        })
        .collect();
    Region::Polytope(Polytope::new(hs).unwrap())
}

fn plane_region(rng: &mut ChaCha8Rng, hex: bool) -> (Region, Option<BoxRegion>) {
    if hex {
        let c = [rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5)];
        (
            hexagon(c, rng.random_range(0.2..1.2), rng.random_range(0.0..1.0)),
            None,
        )
    } else {
        let lo: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..1.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|a| a + rng.random_range(0.3..2.0)).collect();
        let b = BoxRegion::new(lo, hi).unwrap();
        (Region::Box(b.clone()), Some(b))
    }
}

fn ac04() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0400);
    let mut failures = 0;
    let mut inconclusive = 0;
    let mut exact_mismatches = 0;
    let mut exact_violations = 0;
    let mut worst = f64::INFINITY;
    let mut checks = 0;
    for trial in 0..50 {
        let (h0, h1) = [(false, false), (true, true), (false, true)][trial % 3];
        let (a0, b0) = plane_region(&mut rng, h0);
        let (a1, b1) = plane_region(&mut rng, h1);
        let alpha = rng.random_range(0.1..0.9);
        for family in [Family::Gaussian, Family::Laplace] {
            let noise = NoiseModel::new(family, 2).unwrap();
            let r = prekopa_check(&noise, &a0, &a1, alpha, 1_000_000, rng.random()).unwrap();
            checks += 1;
            inconclusive += r.inconclusive as usize;
            failures += (!r.passed) as usize;
            worst = worst.min(r.margin / r.std_error);
            // two boxes: the combination is the box of combined edges
            if let (Some(b0), Some(b1)) = (&b0, &b1) {
                let mix = |u: &[f64], v: &[f64]| -> Vec<f64> {
                    u.iter()
                        .zip(v)
                        .map(|(p, q)| alpha * q + (1.0 - alpha) * p)
                        .collect()
                };
                let prob = |lo: &[f64], hi: &[f64]| {
                    oracle_box_prob(family, &[1.0, 1.0], &[0.0, 0.0], lo, hi)
                };
                let pa = prob(&mix(b0.lower(), b1.lower()), &mix(b0.upper(), b1.upper()));
                let p0 = prob(b0.lower(), b0.upper());
                let p1 = prob(b1.lower(), b1.upper());
                if pa.ln() < alpha * p1.ln() + (1.0 - alpha) * p0.ln() - 1e-12 {
                    exact_violations += 1;
                }
                if (r.log_p_alpha - pa.ln()).abs() > 4.0 * r.std_error {
                    exact_mismatches += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && inconclusive == 0 && exact_violations == 0 && exact_mismatches == 0 && within(elapsed, 300.0),
        format!(
            "{checks} checks at 10^6 draws, {failures} failures, {inconclusive} inconclusive, min margin {worst:.2} se, \
             box-pair oracle: {exact_violations} violations, {exact_mismatches} MC mismatches, {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

/// The two-piece region (-∞, -1] ∪ [1, ∞) is not convex and its likelihood
/// has an interior minimum at 0.
fn ac05() -> Outcome {
    let std = Normal::new(0.0, 1.0).unwrap();
    let oracle = |x: f64| (std.cdf(-1.0 - x) + 1.0 - std.cdf(1.0 - x)).ln();
    let grid: Vec<f64> = (0..=400).map(|i| -2.0 + 0.01 * i as f64).collect();
    let mismatches = grid
        .iter()
        .filter(|&&x| (nonconvex_loglik(x) - oracle(x)).abs() > 1e-9)
        .count();
    let (gap, a, b) = nonconvex_grid_search();
    let oracle_gap = 0.5 * (oracle(a) + oracle(b)) - oracle(0.5 * (a + b));
    outcome(
        gap > 1e-3 && oracle_gap > 1e-3 && mismatches == 0,
        format!("max midpoint gap {gap:.4} at ({a:.2}, {b:.2}), oracle gap {oracle_gap:.4}, {mismatches} mismatches"),
    )
}

fn ac06() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0600);
    let mut passed = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_err: f64 = 0.0;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![(FIGURE_Y0.to_vec(), FIGURE_Y1.to_vec())];
    for n in 1..=5 {
        pairs.push((
            gaussian_vec(&mut rng, n, 2.0),
            gaussian_vec(&mut rng, n, 2.0),
        ));
    }
    for (k, (y0, y1)) in pairs.iter().enumerate() {
        let n = y0.len();
        let r = diag_box_hull_check(y0, y1, 10_000, 10_000, 0x0610 + k as u64).unwrap();
        passed &= r.passed() && r.samples == 10_000 && r.reconstructions >= 10_000;
        // independent containment and reconstruction
        for p in diag_hull_points(y0, y1, 10_000, 0x0620 + k as u64) {
            for j in 0..n {
                let (lo, hi) = (y0[j].min(y1[j]), y0[j].max(y1[j]));
                worst_excess = worst_excess.max((lo - p[j]).max(p[j] - hi));
            }
        }
        for _ in 0..10_000 {
            let t: Vec<f64> = (0..n)
                .map(|j| y1[j] + rng.random::<f64>() * (y0[j] - y1[j]))
                .collect();
            let c: Vec<f64> = (0..n).map(|j| (t[j] - y1[j]) / (y0[j] - y1[j])).collect();
            passed &= c.iter().all(|v| (0.0..=1.0).contains(v));
            let rebuilt = DMatrix::from_diagonal(&DVector::from_column_slice(&c))
                * DVector::from_column_slice(y0)
                + DMatrix::from_diagonal(&DVector::from_iterator(n, c.iter().map(|v| 1.0 - v)))
                    * DVector::from_column_slice(y1);
            worst_err = worst_err.max((rebuilt - DVector::from_column_slice(&t)).norm());
        }
    }
    passed &= worst_excess <= 1e-9 && worst_err <= 1e-9;
    outcome(
        passed,
        format!("dimensions 1-5 plus figure endpoints, max excess {worst_excess:.2e}, max rebuild error {worst_err:.2e}"),
    )
}

fn ac07() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0700);
    let mut passed = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_err: f64 = 0.0;
    let mut bad_matrices = 0;
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = vec![(FIGURE_Y0.to_vec(), FIGURE_Y1.to_vec())];
    for n in 2..=5 {
        pairs.push((
            gaussian_vec(&mut rng, n, 2.0),
            gaussian_vec(&mut rng, n, 2.0),
        ));
    }
    for (k, (y0, y1)) in pairs.iter().enumerate() {
        let n = y0.len();
        let r = psd_ball_hull_check(y0, y1, 10_000, 10_000, 0x0710 + k as u64).unwrap();
        passed &= r.passed() && r.max_excess <= 1e-9 && r.reconstructions >= 10_000;

        let v0 = DVector::from_column_slice(y0);
        let v1 = DVector::from_column_slice(y1);
        let center = (&v0 + &v1) * 0.5;
        let radius = (&v1 - &v0).norm() / 2.0;
        for p in psd_hull_points(y0, y1, 10_000, 0x0720 + k as u64) {
            worst_excess = worst_excess.max((DVector::from_vec(p) - &center).norm() - radius);
        }
        for _ in 0..10_000 {
            let dir = DVector::from_vec(gaussian_vec(&mut rng, n, 1.0));
            let t = &center + dir.normalize() * radius * rng.random::<f64>().powf(1.0 / n as f64);
            let Some(c) = ball_point_matrix(y0, y1, t.as_slice()).unwrap() else {
                bad_matrices += 1;
                continue;
            };
            let eig = SymmetricEigen::new(c.clone()).eigenvalues;
            let symmetric = (&c - c.transpose()).amax() <= 1e-12;
            let contraction = eig.iter().all(|e| (-1e-9..=1.0 + 1e-9).contains(e));
            let trace_ok = (-1e-9..=1.0 + 1e-9).contains(&c.trace());
            let rebuilt = &c * &v0 + (DMatrix::identity(n, n) - &c) * &v1;
            let err = (rebuilt - &t).norm();
            worst_err = worst_err.max(err);
            if !(symmetric && contraction && trace_ok && err <= 1e-9) {
                bad_matrices += 1;
            }
        }
    }
    let (_, fig_radius) = ball_of(&FIGURE_Y0, &FIGURE_Y1);
    passed &= worst_excess <= 1e-9 && bad_matrices == 0 && (fig_radius - 1.1180).abs() <= 1e-4;
    outcome(
        passed,
        format!(
            "dimensions 2-5 plus figure endpoints, max radius excess {worst_excess:.2e}, {bad_matrices} bad matrices, \
             max rebuild error {worst_err:.2e}, figure radius {fig_radius:.6}"
        ),
    )
}

fn ac08() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0800);
    let configs: Vec<(AdcCase, LocationScaleModel, Code, u64)> = (0..100)
        .map(|_| {
            let c = adc_case(&mut rng, 4);
            let (n, m) = c.s.shape();
            let x = gaussian_vec(&mut rng, m, 1.0);
            let d: Vec<f64> = (0..n).map(|_| positive(&mut rng)).collect();
            let loc = mat_vec(&c.s, &x);
            // a code with enough mass for 10^5 draws to see it
            let z = loop {
                let z = random_code(&mut rng, &c.thresholds);
                let (lo, hi) = bin_edges(&c.thresholds, &z);
                if oracle_box_prob(c.family, &d, &loc, &lo, &hi) >= 1e-3 {
                    break z;
                }
            };
            let model = LocationScaleModel::new(c.s.clone(), x, Scale::Diagonal(d)).unwrap();
            (c, model, z, rng.random())
        })
        .collect();
    let hits: Vec<bool> = configs
        .par_iter()
        .map(|(c, model, z, seed)| {
            let exact = quantized_loglik(model, &c.noise, &c.q, z, None).unwrap();
            let mc = McSettings {
                count: 100_000,
                seed: *seed,
            };
            let est = quantized_loglik(model, &c.noise, &c.q, z, Some(&mc)).unwrap();
            (est.log_value - exact.log_value).abs() <= 4.0 * est.std_error
        })
        .collect();
    let ok = hits.iter().filter(|h| **h).count();
    outcome(
        ok >= 99,
        format!("{ok} of 100 configurations within 4 se at 10^5 draws"),
    )
}

fn ac09() -> Outcome {
    let start = Instant::now();
    let thresholds = vec![-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5];
    let template = ModelTemplate::new(
        DMatrix::from_element(1, 1, 1.0),
        NoiseModel::new(Family::Gaussian, 1).unwrap(),
        Quantizer::adc(vec![thresholds.clone()]).unwrap(),
    )
    .unwrap();
    let truth = template.model(vec![0.7], Scale::Scalar(1.0)).unwrap();
    let codes = simulate_codes(&truth, &template.noise, &template.quantizer, 1000, 0x0900).unwrap();
    let cfg = FitConfig::new(FitMode::LocationScalarScale, vec![0.0], Scale::Scalar(1.0));
    let r = fit(&template, &codes, &cfg).unwrap();
    let elapsed = start.elapsed();

    let mut counts = [0.0; 8];
    for c in &codes {
        counts[c.0[0] as usize] += 1.0;
    }
    let std = Normal::new(0.0, 1.0).unwrap();
    let edges: Vec<f64> = std::iter::once(f64::NEG_INFINITY)
        .chain(thresholds.iter().copied())
        .chain(std::iter::once(f64::INFINITY))
        .collect();
    let oracle = |x: f64, psi: f64| -> f64 {
        (0..8)
            .filter(|&k| counts[k] > 0.0)
            .map(|k| {
                counts[k] * (std.cdf(psi * edges[k + 1] - x) - std.cdf(psi * edges[k] - x)).ln()
            })
            .sum()
    };

    let x_hat = r.x_hat[0];
    let psi_hat = r.scale_hat.params()[0];
    let se = r.std_errors.clone().unwrap_or_else(|| vec![f64::NAN; 2]);
    let zx = (x_hat - 0.7).abs() / se[0];
    let zp = (psi_hat - 1.0).abs() / se[1];
    let monotone = r
        .trajectory
        .windows(2)
        .all(|w| w[1].loglik >= w[0].loglik - 16.0 * f64::EPSILON * w[0].loglik.abs());
    let f_hat = oracle(x_hat, psi_hat);
    // 1-D scans through the optimum, coarse then fine
    let scan = |lo: f64, hi: f64, steps: usize, f: &dyn Fn(f64) -> f64| -> (f64, f64) {
        (0..=steps)
            .map(|i| lo + (hi - lo) * i as f64 / steps as f64)
            .map(|t| (f(t), t))
            .fold(
                (f64::NEG_INFINITY, 0.0),
                |a, b| if b.0 > a.0 { b } else { a },
            )
    };
    let (best_x, arg_x) = scan(-3.0, 3.0, 6000, &|x| oracle(x, psi_hat));
    let (fine_x, _) = scan(x_hat - 1e-3, x_hat + 1e-3, 2000, &|x| oracle(x, psi_hat));
    let (best_p, arg_p) = scan(0.1, 3.0, 2900, &|p| oracle(x_hat, p));
    let (fine_p, _) = scan(psi_hat - 1e-3, psi_hat + 1e-3, 2000, &|p| oracle(x_hat, p));
    let grid_excess = [best_x, fine_x, best_p, fine_p]
        .iter()
        .map(|v| v - f_hat)
        .fold(f64::NEG_INFINITY, f64::max);
    let passed = r.converged
        && monotone
        && zx <= 5.0
        && zp <= 5.0
        && (f_hat - r.final_loglik).abs() <= 1e-9 * f_hat.abs()
        && grid_excess <= 1e-6
        && (arg_x - x_hat).abs() <= 1e-3
        && (arg_p - psi_hat).abs() <= 1e-3
        && within(elapsed, 10.0);
    outcome(
        passed,
        format!(
            "x̂ = {x_hat:.4} ({zx:.2} se), ψ̂ = {psi_hat:.4} ({zp:.2} se), {} iterations, monotone {monotone}, \
             grid excess {grid_excess:.1e}, {:.3} s",
            r.iterations,
            elapsed.as_secs_f64()
        ),
    )
}

fn ac10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1000);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let h = 1e-5;
    for _ in 0..1000 {
        let c = adc_case(&mut rng, 4);
        let (n, m) = c.s.shape();
        let scale = match rng.random_range(0..3) {
            0 => Scale::Fixed(DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| {
                positive(&mut rng)
            }))),
            1 => Scale::Scalar(positive(&mut rng)),
            _ => Scale::Diagonal((0..n).map(|_| positive(&mut rng)).collect()),
        };
        let x = gaussian_vec(&mut rng, m, 1.0);
        let model = LocationScaleModel::new(c.s.clone(), x.clone(), scale.clone()).unwrap();
        let z = simulate_codes(&model, &c.noise, &c.q, 1, rng.random())
            .unwrap()
            .remove(0);
        let g = grad_quantized_loglik(&model, &c.noise, &c.q, &z).unwrap();
        let f = |x: Vec<f64>, scale: Scale| -> f64 {
            let mm = LocationScaleModel::new(c.s.clone(), x, scale).unwrap();
            quantized_loglik(&mm, &c.noise, &c.q, &z, None)
                .unwrap()
                .log_value
        };
        let bumped = |k: usize, delta: f64| -> (Vec<f64>, Scale) {
            let mut xb = x.clone();
            if k < m {
                xb[k] += delta;
                return (xb, scale.clone());
            }
            let s = match &scale {
                Scale::Scalar(p) => Scale::Scalar(p + delta),
                Scale::Diagonal(d) => {
                    let mut d = d.clone();
                    d[k - m] += delta;
                    Scale::Diagonal(d)
                }
                Scale::Fixed(_) => unreachable!("fixed scales have no free parameters"),
            };
            (xb, s)
        };
        for (k, a) in g.d_x.iter().chain(&g.d_scale).enumerate() {
            let (xp, sp) = bumped(k, h);
            let (xm, sm) = bumped(k, -h);
            let fd = (f(xp, sp) - f(xm, sm)) / (2.0 * h);
            let e = (a - fd).abs() / fd.abs().max(1.0);
            worst = worst.max(e);
            failures += (e > 1e-5) as usize;
        }
    }
    outcome(
        failures == 0,
        format!("1000 points, max relative error {worst:.2e}, {failures} failures"),
    )
}

fn ac11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1100);
    let mut worst: f64 = 0.0;
    for n in [1, 2] {
        for _ in 0..100 {
            let m = rng.random_range(1..=2);
            let thresholds: Vec<Vec<f64>> = (0..n)
                .map(|_| {
                    let k = rng.random_range(1..=6);
                    sorted_thresholds(&mut rng, k)
                })
                .collect();
            let q = Quantizer::adc(thresholds.clone()).unwrap();
            let noise = NoiseModel::new(any_family(&mut rng), n).unwrap();
            let scale = Scale::Diagonal((0..n).map(|_| positive(&mut rng)).collect());
            let model = LocationScaleModel::new(
                gaussian_matrix(&mut rng, n, m),
                gaussian_vec(&mut rng, m, 1.5),
                scale,
            )
            .unwrap();
            // every code of the bank, enumerated here
            let mut codes = vec![Vec::new()];
            for t in &thresholds {
                codes = codes
                    .into_iter()
                    .flat_map(|c: Vec<i64>| {
                        (0..=t.len() as i64).map(move |k| {
                            let mut c = c.clone();
                            c.push(k);
                            c
                        })
                    })
                    .collect();
            }
            let total: f64 = codes
                .into_iter()
                .map(|c| {
                    quantized_loglik(&model, &noise, &q, &Code(c), None)
                        .unwrap()
                        .log_value
                        .exp()
                })
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    outcome(
        worst <= 1e-9,
        format!("100 1-D and 100 2-D banks, max |Σ L - 1| = {worst:.2e}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("AC-01", ac01),
        ("AC-02", ac02),
        ("AC-03", ac03),
        ("AC-04", ac04),
        ("AC-05", ac05),
        ("AC-06", ac06),
        ("AC-07", ac07),
        ("AC-08", ac08),
        ("AC-09", ac09),
        ("AC-10", ac10),
        ("AC-11", ac11),
    ];
    let mut failed = Vec::new();
    writeln!(std::io::stdout()).unwrap();
    for (id, run) in criteria {
        let o = run();
        let tag = if o.passed { "PASS" } else { "FAIL" };
        // written past the test harness's capture so the lines always show
        let mut out = std::io::stdout().lock();
        writeln!(out, "[{tag}] {id} {}", o.summary).unwrap();
        out.flush().unwrap();
        if !o.passed {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
