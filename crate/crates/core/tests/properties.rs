use nalgebra::DMatrix;
use proptest::prelude::*;
use quantlik::estimate::{fit, is_monotone, FitConfig, FitMode, ModelTemplate};
use quantlik::quantizer::HexQuantizer;
use quantlik::{
    grad_quantized_loglik, quantized_loglik, simulate_codes, Code, Family, LocationScaleModel,
    NoiseModel, Quantizer, Scale,
};

fn family() -> impl Strategy<Value = Family> {
    prop::sample::select(vec![Family::Gaussian, Family::Laplace, Family::Logistic])
}

fn thresholds() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_set(-300i32..300, 1..6)
        .prop_map(|s| s.into_iter().map(|k| k as f64 / 100.0).collect())
}

fn bank(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(thresholds(), n)
}

/// A random ADC model: `(S, thresholds, x0, x1, λ0, λ1, code)`.
type Instance = (
    DMatrix<f64>,
    Vec<Vec<f64>>,
    Vec<f64>,
    Vec<f64>,
    Vec<f64>,
    Vec<f64>,
    Vec<i64>,
);

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..=3, 1usize..=3).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(-2.0f64..2.0, n * m)
                .prop_map(move |v| DMatrix::from_vec(n, m, v)),
            bank(n),
            prop::collection::vec(-2.0f64..2.0, m),
            prop::collection::vec(-2.0f64..2.0, m),
            prop::collection::vec(0.3f64..3.0, n),
            prop::collection::vec(0.3f64..3.0, n),
            prop::collection::vec(0i64..6, n),
        )
    })
}

fn clamp_code(raw: &[i64], t: &[Vec<f64>]) -> Code {
    Code(
        raw.iter()
            .zip(t)
            .map(|(&k, t)| k.min(t.len() as i64))
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn adc_code_region_contains_the_point(t in bank(3), y in prop::collection::vec(-4.0f64..4.0, 3)) {
        let q = Quantizer::adc(t).unwrap();
        let z = q.quantize(&y).unwrap();
        prop_assert!(q.region(&z).unwrap().contains(&y));
    }

    #[test]
    fn hex_cell_has_the_nearest_center(pitch in 0.1f64..3.0, y in prop::collection::vec(-20.0f64..20.0, 2)) {
        let q = Quantizer::hex(pitch).unwrap();
        let z = q.quantize(&y).unwrap();
        prop_assert!(q.region(&z).unwrap().contains(&y));
        let h = HexQuantizer::new(pitch).unwrap();
        let dist = |c: [f64; 2]| (c[0] - y[0]).hypot(c[1] - y[1]);
        let own = dist(h.center(z.0[0], z.0[1]));
        // brute force over a window of cells around the point
        let q0 = (y[0] / (1.5 * pitch)).round() as i64;
        let r0 = (y[1] / (3f64.sqrt() * pitch) - 0.5 * q0 as f64).round() as i64;
        for dq in -3..=3 {
            for dr in -3..=3 {
                prop_assert!(own <= dist(h.center(q0 + dq, r0 + dr)) + 1e-9);
            }
        }
    }

    #[test]
    fn loglik_is_midpoint_concave((s, t, x0, x1, l0, l1, raw) in instance(), f in family()) {
        let z = clamp_code(&raw, &t);
        let q = Quantizer::adc(t).unwrap();
        let noise = NoiseModel::new(f, s.nrows()).unwrap();
        let eval = |x: &[f64], l: &[f64]| {
            let m = LocationScaleModel::new(s.clone(), x.to_vec(), Scale::Diagonal(l.to_vec())).unwrap();
            quantized_loglik(&m, &noise, &q, &z, None).unwrap().log_value
        };
        let mid = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| 0.5 * (u + v)).collect::<Vec<_>>();
        let ends = 0.5 * (eval(&x0, &l0) + eval(&x1, &l1));
        prop_assume!(ends.is_finite());
        prop_assert!(eval(&mid(&x0, &x1), &mid(&l0, &l1)) >= ends - 1e-9);
    }

    #[test]
    fn probabilities_sum_to_one((s, t, x0, _x1, l0, _l1, _raw) in instance(), f in family()) {
        let q = Quantizer::adc(t).unwrap();
        let noise = NoiseModel::new(f, s.nrows()).unwrap();
        let m = LocationScaleModel::new(s, x0, Scale::Diagonal(l0)).unwrap();
        let total: f64 = q.as_adc().unwrap().codes().iter()
            .map(|z| quantized_loglik(&m, &noise, &q, z, None).unwrap().log_value.exp())
            .sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn gradient_log_value_agrees((s, t, x0, _x1, l0, _l1, raw) in instance(), f in family()) {
        let z = clamp_code(&raw, &t);
        let q = Quantizer::adc(t).unwrap();
        let noise = NoiseModel::new(f, s.nrows()).unwrap();
        let m = LocationScaleModel::new(s, x0, Scale::Diagonal(l0)).unwrap();
        let v = quantized_loglik(&m, &noise, &q, &z, None).unwrap().log_value;
        prop_assume!(v > -600.0);
        let g = grad_quantized_loglik(&m, &noise, &q, &z).unwrap();
        prop_assert!((g.log_value - v).abs() <= 1e-12 * v.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fit_ascends_and_stops_at_a_stationary_point(
        t in thresholds(),
        x in -1.0f64..1.0,
        psi in 0.5f64..2.0,
        f in family(),
        seed in any::<u64>(),
    ) {
        let template = ModelTemplate::new(
            DMatrix::from_element(1, 1, 1.0),
            NoiseModel::new(f, 1).unwrap(),
            Quantizer::adc(vec![t]).unwrap(),
        ).unwrap();
        let truth = template.model(vec![x], Scale::Scalar(psi)).unwrap();
        let codes = simulate_codes(&truth, &template.noise, &template.quantizer, 300, seed).unwrap();
        let cfg = FitConfig::new(FitMode::LocationScalarScale, vec![0.0], Scale::Scalar(1.0));
        let r = fit(&template, &codes, &cfg).unwrap();
        prop_assert!(is_monotone(&r.trajectory));
        prop_assert!(r.final_loglik >= r.trajectory[0].loglik);
        prop_assert!(r.converged || r.diverged, "stalled at gradient {}", r.gradient_norm);
    }
}

#[test]
fn fits_under_each_noise_family() {
    let t: Vec<f64> = (-6..=6).map(|k| k as f64 * 0.4).collect();
    for (k, f) in [Family::Gaussian, Family::Laplace, Family::Logistic]
        .into_iter()
        .enumerate()
    {
        let template = ModelTemplate::new(
            DMatrix::from_element(1, 1, 1.0),
            NoiseModel::new(f, 1).unwrap(),
            Quantizer::adc(vec![t.clone()]).unwrap(),
        )
        .unwrap();
        let truth = template.model(vec![-0.4], Scale::Scalar(1.5)).unwrap();
        let codes = simulate_codes(
            &truth,
            &template.noise,
            &template.quantizer,
            4000,
            70 + k as u64,
        )
        .unwrap();
        let cfg = FitConfig::new(FitMode::LocationScalarScale, vec![0.0], Scale::Scalar(1.0));
        let r = fit(&template, &codes, &cfg).unwrap();
        let se = r.std_errors.clone().unwrap();
        assert!(r.converged, "{f}");
        assert!(
            (r.x_hat[0] + 0.4).abs() <= 5.0 * se[0],
            "{f}: x̂ = {}",
            r.x_hat[0]
        );
        assert!(
            (r.scale_hat.params()[0] - 1.5).abs() <= 5.0 * se[1],
            "{f}: ψ̂ = {:?}",
            r.scale_hat
        );
    }
}

#[test]
fn diagonal_scale_fit_in_two_dimensions() {
    let t: Vec<f64> = (-4..=4).map(|k| k as f64 * 0.5).collect();
    let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
    let template = ModelTemplate::new(
        s,
        NoiseModel::new(Family::Gaussian, 2).unwrap(),
        Quantizer::adc(vec![t.clone(), t]).unwrap(),
    )
    .unwrap();
    let truth = template
        .model(vec![0.5, -0.3], Scale::Diagonal(vec![0.8, 1.6]))
        .unwrap();
    let codes = simulate_codes(&truth, &template.noise, &template.quantizer, 3000, 11).unwrap();
    let cfg = FitConfig::new(
        FitMode::LocationDiagScale,
        vec![0.0, 0.0],
        Scale::Diagonal(vec![1.0, 1.0]),
    );
    let r = fit(&template, &codes, &cfg).unwrap();
    assert!(r.converged && is_monotone(&r.trajectory));
    let se = r.std_errors.clone().unwrap();
    let est: Vec<f64> = r
        .x_hat
        .iter()
        .copied()
        .chain(r.scale_hat.params())
        .collect();
    for (k, (e, truth)) in est.iter().zip([0.5, -0.3, 0.8, 1.6]).enumerate() {
        assert!(
            (e - truth).abs() <= 5.0 * se[k],
            "parameter {k}: {e} vs {truth} (se {})",
            se[k]
        );
    }
}

#[test]
fn coarse_quantization_biases_the_midpoint_baseline() {
    // a sign quantizer: the baseline only ever sees ±1
    let template = ModelTemplate::new(
        DMatrix::from_element(1, 1, 1.0),
        NoiseModel::new(Family::Gaussian, 1).unwrap(),
        Quantizer::adc(vec![vec![0.0]]).unwrap(),
    )
    .unwrap();
    let truth = template.model(vec![1.0], Scale::Scalar(1.0)).unwrap();
    let codes = simulate_codes(&truth, &template.noise, &template.quantizer, 5000, 5).unwrap();
    let cfg = FitConfig::new(FitMode::LocationOnly, vec![0.0], Scale::identity(1));
    let aware = fit(&template, &codes, &cfg).unwrap();
    let naive = quantlik::estimate::fit_ignoring_quantization(&template, &codes, &cfg).unwrap();
    let se = aware.std_errors.clone().unwrap()[0];
    assert!((aware.x_hat[0] - 1.0).abs() <= 5.0 * se);
    assert!(
        (naive.x_hat[0] - 1.0).abs() > 10.0 * se,
        "baseline {} is not biased",
        naive.x_hat[0]
    );
}
