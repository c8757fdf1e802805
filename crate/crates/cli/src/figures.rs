use anyhow::Result;
use quantlik::geometry::{diag_hull_points, minkowski_combine, psd_hull_points, SampledSet};
use quantlik::suite::{FIGURE_Y0, FIGURE_Y1};
use quantlik::{BoxRegion, Halfspace, Polytope, Quantizer, Region};

const POINTS: usize = 2000;

/// Uniform grid of points over `[lo, hi]²` labelled by their code.
fn quantizer_cloud(q: &Quantizer, lo: f64, hi: f64, per_side: usize) -> Result<Vec<SampledSet>> {
    let mut by_code: std::collections::BTreeMap<String, Vec<Vec<f64>>> = Default::default();
    for i in 0..per_side {
        for j in 0..per_side {
            let y = vec![
                lo + (hi - lo) * i as f64 / (per_side - 1) as f64,
                lo + (hi - lo) * j as f64 / (per_side - 1) as f64,
            ];
            by_code
                .entry(q.quantize(&y)?.to_string())
                .or_default()
                .push(y);
        }
    }
    by_code
        .into_iter()
        .map(|(label, pts)| Ok(SampledSet::new(pts, label)?))
        .collect()
}

/// A unit square rotated by 45° around `center`.
fn rotated_square(center: [f64; 2]) -> Result<Region> {
    let hs = (0..4)
        .map(|k| {
            let t = std::f64::consts::FRAC_PI_4 + k as f64 * std::f64::consts::FRAC_PI_2;
            let u = vec![t.cos(), t.sin()];
            let offset = 0.5 + u[0] * center[0] + u[1] * center[1];
            Halfspace::new(u, offset)
        })
        .collect();
    Ok(Region::Polytope(Polytope::new(hs)?))
}

/// Every figure as `(file stem, labelled point sets)`.
pub fn all(seed: u64) -> Result<Vec<(&'static str, Vec<SampledSet>)>> {
    let hex = Quantizer::hex(1.0)?;
    let adc = Quantizer::adc(vec![vec![-1.0, 0.0, 1.0], vec![-1.0, 0.0, 1.0]])?;

    let square = Region::Box(BoxRegion::new(vec![0.25, 0.25], vec![1.25, 1.25])?);
    let a0 = SampledSet::from_region(&square, POINTS, seed, "square")?;
    let a1 = SampledSet::from_region(
        &rotated_square([3.0, 1.0])?,
        POINTS,
        seed + 1,
        "rotated_square",
    )?;
    let mut mid = minkowski_combine(&a0, &a1, 0.5, POINTS, seed + 2)?;
    mid.label = "combination".into();

    let endpoints = || -> Result<Vec<SampledSet>> {
        Ok(vec![
            SampledSet::new(vec![FIGURE_Y0.to_vec()], "y0")?,
            SampledSet::new(vec![FIGURE_Y1.to_vec()], "y1")?,
        ])
    };
    let mut fig3a = endpoints()?;
    fig3a.push(SampledSet::new(
        diag_hull_points(&FIGURE_Y0, &FIGURE_Y1, POINTS, seed + 3),
        "combination",
    )?);
    let mut fig3b = endpoints()?;
    fig3b.push(SampledSet::new(
        psd_hull_points(&FIGURE_Y0, &FIGURE_Y1, POINTS, seed + 4),
        "combination",
    )?);

    Ok(vec![
        ("fig1a_hexagonal", quantizer_cloud(&hex, -3.0, 3.0, 61)?),
        ("fig1b_adc", quantizer_cloud(&adc, -2.0, 2.0, 41)?),
        ("fig2_minkowski", vec![a0, a1, mid]),
        ("fig3a_diagonal", fig3a),
        ("fig3b_psd", fig3b),
    ])
}
