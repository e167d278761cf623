use faer::{Mat, Side};
use powercurve::gp::{fit, kernel, FitOptions, GpHyperparameters};
use powercurve::Target;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn names(p: usize) -> Vec<String> {
    (0..p).map(|i| format!("x{i}")).collect()
}

fn smooth_data(n: usize, seed: u64) -> (Mat<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Mat<f64> = Mat::from_fn(n, 2, |_, _| rng.random_range(0.0..1.0));
    let y = (0..n)
        .map(|i| 10.0 * (3.0 * x[(i, 0)]).sin() + 4.0 * x[(i, 1)] * x[(i, 1)])
        .collect();
    (x, y)
}

#[test]
fn recovers_generating_length_scale() {
    // evenly spaced inputs whose z-scores are known, so the generating
    // length-scale is directly comparable to the fitted one
    let n = 40;
    let raw: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let mean = raw.iter().sum::<f64>() / n as f64;
    let sd = (raw.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let z: Vec<f64> = raw.iter().map(|v| (v - mean) / sd).collect();
    let ell = 0.8;
    let h = GpHyperparameters::new(1.0, vec![ell], 1e-8);
    let k = Mat::from_fn(n, n, |i, j| {
        kernel(&[z[i]], &[z[j]], &h).unwrap() + if i == j { 1e-8 } else { 0.0 }
    });
    let l = k.llt(Side::Lower).unwrap().L().to_owned();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let e: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y: Vec<f64> = (0..n).map(|i| (0..=i).map(|j| l[(i, j)] * e[j]).sum()).collect();

    let x = Mat::from_fn(n, 1, |i, _| raw[i]);
    let m = fit(x.as_ref(), &y, &names(1), Target::Mean, &FitOptions::default()).unwrap();
    let got = m.hyper.length_scales[0];
    assert!((got - ell).abs() <= 0.25 * ell, "fitted {got}, generated {ell}");
}

#[test]
fn noise_input_is_suppressed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 80;
    let x: Mat<f64> = Mat::from_fn(n, 2, |_, _| rng.random_range(0.0..1.0));
    let y: Vec<f64> = (0..n).map(|i| 5.0 * (4.0 * x[(i, 0)]).sin()).collect();
    let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &FitOptions::default()).unwrap();
    let share = m.relevance().share_of("x1").unwrap();
    assert!(share < 5.0, "noise share {share}");
}

#[test]
fn duplicated_row_is_harmless() {
    let (x, y) = smooth_data(30, 8);
    let opts = FitOptions::default();
    let base = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
    let x2 = Mat::from_fn(31, 2, |i, c| x[(i.min(29), c)]);
    let mut y2 = y.clone();
    y2.push(y[29]);
    let dup = fit(x2.as_ref(), &y2, &names(2), Target::Mean, &opts).unwrap();
    let q = Mat::from_fn(10, 2, |i, c| 0.05 + 0.09 * i as f64 + 0.01 * c as f64);
    let (a, b) = (base.predict(q.as_ref()).unwrap(), dup.predict(q.as_ref()).unwrap());
    for (u, v) in a.iter().zip(&b) {
        assert!(v.is_finite());
        assert!((u - v).abs() < 0.05 * (1.0 + u.abs()), "{u} vs {v}");
    }
}

#[test]
fn factor_invariants_hold_after_fit() {
    let (x, y) = smooth_data(60, 3);
    let m = fit(x.as_ref(), &y, &names(2), Target::Mean, &FitOptions::default()).unwrap();
    assert!(m.reconstruction_error() <= 1e-8);
    assert!(m.alpha_residual() <= 1e-8);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn affine_rescaling_of_a_column_is_absorbed(
        scale in prop_oneof![0.001f64..0.1, 10.0f64..1000.0],
        shift in -1e3f64..1e3,
        col in 0usize..2,
    ) {
        let (x, y) = smooth_data(30, 11);
        // stop on the gradient alone so both fits reach the same optimum
        let opts = FitOptions { rel_tol: 0.0, max_iter: 1000, ..FitOptions::default() };
        let a = fit(x.as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        let rescale = |m: &Mat<f64>| Mat::from_fn(m.nrows(), 2, |i, c| if c == col { scale * m[(i, c)] + shift } else { m[(i, c)] });
        let b = fit(rescale(&x).as_ref(), &y, &names(2), Target::Mean, &opts).unwrap();
        let q = Mat::from_fn(12, 2, |i, c| 0.04 + 0.08 * i as f64 + 0.003 * c as f64);
        let pa = a.predict(q.as_ref()).unwrap();
        let pb = b.predict(rescale(&q).as_ref()).unwrap();
        prop_assert!(a.restarts.iter().chain(&b.restarts).all(|r| r.converged));
        for (u, v) in pa.iter().zip(&pb) {
            prop_assert!((u - v).abs() <= 1e-6 * u.abs().max(1.0), "{} vs {}", u, v);
        }
    }
}
