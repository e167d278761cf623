use powercurve::sobol::{sobol_unit, Sobol, MAX_DIMENSION};

const REFERENCE: &str = include_str!("data/sobol_d21_n512.txt");

fn reference() -> Vec<Vec<u32>> {
    REFERENCE
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(|t| t.parse().unwrap()).collect())
        .collect()
}

#[test]
fn matches_independent_generator_in_all_dimensions() {
    let want = reference();
    assert_eq!(want.len(), 512);
    let got = sobol_unit(512, MAX_DIMENSION).unwrap();
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        for (d, (&x, &k)) in g.iter().zip(w).enumerate() {
            assert_eq!(x * 512.0, f64::from(k), "point {i}, dimension {}", d + 1);
        }
    }
}

#[test]
fn lower_dimensions_are_leading_columns() {
    let want = reference();
    for d in [1, 2, 7, 13] {
        let got = sobol_unit(512, d).unwrap();
        for (g, w) in got.iter().zip(&want) {
            let scaled: Vec<u32> = g.iter().map(|x| (x * 512.0) as u32).collect();
            assert_eq!(scaled, w[..d]);
        }
    }
}

#[test]
fn iterator_agrees_with_batch() {
    let batch = sobol_unit(100, 5).unwrap();
    let iter: Vec<Vec<f64>> = Sobol::new(5).unwrap().take(100).collect();
    assert_eq!(batch, iter);
}
