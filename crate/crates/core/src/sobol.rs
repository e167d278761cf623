//! Unscrambled Sobol sequence with Joe–Kuo direction numbers
//! (`new-joe-kuo-6.21201`), Gray-code ordering, starting at the origin.

use crate::error::{Error, Result};

pub const MAX_DIMENSION: usize = 21;
const BITS: usize = 32;

/// `(s, a, m_1..m_s)` for dimensions 2..=21; dimension 1 is the van der Corput
/// sequence in base 2.
const JOE_KUO: [(u32, u32, &[u32]); MAX_DIMENSION - 1] = [
    (1, 0, &[1]),
    (2, 1, &[1, 3]),
    (3, 1, &[1, 3, 1]),
    (3, 2, &[1, 1, 1]),
    (4, 1, &[1, 1, 3, 3]),
    (4, 4, &[1, 3, 5, 13]),
    (5, 2, &[1, 1, 5, 5, 17]),
    (5, 4, &[1, 1, 5, 5, 5]),
    (5, 7, &[1, 1, 7, 11, 19]),
    (5, 11, &[1, 1, 5, 1, 1]),
    (5, 13, &[1, 1, 1, 3, 11]),
    (5, 14, &[1, 3, 5, 5, 31]),
    (6, 1, &[1, 3, 3, 9, 7, 49]),
    (6, 13, &[1, 1, 1, 15, 21, 21]),
    (6, 16, &[1, 3, 1, 13, 27, 49]),
    (6, 19, &[1, 1, 1, 15, 7, 5]),
    (6, 22, &[1, 3, 1, 15, 13, 25]),
    (6, 25, &[1, 1, 5, 5, 19, 61]),
    (7, 1, &[1, 3, 7, 11, 23, 15, 103]),
    (7, 4, &[1, 3, 7, 13, 13, 15, 69]),
];

fn direction_numbers(dim: usize) -> [u32; BITS] {
    let mut v = [0u32; BITS];
    if dim == 0 {
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = 1 << (BITS - 1 - k);
        }
        return v;
    }
    let (s, a, m) = JOE_KUO[dim - 1];
    let s = s as usize;
    for k in 0..s {
        v[k] = m[k] << (BITS - 1 - k);
    }
    for k in s..BITS {
        v[k] = v[k - s] ^ (v[k - s] >> s);
        for j in 1..s {
            if (a >> (s - 1 - j)) & 1 == 1 {
                v[k] ^= v[k - j];
            }
        }
    }
    v
}

/// Streaming generator over the first `2^32` points.
#[derive(Debug, Clone)]
pub struct Sobol {
    directions: Vec<[u32; BITS]>,
    state: Vec<u32>,
    index: u64,
}

impl Sobol {
    pub fn new(dims: usize) -> Result<Self> {
        if dims == 0 || dims > MAX_DIMENSION {
            return Err(Error::DimensionUnsupported(dims));
        }
        Ok(Sobol {
            directions: (0..dims).map(direction_numbers).collect(),
            state: vec![0; dims],
            index: 0,
        })
    }

    pub fn dims(&self) -> usize {
        self.state.len()
    }
}

impl Iterator for Sobol {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.index >= 1u64 << BITS {
            return None;
        }
        const SCALE: f64 = 1.0 / (1u64 << BITS) as f64;
        let point = self.state.iter().map(|&x| x as f64 * SCALE).collect();
        // advance in Gray-code order: flip the direction at the lowest zero bit
        let bit = (self.index as u32).trailing_ones() as usize;
        if bit < BITS {
            for (x, dir) in self.state.iter_mut().zip(&self.directions) {
                *x ^= dir[bit];
            }
        }
        self.index += 1;
        Some(point)
    }
}

/// The first `n` Sobol points in `d` dimensions, one row per point.
pub fn sobol_unit(n: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    if n as u64 > 1u64 << BITS {
        return Err(Error::InvalidArgument(format!("at most 2^{BITS} points")));
    }
    Ok(Sobol::new(d)?.take(n).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_first() {
        assert_eq!(sobol_unit(1, 2).unwrap(), vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn first_points_2d() {
        let pts = sobol_unit(3, 2).unwrap();
        assert_eq!(pts, vec![vec![0.0, 0.0], vec![0.5, 0.5], vec![0.75, 0.25]]);
    }

    #[test]
    fn unsupported_dimensions() {
        assert!(matches!(sobol_unit(4, 0), Err(Error::DimensionUnsupported(0))));
        assert!(matches!(sobol_unit(4, 22), Err(Error::DimensionUnsupported(22))));
        assert!(sobol_unit(4, 21).is_ok());
        assert!(sobol_unit(0, 3).is_err());
    }

    #[test]
    fn stratified_histograms() {
        // 1000 is not a power of two, so decimal bins are balanced to within one point
        let pts = sobol_unit(1000, 7).unwrap();
        for axis in 0..7 {
            let mut bins = [0i64; 10];
            for p in &pts {
                assert!((0.0..1.0).contains(&p[axis]));
                bins[(p[axis] * 10.0) as usize] += 1;
            }
            assert!(bins.iter().all(|&c| (c - 100).abs() <= 1), "axis {axis}: {bins:?}");
        }
        let pts = sobol_unit(1024, 7).unwrap();
        for axis in 0..7 {
            let mut bins = [0usize; 16];
            for p in &pts {
                bins[(p[axis] * 16.0) as usize] += 1;
            }
            assert_eq!(bins, [64; 16], "axis {axis}");
        }
    }

    #[test]
    fn prefix_property() {
        let short = sobol_unit(37, 5).unwrap();
        let long = sobol_unit(100, 5).unwrap();
        assert_eq!(short[..], long[..37]);
    }
}
