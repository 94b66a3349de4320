//! Sobol low-discrepancy sequence in base 2, 32-bit resolution.
//!
//! Direction numbers are the Joe–Kuo `new-joe-kuo-6.1000` set (search
//! criterion D(6), 1000 dimensions), shipped verbatim in
//! `new-joe-kuo-6.1000.txt` next to this file. Points are produced in
//! Gray-code order, so any prefix of length `2^m` is the same point set as
//! the natural-order construction.

use std::sync::OnceLock;

use super::NoiseError;

pub const BITS: usize = 32;
/// Largest supported dimension.
pub const MAX_DIMS: usize = 1000;

const JOE_KUO: &str = include_str!("new-joe-kuo-6.1000.txt");

fn direction_table() -> &'static [[u32; BITS]] {
    static TABLE: OnceLock<Vec<[u32; BITS]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = Vec::with_capacity(MAX_DIMS);
        let mut first = [0u32; BITS];
        for (k, v) in first.iter_mut().enumerate() {
            *v = 1 << (BITS - 1 - k);
        }
        table.push(first);
        for line in JOE_KUO.lines().skip(1) {
            let fields: Vec<u32> = line
                .split_whitespace()
                .map(|t| t.parse().expect("malformed direction-number file"))
                .collect();
            let (s, a) = (fields[1] as usize, fields[2]);
            let m = &fields[3..3 + s];
            let mut v = [0u32; BITS];
            for k in 0..BITS {
                v[k] = if k < s {
                    m[k] << (BITS - 1 - k)
                } else {
                    let mut x = v[k - s] ^ (v[k - s] >> s);
                    for i in 1..s {
                        if (a >> (s - 1 - i)) & 1 == 1 {
                            x ^= v[k - i];
                        }
                    }
                    x
                };
            }
            table.push(v);
        }
        table
    })
}

/// Random-access Sobol generator over a fixed number of dimensions.
#[derive(Debug, Clone)]
pub struct SobolSequence {
    dims: usize,
    directions: &'static [[u32; BITS]],
}

impl SobolSequence {
    pub fn new(dims: usize) -> Result<Self, NoiseError> {
        if dims == 0 || dims > MAX_DIMS {
            return Err(NoiseError::SobolDimension { requested: dims, max: MAX_DIMS });
        }
        Ok(SobolSequence {
            dims,
            directions: &direction_table()[..dims],
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Integer coordinates of point `index` (Gray-code order, index 0 is the origin).
    pub fn point(&self, index: u32, out: &mut [u32]) {
        let gray = index ^ (index >> 1);
        for (o, v) in out.iter_mut().zip(self.directions) {
            let mut bits = gray;
            let mut x = 0u32;
            while bits != 0 {
                let b = bits.trailing_zeros() as usize;
                x ^= v[b];
                bits &= bits - 1;
            }
            *o = x;
        }
    }
}

/// Maps a 32-bit coordinate to the open unit interval (cell midpoint).
#[inline]
pub fn to_unit(x: u32) -> f64 {
    (x as f64 + 0.5) * (1.0 / 4_294_967_296.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_points_match_published_values() {
        let s = SobolSequence::new(3).unwrap();
        let mut p = [0u32; 3];
        let unit = |x: u32| x as f64 / 4_294_967_296.0;
        s.point(0, &mut p);
        assert_eq!(p, [0, 0, 0]);
        s.point(1, &mut p);
        assert_eq!([unit(p[0]), unit(p[1]), unit(p[2])], [0.5, 0.5, 0.5]);
        s.point(2, &mut p);
        assert_eq!([unit(p[0]), unit(p[1]), unit(p[2])], [0.75, 0.25, 0.25]);
        s.point(3, &mut p);
        assert_eq!([unit(p[0]), unit(p[1]), unit(p[2])], [0.25, 0.75, 0.75]);
    }

    #[test]
    fn every_dimension_is_a_permutation_of_dyadic_cells() {
        // Any 2^m-prefix places exactly one point in each interval of width 2^-m.
        let dims = 64;
        let s = SobolSequence::new(dims).unwrap();
        let m = 8;
        let mut seen = vec![vec![false; 1 << m]; dims];
        let mut p = vec![0u32; dims];
        for i in 0..(1u32 << m) {
            s.point(i, &mut p);
            for (j, x) in p.iter().enumerate() {
                let cell = (x >> (32 - m)) as usize;
                assert!(!seen[j][cell], "dim {j} cell {cell} hit twice");
                seen[j][cell] = true;
            }
        }
    }

    #[test]
    fn table_covers_all_dimensions() {
        assert!(SobolSequence::new(MAX_DIMS).is_ok());
        assert!(SobolSequence::new(MAX_DIMS + 1).is_err());
        assert!(SobolSequence::new(0).is_err());
    }

    #[test]
    fn unit_map_stays_inside_open_interval() {
        assert!(to_unit(0) > 0.0);
        assert!(to_unit(u32::MAX) < 1.0);
    }
}
