//! Digitally shifted Sobol sequences in up to four dimensions.
//!
//! Direction numbers are the first four dimensions of the Joe–Kuo set.
//! Each sequence is scrambled by XOR-ing a per-seed shift into every
//! coordinate, which keeps the net structure while decorrelating seeds.

use crate::hash::mix64;

const BITS: usize = 32;

/// (degree, polynomial coefficients a, initial direction numbers m).
const PRIMITIVES: [(usize, u32, &[u32]); 3] = [(1, 0, &[1]), (2, 1, &[1, 3]), (3, 1, &[1, 3, 1])];

fn direction_numbers() -> [[u32; BITS]; 4] {
    let mut v = [[0u32; BITS]; 4];
    for (k, x) in v[0].iter_mut().enumerate() {
        *x = 1 << (31 - k);
    }
    for (d, &(s, a, m)) in PRIMITIVES.iter().enumerate() {
        let row = &mut v[d + 1];
        for k in 0..BITS {
            row[k] = if k < s {
                m[k] << (31 - k)
            } else {
                let mut x = row[k - s] ^ (row[k - s] >> s);
                for i in 1..s {
                    if (a >> (s - 1 - i)) & 1 == 1 {
                        x ^= row[k - i];
                    }
                }
                x
            };
        }
    }
    v
}

/// Gray-code ordered Sobol points with a digital shift.
#[derive(Debug, Clone)]
pub struct Sobol<const D: usize> {
    v: [[u32; BITS]; 4],
    state: [u32; D],
    index: u64,
}

impl<const D: usize> Sobol<D> {
    pub fn new(seed: u64) -> Self {
        assert!(D >= 1 && D <= 4, "Sobol supports 1 to 4 dimensions");
        let mut state = [0u32; D];
        let mut s = seed;
        for x in state.iter_mut() {
            s = mix64(s);
            *x = (s >> 32) as u32;
        }
        Self {
            v: direction_numbers(),
            state,
            index: 0,
        }
    }

    /// Next point with every coordinate strictly inside (0, 1).
    pub fn next_point(&mut self) -> [f64; D] {
        let mut out = [0.0; D];
        for (o, &x) in out.iter_mut().zip(&self.state) {
            *o = (f64::from(x) + 0.5) / 4_294_967_296.0;
        }
        self.index += 1;
        let c = (self.index.trailing_zeros() as usize).min(BITS - 1);
        for (d, x) in self.state.iter_mut().enumerate() {
            *x ^= self.v[d][c];
        }
        out
    }
}
