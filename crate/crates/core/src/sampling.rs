//! Deterministic point sets over a box: uniform grids and shifted Halton points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::system::StateBox;

const PRIMES: [u32; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

/// Largest dimension the Halton generator supports.
pub const MAX_HALTON_DIM: usize = PRIMES.len();

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton sequence in `[0, 1)^dim` with a seeded Cranley-Patterson rotation.
#[derive(Debug, Clone)]
pub struct Halton {
    index: u64,
    shift: Vec<f64>,
}

impl Halton {
    /// Panics if `dim` exceeds [`MAX_HALTON_DIM`].
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= MAX_HALTON_DIM, "Halton dimension {dim} not supported");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shift = (0..dim).map(|_| rng.random::<f64>()).collect();
        Self { index: 1, shift }
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some(
            self.shift
                .iter()
                .zip(PRIMES)
                .map(|(s, b)| (radical_inverse(i, b as u64) + s).fract())
                .collect(),
        )
    }
}

/// `per_axis^n` evenly spaced points including the box faces.
pub fn grid(omega: &StateBox, per_axis: usize) -> Vec<Vec<f64>> {
    let n = omega.dim();
    let k = per_axis.max(1);
    let coord = |i: usize| if k == 1 { 0.5 } else { i as f64 / (k - 1) as f64 };
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let u: Vec<f64> = (0..n)
                .map(|_| {
                    let c = coord(idx % k);
                    idx /= k;
                    c
                })
                .collect();
            omega.from_unit(&u)
        })
        .collect()
}

/// Point set used to probe a property "on omega".
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplingPlan {
    pub grid_per_axis: Option<usize>,
    pub low_discrepancy: Option<usize>,
}

impl SamplingPlan {
    /// 11 grid points per axis up to three states, 4096 Halton points beyond.
    pub fn default_for(n: usize) -> Self {
        if n <= 3 {
            Self::grid(11)
        } else {
            Self::low_discrepancy(4096)
        }
    }

    pub fn grid(per_axis: usize) -> Self {
        Self {
            grid_per_axis: Some(per_axis),
            low_discrepancy: None,
        }
    }

    pub fn low_discrepancy(count: usize) -> Self {
        Self {
            grid_per_axis: None,
            low_discrepancy: Some(count),
        }
    }

    pub fn points(&self, omega: &StateBox, seed: u64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if let Some(k) = self.grid_per_axis {
            out.extend(grid(omega, k));
        }
        if let Some(m) = self.low_discrepancy {
            out.extend(Halton::new(omega.dim(), seed).take(m).map(|u| omega.from_unit(&u)));
        }
        out
    }
}
