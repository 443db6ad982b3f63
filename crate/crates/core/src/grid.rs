//! Axis-aligned boxes, tensor midpoint grids and deterministic sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument(format!("degenerate box {lo:?} .. {hi:?}")));
        }
        Ok(AxisBox { lo, hi })
    }

    /// `[-half, half]^dim`.
    pub fn cube(dim: usize, half: f64) -> Self {
        AxisBox {
            lo: vec![-half; dim],
            hi: vec![half; dim],
        }
    }

    pub fn around(center: &[f64], half: f64) -> Self {
        AxisBox {
            lo: center.iter().map(|c| c - half).collect(),
            hi: center.iter().map(|c| c + half).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// Whether the ball of radius `r` about the origin lies inside the box.
    pub fn contains_origin_ball(&self, r: f64) -> bool {
        self.lo.iter().zip(&self.hi).all(|(a, b)| *a <= -r && *b >= r)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| a <= v && v <= b)
    }

    /// Volume of one cell of the `m`-per-axis tensor grid.
    pub fn cell_volume(&self, m: usize) -> f64 {
        self.volume() / (m as f64).powi(self.dim() as i32)
    }

    /// Calls `f` on every midpoint node, first axis outermost (row-major order).
    pub fn for_each_midpoint<F: FnMut(&[f64])>(&self, m: usize, mut f: F) {
        let dim = self.dim();
        let axes: Vec<Vec<f64>> = (0..dim).map(|k| midpoints(self.lo[k], self.hi[k], m)).collect();
        let mut idx = vec![0usize; dim];
        let mut x: Vec<f64> = axes.iter().map(|a| a[0]).collect();
        loop {
            f(&x);
            let mut k = dim;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < m {
                    x[k] = axes[k][idx[k]];
                    break;
                }
                idx[k] = 0;
                x[k] = axes[k][0];
            }
        }
    }

    /// `n` uniform samples from a seeded ChaCha stream.
    pub fn sample_uniform(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                self.lo
                    .iter()
                    .zip(&self.hi)
                    .map(|(a, b)| rng.gen_range(*a..*b))
                    .collect()
            })
            .collect()
    }
}

/// Midpoints of `m` equal subintervals of `[lo, hi]`.
pub fn midpoints(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let h = (hi - lo) / m as f64;
    (0..m).map(|k| lo + (k as f64 + 0.5) * h).collect()
}

/// Resolution of the tensor midpoint rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct QuadratureSpec {
    /// Nodes per spatial axis.
    pub m: usize,
    /// Nodes in time.
    pub time_nodes: usize,
}

impl QuadratureSpec {
    pub fn new(m: usize, time_nodes: usize) -> Self {
        QuadratureSpec { m, time_nodes }
    }

    /// 256 nodes per axis in the plane, 64 in space; 64 time nodes.
    pub fn default_for(dim: usize) -> Self {
        let m = if dim <= 2 { 256 } else { 64 };
        QuadratureSpec { m, time_nodes: 64 }
    }
}
