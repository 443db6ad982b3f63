//! Periodic rectifying maps `W(y) = My + P(y)` with `P` a trigonometric polynomial,
//! and their ε-rescalings `W_ε(x) = εW(x/ε)`, `b_ε(x) = b(x/ε)`.

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{
    drift_from_streamfields, gradient_cross, DiffeoSpec, RectifiedSystem, ScalarFieldSpec,
    SigmaBounds, MAX_DIM,
};
use crate::error::{Error, Result};
use crate::linalg::{det, det_in_place, norm};

/// One term `amplitude · sin(2π k·y + phase)` added to component `component` of `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMode {
    pub component: usize,
    pub amplitude: f64,
    pub wavevector: Vec<i32>,
    pub phase: f64,
}

impl TrigMode {
    fn angle(&self, y: &[f64]) -> f64 {
        TAU * self
            .wavevector
            .iter()
            .zip(y)
            .map(|(&k, v)| k as f64 * v)
            .sum::<f64>()
            + self.phase
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicCellMap {
    dim: usize,
    matrix: DMatrix<f64>,
    modes: Vec<TrigMode>,
}

/// Cell statistics gathered on the `64^N` validation grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellStats {
    pub min_det: f64,
    pub max_det: f64,
    pub max_drift: f64,
}

pub const CELL_SAMPLES_PER_AXIS: usize = 64;

impl PeriodicCellMap {
    pub fn new(matrix: DMatrix<f64>, modes: Vec<TrigMode>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument("cell matrix must be square".into()));
        }
        let dim = matrix.nrows();
        if dim < 2 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!("unsupported cell dimension {dim}")));
        }
        for m in &modes {
            if m.component >= dim {
                return Err(Error::InvalidArgument(format!(
                    "mode component {} out of range",
                    m.component
                )));
            }
            if m.wavevector.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: m.wavevector.len(),
                });
            }
        }
        Ok(PeriodicCellMap { dim, matrix, modes })
    }

    pub fn identity(dim: usize) -> Self {
        PeriodicCellMap {
            dim,
            matrix: DMatrix::identity(dim, dim),
            modes: Vec::new(),
        }
    }

    /// `w¹ = y₁`, `w² = y₂ + (γ/2π) sin(2πy₁)`.
    pub fn shear(gamma: f64) -> Self {
        PeriodicCellMap {
            dim: 2,
            matrix: DMatrix::identity(2, 2),
            modes: vec![TrigMode {
                component: 1,
                amplitude: gamma / TAU,
                wavevector: vec![1, 0],
                phase: 0.0,
            }],
        }
    }

    /// `w¹ = y₁ + (δ/2π) sin(2πy₂)`, `w² = y₂ + (γ/2π) sin(2πy₁)`; valid for `|δγ| < 1`.
    pub fn delta_gamma(delta: f64, gamma: f64) -> Self {
        PeriodicCellMap {
            dim: 2,
            matrix: DMatrix::identity(2, 2),
            modes: vec![
                TrigMode {
                    component: 0,
                    amplitude: delta / TAU,
                    wavevector: vec![0, 1],
                    phase: 0.0,
                },
                TrigMode {
                    component: 1,
                    amplitude: gamma / TAU,
                    wavevector: vec![1, 0],
                    phase: 0.0,
                },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn modes(&self) -> &[TrigMode] {
        &self.modes
    }

    pub fn component_value(&self, c: usize, y: &[f64]) -> f64 {
        let linear: f64 = (0..self.dim).map(|j| self.matrix[(c, j)] * y[j]).sum();
        linear
            + self
                .modes
                .iter()
                .filter(|m| m.component == c)
                .map(|m| m.amplitude * m.angle(y).sin())
                .sum::<f64>()
    }

    pub fn component_gradient_into(&self, c: usize, y: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.matrix[(c, j)];
        }
        for m in self.modes.iter().filter(|m| m.component == c) {
            let f = m.amplitude * TAU * m.angle(y).cos();
            for (o, &k) in out.iter_mut().zip(&m.wavevector) {
                *o += f * k as f64;
            }
        }
    }

    pub fn component_hessian(&self, c: usize, y: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.dim, self.dim);
        for m in self.modes.iter().filter(|m| m.component == c) {
            let f = -m.amplitude * TAU * TAU * m.angle(y).sin();
            for i in 0..self.dim {
                for j in 0..self.dim {
                    h[(i, j)] += f * (m.wavevector[i] * m.wavevector[j]) as f64;
                }
            }
        }
        h
    }

    /// Row-major Jacobian `∂w^c/∂y_j` into `out[c·N + j]`.
    fn jacobian_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for c in 0..n {
            self.component_gradient_into(c, y, &mut out[c * n..(c + 1) * n]);
        }
    }

    pub fn jacobian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim;
        let mut buf = [0.0; MAX_DIM * MAX_DIM];
        self.jacobian_into(y, &mut buf[..n * n]);
        DMatrix::from_row_slice(n, n, &buf[..n * n])
    }

    /// `σ(y) = det(DW)(y)`.
    pub fn density(&self, y: &[f64]) -> f64 {
        let n = self.dim;
        let mut buf = [0.0; MAX_DIM * MAX_DIM];
        self.jacobian_into(y, &mut buf[..n * n]);
        det_in_place(n, &mut buf[..n * n])
    }

    /// `∂_j det(DW) = Σ_{c,l} Cof(DW)_{cl} ∂_j ∂_l w^c`.
    pub fn density_gradient(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let cof = crate::linalg::cofactor_matrix(&self.jacobian(y));
        let hess: Vec<DMatrix<f64>> = (0..n).map(|c| self.component_hessian(c, y)).collect();
        (0..n)
            .map(|j| {
                let mut s = 0.0;
                for c in 0..n {
                    for l in 0..n {
                        s += cof[(c, l)] * hess[c][(l, j)];
                    }
                }
                s
            })
            .collect()
    }

    /// `W(y) − My`.
    pub fn periodic_part(&self, y: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|c| {
                self.modes
                    .iter()
                    .filter(|m| m.component == c)
                    .map(|m| m.amplitude * m.angle(y).sin())
                    .sum()
            })
            .collect()
    }

    /// Upper bound on `|W(y) − My|` from the mode amplitudes.
    pub fn periodic_part_bound(&self) -> f64 {
        let per_comp: Vec<f64> = (0..self.dim)
            .map(|c| {
                self.modes
                    .iter()
                    .filter(|m| m.component == c)
                    .map(|m| m.amplitude.abs())
                    .sum()
            })
            .collect();
        norm(&per_comp)
    }

    pub fn stream(&self, c: usize) -> ScalarFieldSpec {
        let n = self.dim;
        let (a, b, h) = (Arc::new(self.clone()), Arc::new(self.clone()), Arc::new(self.clone()));
        ScalarFieldSpec::new(
            n,
            move |y| a.component_value(c, y),
            move |y, out| b.component_gradient_into(c, y, out),
        )
        .with_hessian(move |y| h.component_hessian(c, y))
    }

    /// Nodes `k/m`, `k = 0..m`, of the uniform cell grid in row-major order.
    pub fn cell_nodes(dim: usize, m: usize) -> impl Iterator<Item = Vec<f64>> {
        let total = m.pow(dim as u32);
        (0..total).map(move |mut flat| {
            let mut y = vec![0.0; dim];
            for k in (0..dim).rev() {
                y[k] = (flat % m) as f64 / m as f64;
                flat /= m;
            }
            y
        })
    }

    /// Checks `det M > 0` and `det DW > 0` on the `64^N` cell grid.
    pub fn validate(&self) -> Result<CellStats> {
        let dm = det(&self.matrix);
        if !(dm > 0.0) {
            return Err(Error::InvalidCellMap {
                point: vec![],
                reason: format!("det(M) = {dm} is not positive"),
            });
        }
        let n = self.dim;
        let streams: Vec<ScalarFieldSpec> = (1..n).map(|c| self.stream(c)).collect();
        let mut stats = CellStats {
            min_det: f64::INFINITY,
            max_det: f64::NEG_INFINITY,
            max_drift: 0.0,
        };
        let mut g = [0.0; MAX_DIM];
        for y in Self::cell_nodes(n, CELL_SAMPLES_PER_AXIS) {
            let s = self.density(&y);
            if !(s > 0.0) {
                return Err(Error::InvalidCellMap {
                    point: y,
                    reason: format!("det(DW) = {s} is not positive"),
                });
            }
            stats.min_det = stats.min_det.min(s);
            stats.max_det = stats.max_det.max(s);
            gradient_cross(&streams, &y, &mut g[..n]);
            stats.max_drift = stats.max_drift.max(norm(&g[..n]) / s);
        }
        Ok(stats)
    }
}

/// Rescaled periodic system `W_ε(x) = εW(x/ε)`, `σ_ε(x) = σ(x/ε)`, `b_ε(x) = b(x/ε)`, `θ_ε ≡ 1`.
///
/// Limit data: `W(x) = Mx`, `θ₀ ≡ 1`.
pub fn periodic_family(cell: &PeriodicCellMap, eps: f64) -> Result<RectifiedSystem> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let stats = cell.validate()?;
    let n = cell.dim();
    let cell = Arc::new(cell.clone());

    let streams: Vec<ScalarFieldSpec> = (0..n)
        .map(|c| {
            let (a, b, h) = (cell.clone(), cell.clone(), cell.clone());
            ScalarFieldSpec::new(
                n,
                move |x| {
                    let mut y = [0.0; MAX_DIM];
                    scale_into(x, eps, &mut y[..n]);
                    eps * a.component_value(c, &y[..n])
                },
                move |x, out| {
                    let mut y = [0.0; MAX_DIM];
                    scale_into(x, eps, &mut y[..n]);
                    b.component_gradient_into(c, &y[..n], out)
                },
            )
            .with_hessian(move |x| {
                let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
                h.component_hessian(c, &y) / eps
            })
        })
        .collect();

    let (cv, cg) = (cell.clone(), cell.clone());
    let sigma = ScalarFieldSpec::new(
        n,
        move |x| {
            let mut y = [0.0; MAX_DIM];
            scale_into(x, eps, &mut y[..n]);
            cv.density(&y[..n])
        },
        move |x, out| {
            let y: Vec<f64> = x.iter().map(|v| v / eps).collect();
            for (o, g) in out.iter_mut().zip(cg.density_gradient(&y)) {
                *o = g / eps;
            }
        },
    );

    let b = drift_from_streamfields(&streams[1..], &sigma)?
        .with_bounds(Some(1.05 * stats.max_drift), None);
    let w = DiffeoSpec::from_components(streams.clone())?;

    Ok(RectifiedSystem {
        family: "periodic".into(),
        dim: n,
        eps,
        w,
        sigma,
        b,
        theta: ScalarFieldSpec::constant(n, 1.0),
        sigma_bounds: SigmaBounds::from_samples(stats.min_det, stats.max_det),
        limit_w: DiffeoSpec::linear(cell.matrix().clone()),
        limit_theta: ScalarFieldSpec::constant(n, 1.0),
        streams: streams[1..].to_vec(),
    })
}

#[inline]
fn scale_into(x: &[f64], eps: f64, y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = xi / eps;
    }
}
