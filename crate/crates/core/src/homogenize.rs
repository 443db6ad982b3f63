//! Effective coefficients `(σ₀, ξ₀)` of the homogenized transport equation: cell
//! averages for periodic maps and the cofactor formula `ξ₀ = Cof(DW)e₁` for a limit map.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{
    cross_product, rot_perp, DiffeoSpec, PeriodicCellMap, ScalarFieldSpec, VectorFieldSpec,
    MAX_DIM,
};
use crate::linalg::{det, mat_vec};

pub use crate::linalg::cofactor_matrix;

#[derive(Clone, Debug)]
pub enum ScalarCoefficient {
    Constant(f64),
    Field(ScalarFieldSpec),
}

impl ScalarCoefficient {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            ScalarCoefficient::Constant(c) => *c,
            ScalarCoefficient::Field(f) => f.value(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarCoefficient::Constant(c) => Some(*c),
            ScalarCoefficient::Field(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub enum VectorCoefficient {
    Constant(Vec<f64>),
    Field(VectorFieldSpec),
}

impl VectorCoefficient {
    pub fn value(&self, x: &[f64]) -> Vec<f64> {
        match self {
            VectorCoefficient::Constant(c) => c.clone(),
            VectorCoefficient::Field(f) => f.eval(x),
        }
    }

    pub fn as_constant(&self) -> Option<&[f64]> {
        match self {
            VectorCoefficient::Constant(c) => Some(c),
            VectorCoefficient::Field(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientProvenance {
    CellAverage,
    CofactorLimit,
}

impl CoefficientProvenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            CoefficientProvenance::CellAverage => "cell-average",
            CoefficientProvenance::CofactorLimit => "cofactor-limit",
        }
    }
}

/// Coefficients of `∂ₜv − ξ₀·∇(v/σ₀) = 0`, equivalently `∂ₜu − (ξ₀/σ₀)·∇u = 0`.
#[derive(Clone, Debug)]
pub struct EffectiveCoefficients {
    pub dim: usize,
    pub sigma0: ScalarCoefficient,
    pub xi0: VectorCoefficient,
    pub provenance: CoefficientProvenance,
}

impl EffectiveCoefficients {
    pub fn constant(sigma0: f64, xi0: Vec<f64>, provenance: CoefficientProvenance) -> Self {
        EffectiveCoefficients {
            dim: xi0.len(),
            sigma0: ScalarCoefficient::Constant(sigma0),
            xi0: VectorCoefficient::Constant(xi0),
            provenance,
        }
    }

    /// Effective velocity `ξ₀/σ₀` when both coefficients are constant.
    pub fn constant_velocity(&self) -> Option<Vec<f64>> {
        let s = self.sigma0.as_constant()?;
        let xi = self.xi0.as_constant()?;
        Some(xi.iter().map(|v| v / s).collect())
    }
}

/// Mean over `[0, 1)^N` on the uniform grid `{k/m}`; exact for trigonometric
/// polynomials of degree below `m`.
pub fn cell_average(dim: usize, m: usize, f: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    check_resolution(m)?;
    let mut sum = 0.0;
    for y in PeriodicCellMap::cell_nodes(dim, m) {
        sum += f(&y);
    }
    Ok(sum / (m as f64).powi(dim as i32))
}

/// Componentwise [`cell_average`] of a vector-valued `f`.
pub fn cell_average_vec(
    dim: usize,
    m: usize,
    components: usize,
    f: &dyn Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    check_resolution(m)?;
    let mut sum = vec![0.0; components];
    let mut buf = vec![0.0; components];
    for y in PeriodicCellMap::cell_nodes(dim, m) {
        f(&y, &mut buf);
        for (s, v) in sum.iter_mut().zip(&buf) {
            *s += v;
        }
    }
    let n = (m as f64).powi(dim as i32);
    Ok(sum.into_iter().map(|s| s / n).collect())
}

fn check_resolution(m: usize) -> Result<()> {
    if m < 8 {
        return Err(Error::InvalidArgument(format!(
            "cell resolution must be at least 8, got {m}"
        )));
    }
    Ok(())
}

/// Effective coefficients of a periodic cell together with the quasi-affinity audit.
#[derive(Clone, Debug)]
pub struct CellHomogenization {
    pub coefficients: EffectiveCoefficients,
    pub det_m: f64,
    pub mean_det: f64,
    /// `|det M − ⟨det DW⟩|`.
    pub quasi_affinity_residual: f64,
    /// Grid resolution at which the residual settled.
    pub resolution: usize,
}

const QUASI_AFFINITY_TARGET: f64 = 1e-10;
const QUASI_AFFINITY_LIMIT: f64 = 1e-8;

/// `σ₀ = ⟨det DW⟩`, `ξ₀ = ⟨σb⟩`, starting at resolution `m` and doubling until
/// `|det M − ⟨det DW⟩| < 1e−10` (or the per-dimension cap is reached).
pub fn effective_from_cell(cell: &PeriodicCellMap, m: usize) -> Result<CellHomogenization> {
    let n = cell.dim();
    let det_m = det(cell.matrix());
    let cap = match n {
        1 | 2 => 1024,
        3 => 128,
        _ => 32,
    };
    let mut m = m;
    loop {
        let mean_det = cell_average(n, m, &|y| cell.density(y))?;
        let residual = (det_m - mean_det).abs();
        if residual < QUASI_AFFINITY_TARGET || 2 * m > cap.max(m) {
            if residual > QUASI_AFFINITY_LIMIT {
                return Err(Error::InsufficientResolution {
                    residual,
                    resolution: m,
                });
            }
            let xi0 = cell_average_vec(n, m, n, &|y, out| stream_cross(cell, y, out))?;
            return Ok(CellHomogenization {
                coefficients: EffectiveCoefficients::constant(
                    mean_det,
                    xi0,
                    CoefficientProvenance::CellAverage,
                ),
                det_m,
                mean_det,
                quasi_affinity_residual: residual,
                resolution: m,
            });
        }
        m *= 2;
    }
}

/// `σb` of the cell: `R⊥∇w²` in the plane, `∇w² × ⋯ × ∇w^N` otherwise.
fn stream_cross(cell: &PeriodicCellMap, y: &[f64], out: &mut [f64]) {
    let n = cell.dim();
    let mut grads = [[0.0; MAX_DIM]; MAX_DIM];
    for c in 1..n {
        cell.component_gradient_into(c, y, &mut grads[c][..n]);
    }
    if n == 2 {
        out.copy_from_slice(&rot_perp(&grads[1][..2]).expect("planar"));
    } else {
        let refs: Vec<&[f64]> = (1..n).map(|c| &grads[c][..n]).collect();
        out.copy_from_slice(&cross_product(&refs).expect("matching dimensions"));
    }
}

/// `ξ₀(x) = Cof(DW(x))e₁`, where `DW` carries derivatives in rows; in the Jacobian
/// layout used here that is the first row of `Cof(J)`.
///
/// `σ₀` is not determined by the limit map and must be supplied by the caller.
pub fn effective_from_limit_map(limit_w: &DiffeoSpec, sigma0: ScalarCoefficient) -> EffectiveCoefficients {
    let n = limit_w.dim();
    let xi0 = match limit_w.constant_jacobian() {
        Some(j) => VectorCoefficient::Constant(cofactor_first_row(j)),
        None => {
            let w = limit_w.clone();
            VectorCoefficient::Field(
                VectorFieldSpec::from_values(n, move |x, out| {
                    out.copy_from_slice(&cofactor_first_row(&w.jacobian(x)))
                })
                .with_derivatives(limit_w.derivatives()),
            )
        }
    };
    EffectiveCoefficients {
        dim: n,
        sigma0,
        xi0,
        provenance: CoefficientProvenance::CofactorLimit,
    }
}

fn cofactor_first_row(j: &DMatrix<f64>) -> Vec<f64> {
    let c = cofactor_matrix(&j.transpose());
    c.column(0).iter().copied().collect()
}

/// `DWᵀξ₀ − σ₀θ₀e₁` at `x` for limit data.
pub fn limit_rectification_residual(
    limit_w: &DiffeoSpec,
    coeffs: &EffectiveCoefficients,
    limit_theta: &ScalarFieldSpec,
    x: &[f64],
) -> Vec<f64> {
    let mut r = mat_vec(&limit_w.jacobian(x), &coeffs.xi0.value(x));
    r[0] -= coeffs.sigma0.value(x) * limit_theta.value(x);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::TrigMode;
    use crate::flow::{flow_map_diffeo, IntegratorConfig, LimitDrift};
    use std::f64::consts::PI;

    #[test]
    fn averages_of_constants_and_cosines() {
        assert_eq!(cell_average(2, 8, &|_| 3.0).unwrap(), 3.0);
        assert!(cell_average(2, 16, &|y| (2.0 * PI * y[0]).cos()).unwrap().abs() < 1e-15);
        assert!(cell_average(2, 4, &|_| 1.0).is_err());
    }

    #[test]
    fn delta_gamma_cell() {
        let h = effective_from_cell(&PeriodicCellMap::delta_gamma(0.3, 0.3), 64).unwrap();
        let c = &h.coefficients;
        assert!((c.sigma0.as_constant().unwrap() - 1.0).abs() < 1e-12);
        let xi = c.xi0.as_constant().unwrap();
        assert!((xi[0] - 1.0).abs() < 1e-12 && xi[1].abs() < 1e-12);
        assert!(h.quasi_affinity_residual < 1e-12);
        assert_eq!(h.resolution, 64);
    }

    #[test]
    fn anisotropic_matrix_cell() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let modes = vec![TrigMode {
            component: 1,
            amplitude: 0.1,
            wavevector: vec![1, 1],
            phase: 0.3,
        }];
        let h = effective_from_cell(&PeriodicCellMap::new(m, modes).unwrap(), 16).unwrap();
        assert!((h.mean_det - 2.0).abs() < 1e-12);
        assert_eq!(h.det_m, 2.0);
        // σb = R⊥∇w² averages to R⊥(M row 2) = (2, 0)
        let xi = h.coefficients.xi0.as_constant().unwrap();
        assert!((xi[0] - 2.0).abs() < 1e-12 && xi[1].abs() < 1e-12);
    }

    #[test]
    fn limit_map_cofactor_for_linear_and_shear() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 3.0]);
        let c = effective_from_limit_map(&DiffeoSpec::linear(m), ScalarCoefficient::Constant(6.0));
        // row W = Mx: ∇w² = (0, 3) so ξ₀ = R⊥∇w² = (3, 0)
        assert_eq!(c.xi0.as_constant().unwrap(), &[3.0, 0.0]);

        let t = 1.0;
        let x = [0.6, -0.4];
        let flow = flow_map_diffeo(&LimitDrift::Shear.field(), t, &IntegratorConfig::default());
        let c = effective_from_limit_map(&flow, ScalarCoefficient::Constant(1.0));
        let xi = c.xi0.value(&x);
        assert!((xi[0] - 1.0).abs() < 1e-10);
        assert!((xi[1] + t * x[0].cos()).abs() < 1e-10);
        let one = ScalarFieldSpec::constant(2, 1.0);
        let r = limit_rectification_residual(&flow, &c, &one, &x);
        assert!(r.iter().all(|v| v.abs() < 1e-10));
    }
}
