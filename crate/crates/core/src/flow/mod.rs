//! Flow maps `dX/dt = a(X)`, `X(0) = x`, integrated by fixed-step classical RK4.
//!
//! Optionally the Jacobian `J = D_x X` is carried through the variational equation
//! `dJ/dt = Da(X) J`, and `logdet` through `d(logdet)/dt = div a(X)`. The two are
//! propagated independently so the Liouville identity `det J = exp(logdet)` is a
//! genuine cross-check.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fields::{DiffeoSpec, Derivatives, VectorFieldSpec, MAX_DIM};
use crate::linalg::norm;

mod dynamic;

pub use dynamic::{cellular_perturbation, dynamic_flow_family, FlowHypotheses, LimitDrift};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    /// Nominal step; every interval is split into `ceil(|Δt|/h)` equal steps.
    pub h: f64,
    /// Re-run at `h/2` and compare endpoints.
    pub richardson_check: bool,
    pub richardson_tol: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            h: 1e-3,
            richardson_check: false,
            richardson_tol: 1e-8,
        }
    }
}

impl IntegratorConfig {
    pub fn with_step(h: f64) -> Result<Self> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {h}")));
        }
        Ok(IntegratorConfig {
            h,
            ..Default::default()
        })
    }

    pub fn steps_for(&self, dt: f64) -> usize {
        if dt == 0.0 {
            0
        } else {
            ((dt.abs() / self.h) * (1.0 - 1e-12)).ceil().max(1.0) as usize
        }
    }

    fn halved(&self) -> Self {
        IntegratorConfig {
            h: self.h / 2.0,
            richardson_check: false,
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub pos: Vec<f64>,
    /// `D_x X(t, x₀)`, identity at `t = 0`; present when the Jacobian was carried.
    pub jac: Option<DMatrix<f64>>,
    /// `∫₀ᵗ div a(X(s)) ds`; present when the Jacobian was carried.
    pub logdet: Option<f64>,
}

/// One RK4 step of the position equation, in place; stack buffers only.
#[inline]
pub(crate) fn rk4_position_step(field: &VectorFieldSpec, x: &mut [f64], h: f64) {
    let n = x.len();
    let mut k1 = [0.0; MAX_DIM];
    let mut k2 = [0.0; MAX_DIM];
    let mut k3 = [0.0; MAX_DIM];
    let mut k4 = [0.0; MAX_DIM];
    let mut y = [0.0; MAX_DIM];
    field.eval_into(x, &mut k1[..n]);
    for i in 0..n {
        y[i] = x[i] + 0.5 * h * k1[i];
    }
    field.eval_into(&y[..n], &mut k2[..n]);
    for i in 0..n {
        y[i] = x[i] + 0.5 * h * k2[i];
    }
    field.eval_into(&y[..n], &mut k3[..n]);
    for i in 0..n {
        y[i] = x[i] + h * k3[i];
    }
    field.eval_into(&y[..n], &mut k4[..n]);
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Advances `x` by `dt` (either sign); `t0` only labels blow-up errors.
pub(crate) fn integrate_position(
    field: &VectorFieldSpec,
    x: &mut [f64],
    dt: f64,
    cfg: &IntegratorConfig,
    t0: f64,
) -> Result<()> {
    let n = cfg.steps_for(dt);
    if n == 0 {
        return Ok(());
    }
    let h = dt / n as f64;
    for k in 0..n {
        rk4_position_step(field, x, h);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp {
                time: t0 + (k + 1) as f64 * h,
            });
        }
    }
    Ok(())
}

/// Augmented state `[pos (N), J (N×N row-major), logdet]`.
fn augmented_rhs(field: &VectorFieldSpec, y: &[f64], out: &mut [f64]) {
    let n = field.dim();
    let x = &y[..n];
    field.eval_into(x, &mut out[..n]);
    let da = field.jacobian(x);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += da[(i, k)] * y[n + k * n + j];
            }
            out[n + i * n + j] = s;
        }
    }
    out[n + n * n] = field.divergence(x);
}

fn integrate_augmented(
    field: &VectorFieldSpec,
    y: &mut [f64],
    dt: f64,
    cfg: &IntegratorConfig,
) -> Result<()> {
    let steps = cfg.steps_for(dt);
    if steps == 0 {
        return Ok(());
    }
    let h = dt / steps as f64;
    let len = y.len();
    let (mut k1, mut k2, mut k3, mut k4) =
        (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut tmp = vec![0.0; len];
    for s in 0..steps {
        augmented_rhs(field, y, &mut k1);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k1[i];
        }
        augmented_rhs(field, &tmp, &mut k2);
        for i in 0..len {
            tmp[i] = y[i] + 0.5 * h * k2[i];
        }
        augmented_rhs(field, &tmp, &mut k3);
        for i in 0..len {
            tmp[i] = y[i] + h * k3[i];
        }
        augmented_rhs(field, &tmp, &mut k4);
        for i in 0..len {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::BlowUp {
                time: (s + 1) as f64 * h,
            });
        }
    }
    Ok(())
}

fn advect_once(
    field: &VectorFieldSpec,
    x0: &[f64],
    t_final: f64,
    cfg: &IntegratorConfig,
    carry_jacobian: bool,
) -> Result<FlowState> {
    let n = field.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if !carry_jacobian {
        let mut x = x0.to_vec();
        integrate_position(field, &mut x, t_final, cfg, 0.0)?;
        return Ok(FlowState {
            t: t_final,
            pos: x,
            jac: None,
            logdet: None,
        });
    }
    let mut y = vec![0.0; n + n * n + 1];
    y[..n].copy_from_slice(x0);
    for i in 0..n {
        y[n + i * n + i] = 1.0;
    }
    integrate_augmented(field, &mut y, t_final, cfg)?;
    Ok(FlowState {
        t: t_final,
        pos: y[..n].to_vec(),
        jac: Some(DMatrix::from_row_slice(n, n, &y[n..n + n * n])),
        logdet: Some(y[n + n * n]),
    })
}

/// State of the flow of `field` from `x0` at time `t_final` (negative for the backward flow).
pub fn advect(
    field: &VectorFieldSpec,
    x0: &[f64],
    t_final: f64,
    cfg: &IntegratorConfig,
    carry_jacobian: bool,
) -> Result<FlowState> {
    let state = advect_once(field, x0, t_final, cfg, carry_jacobian)?;
    if cfg.richardson_check {
        let fine = advect_once(field, x0, t_final, &cfg.halved(), carry_jacobian)?;
        let mut discrepancy = state
            .pos
            .iter()
            .zip(&fine.pos)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if let (Some(a), Some(b)) = (&state.jac, &fine.jac) {
            discrepancy = discrepancy.max((a - b).amax());
        }
        if discrepancy > cfg.richardson_tol {
            return Err(Error::Richardson {
                discrepancy,
                tolerance: cfg.richardson_tol,
            });
        }
    }
    Ok(state)
}

/// Positions `X(times[k], x0)` reported through `visit(k, pos)`; segments between
/// consecutive times are integrated in turn, so any order is accepted.
pub fn trace_positions<F: FnMut(usize, &[f64])>(
    field: &VectorFieldSpec,
    x0: &[f64],
    times: &[f64],
    cfg: &IntegratorConfig,
    mut visit: F,
) -> Result<()> {
    let mut x = [0.0; MAX_DIM];
    let n = x0.len();
    x[..n].copy_from_slice(x0);
    let mut t = 0.0;
    for (k, &tk) in times.iter().enumerate() {
        integrate_position(field, &mut x[..n], tk - t, cfg, t)?;
        t = tk;
        visit(k, &x[..n]);
    }
    Ok(())
}

/// `|X(s + t, x) − X(s, X(t, x))|` under the same integrator.
pub fn semigroup_defect(
    field: &VectorFieldSpec,
    s: f64,
    t: f64,
    x: &[f64],
    cfg: &IntegratorConfig,
) -> Result<f64> {
    let direct = advect(field, x, s + t, cfg, false)?.pos;
    let mid = advect(field, x, t, cfg, false)?.pos;
    let composed = advect(field, &mid, s, cfg, false)?.pos;
    let d: Vec<f64> = direct.iter().zip(&composed).map(|(a, b)| a - b).collect();
    Ok(norm(&d))
}

/// The time-`t` flow map `x ↦ X(t, x)` with variational Jacobian and Liouville volume factor.
///
/// Integration failures surface as NaN entries.
pub fn flow_map_diffeo(field: &VectorFieldSpec, t: f64, cfg: &IntegratorConfig) -> DiffeoSpec {
    let n = field.dim();
    let (fm, fj, fl) = (field.clone(), field.clone(), field.clone());
    let cfg = *cfg;
    DiffeoSpec::new(
        n,
        move |x, out| match advect(&fm, x, t, &cfg, false) {
            Ok(s) => out.copy_from_slice(&s.pos),
            Err(_) => out.fill(f64::NAN),
        },
        move |x| match advect(&fj, x, t, &cfg, true) {
            Ok(s) => s.jac.expect("carried"),
            Err(_) => DMatrix::from_element(n, n, f64::NAN),
        },
        Derivatives::FlowPropagated,
    )
    .with_log_det(move |x| match advect(&fl, x, t, &cfg, true) {
        Ok(s) => s.logdet.expect("carried"),
        Err(_) => f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{periodic_family, PeriodicCellMap};
    use crate::linalg::det;

    fn shear() -> VectorFieldSpec {
        VectorFieldSpec::new(
            2,
            |x, out| {
                out[0] = 0.0;
                out[1] = x[0].sin();
            },
            |x| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, x[0].cos(), 0.0]),
        )
    }

    #[test]
    fn constant_field_translates() {
        let f = VectorFieldSpec::constant(vec![0.5, -1.0]);
        let s = advect(&f, &[1.0, 2.0], 2.0, &IntegratorConfig::default(), true).unwrap();
        assert!((s.pos[0] - 2.0).abs() < 1e-12);
        assert!((s.pos[1] - 0.0).abs() < 1e-12);
        assert_eq!(s.jac.unwrap(), DMatrix::identity(2, 2));
        assert_eq!(s.logdet, Some(0.0));
    }

    #[test]
    fn shear_closed_form() {
        let x0 = [0.7, -0.2];
        let t = 1.3;
        let s = advect(&shear(), &x0, t, &IntegratorConfig::default(), true).unwrap();
        assert!((s.pos[0] - x0[0]).abs() < 1e-15);
        assert!((s.pos[1] - (x0[1] + t * x0[0].sin())).abs() < 1e-12);
        let j = s.jac.unwrap();
        assert!((j[(1, 0)] - t * x0[0].cos()).abs() < 1e-12);
        assert!((det(&j) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_time_is_identity() {
        let s = advect(&shear(), &[0.3, 0.4], 0.0, &IntegratorConfig::default(), true).unwrap();
        assert_eq!(s.pos, vec![0.3, 0.4]);
        assert_eq!(s.jac.unwrap(), DMatrix::identity(2, 2));
        assert_eq!(s.logdet, Some(0.0));
    }

    #[test]
    fn invariant_measure_volume_factor() {
        let sys = periodic_family(&PeriodicCellMap::delta_gamma(0.5, 0.6), 1.0).unwrap();
        let x0 = [0.2, 0.4];
        let s = advect(&sys.b, &x0, 1.5, &IntegratorConfig::default(), true).unwrap();
        let expect = sys.sigma.value(&x0) / sys.sigma.value(&s.pos);
        assert!((det(&s.jac.unwrap()) - expect).abs() < 1e-6);
        assert!((s.logdet.unwrap().exp() - expect).abs() < 1e-6);
    }

    #[test]
    fn blow_up_is_reported() {
        let f = VectorFieldSpec::new(1, |x, o| o[0] = x[0] * x[0], |x| {
            DMatrix::from_element(1, 1, 2.0 * x[0])
        });
        let err = advect(&f, &[1.0], 2.0, &IntegratorConfig::with_step(1e-2).unwrap(), false);
        match err {
            Err(Error::BlowUp { time }) => assert!(time > 0.9 && time < 1.2, "{time}"),
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn richardson_check_catches_coarse_steps() {
        let sys = periodic_family(&PeriodicCellMap::delta_gamma(0.5, 0.6), 0.1).unwrap();
        let cfg = IntegratorConfig {
            h: 0.2,
            richardson_check: true,
            richardson_tol: 1e-8,
        };
        assert!(matches!(
            advect(&sys.b, &[0.1, 0.1], 1.0, &cfg, false),
            Err(Error::Richardson { .. })
        ));
        let fine = IntegratorConfig {
            h: 1e-3,
            ..cfg
        };
        advect(&sys.b, &[0.1, 0.1], 1.0, &IntegratorConfig { richardson_tol: 1e-7, ..fine }, false)
            .unwrap();
    }

    #[test]
    fn trace_matches_individual_advects() {
        let sys = periodic_family(&PeriodicCellMap::delta_gamma(0.3, 0.3), 0.2).unwrap();
        let cfg = IntegratorConfig::default();
        let times = [0.25, 0.5, 1.0];
        let mut got = Vec::new();
        trace_positions(&sys.b, &[0.1, -0.3], &times, &cfg, |_, p| got.push(p.to_vec())).unwrap();
        for (t, p) in times.iter().zip(&got) {
            let direct = advect(&sys.b, &[0.1, -0.3], *t, &cfg, false).unwrap().pos;
            for (a, b) in direct.iter().zip(p) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn semigroup_for_constant_and_shear() {
        let cfg = IntegratorConfig::default();
        let c = VectorFieldSpec::constant(vec![1.0, 2.0]);
        assert!(semigroup_defect(&c, 0.3, 0.4, &[0.0, 0.0], &cfg).unwrap() < 1e-14);
        assert!(semigroup_defect(&shear(), 0.5, 0.5, &[1.0, 0.0], &cfg).unwrap() < 1e-10);
    }

    #[test]
    fn flow_map_at_zero_time() {
        let d = flow_map_diffeo(&shear(), 0.0, &IntegratorConfig::default());
        assert_eq!(d.eval(&[0.4, 0.5]), vec![0.4, 0.5]);
        assert_eq!(d.jacobian(&[0.4, 0.5]), DMatrix::identity(2, 2));
        assert_eq!(d.det(&[0.4, 0.5]), 1.0);
    }
}
