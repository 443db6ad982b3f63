//! Rectifying coordinates from a flow map: `W_ε = X_ε(t*, ·)` for a family of
//! bounded drifts `a_ε`, with `σ ≡ 1`, `b_ε = R⊥∇w_ε²` (or the N-D cross product) and
//! `θ_ε = det D_xX_ε(t*, ·)`.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{advect, flow_map_diffeo, IntegratorConfig};
use crate::error::{Error, Result};
use crate::fields::{
    drift_from_streamfields, Derivatives, RectifiedSystem, ScalarFieldSpec, SigmaBounds,
    VectorFieldSpec,
};
use crate::grid::AxisBox;
use crate::linalg::norm;

/// Sampling thresholds used to validate a drift family before building its flow system.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowHypotheses {
    /// Samples are drawn from `[-half_width, half_width]^N`.
    pub half_width: f64,
    pub samples: usize,
    pub seed: u64,
    /// Bound on `|a_ε − a|`.
    pub closeness: f64,
    /// Bound on `|a_ε| + |div a_ε|`.
    pub bound: f64,
    /// Bound on the max-entry norm of `Da_ε`.
    pub jacobian_bound: f64,
    /// Bound on the sampled `L^q` norm of `div a_ε − div a`.
    pub divergence_gap: f64,
    pub q: f64,
}

impl Default for FlowHypotheses {
    fn default() -> Self {
        FlowHypotheses {
            half_width: 3.0,
            samples: 400,
            seed: 0,
            closeness: 0.5,
            bound: 10.0,
            jacobian_bound: 100.0,
            divergence_gap: 0.5,
            q: 2.0,
        }
    }
}

impl FlowHypotheses {
    /// Checks the sampled hypotheses; the first violated condition is reported with its sample.
    pub fn validate(&self, a_eps: &VectorFieldSpec, limit_a: &VectorFieldSpec) -> Result<()> {
        let n = a_eps.dim();
        if limit_a.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: limit_a.dim(),
            });
        }
        let samples = AxisBox::cube(n, self.half_width).sample_uniform(self.samples, self.seed);
        let mut gap_q = 0.0;
        for x in &samples {
            let (ae, a) = (a_eps.eval(x), limit_a.eval(x));
            let diff: Vec<f64> = ae.iter().zip(&a).map(|(p, q)| p - q).collect();
            let close = norm(&diff);
            if !(close <= self.closeness) {
                return Err(violation("uniform closeness", x, close, self.closeness));
            }
            let div = a_eps.divergence(x);
            let size = norm(&ae) + div.abs();
            if !(size <= self.bound) {
                return Err(violation("bounded field and divergence", x, size, self.bound));
            }
            let da = a_eps.jacobian(x).amax();
            if !(da <= self.jacobian_bound) {
                return Err(violation("bounded jacobian", x, da, self.jacobian_bound));
            }
            gap_q += (div - limit_a.divergence(x)).abs().powf(self.q);
        }
        let volume = (2.0 * self.half_width).powi(n as i32);
        let gap = (gap_q / samples.len().max(1) as f64 * volume).powf(1.0 / self.q);
        if !(gap <= self.divergence_gap) {
            let origin = vec![0.0; n];
            return Err(violation("divergence convergence", &origin, gap, self.divergence_gap));
        }
        Ok(())
    }
}

fn violation(condition: &'static str, x: &[f64], value: f64, limit: f64) -> Error {
    Error::HypothesisViolation {
        condition,
        sample: x.to_vec(),
        value,
        limit,
    }
}

/// Limit drifts available to the planar flow construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LimitDrift {
    Zero,
    /// `(0, sin x₁)`: divergence free.
    Shear,
    /// `(tanh x₂, 0)`: divergence free.
    TanhShear,
    /// `(tanh(x₁)/2, 0)`: compressible.
    TanhStretch,
}

impl LimitDrift {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "zero" => Some(LimitDrift::Zero),
            "shear" => Some(LimitDrift::Shear),
            "tanh_shear" => Some(LimitDrift::TanhShear),
            "tanh_stretch" => Some(LimitDrift::TanhStretch),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LimitDrift::Zero => "zero",
            LimitDrift::Shear => "shear",
            LimitDrift::TanhShear => "tanh_shear",
            LimitDrift::TanhStretch => "tanh_stretch",
        }
    }

    pub fn field(&self) -> VectorFieldSpec {
        match self {
            LimitDrift::Zero => VectorFieldSpec::constant(vec![0.0, 0.0]),
            LimitDrift::Shear => VectorFieldSpec::new(
                2,
                |x, o| {
                    o[0] = 0.0;
                    o[1] = x[0].sin();
                },
                |x| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, x[0].cos(), 0.0]),
            )
            .with_bounds(Some(1.0), Some(0.0)),
            LimitDrift::TanhShear => VectorFieldSpec::new(
                2,
                |x, o| {
                    o[0] = x[1].tanh();
                    o[1] = 0.0;
                },
                |x| {
                    let s = 1.0 / x[1].cosh();
                    DMatrix::from_row_slice(2, 2, &[0.0, s * s, 0.0, 0.0])
                },
            )
            .with_bounds(Some(1.0), Some(0.0)),
            LimitDrift::TanhStretch => VectorFieldSpec::new(
                2,
                |x, o| {
                    o[0] = 0.5 * x[0].tanh();
                    o[1] = 0.0;
                },
                |x| {
                    let s = 1.0 / x[0].cosh();
                    DMatrix::from_row_slice(2, 2, &[0.5 * s * s, 0.0, 0.0, 0.0])
                },
            )
            .with_bounds(Some(0.5), Some(0.5)),
        }
    }
}

/// `a_ε(x) = a(x) + κ ε R⊥∇ψ(x/ε)` with `ψ(y) = sin(2πy₁) sin(2πy₂) / 4π²`.
///
/// The perturbation is divergence free, `O(κε)` in sup norm, and has `O(κ)` oscillating Jacobian.
pub fn cellular_perturbation(base: &VectorFieldSpec, kappa: f64, eps: f64) -> Result<VectorFieldSpec> {
    if base.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: base.dim(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let (be, bj, bd) = (base.clone(), base.clone(), base.clone());
    let k = 2.0 * PI / eps;
    let amp = kappa * eps / (2.0 * PI);
    let sup = base.sup_bound().map(|s| s + amp * std::f64::consts::SQRT_2);
    Ok(VectorFieldSpec::new(
        2,
        move |x, o| {
            be.eval_into(x, o);
            let (s1, c1) = (k * x[0]).sin_cos();
            let (s2, c2) = (k * x[1]).sin_cos();
            o[0] += amp * s1 * c2;
            o[1] -= amp * c1 * s2;
        },
        move |x| {
            let mut j = bj.jacobian(x);
            let (s1, c1) = (k * x[0]).sin_cos();
            let (s2, c2) = (k * x[1]).sin_cos();
            j[(0, 0)] += kappa * c1 * c2;
            j[(0, 1)] -= kappa * s1 * s2;
            j[(1, 0)] += kappa * s1 * s2;
            j[(1, 1)] -= kappa * c1 * c2;
            j
        },
    )
    .with_divergence(move |x| bd.divergence(x))
    .with_bounds(sup, base.div_bound()))
}

/// Rectified system from the time-`t_star` flow of `a_family(eps)`.
///
/// The stream gradients are rows of the variationally propagated Jacobian; θ is the
/// Liouville factor `exp(∫ div a_ε)`. Limit data comes from the flow of `limit_a`.
pub fn dynamic_flow_family(
    a_family: &dyn Fn(f64) -> Result<VectorFieldSpec>,
    limit_a: &VectorFieldSpec,
    t_star: f64,
    eps: f64,
    cfg: &IntegratorConfig,
    hypotheses: &FlowHypotheses,
) -> Result<RectifiedSystem> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if !(t_star.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_star must be finite, got {t_star}")));
    }
    let a = a_family(eps)?;
    hypotheses.validate(&a, limit_a)?;
    let n = a.dim();
    let cfg = *cfg;

    let a = Arc::new(a);
    let streams: Vec<ScalarFieldSpec> = (0..n)
        .map(|k| {
            let (av, ag) = (a.clone(), a.clone());
            ScalarFieldSpec::new(
                n,
                move |x| advect(&av, x, t_star, &cfg, false).map_or(f64::NAN, |s| s.pos[k]),
                move |x, out| match advect(&ag, x, t_star, &cfg, true) {
                    Ok(s) => {
                        let j = s.jac.expect("carried");
                        for (i, o) in out.iter_mut().enumerate() {
                            *o = j[(k, i)];
                        }
                    }
                    Err(_) => out.fill(f64::NAN),
                },
            )
            .with_derivatives(Derivatives::FlowPropagated)
        })
        .collect();

    let one = ScalarFieldSpec::constant(n, 1.0);
    let b = drift_from_streamfields(&streams[1..], &one)?;
    let w = flow_map_diffeo(&a, t_star, &cfg);
    Ok(RectifiedSystem {
        family: "dynamic".into(),
        dim: n,
        eps,
        w,
        sigma: one,
        b,
        theta: liouville_factor(a.clone(), t_star, cfg),
        sigma_bounds: SigmaBounds::from_samples(1.0, 1.0),
        limit_w: flow_map_diffeo(limit_a, t_star, &cfg),
        limit_theta: liouville_factor(Arc::new(limit_a.clone()), t_star, cfg),
        streams: streams[1..].to_vec(),
    })
}

fn liouville_factor(a: Arc<VectorFieldSpec>, t: f64, cfg: IntegratorConfig) -> ScalarFieldSpec {
    let n = a.dim();
    ScalarFieldSpec::from_values(n, move |x| {
        advect(&a, x, t, &cfg, true).map_or(f64::NAN, |s| s.logdet.expect("carried").exp())
    })
    .with_derivatives(Derivatives::FlowPropagated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{determinant_residual, rectification_residual};
    use crate::linalg::max_abs;

    fn family(limit: LimitDrift, kappa: f64) -> impl Fn(f64) -> Result<VectorFieldSpec> {
        move |eps| cellular_perturbation(&limit.field(), kappa, eps)
    }

    #[test]
    fn perturbation_is_divergence_free_and_small() {
        let base = LimitDrift::TanhShear.field();
        let a = cellular_perturbation(&base, 1.0, 0.1).unwrap();
        for x in [[0.13, 0.27], [-0.8, 1.1]] {
            let j = a.jacobian(&x);
            assert!((j.trace() - base.divergence(&x)).abs() < 1e-14);
            let d: Vec<f64> = a.eval(&x).iter().zip(base.eval(&x)).map(|(p, q)| p - q).collect();
            assert!(norm(&d) <= 0.1 / (2.0 * PI) * 2f64.sqrt() + 1e-15);
            let fd = crate::linalg::fd_jacobian(&|y: &[f64]| a.eval(y), &x, 1e-6);
            assert!((fd - j).amax() < 1e-6);
        }
    }

    #[test]
    fn zero_drift_gives_identity_system() {
        let sys = dynamic_flow_family(
            &|_| Ok(LimitDrift::Zero.field()),
            &LimitDrift::Zero.field(),
            1.0,
            0.5,
            &IntegratorConfig::default(),
            &FlowHypotheses::default(),
        )
        .unwrap();
        let x = [0.4, -0.3];
        assert_eq!(sys.w.eval(&x), x.to_vec());
        assert!(max_abs(&sys.b.eval(&x).iter().zip([1.0, 0.0]).map(|(p, q)| p - q).collect::<Vec<_>>()) < 1e-9);
        assert_eq!(sys.theta.value(&x), 1.0);
    }

    #[test]
    fn shear_flow_rectifies() {
        let sys = dynamic_flow_family(
            &|_| Ok(LimitDrift::Shear.field()),
            &LimitDrift::Shear.field(),
            1.0,
            1.0,
            &IntegratorConfig::default(),
            &FlowHypotheses::default(),
        )
        .unwrap();
        for x in [[0.3, 0.1], [-1.2, 0.9]] {
            assert!(max_abs(&rectification_residual(&sys, &x)) < 1e-10);
            assert!(determinant_residual(&sys, &x).abs() < 1e-10);
            // b = R⊥∇w² with w² = x₂ + sin x₁
            let b = sys.b.eval(&x);
            assert!((b[0] - 1.0).abs() < 1e-10 && (b[1] + x[0].cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn hypotheses_reject_large_perturbation() {
        let res = dynamic_flow_family(
            &family(LimitDrift::Zero, 1.0),
            &LimitDrift::Zero.field(),
            1.0,
            0.1,
            &IntegratorConfig::default(),
            &FlowHypotheses {
                closeness: 1e-3,
                ..Default::default()
            },
        );
        match res {
            Err(Error::HypothesisViolation { condition, .. }) => {
                assert_eq!(condition, "uniform closeness")
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }
}
