//! Planar maps with constant-Jacobian structure,
//! `W_ε(x) = (α(x₁) e^{β(α(x₁)α(x₂))}, α(x₂) e^{−β(α(x₁)α(x₂))})`,
//! whose Jacobian determinant is `α'(x₁) α'(x₂)` regardless of β.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{drift_from_streamfields, DiffeoSpec, RectifiedSystem, ScalarFieldSpec, SigmaBounds};
use crate::error::{Error, Result};

/// A `C²` function of one variable given by its jet `[f, f', f'']`.
#[derive(Clone)]
pub struct Profile1d {
    jet: Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>,
}

impl std::fmt::Debug for Profile1d {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Profile1d")
    }
}

impl Profile1d {
    pub fn new<F>(jet: F) -> Self
    where
        F: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        Profile1d { jet: Arc::new(jet) }
    }

    pub fn jet(&self, t: f64) -> [f64; 3] {
        (self.jet)(t)
    }

    pub fn identity() -> Self {
        Profile1d::new(|t| [t, 1.0, 0.0])
    }

    pub fn zero() -> Self {
        Profile1d::new(|_| [0.0; 3])
    }
}

/// Parametrized choices for `α_ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaForm {
    /// `α_ε(t) = t`.
    Identity,
    /// `α_ε(t) = t + amp·ε·sin t`; requires `|amp·ε| < 1`.
    Sine { amp: f64 },
}

impl AlphaForm {
    pub fn profile(&self, eps: f64) -> Profile1d {
        match *self {
            AlphaForm::Identity => Profile1d::identity(),
            AlphaForm::Sine { amp } => {
                let a = amp * eps;
                Profile1d::new(move |t| [t + a * t.sin(), 1.0 + a * t.cos(), -a * t.sin()])
            }
        }
    }

    pub fn limit(&self) -> Profile1d {
        Profile1d::identity()
    }
}

/// Parametrized choices for `β_ε`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BetaForm {
    Zero,
    /// `β_ε(t) = amp·ε·sin(t/ε)`: uniformly `O(ε)` with `O(1)` oscillating derivative.
    Oscillating { amp: f64 },
}

impl BetaForm {
    pub fn profile(&self, eps: f64) -> Profile1d {
        match *self {
            BetaForm::Zero => Profile1d::zero(),
            BetaForm::Oscillating { amp } => Profile1d::new(move |t| {
                let (s, c) = (t / eps).sin_cos();
                [amp * eps * s, amp * c, -amp / eps * s]
            }),
        }
    }

    pub fn limit(&self) -> Profile1d {
        Profile1d::zero()
    }
}

const PROBE_HALF_WIDTH: f64 = 10.0;
const PROBE_POINTS: usize = 2001;

fn probe(alpha: &Profile1d, beta: &Profile1d) -> Result<()> {
    for k in 0..PROBE_POINTS {
        let t = -PROBE_HALF_WIDTH + 2.0 * PROBE_HALF_WIDTH * k as f64 / (PROBE_POINTS - 1) as f64;
        let a = alpha.jet(t);
        if !(a[1] > 0.0) {
            return Err(Error::InvalidFamily(format!(
                "alpha' = {} is not positive at t = {t}",
                a[1]
            )));
        }
        let b = beta.jet(t);
        if !b.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidFamily(format!("beta is not finite at t = {t}")));
        }
    }
    Ok(())
}

/// Component `A(x_k) · exp(sign · β(α(x₁)α(x₂)))` with exact gradient and Hessian.
fn product_stream(alpha: &Profile1d, beta: &Profile1d, k: usize, sign: f64) -> ScalarFieldSpec {
    let jets = {
        let (alpha, beta) = (alpha.clone(), beta.clone());
        Arc::new(move |x: &[f64]| StreamJet::new(&alpha, &beta, x, k, sign))
    };
    let (jv, jg, jh) = (jets.clone(), jets.clone(), jets);
    ScalarFieldSpec::new(
        2,
        move |x| jv(x).value,
        move |x, out| out.copy_from_slice(&jg(x).grad),
    )
    .with_hessian(move |x| {
        let h = jh(x).hess;
        DMatrix::from_row_slice(2, 2, &h)
    })
}

struct StreamJet {
    value: f64,
    grad: [f64; 2],
    hess: [f64; 4],
}

impl StreamJet {
    fn new(alpha: &Profile1d, beta: &Profile1d, x: &[f64], k: usize, sign: f64) -> Self {
        let a1 = alpha.jet(x[0]);
        let a2 = alpha.jet(x[1]);
        let s = a1[0] * a2[0];
        let ds = [a1[1] * a2[0], a1[0] * a2[1]];
        let dds = [a1[2] * a2[0], a1[1] * a2[1], a1[1] * a2[1], a1[0] * a2[2]];
        let bj = beta.jet(s);
        let h = (sign * bj[0]).exp();
        let h1 = sign * bj[1] * h;
        let h2 = (bj[1] * bj[1] + sign * bj[2]) * h;
        // outer factor depends on x_k only
        let p = if k == 0 { a1 } else { a2 };
        let dp = |i: usize| if i == k { p[1] } else { 0.0 };
        let ddp = |i: usize, j: usize| if i == k && j == k { p[2] } else { 0.0 };
        let dh = [h1 * ds[0], h1 * ds[1]];
        let mut grad = [0.0; 2];
        let mut hess = [0.0; 4];
        for i in 0..2 {
            grad[i] = dp(i) * h + p[0] * dh[i];
            for j in 0..2 {
                let ddh = h2 * ds[i] * ds[j] + h1 * dds[2 * i + j];
                hess[2 * i + j] = ddp(i, j) * h + dp(i) * dh[j] + dp(j) * dh[i] + p[0] * ddh;
            }
        }
        StreamJet {
            value: p[0] * h,
            grad,
            hess,
        }
    }
}

fn theta_field(alpha: &Profile1d) -> ScalarFieldSpec {
    let (av, ag) = (alpha.clone(), alpha.clone());
    ScalarFieldSpec::new(
        2,
        move |x| av.jet(x[0])[1] * av.jet(x[1])[1],
        move |x, out| {
            let (a1, a2) = (ag.jet(x[0]), ag.jet(x[1]));
            out[0] = a1[2] * a2[1];
            out[1] = a1[1] * a2[2];
        },
    )
}

/// Planar rectified system from explicit profiles and their ε → 0 limits.
///
/// `σ ≡ 1`, `b = R⊥∇w²`, `θ_ε(x) = α'_ε(x₁) α'_ε(x₂)`.
pub fn example31_from_profiles(
    alpha: &Profile1d,
    beta: &Profile1d,
    limit_alpha: &Profile1d,
    limit_beta: &Profile1d,
    eps: f64,
) -> Result<RectifiedSystem> {
    probe(alpha, beta)?;
    probe(limit_alpha, limit_beta)?;
    let w1 = product_stream(alpha, beta, 0, 1.0);
    let w2 = product_stream(alpha, beta, 1, -1.0);
    let one = ScalarFieldSpec::constant(2, 1.0);
    let b = drift_from_streamfields(std::slice::from_ref(&w2), &one)?.with_bounds(None, Some(0.0));
    let w = DiffeoSpec::from_components(vec![w1, w2.clone()])?;
    let limit_w = DiffeoSpec::from_components(vec![
        product_stream(limit_alpha, limit_beta, 0, 1.0),
        product_stream(limit_alpha, limit_beta, 1, -1.0),
    ])?;
    Ok(RectifiedSystem {
        family: "example31".into(),
        dim: 2,
        eps,
        w,
        sigma: one,
        b,
        theta: theta_field(alpha),
        sigma_bounds: SigmaBounds::from_samples(1.0, 1.0),
        limit_w,
        limit_theta: theta_field(limit_alpha),
        streams: vec![w2],
    })
}

pub fn example31_family(alpha: AlphaForm, beta: BetaForm, eps: f64) -> Result<RectifiedSystem> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let mut sys = example31_from_profiles(
        &alpha.profile(eps),
        &beta.profile(eps),
        &alpha.limit(),
        &beta.limit(),
        eps,
    )?;
    // both parametrized forms converge to (identity, zero), whose map is the identity
    sys.limit_w = DiffeoSpec::identity(2);
    Ok(sys)
}
