//! Field algebra: scalar and vector fields with exact derivatives, the N-dimensional
//! cross product, the clockwise rotation `R⊥`, and the rectified systems
//! `(W_ε, σ_ε, b_ε, θ_ε)` built by the generator families in the submodules.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, det, dot, fd_gradient, fd_jacobian, fd_step, mat_vec, norm};

pub mod example31;
pub mod periodic;

pub use example31::{example31_family, AlphaForm, BetaForm, Profile1d};
pub use periodic::{periodic_family, PeriodicCellMap, TrigMode};

/// Largest dimension handled by the stack buffers on hot evaluation paths.
pub const MAX_DIM: usize = 8;

pub type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type IntoFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Smoothness {
    C1,
    C2,
}

/// How the derivatives attached to a field were obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Derivatives {
    Analytic,
    /// Jacobians carried along trajectories by the variational equation.
    FlowPropagated,
    /// Central differences with step `1e-5 · max(1, |x|)`; approximate.
    FiniteDifference,
}

impl Derivatives {
    /// The weaker of two derivative sources.
    pub fn combine(self, other: Derivatives) -> Derivatives {
        use Derivatives::*;
        match (self, other) {
            (FiniteDifference, _) | (_, FiniteDifference) => FiniteDifference,
            (FlowPropagated, _) | (_, FlowPropagated) => FlowPropagated,
            _ => Analytic,
        }
    }
}

/// Scalar field `ℝ^N → ℝ` with its gradient and, optionally, its Hessian.
#[derive(Clone)]
pub struct ScalarFieldSpec {
    dim: usize,
    value: ValueFn,
    gradient: IntoFn,
    hessian: Option<MatrixFn>,
    derivatives: Derivatives,
}

impl std::fmt::Debug for ScalarFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarFieldSpec")
            .field("dim", &self.dim)
            .field("smoothness", &self.smoothness())
            .field("derivatives", &self.derivatives)
            .finish()
    }
}

impl ScalarFieldSpec {
    pub fn new<V, G>(dim: usize, value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        ScalarFieldSpec {
            dim,
            value: Arc::new(value),
            gradient: Arc::new(gradient),
            hessian: None,
            derivatives: Derivatives::Analytic,
        }
    }

    /// Field known only through its values; gradient by central differences.
    pub fn from_values<V>(dim: usize, value: V) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        let value: ValueFn = Arc::new(value);
        let v = value.clone();
        ScalarFieldSpec {
            dim,
            value,
            gradient: Arc::new(move |x, out| {
                out.copy_from_slice(&fd_gradient(&|y: &[f64]| v(y), x));
            }),
            hessian: None,
            derivatives: Derivatives::FiniteDifference,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        ScalarFieldSpec::new(dim, move |_| c, |_, out| out.fill(0.0))
            .with_hessian(move |_| DMatrix::zeros(dim, dim))
    }

    /// The coordinate function `x ↦ x_k`.
    pub fn coordinate(dim: usize, k: usize) -> Self {
        ScalarFieldSpec::new(
            dim,
            move |x| x[k],
            move |_, out| {
                out.fill(0.0);
                out[k] = 1.0;
            },
        )
        .with_hessian(move |_| DMatrix::zeros(dim, dim))
    }

    pub fn with_hessian<H>(mut self, hessian: H) -> Self
    where
        H: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.hessian = Some(Arc::new(hessian));
        self
    }

    pub fn with_derivatives(mut self, derivatives: Derivatives) -> Self {
        self.derivatives = derivatives;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smoothness(&self) -> Smoothness {
        if self.hessian.is_some() {
            Smoothness::C2
        } else {
            Smoothness::C1
        }
    }

    pub fn derivatives(&self) -> Derivatives {
        self.derivatives
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim];
        (self.gradient)(x, &mut g);
        g
    }

    pub fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        self.hessian.as_ref().map(|h| h(x))
    }

    pub fn has_hessian(&self) -> bool {
        self.hessian.is_some()
    }
}

/// Vector field `ℝ^N → ℝ^N` with Jacobian (`J[(i, j)] = ∂a_i/∂x_j`) and divergence.
#[derive(Clone)]
pub struct VectorFieldSpec {
    dim: usize,
    eval: IntoFn,
    jacobian: MatrixFn,
    divergence: ValueFn,
    sup_bound: Option<f64>,
    div_bound: Option<f64>,
    derivatives: Derivatives,
}

impl std::fmt::Debug for VectorFieldSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorFieldSpec")
            .field("dim", &self.dim)
            .field("sup_bound", &self.sup_bound)
            .field("div_bound", &self.div_bound)
            .field("derivatives", &self.derivatives)
            .finish()
    }
}

impl VectorFieldSpec {
    /// Field with an exact Jacobian; the divergence is its trace.
    pub fn new<E, J>(dim: usize, eval: E, jacobian: J) -> Self
    where
        E: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        let jacobian: MatrixFn = Arc::new(jacobian);
        let jac = jacobian.clone();
        VectorFieldSpec {
            dim,
            eval: Arc::new(eval),
            jacobian,
            divergence: Arc::new(move |x| jac(x).trace()),
            sup_bound: None,
            div_bound: None,
            derivatives: Derivatives::Analytic,
        }
    }

    /// Field known only through its values; Jacobian and divergence by central differences.
    pub fn from_values<E>(dim: usize, eval: E) -> Self
    where
        E: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        let eval: IntoFn = Arc::new(eval);
        let e = eval.clone();
        let jacobian: MatrixFn = Arc::new(move |x| {
            let f = |y: &[f64]| {
                let mut out = vec![0.0; y.len()];
                e(y, &mut out);
                out
            };
            fd_jacobian(&f, x, fd_step(x))
        });
        let jac = jacobian.clone();
        VectorFieldSpec {
            dim,
            eval,
            jacobian,
            divergence: Arc::new(move |x| jac(x).trace()),
            sup_bound: None,
            div_bound: None,
            derivatives: Derivatives::FiniteDifference,
        }
    }

    pub fn constant(c: Vec<f64>) -> Self {
        let dim = c.len();
        let bound = norm(&c);
        VectorFieldSpec::new(
            dim,
            move |_, out| out.copy_from_slice(&c),
            move |_| DMatrix::zeros(dim, dim),
        )
        .with_bounds(Some(bound), Some(0.0))
    }

    pub fn with_divergence<D>(mut self, divergence: D) -> Self
    where
        D: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.divergence = Arc::new(divergence);
        self
    }

    pub fn with_bounds(mut self, sup_bound: Option<f64>, div_bound: Option<f64>) -> Self {
        self.sup_bound = sup_bound;
        self.div_bound = div_bound;
        self
    }

    pub fn with_derivatives(mut self, derivatives: Derivatives) -> Self {
        self.derivatives = derivatives;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn derivatives(&self) -> Derivatives {
        self.derivatives
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.sup_bound
    }

    pub fn div_bound(&self) -> Option<f64> {
        self.div_bound
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.eval)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.eval)(x, &mut out);
        out
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(x)
    }

    pub fn divergence(&self, x: &[f64]) -> f64 {
        (self.divergence)(x)
    }
}

/// Orientation-preserving map `W = (w¹, …, w^N)` with its Jacobian.
#[derive(Clone)]
pub struct DiffeoSpec {
    dim: usize,
    map: IntoFn,
    jacobian: MatrixFn,
    log_det: Option<ValueFn>,
    constant_jacobian: Option<DMatrix<f64>>,
    derivatives: Derivatives,
}

impl std::fmt::Debug for DiffeoSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffeoSpec")
            .field("dim", &self.dim)
            .field("linear", &self.constant_jacobian.is_some())
            .field("derivatives", &self.derivatives)
            .finish()
    }
}

impl DiffeoSpec {
    pub fn new<M, J>(dim: usize, map: M, jacobian: J, derivatives: Derivatives) -> Self
    where
        M: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        DiffeoSpec {
            dim,
            map: Arc::new(map),
            jacobian: Arc::new(jacobian),
            log_det: None,
            constant_jacobian: None,
            derivatives,
        }
    }

    /// `x ↦ Mx`.
    pub fn linear(m: DMatrix<f64>) -> Self {
        assert!(m.is_square());
        let dim = m.nrows();
        let mm = m.clone();
        let mj = m.clone();
        let mut d = DiffeoSpec::new(
            dim,
            move |x, out| {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = (0..dim).map(|j| mm[(i, j)] * x[j]).sum();
                }
            },
            move |_| mj.clone(),
            Derivatives::Analytic,
        );
        d.constant_jacobian = Some(m);
        d
    }

    pub fn identity(dim: usize) -> Self {
        DiffeoSpec::linear(DMatrix::identity(dim, dim))
    }

    /// Map whose k-th component is `components[k]`; Jacobian rows are their gradients.
    pub fn from_components(components: Vec<ScalarFieldSpec>) -> Result<Self> {
        let dim = components.len();
        for c in &components {
            if c.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: c.dim(),
                });
            }
        }
        let derivatives = components
            .iter()
            .fold(Derivatives::Analytic, |d, c| d.combine(c.derivatives()));
        let comps = Arc::new(components);
        let cm = comps.clone();
        Ok(DiffeoSpec::new(
            dim,
            move |x, out| {
                for (o, c) in out.iter_mut().zip(cm.iter()) {
                    *o = c.value(x);
                }
            },
            move |x| {
                let mut j = DMatrix::zeros(dim, dim);
                let mut g = [0.0; MAX_DIM];
                for (i, c) in comps.iter().enumerate() {
                    c.gradient_into(x, &mut g[..dim]);
                    for k in 0..dim {
                        j[(i, k)] = g[k];
                    }
                }
                j
            },
            derivatives,
        ))
    }

    pub fn with_log_det<L>(mut self, log_det: L) -> Self
    where
        L: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.log_det = Some(Arc::new(log_det));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn derivatives(&self) -> Derivatives {
        self.derivatives
    }

    pub fn constant_jacobian(&self) -> Option<&DMatrix<f64>> {
        self.constant_jacobian.as_ref()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        (self.map)(x, out)
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.map)(x, &mut out);
        out
    }

    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        (self.jacobian)(x)
    }

    /// Jacobian determinant; the Liouville volume factor `exp(logdet)` when one is attached.
    pub fn det(&self, x: &[f64]) -> f64 {
        match &self.log_det {
            Some(l) => l(x).exp(),
            None => det(&self.jacobian(x)),
        }
    }

    pub fn is_orientation_positive(&self, samples: &[Vec<f64>]) -> bool {
        samples.iter().all(|x| det(&self.jacobian(x)) > 0.0)
    }
}

/// Two-sided bounds `lower ≤ σ ≤ upper` for the invariant density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaBounds {
    pub lower: f64,
    pub upper: f64,
}

impl SigmaBounds {
    /// Sampled extremes, widened by 5% on each side.
    pub fn from_samples(min: f64, max: f64) -> Self {
        SigmaBounds {
            lower: min / 1.05,
            upper: max * 1.05,
        }
    }

    /// The single constant `c > 1` with `c⁻¹ ≤ σ ≤ c`.
    pub fn c(&self) -> f64 {
        self.upper.max(1.0 / self.lower)
    }

    pub fn contains(&self, sigma: f64) -> bool {
        self.lower <= sigma && sigma <= self.upper
    }
}

/// The ε-indexed bundle `(W_ε, σ_ε, b_ε, θ_ε)` together with its limit data `(W, θ₀)`.
#[derive(Clone, Debug)]
pub struct RectifiedSystem {
    pub family: String,
    pub dim: usize,
    pub eps: f64,
    pub w: DiffeoSpec,
    pub sigma: ScalarFieldSpec,
    pub b: VectorFieldSpec,
    pub theta: ScalarFieldSpec,
    pub sigma_bounds: SigmaBounds,
    pub limit_w: DiffeoSpec,
    pub limit_theta: ScalarFieldSpec,
    /// The stream functions `w², …, w^N` behind `σ_ε b_ε`.
    pub streams: Vec<ScalarFieldSpec>,
}

impl RectifiedSystem {
    /// Weakest derivative source among W, b and θ.
    pub fn derivatives(&self) -> Derivatives {
        self.w
            .derivatives()
            .combine(self.b.derivatives())
            .combine(self.theta.derivatives())
    }

    /// The trivial system W = id, σ ≡ 1, b ≡ e₁, θ ≡ 1.
    pub fn identity(dim: usize) -> Result<Self> {
        periodic_family(&PeriodicCellMap::identity(dim), 1.0).map(|mut s| {
            s.family = "identity".into();
            s
        })
    }
}

/// N-dimensional cross product of `N − 1` vectors in `ℝ^N`, `N ≥ 3`.
///
/// The result `w` satisfies `v · w = det(v, v₂, …, v_N)` for every `v`; it is
/// the cofactor expansion along the first column of `(·, v₂, …, v_N)`.
pub fn cross_product(vectors: &[&[f64]]) -> Result<Vec<f64>> {
    let n = vectors.len() + 1;
    if n < 3 {
        return Err(Error::InvalidArgument(
            "cross product needs N >= 3; use rot_perp in the plane".into(),
        ));
    }
    for v in vectors {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    Ok(cross_unchecked(vectors))
}

fn cross_unchecked(vectors: &[&[f64]]) -> Vec<f64> {
    let n = vectors.len() + 1;
    if n == 3 {
        let (a, b) = (vectors[0], vectors[1]);
        return vec![
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ];
    }
    // columns v₂..v_N
    let cols = DMatrix::from_fn(n, n - 1, |i, j| vectors[j][i]);
    (0..n)
        .map(|i| {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            sign * det(&cols.clone().remove_row(i))
        })
        .collect()
}

/// Clockwise rotation by 90°: `(v₁, v₂) ↦ (v₂, −v₁)`.
pub fn rot_perp(v: &[f64]) -> Result<[f64; 2]> {
    if v.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: v.len(),
        });
    }
    Ok([v[1], -v[0]])
}

/// Probe points on `[-2, 2]^N` used to reject non-positive densities at construction.
pub fn probe_grid(dim: usize) -> Vec<Vec<f64>> {
    let per_axis: usize = match dim {
        1 => 65,
        2 => 33,
        3 => 13,
        _ => 5,
    };
    let nodes: Vec<f64> = (0..per_axis)
        .map(|k| -2.0 + 4.0 * k as f64 / (per_axis - 1) as f64)
        .collect();
    let mut out = Vec::with_capacity(per_axis.pow(dim as u32));
    let mut idx = vec![0usize; dim];
    loop {
        out.push(idx.iter().map(|&i| nodes[i]).collect());
        let mut k = dim;
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_axis {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Stacked gradient cross `R⊥∇w²` (N = 2) or `∇w² × ⋯ × ∇w^N` (N ≥ 3).
fn gradient_cross(streams: &[ScalarFieldSpec], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    if n == 2 {
        let mut g = [0.0; 2];
        streams[0].gradient_into(x, &mut g);
        out[0] = g[1];
        out[1] = -g[0];
    } else {
        let grads: Vec<Vec<f64>> = streams.iter().map(|s| s.gradient(x)).collect();
        let refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
        out.copy_from_slice(&cross_unchecked(&refs));
    }
}

/// Jacobian of [`gradient_cross`] from the stream Hessians.
fn gradient_cross_jacobian(streams: &[ScalarFieldSpec], x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let hessians: Vec<DMatrix<f64>> = streams
        .iter()
        .map(|s| s.hessian(x).expect("stream hessian"))
        .collect();
    if n == 2 {
        let h = &hessians[0];
        return DMatrix::from_fn(2, 2, |i, j| if i == 0 { h[(1, j)] } else { -h[(0, j)] });
    }
    let grads: Vec<Vec<f64>> = streams.iter().map(|s| s.gradient(x)).collect();
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut col = vec![0.0; n];
        for (k, h) in hessians.iter().enumerate() {
            let hk: Vec<f64> = (0..n).map(|i| h[(i, j)]).collect();
            let refs: Vec<&[f64]> = grads
                .iter()
                .enumerate()
                .map(|(l, g)| if l == k { hk.as_slice() } else { g.as_slice() })
                .collect();
            for (c, v) in col.iter_mut().zip(cross_unchecked(&refs)) {
                *c += v;
            }
        }
        for i in 0..n {
            jac[(i, j)] = col[i];
        }
    }
    jac
}

/// Drift `b = (1/σ)·[R⊥∇w² | ∇w² × ⋯ × ∇w^N]` whose product `σb` is divergence free.
///
/// The Jacobian is exact when every stream carries a Hessian and σ has analytic
/// derivatives; otherwise it falls back to central differences and the field is
/// flagged [`Derivatives::FiniteDifference`].
pub fn drift_from_streamfields(
    streams: &[ScalarFieldSpec],
    sigma: &ScalarFieldSpec,
) -> Result<VectorFieldSpec> {
    let n = streams.len() + 1;
    if n < 2 {
        return Err(Error::InvalidArgument("need at least one stream field".into()));
    }
    if n > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension {n} exceeds {MAX_DIM}")));
    }
    for s in streams.iter().chain(std::iter::once(sigma)) {
        if s.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.dim(),
            });
        }
    }
    for p in probe_grid(n) {
        let v = sigma.value(&p);
        if !(v > 0.0) {
            return Err(Error::InvalidMeasure { point: p, value: v });
        }
    }

    let streams: Arc<Vec<ScalarFieldSpec>> = Arc::new(streams.to_vec());
    let sigma = sigma.clone();
    let (se, sige) = (streams.clone(), sigma.clone());
    let eval = move |x: &[f64], out: &mut [f64]| {
        gradient_cross(&se, x, out);
        let s = sige.value(x);
        for o in out.iter_mut() {
            *o /= s;
        }
    };

    let exact = streams.iter().all(|s| s.has_hessian())
        && sigma.derivatives() != Derivatives::FiniteDifference;
    if !exact {
        return Ok(VectorFieldSpec::from_values(n, eval));
    }
    let derivatives = streams
        .iter()
        .fold(sigma.derivatives(), |d, s| d.combine(s.derivatives()));
    let jacobian = move |x: &[f64]| {
        let mut g = vec![0.0; n];
        gradient_cross(&streams, x, &mut g);
        let dg = gradient_cross_jacobian(&streams, x);
        let s = sigma.value(x);
        let ds = sigma.gradient(x);
        DMatrix::from_fn(n, n, |i, j| dg[(i, j)] / s - g[i] * ds[j] / (s * s))
    };
    Ok(VectorFieldSpec::new(n, eval, jacobian).with_derivatives(derivatives))
}

/// `θ(x) = b(x) · ∇w¹(x)`.
pub fn theta_of(b: &VectorFieldSpec, w1: &ScalarFieldSpec) -> Result<ScalarFieldSpec> {
    if b.dim() != w1.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: w1.dim(),
        });
    }
    let n = b.dim();
    let (bv, wv) = (b.clone(), w1.clone());
    let value = move |x: &[f64]| dot(&bv.eval(x), &wv.gradient(x));
    if w1.has_hessian() && b.derivatives() != Derivatives::FiniteDifference {
        let (b, w1) = (b.clone(), w1.clone());
        let derivatives = b.derivatives().combine(w1.derivatives());
        Ok(ScalarFieldSpec::new(n, value, move |x, out| {
            // ∇θ = Dbᵀ∇w¹ + H(w¹) b
            let db = b.jacobian(x);
            let g = w1.gradient(x);
            let h = w1.hessian(x).expect("hessian");
            let bx = b.eval(x);
            for j in 0..n {
                out[j] = (0..n).map(|i| db[(i, j)] * g[i] + h[(j, i)] * bx[i]).sum();
            }
        })
        .with_derivatives(derivatives))
    } else {
        Ok(ScalarFieldSpec::from_values(n, value))
    }
}

/// `DW_εᵀ b_ε − θ_ε e₁`; in the row-per-component layout `DWᵀ` is the Jacobian `J`.
pub fn rectification_residual(sys: &RectifiedSystem, x: &[f64]) -> Vec<f64> {
    let j = sys.w.jacobian(x);
    let mut r = mat_vec(&j, &sys.b.eval(x));
    r[0] -= sys.theta.value(x);
    r
}

/// `det(DW_ε) − σ_ε θ_ε`.
pub fn determinant_residual(sys: &RectifiedSystem, x: &[f64]) -> f64 {
    det(&sys.w.jacobian(x)) - sys.sigma.value(x) * sys.theta.value(x)
}

/// Pointwise `div(σb) = σ div b + ∇σ · b` from the exact derivatives.
pub fn sigma_b_divergence(sys: &RectifiedSystem, x: &[f64]) -> f64 {
    sys.sigma.value(x) * sys.b.divergence(x) + dot(&sys.sigma.gradient(x), &sys.b.eval(x))
}

/// Outcome of the coercivity test standing in for uniform properness.
#[derive(Clone, Debug, PartialEq)]
pub struct CoercivityCheck {
    pub radii: Vec<f64>,
    /// `min_{|x| = R} |W(x)|` per radius.
    pub min_norms: Vec<f64>,
    /// Fitted growth rate `c₀`.
    pub slope: f64,
    /// Smallest `C` with `min_norms[k] ≥ R_k c₀ − C` for every k.
    pub offset: f64,
    /// Largest decrease between consecutive radii (0 when nondecreasing).
    pub worst_decrease: f64,
}

impl CoercivityCheck {
    pub fn passed(&self) -> bool {
        self.worst_decrease == 0.0 && self.slope > 0.0
    }
}

/// Coercivity surrogate for properness: `min_{|x|=R} |W(x)|` over `R ∈ {1, 2, 4, 8}`
/// must be nondecreasing with positive fitted growth.
pub fn coercivity_check(w: &DiffeoSpec, directions_per_sphere: usize) -> CoercivityCheck {
    let dim = w.dim();
    let radii = vec![1.0, 2.0, 4.0, 8.0];
    let dirs = sphere_directions(dim, directions_per_sphere);
    let min_norms: Vec<f64> = radii
        .iter()
        .map(|&r| {
            dirs.iter()
                .map(|d| {
                    let x: Vec<f64> = d.iter().map(|v| v * r).collect();
                    norm(&w.eval(&x))
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let n = radii.len() as f64;
    let mr = radii.iter().sum::<f64>() / n;
    let mm = min_norms.iter().sum::<f64>() / n;
    let sxy: f64 = radii.iter().zip(&min_norms).map(|(r, m)| (r - mr) * (m - mm)).sum();
    let sxx: f64 = radii.iter().map(|r| (r - mr) * (r - mr)).sum();
    let slope = sxy / sxx;
    let offset = radii
        .iter()
        .zip(&min_norms)
        .map(|(r, m)| r * slope - m)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst_decrease = min_norms
        .windows(2)
        .map(|p| (p[0] - p[1]).max(0.0))
        .fold(0.0, f64::max);
    CoercivityCheck {
        radii,
        min_norms,
        slope,
        offset,
        worst_decrease,
    }
}

/// Deterministic unit directions: equispaced on the circle, Fibonacci lattice otherwise.
fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = std::f64::consts::TAU * (k as f64 + 0.5) / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    let mut v = vec![0.0; dim];
                    v[0] = r * a.cos();
                    v[1] = r * a.sin();
                    v[2] = z;
                    v
                })
                .collect()
        }
    }
}

/// Confirms the Jacobian layout against the rectification identity on systems where
/// the transposed convention would fail (the shear cell has a non-symmetric Jacobian).
pub fn verify_layout() -> Result<()> {
    let identity = RectifiedSystem::identity(2)?;
    let shear = periodic_family(&PeriodicCellMap::shear(0.7), 1.0)?;
    let points = [[0.13, -0.41], [0.77, 0.25], [-1.3, 0.9]];
    for x in &points {
        for sys in [&identity, &shear] {
            if linalg::max_abs(&rectification_residual(sys, x)) > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "Jacobian layout check failed for '{}' at {x:?}",
                    sys.family
                )));
            }
        }
        // under the transposed layout the shear residual is visibly nonzero
        let jt = shear.w.jacobian(x).transpose();
        let mut r = mat_vec(&jt, &shear.b.eval(x));
        r[0] -= shear.theta.value(x);
        if linalg::max_abs(&r) < 1e-6 {
            return Err(Error::InvalidArgument(
                "layout check is not discriminating".into(),
            ));
        }
    }
    Ok(())
}
