//! Convergence diagnostics: weak pairings against spacetime bumps, ε-sweeps with
//! fitted rates, σ-weighted strong `L²` errors, and the invariant suite of a system.

use crate::error::{Error, Result};
use crate::fields::{
    coercivity_check, cross_product, determinant_residual, rectification_residual,
    sigma_b_divergence, verify_layout, Derivatives, RectifiedSystem, ScalarFieldSpec,
};
use crate::flow::IntegratorConfig;
use crate::grid::{midpoints, AxisBox, QuadratureSpec};
use crate::homogenize::{EffectiveCoefficients, ScalarCoefficient};
use crate::linalg::{det, dot, max_abs};
use crate::transport::{mollifier, solve_homogenized, HomogenizedForm, InitialDatum, SolutionSampler};

/// `φ(t, x) = exp(1 − 1/(1 − ρ²))`, `ρ² = ((t − t₀)² + |x − x₀|²)/r²`; peak 1, support the ball.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub dim: usize,
    pub center_t: f64,
    pub center_x: Vec<f64>,
    pub radius: f64,
}

impl TestFunction {
    pub fn new(center_t: f64, center_x: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidArgument(format!("test function radius must be positive, got {radius}")));
        }
        Ok(TestFunction {
            dim: center_x.len(),
            center_t,
            center_x,
            radius,
        })
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center_x).map(|(a, b)| (a - b) * (a - b)).sum();
        let dt = t - self.center_t;
        mollifier((dt * dt + d2) / (self.radius * self.radius))
    }

    /// Spatial bounding box of the support.
    pub fn spatial_box(&self) -> AxisBox {
        AxisBox::around(&self.center_x, self.radius)
    }

    /// `‖φ‖_{L²}` over spacetime by the rule used for the pairings.
    pub fn l2_norm(&self, quad: &QuadratureSpec) -> f64 {
        let times = midpoints(self.center_t - self.radius, self.center_t + self.radius, quad.time_nodes);
        let bx = self.spatial_box();
        let mut s = 0.0;
        bx.for_each_midpoint(quad.m, |x| {
            for &t in &times {
                let v = self.eval(t, x);
                s += v * v;
            }
        });
        (s * bx.cell_volume(quad.m) * 2.0 * self.radius / quad.time_nodes as f64).sqrt()
    }

    fn check_horizon(&self, horizon: f64) -> Result<()> {
        if self.center_t - self.radius < 0.0 || self.center_t + self.radius > horizon {
            return Err(Error::InvalidArgument(format!(
                "test function support [{}, {}] leaves [0, {horizon}]",
                self.center_t - self.radius,
                self.center_t + self.radius
            )));
        }
        Ok(())
    }
}

/// Midpoint rule for `∫₀ᵀ∫ w(x) u(t, x) φ(t, x) dx dt` over the support of φ.
///
/// Nodes outside the support ball are skipped, and each spatial node integrates
/// only the time window on which φ is nonzero.
fn pairing(
    weight: Option<&ScalarFieldSpec>,
    sol: &SolutionSampler,
    phi: &TestFunction,
    quad: &QuadratureSpec,
    horizon: f64,
) -> Result<f64> {
    if phi.dim != sol.dim {
        return Err(Error::DimensionMismatch {
            expected: sol.dim,
            got: phi.dim,
        });
    }
    phi.check_horizon(horizon)?;
    let r = phi.radius;
    let times = midpoints(phi.center_t - r, phi.center_t + r, quad.time_nodes);
    let dt = 2.0 * r / quad.time_nodes as f64;
    let bx = phi.spatial_box();
    let mut vals = vec![0.0; times.len()];
    let mut total = 0.0;
    let mut failure = None;
    bx.for_each_midpoint(quad.m, |x| {
        if failure.is_some() {
            return;
        }
        let d2: f64 = x.iter().zip(&phi.center_x).map(|(a, b)| (a - b) * (a - b)).sum();
        let half2 = r * r - d2;
        if half2 <= 0.0 {
            return;
        }
        let half = half2.sqrt();
        let lo = times.partition_point(|t| *t <= phi.center_t - half);
        let hi = times.partition_point(|t| *t < phi.center_t + half);
        if lo >= hi {
            return;
        }
        let window = &times[lo..hi];
        if let Err(e) = sol.eval_times_into(x, window, &mut vals[..window.len()]) {
            failure = Some(e);
            return;
        }
        let w = weight.map_or(1.0, |s| s.value(x));
        let mut s = 0.0;
        for (t, u) in window.iter().zip(&vals) {
            s += u * phi.eval(*t, x);
        }
        total += w * s;
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(total * bx.cell_volume(quad.m) * dt)
}

/// `∫₀ᵀ∫ σ_ε u_ε φ dx dt`.
pub fn weak_pairing(
    sys: &RectifiedSystem,
    sol: &SolutionSampler,
    phi: &TestFunction,
    quad: &QuadratureSpec,
    horizon: f64,
) -> Result<f64> {
    pairing(Some(&sys.sigma), sol, phi, quad, horizon)
}

/// `∫₀ᵀ∫ v φ dx dt` for a density `v` that already carries its weight.
pub fn limit_pairing(sol: &SolutionSampler, phi: &TestFunction, quad: &QuadratureSpec, horizon: f64) -> Result<f64> {
    pairing(None, sol, phi, quad, horizon)
}

/// Default dictionary: five bumps at mid-horizon, a five-point stencil around the path of a
/// datum centered at `u0_center` transported with velocity `velocity`.
pub fn default_dictionary(u0_center: &[f64], velocity: &[f64], horizon: f64) -> Result<Vec<TestFunction>> {
    let t0 = 0.5 * horizon;
    let r = 0.45 * horizon;
    let base: Vec<f64> = u0_center.iter().zip(velocity).map(|(c, v)| c - t0 * v).collect();
    let n = base.len();
    let offsets: [(f64, f64); 5] = [(0.0, 0.0), (0.5, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.0, -0.5)];
    offsets
        .iter()
        .map(|&(a, b)| {
            let mut c = base.clone();
            c[0] += a;
            if n > 1 {
                c[1] += b;
            }
            TestFunction::new(t0, c, r)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergenceStatus {
    /// Errors strictly decreasing along the ε list.
    Converging,
    /// Not strictly decreasing, but the fitted rate is nonnegative.
    NonMonotone,
    /// Negative fitted rate.
    Diverging,
}

impl ConvergenceStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvergenceStatus::Converging => "converging",
            ConvergenceStatus::NonMonotone => "non-monotone",
            ConvergenceStatus::Diverging => "diverging",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairingSeries {
    pub phi_id: usize,
    pub pairing_eps: Vec<f64>,
    pub pairing_limit: f64,
    pub errors: Vec<f64>,
    pub fitted_rate: f64,
    pub status: ConvergenceStatus,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    pub family: String,
    pub eps_values: Vec<f64>,
    pub entries: Vec<PairingSeries>,
}

impl ConvergenceReport {
    pub fn all_converging(&self) -> bool {
        self.entries.iter().all(|e| e.status == ConvergenceStatus::Converging)
    }
}

/// Least-squares slope of `log E` against `log ε` (NaN when fewer than two positive errors).
pub fn fitted_rate(eps: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(errors)
        .filter(|(e, r)| **e > 0.0 && **r > 0.0)
        .map(|(e, r)| (e.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

pub fn classify(errors: &[f64], rate: f64) -> ConvergenceStatus {
    if errors.windows(2).all(|w| w[1] < w[0]) {
        ConvergenceStatus::Converging
    } else if rate < 0.0 {
        ConvergenceStatus::Diverging
    } else {
        ConvergenceStatus::NonMonotone
    }
}

/// Limit density `v = σ₀u` solving the conservative homogenized equation with `v⁰ = σ₀u⁰`.
pub fn limit_density(coeffs: &EffectiveCoefficients, u0: &InitialDatum, cfg: &IntegratorConfig) -> Result<SolutionSampler> {
    let v0 = match &coeffs.sigma0 {
        ScalarCoefficient::Constant(s) => u0.scaled(*s),
        ScalarCoefficient::Field(f) => u0.weighted(f),
    };
    solve_homogenized(coeffs, &v0, HomogenizedForm::Conservative, cfg)
}

pub fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("empty eps list".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0)) || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument(format!(
            "eps list must be positive and strictly decreasing, got {eps_list:?}"
        )));
    }
    Ok(())
}

/// Weak-pairing errors `E(ε) = |⟨σ_ε u_ε, φ⟩ − ⟨v, φ⟩|` for every φ and ε.
///
/// Failure to converge is recorded in the report, never raised.
#[allow(clippy::too_many_arguments)]
pub fn convergence_sweep(
    generator: &dyn Fn(f64) -> Result<(RectifiedSystem, SolutionSampler)>,
    coeffs: &EffectiveCoefficients,
    u0: &InitialDatum,
    eps_list: &[f64],
    dictionary: &[TestFunction],
    quad: &QuadratureSpec,
    horizon: f64,
    cfg: &IntegratorConfig,
) -> Result<ConvergenceReport> {
    check_eps_list(eps_list)?;
    let v = limit_density(coeffs, u0, cfg)?;
    let limits: Vec<f64> = dictionary
        .iter()
        .map(|phi| limit_pairing(&v, phi, quad, horizon))
        .collect::<Result<_>>()?;
    let mut pairings = vec![Vec::with_capacity(eps_list.len()); dictionary.len()];
    let mut family = String::new();
    for &eps in eps_list {
        let (sys, sol) = generator(eps)?;
        family = sys.family.clone();
        for (k, phi) in dictionary.iter().enumerate() {
            pairings[k].push(weak_pairing(&sys, &sol, phi, quad, horizon)?);
        }
    }
    let entries = pairings
        .into_iter()
        .zip(limits)
        .enumerate()
        .map(|(phi_id, (pairing_eps, pairing_limit))| {
            let errors: Vec<f64> = pairing_eps.iter().map(|p| (p - pairing_limit).abs()).collect();
            let rate = fitted_rate(eps_list, &errors);
            PairingSeries {
                phi_id,
                status: classify(&errors, rate),
                pairing_eps,
                pairing_limit,
                errors,
                fitted_rate: rate,
            }
        })
        .collect();
    Ok(ConvergenceReport {
        family,
        eps_values: eps_list.to_vec(),
        entries,
    })
}

/// `max_t (∫_K σ_ε (u_ε − u)² dx)^{1/2}` over the box `K` and ascending `times`.
pub fn strong_l2_error(
    sol_eps: &SolutionSampler,
    sol_limit: &SolutionSampler,
    sys: &RectifiedSystem,
    bx: &AxisBox,
    times: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    Ok(strong_l2_errors(sol_eps, sol_limit, sys, bx, times, quad)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Per-time values of the σ-weighted `L²(K)` distance.
pub fn strong_l2_errors(
    sol_eps: &SolutionSampler,
    sol_limit: &SolutionSampler,
    sys: &RectifiedSystem,
    bx: &AxisBox,
    times: &[f64],
    quad: &QuadratureSpec,
) -> Result<Vec<f64>> {
    if sol_eps.dim != sol_limit.dim || sol_eps.dim != bx.dim() {
        return Err(Error::DimensionMismatch {
            expected: sol_eps.dim,
            got: sol_limit.dim,
        });
    }
    let mut sums = vec![0.0; times.len()];
    let (mut a, mut b) = (vec![0.0; times.len()], vec![0.0; times.len()]);
    let mut failure = None;
    bx.for_each_midpoint(quad.m, |x| {
        if failure.is_some() {
            return;
        }
        let res = sol_eps
            .eval_times_into(x, times, &mut a)
            .and_then(|_| sol_limit.eval_times_into(x, times, &mut b));
        if let Err(e) = res {
            failure = Some(e);
            return;
        }
        if a.iter().chain(&b).all(|v| *v == 0.0) {
            return;
        }
        let s = sys.sigma.value(x);
        for k in 0..times.len() {
            let d = a[k] - b[k];
            sums[k] += s * d * d;
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let dv = bx.cell_volume(quad.m);
    Ok(sums.into_iter().map(|s| (s * dv).sqrt()).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantCheck {
    pub id: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantReport {
    pub family: String,
    pub eps: f64,
    pub items: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.items.iter().all(|i| i.pass)
    }

    pub fn item(&self, id: &str) -> Option<&InvariantCheck> {
        self.items.iter().find(|i| i.id == id)
    }
}

/// Residual tolerance for identities: `1e−10` with analytic derivatives, `1e−6` otherwise.
pub fn identity_tolerance(d: Derivatives) -> f64 {
    match d {
        Derivatives::Analytic => 1e-10,
        _ => 1e-6,
    }
}

/// Evaluates every structural identity of `sys` on `n` seeded samples from `bx`.
pub fn invariant_suite(sys: &RectifiedSystem, bx: &AxisBox, n: usize, seed: u64) -> InvariantReport {
    let tol = identity_tolerance(sys.derivatives());
    let samples = bx.sample_uniform(n, seed);
    let mut items = Vec::new();
    let check = |id, r: f64, tol: f64| InvariantCheck {
        id,
        max_residual: r,
        tolerance: tol,
        pass: r <= tol,
    };

    let layout = if verify_layout().is_ok() { 0.0 } else { f64::INFINITY };
    items.push(check("layout_convention", layout, 0.0));

    let worst = |f: &dyn Fn(&[f64]) -> f64| {
        samples
            .iter()
            .map(|x| f(x))
            .fold(0.0_f64, |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
    };
    items.push(check(
        "rectification",
        worst(&|x| max_abs(&rectification_residual(sys, x))),
        tol,
    ));
    items.push(check(
        "determinant_identity",
        worst(&|x| determinant_residual(sys, x).abs()),
        tol,
    ));

    let sb = sys.sigma_bounds;
    let valid_bounds = sb.lower > 0.0 && sb.lower <= 1.0 && sb.upper >= 1.0;
    let sigma_excess = worst(&|x| {
        let s = sys.sigma.value(x);
        (sb.lower - s).max(s - sb.upper).max(0.0)
    });
    items.push(InvariantCheck {
        id: "sigma_bounds",
        max_residual: sigma_excess,
        tolerance: 0.0,
        pass: valid_bounds && sigma_excess == 0.0,
    });

    let theta_min = samples
        .iter()
        .map(|x| sys.theta.value(x))
        .fold(f64::INFINITY, |m, v| if v.is_nan() { f64::NEG_INFINITY } else { m.min(v) });
    items.push(InvariantCheck {
        id: "theta_positive",
        max_residual: (-theta_min).max(0.0),
        tolerance: 0.0,
        pass: theta_min > 0.0,
    });

    items.push(check(
        "sigma_b_divergence",
        worst(&|x| sigma_b_divergence(sys, x).abs()),
        tol,
    ));

    if sys.dim >= 3 {
        // σb·ξ = det(ξ, ∇w², …, ∇w^N) for coordinate and diagonal probes ξ
        let probes: Vec<Vec<f64>> = (0..sys.dim)
            .map(|k| (0..sys.dim).map(|j| if j == k { 1.0 } else { 0.0 }).collect())
            .chain(std::iter::once(vec![1.0; sys.dim]))
            .collect();
        let r = worst(&|x| {
            let grads: Vec<Vec<f64>> = sys.streams.iter().map(|s| s.gradient(x)).collect();
            let refs: Vec<&[f64]> = grads.iter().map(|g| g.as_slice()).collect();
            let sb_x: Vec<f64> = sys.b.eval(x).iter().map(|v| v * sys.sigma.value(x)).collect();
            let cross = match cross_product(&refs) {
                Ok(c) => c,
                Err(_) => return f64::INFINITY,
            };
            probes
                .iter()
                .map(|xi| {
                    let mut m = nalgebra::DMatrix::zeros(sys.dim, sys.dim);
                    for i in 0..sys.dim {
                        m[(i, 0)] = xi[i];
                        for (k, g) in grads.iter().enumerate() {
                            m[(i, k + 1)] = g[i];
                        }
                    }
                    let d = det(&m);
                    (dot(&sb_x, xi) - d).abs().max((dot(&cross, xi) - d).abs())
                })
                .fold(0.0, f64::max)
        });
        items.push(check("cross_identity", r, tol));
    }

    let co = coercivity_check(&sys.w, if sys.dim == 2 { 64 } else { 200 });
    items.push(InvariantCheck {
        id: "properness",
        max_residual: co.worst_decrease,
        tolerance: 0.0,
        pass: co.passed(),
    });

    InvariantReport {
        family: sys.family.clone(),
        eps: sys.eps,
        items,
    }
}
