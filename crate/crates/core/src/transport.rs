//! Transport `∂ₜu − b·∇u = 0` solved exactly along characteristics,
//! `u(t, x) = u⁰(Y(t, x))` with `Y` the forward flow of `b`, plus the homogenized solvers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{probe_grid, ScalarFieldSpec, Smoothness, ValueFn, VectorFieldSpec, MAX_DIM};
use crate::flow::{rk4_position_step, IntegratorConfig};
use crate::grid::{AxisBox, QuadratureSpec};
use crate::homogenize::{EffectiveCoefficients, ScalarCoefficient, VectorCoefficient};
use crate::linalg::norm;

/// Compactly supported initial datum; vanishes outside the ball `|x − center| ≤ radius`.
#[derive(Clone)]
pub struct InitialDatum {
    pub dim: usize,
    pub center: Vec<f64>,
    pub radius: f64,
    pub smoothness: Smoothness,
    eval: ValueFn,
}

impl std::fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InitialDatum")
            .field("dim", &self.dim)
            .field("center", &self.center)
            .field("radius", &self.radius)
            .finish()
    }
}

/// `exp(1 − 1/(1 − r²))` for `r < 1`, else 0; peak value 1 at `r = 0`.
pub fn mollifier(r2: f64) -> f64 {
    if r2 < 1.0 {
        (1.0 - 1.0 / (1.0 - r2)).exp()
    } else {
        0.0
    }
}

impl InitialDatum {
    /// Datum from an arbitrary function; values outside the support ball are forced to zero.
    pub fn new<F>(center: Vec<f64>, radius: f64, smoothness: Smoothness, eval: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("support radius must be positive, got {radius}")));
        }
        let c = center.clone();
        let r2 = radius * radius;
        Ok(InitialDatum {
            dim: center.len(),
            center,
            radius,
            smoothness,
            eval: Arc::new(move |x| {
                let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 >= r2 {
                    0.0
                } else {
                    eval(x)
                }
            }),
        })
    }

    /// `amplitude · exp(1 − 1/(1 − |x − center|²/radius²))`.
    pub fn bump(center: Vec<f64>, radius: f64, amplitude: f64) -> Result<Self> {
        let c = center.clone();
        let inv = 1.0 / (radius * radius);
        InitialDatum::new(center, radius, Smoothness::C2, move |x| {
            let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            amplitude * mollifier(d2 * inv)
        })
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Radius of a ball about the origin containing the support.
    pub fn support_radius(&self) -> f64 {
        norm(&self.center) + self.radius
    }

    /// `σ·u⁰` on the same support.
    pub fn weighted(&self, sigma: &ScalarFieldSpec) -> InitialDatum {
        let (u, s) = (self.eval.clone(), sigma.clone());
        InitialDatum {
            eval: Arc::new(move |x| u(x) * s.value(x)),
            ..self.clone()
        }
    }

    pub fn scaled(&self, c: f64) -> InitialDatum {
        let u = self.eval.clone();
        InitialDatum {
            eval: Arc::new(move |x| c * u(x)),
            ..self.clone()
        }
    }

    /// `u⁰/σ₀`.
    pub fn divided(&self, sigma0: &ScalarCoefficient) -> InitialDatum {
        match sigma0 {
            ScalarCoefficient::Constant(s) => self.scaled(1.0 / s),
            ScalarCoefficient::Field(f) => {
                let (u, s) = (self.eval.clone(), f.clone());
                InitialDatum {
                    eval: Arc::new(move |x| u(x) / s.value(x)),
                    ..self.clone()
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    EpsilonSolution,
    HomogenizedSolution,
}

/// Evaluates a solution at `x` for every time in `times`, writing into `out`.
pub type SolutionKernel = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) -> Result<()> + Send + Sync>;

/// Lazily evaluated solution `(t, x) ↦ u(t, x)`.
#[derive(Clone)]
pub struct SolutionSampler {
    pub dim: usize,
    pub provenance: Provenance,
    kernel: SolutionKernel,
    /// Support ball of the initial datum.
    pub support_center: Vec<f64>,
    pub support_radius: f64,
    /// Bound on the characteristic speed; `None` when unknown.
    pub speed: Option<f64>,
}

impl std::fmt::Debug for SolutionSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolutionSampler")
            .field("dim", &self.dim)
            .field("provenance", &self.provenance)
            .field("speed", &self.speed)
            .finish()
    }
}

impl SolutionSampler {
    pub fn new(
        dim: usize,
        provenance: Provenance,
        support_center: Vec<f64>,
        support_radius: f64,
        speed: Option<f64>,
        kernel: SolutionKernel,
    ) -> Self {
        SolutionSampler {
            dim,
            provenance,
            kernel,
            support_center,
            support_radius,
            speed,
        }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<f64> {
        let mut out = [0.0];
        (self.kernel)(x, &[t], &mut out)?;
        Ok(out[0])
    }

    /// Values at `x` for all `times` along one characteristic.
    pub fn eval_times_into(&self, x: &[f64], times: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        (self.kernel)(x, times, out)
    }

    pub fn eval_times(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; times.len()];
        self.eval_times_into(x, times, &mut out)?;
        Ok(out)
    }

    /// Radius about `support_center` outside of which `u(t, ·)` vanishes.
    pub fn dependence_radius(&self, t: f64) -> Option<f64> {
        self.speed.map(|s| self.support_radius + t.abs() * s)
    }

    /// Whether `bx` contains the full support of `u(t, ·)`; errors with the required radius otherwise.
    pub fn check_box(&self, t: f64, bx: &AxisBox) -> Result<()> {
        let r = self.dependence_radius(t).ok_or_else(|| {
            Error::InvalidArgument("solution has no speed bound; domain of dependence unknown".into())
        })?;
        let inside = bx
            .lo
            .iter()
            .zip(&bx.hi)
            .zip(&self.support_center)
            .all(|((lo, hi), c)| *lo <= c - r && *hi >= c + r);
        if inside {
            Ok(())
        } else {
            Err(Error::TruncatedDomain {
                required_radius: r + norm(&self.support_center),
            })
        }
    }
}

/// `u(t, x) = u⁰(Y(t, x))` with `Y` the forward flow of `b`.
///
/// With a speed bound `S = sup|b|`, characteristics that can no longer reach the
/// support of `u⁰` by the last requested time are abandoned and report 0.
pub fn solve_transport(b: &VectorFieldSpec, u0: &InitialDatum, cfg: &IntegratorConfig) -> Result<SolutionSampler> {
    if b.dim() != u0.dim {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            got: u0.dim,
        });
    }
    if b.dim() > MAX_DIM {
        return Err(Error::InvalidArgument(format!("dimension exceeds {MAX_DIM}")));
    }
    let speed = b.sup_bound();
    let (field, datum, cfg) = (b.clone(), u0.clone(), *cfg);
    let kernel: SolutionKernel = Arc::new(move |x, times, out| characteristic(&field, &datum, speed, &cfg, x, times, out));
    Ok(SolutionSampler::new(
        u0.dim,
        Provenance::EpsilonSolution,
        u0.center.clone(),
        u0.radius,
        speed,
        kernel,
    ))
}

fn characteristic(
    field: &VectorFieldSpec,
    datum: &InitialDatum,
    speed: Option<f64>,
    cfg: &IntegratorConfig,
    x: &[f64],
    times: &[f64],
    out: &mut [f64],
) -> Result<()> {
    let n = x.len();
    let ascending = times.windows(2).all(|w| w[0] <= w[1]) && times.first().map_or(true, |t| *t >= 0.0);
    let t_last = times.last().copied().unwrap_or(0.0);
    let dist = |y: &[f64]| -> f64 {
        y.iter()
            .zip(&datum.center)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    };
    // whether the characteristic at time s can still reach supp u⁰ by t_last
    let reachable = |y: &[f64], s: f64| match speed {
        Some(sp) if ascending => dist(y) - (t_last - s) * sp <= datum.radius,
        _ => true,
    };
    let mut y = [0.0; MAX_DIM];
    y[..n].copy_from_slice(x);
    if !reachable(&y[..n], 0.0) {
        out.fill(0.0);
        return Ok(());
    }
    let mut t = 0.0;
    for (k, &tk) in times.iter().enumerate() {
        let dt = tk - t;
        let steps = cfg.steps_for(dt);
        if steps > 0 {
            let h = dt / steps as f64;
            for s in 0..steps {
                rk4_position_step(field, &mut y[..n], h);
                if !y[..n].iter().all(|v| v.is_finite()) {
                    return Err(Error::BlowUp {
                        time: t + (s + 1) as f64 * h,
                    });
                }
                if !reachable(&y[..n], t + (s + 1) as f64 * h) {
                    out[k..].fill(0.0);
                    return Ok(());
                }
            }
        }
        t = tk;
        out[k] = datum.value(&y[..n]);
    }
    Ok(())
}

/// Quadrature approximation of `‖u(t, ·)‖_{L^p}` over `bx`, which must contain the
/// domain of dependence so that the truncation is exact.
pub fn lp_norm(sol: &SolutionSampler, t: f64, p: f64, bx: &AxisBox, quad: &QuadratureSpec) -> Result<f64> {
    Ok(lp_norms(sol, &[t], p, bx, quad)?[0])
}

/// [`lp_norm`] at several ascending times, sharing one characteristic per node.
pub fn lp_norms(sol: &SolutionSampler, times: &[f64], p: f64, bx: &AxisBox, quad: &QuadratureSpec) -> Result<Vec<f64>> {
    check_exponent(p)?;
    for &t in times {
        sol.check_box(t, bx)?;
    }
    let mut sums = vec![0.0; times.len()];
    let mut vals = vec![0.0; times.len()];
    let mut failure = None;
    bx.for_each_midpoint(quad.m, |x| {
        if failure.is_some() {
            return;
        }
        match sol.eval_times_into(x, times, &mut vals) {
            Ok(()) => {
                for (s, v) in sums.iter_mut().zip(&vals) {
                    *s += v.abs().powf(p);
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let dv = bx.cell_volume(quad.m);
    Ok(sums.into_iter().map(|s| (s * dv).powf(1.0 / p)).collect())
}

/// `‖u⁰‖_{L^p}` over `bx` by the same rule.
pub fn datum_lp_norm(u0: &InitialDatum, p: f64, bx: &AxisBox, quad: &QuadratureSpec) -> Result<f64> {
    check_exponent(p)?;
    let mut s = 0.0;
    bx.for_each_midpoint(quad.m, |x| s += u0.value(x).abs().powf(p));
    Ok((s * bx.cell_volume(quad.m)).powf(1.0 / p))
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("exponent p must lie in (1, ∞), got {p}")))
    }
}

/// Which homogenized equation to solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HomogenizedForm {
    /// `∂ₜv − ξ₀·∇(v/σ₀) = 0` for the limit density `v`.
    Conservative,
    /// `∂ₜu − (ξ₀/σ₀)·∇u = 0`.
    Advective,
}

/// Solves the homogenized equation for initial datum `datum` (`v⁰` or `u⁰` per `form`).
///
/// The conservative form goes through `r = v/σ₀`, which solves the advective form.
pub fn solve_homogenized(
    coeffs: &EffectiveCoefficients,
    datum: &InitialDatum,
    form: HomogenizedForm,
    cfg: &IntegratorConfig,
) -> Result<SolutionSampler> {
    if coeffs.dim != datum.dim {
        return Err(Error::DimensionMismatch {
            expected: coeffs.dim,
            got: datum.dim,
        });
    }
    check_sigma0(&coeffs.sigma0, coeffs.dim)?;
    let inner = match form {
        HomogenizedForm::Advective => datum.clone(),
        HomogenizedForm::Conservative => datum.divided(&coeffs.sigma0),
    };
    let advective = advective_solution(coeffs, &inner, cfg)?;
    let sol = match form {
        HomogenizedForm::Advective => advective,
        HomogenizedForm::Conservative => {
            let sigma0 = coeffs.sigma0.clone();
            let r = advective.kernel.clone();
            let kernel: SolutionKernel = Arc::new(move |x, times, out| {
                r(x, times, out)?;
                let s = sigma0.value(x);
                for o in out.iter_mut() {
                    *o *= s;
                }
                Ok(())
            });
            SolutionSampler { kernel, ..advective }
        }
    };
    Ok(SolutionSampler {
        provenance: Provenance::HomogenizedSolution,
        ..sol
    })
}

fn check_sigma0(sigma0: &ScalarCoefficient, dim: usize) -> Result<()> {
    match sigma0 {
        ScalarCoefficient::Constant(s) if !(*s > 0.0) => {
            Err(Error::InvalidCoefficients(format!("sigma0 = {s} is not positive")))
        }
        ScalarCoefficient::Constant(_) => Ok(()),
        ScalarCoefficient::Field(f) => {
            for p in probe_grid(dim) {
                let v = f.value(&p);
                if !(v > 0.0) {
                    return Err(Error::InvalidCoefficients(format!("sigma0 = {v} at {p:?}")));
                }
            }
            Ok(())
        }
    }
}

fn advective_solution(coeffs: &EffectiveCoefficients, datum: &InitialDatum, cfg: &IntegratorConfig) -> Result<SolutionSampler> {
    if let Some(c) = coeffs.constant_velocity() {
        let speed = norm(&c);
        let u = datum.clone();
        let kernel: SolutionKernel = Arc::new(move |x, times, out| {
            let mut y = [0.0; MAX_DIM];
            let n = x.len();
            for (o, &t) in out.iter_mut().zip(times) {
                for i in 0..n {
                    y[i] = x[i] + t * c[i];
                }
                *o = u.value(&y[..n]);
            }
            Ok(())
        });
        return Ok(SolutionSampler::new(
            datum.dim,
            Provenance::HomogenizedSolution,
            datum.center.clone(),
            datum.radius,
            Some(speed),
            kernel,
        ));
    }
    let velocity = effective_velocity(coeffs);
    solve_transport(&velocity, datum, cfg)
}

/// `ξ₀/σ₀` as a vector field.
pub fn effective_velocity(coeffs: &EffectiveCoefficients) -> VectorFieldSpec {
    let n = coeffs.dim;
    let (xi, s) = (coeffs.xi0.clone(), coeffs.sigma0.clone());
    let sup = match (&coeffs.xi0, &coeffs.sigma0) {
        (VectorCoefficient::Constant(c), ScalarCoefficient::Constant(s)) => Some(norm(c) / s),
        (VectorCoefficient::Field(f), ScalarCoefficient::Constant(s)) => f.sup_bound().map(|b| b / s),
        _ => None,
    };
    VectorFieldSpec::from_values(n, move |x, out| {
        let v = xi.value(x);
        let sx = s.value(x);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi / sx;
        }
    })
    .with_bounds(sup, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homogenize::CoefficientProvenance;

    fn e1_shift(t: f64, x: &[f64]) -> Vec<f64> {
        vec![x[0] + t, x[1]]
    }

    #[test]
    fn bump_support_and_peak() {
        let u = InitialDatum::bump(vec![0.5, 0.0], 1.0, 2.0).unwrap();
        assert_eq!(u.value(&[0.5, 0.0]), 2.0);
        assert_eq!(u.value(&[1.5, 0.0]), 0.0);
        assert_eq!(u.value(&[2.0, 1.0]), 0.0);
        assert!(u.value(&[1.4, 0.0]) > 0.0);
        assert_eq!(u.support_radius(), 1.5);
    }

    #[test]
    fn constant_drift_translates() {
        let b = VectorFieldSpec::constant(vec![1.0, 0.0]);
        let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let sol = solve_transport(&b, &u0, &IntegratorConfig::default()).unwrap();
        for (t, x) in [(0.5, [-0.3, 0.2]), (1.0, [-1.2, 0.1]), (2.0, [0.0, 0.0])] {
            let expect = u0.value(&e1_shift(t, &x));
            assert!((sol.eval(t, &x).unwrap() - expect).abs() < 1e-12);
        }
        let vals = sol.eval_times(&[-0.5, 0.0], &[0.0, 0.5, 1.0]).unwrap();
        assert!((vals[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_drift_is_stationary_and_early_exit_is_exact() {
        let b = VectorFieldSpec::constant(vec![0.0, 0.0]).with_bounds(Some(0.0), Some(0.0));
        let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let sol = solve_transport(&b, &u0, &IntegratorConfig::default()).unwrap();
        assert_eq!(sol.eval(1.0, &[0.3, 0.3]).unwrap(), u0.value(&[0.3, 0.3]));
        assert_eq!(sol.eval(1.0, &[3.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn translation_preserves_lp_norm() {
        let b = VectorFieldSpec::constant(vec![1.0, 0.0]).with_bounds(Some(1.0), Some(0.0));
        let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let sol = solve_transport(&b, &u0, &IntegratorConfig::default()).unwrap();
        let bx = AxisBox::cube(2, 2.5);
        let q = QuadratureSpec::new(160, 1);
        let n0 = datum_lp_norm(&u0, 2.0, &bx, &q).unwrap();
        let n1 = lp_norm(&sol, 1.0, 2.0, &bx, &q).unwrap();
        assert!((n1 - n0).abs() < 1e-6 * n0);
        assert!(matches!(
            lp_norm(&sol, 2.0, 2.0, &bx, &q),
            Err(Error::TruncatedDomain { .. })
        ));
        assert!(lp_norm(&sol, 1.0, 1.0, &bx, &q).is_err());
    }

    #[test]
    fn homogenized_conservative_with_heavier_density() {
        let c = EffectiveCoefficients::constant(2.0, vec![1.0, 0.0], CoefficientProvenance::CellAverage);
        let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        let v = solve_homogenized(&c, &u0.scaled(2.0), HomogenizedForm::Conservative, &IntegratorConfig::default()).unwrap();
        let x = [-0.3, 0.1];
        let t = 0.8;
        let expect = 2.0 * u0.value(&[x[0] + t / 2.0, x[1]]);
        assert!((v.eval(t, &x).unwrap() - expect).abs() < 1e-14);
        let bad = EffectiveCoefficients::constant(0.0, vec![1.0, 0.0], CoefficientProvenance::CellAverage);
        assert!(matches!(
            solve_homogenized(&bad, &u0, HomogenizedForm::Advective, &IntegratorConfig::default()),
            Err(Error::InvalidCoefficients(_))
        ));
    }
}
