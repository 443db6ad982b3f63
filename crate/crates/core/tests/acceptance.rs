//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::process::{Command, ExitCode};
use std::time::Instant;

use homoflow::diagnostics::{
    convergence_sweep, default_dictionary, strong_l2_error, ConvergenceReport,
};
use homoflow::families::FamilySpec;
use homoflow::fields::{
    cross_product, determinant_residual, rectification_residual, AlphaForm, BetaForm, PeriodicCellMap,
    RectifiedSystem,
};
use homoflow::flow::{advect, semigroup_defect, FlowHypotheses, IntegratorConfig, LimitDrift};
use homoflow::fields::VectorFieldSpec;
use homoflow::grid::{AxisBox, QuadratureSpec};
use homoflow::homogenize::{effective_from_cell, CoefficientProvenance, EffectiveCoefficients};
use homoflow::linalg::{fd_jacobian, max_abs};
use homoflow::transport::{
    datum_lp_norm, lp_norms, solve_homogenized, solve_transport, HomogenizedForm, InitialDatum,
};
use homoflow::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String)>;

const EPS_LIST: [f64; 4] = [0.4, 0.2, 0.1, 0.05];
// Test-function radius 0.45·T must cover two cells at the coarsest ε.
const HORIZON: f64 = 2.0;

fn samples() -> Vec<Vec<f64>> {
    AxisBox::cube(2, 2.0).sample_uniform(1000, 2024)
}

fn analytic_families() -> Vec<(&'static str, FamilySpec, f64)> {
    vec![
        ("identity", FamilySpec::Identity { dim: 2 }, 0.1),
        (
            "example31",
            FamilySpec::Example31 {
                alpha: AlphaForm::Identity,
                beta: BetaForm::Oscillating { amp: 1.0 },
            },
            0.1,
        ),
        ("deltagamma", FamilySpec::DeltaGamma { delta: 0.3, gamma: 0.3 }, 0.1),
        ("shear", FamilySpec::Shear { gamma: 0.5 }, 0.1),
    ]
}

fn dynamic_family() -> FamilySpec {
    FamilySpec::Dynamic {
        limit: LimitDrift::TanhShear,
        kappa: 1.0,
        t_star: 1.0,
        hypotheses: FlowHypotheses::default(),
    }
}

fn identity_sweep(tol_analytic: f64, tol_flow: f64, residual: &dyn Fn(&RectifiedSystem, &[f64]) -> f64) -> Outcome {
    let cfg = IntegratorConfig::default();
    let pts = samples();
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, fam, eps) in analytic_families() {
        for e in [eps, 0.5 * eps] {
            let sys = fam.system(e, &cfg)?;
            let worst = pts.iter().map(|x| residual(&sys, x)).fold(0.0, f64::max);
            ok &= worst < tol_analytic;
            detail.push(format!("{name}@{e}={worst:.1e}"));
        }
    }
    let sys = dynamic_family().system(0.2, &cfg)?;
    let worst = pts.iter().map(|x| residual(&sys, x)).fold(0.0, f64::max);
    ok &= worst < tol_flow;
    detail.push(format!("dynamic@0.2={worst:.1e}"));
    Ok((ok, detail.join(" ")))
}

fn c1_rectification() -> Outcome {
    identity_sweep(1e-10, 1e-6, &|s, x| max_abs(&rectification_residual(s, x)))
}

fn c2_determinant() -> Outcome {
    identity_sweep(1e-10, 1e-6, &|s, x| determinant_residual(s, x).abs())
}

fn leibniz_det3(a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    // sum over permutations of sign · a_σ(0) b_σ(1) c_σ(2)
    const PERMS: [([usize; 3], f64); 6] = [
        ([0, 1, 2], 1.0),
        ([1, 2, 0], 1.0),
        ([2, 0, 1], 1.0),
        ([0, 2, 1], -1.0),
        ([2, 1, 0], -1.0),
        ([1, 0, 2], -1.0),
    ];
    PERMS.iter().map(|(p, s)| s * a[p[0]] * b[p[1]] * c[p[2]]).sum()
}

fn c3_cross_product() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let mut v = || (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>();
        let (a, b, c) = (v(), v(), v());
        let w = cross_product(&[&b, &c])?;
        let lhs: f64 = a.iter().zip(&w).map(|(x, y)| x * y).sum();
        let oracle = leibniz_det3(&a, &b, &c);
        let scale = [&a, &b, &c].iter().map(|u| u.iter().map(|x| x * x).sum::<f64>().sqrt()).product::<f64>();
        worst = worst.max((lhs - oracle).abs() / scale);
    }
    Ok((worst < 1e-12, format!("max relative defect {worst:.1e}")))
}

fn c4_liouville() -> Outcome {
    let cfg = IntegratorConfig::default();
    let starts = AxisBox::cube(2, 2.0).sample_uniform(50, 4);
    let dg = FamilySpec::DeltaGamma { delta: 0.3, gamma: 0.3 }.system(0.5, &cfg)?;
    let fields = [("deltagamma", dg.b.clone()), ("tanh_stretch", LimitDrift::TanhStretch.field())];
    let mut liouville = 0.0_f64;
    for (_, b) in &fields {
        for x in &starts {
            let s = advect(b, x, 2.0, &cfg, true)?;
            let d = s.jac.as_ref().expect("jacobian").determinant();
            liouville = liouville.max((d - s.logdet.expect("logdet").exp()).abs());
        }
    }
    let mut density = 0.0_f64;
    for x in &starts {
        let s = advect(&dg.b, x, 2.0, &cfg, true)?;
        let d = s.jac.as_ref().expect("jacobian").determinant();
        density = density.max((d - dg.sigma.value(x) / dg.sigma.value(&s.pos)).abs());
    }
    Ok((
        liouville < 1e-8 && density < 1e-6,
        format!("|det−exp(logdet)|={liouville:.1e} |det−σ(x0)/σ(pos)|={density:.1e}"),
    ))
}

fn c5_lp_stability() -> Outcome {
    let cfg = IntegratorConfig::default();
    let sys = FamilySpec::DeltaGamma { delta: 0.3, gamma: 0.3 }.system(0.1, &cfg)?;
    let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0)?;
    let sol = solve_transport(&sys.b, &u0, &cfg)?;
    let times = [0.5, 1.0, 2.0];
    let reach = sol.dependence_radius(2.0).expect("bounded drift");
    let bx = AxisBox::cube(2, reach + 0.05);
    let quad = QuadratureSpec::new(256, 1);
    let norms = lp_norms(&sol, &times, 2.0, &bx, &quad)?;
    let n0 = datum_lp_norm(&u0, 2.0, &bx, &quad)?;
    let c = sys.sigma_bounds.c();
    let bound = c * n0 * (1.0 + 1e-3);
    let ok = norms.iter().all(|n| *n <= bound);
    Ok((ok, format!("‖u0‖={n0:.9} norms={norms:.9?} bound={bound:.6} (c={c:.4})")))
}

fn c6_cell_averages() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, cell) in [
        ("deltagamma", PeriodicCellMap::delta_gamma(0.3, 0.3)),
        ("shear", PeriodicCellMap::shear(0.5)),
    ] {
        let h = effective_from_cell(&cell, 64)?;
        let s0 = h.coefficients.sigma0.as_constant().expect("constant σ0");
        let xi = h.coefficients.xi0.as_constant().expect("constant ξ0").to_vec();
        let err = (s0 - 1.0).abs().max((xi[0] - 1.0).abs()).max(xi[1].abs());
        ok &= err < 1e-10 && h.quasi_affinity_residual < 1e-10 && h.resolution == 64;
        detail.push(format!(
            "{name}: coeff err {err:.1e}, quasi-affinity {:.1e}, m={}",
            h.quasi_affinity_residual, h.resolution
        ));
    }
    Ok((ok, detail.join("; ")))
}

fn convergence_families() -> Vec<FamilySpec> {
    vec![
        FamilySpec::Example31 {
            alpha: AlphaForm::Identity,
            beta: BetaForm::Oscillating { amp: 1.0 },
        },
        FamilySpec::DeltaGamma { delta: 0.3, gamma: 0.3 },
    ]
}

fn weak_report(fam: &FamilySpec, cfg: &IntegratorConfig) -> Result<ConvergenceReport> {
    let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0)?;
    let coeffs = fam.coefficients(cfg)?;
    let v = coeffs.constant_velocity().expect("constant velocity");
    let dictionary = default_dictionary(&[0.0, 0.0], &v, HORIZON)?;
    let quad = QuadratureSpec::new(64, 64);
    let generator = |eps: f64| fam.solve(eps, &u0, cfg);
    convergence_sweep(&generator, &coeffs, &u0, &EPS_LIST, &dictionary, &quad, HORIZON, cfg)
}

fn c7_weak_convergence() -> Outcome {
    let cfg = IntegratorConfig::default();
    let mut ok = true;
    let mut detail = Vec::new();
    for fam in convergence_families() {
        let report = weak_report(&fam, &cfg)?;
        for e in &report.entries {
            let decreasing = e.errors.windows(2).all(|w| w[1] < w[0]);
            let ratio = e.errors[3] / e.errors[0];
            ok &= decreasing && ratio <= 0.25;
            detail.push(format!("{}/φ{}: ratio {ratio:.3}{}", fam.name(), e.phi_id, if decreasing { "" } else { " non-monotone" }));
        }
    }
    Ok((ok, detail.join(", ")))
}

fn c8_strong_convergence() -> Outcome {
    let cfg = IntegratorConfig::default();
    let u0 = InitialDatum::bump(vec![0.0, 0.0], 1.0, 1.0)?;
    let times: Vec<f64> = (0..16).map(|k| (k as f64 + 0.5) * HORIZON / 16.0).collect();
    let bx = AxisBox::around(&[0.0, 0.0], 1.0 + 1.25 * HORIZON);
    let quad = QuadratureSpec::new(256, 1);
    let mut ok = true;
    let mut detail = Vec::new();
    for fam in convergence_families() {
        let coeffs = fam.coefficients(&cfg)?;
        let limit = solve_homogenized(&coeffs, &u0, HomogenizedForm::Advective, &cfg)?;
        let mut errors = Vec::new();
        for &eps in &EPS_LIST {
            let (sys, sol) = fam.solve(eps, &u0, &cfg)?;
            errors.push(strong_l2_error(&sol, &limit, &sys, &bx, &times, &quad)?);
        }
        ok &= errors.windows(2).all(|w| w[1] < w[0]);
        let shown: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
        detail.push(format!("{}: [{}]", fam.name(), shown.join(", ")));
    }
    Ok((ok, format!("p=4, {}", detail.join("; "))))
}

fn c9_homogenized_forms() -> Outcome {
    let cfg = IntegratorConfig::default();
    let u0 = InitialDatum::bump(vec![0.2, -0.1], 1.0, 1.0)?;
    let sigma0 = 2.0;
    let coeffs = EffectiveCoefficients::constant(sigma0, vec![1.0, 0.5], CoefficientProvenance::CellAverage);
    let conservative = solve_homogenized(&coeffs, &u0.scaled(sigma0), HomogenizedForm::Conservative, &cfg)?;
    let advective = solve_homogenized(&coeffs, &u0, HomogenizedForm::Advective, &cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let t = rng.gen_range(0.0..2.0);
        let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let v = conservative.eval(t, &x)?;
        let u = advective.eval(t, &x)?;
        worst = worst.max((v - sigma0 * u).abs());
    }
    Ok((worst < 1e-12, format!("max |v − σ0 u| = {worst:.1e}")))
}

fn flow_checks(name: &str, b: &VectorFieldSpec, cfg: &IntegratorConfig) -> Result<(bool, String)> {
    let starts = AxisBox::cube(2, 2.0).sample_uniform(20, 10);
    let (mut jac_err, mut semigroup, mut inversion) = (0.0_f64, 0.0_f64, 0.0_f64);
    for x in &starts {
        let s = advect(b, x, 1.0, cfg, true)?;
        let jac = s.jac.expect("jacobian");
        let map = |y: &[f64]| advect(b, y, 1.0, cfg, false).map(|s| s.pos).unwrap_or_else(|_| vec![f64::NAN; 2]);
        let fd = fd_jacobian(&map, x, 1e-5);
        jac_err = jac_err.max((&jac - &fd).norm() / jac.norm());
        semigroup = semigroup.max(semigroup_defect(b, 0.3, 0.7, x, cfg)?);
        let back = advect(b, &s.pos, -1.0, cfg, false)?.pos;
        inversion = inversion.max(((back[0] - x[0]).powi(2) + (back[1] - x[1]).powi(2)).sqrt());
    }
    semigroup = semigroup.max(semigroup_defect(b, 0.3, 0.7, &[0.2, 0.4], cfg)?);
    // off the step grid, so the two routes take different steps
    semigroup = semigroup.max(semigroup_defect(b, 0.3037, 0.6911, &[0.2, 0.4], cfg)?);
    let ok = jac_err < 1e-4 && semigroup < 1e-8 && inversion < 1e-8;
    Ok((ok, format!("{name}: jac {jac_err:.1e} semigroup {semigroup:.1e} inversion {inversion:.1e}")))
}

fn c10_flow_map() -> Outcome {
    let cfg = IntegratorConfig::default();
    let shear = FamilySpec::Shear { gamma: 0.5 }.system(0.2, &cfg)?;
    let dg = FamilySpec::DeltaGamma { delta: 0.3, gamma: 0.3 }.system(0.2, &cfg)?;
    let (a, da) = flow_checks("shear", &shear.b, &cfg)?;
    let (b, db) = flow_checks("deltagamma", &dg.b, &cfg)?;
    Ok((a && b, format!("{da}; {db}")))
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir()?;
    let config = dir.path().join("sweep.cfg");
    std::fs::write(
        &config,
        "family.name = deltagamma\nfamily.delta = 0.3\nfamily.gamma = 0.3\neps_list = 0.4, 0.2\np = 4\n\
         quadrature.m = 24\nquadrature.time_nodes = 12\n",
    )?;
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_homoflow"))
            .args(["sweep", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .status()?;
        if !status.success() {
            return Ok((false, format!("sweep exited with {status}")));
        }
        outputs.push(std::fs::read(&out)?);
    }
    let same = outputs[0] == outputs[1] && !outputs[0].is_empty();
    Ok((same, format!("{} bytes per run", outputs[0].len())))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("1 rectification identity", c1_rectification),
        ("2 determinant identity", c2_determinant),
        ("3 cross product", c3_cross_product),
        ("4 liouville identities", c4_liouville),
        ("5 lp stability", c5_lp_stability),
        ("6 effective coefficients", c6_cell_averages),
        ("7 weak convergence", c7_weak_convergence),
        ("8 strong convergence", c8_strong_convergence),
        ("9 homogenized-equation equivalence", c9_homogenized_forms),
        ("10 flow-map correctness", c10_flow_map),
        ("11 determinism", c11_determinism),
    ];
    let mut failures = 0;
    for (name, run) in criteria {
        let start = Instant::now();
        let (pass, detail) = match run() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        println!(
            "{} criterion {name} ({:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} criteria failed");
        ExitCode::FAILURE
    }
}
