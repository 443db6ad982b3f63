//! The four config-driven workflows, each producing a deterministic CSV table.

use crate::config::ExperimentConfig;
use crate::diagnostics::{convergence_sweep, default_dictionary, invariant_suite, strong_l2_error};
use crate::error::{Error, Result};
use crate::families::FamilySpec;
use crate::grid::AxisBox;
use crate::homogenize::{effective_from_cell, VectorCoefficient};
use crate::transport::{solve_homogenized, HomogenizedForm};

pub const CSV_VERSION_LINE: &str = "# homoflow-csv v1";

/// Floats are written with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: Vec<String>) -> Self {
        CsvTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Version comment line, header, then rows.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(CSV_VERSION_LINE.as_bytes());
        out.push(b'\n');
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(&self.header).map_err(io)?;
        for r in &self.rows {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.to_string()))
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k].as_str()).collect())
    }
}

fn names(fixed: &[&str]) -> Vec<String> {
    fixed.iter().map(|s| s.to_string()).collect()
}

fn axis_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|k| format!("{prefix}{k}")).collect()
}

/// Outcome of `check`: the table plus whether every invariant passed.
pub struct CheckOutcome {
    pub table: CsvTable,
    pub all_pass: bool,
}

/// One row per invariant per system, for every ε in the list.
pub fn run_check(cfg: &ExperimentConfig) -> Result<CheckOutcome> {
    let family = cfg.family_spec()?;
    let icfg = cfg.integrator();
    let bx = AxisBox::cube(cfg.dim, cfg.check_box);
    let mut table = CsvTable::new(names(&["family", "eps", "invariant_id", "max_residual", "tolerance", "pass"]));
    let mut all_pass = true;
    for &eps in &cfg.eps_list {
        let sys = family.system(eps, &icfg)?;
        let rep = invariant_suite(&sys, &bx, cfg.check_samples, cfg.seed);
        for item in &rep.items {
            all_pass &= item.pass;
            table.push(vec![
                rep.family.clone(),
                fmt_float(eps),
                item.id.to_string(),
                fmt_float(item.max_residual),
                fmt_float(item.tolerance),
                item.pass.to_string(),
            ]);
        }
    }
    Ok(CheckOutcome { table, all_pass })
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Tensor grid with endpoints, first axis outermost.
fn grid_points(bx: &AxisBox, n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = (0..bx.dim()).map(|k| linspace(bx.lo[k], bx.hi[k], n)).collect();
    let mut out = vec![Vec::new()];
    for axis in &axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Samples `u_ε`, `σ_ε` and `σ_ε u_ε` on the configured spacetime grid, time-major.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let family = cfg.family_spec()?;
    let icfg = cfg.integrator();
    let eps = cfg.simulate_eps.unwrap_or(cfg.eps_list[0]);
    let u0 = cfg.initial_datum()?;
    let (sys, sol) = family.solve(eps, &u0, &icfg)?;
    let points = grid_points(&cfg.simulate_box(), cfg.simulate_points);
    let times = &cfg.simulate_times;
    let mut values = Vec::with_capacity(points.len());
    for x in &points {
        values.push((sys.sigma.value(x), sol.eval_times(x, times)?));
    }
    let mut header = names(&["t"]);
    header.extend(axis_names("x", cfg.dim));
    header.extend(names(&["u_eps", "sigma_eps", "v_eps"]));
    let mut table = CsvTable::new(header);
    for (k, &t) in times.iter().enumerate() {
        for (x, (s, u)) in points.iter().zip(&values) {
            let mut row = vec![fmt_float(t)];
            row.extend(x.iter().map(|v| fmt_float(*v)));
            row.extend([fmt_float(u[k]), fmt_float(*s), fmt_float(s * u[k])]);
            table.push(row);
        }
    }
    Ok(table)
}

/// Effective coefficients: a single row for constant coefficients, grid samples for fields.
pub fn run_homogenize(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let family = cfg.family_spec()?;
    let icfg = cfg.integrator();
    let n = cfg.dim;
    let mut header = names(&["family", "provenance"]);
    header.extend(axis_names("x", n));
    header.push("sigma0".into());
    header.extend(axis_names("xi0_", n));
    header.extend(names(&["det_m", "quasi_affinity_residual"]));
    let mut table = CsvTable::new(header);
    let empty_x = || vec![String::new(); n];

    if let Some(cell) = family.cell() {
        let h = effective_from_cell(&cell, cfg.homogenize_m)?;
        let c = &h.coefficients;
        let mut row = vec![family.name().to_string(), c.provenance.as_str().to_string()];
        row.extend(empty_x());
        row.push(fmt_float(c.sigma0.as_constant().expect("cell average")));
        row.extend(c.xi0.as_constant().expect("cell average").iter().map(|v| fmt_float(*v)));
        row.extend([fmt_float(h.det_m), fmt_float(h.quasi_affinity_residual)]);
        table.push(row);
        return Ok(table);
    }

    let c = family.coefficients(&icfg)?;
    let prov = c.provenance.as_str().to_string();
    match &c.xi0 {
        VectorCoefficient::Constant(xi) => {
            let mut row = vec![family.name().to_string(), prov];
            row.extend(empty_x());
            row.push(fmt_float(c.sigma0.value(&vec![0.0; n])));
            row.extend(xi.iter().map(|v| fmt_float(*v)));
            row.extend([String::new(), String::new()]);
            table.push(row);
        }
        VectorCoefficient::Field(f) => {
            for x in grid_points(&cfg.homogenize_box(), cfg.homogenize_points) {
                let mut row = vec![family.name().to_string(), prov.clone()];
                row.extend(x.iter().map(|v| fmt_float(*v)));
                row.push(fmt_float(c.sigma0.value(&x)));
                row.extend(f.eval(&x).iter().map(|v| fmt_float(*v)));
                row.extend([String::new(), String::new()]);
                table.push(row);
            }
        }
    }
    Ok(table)
}

/// Weak and strong convergence table, φ-major then ε in list order.
///
/// The strong error is reported only for `p > 2`, the regime in which strong
/// convergence is asserted; otherwise the cell is empty.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let family = cfg.family_spec()?;
    if matches!(family, FamilySpec::Dynamic { .. }) {
        return Err(Error::Config {
            line: 0,
            key: "family.name".into(),
            message: "sweep is not supported for the dynamic family (flow-map drifts are too costly to transport)".into(),
        });
    }
    let icfg = cfg.integrator();
    let quad = cfg.quadrature();
    let u0 = cfg.initial_datum()?;
    let coeffs = family.coefficients(&icfg)?;
    let dictionary = match cfg.explicit_dictionary()? {
        Some(d) => d,
        None => {
            let v = coeffs
                .constant_velocity()
                .ok_or_else(|| Error::InvalidCoefficients("default dictionary needs constant coefficients".into()))?;
            let mut d = default_dictionary(&cfg.u0_center, &v, cfg.horizon)?;
            d.truncate(cfg.dictionary_count);
            d
        }
    };
    let generator = |eps: f64| family.solve(eps, &u0, &icfg);
    let report = convergence_sweep(&generator, &coeffs, &u0, &cfg.eps_list, &dictionary, &quad, cfg.horizon, &icfg)?;

    let strong: Vec<Option<f64>> = if cfg.p > 2.0 {
        let limit = solve_homogenized(&coeffs, &u0, HomogenizedForm::Advective, &icfg)?;
        let bx = cfg.sweep_box();
        let times = cfg.strong_times();
        cfg.eps_list
            .iter()
            .map(|&eps| {
                let (sys, sol) = family.solve(eps, &u0, &icfg)?;
                strong_l2_error(&sol, &limit, &sys, &bx, &times, &quad).map(Some)
            })
            .collect::<Result<_>>()?
    } else {
        vec![None; cfg.eps_list.len()]
    };

    let mut table = CsvTable::new(names(&[
        "family",
        "eps",
        "phi_id",
        "pairing_eps",
        "pairing_limit",
        "weak_error",
        "strong_l2_error",
        "fitted_rate",
        "status",
    ]));
    for e in &report.entries {
        for (k, &eps) in report.eps_values.iter().enumerate() {
            table.push(vec![
                family.name().to_string(),
                fmt_float(eps),
                e.phi_id.to_string(),
                fmt_float(e.pairing_eps[k]),
                fmt_float(e.pairing_limit),
                fmt_float(e.errors[k]),
                strong[k].map(fmt_float).unwrap_or_default(),
                fmt_float(e.fitted_rate),
                e.status.as_str().to_string(),
            ]);
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_has_seventeen_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn grid_is_row_major() {
        let g = grid_points(&AxisBox::cube(2, 1.0), 2);
        assert_eq!(g, vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![1.0, -1.0], vec![1.0, 1.0]]);
    }

    #[test]
    fn identity_check_passes() {
        let cfg = ExperimentConfig::parse("check.samples = 50\neps_list = 1").unwrap();
        let out = run_check(&cfg).unwrap();
        assert!(out.all_pass);
        let bytes = out.table.to_bytes().unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("# homoflow-csv v1\nfamily,eps,invariant_id,max_residual,tolerance,pass\n"));
    }

    #[test]
    fn homogenize_anisotropic_periodic() {
        let cfg = ExperimentConfig::parse(
            "family.name = periodic\nfamily.matrix = 1 0; 0 2\nfamily.modes = 1:0.05:0,1:0; 2:0.1:1,0:0.2",
        )
        .unwrap();
        let t = run_homogenize(&cfg).unwrap();
        let det: f64 = t.column("det_m").unwrap()[0].parse().unwrap();
        let s0: f64 = t.column("sigma0").unwrap()[0].parse().unwrap();
        assert_eq!(det, 2.0);
        assert!((s0 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn dynamic_sweep_is_a_config_error() {
        let cfg = ExperimentConfig::parse("family.name = dynamic").unwrap();
        assert!(matches!(run_sweep(&cfg), Err(Error::Config { .. })));
    }
}
