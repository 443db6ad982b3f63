//! Experiment configs: flat `key = value` text with dotted section keys and `#` comments.
//!
//! Scalars are plain numbers or words; vectors are comma- or space-separated numbers;
//! lists of vectors (matrices, boxes, dictionary centers) separate entries with `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::diagnostics::{check_eps_list, TestFunction};
use crate::error::{Error, Result};
use crate::fields::{AlphaForm, BetaForm, PeriodicCellMap, TrigMode, MAX_DIM};
use crate::families::FamilySpec;
use crate::flow::{FlowHypotheses, IntegratorConfig, LimitDrift};
use crate::grid::{AxisBox, QuadratureSpec};
use crate::transport::InitialDatum;

/// Every recognised key with a one-line description, in canonical order.
pub const KEYS: &[(&str, &str)] = &[
    ("family.name", "identity | example31 | periodic | shear | deltagamma | dynamic"),
    ("family.delta", "deltagamma: amplitude of the x2-mode in w1 (|delta*gamma| < 1)"),
    ("family.gamma", "shear, deltagamma: amplitude of the x1-mode in w2"),
    ("family.alpha", "example31: alpha profile, identity | sine"),
    ("family.alpha_amp", "example31: a in alpha(t) = t + a*eps*sin t"),
    ("family.beta_amp", "example31: b in beta(t) = b*eps*sin(t/eps); 0 gives beta = 0"),
    ("family.matrix", "periodic: linear part M, rows separated by ';' (default identity)"),
    ("family.modes", "periodic: 'component:amplitude:k1,k2,...:phase' entries separated by ';'"),
    ("family.limit", "dynamic: limit drift, zero | shear | tanh_shear | tanh_stretch"),
    ("family.kappa", "dynamic: amplitude of the cellular perturbation"),
    ("family.t_star", "dynamic: flow time defining the rectifying map"),
    ("dim", "spatial dimension N"),
    ("eps_list", "strictly decreasing positive scales"),
    ("u0.center", "center of the initial bump"),
    ("u0.radius", "support radius of the initial bump"),
    ("u0.amplitude", "peak value of the initial bump"),
    ("p", "integrability exponent in (1, inf)"),
    ("horizon", "final time T"),
    ("integrator.h", "RK4 step size"),
    ("integrator.richardson", "true | false: re-run at h/2 and compare"),
    ("integrator.richardson_tol", "tolerance of the step-halving comparison"),
    ("quadrature.m", "midpoint nodes per spatial axis (default 256 in 2D, 64 in 3D)"),
    ("quadrature.time_nodes", "midpoint nodes in time (default 64)"),
    ("dictionary.count", "number of test functions in the default dictionary (at most 5)"),
    ("dictionary.centers", "explicit spatial centers at t = T/2, entries separated by ';'"),
    ("dictionary.radii", "spacetime radii, one per center or a single value"),
    ("output.path", "CSV destination when --out is not given"),
    ("seed", "seed for sampled checks"),
    ("check.samples", "number of sample points for the invariant suite"),
    ("check.box", "half-width of the sampling cube"),
    ("simulate.eps", "scale for simulate (default: first of eps_list)"),
    ("simulate.times", "output times"),
    ("simulate.box", "axis intervals 'lo hi' separated by ';'"),
    ("simulate.points", "grid points per axis, endpoints included"),
    ("sweep.box", "axis intervals of the strong-error domain K"),
    ("sweep.times", "times for the strong error (default: 16 slice midpoints of the horizon)"),
    ("homogenize.m", "starting cell resolution"),
    ("homogenize.box", "axis intervals for sampling coefficient fields"),
    ("homogenize.points", "grid points per axis for coefficient fields"),
];

#[derive(Clone, Debug, PartialEq)]
pub struct FamilyConfig {
    pub name: String,
    pub delta: f64,
    pub gamma: f64,
    pub alpha: String,
    pub alpha_amp: f64,
    pub beta_amp: f64,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub modes: Vec<TrigMode>,
    pub limit: String,
    pub kappa: f64,
    pub t_star: f64,
}

impl Default for FamilyConfig {
    fn default() -> Self {
        FamilyConfig {
            name: "identity".into(),
            delta: 0.3,
            gamma: 0.3,
            alpha: "identity".into(),
            alpha_amp: 1.0,
            beta_amp: 1.0,
            matrix: None,
            modes: Vec::new(),
            limit: "tanh_shear".into(),
            kappa: 1.0,
            t_star: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub dim: usize,
    pub eps_list: Vec<f64>,
    pub u0_center: Vec<f64>,
    pub u0_radius: f64,
    pub u0_amplitude: f64,
    pub p: f64,
    pub horizon: f64,
    pub integrator_h: f64,
    pub richardson: bool,
    pub richardson_tol: f64,
    pub quadrature_m: Option<usize>,
    pub quadrature_time_nodes: Option<usize>,
    pub dictionary_count: usize,
    pub dictionary_centers: Option<Vec<Vec<f64>>>,
    pub dictionary_radii: Option<Vec<f64>>,
    pub output_path: Option<String>,
    pub seed: u64,
    pub check_samples: usize,
    pub check_box: f64,
    pub simulate_eps: Option<f64>,
    pub simulate_times: Vec<f64>,
    pub simulate_box: Option<Vec<Vec<f64>>>,
    pub simulate_points: usize,
    pub sweep_box: Option<Vec<Vec<f64>>>,
    pub sweep_times: Option<Vec<f64>>,
    pub homogenize_m: usize,
    pub homogenize_box: Option<Vec<Vec<f64>>>,
    pub homogenize_points: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: FamilyConfig::default(),
            dim: 2,
            eps_list: vec![0.4, 0.2, 0.1, 0.05],
            u0_center: vec![0.0, 0.0],
            u0_radius: 1.0,
            u0_amplitude: 1.0,
            p: 2.0,
            horizon: 2.0,
            integrator_h: 1e-3,
            richardson: false,
            richardson_tol: 1e-8,
            quadrature_m: None,
            quadrature_time_nodes: None,
            dictionary_count: 5,
            dictionary_centers: None,
            dictionary_radii: None,
            output_path: None,
            seed: 0,
            check_samples: 1000,
            check_box: 2.0,
            simulate_eps: None,
            simulate_times: vec![0.0, 0.5, 1.0],
            simulate_box: None,
            simulate_points: 9,
            sweep_box: None,
            sweep_times: None,
            homogenize_m: 64,
            homogenize_box: None,
            homogenize_points: 5,
        }
    }
}

fn cfg_err(line: usize, key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_f64(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn parse_usize(s: &str) -> std::result::Result<usize, String> {
    s.trim().parse().map_err(|_| format!("'{s}' is not a nonnegative integer"))
}

fn parse_vec(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_f64)
        .collect()
}

fn parse_rows(s: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    s.split(';')
        .map(|r| r.trim())
        .filter(|r| !r.is_empty())
        .map(parse_vec)
        .collect()
}

fn parse_bool(s: &str) -> std::result::Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(format!("'{other}' is not a boolean")),
    }
}

fn parse_modes(s: &str) -> std::result::Result<Vec<TrigMode>, String> {
    s.split(';')
        .map(|r| r.trim())
        .filter(|r| !r.is_empty())
        .map(|entry| {
            let parts: Vec<&str> = entry.split(':').map(|p| p.trim()).collect();
            if parts.len() != 4 {
                return Err(format!("mode '{entry}' must be component:amplitude:k1,k2,...:phase"));
            }
            let component = parse_usize(parts[0])?;
            if component == 0 {
                return Err("mode components are numbered from 1".into());
            }
            let wavevector = parts[2]
                .split(',')
                .map(|k| k.trim().parse::<i32>().map_err(|_| format!("'{k}' is not an integer")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(TrigMode {
                component: component - 1,
                amplitude: parse_f64(parts[1])?,
                wavevector,
                phase: parse_f64(parts[3])?,
            })
        })
        .collect()
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ")
}

fn fmt_rows(rows: &[Vec<f64>]) -> String {
    rows.iter()
        .map(|r| r.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

fn fmt_modes(modes: &[TrigMode]) -> String {
    modes
        .iter()
        .map(|m| {
            let k = m.wavevector.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",");
            format!("{}:{}:{}:{}", m.component + 1, m.amplitude, k, m.phase)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn box_from_rows(rows: &[Vec<f64>]) -> Result<AxisBox> {
    if rows.iter().any(|r| r.len() != 2) {
        return Err(Error::InvalidArgument("box axes must be 'lo hi' pairs".into()));
    }
    AxisBox::new(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
}

impl ExperimentConfig {
    /// Parses and validates config text; errors carry the offending line and key.
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        let mut lines: BTreeMap<String, usize> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| cfg_err(line, content, "expected 'key = value'"))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.iter().any(|(k, _)| *k == key) {
                return Err(cfg_err(line, key, "unknown key"));
            }
            if lines.insert(key.to_string(), line).is_some() {
                return Err(cfg_err(line, key, "duplicate key"));
            }
            c.set(key, value).map_err(|m| cfg_err(line, key, m))?;
        }
        c.validate_with(&lines)?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let f = &mut self.family;
        match key {
            "family.name" => f.name = v.to_string(),
            "family.delta" => f.delta = parse_f64(v)?,
            "family.gamma" => f.gamma = parse_f64(v)?,
            "family.alpha" => f.alpha = v.to_string(),
            "family.alpha_amp" => f.alpha_amp = parse_f64(v)?,
            "family.beta_amp" => f.beta_amp = parse_f64(v)?,
            "family.matrix" => f.matrix = Some(parse_rows(v)?),
            "family.modes" => f.modes = parse_modes(v)?,
            "family.limit" => f.limit = v.to_string(),
            "family.kappa" => f.kappa = parse_f64(v)?,
            "family.t_star" => f.t_star = parse_f64(v)?,
            "dim" => self.dim = parse_usize(v)?,
            "eps_list" => self.eps_list = parse_vec(v)?,
            "u0.center" => self.u0_center = parse_vec(v)?,
            "u0.radius" => self.u0_radius = parse_f64(v)?,
            "u0.amplitude" => self.u0_amplitude = parse_f64(v)?,
            "p" => self.p = parse_f64(v)?,
            "horizon" => self.horizon = parse_f64(v)?,
            "integrator.h" => self.integrator_h = parse_f64(v)?,
            "integrator.richardson" => self.richardson = parse_bool(v)?,
            "integrator.richardson_tol" => self.richardson_tol = parse_f64(v)?,
            "quadrature.m" => self.quadrature_m = Some(parse_usize(v)?),
            "quadrature.time_nodes" => self.quadrature_time_nodes = Some(parse_usize(v)?),
            "dictionary.count" => self.dictionary_count = parse_usize(v)?,
            "dictionary.centers" => self.dictionary_centers = Some(parse_rows(v)?),
            "dictionary.radii" => self.dictionary_radii = Some(parse_vec(v)?),
            "output.path" => self.output_path = Some(v.to_string()),
            "seed" => self.seed = v.parse().map_err(|_| format!("'{v}' is not a seed"))?,
            "check.samples" => self.check_samples = parse_usize(v)?,
            "check.box" => self.check_box = parse_f64(v)?,
            "simulate.eps" => self.simulate_eps = Some(parse_f64(v)?),
            "simulate.times" => self.simulate_times = parse_vec(v)?,
            "simulate.box" => self.simulate_box = Some(parse_rows(v)?),
            "simulate.points" => self.simulate_points = parse_usize(v)?,
            "sweep.box" => self.sweep_box = Some(parse_rows(v)?),
            "sweep.times" => self.sweep_times = Some(parse_vec(v)?),
            "homogenize.m" => self.homogenize_m = parse_usize(v)?,
            "homogenize.box" => self.homogenize_box = Some(parse_rows(v)?),
            "homogenize.points" => self.homogenize_points = parse_usize(v)?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Checks documented ranges and cross-key consistency.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(&BTreeMap::new())
    }

    fn validate_with(&self, lines: &BTreeMap<String, usize>) -> Result<()> {
        let err = |key: &str, m: String| cfg_err(lines.get(key).copied().unwrap_or(0), key, m);
        let n = self.dim;
        if n < 2 || n > MAX_DIM {
            return Err(err("dim", format!("dimension must lie in 2..={MAX_DIM}, got {n}")));
        }
        check_eps_list(&self.eps_list).map_err(|e| err("eps_list", e.to_string()))?;
        if self.u0_center.len() != n {
            return Err(err("u0.center", format!("expected {n} coordinates")));
        }
        if !(self.u0_radius > 0.0) {
            return Err(err("u0.radius", "must be positive".into()));
        }
        if !(self.p > 1.0) {
            return Err(err("p", format!("p must lie in (1, inf), got {}", self.p)));
        }
        if !(self.horizon > 0.0) {
            return Err(err("horizon", "must be positive".into()));
        }
        if !(self.integrator_h > 0.0) {
            return Err(err("integrator.h", "step size must be positive".into()));
        }
        if !(self.richardson_tol > 0.0) {
            return Err(err("integrator.richardson_tol", "must be positive".into()));
        }
        if self.quadrature_m == Some(0) || self.quadrature_time_nodes == Some(0) {
            return Err(err("quadrature.m", "resolutions must be positive".into()));
        }
        if self.dictionary_centers.is_none() && !(1..=5).contains(&self.dictionary_count) {
            return Err(err("dictionary.count", "default dictionary has 1 to 5 elements".into()));
        }
        if let Some(centers) = &self.dictionary_centers {
            if centers.is_empty() || centers.iter().any(|c| c.len() != n) {
                return Err(err("dictionary.centers", format!("centers must have {n} coordinates")));
            }
            if let Some(r) = &self.dictionary_radii {
                if r.len() != 1 && r.len() != centers.len() {
                    return Err(err("dictionary.radii", "one radius or one per center".into()));
                }
            }
        }
        if let Some(r) = &self.dictionary_radii {
            if r.is_empty() || r.iter().any(|v| !(*v > 0.0)) {
                return Err(err("dictionary.radii", "radii must be positive".into()));
            }
        }
        if self.check_samples == 0 || !(self.check_box > 0.0) {
            return Err(err("check.samples", "need positive sample count and box".into()));
        }
        if let Some(e) = self.simulate_eps {
            if !(e > 0.0) {
                return Err(err("simulate.eps", "must be positive".into()));
            }
        }
        let strong_times = self.strong_times();
        for (key, times) in [("simulate.times", &self.simulate_times), ("sweep.times", &strong_times)] {
            if times.is_empty() || times.iter().any(|t| *t < 0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(err(key, "times must be nonnegative and strictly increasing".into()));
            }
        }
        if self.simulate_points < 1 || self.homogenize_points < 1 {
            return Err(err("simulate.points", "need at least one point per axis".into()));
        }
        if self.homogenize_m < 8 {
            return Err(err("homogenize.m", "cell resolution must be at least 8".into()));
        }
        for (key, rows) in [
            ("simulate.box", &self.simulate_box),
            ("sweep.box", &self.sweep_box),
            ("homogenize.box", &self.homogenize_box),
        ] {
            if let Some(rows) = rows {
                if rows.len() != n {
                    return Err(err(key, format!("expected {n} axis intervals")));
                }
                box_from_rows(rows).map_err(|e| err(key, e.to_string()))?;
            }
        }
        self.family_spec().map_err(|e| match e {
            Error::Config { key, message, .. } => err(&key, message),
            other => err("family.name", other.to_string()),
        })?;
        Ok(())
    }

    /// The configured family.
    pub fn family_spec(&self) -> Result<FamilySpec> {
        let f = &self.family;
        let planar = |name: &str| -> Result<()> {
            if self.dim != 2 {
                return Err(cfg_err(0, "dim", format!("family '{name}' is planar")));
            }
            Ok(())
        };
        match f.name.as_str() {
            "identity" => Ok(FamilySpec::Identity { dim: self.dim }),
            "example31" => {
                planar("example31")?;
                let alpha = match f.alpha.as_str() {
                    "identity" => AlphaForm::Identity,
                    "sine" => AlphaForm::Sine { amp: f.alpha_amp },
                    other => return Err(cfg_err(0, "family.alpha", format!("unknown alpha form '{other}'"))),
                };
                let beta = if f.beta_amp == 0.0 {
                    BetaForm::Zero
                } else {
                    BetaForm::Oscillating { amp: f.beta_amp }
                };
                Ok(FamilySpec::Example31 { alpha, beta })
            }
            "periodic" => {
                let n = self.dim;
                let m = match &f.matrix {
                    None => DMatrix::identity(n, n),
                    Some(rows) => {
                        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                            return Err(cfg_err(0, "family.matrix", format!("expected a {n}x{n} matrix")));
                        }
                        DMatrix::from_fn(n, n, |i, j| rows[i][j])
                    }
                };
                let cell = PeriodicCellMap::new(m, f.modes.clone())
                    .map_err(|e| cfg_err(0, "family.modes", e.to_string()))?;
                Ok(FamilySpec::Periodic { cell })
            }
            "shear" => {
                planar("shear")?;
                Ok(FamilySpec::Shear { gamma: f.gamma })
            }
            "deltagamma" => {
                planar("deltagamma")?;
                if !((f.delta * f.gamma).abs() < 1.0) {
                    return Err(cfg_err(
                        0,
                        "family.delta",
                        format!("|delta*gamma| = {} must be below 1", (f.delta * f.gamma).abs()),
                    ));
                }
                Ok(FamilySpec::DeltaGamma {
                    delta: f.delta,
                    gamma: f.gamma,
                })
            }
            "dynamic" => {
                planar("dynamic")?;
                let limit = LimitDrift::parse(&f.limit)
                    .ok_or_else(|| cfg_err(0, "family.limit", format!("unknown limit drift '{}'", f.limit)))?;
                if !(f.t_star.is_finite()) {
                    return Err(cfg_err(0, "family.t_star", "must be finite"));
                }
                Ok(FamilySpec::Dynamic {
                    limit,
                    kappa: f.kappa,
                    t_star: f.t_star,
                    hypotheses: FlowHypotheses {
                        seed: self.seed,
                        ..Default::default()
                    },
                })
            }
            other => Err(cfg_err(0, "family.name", format!("unknown family '{other}'"))),
        }
    }

    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            h: self.integrator_h,
            richardson_check: self.richardson,
            richardson_tol: self.richardson_tol,
        }
    }

    pub fn quadrature(&self) -> QuadratureSpec {
        let d = QuadratureSpec::default_for(self.dim);
        QuadratureSpec::new(
            self.quadrature_m.unwrap_or(d.m),
            self.quadrature_time_nodes.unwrap_or(d.time_nodes),
        )
    }

    pub fn initial_datum(&self) -> Result<InitialDatum> {
        InitialDatum::bump(self.u0_center.clone(), self.u0_radius, self.u0_amplitude)
    }

    /// Explicit dictionary if configured; `None` selects the default placement.
    pub fn explicit_dictionary(&self) -> Result<Option<Vec<TestFunction>>> {
        let Some(centers) = &self.dictionary_centers else {
            return Ok(None);
        };
        let t0 = 0.5 * self.horizon;
        let radii: Vec<f64> = match &self.dictionary_radii {
            None => vec![0.45 * self.horizon; centers.len()],
            Some(r) if r.len() == 1 => vec![r[0]; centers.len()],
            Some(r) => r.clone(),
        };
        centers
            .iter()
            .zip(radii)
            .map(|(c, r)| TestFunction::new(t0, c.clone(), r))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn simulate_box(&self) -> AxisBox {
        self.simulate_box
            .as_ref()
            .and_then(|r| box_from_rows(r).ok())
            .unwrap_or_else(|| AxisBox::cube(self.dim, 2.0))
    }

    pub fn homogenize_box(&self) -> AxisBox {
        self.homogenize_box
            .as_ref()
            .and_then(|r| box_from_rows(r).ok())
            .unwrap_or_else(|| AxisBox::cube(self.dim, 2.0))
    }

    /// Strong-error times; by default the midpoints of 16 equal slices of the horizon,
    /// which avoid the multiples of the dyadic ε list.
    pub fn strong_times(&self) -> Vec<f64> {
        self.sweep_times.clone().unwrap_or_else(|| {
            let n = 16;
            (0..n).map(|k| (k as f64 + 0.5) * self.horizon / n as f64).collect()
        })
    }

    /// Strong-error domain; by default a cube about the datum wide enough for unit speeds over the horizon.
    pub fn sweep_box(&self) -> AxisBox {
        self.sweep_box
            .as_ref()
            .and_then(|r| box_from_rows(r).ok())
            .unwrap_or_else(|| AxisBox::around(&self.u0_center, self.u0_radius + 1.25 * self.horizon))
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn serialize(&self) -> String {
        let f = &self.family;
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("family.name", f.name.clone());
        put("family.delta", format!("{}", f.delta));
        put("family.gamma", format!("{}", f.gamma));
        put("family.alpha", f.alpha.clone());
        put("family.alpha_amp", format!("{}", f.alpha_amp));
        put("family.beta_amp", format!("{}", f.beta_amp));
        if let Some(m) = &f.matrix {
            put("family.matrix", fmt_rows(m));
        }
        if !f.modes.is_empty() {
            put("family.modes", fmt_modes(&f.modes));
        }
        put("family.limit", f.limit.clone());
        put("family.kappa", format!("{}", f.kappa));
        put("family.t_star", format!("{}", f.t_star));
        put("dim", self.dim.to_string());
        put("eps_list", fmt_vec(&self.eps_list));
        put("u0.center", fmt_vec(&self.u0_center));
        put("u0.radius", format!("{}", self.u0_radius));
        put("u0.amplitude", format!("{}", self.u0_amplitude));
        put("p", format!("{}", self.p));
        put("horizon", format!("{}", self.horizon));
        put("integrator.h", format!("{}", self.integrator_h));
        put("integrator.richardson", self.richardson.to_string());
        put("integrator.richardson_tol", format!("{}", self.richardson_tol));
        if let Some(m) = self.quadrature_m {
            put("quadrature.m", m.to_string());
        }
        if let Some(m) = self.quadrature_time_nodes {
            put("quadrature.time_nodes", m.to_string());
        }
        put("dictionary.count", self.dictionary_count.to_string());
        if let Some(c) = &self.dictionary_centers {
            put("dictionary.centers", fmt_rows(c));
        }
        if let Some(r) = &self.dictionary_radii {
            put("dictionary.radii", fmt_vec(r));
        }
        if let Some(p) = &self.output_path {
            put("output.path", p.clone());
        }
        put("seed", self.seed.to_string());
        put("check.samples", self.check_samples.to_string());
        put("check.box", format!("{}", self.check_box));
        if let Some(e) = self.simulate_eps {
            put("simulate.eps", format!("{e}"));
        }
        put("simulate.times", fmt_vec(&self.simulate_times));
        if let Some(b) = &self.simulate_box {
            put("simulate.box", fmt_rows(b));
        }
        put("simulate.points", self.simulate_points.to_string());
        if let Some(b) = &self.sweep_box {
            put("sweep.box", fmt_rows(b));
        }
        if let Some(t) = &self.sweep_times {
            put("sweep.times", fmt_vec(t));
        }
        put("homogenize.m", self.homogenize_m.to_string());
        if let Some(b) = &self.homogenize_box {
            put("homogenize.box", fmt_rows(b));
        }
        put("homogenize.points", self.homogenize_points.to_string());
        s
    }
}

/// Help text listing every key.
pub fn keys_help() -> String {
    let mut s = String::from("Config keys (one 'key = value' per line, '#' starts a comment):\n");
    for (k, d) in KEYS {
        let _ = writeln!(s, "  {k:<28} {d}");
    }
    s
}
