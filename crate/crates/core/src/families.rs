//! Named system families addressable from experiment configs.

use crate::error::{Error, Result};
use crate::fields::{example31_family, periodic_family, AlphaForm, BetaForm, PeriodicCellMap, RectifiedSystem};
use crate::flow::{cellular_perturbation, dynamic_flow_family, flow_map_diffeo, FlowHypotheses, IntegratorConfig, LimitDrift};
use crate::homogenize::{effective_from_cell, effective_from_limit_map, EffectiveCoefficients, ScalarCoefficient};
use crate::transport::{solve_transport, InitialDatum, SolutionSampler};

/// Default resolution of periodic cell averages.
pub const CELL_AVERAGE_RESOLUTION: usize = 64;

#[derive(Clone, Debug)]
pub enum FamilySpec {
    Identity { dim: usize },
    Example31 { alpha: AlphaForm, beta: BetaForm },
    Periodic { cell: PeriodicCellMap },
    Shear { gamma: f64 },
    DeltaGamma { delta: f64, gamma: f64 },
    Dynamic {
        limit: LimitDrift,
        kappa: f64,
        t_star: f64,
        hypotheses: FlowHypotheses,
    },
}

impl FamilySpec {
    pub fn name(&self) -> &'static str {
        match self {
            FamilySpec::Identity { .. } => "identity",
            FamilySpec::Example31 { .. } => "example31",
            FamilySpec::Periodic { .. } => "periodic",
            FamilySpec::Shear { .. } => "shear",
            FamilySpec::DeltaGamma { .. } => "deltagamma",
            FamilySpec::Dynamic { .. } => "dynamic",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FamilySpec::Identity { dim } => *dim,
            FamilySpec::Periodic { cell } => cell.dim(),
            _ => 2,
        }
    }

    /// Unit cell of the periodic families.
    pub fn cell(&self) -> Option<PeriodicCellMap> {
        match self {
            FamilySpec::Identity { dim } => Some(PeriodicCellMap::identity(*dim)),
            FamilySpec::Periodic { cell } => Some(cell.clone()),
            FamilySpec::Shear { gamma } => Some(PeriodicCellMap::shear(*gamma)),
            FamilySpec::DeltaGamma { delta, gamma } => {
                if !((delta * gamma).abs() < 1.0) {
                    return None;
                }
                Some(PeriodicCellMap::delta_gamma(*delta, *gamma))
            }
            _ => None,
        }
    }

    pub fn system(&self, eps: f64, cfg: &IntegratorConfig) -> Result<RectifiedSystem> {
        let mut sys = match self {
            FamilySpec::Example31 { alpha, beta } => example31_family(*alpha, *beta, eps)?,
            FamilySpec::Dynamic {
                limit,
                kappa,
                t_star,
                hypotheses,
            } => {
                let (limit, kappa) = (*limit, *kappa);
                let a_family = move |e: f64| cellular_perturbation(&limit.field(), kappa, e);
                dynamic_flow_family(&a_family, &limit.field(), *t_star, eps, cfg, hypotheses)?
            }
            FamilySpec::DeltaGamma { delta, gamma } if !((delta * gamma).abs() < 1.0) => {
                return Err(Error::InvalidFamily(format!(
                    "|delta*gamma| = {} must be below 1",
                    (delta * gamma).abs()
                )))
            }
            _ => {
                let cell = self.cell().expect("periodic family");
                periodic_family(&cell, eps)?
            }
        };
        sys.family = self.name().to_string();
        Ok(sys)
    }

    /// Effective coefficients: cell averages for periodic families, the cofactor formula otherwise.
    pub fn coefficients(&self, cfg: &IntegratorConfig) -> Result<EffectiveCoefficients> {
        match self {
            FamilySpec::Example31 { .. } => {
                let sys = self.system(1.0, cfg)?;
                Ok(effective_from_limit_map(&sys.limit_w, ScalarCoefficient::Constant(1.0)))
            }
            FamilySpec::Dynamic { limit, t_star, .. } => {
                let w = flow_map_diffeo(&limit.field(), *t_star, cfg);
                Ok(effective_from_limit_map(&w, ScalarCoefficient::Constant(1.0)))
            }
            _ => {
                let cell = self
                    .cell()
                    .ok_or_else(|| Error::InvalidFamily("degenerate cell".into()))?;
                Ok(effective_from_cell(&cell, CELL_AVERAGE_RESOLUTION)?.coefficients)
            }
        }
    }

    /// System at `eps` together with its transport solution from `u0`.
    pub fn solve(&self, eps: f64, u0: &InitialDatum, cfg: &IntegratorConfig) -> Result<(RectifiedSystem, SolutionSampler)> {
        let sys = self.system(eps, cfg)?;
        let sol = solve_transport(&sys.b, u0, cfg)?;
        Ok((sys, sol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_and_coefficients() {
        let cfg = IntegratorConfig::default();
        let dg = FamilySpec::DeltaGamma { delta: 0.3, gamma: 0.3 };
        assert_eq!(dg.system(0.1, &cfg).unwrap().family, "deltagamma");
        let c = dg.coefficients(&cfg).unwrap();
        assert!((c.sigma0.as_constant().unwrap() - 1.0).abs() < 1e-12);
        let e = FamilySpec::Example31 {
            alpha: AlphaForm::Identity,
            beta: BetaForm::Oscillating { amp: 1.0 },
        };
        assert_eq!(e.coefficients(&cfg).unwrap().constant_velocity().unwrap(), vec![1.0, 0.0]);
        assert!(FamilySpec::DeltaGamma { delta: 1.1, gamma: 1.0 }.system(0.1, &cfg).is_err());
    }
}
