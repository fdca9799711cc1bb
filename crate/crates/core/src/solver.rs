//! Strategy registry for the problem variants.
//!
//! Each variant's closed form lives behind the [`VariantSolver`] trait and
//! is registered by the same name the config JSON uses as its `kind` tag,
//! so the CLI selects a solver purely by name. Custom registries can add
//! further strategies without touching the built-in ones.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use crate::bernoulli::{phi_closed_form, phi_numeric, BernoulliCoefficients, TimeFn};
use crate::contract::{ContractSolution, SolveError};
use crate::model::{self, IntensitySpec, ModelParams, ProblemVariant};

/// A contract-solving strategy for one problem variant.
pub trait VariantSolver: Send + Sync {
    /// Registry name; equals the config `kind` tag.
    fn name(&self) -> &'static str;

    /// The variant this instance solves.
    fn variant(&self) -> ProblemVariant;

    /// Bernoulli coefficients of the variant's value ODE.
    fn coefficients(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<BernoulliCoefficients, SolveError>;

    /// The optimal contract.
    fn solve(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<ContractSolution, SolveError>;
}

type SolverCtor = fn(&ProblemVariant) -> Option<Box<dyn VariantSolver>>;

/// Name-keyed registry of solver constructors.
pub struct SolverRegistry {
    ctors: BTreeMap<&'static str, SolverCtor>,
}

impl SolverRegistry {
    pub fn empty() -> Self {
        SolverRegistry {
            ctors: BTreeMap::new(),
        }
    }

    /// Registry with the built-in strategies: `first_best`, `moral_hazard`,
    /// `mitigation`.
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register("first_best", |v| {
            matches!(v, ProblemVariant::FirstBest).then(|| Box::new(FirstBestSolver) as _)
        });
        reg.register("moral_hazard", |v| {
            matches!(v, ProblemVariant::MoralHazard).then(|| Box::new(MoralHazardSolver) as _)
        });
        reg.register("mitigation", |v| match v {
            ProblemVariant::Mitigation { theta, invest_cost } => Some(Box::new(MitigationSolver {
                theta: *theta,
                invest_cost: *invest_cost,
            }) as _),
            _ => None,
        });
        reg
    }

    pub fn register(&mut self, name: &'static str, ctor: SolverCtor) {
        self.ctors.insert(name, ctor);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.ctors.keys().copied().collect()
    }

    /// Instantiates the solver registered under the variant's kind name.
    pub fn create(&self, variant: &ProblemVariant) -> Result<Box<dyn VariantSolver>, SolveError> {
        let name = variant.kind_name();
        self.ctors
            .get(name)
            .and_then(|ctor| ctor(variant))
            .ok_or_else(|| SolveError::UnknownVariant(name.to_string()))
    }
}

static BUILTIN: LazyLock<SolverRegistry> = LazyLock::new(SolverRegistry::builtin);

/// Solver for `variant` from the built-in registry.
pub fn solver_for(variant: &ProblemVariant) -> Result<Box<dyn VariantSolver>, SolveError> {
    BUILTIN.create(variant)
}

/// `c2 = lambda (gamma_p + gamma_a) / gamma_a`, the jump coefficient shared
/// by all variants.
pub(crate) fn jump_c2(params: &ModelParams, lambda: f64) -> f64 {
    lambda * params.gamma_sum() / params.gamma_a
}

pub(crate) fn first_best_c1(params: &ModelParams, lambda: f64) -> f64 {
    let gp = params.gamma_p;
    let ga = params.gamma_a;
    gp * gp * ga / (2.0 * (gp + ga)) - gp / (2.0 * params.kappa) - jump_c2(params, lambda)
}

pub(crate) fn moral_hazard_c1(params: &ModelParams, lambda: f64) -> f64 {
    let gp = params.gamma_p;
    let ga = params.gamma_a;
    let ki = 1.0 / params.kappa;
    let s = gp + ga + ki;
    gp * gp * ga / (2.0 * s) - gp * ki * (gp + ki) / (2.0 * s) - jump_c2(params, lambda)
}

fn validated(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
) -> Result<(), SolveError> {
    let report = model::validate(params, intensity, variant);
    if report.is_ok() {
        Ok(())
    } else {
        Err(SolveError::Rejected(report))
    }
}

/// Coefficients for a variant whose `c1` depends on the intensity only
/// through the subtracted jump term.
fn standard_coefficients(
    params: &ModelParams,
    intensity: &IntensitySpec,
    c1_at: fn(&ModelParams, f64) -> f64,
) -> Result<BernoulliCoefficients, SolveError> {
    let horizon = params.horizon;
    let (c1, c2) = match intensity.as_constant() {
        Some(lambda) => (
            TimeFn::Constant(c1_at(params, lambda)),
            TimeFn::Constant(jump_c2(params, lambda)),
        ),
        None => {
            let p1 = *params;
            let i1 = intensity.clone();
            let p2 = *params;
            let i2 = intensity.clone();
            (
                TimeFn::varying(move |t| c1_at(&p1, i1.lambda_at(t))),
                TimeFn::varying(move |t| jump_c2(&p2, i2.lambda_at(t))),
            )
        }
    };
    Ok(BernoulliCoefficients::new(
        c1,
        c2,
        params.alpha(),
        horizon,
        intensity.breakpoints(horizon),
    )?)
}

/// Value multiplier for the standard (kink-free) variants: the closed form
/// when the coefficients are constant, otherwise backward RK4.
fn standard_phi(
    coef: &BernoulliCoefficients,
) -> Result<crate::bernoulli::PhiFunction, SolveError> {
    if coef.constant_c1().is_some() && coef.constant_c2().is_some() {
        Ok(phi_closed_form(coef)?)
    } else {
        Ok(phi_numeric(coef, coef.horizon() / 4096.0)?)
    }
}

/// Full risk sharing: observable effort dictated at `1/kappa`.
pub struct FirstBestSolver;

impl VariantSolver for FirstBestSolver {
    fn name(&self) -> &'static str {
        "first_best"
    }

    fn variant(&self) -> ProblemVariant {
        ProblemVariant::FirstBest
    }

    fn coefficients(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<BernoulliCoefficients, SolveError> {
        validated(params, intensity, &self.variant())?;
        standard_coefficients(params, intensity, first_best_c1)
    }

    fn solve(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<ContractSolution, SolveError> {
        let coef = self.coefficients(params, intensity)?;
        let phi0 = standard_phi(&coef)?;
        ContractSolution::new(
            self.variant(),
            *params,
            intensity.clone(),
            params.gamma_p / params.gamma_sum(),
            1.0 / params.kappa,
            phi0,
            None,
        )
    }
}

/// Hidden effort: the wage must make the dictated sensitivity incentive
/// compatible, so the agent best-responds with `Z*/kappa`.
pub struct MoralHazardSolver;

impl VariantSolver for MoralHazardSolver {
    fn name(&self) -> &'static str {
        "moral_hazard"
    }

    fn variant(&self) -> ProblemVariant {
        ProblemVariant::MoralHazard
    }

    fn coefficients(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<BernoulliCoefficients, SolveError> {
        validated(params, intensity, &self.variant())?;
        standard_coefficients(params, intensity, moral_hazard_c1)
    }

    fn solve(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<ContractSolution, SolveError> {
        let coef = self.coefficients(params, intensity)?;
        let phi0 = standard_phi(&coef)?;
        let ki = 1.0 / params.kappa;
        let z_star = (params.gamma_p + ki) / (params.gamma_p + params.gamma_a + ki);
        ContractSolution::new(
            self.variant(),
            *params,
            intensity.clone(),
            z_star,
            z_star / params.kappa,
            phi0,
            None,
        )
    }
}

/// Moral hazard with the post-halt investment option.
pub struct MitigationSolver {
    pub theta: f64,
    pub invest_cost: f64,
}

impl VariantSolver for MitigationSolver {
    fn name(&self) -> &'static str {
        "mitigation"
    }

    fn variant(&self) -> ProblemVariant {
        ProblemVariant::Mitigation {
            theta: self.theta,
            invest_cost: self.invest_cost,
        }
    }

    fn coefficients(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<BernoulliCoefficients, SolveError> {
        validated(params, intensity, &self.variant())?;
        let lambda = intensity.as_constant().ok_or(SolveError::NotApplicable(
            "the mitigation variant is solved for constant intensities only",
        ))?;
        let policy = crate::mitigation::MitigationPolicy::new(params, self.theta, self.invest_cost);
        Ok(crate::mitigation::mitigation_coefficients(
            params, lambda, &policy,
        ))
    }

    fn solve(
        &self,
        params: &ModelParams,
        intensity: &IntensitySpec,
    ) -> Result<ContractSolution, SolveError> {
        crate::mitigation::solve_mitigation(params, intensity, self.theta, self.invest_cost)
    }
}
