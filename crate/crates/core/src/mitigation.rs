//! The investment extension: restarting production at a degraded level.
//!
//! Upon a halt at time `tau` the principal may pay a sunk cost `i` to
//! continue production at level `theta` in (0, 1). The post-halt problem is
//! a classical shutdown-free moral-hazard problem whose value enters the
//! pre-halt HJB only through the continuation rate
//!
//! ```text
//! C_inv = (gamma_p + theta^2/kappa)^2 / (2 (gamma_p + gamma_a + theta^2/kappa)) - gamma_p / 2
//! ```
//!
//! and the factor `phi1(t, theta) = exp(-gamma_p C_inv (T - t))`. Investing
//! is worthwhile exactly when `C_inv (T - tau) > i`, i.e. before the cutoff
//! `t_max = T - i / C_inv`; at the indifference point the rule resolves to
//! not investing. The pre-halt value multiplier then solves the Bernoulli
//! ODE with the moral-hazard `c1` and the time-dependent
//! `c2(t) = lambda (gamma_p+gamma_a)/gamma_a * min(1, e^{gamma_p i} phi1(t))^alpha`,
//! which has a kink at `t_max`; the kink is registered as a quadrature
//! breakpoint.

use serde::Serialize;

use crate::bernoulli::{phi_integral_form, BernoulliCoefficients, TimeFn};
use crate::contract::{ContractSolution, SolveError};
use crate::model::{IntensitySpec, ModelParams, ProblemVariant};

/// Continuation value rate of the post-halt problem run at level `theta`.
///
/// Defined for `theta` in (0, 1]; `theta = 1` corresponds to a restart at
/// full capacity and is useful for benchmarks even though the mitigation
/// variant itself requires `theta < 1`.
pub fn c_inv(params: &ModelParams, theta: f64) -> f64 {
    let te = theta * theta / params.kappa;
    (params.gamma_p + te).powi(2) / (2.0 * (params.gamma_p + params.gamma_a + te))
        - params.gamma_p / 2.0
}

/// The latest halt time at which investing still pays: `T - i / C_inv`,
/// present only when `C_inv > 0` and `i < T C_inv`.
pub fn cutoff_time(horizon: f64, c_inv: f64, invest_cost: f64) -> Option<f64> {
    (c_inv > 0.0 && invest_cost < horizon * c_inv).then(|| horizon - invest_cost / c_inv)
}

/// Investment decision data for one mitigation contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MitigationPolicy {
    pub theta: f64,
    pub invest_cost: f64,
    pub c_inv: f64,
    /// Cutoff time, absent when investing is never optimal.
    pub t_max: Option<f64>,
    pub horizon: f64,
    pub gamma_p: f64,
}

impl MitigationPolicy {
    pub fn new(params: &ModelParams, theta: f64, invest_cost: f64) -> Self {
        let c = c_inv(params, theta);
        MitigationPolicy {
            theta,
            invest_cost,
            c_inv: c,
            t_max: cutoff_time(params.horizon, c, invest_cost),
            horizon: params.horizon,
            gamma_p: params.gamma_p,
        }
    }

    /// Post-halt value factor of the investing principal,
    /// `phi1(t, theta) = exp(-gamma_p C_inv (T - t))`.
    pub fn phi1(&self, t: f64) -> f64 {
        (-self.gamma_p * self.c_inv * (self.horizon - t)).exp()
    }

    /// `min(1, e^{gamma_p i} phi1(t, theta))`: the value factor of the
    /// optimally acting principal upon a halt at `t`, sunk cost included.
    pub fn post_default_value_factor(&self, t: f64) -> f64 {
        (self.gamma_p * (self.invest_cost - self.c_inv * (self.horizon - t)))
            .exp()
            .min(1.0)
    }

    /// Whether investing is optimal upon a halt at `tau`. Equivalent to
    /// `e^{gamma_p i} phi1(tau, theta) < 1`; ties resolve to not investing.
    pub fn decide_invest(&self, tau: f64) -> bool {
        self.t_max.is_some_and(|tm| tau < tm)
    }

    /// Post-halt output sensitivity of the restarted contract,
    /// `(gamma_p + theta^2/kappa) / (gamma_p + gamma_a + theta^2/kappa)`.
    pub fn post_default_sensitivity(&self, params: &ModelParams) -> f64 {
        let te = self.theta * self.theta / params.kappa;
        (params.gamma_p + te) / (params.gamma_p + params.gamma_a + te)
    }
}

/// Invest/no-invest decision rule for a halt at `tau`.
pub fn decide_invest(policy: &MitigationPolicy, tau: f64) -> bool {
    policy.decide_invest(tau)
}

/// Bernoulli coefficients of the mitigation variant (constant intensity).
pub(crate) fn mitigation_coefficients(
    params: &ModelParams,
    lambda: f64,
    policy: &MitigationPolicy,
) -> BernoulliCoefficients {
    let c1 = crate::solver::moral_hazard_c1(params, lambda);
    let c2_bar = crate::solver::jump_c2(params, lambda);
    let alpha = params.alpha();
    let pol = *policy;
    let c2 = TimeFn::varying(move |t| c2_bar * pol.post_default_value_factor(t).powf(alpha));
    let breakpoints = policy.t_max.into_iter().collect();
    BernoulliCoefficients::new(c1.into(), c2, alpha, params.horizon, breakpoints)
        .expect("validated parameters yield admissible coefficients")
}

/// Solves the moral-hazard problem with the mitigation option. The wage
/// keeps the moral-hazard sensitivity; only the compensation schedule
/// changes, to `K*(t) = log(phi0(t) / min(1, e^{gamma_p i} phi1(t))) /
/// (gamma_p + gamma_a)`.
pub fn solve_mitigation(
    params: &ModelParams,
    intensity: &IntensitySpec,
    theta: f64,
    invest_cost: f64,
) -> Result<ContractSolution, SolveError> {
    let variant = ProblemVariant::Mitigation { theta, invest_cost };
    let report = crate::model::validate(params, intensity, &variant);
    if !report.is_ok() {
        return Err(SolveError::Rejected(report));
    }
    let lambda = intensity.as_constant().ok_or(SolveError::NotApplicable(
        "the mitigation variant is solved for constant intensities only",
    ))?;
    let policy = MitigationPolicy::new(params, theta, invest_cost);
    let coef = mitigation_coefficients(params, lambda, &policy);
    let phi0 = phi_integral_form(&coef)?;
    let ki = 1.0 / params.kappa;
    let z_star = (params.gamma_p + ki) / (params.gamma_p + params.gamma_a + ki);
    ContractSolution::new(
        variant,
        *params,
        intensity.clone(),
        z_star,
        z_star / params.kappa,
        phi0,
        Some(policy),
    )
}
