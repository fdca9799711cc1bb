//! Assembled optimal contracts and their derived analytics.
//!
//! A [`ContractSolution`] bundles the constant controls (`Z*`, `a*`), the
//! value multiplier `phi0`, and the default-compensation schedule
//! `K*(t) = log(phi0(t) / m(t)) / (gamma_p + gamma_a)` where `m` is the
//! post-default value factor (identically 1 outside the mitigation
//! variant). On top of the solution this module provides the analytics
//! that only hold for a constant intensity:
//!
//! * [`k_star_expectation_form`] - the alternative representation
//!   `K*(t) = log E[exp(alpha (c1+c2) ((T-t) ^ tau))] / gamma_a` with
//!   `tau ~ Exp(lambda)`, evaluated by its exact two-term decomposition.
//!   It must agree with the `log phi0` route to near machine precision;
//!   the two are computed along genuinely different floating-point paths.
//! * [`sign_of_k`] - `sign(K*) = sign(c1 + c2)`, constant over the whole
//!   contracting period.
//! * [`risk_share_decomposition`] - the risk-share part of the wage,
//!   `f(t) = K*(t) + int_0^t lambda/gamma_a (e^{-gamma_a K*(s)} - 1) ds`,
//!   is affine in t with slope `-(c1+c2)/(gamma_p+gamma_a)`; the integral
//!   is evaluated by quadrature and the affinity asserted numerically.
//! * [`expected_risk_share`] - `E[f(T ^ tau)]` three ways: a reference
//!   closed form with divisor `T`, the exact formula with `E[T ^ tau] =
//!   (1 - e^{-lambda T})/lambda`, and a Monte-Carlo estimate. The first
//!   two coincide only when `lambda T = 1`, so all three are reported
//!   rather than silently reconciled.
//! * [`value_ratio`] - `phi0^MH(0) / phi0^RS(0) >= 1`, the utility cost of
//!   moral hazard.
//!
//! At `lambda = 0` the halt never arrives: the compensation schedule never
//! pays out and any `K` is optimal. The solver keeps the closed-form
//! schedule (the limit of the `lambda > 0` optima, and the value the
//! expectation form produces at `lambda = 0`), under which the realized
//! risk-share payment `f(T ^ tau) = f(T)` is exactly zero.

use serde::Serialize;

use crate::bernoulli::{expm1_over_x, BernoulliCoefficients, PhiError, PhiFunction};
use crate::mitigation::MitigationPolicy;
use crate::model::{IntensitySpec, ModelError, ModelParams, ProblemVariant, ValidationReport};
use crate::solver;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SolveError {
    #[error("inputs rejected by validation: {0}")]
    Rejected(ValidationReport),
    #[error(transparent)]
    Phi(#[from] PhiError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("not applicable: {0}")]
    NotApplicable(&'static str),
    #[error("no solver registered for variant kind '{0}'")]
    UnknownVariant(String),
    #[error("value multiplier is not finite at t = 0 (parameters outside the representable domain)")]
    NonFiniteValue,
    #[error("risk-share component deviates from an affine function by {deviation}, above the tolerance {tolerance}; the value multiplier is inconsistent")]
    AffinityViolation { deviation: f64, tolerance: f64 },
}

/// Sign classification of the compensation schedule. `Zero` is assigned
/// when `|c1 + c2| <= 1e-12 (|c1| + |c2|)`; the exact-zero set has measure
/// zero in parameter space and a relative tolerance avoids spurious flips.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KSign {
    Negative,
    Zero,
    Positive,
}

pub fn classify_sign(c1: f64, c2: f64) -> KSign {
    let s = c1 + c2;
    if s.abs() <= 1e-12 * (c1.abs() + c2.abs()) {
        KSign::Zero
    } else if s > 0.0 {
        KSign::Positive
    } else {
        KSign::Negative
    }
}

/// The optimal contract for one problem variant.
#[derive(Debug, Clone)]
pub struct ContractSolution {
    pub variant: ProblemVariant,
    /// Initial certainty equivalent; the participation constraint binds, so
    /// this is the reservation value.
    pub y0: f64,
    /// Constant output sensitivity of the wage.
    pub z_star: f64,
    /// Constant pre-default effort.
    pub a_star: f64,
    /// Principal value multiplier.
    pub phi0: PhiFunction,
    /// Investment policy, present only for the mitigation variant.
    pub mitigation: Option<MitigationPolicy>,
    params: ModelParams,
    intensity: IntensitySpec,
}

impl ContractSolution {
    pub(crate) fn new(
        variant: ProblemVariant,
        params: ModelParams,
        intensity: IntensitySpec,
        z_star: f64,
        a_star: f64,
        phi0: PhiFunction,
        mitigation: Option<MitigationPolicy>,
    ) -> Result<Self, SolveError> {
        let sol = Self {
            variant,
            y0: params.y_pc,
            z_star,
            a_star,
            phi0,
            mitigation,
            params,
            intensity,
        };
        if !sol.phi0.eval(0.0).is_finite() || !sol.k_star(0.0).is_finite() {
            return Err(SolveError::NonFiniteValue);
        }
        Ok(sol)
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn intensity(&self) -> &IntensitySpec {
        &self.intensity
    }

    pub fn coefficients(&self) -> &BernoulliCoefficients {
        self.phi0.coefficients()
    }

    /// Post-default value factor `min(1, e^{gamma_p i} phi1(t, theta))`;
    /// identically 1 outside the mitigation variant.
    pub fn post_default_value_factor(&self, t: f64) -> f64 {
        self.mitigation
            .as_ref()
            .map_or(1.0, |p| p.post_default_value_factor(t))
    }

    /// Default-compensation schedule `K*(t)`.
    pub fn k_star(&self, t: f64) -> f64 {
        let m = self.post_default_value_factor(t);
        (self.phi0.eval(t) / m).ln() / self.params.gamma_sum()
    }

    /// Time-0 escrow deposit `K*(0)`.
    pub fn k0(&self) -> f64 {
        self.k_star(0.0)
    }

    /// `c1 + c2` at time 0; the sign determinant for constant intensities.
    pub fn c_sum(&self) -> f64 {
        let coef = self.coefficients();
        coef.c1(0.0) + coef.c2(0.0)
    }
}

/// Bernoulli coefficients of the variant's value ODE. Validates inputs.
pub fn coefficients(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
) -> Result<BernoulliCoefficients, SolveError> {
    solver::solver_for(variant)?.coefficients(params, intensity)
}

/// The optimal contract for the given variant. Validates inputs.
pub fn solve(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
) -> Result<ContractSolution, SolveError> {
    solver::solver_for(variant)?.solve(params, intensity)
}

/// Drift coefficient of the variant's ODE without the jump terms, i.e.
/// `c1(t) + c2(t)`, which is independent of the intensity.
pub(crate) fn c_sum_constant(params: &ModelParams, variant: &ProblemVariant) -> f64 {
    let gp = params.gamma_p;
    let ga = params.gamma_a;
    match variant {
        ProblemVariant::FirstBest => {
            gp * gp * ga / (2.0 * (gp + ga)) - gp / (2.0 * params.kappa)
        }
        ProblemVariant::MoralHazard | ProblemVariant::Mitigation { .. } => {
            let ki = 1.0 / params.kappa;
            let s = gp + ga + ki;
            gp * gp * ga / (2.0 * s) - gp * ki * (gp + ki) / (2.0 * s)
        }
    }
}

fn require_constant_intensity(intensity: &IntensitySpec) -> Result<f64, SolveError> {
    intensity.as_constant().ok_or(SolveError::NotApplicable(
        "this analytic holds for constant intensities only",
    ))
}

fn require_plain_variant(variant: &ProblemVariant) -> Result<(), SolveError> {
    match variant {
        ProblemVariant::FirstBest | ProblemVariant::MoralHazard => Ok(()),
        ProblemVariant::Mitigation { .. } => Err(SolveError::NotApplicable(
            "this analytic holds for the first-best and moral-hazard variants only",
        )),
    }
}

/// `K*(t)` via the expectation representation
/// `(1/gamma_a) log E[exp(alpha (c1+c2) ((T-t) ^ tau))]`, `tau ~ Exp(lambda)`,
/// evaluated through its exact two-term decomposition (survival mass at
/// `T-t` plus the density integral). Constant intensity only.
pub fn k_star_expectation_form(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
    t: f64,
) -> Result<f64, SolveError> {
    let lambda = require_constant_intensity(intensity)?;
    require_plain_variant(variant)?;
    let report = crate::model::validate(params, intensity, variant);
    if !report.is_ok() {
        return Err(SolveError::Rejected(report));
    }
    if !(0.0..=params.horizon).contains(&t) {
        return Err(SolveError::Model(ModelError::TimeOutOfRange {
            t,
            horizon: params.horizon,
        }));
    }
    let q = params.alpha() * c_sum_constant(params, variant);
    let d = params.horizon - t;
    // E = e^{(q - lambda) d} + lambda int_0^d e^{(q - lambda) s} ds
    let x = (q - lambda) * d;
    let expectation = x.exp() + lambda * d * expm1_over_x(x);
    Ok(expectation.ln() / params.gamma_a)
}

/// Sign of the compensation schedule over the whole contracting period:
/// `sign(c1 + c2)`. For the moral-hazard variant this equals the sign of
/// `gamma_p gamma_a - gamma_p / kappa - 1 / kappa^2`.
pub fn sign_of_k(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
) -> Result<KSign, SolveError> {
    let _ = require_constant_intensity(intensity)?;
    let report = crate::model::validate(params, intensity, variant);
    if !report.is_ok() {
        return Err(SolveError::Rejected(report));
    }
    let coef = coefficients(params, intensity, variant)?;
    Ok(classify_sign(coef.c1(0.0), coef.c2(0.0)))
}

/// Affine decomposition of the wage's risk-share component.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RiskShareDecomposition {
    /// Time-0 escrow deposit `K*(0)`.
    pub k0: f64,
    /// Analytic slope `-(c1 + c2) / (gamma_p + gamma_a)`.
    pub slope: f64,
    /// Slope measured from the quadrature evaluation of `f`.
    pub measured_slope: f64,
    /// Largest deviation of `f` from its chord on the evaluation grid.
    pub max_affine_deviation: f64,
}

/// Evaluates `f(t) = K*(t) + int_0^t lambda/gamma_a (e^{-gamma_a K*(s)} - 1) ds`
/// on a 2048-interval Simpson grid and asserts it is affine; an affinity
/// violation signals an inconsistent `phi0`. Constant intensity only.
pub fn risk_share_decomposition(sol: &ContractSolution) -> Result<RiskShareDecomposition, SolveError> {
    let lambda = require_constant_intensity(&sol.intensity)?;
    require_plain_variant(&sol.variant)?;
    let params = &sol.params;
    let horizon = params.horizon;
    let ga = params.gamma_a;
    let n = 2048usize;
    let h = horizon / n as f64;
    let g = |s: f64| lambda / ga * (-ga * sol.k_star(s)).exp_m1();

    let k0 = sol.k0();
    let slope = -sol.c_sum() / params.gamma_sum();

    // cumulative integral of g by per-interval Simpson, then f on the nodes
    let mut f_values = Vec::with_capacity(n + 1);
    f_values.push(k0);
    let mut acc = 0.0;
    let mut g_left = g(0.0);
    for i in 0..n {
        let a = i as f64 * h;
        let b = a + h;
        let g_right = g(b);
        acc += h / 6.0 * (g_left + 4.0 * g(a + 0.5 * h) + g_right);
        g_left = g_right;
        f_values.push(sol.k_star(b) + acc);
    }

    let f0 = f_values[0];
    let f_end = *f_values.last().unwrap();
    let measured_slope = (f_end - f0) / horizon;
    let mut max_dev: f64 = 0.0;
    for (i, &f) in f_values.iter().enumerate() {
        let chord = f0 + measured_slope * (i as f64 * h);
        max_dev = max_dev.max((f - chord).abs());
    }

    let tolerance = 1e-6 * (1.0f64).max(k0.abs() + slope.abs() * horizon);
    if max_dev > tolerance {
        return Err(SolveError::AffinityViolation {
            deviation: max_dev,
            tolerance,
        });
    }
    Ok(RiskShareDecomposition {
        k0,
        slope,
        measured_slope,
        max_affine_deviation: max_dev,
    })
}

/// The expected risk-share payment `E[f(T ^ tau)]`, three ways.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExpectedRiskShare {
    /// `K*(0) - (c1+c2)/(gamma_p+gamma_a) * (1 - e^{-lambda T}) / T`:
    /// the reference form with divisor `T` where the exact mean stopping
    /// time has `1/lambda`; the two agree only when `lambda T = 1`, so it
    /// is reported verbatim next to `exact` and the Monte-Carlo estimate
    /// arbitrates.
    pub paper_form: f64,
    /// `K*(0) + slope * E[T ^ tau]` with `E[T ^ tau] = (1 - e^{-lambda T}) / lambda`.
    pub exact: f64,
    /// Monte-Carlo mean of `f(T ^ tau)` over `n_draws` exponential draws.
    pub mc_estimate: f64,
    pub mc_std_error: f64,
    pub n_draws: u64,
    pub seed: u64,
}

/// Computes the expected risk-share payment. The printed closed form and
/// the exact expectation disagree whenever `(1-e^{-lambda T})/T` differs
/// from `E[T ^ tau]`; the Monte-Carlo estimate arbitrates. Constant
/// intensity only.
pub fn expected_risk_share(
    sol: &ContractSolution,
    n_draws: u64,
    seed: u64,
) -> Result<ExpectedRiskShare, SolveError> {
    use rand::{Rng, SeedableRng};
    let lambda = require_constant_intensity(&sol.intensity)?;
    require_plain_variant(&sol.variant)?;
    let params = &sol.params;
    let horizon = params.horizon;
    let k0 = sol.k0();
    let slope = -sol.c_sum() / params.gamma_sum();

    let paper_form = k0 + slope * (-(-lambda * horizon).exp_m1()) / horizon;
    // E[T ^ tau] = T * (1 - e^{-lambda T})/(lambda T), exact at lambda = 0
    let expected_stop = horizon * expm1_over_x(-lambda * horizon);
    let exact = k0 + slope * expected_stop;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_draws {
        let u: f64 = rng.random();
        let stop = if lambda > 0.0 {
            (-(-u).ln_1p() / lambda).min(horizon)
        } else {
            horizon
        };
        let f = k0 + slope * stop;
        sum += f;
        sum_sq += f * f;
    }
    let n = n_draws as f64;
    let mean = sum / n;
    let var = ((sum_sq / n - mean * mean) * n / (n - 1.0).max(1.0)).max(0.0);
    Ok(ExpectedRiskShare {
        paper_form,
        exact,
        mc_estimate: mean,
        mc_std_error: (var / n).sqrt(),
        n_draws,
        seed,
    })
}

/// Ratio of two solutions' time-0 value multipliers, `phi_a(0) / phi_b(0)`,
/// computed in log space.
pub fn phi_ratio(a: &ContractSolution, b: &ContractSolution) -> f64 {
    (a.phi0.ln_eval(0.0) - b.phi0.ln_eval(0.0)).exp()
}

/// `phi0^MH(0) / phi0^RS(0)`. Moral hazard restricts the contract set, so
/// the ratio is at least 1.
pub fn value_ratio(params: &ModelParams, intensity: &IntensitySpec) -> Result<f64, SolveError> {
    let mh = solve(params, intensity, &ProblemVariant::MoralHazard)?;
    let fb = solve(params, intensity, &ProblemVariant::FirstBest)?;
    Ok(phi_ratio(&mh, &fb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    // Frozen by a 30-digit independent evaluation of the closed forms.
    const MH_K0: f64 = -0.052_227_704_488_292_2;
    const FB_K0: f64 = -0.078_003_288_003_747;
    const MH_EXPECTED_F: f64 = 0.000_449_008_747_420_938;
    const VALUE_RATIO_BASELINE: f64 = 1.052_903_058_837_23;

    fn params(gamma_p: f64, gamma_a: f64, kappa: f64) -> ModelParams {
        ModelParams {
            gamma_p,
            gamma_a,
            kappa,
            horizon: 1.0,
            y_pc: 0.0,
            x0: 0.0,
            effort_bound: 10.0,
        }
    }

    fn unit() -> IntensitySpec {
        IntensitySpec::constant(1.0)
    }

    #[test]
    fn coefficient_constants_match_hand_arithmetic() {
        let p = params(1.0, 1.0, 1.0);
        let fb = coefficients(&p, &unit(), &ProblemVariant::FirstBest).unwrap();
        assert!((fb.c1(0.0) + 2.25).abs() < 1e-15);
        assert!((fb.c2(0.0) - 2.0).abs() < 1e-15);
        let mh = coefficients(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        assert!((mh.c1(0.0) + 13.0 / 6.0).abs() < 1e-15);
        assert!((mh.c2(0.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn no_default_limit_drops_the_jump_terms() {
        let p = params(1.0, 1.0, 1.0);
        let silent = IntensitySpec::constant(0.0);
        for variant in [ProblemVariant::FirstBest, ProblemVariant::MoralHazard] {
            let coef = coefficients(&p, &silent, &variant).unwrap();
            assert_eq!(coef.c2(0.0), 0.0);
            assert!((coef.c1(0.0) - c_sum_constant(&p, &variant)).abs() < 1e-15);
        }
    }

    #[test]
    fn moral_hazard_baseline_solution() {
        let p = params(1.0, 1.0, 1.0);
        let sol = solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        assert!((sol.z_star - 2.0 / 3.0).abs() < 1e-15);
        assert!((sol.a_star - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(sol.y0, 0.0);
        assert!((sol.k0() - MH_K0).abs() < 1e-12);
        assert_eq!(sol.k_star(1.0), 0.0);
    }

    #[test]
    fn first_best_terminal_compensation_vanishes() {
        let sol = solve(&params(2.5, 0.7, 1.3), &unit(), &ProblemVariant::FirstBest).unwrap();
        assert!((sol.a_star - 1.0 / 1.3).abs() < 1e-15);
        assert!((sol.z_star - 2.5 / 3.2).abs() < 1e-15);
        assert_eq!(sol.k_star(sol.params().horizon), 0.0);
    }

    #[test]
    fn shutdown_free_limit_recovers_the_classical_contract() {
        // At lambda = 0 the jump never fires: Z* and a* are the classical
        // values and the realized risk-share payment f(T) is exactly zero.
        // The schedule K* itself stays at the lambda -> 0+ limit
        // c1 (T-t) / (gamma_p + gamma_a), which never pays out.
        let p = params(1.0, 1.0, 1.0);
        let silent = IntensitySpec::constant(0.0);
        let sol = solve(&p, &silent, &ProblemVariant::MoralHazard).unwrap();
        assert!((sol.z_star - 2.0 / 3.0).abs() < 1e-15);
        assert!((sol.a_star - 2.0 / 3.0).abs() < 1e-15);
        assert!((sol.k0() + 1.0 / 12.0).abs() < 1e-12);
        let dec = risk_share_decomposition(&sol).unwrap();
        let f_end = dec.k0 + dec.measured_slope * p.horizon;
        assert!(f_end.abs() < 1e-12, "terminal risk-share payment {f_end}");
    }

    #[test]
    fn expectation_form_matches_log_phi_route() {
        let p = params(1.0, 1.0, 1.0);
        let sol = solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let via_expectation =
                k_star_expectation_form(&p, &unit(), &ProblemVariant::MoralHazard, t).unwrap();
            assert!(
                (via_expectation - sol.k_star(t)).abs() <= 1e-12,
                "mismatch at t={t}"
            );
        }
        let at_horizon =
            k_star_expectation_form(&p, &unit(), &ProblemVariant::MoralHazard, 1.0).unwrap();
        assert_eq!(at_horizon, 0.0);
    }

    #[test]
    fn expectation_form_cancels_exactly_when_c_sum_vanishes() {
        // FB with gamma_p = gamma_a = 2, kappa = 1: c1 + c2 = 0
        let p = params(2.0, 2.0, 1.0);
        assert_eq!(c_sum_constant(&p, &ProblemVariant::FirstBest), 0.0);
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let k = k_star_expectation_form(&p, &unit(), &ProblemVariant::FirstBest, t).unwrap();
            assert!(k.abs() < 1e-15);
        }
    }

    #[test]
    fn sign_classification_examples() {
        let u = unit();
        assert_eq!(
            sign_of_k(&params(1.0, 1.0, 1.0), &u, &ProblemVariant::MoralHazard).unwrap(),
            KSign::Negative
        );
        assert_eq!(
            sign_of_k(&params(2.0, 2.0, 1.0), &u, &ProblemVariant::MoralHazard).unwrap(),
            KSign::Positive
        );
        assert_eq!(
            sign_of_k(&params(2.0, 2.0, 1.0), &u, &ProblemVariant::FirstBest).unwrap(),
            KSign::Zero
        );
        // moral-hazard predicate: sign(gamma_p gamma_a - gamma_p/kappa - 1/kappa^2)
        let p = params(1.0, 1.0, 1.0);
        let predicate = p.gamma_p * p.gamma_a - p.gamma_p / p.kappa - 1.0 / (p.kappa * p.kappa);
        assert!(predicate < 0.0);
    }

    #[test]
    fn risk_share_decomposition_is_affine() {
        let p = params(1.0, 1.0, 1.0);
        let sol = solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let dec = risk_share_decomposition(&sol).unwrap();
        assert!((dec.slope - 1.0 / 12.0).abs() < 1e-15);
        assert!((dec.k0 - MH_K0).abs() < 1e-12);
        assert!((dec.measured_slope - dec.slope).abs() < 1e-9);
        assert!(dec.max_affine_deviation < 1e-9);

        let fb = solve(&p, &unit(), &ProblemVariant::FirstBest).unwrap();
        let dec = risk_share_decomposition(&fb).unwrap();
        assert!((dec.slope - 0.125).abs() < 1e-15);
        assert!((dec.k0 - FB_K0).abs() < 1e-12);
    }

    #[test]
    fn zero_c_sum_makes_the_risk_share_vanish() {
        let p = params(2.0, 2.0, 1.0);
        let sol = solve(&p, &unit(), &ProblemVariant::FirstBest).unwrap();
        let dec = risk_share_decomposition(&sol).unwrap();
        assert!(dec.k0.abs() < 1e-14);
        assert!(dec.slope.abs() < 1e-14);
        assert!(dec.max_affine_deviation < 1e-12);
    }

    #[test]
    fn expected_risk_share_baseline() {
        let p = params(1.0, 1.0, 1.0);
        let sol = solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let e = expected_risk_share(&sol, 200_000, 7).unwrap();
        assert!((e.exact - MH_EXPECTED_F).abs() < 1e-12);
        // lambda = T = 1 makes the printed divisor coincide with 1/lambda
        assert!((e.paper_form - e.exact).abs() < 1e-15);
        assert!(
            (e.mc_estimate - e.exact).abs() <= 3.0 * e.mc_std_error,
            "mc {} vs exact {} (se {})",
            e.mc_estimate,
            e.exact,
            e.mc_std_error
        );
    }

    #[test]
    fn printed_divisor_diverges_from_the_exact_mean_for_lambda_two() {
        let p = params(1.0, 1.0, 1.0);
        let fast = IntensitySpec::constant(2.0);
        let sol = solve(&p, &fast, &ProblemVariant::MoralHazard).unwrap();
        let e = expected_risk_share(&sol, 400_000, 11).unwrap();
        // paper form applies (1-e^{-2})/1 where the mean stop is (1-e^{-2})/2
        let k0 = sol.k0();
        assert!(((e.paper_form - k0) - 2.0 * (e.exact - k0)).abs() < 1e-12);
        assert!((e.mc_estimate - e.exact).abs() <= 3.0 * e.mc_std_error);
        assert!((e.paper_form - e.exact).abs() > 1e-3);
    }

    #[test]
    fn no_default_risk_share_is_exactly_zero() {
        let p = params(1.0, 1.0, 1.0);
        let silent = IntensitySpec::constant(0.0);
        let sol = solve(&p, &silent, &ProblemVariant::MoralHazard).unwrap();
        let e = expected_risk_share(&sol, 1000, 3).unwrap();
        // every draw stops at T where f(T) = 0
        assert!(e.exact.abs() < 1e-15);
        assert!(e.mc_estimate.abs() < 1e-15);
        assert_eq!(e.mc_std_error, 0.0);
        // the printed form degenerates to k0 at lambda = 0
        assert!((e.paper_form - sol.k0()).abs() < 1e-15);
    }

    #[test]
    fn value_ratio_baseline_and_self_ratio() {
        let p = params(1.0, 1.0, 1.0);
        let ratio = value_ratio(&p, &unit()).unwrap();
        assert!((ratio - VALUE_RATIO_BASELINE).abs() < 1e-10);
        assert!(ratio >= 1.0);
        let mh = solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        assert_eq!(phi_ratio(&mh, &mh), 1.0);
    }

    #[test]
    fn value_ratio_tends_to_one_for_a_risk_neutral_principal() {
        let p = ModelParams {
            gamma_p: 1e-4,
            ..params(1.0, 1.0, 1.0)
        };
        let ratio = value_ratio(&p, &unit()).unwrap();
        assert!((ratio - 1.0).abs() < 1e-3, "ratio {ratio}");
    }

    #[test]
    fn analytics_report_not_applicable_for_grid_intensities() {
        let p = params(1.0, 1.0, 1.0);
        let grid = IntensitySpec::step_grid(vec![(0.0, 1.0), (0.5, 2.0)]);
        assert!(validate(&p, &grid, &ProblemVariant::MoralHazard).is_ok());
        let sol = solve(&p, &grid, &ProblemVariant::MoralHazard).unwrap();
        assert!(matches!(
            risk_share_decomposition(&sol),
            Err(SolveError::NotApplicable(_))
        ));
        assert!(matches!(
            expected_risk_share(&sol, 10, 0),
            Err(SolveError::NotApplicable(_))
        ));
        assert!(matches!(
            k_star_expectation_form(&p, &grid, &ProblemVariant::MoralHazard, 0.5),
            Err(SolveError::NotApplicable(_))
        ));
    }

    #[test]
    fn grid_intensity_solution_uses_the_numeric_route() {
        let p = params(1.0, 1.0, 1.0);
        let grid = IntensitySpec::step_grid(vec![(0.0, 1.0), (0.5, 2.0)]);
        let sol = solve(&p, &grid, &ProblemVariant::MoralHazard).unwrap();
        assert_eq!(sol.phi0.method(), crate::bernoulli::PhiMethod::Numeric);
        assert_eq!(sol.k_star(1.0), 0.0);
        // against a constant-lambda sandwich: phi for lambda=2 <= phi <= lambda=1
        // does not hold in general; just check positivity and monotone tail
        assert!(sol.phi0.eval(0.0) > 0.0);
    }

    #[test]
    fn rejected_inputs_surface_the_validation_report() {
        let bad = ModelParams {
            effort_bound: 0.1,
            ..params(1.0, 1.0, 1.0)
        };
        match solve(&bad, &unit(), &ProblemVariant::MoralHazard) {
            Err(SolveError::Rejected(report)) => assert!(!report.is_ok()),
            other => panic!("expected rejection, got {other:?}"),
        }
    }
}
