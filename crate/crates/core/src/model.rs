//! Exogenous model inputs and their validation.
//!
//! Everything downstream (closed forms, simulation, verification) assumes a
//! validated `(ModelParams, IntensitySpec, ProblemVariant)` triple. The
//! [`validate`] operation never fails; it returns a [`ValidationReport`]
//! listing every violated invariant so a CLI can show them all at once.

use serde::{Deserialize, Serialize};

/// All exogenous constants of the contracting problem.
///
/// The effort bound caps the admissible effort processes. How large it must
/// be depends on the variant: the first-best dictate `1/kappa` must be
/// admissible, while the moral-hazard closed form requires the strict bound
/// checked in [`moral_hazard_effort_floor`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Principal's CARA risk aversion.
    pub gamma_p: f64,
    /// Agent's CARA risk aversion.
    pub gamma_a: f64,
    /// Quadratic effort-cost coefficient: cost rate is `kappa * a^2 / 2`.
    pub kappa: f64,
    /// Contract maturity.
    pub horizon: f64,
    /// Agent's reservation certainty equivalent.
    pub y_pc: f64,
    /// Initial output level.
    pub x0: f64,
    /// Admissible-effort bound: efforts take values in `[-A, A]`.
    pub effort_bound: f64,
}

impl ModelParams {
    /// `gamma_p + gamma_a`, the divisor of the default-compensation control.
    pub fn gamma_sum(&self) -> f64 {
        self.gamma_p + self.gamma_a
    }

    /// Exponent ratio `alpha = gamma_a / (gamma_p + gamma_a)` of the
    /// Bernoulli substitution; always in (0, 1) for valid parameters.
    pub fn alpha(&self) -> f64 {
        self.gamma_a / self.gamma_sum()
    }

    /// Principal's utility `-exp(-gamma_p x)`.
    pub fn utility_principal(&self, x: f64) -> f64 {
        -(-self.gamma_p * x).exp()
    }

    /// Agent's utility `-exp(-gamma_a x)`.
    pub fn utility_agent(&self, x: f64) -> f64 {
        -(-self.gamma_a * x).exp()
    }
}

/// Strict lower bound on the effort bound required by the moral-hazard
/// closed form: `A > (gamma_p + 1/kappa) / (kappa (gamma_p + gamma_a) + 1)`.
pub fn moral_hazard_effort_floor(params: &ModelParams) -> f64 {
    let ki = 1.0 / params.kappa;
    (params.gamma_p + ki) / (params.kappa * (params.gamma_p + params.gamma_a) + 1.0)
}

/// Deterministic default-intensity specification.
///
/// The halt time has law `P(tau <= t) = 1 - exp(-Lambda_t)` with
/// `Lambda_t = integral of lambda(s) over [0, t]`. A grid intensity is
/// piecewise constant (step interpolation): `lambda(t) = lambda_i` on
/// `[t_i, t_{i+1})`, with the last value extending to the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntensitySpec {
    Constant {
        lambda: f64,
    },
    Grid {
        /// `(time, lambda)` pairs, strictly increasing in time, starting at 0.
        points: Vec<(f64, f64)>,
        /// Interpolation rule; only `step` is defined.
        interp: GridInterp,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridInterp {
    Step,
}

impl IntensitySpec {
    pub fn constant(lambda: f64) -> Self {
        IntensitySpec::Constant { lambda }
    }

    pub fn step_grid(points: Vec<(f64, f64)>) -> Self {
        IntensitySpec::Grid {
            points,
            interp: GridInterp::Step,
        }
    }

    /// The constant rate, when this intensity is constant.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            IntensitySpec::Constant { lambda } => Some(*lambda),
            IntensitySpec::Grid { .. } => None,
        }
    }

    /// Intensity value at time `t >= 0`.
    pub fn lambda_at(&self, t: f64) -> f64 {
        match self {
            IntensitySpec::Constant { lambda } => *lambda,
            IntensitySpec::Grid { points, .. } => {
                let mut value = points.first().map_or(0.0, |p| p.1);
                for &(ti, li) in points {
                    if ti <= t {
                        value = li;
                    } else {
                        break;
                    }
                }
                value
            }
        }
    }

    /// Cumulative intensity `Lambda_t` for `t >= 0`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            IntensitySpec::Constant { lambda } => lambda * t,
            IntensitySpec::Grid { points, .. } => {
                let mut acc = 0.0;
                for (i, &(ti, li)) in points.iter().enumerate() {
                    if ti >= t {
                        break;
                    }
                    let end = points.get(i + 1).map_or(t, |p| p.0.min(t));
                    acc += li * (end - ti);
                }
                acc
            }
        }
    }

    /// Inverse of the cumulative intensity: smallest `t` with
    /// `Lambda_t = target`, or `None` when the target is never reached
    /// before `horizon`.
    pub fn inverse_cumulative(&self, target: f64, horizon: f64) -> Option<f64> {
        if target <= 0.0 {
            return Some(0.0);
        }
        match self {
            IntensitySpec::Constant { lambda } => {
                if *lambda <= 0.0 {
                    return None;
                }
                let t = target / lambda;
                (t <= horizon).then_some(t)
            }
            IntensitySpec::Grid { points, .. } => {
                let mut acc = 0.0;
                for (i, &(ti, li)) in points.iter().enumerate() {
                    if ti >= horizon {
                        break;
                    }
                    let end = points.get(i + 1).map_or(horizon, |p| p.0.min(horizon));
                    let seg = li * (end - ti);
                    if acc + seg >= target {
                        // lambda > 0 on this segment, otherwise seg == 0 < target - acc
                        return Some(ti + (target - acc) / li);
                    }
                    acc += seg;
                }
                None
            }
        }
    }

    /// Times at which a grid intensity switches value (interior of `[0, horizon]`).
    pub fn breakpoints(&self, horizon: f64) -> Vec<f64> {
        match self {
            IntensitySpec::Constant { .. } => Vec::new(),
            IntensitySpec::Grid { points, .. } => points
                .iter()
                .map(|p| p.0)
                .filter(|&t| t > 0.0 && t < horizon)
                .collect(),
        }
    }

    /// `P(tau <= t) = 1 - exp(-Lambda_t)` for any `t >= 0`.
    pub fn default_probability_unchecked(&self, t: f64) -> f64 {
        -(-self.cumulative(t)).exp_m1()
    }
}

/// Which contracting problem to solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemVariant {
    FirstBest,
    MoralHazard,
    Mitigation {
        /// Post-restart production level, strictly in (0, 1).
        theta: f64,
        /// Sunk cost of restarting, strictly positive.
        invest_cost: f64,
    },
}

impl ProblemVariant {
    /// Registry name of the variant; matches the JSON `kind` tag.
    pub fn kind_name(&self) -> &'static str {
        match self {
            ProblemVariant::FirstBest => "first_best",
            ProblemVariant::MoralHazard => "moral_hazard",
            ProblemVariant::Mitigation { .. } => "mitigation",
        }
    }
}

/// Full problem description as consumed by the CLI JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(flatten)]
    pub params: ModelParams,
    pub intensity: IntensitySpec,
    pub variant: ProblemVariant,
}

/// Outcome of [`validate`]: empty `violations` means the inputs are usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            write!(f, "pass")
        } else {
            writeln!(f, "fail:")?;
            for v in &self.violations {
                writeln!(f, "  - {v}")?;
            }
            Ok(())
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ModelError {
    #[error("time {t} outside the contract period [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },
}

fn check_finite(report: &mut Vec<String>, name: &str, value: f64) -> bool {
    if value.is_finite() {
        true
    } else {
        report.push(format!("{name} must be finite, got {value}"));
        false
    }
}

fn check_positive(report: &mut Vec<String>, name: &str, value: f64) {
    if check_finite(report, name, value) && value <= 0.0 {
        report.push(format!("{name} must be strictly positive, got {value}"));
    }
}

/// Checks every invariant the closed forms rely on. Pure: identical inputs
/// yield identical reports.
pub fn validate(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
) -> ValidationReport {
    let mut v = Vec::new();

    check_positive(&mut v, "gamma_p", params.gamma_p);
    check_positive(&mut v, "gamma_a", params.gamma_a);
    check_positive(&mut v, "kappa", params.kappa);
    check_positive(&mut v, "horizon", params.horizon);
    check_positive(&mut v, "effort_bound", params.effort_bound);
    check_finite(&mut v, "y_pc", params.y_pc);
    check_finite(&mut v, "x0", params.x0);

    match intensity {
        IntensitySpec::Constant { lambda } => {
            if check_finite(&mut v, "lambda", *lambda) && *lambda < 0.0 {
                v.push(format!("lambda must be nonnegative, got {lambda}"));
            }
        }
        IntensitySpec::Grid { points, .. } => {
            if points.is_empty() {
                v.push("intensity grid must contain at least one point".into());
            } else {
                if points[0].0 != 0.0 {
                    v.push(format!(
                        "intensity grid must start at time 0, got {}",
                        points[0].0
                    ));
                }
                for w in points.windows(2) {
                    if !(w[1].0 > w[0].0) {
                        v.push(format!(
                            "intensity grid times must be strictly increasing ({} then {})",
                            w[0].0, w[1].0
                        ));
                    }
                }
                for &(ti, li) in points {
                    check_finite(&mut v, "intensity grid time", ti);
                    if check_finite(&mut v, "intensity grid value", li) && li < 0.0 {
                        v.push(format!("intensity values must be nonnegative, got {li} at t={ti}"));
                    }
                }
            }
        }
    }

    if v.is_empty() {
        match variant {
            ProblemVariant::FirstBest => {
                // The dictated effort 1/kappa must itself be admissible.
                let floor = 1.0 / params.kappa;
                if params.effort_bound < floor {
                    v.push(format!(
                        "effort_bound {} must be at least 1/kappa = {} for the first-best variant",
                        params.effort_bound, floor
                    ));
                }
            }
            ProblemVariant::MoralHazard | ProblemVariant::Mitigation { .. } => {
                let floor = moral_hazard_effort_floor(params);
                if params.effort_bound <= floor {
                    v.push(format!(
                        "effort_bound {} must exceed (gamma_p + 1/kappa)/(kappa(gamma_p + gamma_a) + 1) = {}",
                        params.effort_bound, floor
                    ));
                }
            }
        }
    }

    if let ProblemVariant::Mitigation { theta, invest_cost } = variant {
        if check_finite(&mut v, "theta", *theta) && !(*theta > 0.0 && *theta < 1.0) {
            v.push(format!("theta must lie strictly in (0, 1), got {theta}"));
        }
        check_positive(&mut v, "invest_cost", *invest_cost);
    }

    ValidationReport { violations: v }
}

/// Probability that the halt arrives by time `t` within the contract period.
pub fn default_probability(
    params: &ModelParams,
    intensity: &IntensitySpec,
    t: f64,
) -> Result<f64, ModelError> {
    if !(0.0..=params.horizon).contains(&t) {
        return Err(ModelError::TimeOutOfRange {
            t,
            horizon: params.horizon,
        });
    }
    Ok(intensity.default_probability_unchecked(t))
}
