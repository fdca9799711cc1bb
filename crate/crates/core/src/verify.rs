//! Numerical certification of the closed-form contracts.
//!
//! Three independent checks, each attacking a different failure mode:
//!
//! * [`hjb_residual`] plugs the candidate value function
//!   `v(t,x,y) = U_P(x-y) phi0(t)` into the variant's HJB equation on a
//!   `(t,x,y)` grid, with the inner optimization evaluated at the
//!   closed-form controls. Partials in `x` and `y` are analytic; `phi0'`
//!   uses central differences (one-sided second-order stencils at the
//!   endpoints), so the residual floor scales with the difference step.
//!   The post-jump term follows each variant's own convention: the plain
//!   problems write it as `U_P(x - y - K)` and the mitigation problem as
//!   `v1(t, x, y + K)`; the two coincide because
//!   `U_P(x - (y + K)) = U_P(x - y - K)`.
//! * [`hamiltonian_argmin`] minimizes the bracketed Hamiltonian by brute
//!   force over a control grid and compares the minimizer against the
//!   closed-form first-order conditions.
//! * [`deviation_test`] simulates the agent's utility under the candidate
//!   optimal effort and under explicit alternatives on common random
//!   numbers; incentive compatibility requires the candidate to win every
//!   comparison beyond three combined standard errors.
//!
//! [`participation_binding`] closes the loop by checking that the
//! simulated agent utility sits at the reservation utility.

use rayon::prelude::*;
use serde::Serialize;

use crate::bernoulli::TimeFn;
use crate::contract::{self, ContractSolution, SolveError};
use crate::model::{IntensitySpec, ModelParams, ProblemVariant};
use crate::simulate::{
    simulate_paths_with_records, Estimate, SimConfig, SimError, SimReport, WagePolicy,
};

#[derive(Debug, Clone, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("hamiltonian argmin landed on the {axis} grid boundary; the grid is too small")]
    ArgminOnBoundary { axis: &'static str },
}

/// Evaluation grid for the HJB residual.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StateGrid {
    pub t_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub x_points: usize,
    pub y_min: f64,
    pub y_max: f64,
    pub y_points: usize,
}

impl StateGrid {
    /// The reference 50 x 20 x 20 grid on `[0,T] x [-2,2] x [-2,2]`.
    pub fn standard() -> Self {
        StateGrid {
            t_points: 50,
            x_min: -2.0,
            x_max: 2.0,
            x_points: 20,
            y_min: -2.0,
            y_max: 2.0,
            y_points: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub variant: String,
    pub grid: StateGrid,
    pub t_spacing: f64,
    pub fd_step: f64,
    pub max_abs_residual: f64,
    /// Largest `|residual| / scale` over the grid, where `scale` is the sum
    /// of the absolute values of the equation's terms at that node.
    pub max_scaled_residual: f64,
    pub argmax: (f64, f64, f64),
    /// Node-wise tolerance on the scaled residual.
    pub tolerance: f64,
    pub pass: bool,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Second-order derivative of `phi` at `t`, one-sided at the endpoints.
fn phi_derivative(phi: &dyn Fn(f64) -> f64, t: f64, horizon: f64, h: f64) -> f64 {
    if t - h < 0.0 {
        (-3.0 * phi(t) + 4.0 * phi(t + h) - phi(t + 2.0 * h)) / (2.0 * h)
    } else if t + h > horizon {
        (3.0 * phi(t) - 4.0 * phi(t - h) + phi(t - 2.0 * h)) / (2.0 * h)
    } else {
        (phi(t + h) - phi(t - h)) / (2.0 * h)
    }
}

fn residual_report(
    params: &ModelParams,
    lambda: f64,
    sol: &ContractSolution,
    phi: &(dyn Fn(f64) -> f64 + Sync),
    grid: &StateGrid,
    fd_step: f64,
) -> ResidualReport {
    let horizon = params.horizon;
    let gp = params.gamma_p;
    let ga = params.gamma_a;
    let z = sol.z_star;
    let a = sol.a_star;
    let t_nodes = linspace(0.0, horizon, grid.t_points);
    let x_nodes = linspace(grid.x_min, grid.x_max, grid.x_points);
    let y_nodes = linspace(grid.y_min, grid.y_max, grid.y_points);

    // bracket terms at each t; (x, y) only contribute the U_P(x-y) factor
    struct Bracket {
        t: f64,
        terms: [f64; 4],
    }
    let brackets: Vec<Bracket> = t_nodes
        .par_iter()
        .map(|&t| {
            let k = sol.k_star(t);
            let m = sol.post_default_value_factor(t);
            let p = phi(t);
            let dp = phi_derivative(&|s| phi(s), t, horizon, fd_step);
            let drift = -a + 0.5 * ga * z * z + 0.5 * params.kappa * a * a
                + lambda / ga * ((-ga * k).exp() - 1.0);
            Bracket {
                t,
                terms: [
                    dp,
                    gp * p * drift,
                    gp * gp * p * (0.5 * z * z + 0.5 - z),
                    lambda * ((gp * k).exp() * m - p),
                ],
            }
        })
        .collect();

    let mut max_abs = 0.0f64;
    let mut max_scaled = 0.0f64;
    let mut argmax = (0.0, 0.0, 0.0);
    for b in &brackets {
        let r: f64 = b.terms.iter().sum();
        let s: f64 = b.terms.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
        for &x in &x_nodes {
            for &y in &y_nodes {
                let up = params.utility_principal(x - y).abs();
                let residual = up * r.abs();
                if residual > max_abs {
                    max_abs = residual;
                    argmax = (b.t, x, y);
                }
                max_scaled = max_scaled.max(residual / (up * s));
            }
        }
    }

    let tolerance = 1e-5;
    ResidualReport {
        variant: sol.variant.kind_name().to_string(),
        grid: *grid,
        t_spacing: horizon / (grid.t_points.max(2) - 1) as f64,
        fd_step,
        max_abs_residual: max_abs,
        max_scaled_residual: max_scaled,
        argmax,
        tolerance,
        pass: max_scaled <= tolerance,
    }
}

/// HJB residual of the closed-form solution on a state grid. Constant
/// intensity only.
pub fn hjb_residual(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
    grid: &StateGrid,
    fd_step: f64,
) -> Result<ResidualReport, VerifyError> {
    let lambda = intensity.as_constant().ok_or(SolveError::NotApplicable(
        "the residual check is defined for constant intensities",
    ))?;
    let sol = contract::solve(params, intensity, variant)?;
    let phi = |t: f64| sol.phi0.eval(t);
    Ok(residual_report(params, lambda, &sol, &phi, grid, fd_step))
}

/// Negative control: the same residual with the value multiplier offset by
/// a constant. Any nonzero offset must blow the tolerance by orders of
/// magnitude, otherwise the residual check has no teeth.
pub fn hjb_residual_perturbed(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
    grid: &StateGrid,
    fd_step: f64,
    offset: f64,
) -> Result<ResidualReport, VerifyError> {
    let lambda = intensity.as_constant().ok_or(SolveError::NotApplicable(
        "the residual check is defined for constant intensities",
    ))?;
    let sol = contract::solve(params, intensity, variant)?;
    let phi0 = sol.phi0.clone();
    let phi = move |t: f64| phi0.eval(t) + offset;
    Ok(residual_report(params, lambda, &sol, &phi, grid, fd_step))
}

/// One control axis of the Hamiltonian grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub cell: f64,
}

impl Axis {
    pub fn new(min: f64, max: f64, cell: f64) -> Self {
        Axis { min, max, cell }
    }

    fn nodes(&self) -> Vec<f64> {
        let n = ((self.max - self.min) / self.cell).round().max(1.0) as usize;
        (0..=n).map(|i| self.min + self.cell * i as f64).collect()
    }
}

/// Control grid: the effort axis participates only in the first-best
/// problem, where effort is a free control.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ControlGrid {
    pub effort: Option<Axis>,
    pub z: Axis,
    pub k: Axis,
}

impl ControlGrid {
    /// Cube `[lo, hi]^3` (or `^2` for moral hazard) at the given cell size.
    pub fn cube(variant: &ProblemVariant, lo: f64, hi: f64, cell: f64) -> Self {
        let axis = Axis::new(lo, hi, cell);
        ControlGrid {
            effort: matches!(variant, ProblemVariant::FirstBest).then_some(axis),
            z: axis,
            k: axis,
        }
    }

    /// Axes of half-width `half` centered on the closed-form controls.
    pub fn centered(sol: &ContractSolution, t: f64, half: f64, cell: f64) -> Self {
        let center = |c: f64| Axis::new(c - half, c + half, cell);
        ControlGrid {
            effort: matches!(sol.variant, ProblemVariant::FirstBest)
                .then(|| center(sol.a_star)),
            z: center(sol.z_star),
            k: center(sol.k_star(t)),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ArgminReport {
    pub t: f64,
    pub argmin_effort: Option<f64>,
    pub argmin_z: f64,
    pub argmin_k: f64,
    pub closed_effort: f64,
    pub closed_z: f64,
    pub closed_k: f64,
    /// `H(grid argmin) - H(closed form)`; nonnegative up to rounding and
    /// second-order in the cell size when the closed form is optimal.
    pub gap: f64,
    pub cell: f64,
    /// Largest coordinate distance between grid argmin and closed form.
    pub max_control_error: f64,
    pub within_one_cell: bool,
}

/// Brute-force minimization of the bracketed Hamiltonian over the control
/// grid at time `t`. Errors if the minimizer touches the grid boundary.
/// Constant intensity only.
pub fn hamiltonian_argmin(
    params: &ModelParams,
    intensity: &IntensitySpec,
    variant: &ProblemVariant,
    t: f64,
    grid: &ControlGrid,
) -> Result<ArgminReport, VerifyError> {
    let lambda = intensity.as_constant().ok_or(SolveError::NotApplicable(
        "the Hamiltonian check is defined for constant intensities",
    ))?;
    let sol = contract::solve(params, intensity, variant)?;
    let gp = params.gamma_p;
    let ga = params.gamma_a;
    let kappa = params.kappa;
    let bound = params.effort_bound;
    let phi = sol.phi0.eval(t);
    let m = sol.post_default_value_factor(t);

    let is_first_best = matches!(variant, ProblemVariant::FirstBest);
    let effort_term = |a: f64| gp * phi * (0.5 * kappa * a * a - a);
    let z_term = |z: f64| {
        let incentive = if is_first_best {
            0.0
        } else {
            // hidden effort: output drift is the best response to z
            let best = (z / kappa).clamp(-bound, bound);
            gp * phi * (0.5 * kappa * best * best - best)
        };
        incentive + gp * phi * 0.5 * ga * z * z + gp * gp * phi * (0.5 * z * z - z)
    };
    let k_term = |k: f64| gp * phi * lambda / ga * ((-ga * k).exp() - 1.0) + lambda * (gp * k).exp() * m;

    let z_nodes = grid.z.nodes();
    let k_nodes = grid.k.nodes();
    let z_vals: Vec<f64> = z_nodes.iter().map(|&z| z_term(z)).collect();
    let k_vals: Vec<f64> = k_nodes.iter().map(|&k| k_term(k)).collect();
    // at lambda = 0 the compensation control drops out of the Hamiltonian:
    // the whole axis minimizes, and the closed-form control represents it
    let k_degenerate = k_vals.iter().all(|&v| v == k_vals[0]);

    let mut best = f64::INFINITY;
    let mut best_idx = (0usize, 0usize, 0usize);
    match &grid.effort {
        Some(axis) => {
            let a_nodes = axis.nodes();
            let a_vals: Vec<f64> = a_nodes.iter().map(|&a| effort_term(a)).collect();
            for (ia, av) in a_vals.iter().enumerate() {
                for (iz, zv) in z_vals.iter().enumerate() {
                    let partial = av + zv;
                    for (ik, kv) in k_vals.iter().enumerate() {
                        let h = partial + kv;
                        if h < best {
                            best = h;
                            best_idx = (ia, iz, ik);
                        }
                    }
                }
            }
            if best_idx.0 == 0 || best_idx.0 == a_nodes.len() - 1 {
                return Err(VerifyError::ArgminOnBoundary { axis: "effort" });
            }
        }
        None => {
            for (iz, zv) in z_vals.iter().enumerate() {
                for (ik, kv) in k_vals.iter().enumerate() {
                    let h = zv + kv;
                    if h < best {
                        best = h;
                        best_idx = (0, iz, ik);
                    }
                }
            }
        }
    }
    if best_idx.1 == 0 || best_idx.1 == z_nodes.len() - 1 {
        return Err(VerifyError::ArgminOnBoundary { axis: "z" });
    }
    if !k_degenerate && (best_idx.2 == 0 || best_idx.2 == k_nodes.len() - 1) {
        return Err(VerifyError::ArgminOnBoundary { axis: "k" });
    }

    let closed_k = sol.k_star(t);
    let closed_h = if is_first_best {
        effort_term(sol.a_star) + z_term(sol.z_star) + k_term(closed_k)
    } else {
        z_term(sol.z_star) + k_term(closed_k)
    };
    let argmin_effort = grid.effort.as_ref().map(|a| a.nodes()[best_idx.0]);
    let argmin_z = z_nodes[best_idx.1];
    let argmin_k = if k_degenerate {
        closed_k
    } else {
        k_nodes[best_idx.2]
    };

    let mut err = (argmin_z - sol.z_star).abs().max((argmin_k - closed_k).abs());
    if let Some(a) = argmin_effort {
        err = err.max((a - sol.a_star).abs());
    }
    let cell = grid.z.cell.max(grid.k.cell);
    Ok(ArgminReport {
        t,
        argmin_effort,
        argmin_z,
        argmin_k,
        closed_effort: sol.a_star,
        closed_z: sol.z_star,
        closed_k,
        gap: best - closed_h,
        cell,
        max_control_error: err,
        within_one_cell: err <= cell + 1e-12,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeviationVerdict {
    /// Candidate beats the alternative by more than three combined SEs.
    Beaten,
    /// Identical utilities on every path (the alternative is the candidate).
    Tie,
    /// Difference within noise; reported, not failed.
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationRow {
    pub label: String,
    pub utility: Estimate,
    /// Mean pathwise utility advantage of the candidate effort.
    pub advantage: f64,
    pub advantage_se: f64,
    pub verdict: DeviationVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct DeviationReport {
    pub baseline: Estimate,
    pub rows: Vec<DeviationRow>,
}

impl DeviationReport {
    /// True when no alternative does better than the candidate (ties and
    /// inconclusive rows do not count against optimality).
    pub fn candidate_undominated(&self) -> bool {
        self.rows
            .iter()
            .all(|r| r.advantage >= -3.0 * r.advantage_se)
    }
}

/// The default deviation set: boundary efforts, scaled optima, and a
/// non-constant ramp, all clamped to the admissible band.
pub fn default_alternatives(params: &ModelParams, sol: &ContractSolution) -> Vec<(String, TimeFn)> {
    let bound = params.effort_bound;
    let a = sol.a_star;
    let horizon = params.horizon;
    let ramp_peak = (2.0 * a).clamp(-bound, bound);
    vec![
        ("zero".into(), TimeFn::Constant(0.0)),
        ("upper_bound".into(), TimeFn::Constant(bound)),
        ("lower_bound".into(), TimeFn::Constant(-bound)),
        ("half_optimal".into(), TimeFn::Constant(0.5 * a)),
        (
            "double_optimal_clamped".into(),
            TimeFn::Constant((2.0 * a).clamp(-bound, bound)),
        ),
        (
            "ramp".into(),
            TimeFn::varying(move |t| ramp_peak * t / horizon),
        ),
    ]
}

/// Simulates the agent's utility under the solution's effort and under
/// each alternative on common random numbers (identical halt times and
/// Brownian increments per path), and tests whether the candidate effort
/// is the agent's best response to the fixed wage.
pub fn deviation_test(
    params: &ModelParams,
    intensity: &IntensitySpec,
    sol: &ContractSolution,
    alternatives: &[(String, TimeFn)],
    cfg: &SimConfig,
) -> Result<DeviationReport, VerifyError> {
    let base_policy = WagePolicy::from_solution(sol);
    let (base_report, base_records) =
        simulate_paths_with_records(params, intensity, &base_policy, cfg)?;

    let mut rows = Vec::with_capacity(alternatives.len());
    for (label, effort) in alternatives {
        let policy = base_policy.clone().with_effort(effort.clone());
        let (alt_report, alt_records) =
            simulate_paths_with_records(params, intensity, &policy, cfg)?;
        let diffs: Vec<f64> = base_records
            .iter()
            .zip(&alt_records)
            .map(|(b, a)| b.u_a_realized - a.u_a_realized)
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        let se = (var / n).sqrt();
        let verdict = if diffs.iter().all(|&d| d == 0.0) {
            DeviationVerdict::Tie
        } else if mean > 3.0 * se {
            DeviationVerdict::Beaten
        } else {
            DeviationVerdict::Inconclusive
        };
        rows.push(DeviationRow {
            label: label.clone(),
            utility: alt_report.agent_utility,
            advantage: mean,
            advantage_se: se,
            verdict,
        });
    }
    Ok(DeviationReport {
        baseline: base_report.agent_utility,
        rows,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ParticipationCheck {
    /// Reservation utility `U_A(y_pc)`.
    pub target: f64,
    pub estimate: f64,
    pub gap: f64,
    /// `3 se + allowance`.
    pub threshold: f64,
    pub binding: bool,
}

/// Under the optimal policy the participation constraint binds: the
/// simulated agent utility must sit at `U_A(y_pc)` up to Monte-Carlo noise
/// plus a declared discretization allowance.
pub fn participation_binding(
    report: &SimReport,
    params: &ModelParams,
    allowance: f64,
) -> ParticipationCheck {
    let target = params.utility_agent(params.y_pc);
    let gap = (report.agent_utility.value - target).abs();
    let threshold = 3.0 * report.agent_utility.std_error + allowance;
    ParticipationCheck {
        target,
        estimate: report.agent_utility.value,
        gap,
        threshold,
        binding: gap <= threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::simulate_paths;

    fn params() -> ModelParams {
        ModelParams {
            gamma_p: 1.0,
            gamma_a: 1.0,
            kappa: 1.0,
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
    fn first_best_residual_is_small_and_the_control_is_caught() {
        let grid = StateGrid::standard();
        let report =
            hjb_residual(&params(), &unit(), &ProblemVariant::FirstBest, &grid, 1e-5).unwrap();
        assert!(report.pass, "scaled residual {}", report.max_scaled_residual);
        let bad = hjb_residual_perturbed(
            &params(),
            &unit(),
            &ProblemVariant::FirstBest,
            &grid,
            1e-5,
            0.01,
        )
        .unwrap();
        assert!(
            bad.max_scaled_residual >= 100.0 * report.tolerance,
            "negative control too weak: {}",
            bad.max_scaled_residual
        );
    }

    #[test]
    fn residual_floor_tracks_the_difference_step() {
        let grid = StateGrid {
            t_points: 20,
            x_points: 4,
            y_points: 4,
            ..StateGrid::standard()
        };
        let coarse =
            hjb_residual(&params(), &unit(), &ProblemVariant::MoralHazard, &grid, 2e-4).unwrap();
        let fine =
            hjb_residual(&params(), &unit(), &ProblemVariant::MoralHazard, &grid, 1e-4).unwrap();
        assert!(
            fine.max_scaled_residual <= coarse.max_scaled_residual,
            "halving the step must not raise the floor: {} -> {}",
            coarse.max_scaled_residual,
            fine.max_scaled_residual
        );
    }

    #[test]
    fn shutdown_free_residual_reduces_to_the_classical_equation() {
        let silent = IntensitySpec::constant(0.0);
        let grid = StateGrid {
            t_points: 25,
            x_points: 6,
            y_points: 6,
            ..StateGrid::standard()
        };
        for variant in [ProblemVariant::FirstBest, ProblemVariant::MoralHazard] {
            let report = hjb_residual(&params(), &silent, &variant, &grid, 1e-5).unwrap();
            assert!(report.pass, "{variant:?}: {}", report.max_scaled_residual);
        }
    }

    #[test]
    fn never_invest_mitigation_residual_matches_plain_moral_hazard() {
        let grid = StateGrid {
            t_points: 25,
            x_points: 6,
            y_points: 6,
            ..StateGrid::standard()
        };
        // i = 0.2 > T C_inv for unit parameters and theta = 0.9
        let mitigation = ProblemVariant::Mitigation {
            theta: 0.9,
            invest_cost: 0.2,
        };
        let a = hjb_residual(&params(), &unit(), &mitigation, &grid, 1e-5).unwrap();
        let b = hjb_residual(&params(), &unit(), &ProblemVariant::MoralHazard, &grid, 1e-5).unwrap();
        assert!(a.pass && b.pass);
        assert!((a.max_scaled_residual - b.max_scaled_residual).abs() < 1e-6);
    }

    #[test]
    fn mitigation_residual_with_active_cutoff_passes() {
        let p = ModelParams {
            gamma_a: 0.5,
            ..params()
        };
        let variant = ProblemVariant::Mitigation {
            theta: 0.9,
            invest_cost: 0.1,
        };
        let grid = StateGrid {
            t_points: 50,
            x_points: 6,
            y_points: 6,
            ..StateGrid::standard()
        };
        let report = hjb_residual(&p, &unit(), &variant, &grid, 1e-5).unwrap();
        assert!(report.pass, "scaled residual {}", report.max_scaled_residual);
    }

    #[test]
    fn first_best_argmin_on_the_reference_cube() {
        // closed form: a* = 1, Z* = 0.5, K*(0) ~ -0.078
        let report = hamiltonian_argmin(
            &params(),
            &unit(),
            &ProblemVariant::FirstBest,
            0.0,
            &ControlGrid::cube(&ProblemVariant::FirstBest, -2.0, 2.0, 0.01),
        )
        .unwrap();
        assert!(report.within_one_cell, "{report:?}");
        assert!((report.argmin_effort.unwrap() - 1.0).abs() <= 0.01 + 1e-12);
        assert!((report.argmin_z - 0.5).abs() <= 0.01 + 1e-12);
        assert!(report.gap >= -1e-12);
        assert!(report.gap <= 100.0 * report.cell * report.cell);
    }

    #[test]
    fn moral_hazard_argmin_examples() {
        let p = params();
        // at t = T the compensation control vanishes
        let sol = contract::solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let grid = ControlGrid::centered(&sol, 1.0, 0.5, 0.01);
        let report =
            hamiltonian_argmin(&p, &unit(), &ProblemVariant::MoralHazard, 1.0, &grid).unwrap();
        assert!(report.argmin_k.abs() <= 0.01 + 1e-12);
        assert!(report.within_one_cell);

        // gamma_p = 2, gamma_a = 1: Z* = 3/4
        let p2 = ModelParams {
            gamma_p: 2.0,
            ..params()
        };
        let sol2 = contract::solve(&p2, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let grid2 = ControlGrid::centered(&sol2, 0.0, 0.5, 0.01);
        let report2 =
            hamiltonian_argmin(&p2, &unit(), &ProblemVariant::MoralHazard, 0.0, &grid2).unwrap();
        assert!((report2.argmin_z - 0.75).abs() <= 0.01 + 1e-12);
    }

    #[test]
    fn argmin_location_converges_with_the_cell_size() {
        // off-center windows so the closed-form controls never coincide
        // with a grid node; the location error must stay below one cell
        // at every refinement
        let p = params();
        let sol = contract::solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        for cell in [0.04, 0.02, 0.01, 0.005] {
            let offset = 0.4 + 0.37 * cell;
            let grid = ControlGrid {
                effort: None,
                z: Axis::new(sol.z_star - offset, sol.z_star + offset, cell),
                k: Axis::new(sol.k_star(0.0) - offset, sol.k_star(0.0) + offset, cell),
            };
            let report =
                hamiltonian_argmin(&p, &unit(), &ProblemVariant::MoralHazard, 0.0, &grid).unwrap();
            assert!(
                report.max_control_error <= cell + 1e-12,
                "cell {cell}: error {}",
                report.max_control_error
            );
        }
    }

    #[test]
    fn tight_grid_reports_a_boundary_argmin() {
        let sol = contract::solve(&params(), &unit(), &ProblemVariant::MoralHazard).unwrap();
        let grid = ControlGrid {
            effort: None,
            z: Axis::new(0.8, 1.0, 0.01), // Z* = 2/3 lies outside
            k: Axis::new(-0.5, 0.5, 0.01),
        };
        drop(sol);
        assert!(matches!(
            hamiltonian_argmin(&params(), &unit(), &ProblemVariant::MoralHazard, 0.0, &grid),
            Err(VerifyError::ArgminOnBoundary { axis: "z" })
        ));
    }

    #[test]
    fn identical_alternative_ties_exactly() {
        let p = params();
        let sol = contract::solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let cfg = SimConfig {
            n_paths: 300,
            n_steps: 64,
            master_seed: 13,
        };
        let alternatives = vec![("itself".to_string(), TimeFn::Constant(sol.a_star))];
        let report = deviation_test(&p, &unit(), &sol, &alternatives, &cfg).unwrap();
        assert_eq!(report.rows[0].verdict, DeviationVerdict::Tie);
        assert_eq!(report.rows[0].advantage, 0.0);
        assert!(report.candidate_undominated());
    }

    #[test]
    fn crude_deviations_lose_quickly() {
        let p = params();
        let sol = contract::solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let cfg = SimConfig {
            n_paths: 4000,
            n_steps: 128,
            master_seed: 29,
        };
        let alternatives = vec![
            ("zero".to_string(), TimeFn::Constant(0.0)),
            ("triple".to_string(), TimeFn::Constant(2.0)),
        ];
        let report = deviation_test(&p, &unit(), &sol, &alternatives, &cfg).unwrap();
        for row in &report.rows {
            assert_eq!(row.verdict, DeviationVerdict::Beaten, "{}", row.label);
        }
    }

    #[test]
    fn participation_binds_at_the_reservation_utility() {
        let p = ModelParams {
            y_pc: 0.5,
            ..params()
        };
        let sol = contract::solve(&p, &unit(), &ProblemVariant::FirstBest).unwrap();
        let policy = WagePolicy::from_solution(&sol);
        let cfg = SimConfig {
            n_paths: 20_000,
            n_steps: 256,
            master_seed: 31,
        };
        let report = simulate_paths(&p, &unit(), &policy, &cfg).unwrap();
        let check = participation_binding(&report, &p, 1.0 / 256.0);
        // U_A(0.5) = -e^{-0.5}
        assert!((check.target + 0.606_530_659_712_633).abs() < 1e-12);
        assert!(check.binding, "gap {} threshold {}", check.gap, check.threshold);
    }

    #[test]
    fn overpaying_the_agent_shows_up_as_slack_participation() {
        let p = params();
        let sol = contract::solve(&p, &unit(), &ProblemVariant::MoralHazard).unwrap();
        let policy = WagePolicy::from_solution(&sol).with_y0(p.y_pc + 0.3);
        let cfg = SimConfig {
            n_paths: 20_000,
            n_steps: 256,
            master_seed: 37,
        };
        let report = simulate_paths(&p, &unit(), &policy, &cfg).unwrap();
        // agent utility ~ U_A(y_pc + 0.3) > U_A(y_pc)
        let expected = p.utility_agent(p.y_pc + 0.3);
        let gap = (report.agent_utility.value - expected).abs();
        assert!(gap <= 3.0 * report.agent_utility.std_error + 1.0 / 256.0);
        let check = participation_binding(&report, &p, 1.0 / 256.0);
        assert!(!check.binding);
        assert!(report.agent_utility.value > p.utility_agent(p.y_pc));
    }
}
