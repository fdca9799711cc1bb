//! Parameter sweeps over solved contracts, emitted as CSV or JSON.
//!
//! A sweep walks one or two parameter axes over a fixed base configuration
//! and evaluates named metrics at every grid node. Nodes evaluate in
//! parallel; rows are emitted in deterministic grid order (first axis
//! slowest) regardless of thread count. Nodes whose configuration fails
//! validation produce `NA` cells and a reason instead of aborting the
//! sweep.

use contract_lab::contract::{self, KSign};
use contract_lab::mitigation;
use contract_lab::model::{IntensitySpec, ModelConfig, ProblemVariant};
use rayon::prelude::*;
use serde::Deserialize;

use crate::output::fmt_float;

#[derive(Debug, Clone, Deserialize)]
pub struct AxisSpec {
    pub param: String,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SweepSpec {
    /// One or two swept axes.
    pub axes: Vec<AxisSpec>,
    /// Base configuration applied at every node before the axis values.
    pub fixed: ModelConfig,
    pub metrics: Vec<String>,
    /// Evaluation time for `k_star_at` metrics when `t` is not an axis.
    #[serde(default)]
    pub t: Option<f64>,
    /// Draw count for Monte-Carlo metrics (default 16384).
    #[serde(default)]
    pub mc_draws: Option<u64>,
}

pub const KNOWN_PARAMS: &[&str] = &[
    "gamma_p",
    "gamma_a",
    "kappa",
    "horizon",
    "y_pc",
    "x0",
    "effort_bound",
    "lambda",
    "theta",
    "invest_cost",
    "t",
];

pub const KNOWN_METRICS: &[&str] = &[
    "sign_k0",
    "k0_fb",
    "k0_mh",
    "expected_risk_share_paper",
    "expected_risk_share_mc",
    "ratio_phi",
    "t_max",
    "c_inv",
    "k_star_at",
    "k_star_plain_at",
];

pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&crate::output::csv_line(&self.header));
        for row in &self.rows {
            out.push_str(&crate::output::csv_line(row));
        }
        out
    }
}

pub fn validate_spec(spec: &SweepSpec) -> Result<(), String> {
    if spec.axes.is_empty() || spec.axes.len() > 2 {
        return Err(format!("a sweep takes 1 or 2 axes, got {}", spec.axes.len()));
    }
    for axis in &spec.axes {
        if axis.count < 2 {
            return Err(format!("axis '{}' needs count >= 2", axis.param));
        }
        if !KNOWN_PARAMS.contains(&axis.param.as_str()) {
            return Err(format!(
                "unknown sweep parameter '{}'; known: {}",
                axis.param,
                KNOWN_PARAMS.join(", ")
            ));
        }
        if !(axis.min.is_finite() && axis.max.is_finite() && axis.min < axis.max) {
            return Err(format!("axis '{}' needs finite min < max", axis.param));
        }
    }
    if spec.metrics.is_empty() {
        return Err("at least one metric is required".into());
    }
    for metric in &spec.metrics {
        if !KNOWN_METRICS.contains(&metric.as_str()) {
            return Err(format!(
                "unknown metric '{metric}'; known: {}",
                KNOWN_METRICS.join(", ")
            ));
        }
    }
    Ok(())
}

type SolveCache = std::sync::Mutex<std::collections::HashMap<String, Result<contract::ContractSolution, String>>>;

struct NodeContext<'a> {
    config: ModelConfig,
    t: Option<f64>,
    seed: u64,
    mc_draws: u64,
    /// Sweep-wide cache; axes that leave the configuration untouched
    /// (like the evaluation time `t`) then solve once, not per node.
    cache: &'a SolveCache,
}

fn apply_param(config: &mut ModelConfig, t_ctx: &mut Option<f64>, name: &str, value: f64) -> Result<(), String> {
    match name {
        "gamma_p" => config.params.gamma_p = value,
        "gamma_a" => config.params.gamma_a = value,
        "kappa" => config.params.kappa = value,
        "horizon" => config.params.horizon = value,
        "y_pc" => config.params.y_pc = value,
        "x0" => config.params.x0 = value,
        "effort_bound" => config.params.effort_bound = value,
        "lambda" => match &mut config.intensity {
            IntensitySpec::Constant { lambda } => *lambda = value,
            IntensitySpec::Grid { .. } => {
                return Err("sweeping 'lambda' requires a constant-intensity base config".into())
            }
        },
        "theta" => match &mut config.variant {
            ProblemVariant::Mitigation { theta, .. } => *theta = value,
            _ => return Err("sweeping 'theta' requires the mitigation variant".into()),
        },
        "invest_cost" => match &mut config.variant {
            ProblemVariant::Mitigation { invest_cost, .. } => *invest_cost = value,
            _ => return Err("sweeping 'invest_cost' requires the mitigation variant".into()),
        },
        "t" => *t_ctx = Some(value),
        other => return Err(format!("unknown parameter '{other}'")),
    }
    Ok(())
}

enum Cell {
    Value(String),
    Na(String),
}

fn float_cell(x: f64) -> Cell {
    Cell::Value(fmt_float(x))
}

fn solve_cell(ctx: &NodeContext, variant: &ProblemVariant) -> Result<contract::ContractSolution, String> {
    let key = serde_json::to_string(&(&ctx.config.params, &ctx.config.intensity, variant))
        .expect("configurations serialize");
    if let Some(hit) = ctx.cache.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let result = contract::solve(&ctx.config.params, &ctx.config.intensity, variant)
        .map_err(|e| e.to_string());
    ctx.cache
        .lock()
        .unwrap()
        .entry(key)
        .or_insert(result)
        .clone()
}

fn eval_metric(ctx: &NodeContext, metric: &str) -> Cell {
    let own_variant = ctx.config.variant;
    match metric {
        "sign_k0" => {
            match contract::sign_of_k(&ctx.config.params, &ctx.config.intensity, &own_variant) {
                Ok(KSign::Negative) => Cell::Value("-1".into()),
                Ok(KSign::Zero) => Cell::Value("0".into()),
                Ok(KSign::Positive) => Cell::Value("1".into()),
                Err(e) => Cell::Na(e.to_string()),
            }
        }
        "k0_fb" => match solve_cell(ctx, &ProblemVariant::FirstBest) {
            Ok(sol) => float_cell(sol.k0()),
            Err(e) => Cell::Na(e),
        },
        "k0_mh" => match solve_cell(ctx, &ProblemVariant::MoralHazard) {
            Ok(sol) => float_cell(sol.k0()),
            Err(e) => Cell::Na(e),
        },
        "expected_risk_share_paper" | "expected_risk_share_mc" => {
            match solve_cell(ctx, &own_variant)
                .and_then(|sol| {
                    contract::expected_risk_share(&sol, ctx.mc_draws, ctx.seed)
                        .map_err(|e| e.to_string())
                }) {
                Ok(e) => float_cell(if metric == "expected_risk_share_paper" {
                    e.paper_form
                } else {
                    e.mc_estimate
                }),
                Err(e) => Cell::Na(e),
            }
        }
        "ratio_phi" => match contract::value_ratio(&ctx.config.params, &ctx.config.intensity) {
            Ok(r) => float_cell(r),
            Err(e) => Cell::Na(e.to_string()),
        },
        "t_max" | "c_inv" => match own_variant {
            ProblemVariant::Mitigation { theta, invest_cost } => {
                let c = mitigation::c_inv(&ctx.config.params, theta);
                if metric == "c_inv" {
                    float_cell(c)
                } else {
                    match mitigation::cutoff_time(ctx.config.params.horizon, c, invest_cost) {
                        Some(tm) => float_cell(tm),
                        None => Cell::Na("investing is never optimal".into()),
                    }
                }
            }
            _ => Cell::Na(format!("metric '{metric}' requires the mitigation variant")),
        },
        "k_star_at" | "k_star_plain_at" => {
            let Some(t) = ctx.t else {
                return Cell::Na(format!(
                    "metric '{metric}' needs 't' as an axis or a fixed 't' value"
                ));
            };
            let variant = if metric == "k_star_plain_at" {
                ProblemVariant::MoralHazard
            } else {
                own_variant
            };
            match solve_cell(ctx, &variant) {
                Ok(sol) => float_cell(sol.k_star(t)),
                Err(e) => Cell::Na(e),
            }
        }
        other => Cell::Na(format!("unknown metric '{other}'")),
    }
}

fn axis_values(axis: &AxisSpec) -> Vec<f64> {
    (0..axis.count)
        .map(|i| axis.min + (axis.max - axis.min) * i as f64 / (axis.count - 1) as f64)
        .collect()
}

fn mix_seed(master: u64, index: u64) -> u64 {
    master ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs the sweep. Rows come back in grid order: the first axis varies
/// slowest, the last fastest.
pub fn run_sweep(spec: &SweepSpec, master_seed: u64) -> Result<SweepTable, String> {
    validate_spec(spec)?;
    let grids: Vec<Vec<f64>> = spec.axes.iter().map(axis_values).collect();
    let node_count: usize = grids.iter().map(Vec::len).product();
    let mc_draws = spec.mc_draws.unwrap_or(16_384);
    let cache: SolveCache = Default::default();

    let rows: Vec<Vec<String>> = (0..node_count)
        .into_par_iter()
        .map(|idx| {
            // decode idx into per-axis indices, last axis fastest
            let mut rest = idx;
            let mut coords = vec![0usize; grids.len()];
            for ax in (0..grids.len()).rev() {
                coords[ax] = rest % grids[ax].len();
                rest /= grids[ax].len();
            }
            let values: Vec<f64> = coords.iter().zip(&grids).map(|(&i, g)| g[i]).collect();

            let mut config = spec.fixed.clone();
            let mut t_ctx = spec.t;
            let mut reason = String::new();
            for (axis, &value) in spec.axes.iter().zip(&values) {
                if let Err(e) = apply_param(&mut config, &mut t_ctx, &axis.param, value) {
                    reason = e;
                    break;
                }
            }
            if reason.is_empty() {
                let report = contract_lab::model::validate(
                    &config.params,
                    &config.intensity,
                    &config.variant,
                );
                if !report.is_ok() {
                    reason = report.violations.join("; ");
                }
            }

            let mut row: Vec<String> = values.iter().map(|&v| fmt_float(v)).collect();
            if reason.is_empty() {
                let ctx = NodeContext {
                    config,
                    t: t_ctx,
                    seed: mix_seed(master_seed, idx as u64),
                    mc_draws,
                    cache: &cache,
                };
                for metric in &spec.metrics {
                    match eval_metric(&ctx, metric) {
                        Cell::Value(v) => row.push(v),
                        Cell::Na(why) => {
                            row.push("NA".into());
                            if reason.is_empty() {
                                reason = why;
                            }
                        }
                    }
                }
            } else {
                row.extend(spec.metrics.iter().map(|_| "NA".to_string()));
            }
            row.push(reason);
            row
        })
        .collect();

    let mut header: Vec<String> = spec.axes.iter().map(|a| a.param.clone()).collect();
    header.extend(spec.metrics.iter().cloned());
    header.push("reason".into());
    Ok(SweepTable { header, rows })
}
