//! Preset sweep bundle producing the reference figure datasets as CSV:
//! sign maps of the time-0 escrow over the risk aversions, escrow-level
//! curves against each model parameter, expected risk-share surfaces,
//! moral-hazard/risk-sharing value-ratio surfaces, and the mitigation
//! compensation schedules around the investment cutoff.

use contract_lab::model::{IntensitySpec, ModelConfig, ModelParams, ProblemVariant};

use crate::sweep::{run_sweep, AxisSpec, SweepSpec};

fn base_params() -> ModelParams {
    ModelParams {
        gamma_p: 1.0,
        gamma_a: 1.0,
        kappa: 1.0,
        horizon: 1.0,
        y_pc: 0.0,
        x0: 0.0,
        effort_bound: 1e6,
    }
}

fn config(params: ModelParams, lambda: f64, variant: ProblemVariant) -> ModelConfig {
    ModelConfig {
        params,
        intensity: IntensitySpec::constant(lambda),
        variant,
    }
}

fn axis(param: &str, min: f64, max: f64, count: usize) -> AxisSpec {
    AxisSpec {
        param: param.into(),
        min,
        max,
        count,
    }
}

fn metrics(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn tag(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

/// The full preset list as `(file name, sweep spec)` pairs.
pub fn presets() -> Vec<(String, SweepSpec)> {
    let mut out = Vec::new();

    // sign of K*(0) over the risk aversions, both variants, kappa in {1, 2}
    for (variant, vtag) in [
        (ProblemVariant::FirstBest, "first_best"),
        (ProblemVariant::MoralHazard, "moral_hazard"),
    ] {
        for kappa in [1.0, 2.0] {
            out.push((
                format!("fig_sign_k0_{vtag}_kappa{}.csv", tag(kappa)),
                SweepSpec {
                    axes: vec![axis("gamma_a", 0.1, 10.0, 100), axis("gamma_p", 0.1, 10.0, 100)],
                    fixed: config(ModelParams { kappa, ..base_params() }, 1.0, variant),
                    metrics: metrics(&["sign_k0"]),
                    t: None,
                    mc_draws: None,
                },
            ));
        }
    }

    // escrow-level curves K*(0) under both variants against each
    // parameter; `None` leaves a risk aversion at its base value (the
    // swept axis overrides one of them anyway)
    type GammaPair = (Option<f64>, Option<f64>);
    let escrow_curves: &[(&str, f64, f64, &[GammaPair])] = &[
        ("gamma_p", 0.1, 10.0, &[(None, Some(0.5)), (None, Some(1.5)), (None, Some(5.0))]),
        ("gamma_a", 0.1, 10.0, &[(Some(0.5), None), (Some(1.0), None), (Some(3.0), None)]),
        ("lambda", 0.1, 5.0, &[(Some(4.0), Some(4.0)), (Some(1.0), Some(1.0))]),
        ("kappa", 0.2, 5.0, &[(Some(1.0), Some(1.0)), (Some(1.0), Some(3.0)), (Some(3.0), Some(3.0))]),
        ("horizon", 0.1, 5.0, &[(Some(1.0), Some(1.0)), (Some(1.0), Some(3.0)), (Some(3.0), Some(3.0))]),
    ];
    for &(param, min, max, combos) in escrow_curves {
        for &(gamma_p, gamma_a) in combos {
            let mut params = base_params();
            if let Some(g) = gamma_p {
                params.gamma_p = g;
            }
            if let Some(g) = gamma_a {
                params.gamma_a = g;
            }
            let label = match param {
                "gamma_p" => format!("gamma_a{}", tag(params.gamma_a)),
                "gamma_a" => format!("gamma_p{}", tag(params.gamma_p)),
                _ => format!("gammas{}_{}", tag(params.gamma_p), tag(params.gamma_a)),
            };
            out.push((
                format!("fig_k0_vs_{param}_{label}.csv"),
                SweepSpec {
                    axes: vec![axis(param, min, max, 200)],
                    fixed: config(params, 1.0, ProblemVariant::MoralHazard),
                    metrics: metrics(&["k0_fb", "k0_mh"]),
                    t: None,
                    mc_draws: None,
                },
            ));
        }
    }

    // expected risk-share surfaces and value-ratio surfaces over the
    // risk aversions for several intensities
    for lambda in [0.5, 1.0, 5.0] {
        for (variant, vtag) in [
            (ProblemVariant::FirstBest, "first_best"),
            (ProblemVariant::MoralHazard, "moral_hazard"),
        ] {
            out.push((
                format!("fig_expected_value_{vtag}_lambda{}.csv", tag(lambda)),
                SweepSpec {
                    axes: vec![axis("gamma_a", 0.2, 10.0, 50), axis("gamma_p", 0.2, 10.0, 50)],
                    fixed: config(base_params(), lambda, variant),
                    metrics: metrics(&["expected_risk_share_paper", "expected_risk_share_mc"]),
                    t: None,
                    mc_draws: Some(4096),
                },
            ));
        }
        out.push((
            format!("fig_ratio_lambda{}.csv", tag(lambda)),
            SweepSpec {
                axes: vec![axis("gamma_a", 0.2, 10.0, 50), axis("gamma_p", 0.2, 10.0, 50)],
                fixed: config(base_params(), lambda, ProblemVariant::MoralHazard),
                metrics: metrics(&["ratio_phi"]),
                t: None,
                mc_draws: None,
            },
        ));
    }

    // mitigation schedules: K*(t) with and without the investment option
    let mit_params = ModelParams {
        gamma_a: 0.5,
        ..base_params()
    };
    let mit_metrics = &["k_star_at", "k_star_plain_at", "t_max", "c_inv"];
    for lambda in [0.5, 1.0, 5.0] {
        out.push((
            format!("fig_mitigation_k_star_lambda{}.csv", tag(lambda)),
            SweepSpec {
                axes: vec![axis("t", 0.0, 1.0, 400)],
                fixed: config(
                    mit_params,
                    lambda,
                    ProblemVariant::Mitigation {
                        theta: 0.9,
                        invest_cost: 0.1,
                    },
                ),
                metrics: metrics(mit_metrics),
                t: None,
                mc_draws: None,
            },
        ));
    }
    for invest_cost in [0.05, 0.1, 0.15] {
        out.push((
            format!("fig_mitigation_k_star_invest{}.csv", tag(invest_cost)),
            SweepSpec {
                axes: vec![axis("t", 0.0, 1.0, 400)],
                fixed: config(
                    mit_params,
                    1.0,
                    ProblemVariant::Mitigation {
                        theta: 0.9,
                        invest_cost,
                    },
                ),
                metrics: metrics(mit_metrics),
                t: None,
                mc_draws: None,
            },
        ));
    }
    for theta in [0.85, 0.9] {
        out.push((
            format!("fig_mitigation_k_star_theta{}.csv", tag(theta)),
            SweepSpec {
                axes: vec![axis("t", 0.0, 1.0, 400)],
                fixed: config(
                    mit_params,
                    1.0,
                    ProblemVariant::Mitigation {
                        theta,
                        invest_cost: 0.1,
                    },
                ),
                metrics: metrics(mit_metrics),
                t: None,
                mc_draws: None,
            },
        ));
    }

    out
}

/// Writes every preset dataset into `dir`, returning the file names.
pub fn write_all(dir: &std::path::Path, master_seed: u64) -> Result<Vec<String>, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("cannot create {}: {e}", dir.display()))?;
    let mut written = Vec::new();
    for (name, spec) in presets() {
        let table = run_sweep(&spec, master_seed)?;
        let path = dir.join(&name);
        std::fs::write(&path, table.to_csv())
            .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        written.push(name);
    }
    Ok(written)
}
