//! Byte-stable output formatting and the solution JSON layout.

use contract_lab::contract::ContractSolution;
use contract_lab::model::ProblemVariant;
use serde::Serialize;

/// Fixed float formatting for CSV cells: 9 significant digits, scientific,
/// '.' decimal separator. Identical inputs always produce identical bytes.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// One CSV line; fields joined by ',' and terminated by '\n'.
pub fn csv_line(fields: &[String]) -> String {
    let mut line = fields.join(",");
    line.push('\n');
    line
}

#[derive(Serialize)]
#[serde(untagged)]
pub enum CoefficientDto {
    Constant(f64),
    Grid(Vec<(f64, f64)>),
}

#[derive(Serialize)]
pub struct MitigationDto {
    pub c_inv: f64,
    pub t_max: Option<f64>,
    pub theta: f64,
    pub invest_cost: f64,
    pub k_star_mitigation_grid: Vec<(f64, f64)>,
}

/// Serialized form of a [`ContractSolution`].
#[derive(Serialize)]
pub struct SolutionDto {
    pub variant: ProblemVariant,
    pub y0: f64,
    pub z_star: f64,
    pub a_star: f64,
    pub c1: CoefficientDto,
    pub c2: CoefficientDto,
    pub k_star_grid: Vec<(f64, f64)>,
    pub phi0_grid: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mitigation: Option<MitigationDto>,
}

const GRID_POINTS: usize = 201;

fn time_grid(horizon: f64) -> Vec<f64> {
    (0..GRID_POINTS)
        .map(|i| horizon * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

impl SolutionDto {
    pub fn from_solution(sol: &ContractSolution) -> Self {
        let coef = sol.coefficients();
        let grid = time_grid(sol.params().horizon);
        let sample = |f: &dyn Fn(f64) -> f64| -> Vec<(f64, f64)> {
            grid.iter().map(|&t| (t, f(t))).collect()
        };
        let coefficient = |f: &dyn Fn(f64) -> f64, constant: Option<f64>| match constant {
            Some(v) => CoefficientDto::Constant(v),
            None => CoefficientDto::Grid(sample(f)),
        };
        let k_star_grid = sample(&|t| sol.k_star(t));
        SolutionDto {
            variant: sol.variant,
            y0: sol.y0,
            z_star: sol.z_star,
            a_star: sol.a_star,
            c1: coefficient(&|t| coef.c1(t), coef.constant_c1()),
            c2: coefficient(&|t| coef.c2(t), coef.constant_c2()),
            phi0_grid: sample(&|t| sol.phi0.eval(t)),
            mitigation: sol.mitigation.map(|p| MitigationDto {
                c_inv: p.c_inv,
                t_max: p.t_max,
                theta: p.theta,
                invest_cost: p.invest_cost,
                k_star_mitigation_grid: k_star_grid.clone(),
            }),
            k_star_grid,
        }
    }
}

/// Pretty JSON with a trailing newline; serde_json's formatting is
/// deterministic, so outputs are byte-stable.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable report");
    bytes.push(b'\n');
    bytes
}
