//! Batch experiments: error of the extrapolated estimate against the number
//! of nodes `m`, for one or several evolution times, written as CSV.

use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chebyshev::{self, InterpolationPlan};
use crate::error::{invalid, Error, Result};
use crate::evolution::{random_bitstring_state, random_pauli_observable, Observable, StateVector, TrotterEvaluator};
use crate::measurement::{self, ShotSampler};
use crate::product_formula::{FormulaDescriptor, FormulaKind, StagedFormula};
use crate::richardson::{self, RichardsonPlan};
use crate::rng;
use crate::terms::{heisenberg_chain, lambda_param, NormMode, TermSum};

pub const CSV_HEADER: [&str; 9] = [
    "experiment_id",
    "T",
    "m",
    "d_max",
    "c_trot",
    "err_extrapolated",
    "err_plain",
    "method",
    "measurement",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    #[serde(rename = "L")]
    pub length: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormulaConfig {
    pub kind: FormulaKind,
    #[serde(default = "default_k")]
    pub k: usize,
}

fn default_k() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Richardson,
    Interpolation,
}

impl Method {
    fn label(self) -> &'static str {
        match self {
            Method::Richardson => "richardson",
            Method::Interpolation => "interpolation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasurementConfig {
    Exact,
    /// Shot sampling; either a fixed `N` or a precision `eps_data` (relative
    /// to `||O||`) with failure probability `delta` split over the nodes.
    Incoherent {
        #[serde(rename = "N", default)]
        shots: Option<u64>,
        #[serde(default)]
        eps_data: Option<f64>,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Additive noise bounded by `eps_data`: uniform, or the worst-case sign
    /// pattern when `adversarial` is set.
    BoundedNoise {
        eps_data: f64,
        #[serde(default)]
        adversarial: bool,
    },
}

fn default_delta() -> f64 {
    0.01
}

impl MeasurementConfig {
    fn label(&self) -> String {
        match self {
            MeasurementConfig::Exact => "exact".into(),
            MeasurementConfig::Incoherent { shots: Some(n), .. } => format!("incoherent(N={n})"),
            MeasurementConfig::Incoherent { eps_data, delta, .. } => {
                format!("incoherent(eps_data={},delta={delta})", eps_data.unwrap_or(f64::NAN))
            }
            MeasurementConfig::BoundedNoise { eps_data, adversarial } => {
                let mode = if *adversarial { "adversarial" } else { "uniform" };
                format!("bounded_noise({eps_data},{mode})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MinStepsRule {
    Explicit {
        r: u64,
    },
    /// `r = ceil((Lambda T)^{3/2})` with `Lambda = sum ||H_g||`.
    #[default]
    LambdaPower,
}

/// One time or a list of times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Times {
    One(f64),
    Many(Vec<f64>),
}

impl Times {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Times::One(t) => vec![*t],
            Times::Many(ts) => ts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableConfig {
    #[serde(default = "default_n_terms")]
    pub n_terms: usize,
}

fn default_n_terms() -> usize {
    3
}

impl Default for ObservableConfig {
    fn default() -> Self {
        Self { n_terms: default_n_terms() }
    }
}

/// One experiment, read from a JSON document.
///
/// The Hamiltonian, initial bit string and observable all derive from
/// `system.seed`; the master seed only drives measurement randomness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub experiment_id: String,
    pub system: SystemConfig,
    pub time: Times,
    pub formula: FormulaConfig,
    pub method: Method,
    pub m_values: Vec<usize>,
    #[serde(default = "default_measurement")]
    pub measurement: MeasurementConfig,
    #[serde(default)]
    pub min_steps_rule: MinStepsRule,
    #[serde(default)]
    pub observable: ObservableConfig,
    /// Lambda estimate used to pick the interpolation interval.
    #[serde(default = "default_lambda_mode")]
    pub lambda_mode: NormMode,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_measurement() -> MeasurementConfig {
    MeasurementConfig::Exact
}

fn default_lambda_mode() -> NormMode {
    NormMode::Bound
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_values.is_empty() {
            return Err(invalid("m_values must not be empty"));
        }
        if self.m_values.contains(&0) {
            return Err(invalid("m_values must be positive"));
        }
        if self.method == Method::Interpolation && self.m_values.iter().any(|m| m % 2 != 0) {
            return Err(invalid("interpolation needs even m_values"));
        }
        if self.time.values().is_empty() || self.time.values().iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid("times must be finite and non-negative"));
        }
        if let MinStepsRule::Explicit { r: 0 } = self.min_steps_rule {
            return Err(invalid("explicit min steps must be >= 1"));
        }
        match self.measurement {
            MeasurementConfig::Incoherent { shots: None, eps_data: None, .. } => {
                return Err(invalid("incoherent measurement needs N or eps_data"))
            }
            MeasurementConfig::Incoherent { shots: Some(0), .. } => return Err(invalid("N must be >= 1")),
            MeasurementConfig::BoundedNoise { eps_data, .. } if !(eps_data >= 0.0) => {
                return Err(invalid("eps_data must be non-negative"))
            }
            _ => {}
        }
        self.descriptor(1).build()?;
        Ok(())
    }

    fn descriptor(&self, gamma_count: usize) -> FormulaDescriptor {
        FormulaDescriptor { kind: self.formula.kind, k: self.formula.k, gamma_count }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub experiment_id: String,
    #[serde(rename = "T")]
    pub big_t: f64,
    pub m: usize,
    pub d_max: u64,
    pub c_trot: u64,
    pub err_extrapolated: f64,
    pub err_plain: f64,
    pub method: String,
    pub measurement: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowFailure {
    #[serde(rename = "T")]
    pub big_t: f64,
    pub m: usize,
    pub reason: String,
}

/// Extra per-row quantities not written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowDetail {
    #[serde(rename = "T")]
    pub big_t: f64,
    pub m: usize,
    /// Signed step counts in plan order.
    pub nodes: Vec<i64>,
    /// Linear weights mapping node values to the estimate.
    pub weights: Vec<f64>,
    /// `sum |weights|`.
    pub amplification: f64,
    pub exact: f64,
    /// Estimate from noiseless node values.
    pub noiseless_estimate: f64,
    pub estimate: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ExperimentTable {
    pub rows: Vec<Row>,
    pub details: Vec<RowDetail>,
    pub failures: Vec<RowFailure>,
}

impl ExperimentTable {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(CSV_HEADER)?;
        for row in &self.rows {
            out.write_record([
                row.experiment_id.clone(),
                row.big_t.to_string(),
                row.m.to_string(),
                row.d_max.to_string(),
                row.c_trot.to_string(),
                row.err_extrapolated.to_string(),
                row.err_plain.to_string(),
                row.method.clone(),
                row.measurement.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
    }

    pub fn extend(&mut self, other: ExperimentTable) {
        self.rows.extend(other.rows);
        self.details.extend(other.details);
        self.failures.extend(other.failures);
    }
}

/// Hamiltonian, state and observable fixed by an experiment's `system` block.
pub struct Problem {
    pub terms: TermSum,
    pub formula: StagedFormula,
    pub state: StateVector,
    pub observable: Observable,
}

impl Problem {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let terms = heisenberg_chain(config.system.length, config.system.seed)?;
        let formula = config.descriptor(terms.gamma()).build()?;
        let state = random_bitstring_state(config.system.length, rng::child_seed(config.system.seed, "state"))?;
        let observable = random_pauli_observable(
            config.system.length,
            config.observable.n_terms,
            rng::child_seed(config.system.seed, "observable"),
        )?;
        Ok(Self { terms, formula, state, observable })
    }
}

/// `ceil((Lambda T)^{3/2})` with `Lambda = sum ||H_g||`, at least 1.
pub fn lambda_power_min_steps(terms: &TermSum, big_t: f64) -> u64 {
    ((terms.norm_sum() * big_t).powf(1.5).ceil() as u64).max(1)
}

struct NodePlan {
    nodes: Vec<i64>,
    weights: Vec<f64>,
}

fn build_plan(config: &ExperimentConfig, problem: &Problem, big_t: f64, m: usize) -> Result<NodePlan> {
    let formula = &problem.formula;
    match config.method {
        Method::Richardson => {
            let min_steps = match config.min_steps_rule {
                MinStepsRule::Explicit { r } => r,
                MinStepsRule::LambdaPower => lambda_power_min_steps(&problem.terms, big_t),
            };
            let r_scale = richardson::choose_r_scale(m, min_steps)?;
            let plan: RichardsonPlan = richardson::make_plan(m, r_scale, formula.sigma() as u32)?;
            Ok(NodePlan { nodes: plan.nodes().iter().map(|&r| r as i64).collect(), weights: plan.weights().to_vec() })
        }
        Method::Interpolation => {
            let ell = if big_t == 0.0 {
                0.5
            } else {
                let lambda = lambda_param(&problem.terms, formula.order(), formula.sigma(), m, m, config.lambda_mode)?.value;
                chebyshev::choose_ell_snapped(formula.a_max(), formula.stages(), lambda, big_t, formula.order(), m)?
            };
            let plan = InterpolationPlan::new(m, ell)?;
            let s = plan.snapped_s();
            Ok(NodePlan { nodes: plan.snapped_nodes().to_vec(), weights: chebyshev::lagrange_basis(&s, 0.0) })
        }
    }
}

fn shots_for(measurement: &MeasurementConfig, m: usize) -> Result<u64> {
    match *measurement {
        MeasurementConfig::Incoherent { shots: Some(n), .. } => Ok(n),
        MeasurementConfig::Incoherent { eps_data: Some(eps), delta, .. } => measurement::hoeffding_samples(eps, delta / m as f64),
        _ => Ok(1),
    }
}

fn repetitions(measurement: &MeasurementConfig, m: usize) -> Result<u64> {
    match *measurement {
        MeasurementConfig::Exact => Ok(1),
        MeasurementConfig::Incoherent { .. } => shots_for(measurement, m),
        MeasurementConfig::BoundedNoise { eps_data, .. } if eps_data > 0.0 && eps_data < 1.0 => {
            measurement::iqae_grover_calls(eps_data, m, default_delta())
        }
        MeasurementConfig::BoundedNoise { .. } => Ok(1),
    }
}

fn row_seed(master: u64, config: &ExperimentConfig, big_t: f64, m: usize) -> u64 {
    rng::child_seed(master, &format!("{}/T={}/m={m}", config.experiment_id, big_t))
}

fn evaluate_row(config: &ExperimentConfig, problem: &Problem, big_t: f64, m: usize, master: u64) -> Result<(Row, RowDetail)> {
    let plan = build_plan(config, problem, big_t, m)?;
    let evaluator = TrotterEvaluator::new(&problem.formula, &problem.terms, big_t, problem.state.clone(), problem.observable.clone())?;
    let exact = evaluator.exact()?;
    let seed = row_seed(master, config, big_t, m);
    let shots = shots_for(&config.measurement, m)?;
    let sampler = match config.measurement {
        MeasurementConfig::Incoherent { .. } => Some(ShotSampler::new(&problem.observable)?),
        _ => None,
    };

    let noiseless: Vec<f64> = plan.nodes.par_iter().map(|&r| evaluator.value(r)).collect::<Result<_>>()?;
    let noiseless_estimate = richardson::compensated_dot(&plan.weights, &noiseless);
    let bias_sign = if noiseless_estimate >= exact { 1.0 } else { -1.0 };
    let measured: Vec<f64> = plan
        .nodes
        .par_iter()
        .enumerate()
        .map(|(k, &r)| -> Result<f64> {
            let node_seed = measurement::node_seed(seed, k);
            match config.measurement {
                MeasurementConfig::Exact => Ok(noiseless[k]),
                MeasurementConfig::Incoherent { .. } => {
                    let psi = StateVector::new(evaluator.evolved_state(r)?)?;
                    let mut rng = rng::stream(node_seed, "shots");
                    sampler.as_ref().expect("sampler").sample_mean(&psi, shots, &mut rng)
                }
                MeasurementConfig::BoundedNoise { eps_data, adversarial: false } => {
                    measurement::simulate_noisy_eval(noiseless[k], eps_data, node_seed)
                }
                MeasurementConfig::BoundedNoise { eps_data, adversarial: true } => {
                    let sign = plan.weights[k].signum() * bias_sign;
                    Ok(measurement::adversarial_noisy_eval(noiseless[k], eps_data, sign))
                }
            }
        })
        .collect::<Result<_>>()?;
    let estimate = richardson::compensated_dot(&plan.weights, &measured);
    let deepest = (0..plan.nodes.len()).max_by_key(|&k| plan.nodes[k].unsigned_abs()).expect("m >= 1");
    let resources = measurement::resource_report(&plan.nodes, repetitions(&config.measurement, m)?)?;
    let row = Row {
        experiment_id: config.experiment_id.clone(),
        big_t,
        m,
        d_max: resources.d_max,
        c_trot: resources.c_trot,
        err_extrapolated: (estimate - exact).abs(),
        err_plain: (measured[deepest] - exact).abs(),
        method: config.method.label().into(),
        measurement: config.measurement.label(),
    };
    let detail = RowDetail {
        big_t,
        m,
        amplification: plan.weights.iter().map(|w| w.abs()).sum(),
        nodes: plan.nodes,
        weights: plan.weights,
        exact,
        noiseless_estimate,
        estimate,
    };
    Ok((row, detail))
}

fn run_for_time(config: &ExperimentConfig, problem: &Problem, big_t: f64, master: u64) -> ExperimentTable {
    let mut table = ExperimentTable::default();
    for &m in &config.m_values {
        match evaluate_row(config, problem, big_t, m, master) {
            Ok((row, detail)) => {
                table.rows.push(row);
                table.details.push(detail);
            }
            Err(e) => {
                warn!("experiment {} T={big_t} m={m} aborted: {e}", config.experiment_id);
                table.failures.push(RowFailure { big_t, m, reason: e.to_string() });
            }
        }
    }
    table
}

/// Error against `m` at the first configured time.
pub fn run_error_vs_m(config: &ExperimentConfig, master_seed: u64) -> Result<ExperimentTable> {
    config.validate()?;
    let problem = Problem::from_config(config)?;
    let big_t = config.time.values()[0];
    Ok(run_for_time(config, &problem, big_t, master_seed))
}

/// Error against `m` for every configured time, keyed by `(T, m)`.
pub fn run_error_vs_m_multi_t(config: &ExperimentConfig, master_seed: u64) -> Result<ExperimentTable> {
    config.validate()?;
    let problem = Problem::from_config(config)?;
    let mut table = ExperimentTable::default();
    for big_t in config.time.values() {
        table.extend(run_for_time(config, &problem, big_t, master_seed));
    }
    Ok(table)
}

/// Runs `f` on a pool with `threads` workers (`None` for the rayon default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    const BASE: &str = r#"{
        "experiment_id": "t",
        "system": {"L": 3, "seed": 4},
        "time": 0.5,
        "formula": {"kind": "suzuki", "k": 1},
        "method": "richardson",
        "m_values": [1, 2, 3]
    }"#;

    #[test]
    fn parses_defaults() {
        let c = config(BASE);
        assert_eq!(c.measurement, MeasurementConfig::Exact);
        assert_eq!(c.min_steps_rule, MinStepsRule::LambdaPower);
        assert_eq!(c.observable.n_terms, 3);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(ExperimentConfig::from_json(&BASE.replace("[1, 2, 3]", "[]")).is_err());
        let interp = BASE.replace("\"richardson\"", "\"interpolation\"");
        assert!(ExperimentConfig::from_json(&interp).is_err());
        assert!(ExperimentConfig::from_json(&BASE.replace("\"time\"", "\"tyme\"")).is_err());
    }

    #[test]
    fn single_node_matches_plain() {
        let table = run_error_vs_m(&config(BASE), 1).unwrap();
        assert!(table.failures.is_empty());
        let first = &table.rows[0];
        assert_eq!(first.err_extrapolated, first.err_plain);
        assert!(table.rows[2].err_extrapolated < table.rows[0].err_extrapolated);
    }

    #[test]
    fn zero_time_has_no_error() {
        let c = config(&BASE.replace("\"time\": 0.5", "\"time\": [0.0, 0.5]"));
        let table = run_error_vs_m_multi_t(&c, 1).unwrap();
        assert_eq!(table.rows.len(), 6);
        for row in table.rows.iter().filter(|r| r.big_t == 0.0) {
            assert!(row.err_extrapolated < 1e-14 && row.err_plain < 1e-14);
        }
    }

    #[test]
    fn csv_layout() {
        let table = run_error_vs_m(&config(BASE), 1).unwrap();
        let text = table.to_csv_string().unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(lines.count(), 3);
    }
}
