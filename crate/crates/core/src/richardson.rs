//! Richardson extrapolation to `s = 0` from samples at `s_k = 1/r_k`, with
//! integer nodes derived from Chebyshev points so that the weights stay
//! well conditioned.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Residual tolerance for `V b = e_1`.
pub const VANDERMONDE_TOL: f64 = 1e-8;

/// Extrapolation weights and nodes for a fixed `m`, `r_scale` and `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonPlan {
    m: usize,
    r_scale: u64,
    eta: u32,
    nodes: Vec<u64>,
    weights: Vec<f64>,
    one_norm: f64,
    residual: f64,
}

/// `R = sqrt(8) m / pi`.
pub fn node_radius(m: usize) -> f64 {
    8f64.sqrt() * m as f64 / std::f64::consts::PI
}

/// `ceil(R / sin(pi (2k - 1) / 8m))` for `k = 1..m`, before scaling.
pub fn unscaled_nodes(m: usize) -> Vec<u64> {
    let radius = node_radius(m);
    (1..=m)
        .map(|k| {
            let angle = std::f64::consts::PI * (2 * k - 1) as f64 / (8 * m) as f64;
            (radius / angle.sin()).ceil() as u64
        })
        .collect()
}

/// Closed-form weights `b_k = prod_{i != k} s_i^eta / (s_i^eta - s_k^eta)`,
/// evaluated in the equivalent form `r_k^eta / (r_k^eta - r_i^eta)`.
pub fn closed_form_weights(nodes: &[u64], eta: u32) -> Vec<f64> {
    let powered: Vec<f64> = nodes.iter().map(|&r| (r as f64).powi(eta as i32)).collect();
    (0..nodes.len())
        .map(|k| {
            powered
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != k)
                .map(|(_, &ri)| powered[k] / (powered[k] - ri))
                .product()
        })
        .collect()
}

/// `max_j |sum_k s_k^{eta j} b_k - delta_{j0}|` for `j = 0..m-1`.
pub fn vandermonde_residual(nodes: &[u64], weights: &[f64], eta: u32) -> f64 {
    (0..nodes.len())
        .map(|j| {
            let terms: Vec<f64> = nodes
                .iter()
                .zip(weights)
                .map(|(&r, &b)| b * (1.0 / r as f64).powi((eta as usize * j) as i32))
                .collect();
            let target = if j == 0 { 1.0 } else { 0.0 };
            (compensated_sum(&terms) - target).abs()
        })
        .fold(0.0, f64::max)
}

impl RichardsonPlan {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn r_scale(&self) -> u64 {
        self.r_scale
    }

    pub fn eta(&self) -> u32 {
        self.eta
    }

    /// Step counts `r_k` in generation order `k = 1..m` (largest first).
    pub fn nodes(&self) -> &[u64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn one_norm(&self) -> f64 {
        self.one_norm
    }

    /// `||V b - e_1||_inf` measured at construction.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Sample points `s_k = 1/r_k`.
    pub fn s_values(&self) -> Vec<f64> {
        self.nodes.iter().map(|&r| 1.0 / r as f64).collect()
    }

    /// Index of the largest sample `s` (the smallest step count).
    pub fn max_s_index(&self) -> usize {
        (0..self.m).min_by_key(|&k| self.nodes[k]).expect("plans are non-empty")
    }

    pub fn max_s(&self) -> f64 {
        1.0 / self.nodes[self.max_s_index()] as f64
    }

    /// Largest step count, which sets the circuit depth.
    pub fn max_depth(&self) -> u64 {
        *self.nodes.iter().max().expect("plans are non-empty")
    }

    /// `sum_k b_k values_k` with compensated summation.
    pub fn extrapolate(&self, values: &[f64]) -> Result<f64> {
        extrapolate(self, values)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = PlanDoc {
            m: self.m,
            r_scale: self.r_scale,
            eta: self.eta,
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds the plan from its parameters and checks the stored nodes and weights against it.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PlanDoc = serde_json::from_str(text)?;
        let plan = make_plan(doc.m, doc.r_scale, doc.eta)?;
        let weights_match = doc.weights.len() == plan.m
            && doc.weights.iter().zip(&plan.weights).all(|(a, b)| (a - b).abs() <= 1e-12 * b.abs().max(1.0));
        if doc.nodes != plan.nodes || !weights_match {
            return Err(invalid("plan JSON nodes or weights disagree with its m, r_scale and eta"));
        }
        Ok(plan)
    }
}

/// JSON layout `{"m", "r_scale", "eta", "nodes", "weights"}`.
#[derive(Debug, Serialize, Deserialize)]
struct PlanDoc {
    m: usize,
    r_scale: u64,
    eta: u32,
    nodes: Vec<u64>,
    weights: Vec<f64>,
}

pub fn make_plan(m: usize, r_scale: u64, eta: u32) -> Result<RichardsonPlan> {
    if m == 0 || r_scale == 0 || !(eta == 1 || eta == 2) {
        return Err(invalid(format!("plan needs m >= 1, r_scale >= 1, eta in {{1, 2}}; got m={m} r_scale={r_scale} eta={eta}")));
    }
    let nodes: Vec<u64> = unscaled_nodes(m).into_iter().map(|r| r * r_scale).collect();
    let mut sorted = nodes.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != m {
        return Err(Error::NodeCollision { m, r_scale });
    }
    let weights = closed_form_weights(&nodes, eta);
    let residual = vandermonde_residual(&nodes, &weights, eta);
    if !(residual <= VANDERMONDE_TOL) {
        return Err(Error::Conditioning(format!("Richardson weights for m={m} leave Vandermonde residual {residual:e}")));
    }
    let one_norm = weights.iter().map(|b| b.abs()).sum();
    Ok(RichardsonPlan { m, r_scale, eta, nodes, weights, one_norm, residual })
}

pub fn extrapolate(plan: &RichardsonPlan, values: &[f64]) -> Result<f64> {
    if values.len() != plan.m {
        return Err(invalid(format!("expected {} values, got {}", plan.m, values.len())));
    }
    Ok(compensated_dot(&plan.weights, values))
}

/// Sum with a running error term (Neumaier's variant of Kahan summation).
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for &v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

/// Dot product with error-free transformations for both products and sums.
pub fn compensated_dot(a: &[f64], b: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(y, -p);
        let t = sum + p;
        let s_err = if sum.abs() >= p.abs() { (sum - t) + p } else { (p - t) + sum };
        sum = t;
        carry += s_err + p_err;
    }
    sum + carry
}

/// `||b||_1` of the symmetric (`eta = 2`) plan for each `m`.
pub fn one_norm_growth(m_list: &[usize]) -> Result<Vec<f64>> {
    m_list.iter().map(|&m| make_plan(m, 1, 2).map(|p| p.one_norm())).collect()
}

/// Which branch of the sufficient-depth formula applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeRegime {
    Short,
    Long,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinStepsReport {
    pub min_steps: u64,
    pub regime: TimeRegime,
    /// `a_max Upsilon lambda T`.
    pub base: f64,
    /// `a_max Upsilon s_1 lambda T < 1/2` with `s_1 = 1 / min_steps`.
    pub side_condition_holds: bool,
}

/// Smallest Trotter depth that makes the extrapolation bias at most `eps`.
#[allow(clippy::too_many_arguments)]
pub fn sufficient_min_steps(
    a_max: f64,
    upsilon: usize,
    lambda: f64,
    big_t: f64,
    p: usize,
    sigma: usize,
    m: usize,
    eps: f64,
    b_one_norm: f64,
) -> Result<MinStepsReport> {
    let positive = [a_max, lambda, big_t, b_one_norm].iter().all(|&v| v > 0.0 && v.is_finite());
    if !positive || upsilon == 0 || p == 0 || sigma == 0 || m == 0 {
        return Err(invalid("sufficient_min_steps needs positive finite arguments"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    let base = a_max * upsilon as f64 * lambda * big_t;
    let sm = (sigma * m) as f64;
    let noise_factor = (4.0 * b_one_norm / eps).powf(1.0 / sm);
    let (regime, value) = if base <= 1.0 {
        (TimeRegime::Short, base * noise_factor)
    } else {
        let exponent = 1.0 + (sigma * m).div_ceil(p) as f64 / sm;
        (TimeRegime::Long, base.powf(exponent) * noise_factor)
    };
    let min_steps = (value.ceil() as u64).max(1);
    let side_condition_holds = base / (min_steps as f64) < 0.5;
    Ok(MinStepsReport { min_steps, regime, base, side_condition_holds })
}

/// Smallest `r_scale` with every scaled node at least `min_steps`.
pub fn choose_r_scale(m: usize, min_steps: u64) -> Result<u64> {
    if m == 0 || min_steps == 0 {
        return Err(invalid("choose_r_scale needs m >= 1 and min_steps >= 1"));
    }
    let smallest = *unscaled_nodes(m).iter().min().expect("m >= 1");
    Ok(min_steps.div_ceil(smallest).max(1))
}

/// `m = p ceil(ln(1/eps))`.
pub fn m_for_precision(p: usize, eps: f64) -> Result<usize> {
    if !(eps > 0.0 && eps < 1.0) || p == 0 {
        return Err(invalid("m_for_precision needs p >= 1 and eps in (0, 1)"));
    }
    Ok(p * (1.0 / eps).ln().ceil() as usize)
}
