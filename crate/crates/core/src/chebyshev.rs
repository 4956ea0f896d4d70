//! Chebyshev interpolation of `f(s)` on `[-ell, ell]` evaluated at `s = 0`,
//! with nodes moved to the nearest inverse integers so that every sample is
//! an integer number of Trotter steps.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default cap on `|r|` when snapping nodes.
pub const DEFAULT_SNAP_CAP: u64 = 10_000_000;
/// Default grid size for [`lebesgue_constant`].
pub const DEFAULT_LEBESGUE_GRID: usize = 100_000;

/// `(2/pi) ln(m + 1) + 1`.
pub fn lebesgue_bound(m: usize) -> f64 {
    2.0 / std::f64::consts::PI * ((m + 1) as f64).ln() + 1.0
}

/// `ell cos(pi (2i - 1) / 2m)` for `i = 1..m`.
pub fn chebyshev_nodes(m: usize, ell: f64) -> Vec<f64> {
    (1..=m)
        .map(|i| ell * (std::f64::consts::PI * (2 * i - 1) as f64 / (2 * m) as f64).cos())
        .collect()
}

fn check_base(a_max: f64, upsilon: usize, lambda: f64, big_t: f64, p: usize) -> Result<f64> {
    if !(a_max > 0.0 && lambda > 0.0 && big_t > 0.0) || upsilon == 0 || p == 0 {
        return Err(invalid("interval selection needs positive a_max, Upsilon, lambda, T and p"));
    }
    Ok(a_max * upsilon as f64 * lambda * big_t)
}

/// `ell = (1/2) (a_max Upsilon lambda T)^{-(1 + 1/p)}`, clamped to 1/2 when
/// the base is below one.
pub fn choose_ell(a_max: f64, upsilon: usize, lambda: f64, big_t: f64, p: usize) -> Result<f64> {
    let base = check_base(a_max, upsilon, lambda, big_t, p)?;
    if base < 1.0 {
        warn!("a_max*Upsilon*lambda*T = {base} < 1 is outside the long-time regime; clamping ell to 1/2");
        return Ok(0.5);
    }
    Ok(0.5 * base.powf(-(1.0 + 1.0 / p as f64)))
}

/// [`choose_ell`] shrunk so that inverse-integer snapping cannot spoil the
/// Lebesgue constant: `min(choose_ell, 1 / (base^{1+1/p} m^2 L_m))`.
pub fn choose_ell_snapped(a_max: f64, upsilon: usize, lambda: f64, big_t: f64, p: usize, m: usize) -> Result<f64> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(invalid(format!("interpolation needs an even m >= 2, got {m}")));
    }
    let base = check_base(a_max, upsilon, lambda, big_t, p)?;
    let ell = choose_ell(a_max, upsilon, lambda, big_t, p)?;
    let guard = 1.0 / (base.powf(1.0 + 1.0 / p as f64) * (m * m) as f64 * lebesgue_bound(m));
    Ok(ell.min(guard))
}

/// Snapped step counts with the largest node displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapResult {
    pub nodes: Vec<i64>,
    pub max_perturbation: f64,
}

/// Maps each `s` to the signed integer `r` minimizing `|1/r - s|`. On a
/// collision the node with smaller `|s|` moves outward (larger `|r|`) to the
/// next unused integer.
pub fn snap_nodes(raw_nodes: &[f64]) -> Result<SnapResult> {
    snap_nodes_with_cap(raw_nodes, DEFAULT_SNAP_CAP)
}

pub fn snap_nodes_with_cap(raw_nodes: &[f64], cap: u64) -> Result<SnapResult> {
    for &s in raw_nodes {
        if s == 0.0 || !s.is_finite() || s.abs() > 0.5 {
            return Err(invalid(format!("raw node {s} must be nonzero with |s| <= 1/2")));
        }
    }
    // Larger |s| first so that later (smaller |s|) nodes are the ones displaced.
    let mut order: Vec<usize> = (0..raw_nodes.len()).collect();
    order.sort_by(|&a, &b| raw_nodes[b].abs().total_cmp(&raw_nodes[a].abs()));
    let mut used = std::collections::HashSet::new();
    let mut nodes = vec![0i64; raw_nodes.len()];
    for idx in order {
        let s = raw_nodes[idx];
        let mut magnitude = nearest_inverse_integer(s.abs());
        if magnitude > cap {
            return Err(Error::ResourceLimit(format!("node {s} needs |r| = {magnitude} above the cap {cap}")));
        }
        let sign = if s > 0.0 { 1 } else { -1 };
        while used.contains(&(sign * magnitude as i64)) {
            magnitude += 1;
            if magnitude > cap {
                return Err(Error::ResourceLimit(format!("resolving a collision at {s} exceeded the cap {cap}")));
            }
        }
        let r = sign * magnitude as i64;
        used.insert(r);
        nodes[idx] = r;
    }
    let max_perturbation = nodes
        .iter()
        .zip(raw_nodes)
        .map(|(&r, &s)| (1.0 / r as f64 - s).abs())
        .fold(0.0, f64::max);
    Ok(SnapResult { nodes, max_perturbation })
}

fn nearest_inverse_integer(s: f64) -> u64 {
    let below = (1.0 / s).floor().max(1.0) as u64;
    let above = below + 1;
    if (1.0 / below as f64 - s).abs() <= (1.0 / above as f64 - s).abs() {
        below
    } else {
        above
    }
}

/// Barycentric weights `1 / prod_{n != i} (s_i - s_n)`, computed on
/// differences divided by `scale`; the common factor cancels in the
/// barycentric quotient.
fn scaled_weights(nodes: &[f64], scale: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            let prod: f64 = (0..nodes.len())
                .filter(|&n| n != i)
                .map(|n| (nodes[i] - nodes[n]) / scale)
                .product();
            1.0 / prod
        })
        .collect()
}

fn check_distinct(nodes: &[f64]) -> Result<()> {
    let mut sorted = nodes.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(invalid("interpolation nodes must be distinct"));
    }
    Ok(())
}

/// Interpolant through `(nodes, values)` evaluated at 0 by the second
/// barycentric formula.
pub fn interpolate_at_zero(nodes: &[f64], values: &[f64]) -> Result<f64> {
    if nodes.is_empty() || nodes.len() != values.len() {
        return Err(invalid("interpolation needs matching, non-empty nodes and values"));
    }
    check_distinct(nodes)?;
    if let Some(i) = nodes.iter().position(|&s| s == 0.0) {
        return Ok(values[i]);
    }
    let scale = nodes.iter().fold(0.0_f64, |a, &s| a.max(s.abs()));
    let weights = scaled_weights(nodes, scale);
    let mut num = 0.0;
    let mut den = 0.0;
    for ((&s, &w), &v) in nodes.iter().zip(&weights).zip(values) {
        let q = w / (0.0 - s);
        num += q * v;
        den += q;
    }
    Ok(num / den)
}

/// Lagrange basis values `L_i(x)` for the given nodes.
pub fn lagrange_basis(nodes: &[f64], x: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            (0..nodes.len())
                .filter(|&n| n != i)
                .map(|n| (x - nodes[n]) / (nodes[i] - nodes[n]))
                .product()
        })
        .collect()
}

/// `sum_i |L_i(0)|`: amplification of bounded sample noise at `s = 0`.
pub fn noise_amplification_at_zero(nodes: &[f64]) -> Result<f64> {
    check_distinct(nodes)?;
    Ok(lagrange_basis(nodes, 0.0).iter().map(|l| l.abs()).sum())
}

/// `max_s sum_i |L_i(s)|` over a uniform grid spanning the nodes.
pub fn lebesgue_constant(nodes: &[f64], grid_points: usize) -> Result<f64> {
    if grid_points < 1000 {
        return Err(invalid(format!("Lebesgue grid needs at least 1000 points, got {grid_points}")));
    }
    check_distinct(nodes)?;
    if nodes.len() == 1 {
        return Ok(1.0);
    }
    let lo = nodes.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scale = hi - lo;
    let weights = scaled_weights(nodes, scale);
    let mut best = 1.0_f64;
    for g in 0..grid_points {
        let x = lo + scale * g as f64 / (grid_points - 1) as f64;
        if nodes.contains(&x) {
            continue;
        }
        // Barycentric form of the Lebesgue function.
        let mut num = 0.0;
        let mut den = 0.0;
        for (&s, &w) in nodes.iter().zip(&weights) {
            let q = w / (x - s);
            num += q.abs();
            den += q;
        }
        best = best.max(num / den.abs());
    }
    Ok(best)
}

/// Interpolation scheme for a fixed even `m` and half-width `ell`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPlan {
    m: usize,
    ell: f64,
    raw_nodes: Vec<f64>,
    snapped_nodes: Vec<i64>,
    max_perturbation: f64,
    lebesgue_raw: f64,
    lebesgue_snapped: f64,
}

/// Slack figures for the perturbation conditions on snapped nodes, each
/// non-negative when satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnapMargins {
    /// `ell^2 - max |1/r_i - s_i|`.
    pub spacing: f64,
    /// `ell / (m^2 L_m) - max |1/r_i - s_i|`.
    pub lebesgue: f64,
}

impl InterpolationPlan {
    pub fn new(m: usize, ell: f64) -> Result<Self> {
        Self::with_grid(m, ell, DEFAULT_LEBESGUE_GRID)
    }

    pub fn with_grid(m: usize, ell: f64, grid_points: usize) -> Result<Self> {
        if m < 2 || !m.is_multiple_of(2) {
            return Err(invalid(format!("interpolation needs an even m >= 2, got {m}")));
        }
        if !(ell > 0.0 && ell <= 0.5) {
            return Err(invalid(format!("ell must lie in (0, 1/2], got {ell}")));
        }
        let raw_nodes = chebyshev_nodes(m, ell);
        let snap = snap_nodes(&raw_nodes)?;
        let snapped: Vec<f64> = snap.nodes.iter().map(|&r| 1.0 / r as f64).collect();
        Ok(Self {
            m,
            ell,
            lebesgue_raw: lebesgue_constant(&raw_nodes, grid_points)?,
            lebesgue_snapped: lebesgue_constant(&snapped, grid_points)?,
            raw_nodes,
            snapped_nodes: snap.nodes,
            max_perturbation: snap.max_perturbation,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn ell(&self) -> f64 {
        self.ell
    }

    pub fn raw_nodes(&self) -> &[f64] {
        &self.raw_nodes
    }

    pub fn snapped_nodes(&self) -> &[i64] {
        &self.snapped_nodes
    }

    pub fn snapped_s(&self) -> Vec<f64> {
        self.snapped_nodes.iter().map(|&r| 1.0 / r as f64).collect()
    }

    pub fn max_perturbation(&self) -> f64 {
        self.max_perturbation
    }

    /// Grid estimate of `L_m` for the exact Chebyshev nodes.
    pub fn lebesgue_raw(&self) -> f64 {
        self.lebesgue_raw
    }

    /// Grid estimate of `L'_m` for the snapped nodes.
    pub fn lebesgue_snapped(&self) -> f64 {
        self.lebesgue_snapped
    }

    /// Largest `|r|` among the snapped nodes.
    pub fn max_depth(&self) -> u64 {
        self.snapped_nodes.iter().map(|r| r.unsigned_abs()).max().expect("m >= 2")
    }

    pub fn margins(&self) -> SnapMargins {
        let guard = self.ell / ((self.m * self.m) as f64 * lebesgue_bound(self.m));
        SnapMargins {
            spacing: self.ell * self.ell - self.max_perturbation,
            lebesgue: guard - self.max_perturbation,
        }
    }

    /// Both perturbation conditions hold.
    pub fn perturbation_ok(&self) -> bool {
        let m = self.margins();
        m.spacing >= 0.0 && m.lebesgue >= 0.0
    }

    /// Estimate of `f(0)` from samples at the snapped nodes.
    pub fn estimate(&self, values: &[f64]) -> Result<f64> {
        interpolate_at_zero(&self.snapped_s(), values)
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = InterpolationDoc {
            m: self.m,
            ell: self.ell,
            raw_nodes: self.raw_nodes.clone(),
            snapped_nodes: self.snapped_nodes.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Rebuilds the plan from `m` and `ell` and checks the stored nodes.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: InterpolationDoc = serde_json::from_str(text)?;
        let plan = Self::new(doc.m, doc.ell)?;
        if plan.snapped_nodes != doc.snapped_nodes || plan.raw_nodes.len() != doc.raw_nodes.len() {
            return Err(invalid("interpolation plan JSON nodes disagree with its m and ell"));
        }
        Ok(plan)
    }
}

/// JSON layout `{"m", "ell", "raw_nodes", "snapped_nodes"}`.
#[derive(Debug, Serialize, Deserialize)]
struct InterpolationDoc {
    m: usize,
    ell: f64,
    raw_nodes: Vec<f64>,
    snapped_nodes: Vec<i64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ell_examples() {
        assert_eq!(choose_ell(0.5, 2, 1.0, 1.0, 2).unwrap(), 0.5);
        let v = choose_ell(0.5, 2, 2.0, 1.0, 2).unwrap();
        assert!((v - 0.5 * 2f64.powf(-1.5)).abs() < 1e-15);
        assert!((v - 0.176_776_695).abs() < 1e-8);
        let big_p = choose_ell(1.0, 1, 3.0, 1.0, 10_000).unwrap();
        assert!((big_p - 0.5 / 3.0).abs() < 1e-4);
        assert_eq!(choose_ell(0.1, 1, 1.0, 1.0, 2).unwrap(), 0.5);
        assert!(choose_ell(-1.0, 1, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn snapped_ell_examples() {
        let base: f64 = 2.0;
        let ell = choose_ell_snapped(1.0, 1, base, 1.0, 2, 8).unwrap();
        let l8 = 2.0 / std::f64::consts::PI * 9f64.ln() + 1.0;
        let hand = (0.5 * base.powf(-1.5)).min(1.0 / (base.powf(1.5) * 64.0 * l8));
        assert!((ell - hand).abs() < 1e-15);
        assert!(ell <= choose_ell(1.0, 1, base, 1.0, 2).unwrap());
        assert!(ell * 64.0 * l8 * base.powf(1.5) <= 1.0 + 1e-12);
        assert!(choose_ell_snapped(1.0, 1, base, 1.0, 2, 5).is_err());
    }

    #[test]
    fn snapping_examples() {
        assert_eq!(snap_nodes(&[0.25]).unwrap().nodes, vec![4]);
        assert_eq!(snap_nodes(&[0.3]).unwrap().nodes, vec![3]);
        let raw = chebyshev_nodes(6, 0.05);
        let snapped = snap_nodes(&raw).unwrap().nodes;
        for i in 0..3 {
            assert_eq!(snapped[i], -snapped[5 - i]);
        }
        assert!(snap_nodes(&[0.0]).is_err());
        assert!(snap_nodes(&[0.7]).is_err());
    }

    #[test]
    fn collisions_move_the_smaller_node_outward() {
        let result = snap_nodes(&[0.2, 0.199]).unwrap();
        assert_eq!(result.nodes, vec![5, 6]);
        let err = snap_nodes_with_cap(&[1e-8], 1000).unwrap_err();
        assert!(matches!(err, Error::ResourceLimit(_)));
    }

    #[test]
    fn barycentric_cases() {
        let nodes = chebyshev_nodes(6, 0.3);
        let q = |s: f64| 0.7 - 1.3 * s + 2.0 * s.powi(3) + 5.0 * s.powi(5);
        let values: Vec<f64> = nodes.iter().map(|&s| q(s)).collect();
        assert!((interpolate_at_zero(&nodes, &values).unwrap() - 0.7).abs() < 1e-10);
        assert!((interpolate_at_zero(&nodes, &[2.5; 6]).unwrap() - 2.5).abs() < 1e-12);
        assert_eq!(interpolate_at_zero(&[0.0, 0.1], &[3.0, 4.0]).unwrap(), 3.0);
        assert!(interpolate_at_zero(&[0.1, 0.1], &[3.0, 4.0]).is_err());
    }

    #[test]
    fn monomial_tail_matches_lagrange_oracle() {
        for m in [2, 4, 6, 8] {
            let nodes = chebyshev_nodes(m, 1.0);
            let values: Vec<f64> = nodes.iter().map(|s| s.powi(m as i32)).collect();
            let lagrange: f64 = lagrange_basis(&nodes, 0.0).iter().zip(&values).map(|(l, v)| l * v).sum();
            let got = interpolate_at_zero(&nodes, &values).unwrap();
            assert!((got - lagrange).abs() < 1e-12);
            // s^m minus its interpolant is the monic Chebyshev polynomial 2^{1-m} T_m.
            let tail = 2f64.powi(1 - m as i32) * (m as f64 * std::f64::consts::FRAC_PI_2).cos();
            assert!((got + tail).abs() < 1e-12, "m={m}");
        }
    }

    #[test]
    fn lebesgue_examples() {
        assert_eq!(lebesgue_constant(&[0.1], 1000).unwrap(), 1.0);
        let l4 = lebesgue_constant(&chebyshev_nodes(4, 1.0), DEFAULT_LEBESGUE_GRID).unwrap();
        assert!(l4 <= lebesgue_bound(4));
        assert!(l4 > 1.0);
        assert!(lebesgue_constant(&[0.1, 0.2], 10).is_err());
    }

    #[test]
    fn plan_json_round_trip() {
        let plan = InterpolationPlan::with_grid(4, 0.05, 1000).unwrap();
        let text = plan.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["snapped_nodes"].as_array().unwrap().len(), 4);
        assert_eq!(InterpolationPlan::from_json(&text).unwrap().snapped_nodes(), plan.snapped_nodes());
    }
}
