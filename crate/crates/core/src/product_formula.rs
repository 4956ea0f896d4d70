//! Staged product formulas and the unitaries, effective Hamiltonians and
//! BCH error operators they induce.
//!
//! Ordering convention: within a stage the exponentials are written left to
//! right in permutation order, and stages are written left to right, so the
//! first-order formula on `{X, Z}` is the matrix `e^{-iXt} e^{-iZt}` and the
//! last written factor acts on a state first.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, hermitize, identity, max_abs, CMatrix, HermitianEigen, UnitaryEigen};
use crate::terms::TermSum;

/// Phases closer than this to the branch cut of the principal logarithm are rejected.
pub const BRANCH_MARGIN: f64 = 1e-9;
/// Largest admissible condition number of the BCH polynomial fit.
pub const BCH_MAX_CONDITION: f64 = 1e12;
/// Tolerance used by [`is_symmetric`].
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaKind {
    FirstOrder,
    Suzuki,
}

/// JSON form `{"kind": "first_order" | "suzuki", "k": int, "gamma_count": int}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormulaDescriptor {
    pub kind: FormulaKind,
    #[serde(default = "one")]
    pub k: usize,
    pub gamma_count: usize,
}

fn one() -> usize {
    1
}

impl FormulaDescriptor {
    pub fn build(&self) -> Result<StagedFormula> {
        match self.kind {
            FormulaKind::FirstOrder => first_order(self.gamma_count),
            FormulaKind::Suzuki => suzuki(self.k, self.gamma_count),
        }
    }
}

/// A product formula `prod_v prod_g exp(-i t a_{v,g} H_{pi_v(g)})`.
#[derive(Debug, Clone, PartialEq)]
pub struct StagedFormula {
    descriptor: FormulaDescriptor,
    coefficients: Vec<Vec<f64>>,
    permutations: Vec<Vec<usize>>,
    order: usize,
    sigma: usize,
    a_max: f64,
    merged: Vec<(usize, f64)>,
}

impl StagedFormula {
    fn assemble(
        descriptor: FormulaDescriptor,
        coefficients: Vec<Vec<f64>>,
        permutations: Vec<Vec<usize>>,
        order: usize,
        sigma: usize,
    ) -> Self {
        let a_max = coefficients.iter().flatten().fold(0.0_f64, |a, &v| a.max(v.abs()));
        let mut merged: Vec<(usize, f64)> = Vec::new();
        for (coeffs, perm) in coefficients.iter().zip(&permutations) {
            for (&a, &g) in coeffs.iter().zip(perm) {
                match merged.last_mut() {
                    Some((last, acc)) if *last == g => *acc += a,
                    _ => merged.push((g, a)),
                }
            }
        }
        Self { descriptor, coefficients, permutations, order, sigma, a_max, merged }
    }

    pub fn descriptor(&self) -> FormulaDescriptor {
        self.descriptor
    }

    /// Number of stages `Upsilon`, counted before adjacent same-term merging.
    pub fn stages(&self) -> usize {
        self.coefficients.len()
    }

    pub fn gamma_count(&self) -> usize {
        self.descriptor.gamma_count
    }

    /// `coefficients()[v][g]` multiplies the term `permutations()[v][g]`.
    pub fn coefficients(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn permutations(&self) -> &[Vec<usize>] {
        &self.permutations
    }

    /// Order `p`.
    pub fn order(&self) -> usize {
        self.order
    }

    /// 2 for symmetric formulas, 1 otherwise.
    pub fn sigma(&self) -> usize {
        self.sigma
    }

    /// Largest stage coefficient before merging.
    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    /// Written-order `(term, coefficient)` list after merging adjacent
    /// exponentials of the same term.
    pub fn merged_layout(&self) -> &[(usize, f64)] {
        &self.merged
    }

    pub fn merged_a_max(&self) -> f64 {
        self.merged.iter().fold(0.0_f64, |a, &(_, v)| a.max(v.abs()))
    }

    /// Total weight `sum a_{v,g}` carried by each term; all ones for a consistent formula.
    pub fn term_weights(&self) -> Vec<f64> {
        let mut weights = vec![0.0; self.gamma_count()];
        for (coeffs, perm) in self.coefficients.iter().zip(&self.permutations) {
            for (&a, &g) in coeffs.iter().zip(perm) {
                weights[g] += a;
            }
        }
        weights
    }
}

pub fn first_order(gamma_count: usize) -> Result<StagedFormula> {
    if gamma_count == 0 {
        return Err(invalid("first-order formula needs at least one term"));
    }
    let descriptor = FormulaDescriptor { kind: FormulaKind::FirstOrder, k: 1, gamma_count };
    Ok(StagedFormula::assemble(
        descriptor,
        vec![vec![1.0; gamma_count]],
        vec![(0..gamma_count).collect()],
        1,
        1,
    ))
}

/// Recursion constant `u_k = 1 / (4 - 4^{1/(2k-1)})`.
pub fn suzuki_u(k: usize) -> f64 {
    1.0 / (4.0 - 4f64.powf(1.0 / (2 * k - 1) as f64))
}

/// Suzuki formula `S_{2k}` with `2 * 5^{k-1}` stages.
pub fn suzuki(k: usize, gamma_count: usize) -> Result<StagedFormula> {
    if k == 0 {
        return Err(invalid("Suzuki order index k must be >= 1"));
    }
    if gamma_count == 0 {
        return Err(invalid("Suzuki formula needs at least one term"));
    }
    if k > 6 {
        return Err(Error::ResourceLimit(format!("Suzuki k={k} has {} stages", 2 * 5usize.pow(k as u32 - 1))));
    }
    let forward: Vec<usize> = (0..gamma_count).collect();
    let backward: Vec<usize> = forward.iter().rev().copied().collect();
    // Each stage is (coefficient scale, permutation); S_2 has uniform coefficients.
    let mut stages: Vec<(f64, bool)> = vec![(0.5, false), (0.5, true)];
    for level in 2..=k {
        let u = suzuki_u(level);
        let mut next = Vec::with_capacity(stages.len() * 5);
        for scale in [u, u, 1.0 - 4.0 * u, u, u] {
            next.extend(stages.iter().map(|&(a, rev)| (a * scale, rev)));
        }
        stages = next;
    }
    let coefficients = stages.iter().map(|&(a, _)| vec![a; gamma_count]).collect();
    let permutations = stages
        .iter()
        .map(|&(_, rev)| if rev { backward.clone() } else { forward.clone() })
        .collect();
    let descriptor = FormulaDescriptor { kind: FormulaKind::Suzuki, k, gamma_count };
    Ok(StagedFormula::assemble(descriptor, coefficients, permutations, 2 * k, 2))
}

const CACHE_CAPACITY: usize = 1024;

/// Applies a formula to a fixed term sum, caching per-term eigensystems and
/// exponentials. Safe to share between threads.
pub struct Propagator<'a> {
    formula: &'a StagedFormula,
    terms: &'a TermSum,
    eigen: Vec<HermitianEigen>,
    cache: Mutex<HashMap<(usize, u64), Arc<CMatrix>>>,
}

impl<'a> Propagator<'a> {
    pub fn new(formula: &'a StagedFormula, terms: &'a TermSum) -> Result<Self> {
        if formula.gamma_count() != terms.gamma() {
            return Err(invalid(format!(
                "formula built for {} terms applied to {} terms",
                formula.gamma_count(),
                terms.gamma()
            )));
        }
        let eigen = terms.dense_terms().iter().map(HermitianEigen::new).collect::<Result<_>>()?;
        Ok(Self { formula, terms, eigen, cache: Mutex::new(HashMap::new()) })
    }

    pub fn formula(&self) -> &StagedFormula {
        self.formula
    }

    pub fn terms(&self) -> &TermSum {
        self.terms
    }

    /// `exp(-i tau H_g)`, cached on the exact bits of `tau`.
    pub fn term_exponential(&self, g: usize, tau: f64) -> Arc<CMatrix> {
        let key = (g, tau.to_bits());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Arc::clone(hit);
        }
        let value = Arc::new(self.eigen[g].exp_neg_i(tau));
        let mut cache = self.cache.lock().expect("cache lock");
        if cache.len() >= CACHE_CAPACITY {
            cache.clear();
        }
        Arc::clone(cache.entry(key).or_insert(value))
    }

    /// `P(t)`.
    pub fn unitary(&self, t: f64) -> CMatrix {
        let mut acc = identity(self.terms.dim());
        for &(g, a) in self.formula.merged_layout() {
            acc *= &*self.term_exponential(g, a * t);
        }
        acc
    }

    /// One step of the `r`-fold iteration at total time `big_t`: `P(T/r)` for
    /// positive `r`, `P(-T/|r|)^dagger` for negative `r`.
    pub fn step(&self, r: i64, big_t: f64) -> Result<CMatrix> {
        if r == 0 {
            return Err(invalid("Trotter step count r must be nonzero"));
        }
        let tau = big_t / r as f64;
        Ok(if r > 0 { self.unitary(tau) } else { self.unitary(tau).adjoint() })
    }

    /// `P(T/r)^r`, or `(P(T/r)^{-1})^{|r|}` for negative `r`.
    pub fn iterated_unitary(&self, r: i64, big_t: f64) -> Result<CMatrix> {
        let step = self.step(r, big_t)?;
        let mut acc = step.clone();
        for _ in 1..r.unsigned_abs() {
            acc = &step * acc;
        }
        Ok(acc)
    }

    /// `H_eff(t) = (i/t) Log P(t)` with the principal logarithm.
    pub fn effective_hamiltonian(&self, t: f64) -> Result<CMatrix> {
        if t == 0.0 || !t.is_finite() {
            return Err(invalid(format!("effective Hamiltonian needs finite nonzero t, got {t}")));
        }
        let eig = UnitaryEigen::new(&self.unitary(t))?;
        if let Some(phi) = eig.phases.iter().find(|phi| std::f64::consts::PI - phi.abs() <= BRANCH_MARGIN) {
            return Err(Error::BranchAmbiguity(format!(
                "P({t}) has eigenphase {phi} at the branch cut of the logarithm; use a smaller t"
            )));
        }
        let q = &eig.vectors;
        let mut scaled = q.clone();
        for (j, &phi) in eig.phases.iter().enumerate() {
            let factor = c(-phi / t);
            for z in scaled.column_mut(j).iter_mut() {
                *z *= factor;
            }
        }
        Ok(hermitize(&(scaled * q.adjoint())))
    }

    /// Least-squares fit of `H_eff(t) - H` to `sum_{j=1}^{j_max} E_{j+1} t^j`.
    /// Element `j - 1` of the result is `E_{j+1}`.
    pub fn bch_error_operators(&self, j_max: usize, t_grid: &[f64]) -> Result<Vec<CMatrix>> {
        let fit = self.bch_fit(j_max, t_grid)?;
        Ok(fit.operators)
    }

    pub fn bch_fit(&self, j_max: usize, t_grid: &[f64]) -> Result<BchFit> {
        if j_max == 0 {
            return Err(invalid("j_max must be >= 1"));
        }
        let mut distinct: Vec<f64> = t_grid.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < j_max + 2 {
            return Err(invalid(format!("BCH fit of order {j_max} needs {} distinct t values", j_max + 2)));
        }
        let h = self.terms.hamiltonian();
        let dim = h.nrows();
        let mut values = DMatrix::zeros(t_grid.len(), 2 * dim * dim);
        for (row, &t) in t_grid.iter().enumerate() {
            let diff = self.effective_hamiltonian(t)? - &h;
            for (idx, z) in diff.iter().enumerate() {
                values[(row, 2 * idx)] = z.re;
                values[(row, 2 * idx + 1)] = z.im;
            }
        }
        let powers: Vec<usize> = (1..=j_max).collect();
        let fit = linalg::fit_powers(t_grid, &powers, &values, BCH_MAX_CONDITION).map_err(|e| match e {
            Error::FitFailure { condition, .. } => Error::FitFailure { context: "BCH error operators".into(), condition },
            other => other,
        })?;
        let operators = (0..j_max)
            .map(|i| {
                let m = CMatrix::from_fn(dim, dim, |r, col| {
                    let idx = r + col * dim;
                    num_complex::Complex64::new(fit.coefficients[(i, 2 * idx)], fit.coefficients[(i, 2 * idx + 1)])
                });
                hermitize(&m)
            })
            .collect();
        Ok(BchFit { operators, condition: fit.condition, residual: fit.residual })
    }

    pub fn is_symmetric(&self, t_probe: f64) -> Result<bool> {
        if !(t_probe > 0.0) {
            return Err(invalid("symmetry probe time must be positive"));
        }
        let id = identity(self.terms.dim());
        for t in [t_probe, 0.5 * t_probe] {
            if max_abs(&(self.unitary(-t) * self.unitary(t) - &id)) > SYMMETRY_TOL {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone)]
pub struct BchFit {
    /// `operators[j - 1] = E_{j+1}`.
    pub operators: Vec<CMatrix>,
    pub condition: f64,
    pub residual: f64,
}

/// Chebyshev-distributed sample times in `[-t_max, t_max]`, symmetric about
/// and excluding zero, suitable for [`Propagator::bch_error_operators`].
pub fn bch_grid(points: usize, t_max: f64) -> Vec<f64> {
    let n = points + points % 2;
    (1..=n)
        .map(|i| t_max * (std::f64::consts::PI * (2 * i - 1) as f64 / (2 * n) as f64).cos())
        .collect()
}

pub fn unitary(f: &StagedFormula, terms: &TermSum, t: f64) -> Result<CMatrix> {
    Ok(Propagator::new(f, terms)?.unitary(t))
}

pub fn iterated_unitary(f: &StagedFormula, terms: &TermSum, r: i64, big_t: f64) -> Result<CMatrix> {
    Propagator::new(f, terms)?.iterated_unitary(r, big_t)
}

pub fn effective_hamiltonian(f: &StagedFormula, terms: &TermSum, t: f64) -> Result<CMatrix> {
    Propagator::new(f, terms)?.effective_hamiltonian(t)
}

pub fn bch_error_operators(f: &StagedFormula, terms: &TermSum, j_max: usize, t_grid: &[f64]) -> Result<Vec<CMatrix>> {
    Propagator::new(f, terms)?.bch_error_operators(j_max, t_grid)
}

pub fn is_symmetric(f: &StagedFormula, terms: &TermSum, t_probe: f64) -> Result<bool> {
    Propagator::new(f, terms)?.is_symmetric(t_probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectral_norm, I};
    use crate::terms::{Pauli, PauliString};

    fn xz() -> TermSum {
        TermSum::from_paulis(1, vec!["X".parse().unwrap(), "Z".parse().unwrap()]).unwrap()
    }

    fn exp_pauli(p: Pauli, theta: f64) -> CMatrix {
        // exp(-i theta P) = cos(theta) I - i sin(theta) P
        identity(2) * c(theta.cos()) - p.matrix() * (I * theta.sin())
    }

    #[test]
    fn first_order_layout() {
        let f = first_order(2).unwrap();
        assert_eq!(f.coefficients(), &[vec![1.0, 1.0]]);
        assert_eq!((f.order(), f.sigma(), f.stages(), f.a_max()), (1, 1, 1, 1.0));
        assert!(first_order(0).is_err());
    }

    #[test]
    fn first_order_matches_closed_form() {
        let t = xz();
        let f = first_order(2).unwrap();
        let u = unitary(&f, &t, 0.1).unwrap();
        let expect = exp_pauli(Pauli::X, 0.1) * exp_pauli(Pauli::Z, 0.1);
        assert!(max_abs(&(u - expect)) < 1e-15);
        assert!(max_abs(&(unitary(&f, &t, 0.0).unwrap() - identity(2))) == 0.0);
    }

    #[test]
    fn suzuki_layouts() {
        let s2 = suzuki(1, 3).unwrap();
        assert_eq!(s2.stages(), 2);
        assert_eq!(s2.a_max(), 0.5);
        assert_eq!(s2.merged_layout(), &[(0, 0.5), (1, 0.5), (2, 1.0), (1, 0.5), (0, 0.5)]);
        assert_eq!(s2.merged_a_max(), 1.0);
        for k in 1..=3 {
            let f = suzuki(k, 4).unwrap();
            assert_eq!(f.stages(), 2 * 5usize.pow(k as u32 - 1));
            assert!(f.a_max() <= 2.0 * k as f64 / 3f64.powi(k as i32) + 1e-15);
            assert_eq!((f.order(), f.sigma()), (2 * k, 2));
            for w in f.term_weights() {
                assert!((w - 1.0).abs() < 1e-13);
            }
        }
        assert!(suzuki(0, 2).is_err());
    }

    #[test]
    fn symmetry_detection() {
        let t = xz();
        assert!(is_symmetric(&suzuki(1, 2).unwrap(), &t, 0.3).unwrap());
        assert!(is_symmetric(&suzuki(2, 2).unwrap(), &t, 0.3).unwrap());
        assert!(!is_symmetric(&first_order(2).unwrap(), &t, 0.3).unwrap());
        let single = TermSum::from_paulis(1, vec![PauliString::parse("X", 0.7).unwrap()]).unwrap();
        assert!(is_symmetric(&first_order(1).unwrap(), &single, 0.3).unwrap());
    }

    #[test]
    fn iterated_cases() {
        let t = xz();
        let f = first_order(2).unwrap();
        let p = Propagator::new(&f, &t).unwrap();
        assert_eq!(p.iterated_unitary(1, 0.4).unwrap(), p.unitary(0.4));
        assert!(p.iterated_unitary(0, 0.4).is_err());
        let step = p.unitary(0.1);
        let mut manual = step.clone();
        for _ in 1..4 {
            manual = &step * manual;
        }
        assert_eq!(p.iterated_unitary(4, 0.4).unwrap(), manual);
    }

    #[test]
    fn negative_r_inverts_positive_time_for_symmetric() {
        let t = xz();
        let f = suzuki(1, 2).unwrap();
        let p = Propagator::new(&f, &t).unwrap();
        for r in [1, 3, 7] {
            let fwd = p.iterated_unitary(r, 0.8).unwrap();
            let back = p.iterated_unitary(r, -0.8).unwrap();
            assert!(max_abs(&(fwd * back - identity(2))) < 1e-12);
            // Negative r reproduces positive r for a symmetric formula.
            let neg = p.iterated_unitary(-r, 0.8).unwrap();
            assert!(max_abs(&(neg - p.iterated_unitary(r, 0.8).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn first_order_converges_linearly_in_one_over_r() {
        let t = xz();
        let f = first_order(2).unwrap();
        let p = Propagator::new(&f, &t).unwrap();
        let exact = HermitianEigen::new(&t.hamiltonian()).unwrap().exp_neg_i(1.0);
        let rs = [100.0, 200.0, 400.0, 800.0];
        let errs: Vec<f64> = rs
            .iter()
            .map(|&r| spectral_norm(&(p.iterated_unitary(r as i64, 1.0).unwrap() - &exact)).unwrap())
            .collect();
        let slope = linalg::loglog_slope(&rs, &errs);
        assert!((slope + 1.0).abs() < 0.05, "slope {slope}");
    }

    #[test]
    fn effective_hamiltonian_first_order_xz() {
        let t = xz();
        let f = first_order(2).unwrap();
        let h = t.hamiltonian();
        let y = Pauli::Y.matrix();
        for dt in [1e-2, 5e-3] {
            let heff = effective_hamiltonian(&f, &t, dt).unwrap();
            let approx = &h - &y * c(dt);
            assert!(spectral_norm(&(heff - approx)).unwrap() < 2.0 * dt * dt);
        }
    }

    #[test]
    fn effective_hamiltonian_rejects_branch_cut() {
        let single = TermSum::from_paulis(1, vec!["Z".parse().unwrap()]).unwrap();
        let f = first_order(1).unwrap();
        let err = effective_hamiltonian(&f, &single, std::f64::consts::PI).unwrap_err();
        assert!(matches!(err, Error::BranchAmbiguity(_)));
        assert!(effective_hamiltonian(&f, &single, 0.0).is_err());
    }

    #[test]
    fn bch_operators_first_order_xz() {
        let t = xz();
        let f = first_order(2).unwrap();
        let grid = bch_grid(24, 0.2);
        let ops = bch_error_operators(&f, &t, 8, &grid).unwrap();
        // E_2 = -Y, E_3 = -(X+Z)/3, E_4 = 0.
        let y = Pauli::Y.matrix();
        assert!(max_abs(&(&ops[0] + y)) < 1e-9);
        assert!(max_abs(&(&ops[1] + t.hamiltonian() * c(1.0 / 3.0))) < 1e-8);
        assert!(max_abs(&ops[2]) < 1e-7);
        assert!(bch_error_operators(&f, &t, 8, &grid[..5]).is_err());
    }

    #[test]
    fn descriptor_json() {
        let d: FormulaDescriptor = serde_json::from_str(r#"{"kind": "suzuki", "k": 2, "gamma_count": 3}"#).unwrap();
        assert_eq!(d.build().unwrap(), suzuki(2, 3).unwrap());
        let fo: FormulaDescriptor = serde_json::from_str(r#"{"kind": "first_order", "gamma_count": 2}"#).unwrap();
        assert_eq!(fo.build().unwrap().order(), 1);
        assert!(serde_json::from_str::<FormulaDescriptor>(r#"{"kind": "magic", "gamma_count": 2}"#).is_err());
    }

    #[test]
    fn propagator_rejects_mismatched_terms() {
        assert!(Propagator::new(&first_order(3).unwrap(), &xz()).is_err());
    }
}
