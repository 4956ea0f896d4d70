//! Hamiltonians as ordered sums of Hermitian terms, and the commutator
//! quantities that control Trotter error.
//!
//! Terms may be given as Pauli strings or as dense Hermitian matrices; every
//! norm and commutator is evaluated on the dense form. Pauli strings act on
//! qubit 0 with their first character, and qubit 0 is the leftmost Kronecker
//! factor (most significant bit of the basis index).

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, c, commutator, identity, max_abs, spectral_norm, CMatrix, I};
use crate::rng;

/// Hermiticity tolerance for terms, in max-entry norm.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMatrix {
        let z = c(0.0);
        let one = c(1.0);
        match self {
            Pauli::I => identity(2),
            Pauli::X => CMatrix::from_row_slice(2, 2, &[z, one, one, z]),
            Pauli::Y => CMatrix::from_row_slice(2, 2, &[z, -I, I, z]),
            Pauli::Z => CMatrix::from_row_slice(2, 2, &[one, z, z, -one]),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl TryFrom<char> for Pauli {
    type Error = Error;

    fn try_from(ch: char) -> Result<Self> {
        match ch {
            'I' => Ok(Pauli::I),
            'X' => Ok(Pauli::X),
            'Y' => Ok(Pauli::Y),
            'Z' => Ok(Pauli::Z),
            other => Err(invalid(format!("unknown Pauli symbol {other:?}"))),
        }
    }
}

/// Real multiple of a tensor product of single-qubit Paulis.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliString {
    axes: Vec<Pauli>,
    coefficient: f64,
}

impl PauliString {
    pub fn new(axes: Vec<Pauli>, coefficient: f64) -> Result<Self> {
        if axes.is_empty() {
            return Err(invalid("Pauli string needs at least one qubit"));
        }
        if !coefficient.is_finite() {
            return Err(invalid(format!("Pauli coefficient {coefficient} is not finite")));
        }
        Ok(Self { axes, coefficient })
    }

    pub fn parse(label: &str, coefficient: f64) -> Result<Self> {
        let axes = label.chars().map(Pauli::try_from).collect::<Result<Vec<_>>>()?;
        Self::new(axes, coefficient)
    }

    /// Single non-identity axis on `qubit` of an `n`-qubit register.
    pub fn single(n_qubits: usize, qubit: usize, axis: Pauli, coefficient: f64) -> Result<Self> {
        Self::from_sites(n_qubits, &[(qubit, axis)], coefficient)
    }

    pub fn from_sites(n_qubits: usize, sites: &[(usize, Pauli)], coefficient: f64) -> Result<Self> {
        let mut axes = vec![Pauli::I; n_qubits];
        for &(q, axis) in sites {
            if q >= n_qubits {
                return Err(invalid(format!("qubit {q} outside {n_qubits}-qubit register")));
            }
            axes[q] = axis;
        }
        Self::new(axes, coefficient)
    }

    pub fn n_qubits(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Pauli] {
        &self.axes
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    pub fn label(&self) -> String {
        self.axes.iter().map(|p| p.symbol()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.axes.iter().all(|&p| p == Pauli::I)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut acc = self.axes[0].matrix();
        for axis in &self.axes[1..] {
            acc = linalg::kron(&acc, &axis.matrix());
        }
        acc * c(self.coefficient)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*{}", self.coefficient, self.label())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, 1.0)
    }
}

#[derive(Debug, Clone)]
pub enum Term {
    Pauli(PauliString),
    Dense(CMatrix),
}

/// `H = sum_gamma H_gamma` with the dense form of every term kept alongside.
#[derive(Debug, Clone)]
pub struct TermSum {
    n_qubits: usize,
    terms: Vec<Term>,
    dense: Vec<CMatrix>,
}

impl TermSum {
    pub fn new(n_qubits: usize, terms: Vec<Term>) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("a term sum needs at least one term"));
        }
        if n_qubits == 0 || n_qubits > 16 {
            return Err(invalid(format!("unsupported qubit count {n_qubits}")));
        }
        let dim = 1usize << n_qubits;
        let mut dense = Vec::with_capacity(terms.len());
        for (idx, term) in terms.iter().enumerate() {
            let m = match term {
                Term::Pauli(p) => {
                    if p.n_qubits() != n_qubits {
                        return Err(invalid(format!(
                            "term {idx} acts on {} qubits, expected {n_qubits}",
                            p.n_qubits()
                        )));
                    }
                    p.to_dense()
                }
                Term::Dense(m) => m.clone(),
            };
            if m.shape() != (dim, dim) {
                return Err(invalid(format!("term {idx} has shape {:?}, expected {dim}x{dim}", m.shape())));
            }
            let residual = linalg::hermitian_residual(&m);
            if residual > HERMITIAN_TOL {
                return Err(invalid(format!("term {idx} is not Hermitian (residual {residual:e})")));
            }
            dense.push(m);
        }
        Ok(Self { n_qubits, terms, dense })
    }

    pub fn from_paulis(n_qubits: usize, paulis: Vec<PauliString>) -> Result<Self> {
        Self::new(n_qubits, paulis.into_iter().map(Term::Pauli).collect())
    }

    pub fn from_dense(n_qubits: usize, matrices: Vec<CMatrix>) -> Result<Self> {
        Self::new(n_qubits, matrices.into_iter().map(Term::Dense).collect())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    /// Number of terms.
    pub fn gamma(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn dense(&self, gamma: usize) -> &CMatrix {
        &self.dense[gamma]
    }

    pub fn dense_terms(&self) -> &[CMatrix] {
        &self.dense
    }

    pub fn hamiltonian(&self) -> CMatrix {
        let dim = self.dim();
        self.dense.iter().fold(CMatrix::zeros(dim, dim), |acc, m| acc + m)
    }

    pub fn term_norms(&self) -> Vec<f64> {
        self.dense
            .iter()
            .zip(&self.terms)
            .map(|(m, t)| match t {
                Term::Pauli(p) => p.coefficient().abs(),
                Term::Dense(_) => spectral_norm(m).expect("terms are square"),
            })
            .collect()
    }

    /// `sum_gamma ||H_gamma||`.
    pub fn norm_sum(&self) -> f64 {
        self.term_norms().iter().sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&TermSumDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TermSumDoc = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum TermDoc {
    Pauli { pauli: String, coeff: f64 },
    Dense { dense_real: Vec<Vec<f64>>, dense_imag: Vec<Vec<f64>> },
}

/// JSON layout: `{"n_qubits": n, "terms": [{"pauli": "XZ", "coeff": 1.0} | {"dense_real": .., "dense_imag": ..}]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TermSumDoc {
    n_qubits: usize,
    terms: Vec<TermDoc>,
}

impl From<&TermSum> for TermSumDoc {
    fn from(ts: &TermSum) -> Self {
        let terms = ts
            .terms
            .iter()
            .map(|t| match t {
                Term::Pauli(p) => TermDoc::Pauli { pauli: p.label(), coeff: p.coefficient() },
                Term::Dense(m) => {
                    let rows = |f: fn(&Complex64) -> f64| {
                        (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
                    };
                    TermDoc::Dense { dense_real: rows(|z| z.re), dense_imag: rows(|z| z.im) }
                }
            })
            .collect();
        TermSumDoc { n_qubits: ts.n_qubits, terms }
    }
}

impl TryFrom<TermSumDoc> for TermSum {
    type Error = Error;

    fn try_from(doc: TermSumDoc) -> Result<Self> {
        let terms = doc
            .terms
            .into_iter()
            .map(|t| match t {
                TermDoc::Pauli { pauli, coeff } => PauliString::parse(&pauli, coeff).map(Term::Pauli),
                TermDoc::Dense { dense_real, dense_imag } => {
                    let n = dense_real.len();
                    let ragged = dense_real.iter().chain(&dense_imag).any(|row| row.len() != n);
                    if dense_imag.len() != n || ragged {
                        return Err(invalid("dense term must be square with matching real and imaginary parts"));
                    }
                    Ok(Term::Dense(CMatrix::from_fn(n, n, |i, j| Complex64::new(dense_real[i][j], dense_imag[i][j]))))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        TermSum::new(doc.n_qubits, terms)
    }
}

/// 1D Heisenberg chain `sum_i (XX + YY + ZZ)_{i,i+1} + sum_i h_i Z_i` with
/// fields drawn uniformly from `[-1, 1]`.
///
/// Terms are ordered XX bonds, YY bonds, ZZ bonds, then Z fields, each left
/// to right.
pub fn heisenberg_chain(length: usize, seed: u64) -> Result<TermSum> {
    if length < 2 {
        return Err(invalid(format!("Heisenberg chain needs L >= 2, got {length}")));
    }
    let fields = heisenberg_fields(length, seed);
    let mut paulis = Vec::with_capacity(4 * length - 3);
    for axis in [Pauli::X, Pauli::Y, Pauli::Z] {
        for i in 0..length - 1 {
            paulis.push(PauliString::from_sites(length, &[(i, axis), (i + 1, axis)], 1.0)?);
        }
    }
    for (i, &h) in fields.iter().enumerate() {
        paulis.push(PauliString::single(length, i, Pauli::Z, h)?);
    }
    TermSum::from_paulis(length, paulis)
}

/// The on-site fields used by [`heisenberg_chain`] for this seed.
pub fn heisenberg_fields(length: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng::stream(seed, "heisenberg_fields");
    (0..length).map(|_| rng.random_range(-1.0..=1.0)).collect()
}

/// Right-nested commutator `[H_{g1}, [H_{g2}, [..., H_{gk}]]]` (zero-based indices).
pub fn nested_commutator(terms: &TermSum, indices: &[usize]) -> Result<CMatrix> {
    let (&innermost, outer) = indices
        .split_last()
        .ok_or_else(|| invalid("nested commutator needs at least one index"))?;
    check_index(terms, innermost)?;
    let mut acc = terms.dense(innermost).clone();
    for &g in outer.iter().rev() {
        check_index(terms, g)?;
        acc = commutator(terms.dense(g), &acc);
    }
    Ok(acc)
}

fn check_index(terms: &TermSum, g: usize) -> Result<()> {
    if g >= terms.gamma() {
        return Err(invalid(format!("term index {g} out of range for {} terms", terms.gamma())));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    Exact,
    Bound,
}

/// Limits on exact commutator enumeration.
#[derive(Debug, Clone, Copy)]
pub struct CommutatorBudget {
    /// Largest admissible `Gamma^j` for exact enumeration.
    pub max_evaluations: u64,
    /// Nested commutators whose max entry drops below this are treated as zero.
    pub prune_tol: f64,
    /// Exact lambda takes the sup over `j <= sigma*m + j_cap_extra`.
    pub j_cap_extra: usize,
}

impl Default for CommutatorBudget {
    fn default() -> Self {
        Self { max_evaluations: 1_000_000, prune_tol: 1e-14, j_cap_extra: 4 }
    }
}

fn check_budget(gamma: usize, order: usize, budget: &CommutatorBudget) -> Result<()> {
    let count = (gamma as f64).powi(order as i32);
    if count > budget.max_evaluations as f64 {
        return Err(Error::ResourceLimit(format!(
            "exact alpha_comm of order {order} needs {count:.3e} commutators (cap {}); use bound mode",
            budget.max_evaluations
        )));
    }
    Ok(())
}

/// `alpha_comm^{(j)}`: the sum over all `j`-tuples of the spectral norm of
/// the right-nested commutator, or its bound `(2 sum ||H_g||)^j / 2`.
pub fn alpha_comm(terms: &TermSum, j: usize, mode: NormMode) -> Result<f64> {
    alpha_comm_with(terms, j, mode, &CommutatorBudget::default())
}

pub fn alpha_comm_with(terms: &TermSum, j: usize, mode: NormMode, budget: &CommutatorBudget) -> Result<f64> {
    if j == 0 {
        return Err(invalid("alpha_comm order must be >= 1"));
    }
    match mode {
        NormMode::Bound => Ok(0.5 * (2.0 * terms.norm_sum()).powi(j as i32)),
        NormMode::Exact => {
            check_budget(terms.gamma(), j, budget)?;
            let mut total = 0.0;
            nested_norm_sum(terms, j, budget, &mut |m| spectral_norm(m), &mut total)?;
            Ok(total)
        }
    }
}

/// `sum_{g1..gj} || P [H_g1 ... H_gj] P ||` for a symmetry projector `P`.
pub fn alpha_comm_projected(terms: &TermSum, proj: &SymmetryProjector, j: usize) -> Result<f64> {
    if j == 0 {
        return Err(invalid("alpha_comm order must be >= 1"));
    }
    proj.check_dim(terms.dim())?;
    let budget = CommutatorBudget::default();
    check_budget(terms.gamma(), j, &budget)?;
    let p = proj.matrix();
    let mut total = 0.0;
    nested_norm_sum(terms, j, &budget, &mut |m| spectral_norm(&(p * m * p)), &mut total)?;
    Ok(total)
}

fn nested_norm_sum(
    terms: &TermSum,
    order: usize,
    budget: &CommutatorBudget,
    norm: &mut dyn FnMut(&CMatrix) -> Result<f64>,
    total: &mut f64,
) -> Result<()> {
    fn extend(
        terms: &TermSum,
        current: &CMatrix,
        remaining: usize,
        budget: &CommutatorBudget,
        norm: &mut dyn FnMut(&CMatrix) -> Result<f64>,
        total: &mut f64,
    ) -> Result<()> {
        if remaining == 0 {
            *total += norm(current)?;
            return Ok(());
        }
        for h in terms.dense_terms() {
            let next = commutator(h, current);
            if max_abs(&next) < budget.prune_tol {
                continue;
            }
            extend(terms, &next, remaining - 1, budget, norm, total)?;
        }
        Ok(())
    }
    for h in terms.dense_terms() {
        extend(terms, h, order - 1, budget, norm, total)?;
    }
    Ok(())
}

/// Outcome of [`lambda_param`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaReport {
    pub value: f64,
    pub mode: NormMode,
    /// Largest `j` included in the exact-mode supremum.
    pub j_cap: Option<usize>,
    /// Exact mode always truncates the supremum over `j`.
    pub truncated: bool,
    /// `(j, l)` attaining the maximum in exact mode.
    pub maximizer: Option<(usize, usize)>,
}

/// Uniform growth-rate parameter `lambda = sup_{j,l} lambda_{j,l}`.
///
/// Bound mode returns `4 sum ||H_g||`. Exact mode evaluates
///
/// `lambda_{j,l} = ( sum_{j_1+..+j_l = j} prod_k 2 alpha^{(j_k+1)} / (j_k+1)^2 )^{1/(j+l)}`
///
/// with every part `j_k` a multiple of `sigma` no smaller than `p`, over
/// `j` in `sigma Z+`, `sigma m <= j <= j_cap`, and `1 <= l <= k_terms`.
pub fn lambda_param(terms: &TermSum, p: usize, sigma: usize, m: usize, k_terms: usize, mode: NormMode) -> Result<LambdaReport> {
    lambda_param_with(terms, p, sigma, m, k_terms, mode, &CommutatorBudget::default())
}

pub fn lambda_param_with(
    terms: &TermSum,
    p: usize,
    sigma: usize,
    m: usize,
    k_terms: usize,
    mode: NormMode,
    budget: &CommutatorBudget,
) -> Result<LambdaReport> {
    if p == 0 || m == 0 || k_terms == 0 || !(sigma == 1 || sigma == 2) {
        return Err(invalid(format!("lambda needs p, m, K >= 1 and sigma in {{1, 2}}; got p={p} sigma={sigma} m={m} K={k_terms}")));
    }
    if mode == NormMode::Bound {
        return Ok(LambdaReport { value: 4.0 * terms.norm_sum(), mode, j_cap: None, truncated: false, maximizer: None });
    }
    let j_min = sigma * m;
    let j_cap = j_min + budget.j_cap_extra;
    check_budget(terms.gamma(), j_cap + 1, budget)?;

    // weight[q] = 2 alpha^{(q+1)} / (q+1)^2 for admissible parts q.
    let mut weight = vec![0.0; j_cap + 1];
    for q in (p..=j_cap).filter(|q| q % sigma == 0) {
        let alpha = alpha_comm_with(terms, q + 1, NormMode::Exact, budget)?;
        weight[q] = 2.0 * alpha / ((q + 1) as f64).powi(2);
    }
    // compositions[l][j] = sum over ordered l-part compositions of j.
    let mut compositions = vec![vec![0.0; j_cap + 1]; k_terms + 1];
    compositions[0][0] = 1.0;
    for l in 1..=k_terms {
        for j in 0..=j_cap {
            let mut acc = 0.0;
            for q in 1..=j {
                if weight[q] != 0.0 {
                    acc += weight[q] * compositions[l - 1][j - q];
                }
            }
            compositions[l][j] = acc;
        }
    }
    let mut best = 0.0;
    let mut maximizer = None;
    for j in (j_min..=j_cap).filter(|j| j % sigma == 0) {
        for l in 1..=k_terms {
            let sum = compositions[l][j];
            if sum <= 0.0 {
                continue;
            }
            let value = sum.powf(1.0 / (j + l) as f64);
            if value > best {
                best = value;
                maximizer = Some((j, l));
            }
        }
    }
    Ok(LambdaReport { value: best, mode, j_cap: Some(j_cap), truncated: true, maximizer })
}

/// Orthogonal projector onto a symmetry sector.
#[derive(Debug, Clone)]
pub struct SymmetryProjector {
    matrix: CMatrix,
}

impl SymmetryProjector {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(invalid("projector must be square"));
        }
        if linalg::hermitian_residual(&matrix) > HERMITIAN_TOL {
            return Err(invalid("projector is not Hermitian"));
        }
        let idem = max_abs(&(&matrix * &matrix - &matrix));
        if idem > HERMITIAN_TOL {
            return Err(invalid(format!("projector is not idempotent (residual {idem:e})")));
        }
        Ok(Self { matrix })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self { matrix: identity(1 << n_qubits) }
    }

    pub fn zero(n_qubits: usize) -> Self {
        let dim = 1 << n_qubits;
        Self { matrix: CMatrix::zeros(dim, dim) }
    }

    /// Projector onto computational basis states with `excitations` ones,
    /// i.e. a fixed total-Z sector.
    pub fn magnetization_sector(n_qubits: usize, excitations: usize) -> Self {
        let dim = 1usize << n_qubits;
        let mut matrix = CMatrix::zeros(dim, dim);
        for b in 0..dim {
            if b.count_ones() as usize == excitations {
                matrix[(b, b)] = c(1.0);
            }
        }
        Self { matrix }
    }

    /// Projector onto the span of the given computational basis states.
    pub fn basis_states(n_qubits: usize, states: &[usize]) -> Result<Self> {
        let dim = 1usize << n_qubits;
        let mut matrix = CMatrix::zeros(dim, dim);
        for &b in states {
            if b >= dim {
                return Err(invalid(format!("basis state {b} outside dimension {dim}")));
            }
            matrix[(b, b)] = c(1.0);
        }
        Ok(Self { matrix })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if self.matrix.nrows() != dim {
            return Err(invalid(format!("projector dimension {} does not match {dim}", self.matrix.nrows())));
        }
        Ok(())
    }
}

/// Replaces every term by `P H_g P`. Norms and `alpha_comm` evaluated on the
/// result give the symmetry-restricted quantities when the terms respect the
/// symmetry.
pub fn project_terms(terms: &TermSum, proj: &SymmetryProjector) -> Result<TermSum> {
    proj.check_dim(terms.dim())?;
    let p = proj.matrix();
    let projected = terms.dense_terms().iter().map(|h| linalg::hermitize(&(p * h * p))).collect();
    TermSum::from_dense(terms.n_qubits(), projected)
}
