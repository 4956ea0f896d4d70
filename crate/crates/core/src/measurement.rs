//! Measurement models (shot sampling, bounded-noise oracles) and the
//! sample-count and resource formulas that go with them.

use nalgebra::DVector;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::evolution::{Observable, StateVector};
use crate::linalg::HermitianEigen;
use crate::rng;

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(invalid(format!("{name} must lie in (0, 1), got {v}")));
    }
    Ok(())
}

/// Split of a target precision between extrapolation bias and data noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorBudget {
    pub eps_total: f64,
    pub eps_ext: f64,
    pub eps_data: f64,
    pub amplification: f64,
}

pub fn make_budget(eps_total: f64, amplification: f64) -> Result<ErrorBudget> {
    if !(eps_total > 0.0 && eps_total < 2.0) {
        return Err(invalid(format!("eps_total must lie in (0, 2), got {eps_total}")));
    }
    if !(amplification >= 1.0 && amplification.is_finite()) {
        return Err(invalid(format!("amplification must be >= 1, got {amplification}")));
    }
    Ok(ErrorBudget {
        eps_total,
        eps_ext: eps_total / 2.0,
        eps_data: eps_total / (2.0 * amplification),
        amplification,
    })
}

/// Circuit depth and total Trotter step count of a measurement campaign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResourceReport {
    pub d_max: u64,
    pub c_trot: u64,
    /// `(|r_k|, repetitions)` per node.
    pub per_node: Vec<(u64, u64)>,
}

/// Same repetition count at every node; negative step counts cost `|r|`.
pub fn resource_report(nodes: &[i64], repetitions_per_node: u64) -> Result<ResourceReport> {
    let per_node: Vec<(u64, u64)> = nodes.iter().map(|&r| (r.unsigned_abs(), repetitions_per_node)).collect();
    resource_report_per_node(&per_node)
}

pub fn resource_report_per_node(per_node: &[(u64, u64)]) -> Result<ResourceReport> {
    if per_node.is_empty() || per_node.iter().any(|&(r, _)| r == 0) {
        return Err(invalid("resource report needs at least one node, all with |r| >= 1"));
    }
    let d_max = per_node.iter().map(|&(r, _)| r).max().expect("non-empty");
    let c_trot = per_node
        .iter()
        .try_fold(0u64, |acc, &(r, n)| r.checked_mul(n).and_then(|v| acc.checked_add(v)))
        .ok_or_else(|| invalid("Trotter step total overflows u64"))?;
    Ok(ResourceReport { d_max, c_trot, per_node: per_node.to_vec() })
}

/// `ceil(ln(2/delta') / (2 eps^2))`. `eps_data = 1` is admitted as the
/// degenerate single-sample case.
pub fn hoeffding_samples(eps_data: f64, delta_prime: f64) -> Result<u64> {
    if !(eps_data > 0.0 && eps_data <= 1.0) {
        return Err(invalid(format!("eps_data must lie in (0, 1], got {eps_data}")));
    }
    check_open_unit("delta'", delta_prime)?;
    Ok(((2.0 / delta_prime).ln() / (2.0 * eps_data * eps_data)).ceil() as u64)
}

/// `ceil(100/eps ln((2m/delta) ln(pi/eps)))`.
pub fn iqae_grover_calls(eps_data: f64, m: usize, delta: f64) -> Result<u64> {
    check_open_unit("eps_data", eps_data)?;
    check_open_unit("delta", delta)?;
    if m == 0 {
        return Err(invalid("m must be >= 1"));
    }
    let inner = 2.0 * m as f64 / delta * (std::f64::consts::PI / eps_data).ln();
    Ok((100.0 / eps_data * inner.ln()).ceil() as u64)
}

/// `ceil(128 / eps^2 max_norm^2 ln(M/delta))`.
pub fn shadows_samples(eps_data: f64, delta: f64, num_observables: usize, max_norm: f64) -> Result<u64> {
    if !(eps_data > 0.0) || !(max_norm >= 0.0) || num_observables == 0 {
        return Err(invalid("shadows_samples needs eps > 0, max_norm >= 0 and M >= 1"));
    }
    check_open_unit("delta", delta)?;
    let log = (num_observables as f64 / delta).ln();
    Ok((128.0 / (eps_data * eps_data) * max_norm * max_norm * log).ceil() as u64)
}

/// Samples projective measurements of a fixed observable.
#[derive(Debug, Clone)]
pub struct ShotSampler {
    eigen: HermitianEigen,
    /// Affine map applied to each outcome: `scale * lambda + shift`.
    scale: f64,
    shift: f64,
}

impl ShotSampler {
    pub fn new(obs: &Observable) -> Result<Self> {
        Ok(Self { eigen: HermitianEigen::new(obs.matrix())?, scale: 1.0, shift: 0.0 })
    }

    /// Outcomes mapped affinely from `[lambda_min, lambda_max]` onto `[-1, 1]`.
    pub fn rescaled_unit(obs: &Observable) -> Result<Self> {
        let eigen = HermitianEigen::new(obs.matrix())?;
        let lo = eigen.values.min();
        let hi = eigen.values.max();
        if hi - lo <= 0.0 {
            return Ok(Self { eigen, scale: 0.0, shift: 0.0 });
        }
        let scale = 2.0 / (hi - lo);
        Ok(Self { eigen, scale, shift: -1.0 - scale * lo })
    }

    pub fn map_outcome(&self, lambda: f64) -> f64 {
        self.scale * lambda + self.shift
    }

    /// Outcome values and their probabilities in the given state.
    pub fn distribution(&self, psi: &StateVector) -> Result<(Vec<f64>, Vec<f64>)> {
        if psi.dim() != self.eigen.dim() {
            return Err(invalid("state and observable dimensions differ"));
        }
        let coords: DVector<_> = self.eigen.vectors.adjoint() * psi.amplitudes();
        let probs = coords.iter().map(|z| z.norm_sqr()).collect();
        let outcomes = self.eigen.values.iter().map(|&v| self.map_outcome(v)).collect();
        Ok((outcomes, probs))
    }

    /// Expectation of the (mapped) outcome.
    pub fn mean(&self, psi: &StateVector) -> Result<f64> {
        let (outcomes, probs) = self.distribution(psi)?;
        Ok(outcomes.iter().zip(&probs).map(|(o, p)| o * p).sum())
    }

    /// Mean of `shots` independent outcomes.
    pub fn sample_mean<R: Rng + ?Sized>(&self, psi: &StateVector, shots: u64, rng: &mut R) -> Result<f64> {
        if shots == 0 {
            return Err(invalid("need at least one shot"));
        }
        let (outcomes, probs) = self.distribution(psi)?;
        let dist = WeightedIndex::new(&probs).map_err(|e| invalid(format!("outcome distribution: {e}")))?;
        let mut counts = vec![0u64; outcomes.len()];
        for _ in 0..shots {
            counts[dist.sample(rng)] += 1;
        }
        let total: f64 = counts.iter().zip(&outcomes).map(|(&n, &o)| n as f64 * o).sum();
        Ok(total / shots as f64)
    }
}

/// Sample mean of `shots` projective measurements of `obs` in `state_after`.
pub fn simulate_incoherent(obs: &Observable, state_after: &StateVector, shots: u64, seed: u64) -> Result<f64> {
    let mut rng = rng::stream(seed, "incoherent_shots");
    ShotSampler::new(obs)?.sample_mean(state_after, shots, &mut rng)
}

/// `exact_value + u` with `u` uniform on `[-eps_data, eps_data]`.
pub fn simulate_noisy_eval(exact_value: f64, eps_data: f64, seed: u64) -> Result<f64> {
    if !(eps_data >= 0.0 && eps_data.is_finite()) {
        return Err(invalid(format!("eps_data must be non-negative, got {eps_data}")));
    }
    if eps_data == 0.0 {
        return Ok(exact_value);
    }
    let mut rng = rng::stream(seed, "bounded_noise");
    Ok(exact_value + rng.random_range(-eps_data..=eps_data))
}

/// `exact_value + eps_data * sign`, the worst case of the bounded-noise oracle.
pub fn adversarial_noisy_eval(exact_value: f64, eps_data: f64, sign: f64) -> f64 {
    exact_value + eps_data * sign.signum()
}

/// Seed for the measurement at node `index` of experiment run `master`.
pub fn node_seed(master: u64, index: usize) -> u64 {
    rng::child_seed(master, &format!("node/{index}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::random_pauli_observable;
    use crate::linalg::{c, identity, CVector};

    #[test]
    fn budget_examples() {
        let b = make_budget(0.02, 1.0).unwrap();
        assert_eq!((b.eps_ext, b.eps_data), (0.01, 0.01));
        let b = make_budget(0.02, 2.0).unwrap();
        assert_eq!((b.eps_ext, b.eps_data), (0.01, 0.005));
        let b = make_budget(0.3, 1.7).unwrap();
        assert!((b.eps_ext + b.amplification * b.eps_data - 0.3).abs() < 1e-16);
        assert!(make_budget(0.02, 0.5).is_err());
    }

    #[test]
    fn resource_examples() {
        let r = resource_report(&[5, 8, 21], 1).unwrap();
        assert_eq!((r.d_max, r.c_trot), (21, 34));
        assert_eq!(resource_report(&[5, 8, 21], 7).unwrap().c_trot, 7 * 34);
        let single = resource_report(&[13], 4).unwrap();
        assert_eq!(single.d_max, single.c_trot / 4);
        assert_eq!(resource_report(&[-9, 9], 1).unwrap().c_trot, 18);
        assert!(resource_report(&[0], 1).is_err());
    }

    #[test]
    fn hoeffding_examples() {
        assert_eq!(hoeffding_samples(1.0, 2.0 / std::f64::consts::E.powi(2)).unwrap(), 1);
        assert_eq!(hoeffding_samples(0.01, 0.01).unwrap(), 26492);
        let a = hoeffding_samples(0.02, 0.05).unwrap();
        let b = hoeffding_samples(0.01, 0.05).unwrap();
        assert!(b >= 4 * a - 4 && b <= 4 * a);
        assert!(hoeffding_samples(0.0, 0.1).is_err());
    }

    #[test]
    fn iqae_examples() {
        let expect = (10000.0 * (1600.0 * (100.0 * std::f64::consts::PI).ln()).ln()).ceil() as u64;
        assert_eq!(iqae_grover_calls(0.01, 8, 0.01).unwrap(), expect);
        assert!(iqae_grover_calls(0.02, 8, 0.01).unwrap() <= iqae_grover_calls(0.01, 8, 0.01).unwrap());
        let step = iqae_grover_calls(0.05, 16, 0.01).unwrap() - iqae_grover_calls(0.05, 8, 0.01).unwrap();
        assert!(step as f64 <= 100.0 / 0.05 * 2f64.ln() + 1.0);
    }

    #[test]
    fn shadows_examples() {
        // ceil(12800 ln 1000) = ceil(88419.27)
        assert_eq!(shadows_samples(0.1, 0.01, 10, 1.0).unwrap(), 88420);
        let unit = shadows_samples(0.5, 1.0 / std::f64::consts::E, 1, 2.0).unwrap();
        assert_eq!(unit, (128.0 * 4.0 / 0.25_f64).ceil() as u64);
    }

    #[test]
    fn incoherent_sampling() {
        let id = Observable::new(identity(4)).unwrap();
        let psi = StateVector::basis(2, 1).unwrap();
        assert_eq!(simulate_incoherent(&id, &psi, 17, 3).unwrap(), 1.0);
        let z = Observable::new(crate::terms::Pauli::Z.matrix()).unwrap();
        assert_eq!(simulate_incoherent(&z, &StateVector::basis(1, 1).unwrap(), 50, 9).unwrap(), -1.0);

        let obs = random_pauli_observable(2, 3, 4).unwrap();
        let amp = CVector::from_vec(vec![c(0.5), c(0.5), c(0.5), c(-0.5)]);
        let psi = StateVector::new(amp).unwrap();
        let sampler = ShotSampler::new(&obs).unwrap();
        let exact = obs.expectation(psi.amplitudes()).unwrap();
        assert!((sampler.mean(&psi).unwrap() - exact).abs() < 1e-12);
        let (outcomes, probs) = sampler.distribution(&psi).unwrap();
        let var: f64 = outcomes.iter().zip(&probs).map(|(o, p)| p * (o - exact).powi(2)).sum();
        let shots = 100_000;
        let est = simulate_incoherent(&obs, &psi, shots, 21).unwrap();
        assert!((est - exact).abs() < 5.0 * (var / shots as f64).sqrt() + 1e-12);
    }

    #[test]
    fn rescaled_outcomes_span_unit_interval() {
        let obs = random_pauli_observable(2, 3, 4).unwrap();
        let sampler = ShotSampler::rescaled_unit(&obs).unwrap();
        let (lo, hi) = obs.spectrum_bounds().unwrap();
        assert!((sampler.map_outcome(lo) + 1.0).abs() < 1e-12);
        assert!((sampler.map_outcome(hi) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bounded_noise() {
        assert_eq!(simulate_noisy_eval(0.3, 0.0, 1).unwrap(), 0.3);
        for seed in 0..10_000 {
            let v = simulate_noisy_eval(0.3, 1e-3, seed).unwrap();
            assert!((v - 0.3).abs() <= 1e-3);
        }
        assert_eq!(adversarial_noisy_eval(1.0, 0.25, -3.0), 0.75);
    }
}
