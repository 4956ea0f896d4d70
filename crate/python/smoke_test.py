"""Smoke test for the trotter_py extension, cross-checked against numpy/scipy."""

import json
import math

import numpy as np
from scipy.linalg import expm

import trotter_py as tp


def dense(rows):
    return np.array(rows, dtype=complex)


def main():
    terms = tp.TermSum.heisenberg_chain(3, 7)
    assert terms.n_qubits == 3 and terms.gamma == 3 * 2 + 3, terms
    h = dense(terms.hamiltonian())
    assert np.allclose(h, h.conj().T)

    obs = tp.TermSum.from_paulis(3, [("ZII", 1.0), ("XXI", 0.5)])
    o = dense(obs.hamiltonian())
    psi = np.zeros(8, dtype=complex)
    psi[5] = 1.0
    t = 0.8
    phi = expm(-1j * h * t) @ psi
    reference = float(np.real(phi.conj() @ o @ phi))
    exact = tp.exact_expectation(terms, t, 5, obs)
    assert abs(exact - reference) < 1e-10, (exact, reference)

    s2 = tp.ProductFormula.suzuki(1, terms.gamma)
    assert s2.order == 2
    u = dense(s2.unitary(terms, 0.1))
    assert np.allclose(u.conj().T @ u, np.eye(8), atol=1e-12)

    plan = tp.RichardsonPlan(4, 3, 2)
    s = 1.0 / np.array(plan.nodes, dtype=float)
    vander = np.vstack([s ** (2 * j) for j in range(4)])
    weights = np.linalg.solve(vander, np.eye(4)[:, 0])
    assert np.allclose(weights, plan.weights, rtol=1e-9), (weights, plan.weights)
    assert json.loads(plan.to_json())["nodes"] == plan.nodes

    values = [tp.trotter_expectation(s2, terms, r, t, 5, obs) for r in plan.nodes]
    plain = abs(values[int(np.argmax(plan.nodes))] - exact)
    extrapolated = abs(plan.extrapolate(values) - exact)
    assert extrapolated < plain * 1e-3, (extrapolated, plain)

    assert tp.hoeffding_samples(0.05, 0.01) == math.ceil(math.log(2 / 0.01) / (2 * 0.05**2))
    assert tp.shadows_samples(0.1, 0.01, 10, 1.0) == math.ceil(128 / 0.1**2 * math.log(10 / 0.01))

    config = {
        "experiment_id": "py_smoke",
        "system": {"L": 3, "seed": 1},
        "time": 1.0,
        "formula": {"kind": "suzuki", "k": 1},
        "method": "richardson",
        "m_values": [1, 2, 3],
    }
    csv = tp.run_experiment(json.dumps(config), seed=2)
    lines = csv.strip().splitlines()
    assert lines[0] == ",".join(tp.CSV_HEADER) and len(lines) == 4, csv

    passed, line = tp.run_criterion(3)
    assert passed, line
    print(line)
    print("smoke test ok")


if __name__ == "__main__":
    main()
