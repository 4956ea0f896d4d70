"""Independent arithmetic for the resource formulas.

Writes resource_values.json, which the Rust acceptance check compares
against. Uses only the standard library; rerun after changing a case.
"""

import json
import math
from pathlib import Path


def sufficient_min_steps(a_max, upsilon, lam, t, p, sigma, m, eps, b1):
    base = a_max * upsilon * lam * t
    noise = (4.0 * b1 / eps) ** (1.0 / (sigma * m))
    if base <= 1.0:
        value = base * noise
    else:
        exponent = 1.0 + math.ceil(sigma * m / p) / (sigma * m)
        value = base**exponent * noise
    return max(1, math.ceil(value))


def iqae_grover_calls(eps, m, delta):
    return math.ceil(100.0 / eps * math.log(2.0 * m / delta * math.log(math.pi / eps)))


def shadows_samples(eps, delta, n_obs, max_norm):
    return math.ceil(128.0 / eps**2 * max_norm**2 * math.log(n_obs / delta))


def resource_report(nodes, reps):
    return {"d_max": max(abs(r) for r in nodes), "c_trot": reps * sum(abs(r) for r in nodes)}


CASES = {
    "sufficient_min_steps": [
        {"a_max": 0.5, "upsilon": 4, "lambda": 1.0, "T": 1.0, "p": 2, "sigma": 2, "m": 4, "eps": 1e-3, "b_one_norm": 1.5},
        {"a_max": 0.5, "upsilon": 2, "lambda": 0.9, "T": 1.0, "p": 2, "sigma": 2, "m": 3, "eps": 1e-2, "b_one_norm": 1.56},
        {"a_max": 1.0, "upsilon": 1, "lambda": 8.0, "T": 2.5, "p": 1, "sigma": 1, "m": 5, "eps": 1e-4, "b_one_norm": 3.2},
    ],
    "iqae_grover_calls": [
        {"eps": 0.01, "m": 8, "delta": 0.01},
        {"eps": 0.1, "m": 3, "delta": 0.05},
        {"eps": 0.003, "m": 12, "delta": 0.001},
    ],
    "shadows_samples": [
        {"eps": 0.1, "delta": 0.01, "M": 10, "max_norm": 1.0},
        {"eps": 0.05, "delta": 0.05, "M": 3, "max_norm": 2.5},
        {"eps": 0.2, "delta": 0.001, "M": 100, "max_norm": 0.75},
    ],
    "resource_report": [
        {"nodes": [5, 8, 21], "reps": 1},
        {"nodes": [42, 16, 10], "reps": 738},
        {"nodes": [104, 250, -250, -104], "reps": 26492},
    ],
}


def main():
    out = {}
    c = CASES["sufficient_min_steps"]
    out["sufficient_min_steps"] = [
        dict(case, expected=sufficient_min_steps(
            case["a_max"], case["upsilon"], case["lambda"], case["T"], case["p"],
            case["sigma"], case["m"], case["eps"], case["b_one_norm"]))
        for case in c
    ]
    out["iqae_grover_calls"] = [
        dict(case, expected=iqae_grover_calls(case["eps"], case["m"], case["delta"]))
        for case in CASES["iqae_grover_calls"]
    ]
    out["shadows_samples"] = [
        dict(case, expected=shadows_samples(case["eps"], case["delta"], case["M"], case["max_norm"]))
        for case in CASES["shadows_samples"]
    ]
    out["resource_report"] = [
        dict(case, expected=resource_report(case["nodes"], case["reps"]))
        for case in CASES["resource_report"]
    ]
    path = Path(__file__).with_name("resource_values.json")
    path.write_text(json.dumps(out, indent=2) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
