"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` (lines are printed even
when output capture is on) or ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from smchmc.experiments import (
    ExperimentConfig,
    run_accuracy,
    run_adjusted,
    run_bias,
    run_contraction,
    run_experiment,
    run_mjp,
)
from smchmc.integrators import (
    PhasePoint,
    exact_flow_gaussian,
    hamiltonian,
    stratum_average_force,
    two_stage_step,
)
from smchmc.potentials import (
    anisotropic_gaussian,
    double_well,
    finite_difference_gradient,
    isotropic_gaussian,
    rough_well,
)
from smchmc.randomness import RandomStream
from smchmc.samplers import tune_uhmc


@pytest.fixture
def report(capsys):
    start = time.perf_counter()
    lines = []

    def emit(label, ok, detail):
        lines.append(f"{'PASS' if ok else 'FAIL'} {label}: {detail} [{time.perf_counter() - start:.1f}s]")
        with capsys.disabled():
            print("\n" + lines[-1])
        return ok

    return emit


def checks_of(table, names):
    return {c.name: c for c in table.checks if c.name in names}


def test_1_smc_order_harmonic(report):
    t = run_accuracy(ExperimentConfig("accuracy", model="iso:1", seed=1))
    s = t.summary["slope_smc"]
    assert report("1 sMC L2 order, harmonic oscillator", 1.35 <= s <= 1.65, f"slope {s:.4f} in [1.35, 1.65]")


def test_2_smc_order_double_well(report):
    t = run_accuracy(ExperimentConfig("accuracy", model="dw", seed=2))
    s = t.summary["slope_smc"]
    assert report("2 sMC L2 order, double well", 1.35 <= s <= 1.65, f"slope {s:.4f} in [1.35, 1.65]")


def test_3_almost_sure_contraction(report):
    t = run_contraction(ExperimentConfig("contraction", seed=3, chain_trials=10, steps=2))
    c = checks_of(t, {"as_contraction"})["as_contraction"]
    assert report("3 almost-sure flow contraction", c.passed and c.enforced, c.detail)


def test_4_chain_contraction(report):
    t = run_contraction(ExperimentConfig("contraction", seed=4, trials=10))
    c = checks_of(t, {"chain_contraction"})["chain_contraction"]
    assert report("4 coupled uHMC chain contraction", c.passed and c.enforced, c.detail)


def test_5_bias_order(report):
    t = run_bias(ExperimentConfig("bias", seed=5))
    c = checks_of(t, {"bias_order", "adjusted_at_floor", "coupled_monotone"})
    ok = all(x.passed for x in c.values())
    detail = "; ".join(x.detail for x in c.values())
    detail += f"; quantile-method slope (informational) {t.summary['slope_quantile']}"
    assert report("5 uHMC stationary bias order", ok, detail)


def test_6_metropolis_exactness(report):
    t = run_adjusted(ExperimentConfig("adjusted", seed=6, h=0.5, n_int=4))
    ok = t.passed and len(t.rows) == 200_000
    detail = f"acceptance {t.summary['acceptance_rate']:.4f}; " + "; ".join(
        f"{c.name} {c.label}" for c in t.checks
    )
    assert report("6 adjusted HMC exactness and Verlet bit-match", ok, detail)


def test_7_jump_statistics(report):
    t = run_mjp(ExperimentConfig("mjp", seed=7, lam=1.0, h=0.5, chain_trials=2, t_end=10.0, trials=100, T=5.0))
    c = checks_of(t, {"refresh_fraction", "mean_gap", "gradient_rate", "binomial_split"})
    ok = len(c) == 4 and all(x.passed for x in c.values()) and t.summary["events"] >= 95_000
    assert report("7 jump-process event statistics", ok, "; ".join(f"{k}: {v.detail}" for k, v in c.items()))


def test_8_jump_contraction(report):
    t = run_mjp(ExperimentConfig("mjp", seed=8, lam=12.0, h=1 / 24, events=100, trials=100, T=2.0))
    c = checks_of(t, {"rho_contraction", "metric_equivalence"})
    ok = len(c) == 2 and all(x.passed for x in c.values())
    assert report("8 jump-process contraction in the distorted metric", ok, "; ".join(x.detail for x in c.values()))


def _grad_fd_ok():
    s = RandomStream(90)
    for model in (isotropic_gaussian(1.5, 3), anisotropic_gaussian([0.2, 5.0]), double_well(), rough_well(1.0)):
        for _ in range(200):
            x = 3.5 * (2 * s.uniform(size=model.dim) - 1)
            g = model.gradient(x)
            if np.max(np.abs(g - finite_difference_gradient(model, x))) >= 1e-6 * max(1.0, np.max(np.abs(g))):
                return False
    return True


def _energy_ok():
    m = anisotropic_gaussian([0.3, 1.0, 7.0])
    s = RandomStream(91)
    for _ in range(200):
        st = PhasePoint(s.normal(3) * 3, s.normal(3) * 3)
        t = 100 * s.uniform()
        if abs(hamiltonian(m, exact_flow_gaussian(m, st, t)) - hamiltonian(m, st)) >= 1e-10:
            return False
    return True


def _unbiased_ok():
    N, h = 100_000, 0.3
    for model in (isotropic_gaussian(2.0), double_well(), rough_well(1.0)):
        st = PhasePoint.of([0.9], [-1.7])
        u = RandomStream(92).uniform(0.0, h, size=N)
        f = -model.gradient(st.x + u[:, None] * st.v)[:, 0]
        if abs(f.mean() - stratum_average_force(model, st, h)[0]) > 3 * f.std(ddof=1) / math.sqrt(N):
            return False
    return True


def _reversible_and_volume_ok():
    s = RandomStream(93)
    for model in (isotropic_gaussian(1.0), double_well(), rough_well(1.0)):
        for _ in range(100):
            b, h = 0.5 * s.uniform(), 0.01 + 0.49 * s.uniform()
            st = PhasePoint(4 * s.uniform(size=1) - 2, 4 * s.uniform(size=1) - 2)
            back = two_stage_step(model, two_stage_step(model, st, h, b).flip(), h, b).flip()
            if max(abs(back.x[0] - st.x[0]), abs(back.v[0] - st.v[0])) >= 1e-10:
                return False
    for model in (isotropic_gaussian(1.0), double_well()):
        for _ in range(100):
            b, h = 0.5 * s.uniform(), 0.01 + 0.49 * s.uniform()
            z, eps = 4 * s.uniform(size=2) - 2, 1e-6

            def f(w):
                o = two_stage_step(model, PhasePoint(w[:1], w[1:]), h, b)
                return np.concatenate([o.x, o.v])

            J = np.stack([(f(z + e) - f(z - e)) / (2 * eps) for e in np.eye(2) * eps], axis=1)
            if abs(np.linalg.det(J) - 1) >= 1e-6:
                return False
    return True


def _tune_ok():
    r = tune_uhmc(1.0, 1.0, 1, 0.1, 1.0)
    return r.m == 144 and abs(r.c - 1 / 48) < 1e-15


def _reruns_ok(tmp_path):
    cfgs = [
        dict(subcommand="accuracy", trials=100, n_range=(2, 5)),
        dict(subcommand="bias", trials=100, n_range=(2, 4), steps=5),
        dict(subcommand="mjp", trials=50, events=500, chain_trials=2, t_end=5.0, T=2.0),
        dict(subcommand="adjusted", trials=5, steps=20),
    ]
    for i, cfg in enumerate(cfgs):
        a, b = tmp_path / f"{i}a.csv", tmp_path / f"{i}b.csv"
        run_experiment(ExperimentConfig(seed=99, out=str(a), **cfg))
        run_experiment(ExperimentConfig(seed=99, out=str(b), **cfg))
        if a.read_bytes() != b.read_bytes():
            return False
    return True


def test_9_property_suites(report, tmp_path):
    results = {
        "gradient_vs_fd": _grad_fd_ok(),
        "exact_flow_energy": _energy_ok(),
        "smc_force_unbiased": _unbiased_ok(),
        "two_stage_reversible_unit_jacobian": _reversible_and_volume_ok(),
        "tune_worked_example": _tune_ok(),
        "byte_identical_reruns": _reruns_ok(tmp_path),
    }
    ok = all(results.values())
    assert report("9 property suites", ok, ", ".join(f"{k}={'ok' if v else 'BROKEN'}" for k, v in results.items()))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
