"""Acceptance gate.

Each check carries ``criterion(n, title)``; the terminal summary prints one
PASS/FAIL line per criterion.  Reference values come from independent
computations inside this module (numpy linear algebra, scipy's DOP853).
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from comonotone.algorithms import CripasConfig, EdConfig, StoppingRule, run_cripas, run_ed, run_raw_al
from comonotone.diagnostics import (
    discrete_summability_series,
    lyapunov_continuous,
    lyapunov_discrete,
    summability_report,
)
from comonotone.dynamics import Sys6Config, integrate_sys6
from comonotone.errors import MonotonicityRequired
from comonotone.harness import run_preset
from comonotone.harness.presets import build_preset, resolve_parameters
from comonotone.operators import (
    OperatorSpec,
    certify_comonotone,
    load_problem,
    resolvent_map,
    yosida_map,
    yosida_semigroup_check,
)

from conftest import random_certified_matrix

SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])
COMONO = np.array([[-0.4, 0.8], [-0.8, -0.4]])

C1 = pytest.mark.criterion(1, "operator algebra on the examples and 20 random certified operators")
C2 = pytest.mark.criterion(2, "comonotonicity certification")
C3 = pytest.mark.criterion(3, "ed and raw recursion agree for 1e4 iterations")
C4 = pytest.mark.criterion(4, "discrete energy, rates, summability, distance on fig2/fig5")
C5 = pytest.mark.criterion(5, "continuous energy, rates, endpoint on fig3")
C6 = pytest.mark.criterion(6, "baseline validity")
C7 = pytest.mark.criterion(7, "ed vs CRIPA-S iteration counts (informational)")
C8 = pytest.mark.criterion(8, "byte-identical outputs on repeat")


# --- criterion 1 ------------------------------------------------------------------

def _algebra_checks(op, rho, rng):
    worst = {"resolvent": 0.0, "cocoercive": 0.0, "lipschitz": 0.0, "semigroup": 0.0}
    m = op.matrix
    for g in (max(-rho, 0.0) + 0.5, max(-rho, 0.0) + 2.0):
        jay, a = resolvent_map(op, g), yosida_map(op, g)
        xs = rng.standard_normal((1000, op.dim)) * 2
        ys = rng.standard_normal((1000, op.dim)) * 2
        for x, y in zip(xs, ys):
            p = jay(x)
            worst["resolvent"] = max(worst["resolvent"],
                                     np.linalg.norm(p + g * m @ p - x) / (1 + np.linalg.norm(x)))
            da = a(x) - a(y)
            worst["cocoercive"] = max(worst["cocoercive"], (rho + g) * da @ da - (x - y) @ da)
            worst["lipschitz"] = max(worst["lipschitz"],
                                     np.linalg.norm(da) - (2 / g) * np.linalg.norm(x - y))
    for x in rng.standard_normal((50, op.dim)):
        for delta in (0.25, 1.0, 3.0):
            d, n = yosida_semigroup_check(op, max(-2 * rho, 0.0) + 0.5, delta, x)
            worst["semigroup"] = max(worst["semigroup"], np.linalg.norm(d - n))
    return worst


@pytest.fixture(scope="module")
def algebra():
    rng = np.random.default_rng(11)
    ops = [(load_problem("skew2"), 0.0), (load_problem("comono2"), -0.5)]
    gen = np.random.default_rng(3)
    for _ in range(20):
        n = int(gen.integers(2, 7))
        rho = float(gen.uniform(-0.8, 0.8))
        ops.append((OperatorSpec.linear(random_certified_matrix(gen, n, rho), rho=rho), rho))
    t = time.perf_counter()
    results = [_algebra_checks(op, rho, rng) for op, rho in ops]
    return results, time.perf_counter() - t


@C1
@pytest.mark.parametrize("quantity,limit", [("resolvent", 1e-10), ("cocoercive", 1e-9),
                                            ("lipschitz", 1e-9), ("semigroup", 1e-9)])
def test_c1_operator_algebra(algebra, quantity, limit):
    results, _ = algebra
    assert max(r[quantity] for r in results) <= limit


@C1
def test_c1_runtime(algebra):
    assert algebra[1] < 5.0


# --- criterion 2 ------------------------------------------------------------------

@C2
def test_c2_certification():
    t = time.perf_counter()
    skew, comono = certify_comonotone(SKEW), certify_comonotone(COMONO)
    elapsed = time.perf_counter() - t
    assert abs(skew) <= 1e-12
    assert abs(comono + 0.5) <= 1e-9
    assert elapsed < 1.0


# --- criterion 3 ------------------------------------------------------------------

def _discrete_specs(preset):
    pre = build_preset(preset, resolve_parameters(preset))
    return [r for r in pre.runs if r.method == "ed"]


EQUIV_CASES = [(p, r) for p in ("fig2", "fig5") for r in _discrete_specs(p)]


@pytest.fixture(scope="module")
def equivalence():
    out, t = {}, time.perf_counter()
    for preset, spec in EQUIV_CASES:
        p = spec.params
        op = load_problem(spec.problem)
        cfg = EdConfig(p["alpha"], p["beta"], p["eta"], max_iters=10_000,
                       stop=StoppingRule("iteration_cap"))
        a, b = run_ed(op, cfg, p["x0"], p["x1"]), run_raw_al(op, cfg, p["x0"], p["x1"])
        out[(preset, spec.name)] = (a, b)
    return out, time.perf_counter() - t


@C3
@pytest.mark.parametrize("preset,run", [(p, r.name) for p, r in EQUIV_CASES])
def test_c3_equivalence(equivalence, preset, run):
    a, b = equivalence[0][(preset, run)]
    assert len(a) == len(b) == 10_001
    dev = np.linalg.norm(a.x - b.x, axis=1)
    assert np.all(dev <= 1e-12 * (1 + np.linalg.norm(a.x, axis=1)))


@C3
def test_c3_runtime(equivalence):
    assert equivalence[1] < 5.0


# --- criterion 4 ------------------------------------------------------------------

@pytest.fixture(scope="module")
def discrete_runs():
    t = time.perf_counter()
    res = {p: run_preset(p, write=False) for p in ("fig2", "fig5")}
    return res, time.perf_counter() - t


def _discrete_trace(discrete_runs, preset, run):
    return discrete_runs[0][preset].traces[run]


DISCRETE_CASES = [(p, r.name) for p, r in EQUIV_CASES]


@C4
@pytest.mark.parametrize("preset,run", DISCRETE_CASES)
def test_c4_energy_nonincreasing(discrete_runs, preset, run):
    tr = _discrete_trace(discrete_runs, preset, run)
    prm = tr.meta["params"]
    eps = lyapunov_discrete(tr.index, tr.x, tr.x - tr.dx, tr.mu, np.zeros(tr.dim),
                            prm["alpha"], s=prm["beta"])
    inc = np.diff(eps)
    bad = np.flatnonzero(inc > 1e-10 * (1 + eps[:-1]))
    assert bad.size == 0, (
        f"energy rises at k={tr.index[bad].tolist()[:5]} by up to {inc[bad].max():.3e}")


@C4
@pytest.mark.parametrize("preset,run", DISCRETE_CASES)
def test_c4_rates(discrete_runs, preset, run):
    tr = _discrete_trace(discrete_runs, preset, run)
    k = tr.index
    for s in (k * np.linalg.norm(tr.dx, axis=1), k * np.linalg.norm(tr.mu, axis=1)):
        assert s[-1] <= 0.01 * s.max()


@C4
@pytest.mark.parametrize("preset,run", DISCRETE_CASES)
def test_c4_summability(discrete_runs, preset, run):
    tr = _discrete_trace(discrete_runs, preset, run)
    series = discrete_summability_series(tr, tr.meta["params"]["beta"])
    for name in ("k_dx_sq", "k_mu_sq", "k2_mu_correction_sq"):
        assert summability_report(series[name]) <= 0.05, name


@C4
@pytest.mark.parametrize("preset,run", DISCRETE_CASES)
def test_c4_distance(discrete_runs, preset, run):
    tr = _discrete_trace(discrete_runs, preset, run)
    assert tr.meta["stopped"] and tr.meta["iterations"] < 1_000_000
    assert np.linalg.norm(tr.x[-1]) <= 1e-7


@C4
def test_c4_runtime(discrete_runs):
    assert discrete_runs[1] < 30.0


# --- criterion 5 ------------------------------------------------------------------

@pytest.fixture(scope="module")
def fig3():
    t = time.perf_counter()
    res = run_preset("fig3", write=False)
    elapsed = time.perf_counter() - t
    tr = res.traces["ds"]
    # Independent reference: second-order form with an explicit A_eta matrix.
    a = (np.eye(2) - np.linalg.inv(np.eye(2) + 2.0 * COMONO)) / 2.0

    def rhs(t, z):
        x, v = z[:2], z[2:]
        return np.concatenate((v, -a @ v - (3.0 / t) * v - (2.0 / t) * (a @ x)))

    ref = solve_ivp(rhs, (0.1, 100.0), np.ones(4), method="DOP853", rtol=1e-12, atol=1e-14,
                    t_eval=tr.index)
    return tr, ref.y[:2].T, elapsed


@C5
def test_c5_energy_nonincreasing(fig3):
    tr = fig3[0]
    eps = lyapunov_continuous(tr.index, tr.x, tr.dx, tr.mu, np.zeros(2), 3.0, 2.0)
    assert np.all(np.diff(eps) <= 1e-6 * eps[0])


@C5
def test_c5_rates(fig3):
    tr = fig3[0]
    t = tr.index
    for s in (t * np.linalg.norm(tr.dx, axis=1), t * np.linalg.norm(tr.mu, axis=1)):
        assert s[-1] <= 0.10 * s.max()


@C5
def test_c5_matches_reference(fig3):
    tr, ref, _ = fig3
    assert np.max(np.linalg.norm(tr.x - ref, axis=1)) <= 1e-6


@C5
def test_c5_endpoint(fig3):
    _, ref, _ = fig3
    assert np.linalg.norm(ref[-1]) <= 1e-3, f"|x(100)| = {np.linalg.norm(ref[-1]):.10e}"


@C5
def test_c5_runtime(fig3):
    assert fig3[2] < 30.0


# --- criterion 6 ------------------------------------------------------------------

@C6
@pytest.mark.parametrize("run", ["cripas_lam0.5", "cripas_lam1", "cripas_lam2"])
def test_c6_cripas_converges(discrete_runs, run):
    tr = _discrete_trace(discrete_runs, "fig2", run)
    p = tr.meta["params"]
    assert (p["b"], p["a1"], p["a2"], p["c_bar"]) == (1.0, 5.25, 2.5, 7.875)
    np.testing.assert_array_equal(tr.meta["x0"], [1.0, -1.0])
    assert tr.meta["stopped"] and np.linalg.norm(tr.x[-1]) <= 1e-7


@C6
def test_c6_baselines_refuse_nonmonotone():
    t = time.perf_counter()
    op = load_problem("comono2")
    with pytest.raises(MonotonicityRequired):
        run_cripas(op, CripasConfig(b=1, c_bar=7.875, a1=5.25, a2=2.5, k0=2, lam=1),
                   [1, 1], [1, 1], [1, 1])
    with pytest.raises(MonotonicityRequired):
        integrate_sys6(op, Sys6Config(alpha=2.5, b=1, lambda_scale=1, t0=0.1, t_end=10,
                                      x0=[1, 1], v0=[1, 1]))
    assert time.perf_counter() - t < 30.0


# --- criterion 7 ------------------------------------------------------------------

@C7
def test_c7_iteration_counts_recorded(discrete_runs):
    rows = discrete_runs[0]["fig2"].report["comparison"]
    assert len(rows) == 3
    for row in rows:
        assert row["informational"] is True
        assert row["ed_converged"] and row["cripas_converged"]
        assert isinstance(row["ed_le_cripas"], bool)
        assert row["ed_le_cripas"] == (row["ed_iterations"] <= row["cripas_iterations"])
        print(f"{row['ed_run']}: {row['ed_iterations']} its, {row['cripas_run']}: "
              f"{row['cripas_iterations']} its, ed_le_cripas={row['ed_le_cripas']}")


# --- criterion 8 ------------------------------------------------------------------

@C8
@pytest.mark.parametrize("preset", ["fig1", "fig2", "fig3", "fig4", "fig5"])
def test_c8_determinism(tmp_path, preset):
    a, b = tmp_path / "a", tmp_path / "b"
    ra = run_preset(preset, out_dir=a)
    rb = run_preset(preset, out_dir=b, workers=3)
    names = sorted(p.name for p in ra.paths)
    assert names == sorted(p.name for p in rb.paths)
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
