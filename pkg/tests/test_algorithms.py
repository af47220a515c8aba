import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from comonotone.algorithms import (
    CripasConfig,
    EdConfig,
    EdState,
    StoppingRule,
    ed_step,
    run_cripas,
    run_ed,
    run_ppa,
    run_raw_al,
)
from comonotone.diagnostics import discrete_monotone_from, lyapunov_discrete
from comonotone.errors import ConfigInvalid, MissingKnownZero, MonotonicityRequired, ParameterViolation
from comonotone.operators import OperatorSpec, invert_yosida_shift, load_problem, yosida

from conftest import random_certified_matrix

SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])
COMONO = np.array([[-0.4, 0.8], [-0.8, -0.4]])
CAP = StoppingRule("iteration_cap")


def yosida_matrix(m, eta):
    n = m.shape[0]
    return (np.eye(n) - np.linalg.inv(np.eye(n) + eta * m)) / eta


def cripas_cfg(eta, lam, **kw):
    return CripasConfig(b=1, c_bar=7.875, a1=5.25, a2=2.5, k0=(eta + 1) / lam - 1, lam=lam, **kw)


# --- single step ------------------------------------------------------------------

def test_first_step_matches_shift_recursion():
    op = load_problem("skew2")
    alpha, beta, eta = 5.25, 2.5, 2.0
    a = yosida_matrix(SKEW, eta)
    x0 = x1 = np.array([1.0, -1.0])
    s = EdState(1, x0, x1, x1 + a @ x1)
    nxt = ed_step(op, EdConfig(alpha, beta, eta), s)
    # A x2 = x1 - x2 + (1 - alpha)(x1 - x0) + (1 - beta) A x1, solved as a 2x2 system.
    rhs = x1 + (1 - alpha) * (x1 - x0) + (1 - beta) * (a @ x1)
    x2 = np.linalg.solve(np.eye(2) + a, rhs)
    np.testing.assert_allclose(nxt.x_curr, x2, atol=1e-12)
    assert nxt.k == 2 and np.array_equal(nxt.x_prev, x1)


def test_step_is_shift_inversion(rng):
    op = load_problem("comono2")
    cfg = EdConfig(10, 3, 2)
    for _ in range(20):
        k = int(rng.integers(1, 50))
        xp, xc, yp = rng.standard_normal((3, 2))
        y = xc + (1 - 10 / k) * (xc - xp) + (1 - 3 / k) * (yp - xc)
        nxt = ed_step(op, cfg, EdState(k, xp, xc, yp))
        np.testing.assert_allclose(nxt.x_curr, invert_yosida_shift(op, 2, y), rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(nxt.y_prev, y, rtol=1e-15)


def test_step_fixed_point_at_zero():
    op = load_problem("comono2")
    z = np.zeros(2)
    nxt = ed_step(op, EdConfig(10, 3, 2), EdState(3, z, z, z))
    assert not nxt.x_curr.any() and not nxt.y_prev.any()


def test_step_before_k_start():
    op = load_problem("skew2")
    z = np.zeros(2)
    with pytest.raises(ValueError):
        ed_step(op, EdConfig(5.25, 2.5, 1, k_start=3), EdState(2, z, z, z))


# --- equivalence of the two recursions --------------------------------------------

@pytest.mark.parametrize("problem,alpha,beta,eta,x0", [
    ("skew2", 5.25, 2.5, 1.0, [1, -1]),
    ("skew2", 5.25, 2.5, 5.0, [1, -1]),
    ("comono2", 10.0, 2.0, 2.0, [1, 1]),
    ("comono2", 10.0, 9.0, 2.0, [1, 1]),
])
def test_ed_equals_raw(problem, alpha, beta, eta, x0):
    op = load_problem(problem)
    cfg = EdConfig(alpha, beta, eta, max_iters=100, stop=CAP)
    a, b = run_ed(op, cfg, x0, x0), run_raw_al(op, cfg, x0, x0)
    dev = np.linalg.norm(a.x - b.x, axis=1)
    assert np.all(dev <= 1e-12 * (1 + np.linalg.norm(a.x, axis=1)))
    # y_{k-1} = x_k + A_eta x_k in both representations.
    np.testing.assert_allclose(a.y_aux, a.x + a.mu, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.05, 4.0), st.floats(0.0, 5.0), st.floats(0.1, 5.0))
def test_ed_equals_raw_random(seed, beta, gap, eta_extra):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(2, 5))
    rho = float(gen.uniform(-0.5, 0.5))
    op = OperatorSpec.linear(random_certified_matrix(gen, n, rho), rho=rho)
    cfg = EdConfig(beta + 1 + gap, beta, max(-2 * rho, 0) + eta_extra, max_iters=60, stop=CAP)
    x0, x1 = gen.standard_normal((2, n))
    a, b = run_ed(op, cfg, x0, x1), run_raw_al(op, cfg, x0, x1)
    scale = 1 + np.max(np.abs(a.x))
    assert np.max(np.abs(a.x - b.x)) <= 1e-10 * scale


def test_raw_zero_start_constant():
    op = load_problem("comono2")
    tr = run_raw_al(op, EdConfig(10, 3, 2, max_iters=20, stop=CAP), [0, 0], [0, 0])
    assert not tr.x.any() and len(tr) == 21


# --- run_ed behaviour -----------------------------------------------------------

def test_ed_converges_skew():
    op = load_problem("skew2")
    tr = run_ed(op, EdConfig(5.25, 2.5, 2), [1, -1], [1, -1])
    assert tr.meta["stopped"] and not tr.meta["max_iters_exceeded"]
    assert np.linalg.norm(tr.x[-1]) <= 1e-7
    assert np.linalg.norm(tr.x[-2]) > 1e-7
    assert tr.meta["iterations"] == len(tr) - 1
    np.testing.assert_array_equal(tr.index, np.arange(1, len(tr) + 1))


@pytest.mark.parametrize("beta", [2.0, 3.0, 5.0, 9.0])
def test_ed_converges_comono(beta):
    op = load_problem("comono2")
    tr = run_ed(op, EdConfig(10, beta, 2), [1, 1], [1, 1])
    assert tr.meta["stopped"] and np.linalg.norm(tr.x[-1]) <= 1e-7


def test_ed_zero_start_stops_immediately():
    op = load_problem("skew2")
    tr = run_ed(op, EdConfig(5.25, 2.5, 1), [0, 0], [0, 0])
    assert len(tr) == 1 and tr.meta["iterations"] == 0 and tr.meta["stopped"]
    assert tr.derived["dist_to_zero"][0] == 0


def test_ed_trace_columns():
    op = load_problem("comono2")
    tr = run_ed(op, EdConfig(10, 3, 2, max_iters=30, stop=CAP), [1, 1], [0.5, 1])
    a = yosida_matrix(COMONO, 2)
    np.testing.assert_allclose(tr.mu, tr.x @ a.T, atol=1e-14)
    np.testing.assert_allclose(tr.dx[0], [-0.5, 0.0])
    np.testing.assert_allclose(tr.dx[1:], np.diff(tr.x, axis=0))
    k = tr.index
    np.testing.assert_allclose(tr.derived["rate_idx_mu"], k * np.linalg.norm(tr.mu, axis=1))
    ref = [lyapunov_discrete(kk, x, x - d, m, np.zeros(2), 10, s=3)
           for kk, x, d, m in zip(k, tr.x, tr.dx, tr.mu)]
    np.testing.assert_allclose(tr.derived["lyapunov_eps_beta"], ref)


def test_max_iters_exceeded_flag():
    op = load_problem("skew2")
    tr = run_ed(op, EdConfig(5.25, 2.5, 1, max_iters=10), [1, -1], [1, -1])
    assert tr.meta["max_iters_exceeded"] and not tr.meta["stopped"]
    assert len(tr) == 11


def test_yosida_residual_stop():
    op = load_problem("comono2")
    tr = run_ed(op, EdConfig(10, 5, 2, stop=StoppingRule("yosida_residual", 1e-6)), [1, 1], [1, 1])
    assert np.linalg.norm(tr.mu[-1]) <= 1e-6 < np.linalg.norm(tr.mu[-2])


def test_k_start_offset():
    op = load_problem("comono2")
    tr = run_ed(op, EdConfig(10, 3, 2, k_start=5, max_iters=3, stop=CAP), [1, 1], [1, 1])
    np.testing.assert_array_equal(tr.index, [5, 6, 7, 8])


@pytest.mark.parametrize("problem,alpha,beta,eta,x0", [
    ("skew2", 5.25, 2.5, 1.0, [1, -1]),
    ("skew2", 5.25, 2.5, 2.0, [1, -1]),
    ("skew2", 5.25, 2.5, 5.0, [1, -1]),
    ("comono2", 10.0, 2.0, 2.0, [1, 1]),
    ("comono2", 10.0, 3.0, 2.0, [1, 1]),
    ("comono2", 10.0, 5.0, 2.0, [1, 1]),
    ("comono2", 10.0, 9.0, 2.0, [1, 1]),
])
def test_lyapunov_monotone_from_threshold(problem, alpha, beta, eta, x0):
    op = load_problem(problem)
    tr = run_ed(op, EdConfig(alpha, beta, eta), x0, x0)
    eps = tr.derived["lyapunov_eps_beta"]
    late = tr.index[:-1] >= discrete_monotone_from(alpha, beta)
    inc = np.diff(eps)[late]
    assert np.all(inc <= 1e-10 * (1 + np.abs(eps[:-1][late])))


def test_lyapunov_early_increase_is_real():
    # Before max(beta, (alpha-1)/2) the energy can grow: k = 1 -> 2 with alpha=10, beta=2.
    op = load_problem("comono2")
    tr = run_ed(op, EdConfig(10, 2, 2, max_iters=5, stop=CAP), [1, 1], [1, 1])
    eps = tr.derived["lyapunov_eps_beta"]
    assert eps[1] > eps[0] * (1 + 1e-3)


def test_ed_validation():
    skew, comono = load_problem("skew2"), load_problem("comono2")
    with pytest.raises(ConfigInvalid):
        run_ed(skew, EdConfig(3, 2.5, 1), [1, 1], [1, 1])
    with pytest.raises(ConfigInvalid):
        run_ed(skew, EdConfig(3, 1, 1), [1, 1], [1, 1])
    with pytest.raises(ParameterViolation):
        run_ed(comono, EdConfig(10, 3, 1.0), [1, 1], [1, 1])
    with pytest.raises(ConfigInvalid):
        run_ed(skew, EdConfig(5, 2, 1, k_start=0), [1, 1], [1, 1])
    with pytest.raises(ConfigInvalid):
        StoppingRule("bogus")
    with pytest.raises(ConfigInvalid):
        StoppingRule("distance", 0.0)
    tr = run_ed(skew, EdConfig(3, 2.5, 1, allow_unproven=True, max_iters=5, stop=CAP), [1, 1], [1, 1])
    assert len(tr) == 6


def test_distance_stop_needs_zero():
    orc = OperatorSpec.oracle(lambda g, x: np.linalg.solve(np.eye(2) + g * SKEW, x), 2, 0.0)
    with pytest.raises(MissingKnownZero):
        run_ed(orc, EdConfig(5.25, 2.5, 1), [1, 1], [1, 1])
    tr = run_ed(orc, EdConfig(5.25, 2.5, 1, stop=StoppingRule("yosida_residual", 1e-7)), [1, 1], [1, 1])
    assert tr.meta["stopped"]


# --- CRIPA-S --------------------------------------------------------------------------

@pytest.mark.parametrize("eta,lam", [(1.0, 0.5), (2.0, 1.0), (5.0, 2.0)])
def test_cripas_converges(eta, lam):
    op = load_problem("skew2")
    x = [1, -1]
    tr = run_cripas(op, cripas_cfg(eta, lam), x, x, x)
    assert tr.meta["stopped"] and np.linalg.norm(tr.x[-1]) <= 1e-7


def test_cripas_first_step_by_hand():
    op = load_problem("skew2")
    eta, lam = 2.0, 1.0
    k0 = (eta + 1) / lam - 1
    tr = run_cripas(op, cripas_cfg(eta, lam, max_iters=1, stop=CAP), [1, -1], [1, -1], [1, -1])
    z0 = np.array([1.0, -1.0])  # both momentum terms vanish at the start
    jz = np.linalg.solve(np.eye(2) + lam * (1 + k0) * SKEW, z0)
    np.testing.assert_allclose(tr.x[1], z0 / (1 + k0) + k0 / (1 + k0) * jz, rtol=1e-14)


def test_cripas_zero_start():
    op = load_problem("skew2")
    tr = run_cripas(op, cripas_cfg(2, 1, max_iters=10, stop=CAP), [0, 0], [0, 0], [0, 0])
    assert not tr.x.any()


def test_cripas_validation():
    op = load_problem("skew2")
    with pytest.raises(ConfigInvalid):
        run_cripas(op, CripasConfig(b=1, c_bar=7.875, a1=5.25, a2=2.0, k0=2, lam=1), [1, 1], [1, 1], [1, 1])
    with pytest.raises(ConfigInvalid):
        run_cripas(op, CripasConfig(b=1, c_bar=7.875, a1=3.0, a2=2.5, k0=2, lam=1), [1, 1], [1, 1], [1, 1])
    with pytest.raises(ConfigInvalid):
        run_cripas(op, CripasConfig(b=1, c_bar=5.0, a1=5.25, a2=2.5, k0=2, lam=1), [1, 1], [1, 1], [1, 1])
    with pytest.raises(ConfigInvalid):
        run_cripas(op, CripasConfig(b=1, c_bar=7.875, a1=5.25, a2=2.5, k0=0, lam=1), [1, 1], [1, 1], [1, 1])


def test_cripas_requires_monotone():
    op = load_problem("comono2")
    with pytest.raises(MonotonicityRequired):
        run_cripas(op, cripas_cfg(2, 1), [1, 1], [1, 1], [1, 1])
    tr = run_cripas(op, cripas_cfg(2, 1, allow_unproven=True, max_iters=5, stop=CAP), [1, 1], [1, 1], [1, 1])
    assert len(tr) == 6


# --- PPA ------------------------------------------------------------------------------

def test_ppa_first_step():
    tr = run_ppa(load_problem("skew2"), 1.0, [1, 1], CAP, 1)
    np.testing.assert_allclose(tr.x[1], [1, 0], atol=1e-15)


def test_ppa_zero_start():
    tr = run_ppa(load_problem("comono2"), 3.0, [0, 0], CAP, 5)
    assert not tr.x.any()


def test_ppa_comono_converges():
    # Oracle: spectral radius of J_3 below one.
    j3 = np.linalg.inv(np.eye(2) + 3 * COMONO)
    assert max(abs(np.linalg.eigvals(j3))) < 1
    op = load_problem("comono2")
    tr = run_ppa(op, 3.0, [1, 1], StoppingRule("yosida_residual", 1e-7), 10_000)
    assert tr.meta["stopped"] and np.linalg.norm(tr.mu[-1]) <= 1e-7
    assert tr.meta["stopped"] and np.linalg.norm(tr.x[-1]) <= 1e-6


def test_ppa_schedule():
    op = load_problem("skew2")
    tr = run_ppa(op, [1.0, 2.0], [1, 1], CAP, 3)
    x1 = np.linalg.solve(np.eye(2) + SKEW, [1, 1])
    x2 = np.linalg.solve(np.eye(2) + 2 * SKEW, x1)
    x3 = np.linalg.solve(np.eye(2) + 2 * SKEW, x2)
    np.testing.assert_allclose(tr.x[1:], [x1, x2, x3], rtol=1e-14)
    with pytest.raises(ParameterViolation):
        run_ppa(load_problem("comono2"), 0.4, [1, 1], CAP, 3)
