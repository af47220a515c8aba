"""Lyapunov energies, rate quantities and summability statistics.

Everything here is a pure function of a :class:`~comonotone.trace.Trace`
(plus the operator's known zero), so reports are reproducible from the
trace alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional

import numpy as np

from .errors import MissingKnownZero, SRangeViolation
from .trace import Trace

__all__ = [
    "DISCRETE_LYAPUNOV_RTOL",
    "CONTINUOUS_LYAPUNOV_RTOL",
    "lyapunov_discrete",
    "lyapunov_continuous",
    "discrete_monotone_from",
    "rate_series",
    "summability_report",
    "discrete_summability_series",
    "continuous_summability_series",
    "tail_total_variation",
    "second_order_residual",
    "annotate",
    "DiagnosticsReport",
    "build_report",
]

DISCRETE_LYAPUNOV_RTOL = 1e-10
CONTINUOUS_LYAPUNOV_RTOL = 1e-6
RATE_FRACTION = {"discrete": 0.01, "continuous": 0.10}
SUMMABILITY_LIMIT = 0.05
DISTANCE_TAIL_FRACTION = 0.10
DISTANCE_TV_LIMIT = 1e-3
CONTINUOUS_CONVERGED_REDUCTION = 1e-2


def _check_s(s, alpha):
    if not (0.0 <= s <= alpha - 1.0):
        raise SRangeViolation(f"s={s} must lie in [0, alpha-1] = [0, {alpha - 1}]")


def _sqnorm(v):
    return np.sum(np.square(v), axis=-1)


def _dot(u, v):
    return np.sum(u * v, axis=-1)


def lyapunov_discrete(k, x_k, x_prev, mu_k, x_star, alpha, beta=None, s=None):
    """Discrete energy of the inertial proximal iteration.

    ::

        eps_s(k) = 1/2 |s (x* - x_k) - (k - alpha)(x_k - x_{k-1})|^2
                   + s (alpha - s - 1)/2 |x_k - x*|^2
                   + s (k - 1) <A_eta x_k, x_k - x*>

    ``mu_k`` is ``A_eta x_k``.  ``s`` defaults to ``beta``.  Array inputs
    with a leading sample axis are evaluated row-wise.
    """
    if s is None:
        if beta is None:
            raise TypeError("either s or beta is required")
        s = beta
    _check_s(s, alpha)
    k = np.asarray(k, dtype=float)
    x_k = np.asarray(x_k, dtype=float)
    e = x_k - x_star
    kk = k[..., None] if k.ndim else k
    head = -s * e - (kk - alpha) * (x_k - np.asarray(x_prev, dtype=float))
    val = 0.5 * _sqnorm(head) + 0.5 * s * (alpha - s - 1.0) * _sqnorm(e) \
        + s * (k - 1.0) * _dot(np.asarray(mu_k, dtype=float), e)
    return float(val) if np.ndim(val) == 0 else val


def lyapunov_continuous(t, x, xdot, mu, x_star, alpha, s):
    """Continuous energy along the second-order dynamics.

    ::

        eps_s(t) = 1/2 |s (x* - x) - t xdot|^2 + s (alpha - s - 1)/2 |x - x*|^2
                   + s t <x - x*, mu>
    """
    _check_s(s, alpha)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    e = x - x_star
    tt = t[..., None] if t.ndim else t
    head = -s * e - tt * np.asarray(xdot, dtype=float)
    val = 0.5 * _sqnorm(head) + 0.5 * s * (alpha - s - 1.0) * _sqnorm(e) \
        + s * t * _dot(e, np.asarray(mu, dtype=float))
    return float(val) if np.ndim(val) == 0 else val


def discrete_monotone_from(alpha: float, beta: float) -> float:
    """Iteration counter from which ``eps_beta(k+1) <= eps_beta(k)`` is
    guaranteed.

    The exact one-step identity for ``eps_beta`` carries the term
    ``(alpha - beta - 1)((alpha - 1)/2 - k) |x_{k+1} - x_k|^2`` and the
    cross term ``-(k - beta) k <A x_{k+1} - A x_k, x_{k+1} - x_k>``; both are
    nonpositive once ``k >= max(beta, (alpha - 1)/2)``.
    """
    return max(beta, 0.5 * (alpha - 1.0))


def rate_series(trace: Trace, x_star=None) -> Dict[str, np.ndarray]:
    """Scaled velocity/residual series aligned to the trace index.

    Keys: ``rate_dx`` (idx |dx|), ``rate_mu`` (idx |mu|), ``rate_dx_mu``
    (idx |dx + mu|) and, when ``x_star`` is given, ``dist`` (|x - x*|).
    """
    idx = trace.index
    out = {
        "rate_dx": idx * np.linalg.norm(trace.dx, axis=1),
        "rate_mu": idx * np.linalg.norm(trace.mu, axis=1),
        "rate_dx_mu": idx * np.linalg.norm(trace.dx + trace.mu, axis=1),
    }
    if x_star is not None:
        out["dist"] = np.linalg.norm(trace.x - x_star, axis=1)
    return out


def summability_report(series, weights: str = "none", index=None) -> Optional[float]:
    """Ratio of the sum over the last half of the terms to the full sum.

    ``weights`` multiplies term ``i`` by ``index[i]`` (``"k"``) or
    ``index[i]**2`` (``"k2"``); ``index`` defaults to ``1..N``.  A zero total
    gives 0.  Fewer than two terms gives ``None`` (insufficient data).
    """
    a = np.asarray(series, dtype=float)
    if np.any(a < 0):
        raise ValueError("series must be nonnegative")
    n = a.size
    if n < 2:
        return None
    if weights != "none":
        idx = np.arange(1, n + 1, dtype=float) if index is None else np.asarray(index, float)
        power = {"k": 1, "k2": 2}[weights]
        a = a * idx**power
    total = a.sum()
    if total == 0.0:
        return 0.0
    return float(a[n // 2:].sum() / total)


def discrete_summability_series(trace: Trace, beta: Optional[float]) -> Dict[str, np.ndarray]:
    """Terms of the four series that are finite for the discrete method.

    Term ``k`` (for consecutive rows ``k``, ``k+1``):
    ``k |x_{k+1} - x_k|^2``, ``k |A x_k|^2``,
    ``k^2 |A x_{k+1} - (1 - beta/k) A x_k|^2`` and ``k^2 |A x_{k+1} - A x_k|^2``.
    The correction series is omitted when ``beta`` is None.
    """
    k = trace.index[:-1]
    a0, a1 = trace.mu[:-1], trace.mu[1:]
    out = {
        "k_dx_sq": k * _sqnorm(trace.x[1:] - trace.x[:-1]),
        "k_mu_sq": k * _sqnorm(a0),
    }
    if beta is not None:
        # k (a1 - (1 - beta/k) a0) = k (a1 - a0) + beta a0, safe at k = 0.
        out["k2_mu_correction_sq"] = _sqnorm(k[:, None] * (a1 - a0) + beta * a0)
    out["k2_dmu_sq"] = k**2 * _sqnorm(a1 - a0)
    return out


def continuous_summability_series(trace: Trace) -> Dict[str, np.ndarray]:
    """Quadrature terms of the four time integrals that are finite along the
    continuous trajectory (``t |xdot|^2``, ``t |xdot + mu|^2``, ``t |mu|^2``,
    ``t |<xdot, mu>|``), each multiplied by the local sample spacing."""
    t = trace.index
    if len(t) < 2:
        w = np.zeros_like(t)
    else:
        w = np.gradient(t)
    v, m = trace.dx, trace.mu
    return {
        "t_dx_sq": t * _sqnorm(v) * w,
        "t_dx_mu_sq": t * _sqnorm(v + m) * w,
        "t_mu_sq": t * _sqnorm(m) * w,
        "t_abs_dx_dot_mu": t * np.abs(_dot(v, m)) * w,
    }


def tail_total_variation(values, fraction: float = DISTANCE_TAIL_FRACTION) -> Optional[float]:
    """Total variation of ``values`` over the last ``fraction`` of samples."""
    a = np.asarray(values, dtype=float)
    m = max(int(math.ceil(fraction * a.size)), 2)
    if a.size < 2:
        return None
    return float(np.abs(np.diff(a[-m:])).sum())


def second_order_residual(trace: Trace, alpha: float, beta: float) -> np.ndarray:
    """Central-difference residual ``|xddot + mudot + (alpha/t) xdot + (beta/t) mu|``
    at interior samples of a continuous trace."""
    t = trace.index
    w = trace.dx + trace.mu
    dw = (w[2:] - w[:-2]) / (t[2:] - t[:-2])[:, None]
    tc = t[1:-1][:, None]
    r = dw + (alpha / tc) * trace.dx[1:-1] + (beta / tc) * trace.mu[1:-1]
    return np.linalg.norm(r, axis=1)


def annotate(trace: Trace, x_star=None, lyapunov_params=None) -> Trace:
    """Fill the per-row derived columns used by the CSV writer.

    ``lyapunov_params`` is ``(alpha, beta)``; when given, ``eps_beta`` is
    evaluated with the discrete or continuous formula matching the trace.
    """
    n = len(trace)
    d = {
        "res_yosida": np.linalg.norm(trace.mu, axis=1),
        "dist_to_zero": (np.linalg.norm(trace.x - x_star, axis=1) if x_star is not None
                         else np.full(n, np.nan)),
        "rate_idx_dx": trace.index * np.linalg.norm(trace.dx, axis=1),
        "rate_idx_mu": trace.index * np.linalg.norm(trace.mu, axis=1),
        "lyapunov_eps_beta": np.full(n, np.nan),
    }
    if lyapunov_params is not None and x_star is not None:
        alpha, beta = lyapunov_params
        if 0.0 <= beta <= alpha - 1.0:
            if trace.kind == "discrete":
                x_prev = trace.x - trace.dx
                d["lyapunov_eps_beta"] = np.atleast_1d(lyapunov_discrete(
                    trace.index, trace.x, x_prev, trace.mu, x_star, alpha, s=beta))
            else:
                d["lyapunov_eps_beta"] = np.atleast_1d(lyapunov_continuous(
                    trace.index, trace.x, trace.dx, trace.mu, x_star, alpha, s=beta))
    trace.derived.update(d)
    return trace


def _verdict(ok: Optional[bool]) -> str:
    if ok is None:
        return "SKIP"
    return "PASS" if ok else "FAIL"


def _f(v):
    """JSON-safe float (NaN and None map to None)."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


@dataclass
class DiagnosticsReport:
    """Aggregated convergence verdicts for one trace.

    Each field holds a flat mapping of scalar values; every mapping that
    carries a convergence property has a ``verdict`` entry of
    ``"PASS"``, ``"FAIL"`` or ``"SKIP"``.
    """

    lyapunov_monotone: dict = field(default_factory=dict)
    rate_limits: dict = field(default_factory=dict)
    summability_tails: dict = field(default_factory=dict)
    distance_limit: dict = field(default_factory=dict)
    converged: dict = field(default_factory=dict)

    def verdicts(self) -> Dict[str, str]:
        return {
            "lyapunov_monotone": self.lyapunov_monotone.get("verdict", "SKIP"),
            "rate_limits": self.rate_limits.get("verdict", "SKIP"),
            "summability_tails": self.summability_tails.get("verdict", "SKIP"),
            "distance_limit": self.distance_limit.get("verdict", "SKIP"),
            "converged": self.converged.get("verdict", "SKIP"),
        }

    def passed(self, gates=None) -> bool:
        """True when every gated verdict that was evaluated is PASS."""
        v = self.verdicts()
        names = v.keys() if gates is None else gates
        return all(v[name] != "FAIL" for name in names)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)


def _lyapunov_section(trace, eps, alpha, beta):
    n = len(eps)
    if n < 2:
        return {"verdict": "SKIP", "reason": "insufficient_data"}
    inc = np.diff(eps)
    if trace.kind == "discrete":
        tol = DISCRETE_LYAPUNOV_RTOL * (1.0 + np.abs(eps[:-1]))
        tol_desc = "1e-10*(1+eps_k)"
    else:
        tol = np.full(n - 1, CONTINUOUS_LYAPUNOV_RTOL * abs(eps[0]))
        tol_desc = "1e-6*eps(t0)"
    bad = inc > tol
    excess = inc / (1.0 + np.abs(eps[:-1]))
    out = {
        "verdict": _verdict(not bad.any()),
        "tolerance": tol_desc,
        "max_increase": _f(max(inc.max(), 0.0)),
        "max_relative_increase": _f(max(excess.max(), 0.0)),
        "violations": int(bad.sum()),
        "first_violation_index": _f(trace.index[:-1][bad][0]) if bad.any() else None,
        "eps_initial": _f(eps[0]),
        "eps_final": _f(eps[-1]),
        "min_value": _f(eps.min()),
    }
    if trace.kind == "discrete":
        k0 = discrete_monotone_from(alpha, beta)
        late = trace.index[:-1] >= k0
        out["monotone_from_index"] = _f(k0)
        out["verdict_from_index"] = _verdict(not bad[late].any()) if late.any() else "SKIP"
    return out


def build_report(trace: Trace, op, alpha=None, beta=None, distances=None) -> DiagnosticsReport:
    """Aggregate the diagnostics of ``trace`` into a report.

    ``alpha`` and ``beta`` default to ``trace.meta["params"]``.  Distance
    based sections use ``op.known_zero``; pass ``distances=True`` to demand
    them (raising :class:`MissingKnownZero` when the zero is unknown).

    ``converged`` is the stopping-rule outcome for solver traces; otherwise
    it asks that the final distance to the zero (or the residual, if no zero
    is known) be at most 1e-2 of its initial value.
    """
    if len(trace) == 0:
        raise ValueError("trace is empty")
    x_star = op.known_zero
    if distances and x_star is None:
        raise MissingKnownZero(f"operator {op.name!r} has no known zero")
    params = trace.meta.get("params", {})
    alpha = params.get("alpha") if alpha is None else alpha
    beta = params.get("beta") if beta is None else beta
    kind = trace.kind
    rep = DiagnosticsReport()

    # Lyapunov energy at s = beta, only for the methods it was built for.
    lyap_ok = (trace.meta.get("lyapunov", False) and alpha is not None and beta is not None
               and x_star is not None and 0.0 <= beta <= alpha - 1.0)
    if lyap_ok:
        eps = trace.derived.get("lyapunov_eps_beta")
        if eps is None or np.all(np.isnan(eps)):
            annotate(trace, x_star, (alpha, beta))
            eps = trace.derived["lyapunov_eps_beta"]
        rep.lyapunov_monotone = _lyapunov_section(trace, np.asarray(eps), alpha, beta)
        hyp = alpha >= beta + 1.0 and beta > 1.0
        rep.lyapunov_monotone["hypotheses_hold"] = bool(hyp)
    else:
        rep.lyapunov_monotone = {"verdict": "SKIP", "reason": "not_applicable"}

    rates = rate_series(trace)
    frac = RATE_FRACTION[kind]
    rl = {"fraction_limit": frac}
    ok = True
    for name in ("rate_dx", "rate_mu"):
        s = rates[name]
        mx, fin = float(s.max()), float(s[-1])
        ratio = fin / mx if mx > 0 else 0.0
        rl[f"{name}_final"] = _f(fin)
        rl[f"{name}_max"] = _f(mx)
        rl[f"{name}_ratio"] = _f(ratio)
        ok = ok and ratio <= frac
    rl["verdict"] = _verdict(ok if len(trace) >= 2 and trace.meta.get("lyapunov", False) else None)
    rep.rate_limits = rl

    if kind == "discrete":
        series = discrete_summability_series(trace, beta)
        gated = ("k_dx_sq", "k_mu_sq", "k2_mu_correction_sq") if beta is not None \
            else ("k_dx_sq", "k_mu_sq")
    else:
        series = continuous_summability_series(trace)
        gated = ()
    st = {"limit": SUMMABILITY_LIMIT}
    insufficient = False
    for name, s in series.items():
        r = summability_report(s)
        insufficient = insufficient or r is None
        st[name] = _f(r)
    if insufficient:
        st["insufficient_data"] = True
        st["verdict"] = "SKIP"
    elif gated and trace.meta.get("lyapunov", False):
        st["verdict"] = _verdict(all(st[g] <= SUMMABILITY_LIMIT for g in gated))
    else:
        st["verdict"] = "SKIP"
    rep.summability_tails = st

    if x_star is not None:
        dist = np.linalg.norm(trace.x - x_star, axis=1)
        d0 = float(np.linalg.norm(trace.meta.get("x0", trace.x[0]) - x_star))
        tv = tail_total_variation(dist)
        bound = DISTANCE_TV_LIMIT * d0
        rep.distance_limit = {
            "total_variation": _f(tv),
            "bound": _f(bound),
            "initial_distance": _f(d0),
            "final_distance": _f(dist[-1]),
            "verdict": _verdict(None if tv is None or not trace.meta.get("lyapunov", False)
                                else tv <= bound),
        }
    else:
        rep.distance_limit = {"verdict": "SKIP", "reason": "no_known_zero"}

    conv = {
        "final_residual": _f(np.linalg.norm(trace.mu[-1])),
        "final_distance": _f(np.linalg.norm(trace.x[-1] - x_star)) if x_star is not None else None,
        "samples": len(trace),
        "final_index": _f(trace.index[-1]),
    }
    if kind == "discrete" and "stopped" in trace.meta:
        conv["value"] = bool(trace.meta["stopped"])
        conv["stop_rule"] = trace.meta.get("stop_rule")
        conv["max_iters_exceeded"] = bool(trace.meta.get("max_iters_exceeded", False))
        conv["iterations"] = int(trace.meta.get("iterations", len(trace) - 1))
        conv["verdict"] = _verdict(None if trace.meta.get("stop_rule") == "iteration_cap"
                                   else conv["value"])
    else:
        if x_star is not None:
            start = np.linalg.norm(trace.x[0] - x_star)
            end = np.linalg.norm(trace.x[-1] - x_star)
        else:
            start = np.linalg.norm(trace.mu[0])
            end = np.linalg.norm(trace.mu[-1])
        conv["reduction"] = _f(end / start) if start > 0 else 0.0
        conv["value"] = bool(start == 0 or end <= CONTINUOUS_CONVERGED_REDUCTION * start)
        conv["verdict"] = _verdict(conv["value"])
    rep.converged = conv
    return rep
