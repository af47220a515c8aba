"""Discrete solvers for ``0 in A x`` with a comonotone ``A``.

``run_ed`` is the inertial relaxed proximal iteration

    y_k     = x_k + (1 - alpha/k)(x_k - x_{k-1}) + (1 - beta/k)(y_{k-1} - x_k)
    x_{k+1} = (1 - 1/(eta+1)) y_k + J_{eta+1}(y_k) / (eta+1)

and ``run_raw_al`` the same method written directly on the Yosida
regularization,

    x_{k+1} + A_eta x_{k+1} = x_k + (1 - alpha/k)(x_k - x_{k-1}) + (1 - beta/k) A_eta x_k.

Both start from ``y_{k_start-1} = x_1 + A_eta x_1``, which makes the two
sequences coincide.  ``run_cripas`` and ``run_ppa`` are baselines for
monotone operators.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .diagnostics import annotate
from .errors import ConfigInvalid, MissingKnownZero, MonotonicityRequired, ParameterViolation
from .operators import OperatorSpec, Resolvent, as_vector, min_yosida_parameter
from .trace import Trace

__all__ = [
    "StoppingRule",
    "EdConfig",
    "EdState",
    "CripasConfig",
    "ed_step",
    "run_ed",
    "run_raw_al",
    "run_cripas",
    "run_ppa",
]

STOP_MODES = ("distance", "yosida_residual", "iteration_cap")


@dataclass(frozen=True)
class StoppingRule:
    """When to stop a discrete run.

    ``mode`` is ``"distance"`` (``|x_k - x*| <= tol``, needs a known zero),
    ``"yosida_residual"`` (``|A x_k| <= tol`` with the method's own
    regularization) or ``"iteration_cap"`` (run until ``max_iters``).
    """

    mode: str = "distance"
    tol: float = 1e-7

    def __post_init__(self):
        if self.mode not in STOP_MODES:
            raise ConfigInvalid(f"unknown stopping mode {self.mode!r}; expected one of {STOP_MODES}")
        if self.mode != "iteration_cap" and not self.tol > 0:
            raise ConfigInvalid(f"stopping tolerance {self.tol} must be positive")

    def validate(self, op: OperatorSpec) -> "StoppingRule":
        if self.mode == "distance" and op.known_zero is None:
            raise MissingKnownZero(f"distance stopping needs a known zero of {op.name!r}")
        return self

    def fired(self, x, mu, x_star) -> bool:
        if self.mode == "distance":
            return float(np.linalg.norm(x - x_star)) <= self.tol
        if self.mode == "yosida_residual":
            return float(np.linalg.norm(mu)) <= self.tol
        return False


@dataclass
class EdConfig:
    alpha: float
    beta: float
    eta: float
    k_start: int = 1
    max_iters: int = 1_000_000
    stop: StoppingRule = field(default_factory=StoppingRule)
    allow_unproven: bool = False

    def validate(self, op: OperatorSpec) -> "EdConfig":
        if not self.allow_unproven and not (self.alpha >= self.beta + 1 and self.beta > 1):
            raise ConfigInvalid(
                f"alpha={self.alpha}, beta={self.beta} violate alpha >= beta + 1 and beta > 1 "
                "(pass allow_unproven to run anyway)"
            )
        if not self.eta > min_yosida_parameter(op.rho):
            raise ParameterViolation(
                f"eta={self.eta} must exceed max(-2*rho, 0)={min_yosida_parameter(op.rho)}"
            )
        if int(self.k_start) != self.k_start or self.k_start < 1:
            raise ConfigInvalid(f"k_start={self.k_start} must be an integer >= 1")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ConfigInvalid(f"max_iters={self.max_iters} must be a nonnegative integer")
        self.stop.validate(op)
        return self


@dataclass(frozen=True)
class EdState:
    """Iteration ``k`` of :func:`ed_step`: ``x_{k-1}``, ``x_k`` and ``y_{k-1}``."""

    k: int
    x_prev: np.ndarray
    x_curr: np.ndarray
    y_prev: np.ndarray

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not (self.x_prev.shape == self.x_curr.shape == self.y_prev.shape):
            raise ValueError("state vectors must share one shape")


@dataclass
class CripasConfig:
    """CRIPA-S parameters; the resolvent index is ``lam * (1 + k0)``."""

    b: float
    c_bar: float
    a1: float
    a2: float
    k0: float
    lam: float
    max_iters: int = 1_000_000
    stop: StoppingRule = field(default_factory=StoppingRule)
    allow_unproven: bool = False

    def validate(self, op: OperatorSpec) -> "CripasConfig":
        for name in ("b", "c_bar", "a1", "a2", "k0", "lam"):
            if not getattr(self, name) > 0:
                raise ConfigInvalid(f"{name}={getattr(self, name)} must be positive")
        if not self.a2 > 2 * self.b:
            raise ConfigInvalid(f"a2={self.a2} must exceed 2*b={2 * self.b}")
        if not self.a1 > self.b + self.a2:
            raise ConfigInvalid(f"a1={self.a1} must exceed b + a2={self.b + self.a2}")
        if not self.c_bar > max(self.a1, self.a2):
            raise ConfigInvalid(f"c_bar={self.c_bar} must exceed max(a1, a2)={max(self.a1, self.a2)}")
        if op.rho < 0 and not self.allow_unproven:
            raise MonotonicityRequired(f"CRIPA-S needs a monotone operator, got rho={op.rho}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ConfigInvalid(f"max_iters={self.max_iters} must be a nonnegative integer")
        self.stop.validate(op)
        return self

    @property
    def gamma(self) -> float:
        return self.lam * (1.0 + self.k0)


def _ed_update(jay, eta, alpha, beta, k, x_prev, x_curr, y_prev):
    y = x_curr + (1.0 - alpha / k) * (x_curr - x_prev) + (1.0 - beta / k) * (y_prev - x_curr)
    w = 1.0 / (eta + 1.0)
    return (1.0 - w) * y + w * jay(y), y


def ed_step(op: OperatorSpec, cfg: EdConfig, s: EdState) -> EdState:
    """Advance the inertial iteration from ``k`` to ``k + 1``."""
    if s.k < cfg.k_start:
        raise ValueError(f"state k={s.k} precedes k_start={cfg.k_start}")
    jay = Resolvent(op, cfg.eta + 1.0)
    x_next, y = _ed_update(jay, float(cfg.eta), float(cfg.alpha), float(cfg.beta), s.k,
                           s.x_prev, s.x_curr, s.y_prev)
    return EdState(k=s.k + 1, x_prev=s.x_curr, x_curr=x_next, y_prev=y)


class _Recorder:
    """Accumulates trace rows and applies the stopping rule."""

    def __init__(self, op, stop, max_iters, yos):
        self.op = op
        self.stop = stop
        self.max_iters = int(max_iters)
        self.yos = yos
        self.x_star = op.known_zero
        self.rows = ([], [], [], [], [])

    def push(self, k, x, x_prev, y_aux):
        mu = self.yos(x)
        for col, v in zip(self.rows, (k, x, x - x_prev, mu, y_aux)):
            col.append(v)
        return self.stop.fired(x, mu, self.x_star)

    def finish(self, method, params, x0, stopped, iterations, lyap):
        idx, xs, dxs, mus, ys = self.rows
        trace = Trace(
            kind="discrete", index=np.array(idx, dtype=float), x=np.array(xs),
            dx=np.array(dxs), mu=np.array(mus), y_aux=np.array(ys),
            meta={
                "method": method,
                "params": params,
                "lyapunov": lyap,
                "stopped": bool(stopped),
                "stop_rule": self.stop.mode,
                "stop_tol": self.stop.tol,
                "max_iters_exceeded": bool(not stopped and self.stop.mode != "iteration_cap"),
                "iterations": int(iterations),
                "x0": x0,
            },
        )
        return trace


def _yosida_of(jay):
    g = jay.gamma
    return lambda x: (x - jay(x)) / g


def _ed_params(cfg):
    return {"alpha": float(cfg.alpha), "beta": float(cfg.beta), "eta": float(cfg.eta),
            "k_start": int(cfg.k_start), "max_iters": int(cfg.max_iters)}


def run_ed(op: OperatorSpec, cfg: EdConfig, x0, x1) -> Trace:
    """Run the inertial relaxed proximal iteration from ``(x0, x1)``.

    Row ``k`` of the trace holds ``x_k``, ``x_k - x_{k-1}``, ``A_eta x_k``
    and ``y_{k-1}``; the first row is ``k = k_start`` with ``x_1``.  The
    stopping rule is tested on every row, the first included.  When it
    never fires within ``max_iters`` steps the trace meta records
    ``max_iters_exceeded``.
    """
    cfg.validate(op)
    x0 = as_vector(x0, op.dim, "x0")
    x1 = as_vector(x1, op.dim, "x1")
    eta, alpha, beta = float(cfg.eta), float(cfg.alpha), float(cfg.beta)
    jay = Resolvent(op, eta + 1.0)
    yos = _yosida_of(Resolvent(op, eta))
    rec = _Recorder(op, cfg.stop, cfg.max_iters, yos)

    k = int(cfg.k_start)
    x_prev, x = x0, x1
    y_prev = x1 + yos(x1)
    stopped = rec.push(k, x, x_prev, y_prev)
    it = 0
    while not stopped and it < rec.max_iters:
        x_next, y = _ed_update(jay, eta, alpha, beta, k, x_prev, x, y_prev)
        x_prev, x, y_prev = x, x_next, y
        k += 1
        it += 1
        stopped = rec.push(k, x, x_prev, y_prev)
    trace = rec.finish("ed", _ed_params(cfg), x0, stopped, it, True)
    return annotate(trace, op.known_zero, (alpha, beta))


def run_raw_al(op: OperatorSpec, cfg: EdConfig, x0, x1) -> Trace:
    """Run the same method through the implicit Yosida recursion.

    Each step solves ``x + A_eta x = r_k`` for the known right-hand side
    ``r_k``.  The ``y_aux`` column holds ``r_{k-1}``, which equals ``y_{k-1}``
    of :func:`run_ed`.
    """
    cfg.validate(op)
    x0 = as_vector(x0, op.dim, "x0")
    x1 = as_vector(x1, op.dim, "x1")
    eta, alpha, beta = float(cfg.eta), float(cfg.alpha), float(cfg.beta)
    jay = Resolvent(op, eta + 1.0)
    yos = _yosida_of(Resolvent(op, eta))
    rec = _Recorder(op, cfg.stop, cfg.max_iters, yos)
    w = 1.0 / (eta + 1.0)

    k = int(cfg.k_start)
    x_prev, x = x0, x1
    stopped = rec.push(k, x, x_prev, x1 + yos(x1))
    it = 0
    while not stopped and it < rec.max_iters:
        r = x + (1.0 - alpha / k) * (x - x_prev) + (1.0 - beta / k) * yos(x)
        x_prev, x = x, (1.0 - w) * r + w * jay(r)
        k += 1
        it += 1
        stopped = rec.push(k, x, x_prev, r)
    trace = rec.finish("raw_al", _ed_params(cfg), x0, stopped, it, True)
    return annotate(trace, op.known_zero, (alpha, beta))


def run_cripas(op: OperatorSpec, cfg: CripasConfig, x_m1, x0, z_m1) -> Trace:
    """Run CRIPA-S from ``x_{-1}, x_0, z_{-1}``.

    The ``mu`` column is ``A_gamma x_n`` with ``gamma = lam (1 + k0)``;
    ``y_aux`` holds ``z_{n-1}``.  Row ``n`` starts at 0.

    Raises
    ------
    MonotonicityRequired
        If ``op.rho < 0`` and ``allow_unproven`` is not set.
    """
    cfg.validate(op)
    x_m1 = as_vector(x_m1, op.dim, "x_m1")
    x0 = as_vector(x0, op.dim, "x0")
    z = as_vector(z_m1, op.dim, "z_m1")
    jay = Resolvent(op, cfg.gamma)
    rec = _Recorder(op, cfg.stop, cfg.max_iters, _yosida_of(jay))
    b, c_bar, a1, a2, k0 = (float(v) for v in (cfg.b, cfg.c_bar, cfg.a1, cfg.a2, cfg.k0))

    n = 0
    x_prev, x = x_m1, x0
    stopped = rec.push(n, x, x_prev, z)
    while not stopped and n < rec.max_iters:
        d = b * n + c_bar
        z = x + (1.0 - a1 / d) * (x - x_prev) + (1.0 - a2 / d) * (z - x)
        x_prev, x = x, z / (1.0 + k0) + (k0 / (1.0 + k0)) * jay(z)
        n += 1
        stopped = rec.push(n, x, x_prev, z)
    params = {"b": b, "c_bar": c_bar, "a1": a1, "a2": a2, "k0": k0, "lam": float(cfg.lam),
              "gamma": cfg.gamma, "max_iters": int(cfg.max_iters)}
    trace = rec.finish("cripas", params, x0, stopped, n, False)
    return annotate(trace, op.known_zero)


def run_ppa(op: OperatorSpec, gamma_schedule, x0, stop: StoppingRule, max_iters: int) -> Trace:
    """Proximal point iteration ``x_{n+1} = J_{gamma_n}(x_n)``.

    ``gamma_schedule`` is a positive scalar (constant step) or a sequence;
    a finite sequence shorter than the run repeats its last entry.  The
    ``mu`` column is ``A_{gamma_n} x_n``.
    """
    stop.validate(op)
    x = as_vector(x0, op.dim, "x0")
    if np.isscalar(gamma_schedule):
        gammas = [float(gamma_schedule)]
    else:
        gammas = [float(g) for g in gamma_schedule]
        if not gammas:
            raise ConfigInvalid("gamma_schedule is empty")
    cache = {}

    def jay_for(n):
        g = gammas[min(n, len(gammas) - 1)]
        if g not in cache:
            cache[g] = Resolvent(op, g)
        return cache[g]

    n = 0
    jn = jay_for(0)
    rec = _Recorder(op, stop, max_iters, _yosida_of(jn))
    stopped = rec.push(n, x, x, x)
    while not stopped and n < rec.max_iters:
        x_prev, x = x, jn(x)
        n += 1
        jn = jay_for(n)
        rec.yos = _yosida_of(jn)
        stopped = rec.push(n, x, x_prev, x_prev)
    params = {"gamma_schedule": gammas, "max_iters": int(max_iters)}
    trace = rec.finish("ppa", params, x, stopped, n, False)
    trace.meta["x0"] = np.asarray(x0, dtype=float)
    return annotate(trace, op.known_zero)
