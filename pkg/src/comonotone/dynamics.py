"""Second-order dynamics driven by a Yosida-regularized comonotone operator.

The main system is

    x'' + mu' + (alpha/t) x' + (beta/t) mu = 0,    mu = A_eta x,

integrated through its phase-space form in ``(x, y)`` with
``y = -x' - A_eta x``:

    x' = -A_eta x - y,
    y' = ((beta - alpha)/t) A_eta x - (alpha/t) y.

The baseline with a time-dependent regularization ``lambda(t) = lambda t^2``
and Newton-like correction,

    x'' + (alpha/t) x' + b d/dt(A_lambda(t) x) + A_lambda(t) x = 0,

is integrated in the variables ``(x, v)`` with ``v = x' + b A_lambda(t) x``,
which avoids differentiating the regularized operator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .diagnostics import annotate
from .errors import ConfigInvalid, MonotonicityRequired, ParameterViolation
from .ode import integrate
from .operators import OperatorSpec, Resolvent, as_vector, min_yosida_parameter, yosida_map
from .trace import Trace

__all__ = [
    "PhaseState",
    "DynamicsConfig",
    "Sys6Config",
    "ds_vector_field",
    "integrate_ds",
    "integrate_sys6",
]


@dataclass(frozen=True)
class PhaseState:
    t: float
    x: np.ndarray
    y: np.ndarray


def _sample_times(t0, t_end, samples):
    if samples == "dense":
        return None
    n = int(samples)
    if n < 2:
        raise ConfigInvalid("samples must be >= 2 or 'dense'")
    return np.linspace(t0, t_end, n)


def _check_time(t0, t_end):
    if not t0 > 0:
        raise ConfigInvalid(f"t0={t0} must be positive (the damping alpha/t is singular at 0)")
    if not t_end > t0:
        raise ConfigInvalid(f"t_end={t_end} must exceed t0={t0}")


@dataclass
class DynamicsConfig:
    """Parameters for :func:`integrate_ds`.

    ``alpha >= beta + 1`` and ``beta > 1`` are enforced unless
    ``allow_unproven`` is set; ``eta > max(-2 rho, 0)`` always is.
    """

    alpha: float
    beta: float
    eta: float
    t0: float
    t_end: float
    x0: np.ndarray
    v0: np.ndarray
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = np.inf
    samples: Union[int, str] = 2001
    method: str = "dopri5"
    allow_unproven: bool = False

    def validate(self, op: OperatorSpec) -> "DynamicsConfig":
        _check_time(self.t0, self.t_end)
        if not self.allow_unproven and not (self.alpha >= self.beta + 1 and self.beta > 1):
            raise ConfigInvalid(
                f"alpha={self.alpha}, beta={self.beta} violate alpha >= beta + 1 and beta > 1 "
                "(pass allow_unproven to run anyway)"
            )
        if not self.eta > min_yosida_parameter(op.rho):
            raise ParameterViolation(
                f"eta={self.eta} must exceed max(-2*rho, 0)={min_yosida_parameter(op.rho)}"
            )
        if not (self.rtol > 0 and self.atol > 0 and self.max_step > 0):
            raise ConfigInvalid("rtol, atol and max_step must be positive")
        self.x0 = as_vector(self.x0, op.dim, "x0")
        self.v0 = as_vector(self.v0, op.dim, "v0")
        return self


@dataclass
class Sys6Config:
    """Parameters for :func:`integrate_sys6` with ``lambda(t) = lambda_scale t^2``."""

    alpha: float
    b: float
    lambda_scale: float
    t0: float
    t_end: float
    x0: np.ndarray
    v0: np.ndarray
    rtol: float = 1e-8
    atol: float = 1e-10
    max_step: float = np.inf
    samples: Union[int, str] = 2001
    method: str = "dopri5"
    allow_unproven: bool = False

    def validate(self, op: OperatorSpec) -> "Sys6Config":
        _check_time(self.t0, self.t_end)
        if op.rho < 0 and not self.allow_unproven:
            raise MonotonicityRequired(
                f"the Newton-corrected baseline needs a monotone operator, got rho={op.rho}"
            )
        if not self.b >= 0:
            raise ConfigInvalid(f"b={self.b} must be nonnegative")
        if not self.lambda_scale > 0:
            raise ConfigInvalid(f"lambda_scale={self.lambda_scale} must be positive")
        self.x0 = as_vector(self.x0, op.dim, "x0")
        self.v0 = as_vector(self.v0, op.dim, "v0")
        return self


def ds_vector_field(op: OperatorSpec, cfg: DynamicsConfig, state: PhaseState):
    """Right-hand side ``(x', y')`` of the phase-space system at ``state``."""
    if not state.t > 0:
        raise ValueError("t must be positive")
    mu = yosida_map(op, cfg.eta)(np.asarray(state.x, dtype=float))
    y = np.asarray(state.y, dtype=float)
    dx = -mu - y
    dy = ((cfg.beta - cfg.alpha) / state.t) * mu - (cfg.alpha / state.t) * y
    return dx, dy


def _odeargs(cfg):
    kw = dict(method=cfg.method, rtol=cfg.rtol, atol=cfg.atol, max_step=cfg.max_step,
              t_eval=_sample_times(cfg.t0, cfg.t_end, cfg.samples))
    if cfg.method == "rk4" and not np.isfinite(cfg.max_step):
        kw["step"] = (cfg.t_end - cfg.t0) / 10000
    return kw


def integrate_ds(op: OperatorSpec, cfg: DynamicsConfig) -> Trace:
    """Integrate the Yosida-driven second-order system on ``[t0, t_end]``.

    The phase variable starts at ``y(t0) = -v0 - A_eta x0``.  Each sample
    carries ``x``, the reconstructed velocity ``x' = -A_eta x - y``,
    ``mu = A_eta x`` and ``y``.
    """
    cfg.validate(op)
    n = op.dim
    a_eta = yosida_map(op, cfg.eta)
    alpha, beta = float(cfg.alpha), float(cfg.beta)

    def rhs(t, z):
        x, y = z[:n], z[n:]
        mu = a_eta(x)
        return np.concatenate((-mu - y, ((beta - alpha) / t) * mu - (alpha / t) * y))

    y0 = -cfg.v0 - a_eta(cfg.x0)
    res = integrate(rhs, cfg.t0, cfg.t_end, np.concatenate((cfg.x0, y0)), **_odeargs(cfg))
    x = res.z[:, :n]
    y = res.z[:, n:]
    mu = np.array([a_eta(xi) for xi in x])
    trace = Trace(
        kind="continuous", index=res.t, x=x, dx=-mu - y, mu=mu, y_aux=y,
        meta={
            "method": "ds",
            "params": {"alpha": alpha, "beta": beta, "eta": float(cfg.eta),
                       "t0": float(cfg.t0), "t_end": float(cfg.t_end),
                       "rtol": cfg.rtol, "atol": cfg.atol},
            "lyapunov": True,
            "x0": cfg.x0,
            "n_steps": res.n_steps,
            "n_rejected": res.n_rejected,
        },
    )
    return annotate(trace, op.known_zero, (alpha, beta))


def integrate_sys6(op: OperatorSpec, cfg: Sys6Config) -> Trace:
    """Integrate the Newton-corrected baseline with ``lambda(t) = lambda_scale t^2``.

    Raises
    ------
    MonotonicityRequired
        If ``op.rho < 0`` and ``allow_unproven`` is not set.
    """
    cfg.validate(op)
    n = op.dim
    alpha, b, lam = float(cfg.alpha), float(cfg.b), float(cfg.lambda_scale)

    def a_lam(t, x):
        g = lam * t * t
        return (x - Resolvent(op, g)(x)) / g

    def rhs(t, z):
        x, v = z[:n], z[n:]
        ax = a_lam(t, x)
        xdot = v - b * ax
        return np.concatenate((xdot, -(alpha / t) * xdot - ax))

    v_init = cfg.v0 + b * a_lam(cfg.t0, cfg.x0)
    res = integrate(rhs, cfg.t0, cfg.t_end, np.concatenate((cfg.x0, v_init)), **_odeargs(cfg))
    x = res.z[:, :n]
    v = res.z[:, n:]
    mu = np.array([a_lam(t, xi) for t, xi in zip(res.t, x)])
    trace = Trace(
        kind="continuous", index=res.t, x=x, dx=v - b * mu, mu=mu, y_aux=v,
        meta={
            "method": "sys6",
            "params": {"alpha": alpha, "b": b, "lambda_scale": lam,
                       "t0": float(cfg.t0), "t_end": float(cfg.t_end),
                       "rtol": cfg.rtol, "atol": cfg.atol},
            "lyapunov": False,
            "x0": cfg.x0,
            "n_steps": res.n_steps,
            "n_rejected": res.n_rejected,
        },
    )
    return annotate(trace, op.known_zero)
