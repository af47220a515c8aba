"""Explicit Runge-Kutta integrators for non-stiff first-order systems.

``dopri5`` is the Dormand-Prince 5(4) embedded pair with local
extrapolation, FSAL reuse of the last stage and a PI step-size controller.
``rk4`` is the classical fixed-step fourth order scheme, kept as an
independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StepSizeUnderflow

__all__ = ["OdeResult", "integrate", "MIN_STEP_FACTOR"]

#: Adaptive steps below ``MIN_STEP_FACTOR * |t|`` abort the integration.
MIN_STEP_FACTOR = 1e-13

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b5 - b4: the embedded 4th-order error estimate.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])

# PI controller constants (Hairer, Norsett & Wanner, DOPRI5).
_SAFETY = 0.9
_BETA = 0.04
_EXPO = 0.2 - 0.75 * _BETA
_FAC_MIN = 0.2
_FAC_MAX = 10.0


@dataclass
class OdeResult:
    t: np.ndarray
    z: np.ndarray
    n_steps: int = 0
    n_rejected: int = 0
    n_evals: int = 0


def _dp_step(f, t, z, h, k1):
    ks = [k1]
    for i in range(1, 7):
        zi = z + h * sum(a * kj for a, kj in zip(_A[i], ks) if a != 0.0)
        ks.append(f(t + _C[i] * h, zi))
    # Row 6 of A equals b5, so stage 7 is f at the new point (FSAL).
    z_new = z + h * sum(b * kj for b, kj in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * kj for e, kj in zip(_E, ks) if e != 0.0)
    return z_new, err, ks[6]


def _rk4_step(f, t, z, h):
    k1 = f(t, z)
    k2 = f(t + h / 2, z + h / 2 * k1)
    k3 = f(t + h / 2, z + h / 2 * k2)
    k4 = f(t + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _err_norm(err, z, z_new, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(z), np.abs(z_new))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _initial_step(f, t0, z0, f0, rtol, atol, direction_len, max_step):
    sc = atol + rtol * np.abs(z0)
    d0 = np.sqrt(np.mean((z0 / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_len, max_step)
    f1 = f(t0 + h0, z0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, direction_len, max_step)


def integrate(f, t0, t_end, z0, *, method="dopri5", rtol=1e-8, atol=1e-10,
              max_step=np.inf, step=None, t_eval=None, max_steps=10_000_000):
    """Integrate ``z' = f(t, z)`` from ``t0`` to ``t_end`` (``t_end > t0``).

    Parameters
    ----------
    method : {"dopri5", "rk4"}
        ``dopri5`` is adaptive unless ``step`` is given; ``rk4`` always uses
        the fixed ``step`` (default ``max_step``).
    t_eval : array_like, optional
        Increasing sample times within ``[t0, t_end]``.  Steps are shortened
        to land on them exactly.  When omitted every accepted step is
        recorded.

    Raises
    ------
    StepSizeUnderflow
        If the adaptive step drops below ``1e-13 * |t|``.
    """
    t0 = float(t0)
    t_end = float(t_end)
    if not t_end > t0:
        raise ValueError("t_end must exceed t0")
    z = np.array(z0, dtype=float)
    if t_eval is None:
        targets = None
    else:
        targets = np.asarray(t_eval, dtype=float)
        if targets.size and (targets[0] < t0 or targets[-1] > t_end or np.any(np.diff(targets) <= 0)):
            raise ValueError("t_eval must be increasing within [t0, t_end]")

    n_evals = 0

    def rhs(t, y):
        nonlocal n_evals
        n_evals += 1
        return np.asarray(f(t, y), dtype=float)

    ts, zs = [], []
    ti = 0
    if targets is None or (targets.size and targets[0] == t0):
        ts.append(t0)
        zs.append(z.copy())
        ti = 1 if targets is not None else 0

    adaptive = method == "dopri5" and step is None
    if method not in ("dopri5", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    if method == "rk4" and step is None:
        if not np.isfinite(max_step):
            raise ValueError("rk4 needs a finite step or max_step")
        step = max_step

    t = t0
    k1 = rhs(t, z)
    h = _initial_step(rhs, t, z, k1, rtol, atol, t_end - t0, max_step) if adaptive else float(step)
    fac_old = 1e-4
    last_rejected = False
    n_steps = n_rej = 0

    while t < t_end:
        if n_steps + n_rej >= max_steps:
            raise RuntimeError("maximum number of steps exceeded")
        stop_at = t_end if targets is None or ti >= targets.size else targets[ti]
        h_try = min(h, max_step)
        landing = False
        if t + h_try >= stop_at - 1e-12 * abs(stop_at):
            h_try = stop_at - t
            landing = True
        if adaptive and h_try < MIN_STEP_FACTOR * abs(t) and not landing:
            raise StepSizeUnderflow(f"step {h_try:.3e} below {MIN_STEP_FACTOR}*t at t={t:.6g}")

        if method == "rk4":
            z_new = _rk4_step(rhs, t, z, h_try)
            accept = True
        else:
            z_new, err, k_last = _dp_step(rhs, t, z, h_try, k1)
            accept = True
            if adaptive:
                en = _err_norm(err, z, z_new, rtol, atol)
                fac11 = en ** _EXPO if en > 0 else 0.0
                if en <= 1.0:
                    fac = fac11 / fac_old ** _BETA
                    fac = min(1.0 / _FAC_MIN, max(1.0 / _FAC_MAX, fac / _SAFETY))
                    h_new = h_try / fac if fac > 0 else h_try * _FAC_MAX
                    if last_rejected:
                        h_new = min(h_new, h_try)
                    fac_old = max(en, 1e-4)
                    last_rejected = False
                else:
                    accept = False
                    h = h_try / min(1.0 / _FAC_MIN, fac11 / _SAFETY)
                    last_rejected = True
                    n_rej += 1
                    if h < MIN_STEP_FACTOR * abs(t):
                        raise StepSizeUnderflow(
                            f"step {h:.3e} below {MIN_STEP_FACTOR}*t at t={t:.6g}")
                    continue

        if accept:
            t = stop_at if landing else t + h_try
            z = z_new
            n_steps += 1
            if method == "dopri5":
                k1 = k_last
            if adaptive:
                # Keep the controller's proposal rather than the clipped length.
                h = h_new if not landing else max(h_new, h)
            if targets is None:
                ts.append(t)
                zs.append(z.copy())
            elif landing and ti < targets.size and stop_at == targets[ti]:
                ts.append(t)
                zs.append(z.copy())
                ti += 1

    return OdeResult(t=np.array(ts), z=np.array(zs), n_steps=n_steps,
                     n_rejected=n_rej, n_evals=n_evals)
