"""Comonotone operators, their resolvents and Yosida regularizations.

An operator ``A`` is rho-comonotone when ``<x - y, u - v> >= rho |u - v|^2``
for all ``(x, u), (y, v)`` in its graph.  Two presentations are supported:

* a square matrix ``M`` (the operator ``x -> M x``), for which resolvents
  are computed exactly by an LU factorization of ``I + gamma M``;
* a resolvent oracle ``(gamma, x) -> J_gamma x`` supplied by the caller,
  whose declared modulus ``rho`` is trusted.

Vectors are plain one-dimensional ``float64`` numpy arrays.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (
    ConfigInvalid,
    ParameterViolation,
    SingularResolvent,
    UnboundedComonotonicity,
)

__all__ = [
    "RHO_UNBOUNDED",
    "COND_LIMIT",
    "as_vector",
    "LinearOperator",
    "OperatorSpec",
    "RegularizationParams",
    "Resolvent",
    "resolvent",
    "resolvent_map",
    "yosida",
    "yosida_map",
    "certify_comonotone",
    "invert_yosida_shift",
    "yosida_semigroup_check",
    "min_yosida_parameter",
    "load_problem",
]

#: Value returned by :func:`certify_comonotone` for the zero matrix, where
#: every rho is admissible.
RHO_UNBOUNDED = 1.0e12

#: Largest 2-norm condition number of ``I + gamma M`` accepted by the
#: linear resolvent.
COND_LIMIT = 1.0e14

_DET_RTOL = 1e-12
_RANK_RTOL = 1e-12
_ZERO_TOL_LINEAR = 1e-12
_ZERO_TOL_ORACLE = 1e-10


def as_vector(x, dim: Optional[int] = None, name: str = "x") -> np.ndarray:
    """Validate ``x`` as a finite 1-D vector and return a float64 copy."""
    v = np.array(x, dtype=float)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1 or v.size < 1:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} has non-finite entries")
    if dim is not None and v.size != dim:
        raise ValueError(f"{name} has dimension {v.size}, expected {dim}")
    return v


def min_yosida_parameter(rho: float) -> float:
    """Lower bound ``max(-2 rho, 0)`` that Yosida parameters must exceed."""
    return max(-2.0 * rho, 0.0)


@dataclass(frozen=True)
class LinearOperator:
    """Square real matrix acting as ``x -> M x``."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValueError(f"matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("matrix has non-finite entries")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


@dataclass(frozen=True)
class OperatorSpec:
    """A set-valued operator with a declared comonotonicity modulus.

    Build instances with :meth:`linear` or :meth:`oracle` rather than the
    raw constructor.
    """

    dim: int
    rho: float
    linop: Optional[LinearOperator] = None
    resolvent_oracle: Optional[Callable[[float, np.ndarray], np.ndarray]] = field(
        default=None, compare=False
    )
    known_zero: Optional[np.ndarray] = field(default=None, compare=False)
    name: str = "custom"

    def __post_init__(self):
        if (self.linop is None) == (self.resolvent_oracle is None):
            raise ValueError("exactly one of linop / resolvent_oracle must be given")
        if not math.isfinite(self.rho):
            raise ValueError("rho must be finite")
        if self.known_zero is not None:
            z = as_vector(self.known_zero, self.dim, "known_zero")
            z.setflags(write=False)
            object.__setattr__(self, "known_zero", z)
            if self.is_linear:
                res = np.linalg.norm(self.linop.apply(z))
                tol = _ZERO_TOL_LINEAR
            else:
                res = np.linalg.norm(yosida(self, min_yosida_parameter(self.rho) + 1.0, z))
                tol = _ZERO_TOL_ORACLE
            if res > tol:
                raise ValueError(f"known_zero is not a zero of the operator (residual {res:.3e})")

    @classmethod
    def linear(cls, matrix, rho: Optional[float] = None, known_zero="origin", name="custom"):
        """Operator ``x -> M x``.

        ``rho`` defaults to the certified modulus.  Every linear operator
        vanishes at the origin, which is used as ``known_zero`` unless
        ``None`` is passed explicitly.
        """
        linop = LinearOperator(matrix)
        if rho is None:
            rho = certify_comonotone(linop)
            if not math.isfinite(rho):
                raise ConfigInvalid("matrix is not rho-comonotone for any rho")
        if isinstance(known_zero, str) and known_zero == "origin":
            known_zero = np.zeros(linop.dim)
        return cls(dim=linop.dim, rho=float(rho), linop=linop, known_zero=known_zero, name=name)

    @classmethod
    def oracle(cls, resolvent_fn, dim: int, rho: float, known_zero=None, name="custom"):
        """Operator given only through ``resolvent_fn(gamma, x) = J_gamma x``."""
        return cls(dim=int(dim), rho=float(rho), resolvent_oracle=resolvent_fn,
                   known_zero=known_zero, name=name)

    @property
    def is_linear(self) -> bool:
        return self.linop is not None

    @property
    def matrix(self) -> np.ndarray:
        if self.linop is None:
            raise AttributeError("oracle operators have no matrix")
        return self.linop.matrix


@dataclass(frozen=True)
class RegularizationParams:
    """Yosida parameter ``eta`` and resolvent index ``gamma`` for an operator."""

    eta: float
    gamma: float

    def validate(self, rho: float) -> "RegularizationParams":
        if not self.eta > min_yosida_parameter(rho):
            raise ParameterViolation(
                f"eta={self.eta} must exceed max(-2*rho, 0)={min_yosida_parameter(rho)}"
            )
        _check_index(self.gamma, rho)
        return self


def _check_index(gamma: float, rho: float) -> None:
    if not gamma > 0:
        raise ParameterViolation(f"resolvent index gamma={gamma} must be positive")
    if not gamma + rho > 0:
        raise ParameterViolation(f"gamma + rho = {gamma + rho} must be positive")


class Resolvent:
    """``J_gamma`` of a fixed operator, factorized once for repeated use.

    Calling the object evaluates the resolvent on a vector.  The linear case
    keeps an LU factorization of ``I + gamma M``; the oracle case forwards
    to the user callable.
    """

    def __init__(self, op: OperatorSpec, gamma: float):
        _check_index(gamma, op.rho)
        self.op = op
        self.gamma = float(gamma)
        self._lu = None
        if op.is_linear:
            a = np.eye(op.dim) + self.gamma * op.matrix
            cond = np.linalg.cond(a)
            if not np.isfinite(cond) or cond > COND_LIMIT:
                raise SingularResolvent(
                    f"I + {gamma}*M is singular or ill-conditioned (cond={cond:.3e})"
                )
            self._lu = scipy.linalg.lu_factor(a, check_finite=False)
            # Direct LAPACK call; the lu_solve wrapper dominates for tiny n.
            (self._getrs,) = scipy.linalg.get_lapack_funcs(("getrs",), (a,))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._lu is not None:
            p, info = self._getrs(self._lu[0], self._lu[1], x)
            if info != 0:  # pragma: no cover - getrs only fails on bad arguments
                raise SingularResolvent(f"LAPACK getrs failed with info={info}")
            return p
        p = np.asarray(self.op.resolvent_oracle(self.gamma, x), dtype=float)
        if p.shape != x.shape:
            raise ValueError(f"resolvent oracle returned shape {p.shape}, expected {x.shape}")
        return p


def resolvent_map(op: OperatorSpec, gamma: float) -> Resolvent:
    """Return ``J_gamma`` of ``op`` as a reusable callable."""
    return Resolvent(op, gamma)


def yosida_map(op: OperatorSpec, gamma: float) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``A_gamma = (I - J_gamma) / gamma`` as a reusable callable."""
    jay = Resolvent(op, gamma)
    g = jay.gamma
    return lambda x: (x - jay(x)) / g


def resolvent(op: OperatorSpec, gamma: float, x) -> np.ndarray:
    """Evaluate ``J_gamma x = (I + gamma A)^{-1} x``.

    Raises
    ------
    ParameterViolation
        If ``gamma + rho <= 0``.
    SingularResolvent
        If ``I + gamma M`` is singular or its condition number exceeds
        :data:`COND_LIMIT` (linear operators only).
    """
    x = as_vector(x, op.dim)
    return Resolvent(op, gamma)(x)


def yosida(op: OperatorSpec, gamma: float, x) -> np.ndarray:
    """Evaluate the Yosida regularization ``A_gamma x = (x - J_gamma x) / gamma``."""
    x = as_vector(x, op.dim)
    return (x - Resolvent(op, gamma)(x)) / gamma


def invert_yosida_shift(op: OperatorSpec, eta: float, y) -> np.ndarray:
    """Solve ``x + A_eta x = y`` for ``x``.

    Uses the closed form ``x = (1 - 1/(eta+1)) y + J_{eta+1} y / (eta+1)``,
    valid for ``eta > max(-2 rho, 0)``.
    """
    if not eta > min_yosida_parameter(op.rho):
        raise ParameterViolation(
            f"eta={eta} must exceed max(-2*rho, 0)={min_yosida_parameter(op.rho)}"
        )
    y = as_vector(y, op.dim, "y")
    w = 1.0 / (eta + 1.0)
    return (1.0 - w) * y + w * Resolvent(op, eta + 1.0)(y)


def _yosida_of_map(a_gamma, delta: float, x: np.ndarray, lipschitz: float) -> np.ndarray:
    """Yosida regularization with parameter ``delta`` of a single-valued
    monotone map, computed by solving ``p + delta a_gamma(p) = x``."""
    def residual(p):
        return p + delta * a_gamma(p) - x

    sol = scipy.optimize.root(residual, x.copy(), method="hybr", tol=1e-14)
    p = sol.x
    scale = 1.0 + np.linalg.norm(x)
    if np.linalg.norm(residual(p)) > 1e-12 * scale:
        # G(p) = p + delta*a(p) is 1-strongly monotone; a damped fixed-point
        # step with 1/L^2 contracts for any monotone Lipschitz a.
        lg = 1.0 + delta * lipschitz
        tau = 1.0 / lg**2
        for _ in range(200000):
            r = residual(p)
            if np.linalg.norm(r) <= 1e-13 * scale:
                break
            p = p - tau * r
    return (x - p) / delta


def yosida_semigroup_check(op: OperatorSpec, gamma: float, delta: float, x):
    """Return ``(A_{gamma+delta} x, (A_gamma)_delta x)``.

    The second component regularizes the single-valued map ``A_gamma`` a
    second time with parameter ``delta`` without using the semigroup law,
    so the two components agree only if the law holds.
    """
    if not gamma > min_yosida_parameter(op.rho):
        raise ParameterViolation(
            f"gamma={gamma} must exceed max(-2*rho, 0)={min_yosida_parameter(op.rho)}"
        )
    if not delta > 0:
        raise ParameterViolation(f"delta={delta} must be positive")
    x = as_vector(x, op.dim)
    direct = yosida(op, gamma + delta, x)
    if op.is_linear:
        jay = np.linalg.solve(np.eye(op.dim) + gamma * op.matrix, np.eye(op.dim))
        a_gamma = (np.eye(op.dim) - jay) / gamma
        p = np.linalg.solve(np.eye(op.dim) + delta * a_gamma, x)
        nested = (x - p) / delta
    else:
        a_gamma = yosida_map(op, gamma)
        nested = _yosida_of_map(a_gamma, delta, x, lipschitz=1.0 / (op.rho + gamma))
    return direct, nested


def certify_comonotone(linop) -> float:
    """Largest ``rho`` for which ``x -> M x`` is rho-comonotone.

    For invertible ``M`` this is the smallest eigenvalue of the symmetric
    part of ``M^{-1}``.  For singular ``M`` the constraint
    ``<d, M d> >= rho |M d|^2`` is minimized over directions orthogonal to
    the kernel through a generalized symmetric eigenproblem; if the kernel
    is not orthogonal to the range no rho works and ``-inf`` is returned.
    The zero matrix admits every rho and yields :data:`RHO_UNBOUNDED`
    together with an :class:`UnboundedComonotonicity` warning.
    """
    if not isinstance(linop, LinearOperator):
        linop = LinearOperator(linop)
    m = linop.matrix
    n = linop.dim
    norm = np.linalg.norm(m, 2)
    if norm == 0.0:
        warnings.warn("zero matrix is rho-comonotone for every rho", UnboundedComonotonicity)
        return RHO_UNBOUNDED
    if abs(np.linalg.det(m)) > _DET_RTOL * norm**n:
        minv = np.linalg.inv(m)
        return float(np.linalg.eigvalsh(0.5 * (minv + minv.T))[0])

    u, sv, vt = np.linalg.svd(m)
    r = int(np.sum(sv > _RANK_RTOL * sv[0]))
    kernel = vt[r:].T
    rng = u[:, :r]
    if np.linalg.norm(kernel.T @ rng) > 1e-9:
        return -math.inf
    basis = vt[:r].T
    mb = m @ basis
    lhs = basis.T @ (0.5 * (m + m.T)) @ basis
    rhs = mb.T @ mb
    return float(scipy.linalg.eigh(lhs, rhs, eigvals_only=True)[0])


_PRESETS = {
    "skew2": np.array([[0.0, -1.0], [1.0, 0.0]]),
    "comono2": np.array([[-0.4, 0.8], [-0.8, -0.4]]),
}
_PRESET_RHO = {"skew2": 0.0, "comono2": -0.5}


def load_problem(name: str) -> OperatorSpec:
    """Resolve a problem name.

    ``"skew2"`` is the rotation ``(x, y) -> (-y, x)`` (monotone, rho = 0);
    ``"comono2"`` is ``[[-0.4, 0.8], [-0.8, -0.4]]`` (rho = -1/2);
    ``"matrix:<path>"`` reads a dense matrix from a header-less CSV file and
    certifies its modulus.
    """
    if name in _PRESETS:
        return OperatorSpec.linear(_PRESETS[name], rho=_PRESET_RHO[name], name=name)
    if name.startswith("matrix:"):
        path = Path(name[len("matrix:"):])
        try:
            with open(path, newline="") as fh:
                rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        except (OSError, ValueError) as exc:
            raise ConfigInvalid(f"cannot read matrix from {path}: {exc}") from exc
        try:
            return OperatorSpec.linear(np.array(rows), name=name)
        except ValueError as exc:
            raise ConfigInvalid(f"invalid matrix in {path}: {exc}") from exc
    raise ConfigInvalid(f"unknown problem {name!r}; expected skew2, comono2 or matrix:<path>")
