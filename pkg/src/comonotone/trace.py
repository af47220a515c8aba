"""Trace containers shared by the continuous and discrete solvers.

A :class:`Trace` is stored column-wise: one array per quantity with a
leading axis over samples.  Iterating a trace yields :class:`TraceRecord`
rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, Optional

import numpy as np


@dataclass(frozen=True)
class TraceRecord:
    index: float
    x: np.ndarray
    dx: np.ndarray
    mu: np.ndarray
    y_aux: Optional[np.ndarray]
    derived: Dict[str, float]


@dataclass
class Trace:
    """Ordered samples of a solver run.

    Attributes
    ----------
    kind : str
        ``"discrete"`` (index is the iteration counter ``k``) or
        ``"continuous"`` (index is the time ``t``).
    index : ndarray, shape (N,)
        Strictly increasing iteration counters or sample times.
    x, dx, mu : ndarray, shape (N, n)
        Iterates, increments ``x_k - x_{k-1}`` (or velocities), and the
        Yosida residual ``A_eta x``.
    y_aux : ndarray or None
        Auxiliary variable (``y_{k-1}`` or the phase variable ``y(t)``).
    derived : dict of str to ndarray
        Per-row scalar diagnostics.
    meta : dict
        Method name, parameters and stopping information.
    """

    kind: str
    index: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    mu: np.ndarray
    y_aux: Optional[np.ndarray] = None
    derived: Dict[str, np.ndarray] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.index = np.asarray(self.index, dtype=float)
        n = len(self.index)
        for name in ("x", "dx", "mu"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.ndim != 2 or arr.shape[0] != n:
                raise ValueError(f"{name} must have shape (N, n) with N={n}, got {arr.shape}")
            setattr(self, name, arr)
        if self.y_aux is not None:
            self.y_aux = np.asarray(self.y_aux, dtype=float)
        if n > 1 and not np.all(np.diff(self.index) > 0):
            raise ValueError("trace index must be strictly increasing")

    def __len__(self) -> int:
        return len(self.index)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def __iter__(self) -> Iterator[TraceRecord]:
        for i in range(len(self)):
            yield self.record(i)

    def record(self, i: int) -> TraceRecord:
        return TraceRecord(
            index=float(self.index[i]),
            x=self.x[i],
            dx=self.dx[i],
            mu=self.mu[i],
            y_aux=None if self.y_aux is None else self.y_aux[i],
            derived={k: float(v[i]) for k, v in self.derived.items()},
        )
