"""Experiment presets: flat parameter dictionaries expanded into runs.

Each preset is a flat mapping of parameter names to JSON values.  Config
files and ``--override`` flags replace entries of that mapping (CLI over
file over preset default) before it is expanded into concrete runs, so the
resolved mapping alone determines an experiment.

The ``(eta, lam)`` grids of ``fig1`` and ``fig2`` and the ``t_end`` of
``fig1`` are choices of this package, not published values.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Dict, List

from ..errors import ConfigInvalid

__all__ = ["PRESETS", "RunSpec", "ExperimentPreset", "resolve_parameters", "build_preset", "ALL_GATES"]

ALL_GATES = ("lyapunov_monotone", "rate_limits", "summability_tails", "distance_limit", "converged")

_COMMON = {
    "allow_unproven": False,
    "rtol": 1e-8,
    "atol": 1e-10,
    "max_step": None,
    "samples": 2001,
    "ode_method": "dopri5",
    "stop_mode": "distance",
    "stop_tol": 1e-7,
    "max_iters": 1_000_000,
    "k_start": 1,
}

PRESETS: Dict[str, dict] = {
    "fig1": {
        "problem": "skew2", "alpha": 2.5, "beta": 1.5, "t0": 0.1, "t_end": 20.0,
        "x0": [1.0, 1.0], "v0": [1.0, 1.0], "etas": [1.0, 2.0, 5.0],
        "lams": [0.5, 1.0, 2.0], "b": 1.0,
    },
    "fig2": {
        "problem": "skew2", "alpha": 5.25, "beta": 2.5, "etas": [1.0, 2.0, 5.0],
        "lams": [0.5, 1.0, 2.0], "x0": [1.0, -1.0], "b": 1.0, "a1": 5.25, "a2": 2.5,
        "c_bar": 7.875,
    },
    "fig3": {
        "problem": "comono2", "alpha": 3.0, "beta": 2.0, "eta": 2.0, "t0": 0.1,
        "t_end": 100.0, "x0": [1.0, 1.0], "v0": [1.0, 1.0],
    },
    "fig4": {
        "problem": "comono2", "alpha": 20.0, "eta": 2.0, "betas": [2.0, 5.0, 10.0, 19.0],
        "t0": 0.1, "t_end": 50.0, "x0": [1.0, 1.0], "v0": [1.0, 1.0],
    },
    "fig5": {
        "problem": "comono2", "alpha": 10.0, "eta": 2.0, "betas": [2.0, 3.0, 5.0, 9.0],
        "x0": [1.0, 1.0],
    },
    "custom": {
        "problem": None, "method": "ed", "alpha": 3.0, "beta": 2.0, "eta": 2.0,
        "t0": 0.1, "t_end": 50.0, "x0": None, "v0": None, "b": 1.0,
        "lambda_scale": 1.0, "a1": 5.25, "a2": 2.5, "c_bar": 7.875, "lam": 1.0,
        "k0": None, "gamma": 1.0,
    },
}

CUSTOM_METHODS = ("ds", "sys6", "ed", "raw_al", "cripas", "ppa")


@dataclass(frozen=True)
class RunSpec:
    """One solver invocation of a preset.

    ``gates`` lists the report sections whose verdict decides the exit code.
    """

    name: str
    label: str
    method: str
    problem: str
    params: dict
    gates: tuple = ()


@dataclass
class ExperimentPreset:
    name: str
    problem: str
    parameters: dict
    runs: List[RunSpec] = field(default_factory=list)
    comparison_pairs: List[tuple] = field(default_factory=list)
    plot: dict = field(default_factory=dict)


def resolve_parameters(name: str, file_cfg=None, overrides=None) -> dict:
    """Merge preset defaults, a config file mapping and CLI overrides."""
    if name not in PRESETS:
        raise ConfigInvalid(f"unknown preset {name!r}; expected one of {sorted(PRESETS)}")
    params = dict(_COMMON)
    params.update(copy.deepcopy(PRESETS[name]))
    for source in (file_cfg or {}, overrides or {}):
        for key, value in source.items():
            if key not in params:
                raise ConfigInvalid(f"unknown parameter {key!r} for preset {name!r}")
            params[key] = value
    return params


def _num(params, key):
    v = params[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigInvalid(f"parameter {key!r} must be a number, got {v!r}")
    return float(v)


def _vec(params, key, dim=None):
    v = params[key]
    if not isinstance(v, (list, tuple)) or not all(
        isinstance(c, (int, float)) and not isinstance(c, bool) for c in v
    ):
        raise ConfigInvalid(f"parameter {key!r} must be a list of numbers, got {v!r}")
    if dim is not None and len(v) != dim:
        raise ConfigInvalid(f"parameter {key!r} has length {len(v)}, expected {dim}")
    return [float(c) for c in v]


def _list(params, key):
    v = params[key]
    if not isinstance(v, (list, tuple)) or not v:
        raise ConfigInvalid(f"parameter {key!r} must be a nonempty list, got {v!r}")
    return [float(c) for c in v]


def _fmt(v: float) -> str:
    return f"{v:g}"


def _ode_params(p, alpha, beta=None, eta=None):
    out = {
        "alpha": alpha, "t0": _num(p, "t0"), "t_end": _num(p, "t_end"),
        "x0": _vec(p, "x0"), "v0": _vec(p, "v0", len(_vec(p, "x0"))),
        "rtol": _num(p, "rtol"), "atol": _num(p, "atol"), "max_step": p["max_step"],
        "samples": p["samples"], "method": p["ode_method"],
        "allow_unproven": bool(p["allow_unproven"]),
    }
    if beta is not None:
        out["beta"] = beta
    if eta is not None:
        out["eta"] = eta
    return out


def _stop(p):
    return {"stop_mode": p["stop_mode"], "stop_tol": _num(p, "stop_tol"),
            "max_iters": int(_num(p, "max_iters"))}


def _ed_params(p, beta, eta):
    x0 = _vec(p, "x0")
    out = {"alpha": _num(p, "alpha"), "beta": beta, "eta": eta, "x0": x0, "x1": x0,
           "k_start": int(_num(p, "k_start")), "allow_unproven": bool(p["allow_unproven"])}
    out.update(_stop(p))
    return out


def _cripas_params(p, eta, lam, k0=None):
    x0 = _vec(p, "x0")
    out = {"b": _num(p, "b"), "a1": _num(p, "a1"), "a2": _num(p, "a2"),
           "c_bar": _num(p, "c_bar"), "lam": lam,
           "k0": (eta + 1.0) / lam - 1.0 if k0 is None else k0,
           "x_m1": x0, "x0": x0, "z_m1": x0, "allow_unproven": bool(p["allow_unproven"])}
    out.update(_stop(p))
    return out


def build_preset(name: str, params: dict) -> ExperimentPreset:
    """Expand resolved ``params`` of preset ``name`` into runs."""
    p = params
    problem = p["problem"]
    if not isinstance(problem, str) or not problem:
        raise ConfigInvalid(f"preset {name!r} needs a 'problem' (skew2, comono2 or matrix:<path>)")
    pre = ExperimentPreset(name=name, problem=problem, parameters=p)
    runs = pre.runs
    if name == "fig1":
        alpha, beta = _num(p, "alpha"), _num(p, "beta")
        for eta in _list(p, "etas"):
            runs.append(RunSpec(f"ds_eta{_fmt(eta)}", f"DS eta={_fmt(eta)}", "ds", problem,
                                _ode_params(p, alpha, beta, eta), ("lyapunov_monotone",)))
        for lam in _list(p, "lams"):
            sp = _ode_params(p, alpha)
            sp.update(b=_num(p, "b"), lambda_scale=lam)
            runs.append(RunSpec(f"sys6_lam{_fmt(lam)}", f"Newton lambda={_fmt(lam)}", "sys6",
                                problem, sp, ()))
        pre.plot = {"metric": "dist_to_zero", "xlabel": "t", "ylabel": "|x(t) - x*|"}
    elif name == "fig2":
        etas, lams = _list(p, "etas"), _list(p, "lams")
        if len(etas) != len(lams):
            raise ConfigInvalid("fig2 pairs etas with lams; both lists need the same length")
        beta = _num(p, "beta")
        for eta, lam in zip(etas, lams):
            ed = RunSpec(f"ed_eta{_fmt(eta)}", f"ed eta={_fmt(eta)}", "ed", problem,
                         _ed_params(p, beta, eta), ALL_GATES)
            cr = RunSpec(f"cripas_lam{_fmt(lam)}", f"CRIPA-S lambda={_fmt(lam)}", "cripas",
                         problem, _cripas_params(p, eta, lam), ("converged",))
            runs.extend((ed, cr))
            pre.comparison_pairs.append((ed.name, cr.name))
        pre.plot = {"metric": "dist_to_zero", "xlabel": "k", "ylabel": "|x_k - x*|"}
    elif name == "fig3":
        runs.append(RunSpec("ds", "DS", "ds", problem,
                            _ode_params(p, _num(p, "alpha"), _num(p, "beta"), _num(p, "eta")),
                            ALL_GATES))
        pre.plot = {"metric": "dist_to_zero", "xlabel": "t", "ylabel": "|x(t) - x*|"}
    elif name == "fig4":
        for beta in _list(p, "betas"):
            runs.append(RunSpec(f"ds_beta{_fmt(beta)}", f"beta={_fmt(beta)}", "ds", problem,
                                _ode_params(p, _num(p, "alpha"), beta, _num(p, "eta")),
                                ("lyapunov_monotone",)))
        pre.plot = {"metric": "dist_to_zero", "xlabel": "t", "ylabel": "|x(t) - x*|"}
    elif name == "fig5":
        for beta in _list(p, "betas"):
            runs.append(RunSpec(f"ed_beta{_fmt(beta)}", f"beta={_fmt(beta)}", "ed", problem,
                                _ed_params(p, beta, _num(p, "eta")), ALL_GATES))
        pre.plot = {"metric": "dist_to_zero", "xlabel": "k", "ylabel": "|x_k - x*|"}
    elif name == "custom":
        _build_custom(pre, p)
    else:  # pragma: no cover - resolve_parameters rejects unknown names
        raise ConfigInvalid(f"unknown preset {name!r}")
    return pre


def _build_custom(pre, p):
    method = p["method"]
    if method not in CUSTOM_METHODS:
        raise ConfigInvalid(f"method {method!r} not one of {CUSTOM_METHODS}")
    problem = pre.problem
    if p["x0"] is None:
        from ..operators import load_problem
        dim = load_problem(problem).dim
        p["x0"] = [1.0] * dim
    if p["v0"] is None:
        p["v0"] = [1.0] * len(_vec(p, "x0"))
    alpha, beta, eta = _num(p, "alpha"), _num(p, "beta"), _num(p, "eta")
    if method == "ds":
        params, gates = _ode_params(p, alpha, beta, eta), ALL_GATES
        pre.plot = {"metric": "dist_to_zero", "xlabel": "t", "ylabel": "|x(t) - x*|"}
    elif method == "sys6":
        params = _ode_params(p, alpha)
        params.update(b=_num(p, "b"), lambda_scale=_num(p, "lambda_scale"))
        gates = ("converged",)
        pre.plot = {"metric": "dist_to_zero", "xlabel": "t", "ylabel": "|x(t) - x*|"}
    elif method in ("ed", "raw_al"):
        params, gates = _ed_params(p, beta, eta), ALL_GATES
        pre.plot = {"metric": "dist_to_zero", "xlabel": "k", "ylabel": "|x_k - x*|"}
    elif method == "cripas":
        k0 = None if p["k0"] is None else _num(p, "k0")
        params, gates = _cripas_params(p, eta, _num(p, "lam"), k0), ("converged",)
        pre.plot = {"metric": "dist_to_zero", "xlabel": "n", "ylabel": "|x_n - x*|"}
    else:
        params = {"gamma": _num(p, "gamma"), "x0": _vec(p, "x0")}
        params.update(_stop(p))
        gates = ("converged",)
        pre.plot = {"metric": "dist_to_zero", "xlabel": "n", "ylabel": "|x_n - x*|"}
    pre.runs.append(RunSpec(method, method, method, problem, params, gates))
