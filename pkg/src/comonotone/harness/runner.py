"""Run presets, collect reports and write the output files."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .. import __version__
from ..algorithms import CripasConfig, EdConfig, StoppingRule, run_cripas, run_ed, run_ppa, run_raw_al
from ..diagnostics import build_report
from ..dynamics import DynamicsConfig, Sys6Config, integrate_ds, integrate_sys6
from ..errors import IOFailure
from ..operators import load_problem
from ..trace import Trace
from .output import dumps_json, plot_svg, trace_csv, write_text
from .presets import RunSpec, build_preset, resolve_parameters

__all__ = ["execute_run", "run_preset", "PresetResult", "OUT_ENV", "SEED"]

OUT_ENV = "COMONOTONE_OUT"

#: Recorded in manifests; no computation draws random numbers.
SEED = 0


def _max_step(v):
    return np.inf if v is None else float(v)


def execute_run(spec: RunSpec) -> Trace:
    """Run one solver invocation and return its annotated trace."""
    op = load_problem(spec.problem)
    p = spec.params
    if spec.method == "ds":
        cfg = DynamicsConfig(alpha=p["alpha"], beta=p["beta"], eta=p["eta"], t0=p["t0"],
                             t_end=p["t_end"], x0=p["x0"], v0=p["v0"], rtol=p["rtol"],
                             atol=p["atol"], max_step=_max_step(p["max_step"]),
                             samples=p["samples"], method=p["method"],
                             allow_unproven=p["allow_unproven"])
        return integrate_ds(op, cfg)
    if spec.method == "sys6":
        cfg = Sys6Config(alpha=p["alpha"], b=p["b"], lambda_scale=p["lambda_scale"], t0=p["t0"],
                         t_end=p["t_end"], x0=p["x0"], v0=p["v0"], rtol=p["rtol"],
                         atol=p["atol"], max_step=_max_step(p["max_step"]),
                         samples=p["samples"], method=p["method"],
                         allow_unproven=p["allow_unproven"])
        return integrate_sys6(op, cfg)
    stop = StoppingRule(p["stop_mode"], p["stop_tol"])
    if spec.method in ("ed", "raw_al"):
        cfg = EdConfig(alpha=p["alpha"], beta=p["beta"], eta=p["eta"], k_start=p["k_start"],
                       max_iters=p["max_iters"], stop=stop, allow_unproven=p["allow_unproven"])
        fn = run_ed if spec.method == "ed" else run_raw_al
        return fn(op, cfg, p["x0"], p["x1"])
    if spec.method == "cripas":
        cfg = CripasConfig(b=p["b"], c_bar=p["c_bar"], a1=p["a1"], a2=p["a2"], k0=p["k0"],
                           lam=p["lam"], max_iters=p["max_iters"], stop=stop,
                           allow_unproven=p["allow_unproven"])
        return run_cripas(op, cfg, p["x_m1"], p["x0"], p["z_m1"])
    if spec.method == "ppa":
        return run_ppa(op, p["gamma"], p["x0"], stop, p["max_iters"])
    raise ValueError(f"unknown method {spec.method!r}")


@dataclass
class PresetResult:
    preset: str
    passed: bool
    paths: List[Path]
    report: dict
    traces: Dict[str, Trace] = field(default_factory=dict)


def _run_summary(spec, trace, op):
    rep = build_report(trace, op)
    gated = {g: rep.verdicts()[g] for g in spec.gates}
    return {
        "method": spec.method,
        "label": spec.label,
        "parameters": spec.params,
        "gates": list(spec.gates),
        "gated_verdicts": gated,
        "passed": rep.passed(spec.gates),
        "iterations": trace.meta.get("iterations"),
        "samples": len(trace),
        "report": rep.to_dict(),
    }


def run_preset(name: str, overrides: Optional[dict] = None, *, config: Optional[dict] = None,
               out_dir=None, workers: int = 1, write: bool = True) -> PresetResult:
    """Run preset ``name`` and write its CSV, JSON report, SVG plot and manifest.

    ``config`` is a flat parameter mapping (from a config file or a manifest's
    ``parameters``); ``overrides`` take precedence over it.  ``out_dir``
    defaults to ``$COMONOTONE_OUT`` or the working directory.  The result's
    ``passed`` is True iff every gated verdict of every run is PASS.
    """
    params = resolve_parameters(name, config, overrides)
    preset = build_preset(name, params)
    op = load_problem(preset.problem)

    if workers > 1 and len(preset.runs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(execute_run, preset.runs))
    else:
        traces = [execute_run(s) for s in preset.runs]

    runs = {}
    for spec, trace in zip(preset.runs, traces):
        runs[spec.name] = _run_summary(spec, trace, op)
    comparison = []
    for ed_name, cr_name in preset.comparison_pairs:
        a, b = runs[ed_name], runs[cr_name]
        comparison.append({
            "ed_run": ed_name, "cripas_run": cr_name,
            "ed_iterations": a["iterations"], "cripas_iterations": b["iterations"],
            "ed_converged": a["report"]["converged"].get("value"),
            "cripas_converged": b["report"]["converged"].get("value"),
            "ed_le_cripas": bool(a["iterations"] <= b["iterations"]),
            "informational": True,
        })
    passed = all(r["passed"] for r in runs.values())
    report = {"preset": name, "passed": passed, "runs": runs, "comparison": comparison}

    paths: List[Path] = []
    if write:
        out = Path(out_dir if out_dir is not None else os.environ.get(OUT_ENV, "."))
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise IOFailure(f"cannot create output directory {out}: {exc}") from exc
        files = {}
        for spec, trace in zip(preset.runs, traces):
            files[f"{name}_{spec.name}.csv"] = trace_csv(trace)
        files[f"{name}_report.json"] = dumps_json(report)
        metric = preset.plot.get("metric", "dist_to_zero")
        series = {}
        for spec, trace in zip(preset.runs, traces):
            y = trace.derived.get(metric)
            if y is None or np.all(np.isnan(y)):
                y = trace.derived["res_yosida"]
            series[spec.label] = (trace.index, y)
        files[f"{name}_plot.svg"] = plot_svg(series, {**preset.plot, "title": name})
        manifest = {
            "preset": name,
            "parameters": params,
            "seed": SEED,
            "version": __version__,
            "outputs": sorted(files) + [f"{name}_manifest.json"],
        }
        files[f"{name}_manifest.json"] = dumps_json(manifest)
        for fname, text in files.items():
            write_text(out / fname, text)
            paths.append(out / fname)
    return PresetResult(preset=name, passed=passed, paths=paths, report=report,
                        traces={s.name: t for s, t in zip(preset.runs, traces)})
