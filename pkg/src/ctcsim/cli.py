"""Command line entry points: ``run``, ``examples`` and ``axioms``.

Reports are JSON documents written to standard output or ``--out``. Exit
codes: 0 success, 1 validation error, 2 evaluation refusal (graph is not
CV-local), 3 axiom suite produced an unexpected verdict.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import axioms, scenarios
from .dctc import DMixMorphism, ProbeConfig, eval_dmix
from .graphs import (
    Diagram,
    GraphError,
    NotCVLocal,
    cut_invariance,
    eval_diagram,
)
from .pctc import MixSymMorphism, pctc_run
from .qcore import DensityMatrix, DimensionError, von_neumann_entropy
from .scenario_file import ScenarioError, _pairs, diagram_to_file, parse_scenario

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_REFUSED = 2
EXIT_UNEXPECTED = 3

FIXTURES = Path(__file__).with_name("fixtures")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def matrix_json(m: np.ndarray) -> list:
    return _pairs(np.asarray(m))


def _fixed_point_json(label, fp) -> dict:
    d = fp.diagnostics.as_dict()
    return {
        "node": label,
        "state": matrix_json(fp.state.matrix),
        "dims": list(fp.state.dims),
        "entropy": float(von_neumann_entropy(fp.state)),
        "diagnostics": d,
    }


def run_state(morphism, rho: DensityMatrix, labels=()) -> dict:
    """Evaluate a DMix or Mix_sym morphism on ``rho`` and describe the outcome."""
    if isinstance(morphism, DMixMorphism):
        trace: list = []
        out = eval_dmix(morphism, rho, trace)
        names = list(labels) + [f"step{i}" for i in range(len(labels), len(trace))]
        return {
            "model": "dctc",
            "output": matrix_json(out.matrix),
            "output_dims": list(out.dims),
            "fixed_points": [_fixed_point_json(n, fp) for n, fp in zip(names, trace)],
            "probability": 1.0,
            "non_normalizable": False,
        }
    r = pctc_run(morphism, rho)
    rep = {
        "model": "pctc",
        "output": matrix_json(r.state.matrix) if r.state is not None else None,
        "output_dims": list(r.state.dims) if r.state is not None else None,
        "fixed_points": [],
        "probability": r.probability,
        "non_normalizable": r.state is None,
    }
    if isinstance(morphism, MixSymMorphism) and not morphism.is_zero:
        rep["normalization"] = morphism.normalization()
    return rep


def _parse_plan(text: str | None):
    if text is None or text == "all":
        return text
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise CliError(f"--cut-plan must be 'all' or a comma separated edge list, got {text!r}",
                       EXIT_INVALID) from None


def evaluate(d: Diagram, rho: DensityMatrix, model: str, plan=None, probes: int = 20,
             seed: int = 0, experimental: bool = False) -> dict:
    warnings = []
    try:
        if plan == "all":
            plans, worst = cut_invariance(d, model, ProbeConfig(count=probes, seed=seed),
                                          experimental=experimental)
            ev = eval_diagram(d, model, plans[0] if plans else None,
                              experimental=experimental, details=True)
            extra = {"cut_plans": [list(p) for p in plans], "plan_deviation": worst}
        else:
            ev = eval_diagram(d, model, plan, experimental=experimental, details=True)
            extra = {}
    except NotCVLocal as exc:
        raise CliError(f"evaluation refused: {exc}", EXIT_REFUSED) from None
    except (GraphError, DimensionError) as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    if experimental and model == "pctc":
        warnings.append("experimental evaluation of a graph that may not be CV-local")
    rep = run_state(ev.morphism, rho, ev.interaction_nodes)
    if ev.cut is not None:
        rep["cut_edges"] = list(ev.cut.cut_edges)
    if rep["non_normalizable"]:
        warnings.append("post-selection probability below threshold: non-normalizable")
    rep.update(extra)
    rep["warnings"] = warnings
    return rep


def cmd_run(path, model=None, plan=None, probes=None, seed=None, tol=None,
            experimental=False) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}", EXIT_INVALID) from None
    try:
        sf = parse_scenario(text)
        d = sf.build_diagram()
        rho = sf.build_state(d)
    except ScenarioError as exc:
        raise CliError(str(exc), EXIT_INVALID) from None
    opts = sf.options
    model = model or sf.model
    plan = plan if plan is not None else opts.get("cut_plan")
    if isinstance(plan, list):
        plan = tuple(plan)
    probes = probes if probes is not None else int(opts.get("probes", 20))
    seed = seed if seed is not None else int(opts.get("seed", 0))
    rep = {"name": sf.name}
    rep.update(evaluate(d, rho, model, plan, probes, seed, experimental))
    tol = tol if tol is not None else opts.get("tol")
    if tol is not None and "plan_deviation" in rep:
        rep["plan_invariant"] = rep["plan_deviation"] <= float(tol)
    return rep


def _example(name: str, model: str | None):
    if name not in scenarios.SCENARIOS:
        raise CliError(f"unknown example {name!r}; choose from {sorted(scenarios.SCENARIOS)}",
                       EXIT_INVALID)
    fn = scenarios.SCENARIOS[name]
    if name == "grandfather":
        return fn(model or "dctc")
    return fn()


def cmd_examples(name: str | None = None, model: str | None = None) -> dict:
    if name is None:
        return {"examples": sorted(scenarios.SCENARIOS)}
    sc = _example(name, model)
    model = model or sc.model
    try:
        items = sc.run(model)
    except NotCVLocal as exc:
        raise CliError(f"evaluation refused: {exc}", EXIT_REFUSED) from None
    ev = sc.morphism(model, details=True)
    runs = []
    for (label, rho), item in zip(sc.inputs, items):
        r = run_state(ev.morphism, rho, ev.interaction_nodes)
        r["input"] = label
        if item.expected is not None:
            r["expected"] = (item.expected if isinstance(item.expected, str)
                             else matrix_json(item.expected.matrix))
            r["deviation"] = item.deviation
            r["ok"] = item.ok
            r["provenance"] = sc.provenance.get(label)
        runs.append(r)
    return {"name": sc.name, "model": model, "notes": sc.notes, "runs": runs}


def cmd_axioms(model: str = "dctc", dims=(2, 3), trials: int = 50, seed: int = 0,
               tol: float = axioms.DEFAULT_TOL, probes: int = 3) -> dict:
    models = axioms.MODELS if model == "all" else (model,)
    reports = []
    for m in models:
        reports += axioms.run_suite(m, trials=trials, dims=tuple(dims), seed=seed, tol=tol,
                                    probes=probes)
    return {
        "dims": list(dims),
        "trials": trials,
        "seed": seed,
        "reports": [r.as_dict() for r in reports],
        "all_as_expected": all(r.as_expected for r in reports),
    }


def export_example(name: str, model: str | None = None, which: int = 0) -> str:
    sc = _example(name, model)
    label, rho = sc.inputs[which]
    sf = diagram_to_file(sc.diagram, rho, model or sc.model, name=f"{sc.name}:{label}")
    return sf.dumps()


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctcsim", description="Simulate quantum circuits with "
                                "closed timelike curves under the D-CTC and P-CTC models.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--timing", action="store_true", help="include wall-clock timing")

    r = sub.add_parser("run", help="evaluate a scenario file")
    r.add_argument("file")
    r.add_argument("--model", choices=("dctc", "pctc"))
    r.add_argument("--seed", type=int)
    r.add_argument("--tol", type=float)
    r.add_argument("--cut-plan", help="comma separated edge indices, or 'all'")
    r.add_argument("--probes", type=int)
    r.add_argument("--experimental", action="store_true",
                   help="allow P-CTC evaluation of graphs that are not CV-local")
    common(r)

    e = sub.add_parser("examples", help="run a built-in example (omit the name to list them)")
    e.add_argument("name", nargs="?")
    e.add_argument("--model", choices=("dctc", "pctc"))
    e.add_argument("--export", action="store_true",
                   help="print the example as a scenario file instead of running it")
    common(e)

    a = sub.add_parser("axioms", help="run the randomized axiom suite")
    a.add_argument("--model", choices=("dctc", "pctc", "all"), default="all")
    a.add_argument("--dims", type=int, nargs="+", default=[2, 3])
    a.add_argument("--trials", type=int, default=50)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--tol", type=float, default=axioms.DEFAULT_TOL)
    a.add_argument("--probes", type=int, default=3)
    common(a)
    return p


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    start = time.perf_counter()
    try:
        if args.command == "run":
            rep = cmd_run(args.file, args.model, _parse_plan(args.cut_plan), args.probes,
                          args.seed, args.tol, args.experimental)
            code = EXIT_OK
        elif args.command == "examples":
            if args.export:
                if args.name is None:
                    raise CliError("--export needs an example name", EXIT_INVALID)
                _emit(export_example(args.name, args.model), args.out)
                return EXIT_OK
            rep = cmd_examples(args.name, args.model)
            code = EXIT_OK
        else:
            rep = cmd_axioms(args.model, args.dims, args.trials, args.seed, args.tol, args.probes)
            code = EXIT_OK if rep["all_as_expected"] else EXIT_UNEXPECTED
    except CliError as exc:
        print(f"ctcsim: {exc}", file=sys.stderr)
        return exc.code
    if args.timing:
        rep["timing_seconds"] = round(time.perf_counter() - start, 6)
    _emit(json.dumps(rep, indent=2) + "\n", args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
