"""Command-line interface.

Commands: ``classify``, ``validate``, ``certify``, ``simulate``, ``portrait``
and ``demo islm``.  Failures exit with status 1 and write one JSON line
``{"error": <reason>, "message": <text>}`` to standard error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .branching import EulerBranching, SwitchingSchedule, solve_switched, validate_branching
from .chaos import ChaosOptions, certify
from .errors import BranchLabError
from .expr import Expr
from .fields import PlanarField, Rect, find_singular_points
from .macro import (
    CyclePhases,
    Model,
    cycle_schedule,
    islm_field,
    load_model,
    qyml_field,
    validate_properties,
    verify_propositions,
)
from .svg import render_portrait, shading_from_certificate

__all__ = ["main", "RunConfig", "atomic_write", "parse_field", "resolve_model"]

_MODEL_CURVES = ("IS", "LM", "QY", "ML")


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: Optional[str] = None
    f: Optional[str] = None
    g: Optional[str] = None
    region: Optional[Rect] = None
    out: Optional[str] = None
    rtol: float = 1e-9
    json: bool = False
    force: bool = False


class CliError(Exception):
    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


def atomic_write(path: str, data: str) -> None:
    """Write ``data`` to ``path`` through a temporary file in the same directory."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _split_top(text: str) -> List[str]:
    parts, depth, start = [], 0, 0
    for k, c in enumerate(text):
        if c == "(":
            depth += 1
        elif c == ")":
            depth -= 1
        elif c == "," and depth == 0:
            parts.append(text[start:k])
            start = k + 1
    parts.append(text[start:])
    return parts


def parse_field(text: str, name: str) -> PlanarField:
    """Field from ``"EXPR_X, EXPR_Y"`` in the variables ``x, y`` (aliases ``Y, R``)."""
    parts = _split_top(text)
    if len(parts) != 2:
        raise CliError("InvalidInput", f"field {name} needs two comma-separated components")
    ex, ey = (Expr.parse(p.strip(), ("x", "y", "Y", "R")) for p in parts)

    def func(x, y):
        b = {"x": x, "y": y, "Y": x, "R": y}
        return ex(**b), ey(**b)

    return PlanarField(name, func)


def resolve_model(ref: str) -> Path:
    """A model path, falling back to the packaged model files by name."""
    p = Path(ref)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else p.name + ".json"
    packaged = resources.files("branchlab") / "models" / name
    if packaged.is_file():
        return Path(str(packaged))
    raise CliError("FileNotFound", f"model file {ref!r} not found")


def _load(cfg: RunConfig):
    """``(eb, model)``; ``model`` is None for expression-defined fields."""
    if cfg.model:
        model = load_model(resolve_model(cfg.model))
        if cfg.region is not None:
            model = replace(model, domain=cfg.region)
        return model.branching(force=cfg.force), model
    if cfg.f and cfg.g:
        if cfg.region is None:
            raise CliError("InvalidInput", "--region is required with --f/--g")
        return EulerBranching(parse_field(cfg.f, "f"), parse_field(cfg.g, "g"), cfg.region), None
    raise CliError("InvalidInput", "give --model or both --f and --g")


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        atomic_write(cfg.out, text)
    if cfg.json or not cfg.out:
        sys.stdout.write(text)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _fail(reason: str, message: str) -> int:
    sys.stderr.write(json.dumps({"error": reason, "message": message}, sort_keys=True) + "\n")
    return 1


# -- commands -------------------------------------------------------------------


def cmd_classify(cfg: RunConfig) -> int:
    eb, _ = _load(cfg)
    out = {label: [sp.to_dict() for sp in find_singular_points(fld, eb.domain)] for label, fld in (("f", eb.f), ("g", eb.g))}
    _emit(cfg, _dumps(out))
    return 0


def cmd_validate(cfg: RunConfig) -> int:
    if cfg.model:
        model = load_model(resolve_model(cfg.model))
        domain = cfg.region or model.domain
        report = validate_properties(model.funcs, model.params, domain=domain)
        out = {"properties": report.to_dict()}
        eb = EulerBranching(islm_field(model.funcs, model.params), qyml_field(model.funcs, model.params), domain)
        br = validate_branching(eb)
        out["branching"] = br.to_dict()
        out["pass"] = bool(report.passed and br.passed)
        _emit(cfg, _dumps(out))
        if not report.passed:
            return _fail("PropertyViolation", "failed conditions: " + ", ".join(report.failed()))
        if not br.passed:
            return _fail("BranchingViolated", "f = g on the validation grid")
        return 0
    eb, _ = _load(cfg)
    br = validate_branching(eb)
    _emit(cfg, _dumps({"branching": br.to_dict(), "pass": br.passed}))
    return 0 if br.passed else _fail("BranchingViolated", "f = g on the validation grid")


def _certify(cfg: RunConfig, eb: EulerBranching):
    cert = certify(eb, opts=ChaosOptions(rtol=cfg.rtol))
    out = cert.to_dict()
    out["branching"] = validate_branching(eb).to_dict()
    return cert, out


def cmd_certify(cfg: RunConfig) -> int:
    eb, _ = _load(cfg)
    cert, out = _certify(cfg, eb)
    _emit(cfg, _dumps(out))
    if not cert.flags["devaney"]:
        return _fail(cert.reason or "Refused", "; ".join(cert.refusals) or "not certified")
    return 0


def _schedule(args) -> tuple:
    if args.schedule and args.cycle:
        raise CliError("InvalidInput", "give either --schedule or --cycle, not both")
    if args.cycle:
        phases = CyclePhases.parse(args.cycle)
        return cycle_schedule(phases), phases.total
    if args.schedule:
        return SwitchingSchedule.from_json(Path(args.schedule).read_text()), None
    return SwitchingSchedule("F", ()), None


def _point(text: str) -> np.ndarray:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 2:
        raise CliError("InvalidInput", f"expected x,y, got {text!r}")
    return np.array(vals)


def cmd_simulate(cfg: RunConfig, args) -> int:
    eb, _ = _load(cfg)
    sched, total = _schedule(args)
    horizon = args.t if args.t is not None else total
    if horizon is None:
        raise CliError("InvalidInput", "--t is required unless --cycle gives the horizon")
    if args.x0 is None:
        raise CliError("InvalidInput", "--x0 is required")
    sol = solve_switched(eb, _point(args.x0), sched, horizon, rtol=cfg.rtol, confine=args.confine)
    if cfg.out:
        atomic_write(cfg.out, sol.to_csv())
    if cfg.json or not cfg.out:
        if cfg.json:
            summary = {
                "schedule": json.loads(sched.to_json()),
                "horizon": horizon,
                "t_end": sol.t_end,
                "end": [float(v) for v in sol(sol.t_end)],
                "domain_exit": sol.domain_exit,
            }
            sys.stdout.write(_dumps(summary))
        else:
            sys.stdout.write(sol.to_csv())
    if sol.domain_exit:
        return _fail("DomainExit", f"solution left the domain at t={sol.t_end:g}")
    return 0


def _portrait(eb: EulerBranching, model: Optional[Model], shade) -> str:
    eq = []
    for label, fld in (("f", eb.f), ("g", eb.g)):
        eq.extend((label, sp) for sp in find_singular_points(fld, eb.domain))
    labels = _MODEL_CURVES if model is not None else ("f_x=0", "f_y=0", "g_x=0", "g_y=0")
    title = f"model: {model.name}" if model is not None else ""
    return render_portrait(eb, chaotic_set=shade, equilibria=eq, curve_labels=labels, title=title)


def cmd_portrait(cfg: RunConfig, args) -> int:
    eb, model = _load(cfg)
    shade = None
    if args.certificate:
        shade = shading_from_certificate(json.loads(Path(args.certificate).read_text()))
    elif args.shade:
        shade = shading_from_certificate(certify(eb, opts=ChaosOptions(rtol=cfg.rtol)))
    svg = _portrait(eb, model, shade)
    if cfg.out:
        atomic_write(cfg.out, svg)
    else:
        sys.stdout.write(svg)
    return 0


def cmd_demo(cfg: RunConfig, args) -> int:
    if args.name != "islm":
        raise CliError("InvalidInput", f"unknown demo {args.name!r}")
    cfg = replace(cfg, model=cfg.model or "linear_reference")
    eb, model = _load(cfg)
    cert, out = _certify(cfg, eb)
    props = verify_propositions(model.funcs, model.params, eb.domain)
    eq_f, eq_g = props["islm"]["location"], props["qyml"]["location"]
    summary = {
        "model": model.name,
        "certified": cert.certified,
        "flags": cert.flags,
        "provenance": cert.provenance.get("row"),
        "variant": cert.provenance.get("variant"),
        "equilibria": {"islm": eq_f, "qyml": eq_g},
        "other_branch_R_dot": {
            "g_at_islm_eq": float(eb.g(eq_f)[1]),
            "f_at_qyml_eq": float(eb.f(eq_g)[1]),
        },
        "propositions_hold": props["holds"],
        "refusals": list(cert.refusals),
    }
    if cfg.out:
        outdir = Path(cfg.out)
        atomic_write(str(outdir / "certificate.json"), _dumps(out))
        atomic_write(str(outdir / "portrait.svg"), _portrait(eb, model, shading_from_certificate(cert)))
        sched = cycle_schedule(CyclePhases.parse("R:2,E:3,R:2,E:3"))
        sol = solve_switched(eb, eq_f, sched, 10.0, rtol=cfg.rtol)
        atomic_write(str(outdir / "cycle.csv"), sol.to_csv())
    sys.stdout.write(_dumps(summary))
    if not cert.flags["devaney"]:
        return _fail(cert.reason or "Refused", "; ".join(cert.refusals) or "not certified")
    return 0


# -- argument parsing ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file (or the name of a packaged model)")
    common.add_argument("--f", help="branch f as 'EXPR_X, EXPR_Y' in x, y")
    common.add_argument("--g", help="branch g as 'EXPR_X, EXPR_Y' in x, y")
    common.add_argument("--region", type=Rect.parse, help="x0,y0,x1,y1")
    common.add_argument("--out", help="output path (directory for demo)")
    common.add_argument("--rtol", type=float, default=1e-9)
    common.add_argument("--json", action="store_true", help="print the report to standard output")
    common.add_argument("--force", action="store_true", help="build the model even if property checks fail")

    p = argparse.ArgumentParser(prog="branchlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("classify", parents=[common], help="singular points of both branches")
    sub.add_parser("validate", parents=[common], help="property and branching checks")
    sub.add_parser("certify", parents=[common], help="chaos certificate")
    sim = sub.add_parser("simulate", parents=[common], help="switched solution as CSV")
    sim.add_argument("--schedule", help="schedule JSON file")
    sim.add_argument("--cycle", help="economic cycle, e.g. R:2,E:3")
    sim.add_argument("--x0", help="initial point x,y")
    sim.add_argument("--t", type=float, help="horizon")
    sim.add_argument("--confine", action="store_true", help="stop when the solution leaves the region")
    por = sub.add_parser("portrait", parents=[common], help="SVG phase portrait")
    por.add_argument("--certificate", help="certificate JSON to shade")
    por.add_argument("--shade", action="store_true", help="certify first and shade the result")
    demo = sub.add_parser("demo", parents=[common], help="end-to-end demonstrations")
    demo.add_argument("name", choices=["islm"])
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command,
        model=args.model,
        f=args.f,
        g=args.g,
        region=args.region,
        out=args.out,
        rtol=args.rtol,
        json=args.json,
        force=args.force,
    )
    try:
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args)
        if args.command == "portrait":
            return cmd_portrait(cfg, args)
        return cmd_demo(cfg, args)
    except CliError as exc:
        return _fail(exc.reason, str(exc))
    except BranchLabError as exc:
        return _fail(exc.reason, str(exc))
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        return _fail("InvalidInput", str(exc))


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
