"""Command-line front end: ``finslerlab <command> [flags]``.

JSON output has the top-level keys tool_version, command, config_echo,
results and verdicts, with sorted keys and floats printed to 17 significant
digits.  Exit codes: 0 success, 1 a check failed or a point was unusable,
2 usage or parse error.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .catalog import DEFAULTS, DESCRIPTIONS, builtin, names, verify_example
from .classify import classify_metric
from .connections import connection_bundle
from .dsl import Bindings, MetricSpec, parse_metric
from .errors import DSLSyntaxError, FinslerLabError, UnknownIdentifier
from .sampling import sample_points
from .scfield import VectorFieldSpec, check_condition, sc_detect
from .tensors import domain_probe, fundamental_bundle

COMMANDS = ("eval", "classify", "scfind", "check", "verify", "catalog-list")
TENSORS = ("F", "g", "g_inv", "cartan", "C_mixed", "C_vec", "h", "spray", "N", "berwald_conn",
           "berwald", "cartan_conn", "landsberg", "T", "T2", "domain", "all")
KIND_MAP = {"sc": "SC", "c": "C", "f": "F", "cc": "CC"}
FIELD_KIND = {"sc": "generic", "c": "concurrent", "f": "gradient", "cc": "conformal"}
METRICS_DIR = Path(__file__).with_name("metrics")


class UsageError(Exception):
    pass


# serialization ------------------------------------------------------------

def _num(v: float) -> str:
    if math.isnan(v):
        return '"nan"'
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def to_json(obj) -> str:
    """Deterministic JSON: sorted keys, 17 significant digits, non-finite as strings."""
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{_str(k)}: {to_json(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(to_json(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return to_json(obj.tolist())
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    return _str(str(obj))


def _str(s: str) -> str:
    import json
    return json.dumps(s, ensure_ascii=True)


def to_text(obj, prefix: str = "") -> list[str]:
    lines = []
    if isinstance(obj, dict):
        for k in sorted(obj, key=str):
            lines.extend(to_text(obj[k], f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(obj, (list, tuple)) and any(isinstance(v, (dict, list, tuple)) for v in obj):
        for i, v in enumerate(obj):
            lines.extend(to_text(v, f"{prefix}[{i}]"))
    else:
        if isinstance(obj, (list, tuple, np.ndarray)):
            val = "[" + ", ".join(f"{float(v):.6g}" if isinstance(v, (float, int)) else str(v)
                                  for v in np.asarray(obj, dtype=object).ravel()) + "]"
        elif isinstance(obj, float):
            val = f"{obj:.10g}"
        else:
            val = str(obj)
        lines.append(f"{prefix}: {val}")
    return lines


# argument handling --------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    catalog_help = "; ".join(f"{n} ({', '.join(f'{k}={v}' for k, v in DEFAULTS[n].items())})"
                             for n in names())
    ap = argparse.ArgumentParser(
        prog="finslerlab", description="Finsler tensor calculator and special-class checker.",
        epilog=f"catalog metrics: {catalog_help}")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--metric", help="metric file (.fm) or catalog name")
    ap.add_argument("--example", help="catalog name")
    ap.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                    help="override a metric parameter (repeatable)")
    ap.add_argument("--point", action="append", default=[], metavar="x=..;y=..",
                    help="tangent point, e.g. 'x=1,0;y=0,1' (repeatable)")
    ap.add_argument("--x", help="base point, comma separated")
    ap.add_argument("--ysamples", type=int, help="y-directions per base point")
    ap.add_argument("--xsamples", type=int, help="number of sampled points")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--format", choices=("json", "text"), default="json")
    ap.add_argument("--out", help="write the report here instead of stdout")
    ap.add_argument("--field", help="vector field 'B1;B2;...'")
    ap.add_argument("--kind", choices=tuple(KIND_MAP), help="condition to check")
    ap.add_argument("--potential", help="scalar f (kind f) or sigma (kind cc)")
    ap.add_argument("--tensor", choices=TENSORS, default="g")
    return ap


def _floats(text: str, what: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise UsageError(f"cannot parse {what} {text!r}") from None


def parse_point(text: str, dim: int) -> Bindings:
    parts = {}
    for chunk in text.split(";"):
        if "=" not in chunk:
            raise UsageError(f"point must look like 'x=..;y=..', got {text!r}")
        key, val = chunk.split("=", 1)
        parts[key.strip()] = _floats(val, "point")
    if set(parts) != {"x", "y"}:
        raise UsageError(f"point needs exactly x= and y=, got {text!r}")
    if len(parts["x"]) != dim or len(parts["y"]) != dim:
        raise UsageError(f"point {text!r} does not have {dim} coordinates in x and y")
    return Bindings(parts["x"], parts["y"])


def _overrides(items: Sequence[str]) -> dict:
    out = {}
    for it in items:
        if "=" not in it:
            raise UsageError(f"--param expects NAME=VALUE, got {it!r}")
        k, v = it.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            out[k.strip()] = v.strip()
    return out


def load_metric(args):
    """(spec, artifacts or None, source description)."""
    if bool(args.metric) == bool(args.example):
        raise UsageError("give exactly one of --metric or --example")
    ov = _overrides(args.param)
    name = args.example or args.metric
    path = Path(name)
    if args.metric and not path.is_file() and (METRICS_DIR / name).is_file():
        path = METRICS_DIR / name
    if args.metric and path.is_file():
        spec = parse_metric(path.read_text())
        bad = set(ov) - set(spec.params)
        if bad:
            raise UsageError(f"unknown parameter(s) for {name}: {', '.join(sorted(bad))}")
        return spec.with_params(**{k: float(v) for k, v in ov.items()}), None, {"file": path.name}
    if name in DEFAULTS:
        spec, art = builtin(name, **ov)
        return spec, art, {"builtin": name}
    raise UsageError(f"no metric file or catalog entry named {name!r}")


# commands -----------------------------------------------------------------

def _tensor_values(spec: MetricSpec, p: Bindings, which: str) -> dict:
    fb = fundamental_bundle(spec, p)
    out = {}
    want = TENSORS[:-1] if which == "all" else (which,)
    simple = {"F": lambda: fb.F, "g": lambda: fb.g.data,
              "g_inv": lambda: fb.g_inv.data if fb.g_inv is not None else "degenerate",
              "cartan": lambda: fb.C.data, "h": lambda: fb.h.data,
              "C_mixed": lambda: fb.C_mixed.data if fb.C_mixed is not None else "degenerate",
              "C_vec": lambda: fb.C_vec.data if fb.C_vec is not None else "degenerate"}
    cb = None
    for w in want:
        if w in simple:
            out[w] = simple[w]()
        elif w == "domain":
            st = domain_probe(spec, p)
            out[w] = {"in_domain": st.in_domain, "smooth": st.smooth,
                      "nondegenerate": st.nondegenerate, "positive_definite": st.positive_definite,
                      "leading_minors": list(st.leading_minors), "blowup": st.blowup}
        else:
            if not fb.nondegenerate:
                out[w] = "degenerate"
                continue
            cb = cb or connection_bundle(spec, p)
            out[w] = {"spray": cb.G, "N": cb.N, "berwald_conn": cb.G_conn, "berwald": cb.G_tensor,
                      "cartan_conn": cb.Gamma, "landsberg": cb.L, "T": cb.T4, "T2": cb.T2}[w].data
    return out


def cmd_eval(args, spec, art):
    pts = [parse_point(t, spec.dim) for t in args.point]
    if args.x and args.ysamples:
        from .sampling import sample_directions
        x = _floats(args.x, "--x")
        pts += [Bindings(x, y) for y in sample_directions(spec, x, args.ysamples, args.seed)]
    if not pts:
        raise UsageError("eval needs --point (or --x with --ysamples)")
    results, ok = [], True
    for p in pts:
        entry = {"x": list(p.x), "y": list(p.y)}
        try:
            entry["values"] = _tensor_values(spec, p, args.tensor)
        except FinslerLabError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
            ok = False
        results.append(entry)
    return {"points": results}, {"all_points_evaluated": ok}, ok


def cmd_classify(args, spec, art):
    rep = classify_metric(spec, seed=args.seed, n_points=args.xsamples or 20,
                          tol=args.tol if args.tol is not None else 1e-8)
    return rep.to_dict(), {k: v["verdict"] for k, v in rep.verdicts.items()}, True


def _expected_fields(art):
    out = []
    if art is not None:
        if art.sc_direction is not None:
            out.append(art.sc_direction)
        out.extend(ef.field for ef in art.fields if ef.condition == "SC" and ef.should_pass)
    return out


def cmd_scfind(args, spec, art):
    xs = [_floats(args.x, "--x")] if args.x else (args.xsamples or 5)
    rep = sc_detect(spec, xs, args.ysamples, tol=args.tol if args.tol is not None else 1e-8,
                    seed=args.seed, expected=_expected_fields(art))
    verdicts = {"consistent_dimension": rep.consistent_dimension,
                "candidate_found": not isinstance(rep.candidate_field, str)}
    return rep.to_dict(), verdicts, True


def cmd_check(args, spec, art):
    if not args.kind:
        raise UsageError("check needs --kind sc|c|f|cc")
    if not args.field and not args.potential:
        raise UsageError("check needs --field and/or --potential")
    fld = VectorFieldSpec.parse(args.field or "", spec.dim, FIELD_KIND[args.kind], args.potential)
    if args.point:
        samples = [parse_point(t, spec.dim) for t in args.point]
    else:
        samples = sample_points(spec, args.xsamples or 20, args.seed)
    rep = check_condition(spec, fld, KIND_MAP[args.kind], samples,
                          tol=args.tol if args.tol is not None else 1e-7)
    res = rep.to_dict()
    res["field"] = fld.to_dict()
    res["samples"] = [{"x": list(p.x), "y": list(p.y)} for p in samples]
    return res, {KIND_MAP[args.kind]: rep.passed}, rep.passed


def cmd_verify(args, spec, art):
    name = args.example or args.metric
    if art is None:
        raise UsageError("verify needs a catalog metric (--example NAME)")
    rep = verify_example(name, tol=args.tol if args.tol is not None else 1e-7,
                         n_points=args.xsamples or 50, seed=args.seed, **_overrides(args.param))
    return rep.to_dict(), {"passed": rep.passed}, rep.passed


def cmd_catalog_list(args):
    res = [{"name": n, "defaults": DEFAULTS[n], "description": DESCRIPTIONS[n]} for n in names()]
    return {"metrics": res}, {}, True


HANDLERS = {"eval": cmd_eval, "classify": cmd_classify, "scfind": cmd_scfind,
            "check": cmd_check, "verify": cmd_verify}


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "out"}


def run_cli(argv: Sequence[str] | None = None) -> int:
    ap = _parser()
    try:
        args = ap.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "catalog-list":
            results, verdicts, ok = cmd_catalog_list(args)
        else:
            spec, art, _ = load_metric(args)
            results, verdicts, ok = HANDLERS[args.command](args, spec, art)
    except (UsageError, DSLSyntaxError, UnknownIdentifier) as exc:
        print(ap.format_usage().rstrip(), file=sys.stderr)
        print(f"finslerlab: error: {exc}", file=sys.stderr)
        return 2
    except (FinslerLabError, ValueError) as exc:
        print(f"finslerlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    report = {"tool_version": __version__, "command": args.command, "config_echo": _echo(args),
              "results": results, "verdicts": verdicts}
    text = to_json(report) if args.format == "json" else "\n".join(to_text(report))
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0 if ok else 1


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
