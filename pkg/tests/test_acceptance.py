"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the summary lines.
"""
import itertools
import json

import numpy as np
import pytest

from finslerlab.catalog import builtin, names, verify_example
from finslerlab.classify import classify_metric, semi_c_fit
from finslerlab.cli import run_cli
from finslerlab.connections import connection_bundle, t_tensor
from finslerlab.dsl import Bindings, parse_metric
from finslerlab.expr import xvar, yvar
from finslerlab.fd import default_step, stencil_partial
from finslerlab.sampling import sample_directions, sample_points
from finslerlab.scfield import (
    VectorFieldSpec, check_condition, principal_angles, raised_gradient, sc_detect, sc_nullspace_at,
)
from finslerlab.symdiff import differentiate
from finslerlab.tape import compile_tape
from finslerlab.tensors import domain_probe, fundamental_bundle, point_values


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")


def _entries(rep, prefix):
    return [e for e in rep.entries if e["component"].startswith(prefix)
            and e["component"][1:].isdigit()]


def _eval(expr, pts, params):
    tape = compile_tape((expr,))
    return np.array([tape(p.x, p.y, params)[0] for p in pts])


def _rel(a, b, floor):
    return np.abs(a - b) / np.maximum(np.abs(b), floor)


# 1 ----------------------------------------------------------------------------

def test_criterion_1_conic_lift(capsys):
    problems = []
    for eps in (0.3, 0.5):
        rep = verify_example("conic_randers_lift", tol=1e-7, n_points=50, eps=eps)
        wanted = ["g11", "g22", "g12", "g33", "C111", "C112", "C122", "C222"]
        got = {e["component"]: e for e in rep.entries}
        for c in wanted:
            if not got[c]["passed"]:
                problems.append(f"eps={eps} {c} dev={got[c]['max_rel_dev']:.2e}")
        spec, art = builtin("conic_randers_lift", eps=eps)
        pts = sample_points(spec, 50, seed=0)
        sc = check_condition(spec, art.sc_direction, "SC", pts, tol=1e-8)
        if not sc.passed:
            problems.append(f"eps={eps} SC residual {sc.max_residual:.2e}")
        cc = check_condition(spec, VectorFieldSpec.parse("0;0;-x3", 3, kind="concurrent"), "C", pts,
                             tol=1e-6)
        if not cc.passed:
            problems.append(f"eps={eps} C-condition residual {cc.max_residual:.2e}")
    ok = not problems
    report(capsys, 1, ok, "conic g/C closed forms, SC field (0,0,f), concurrent field (0,0,-x3)"
           if ok else "; ".join(problems))
    assert ok, problems


# 2 ----------------------------------------------------------------------------

def test_criterion_2_ex5_2(capsys):
    spec, art = builtin("ex5_2")
    rep = verify_example("ex5_2", tol=1e-7, n_points=50)
    problems = [f"{e['component']} dev={e['max_rel_dev']:.2e}"
                for e in _entries(rep, "g") + _entries(rep, "C") if not e["passed"]]
    pts = sample_points(spec, 50, seed=0)
    nonzero = set()
    for p in pts:
        C = fundamental_bundle(spec, p).C.data
        for idx in itertools.combinations_with_replacement(range(4), 3):
            if abs(C[idx]) > 1e-9:
                nonzero.add("C" + "".join(str(i + 1) for i in idx))
    if nonzero != {"C111", "C113", "C133", "C333"}:
        problems.append(f"nonzero Cartan set {sorted(nonzero)}")
    e2 = np.array([[0.0], [1.0], [0.0], [0.0]])
    dims, angles = [], []
    for k, p in enumerate(sample_points(spec, 10, seed=1)):
        ns = sc_nullspace_at(spec, p.x, sample_directions(spec, p.x, 40, seed=k))
        dims.append(ns.dim)
        angles.append(float(np.max(principal_angles(ns.basis, e2))) if ns.dim == 1 else float("nan"))
        if ns.dim != 1 or not angles[-1] < 1e-6:
            e2_inside = float(principal_angles(ns.basis, e2)[0])
            problems.append(f"x={np.round(p.x, 3).tolist()}: null space dim {ns.dim}"
                            f" (e2 inside it, angle {e2_inside:.1e})")
            break
    ok = not problems
    report(capsys, 2, ok, "ex5_2 metric, Cartan support and SC null space span{e2}"
           if ok else "; ".join(problems))
    assert ok, problems


# 3 ----------------------------------------------------------------------------

def test_criterion_3_ex5_3(capsys):
    spec, art = builtin("ex5_3")
    pts = sample_points(spec, 50, seed=0)
    fbs = [fundamental_bundle(spec, p) for p in pts]
    problems = []
    for idx, _ in art.C:
        name = "C" + "".join(str(i + 1) for i in idx)
        comp = np.array([fb.C.data[idx] for fb in fbs])
        floor = np.array([1e-3 * np.max(np.abs(fb.C.data)) for fb in fbs])
        dev = float(np.max(_rel(comp, _eval(art.printed_component(name), pts, spec.params), floor)))
        if dev > 1e-6:
            problems.append(f"{name} dev={dev:.2e}")
    if len(art.C) != 15:
        problems.append(f"{len(art.C)} printed C components, expected 15")
    worst = 0.0
    xs = [p.x for p in sample_points(spec, 10, seed=1)]
    rep = sc_detect(spec, xs, 40, seed=0)
    for x, ns in zip(xs, rep.nullspaces):
        A5, A6 = spec.params["A5"], spec.params["A6"]
        d = np.array([0.0, 1.0, -A5 / A6, -x[0]])   # F1(x) = x1
        d /= np.linalg.norm(d)
        if ns.dim != 1:
            problems.append(f"null space dim {ns.dim} at x={np.round(x, 3).tolist()}")
            continue
        worst = max(worst, float(principal_angles(ns.basis, d[:, None])[0]))
    if worst >= 1e-5:
        problems.append(f"direction angle {worst:.2e}")
    ok = not problems
    report(capsys, 3, ok, f"ex5_3 fifteen C components, SC direction angle {worst:.1e}"
           if ok else "; ".join(problems))
    assert ok, problems


# 4 ----------------------------------------------------------------------------

def test_criterion_4_ex5_1(capsys):
    spec, art = builtin("ex5_1")
    rep = verify_example("ex5_1", tol=1e-9, n_points=50)
    problems = [f"{e['component']} dev={e['max_rel_dev']:.2e}"
                for e in _entries(rep, "g") if not e["passed"]]
    problems += [f"{e['component']} dev={e['max_rel_dev']:.2e}"
                 for e in rep.entries if e["component"].startswith("minor") and not e["passed"]]
    x = (0.5, -0.3, 1.2, 0.8)
    g0 = fundamental_bundle(spec, Bindings(x, (1, 0, 0, 0))).g.data
    for y in sample_directions(spec, x, 10, seed=3):
        if np.max(np.abs(fundamental_bundle(spec, Bindings(x, y)).g.data - g0)) > 1e-12:
            problems.append("g depends on y")
            break
    flips = {}
    for F8 in (0.2, 0.249, 0.251, 0.3):
        st = domain_probe(spec.with_params(F8=F8), Bindings(x, (0.3, 0.5, -0.2, 0.7)))
        flips[F8] = st.positive_definite
    if flips != {0.2: False, 0.249: False, 0.251: True, 0.3: True}:
        problems.append(f"definiteness across F8 = 1/4: {flips}")
    ok = not problems
    report(capsys, 4, ok, "ex5_1 constant g, four leading minors, definiteness flips at F8 = 1/4"
           if ok else "; ".join(problems))
    assert ok, problems


# 5 ----------------------------------------------------------------------------

def test_criterion_5_product3d(capsys):
    spec, art = builtin("product3d")
    pts = sample_points(spec, 50, seed=0)
    fbs = [fundamental_bundle(spec, p) for p in pts]
    problems = []
    for idx, _ in art.C:
        name = "C" + "".join(str(i + 1) for i in idx)
        comp = np.array([fb.C.data[idx] for fb in fbs])
        floor = np.array([1e-3 * np.max(np.abs(fb.C.data)) for fb in fbs])
        dev = float(np.max(_rel(comp, _eval(art.printed_component(name), pts, spec.params), floor)))
        if dev > 1e-8:
            problems.append(f"printed {name} dev={dev:.2e}")
    if len(art.C) != 10:
        problems.append(f"{len(art.C)} C components, expected 10")
    cv = max(float(np.max(np.abs(fb.C_vec.data))) for fb in fbs)
    cmin = min(float(np.max(np.abs(fb.C.data))) for fb in fbs)
    if not cv < 1e-10:
        problems.append(f"max|C_i| = {cv:.2e}")
    if not cmin > 0.01:
        problems.append(f"min over samples of max|C_ijk| = {cmin:.2e}")
    rep = sc_detect(spec, 5, seed=0)
    if rep.consistent_dimension != 0:
        problems.append(f"SC consistent_dimension {rep.consistent_dimension}")
    ok = not problems
    report(capsys, 5, ok, f"product3d C table, max|C_i| = {cv:.1e}, min max|C| = {cmin:.2f}, no SC field"
           if ok else "; ".join(problems))
    assert ok, problems


# 6 ----------------------------------------------------------------------------

def _euler_failures(name):
    spec, _ = builtin(name)
    bad = []
    for p in sample_points(spec, 50, seed=11):
        fb = fundamental_bundle(spec, p)
        y = np.array(p.y)
        s = max(1.0, float(np.max(np.abs(fb.g.data))))
        cb = connection_bundle(spec, p)
        checks = {
            "F(2y) = 2F(y)": abs(fundamental_bundle(spec, Bindings(p.x, 2 * y)).F - 2 * fb.F) / fb.F,
            "g(y,y) = F^2": abs(y @ fb.g.data @ y - fb.F ** 2) / (s * max(1.0, y @ y)),
            "C(y,.,.) = 0": float(np.max(np.abs(np.einsum("ijk,k->ij", fb.C.data, y)))) / s,
            "h(y,.) = 0": float(np.max(np.abs(fb.h.data @ y))) / s,
            "l_i l^i = 1": abs(fb.l.data @ fb.l_up.data - 1.0),
            "N y = 2G": float(np.max(np.abs(cb.N.data @ y - 2 * cb.G.data)))
            / max(1.0, float(np.max(np.abs(cb.G.data)))),
        }
        bad += [f"{name} {k} {v:.1e}" for k, v in checks.items() if not v <= 1e-9]
    return bad


def _order4_failures(name):
    """Every partial of the energy up to order 4, symbolic against finite differences."""
    spec, _ = builtin(name)
    n = spec.dim
    tapeE = compile_tape((spec.energy,))
    bad = []
    done = 0
    for p in sample_points(spec, 60, seed=21):
        z0 = np.array(p.x + p.y)
        if np.min(np.abs(p.y)) < 0.2:
            continue

        def E(Z):
            out, status, _ = tapeE.run(Z[:, :n], Z[:, n:], spec.params, threads=1)
            if np.any(status):
                raise ArithmeticError
            return out[:, 0]

        try:
            E(z0[None, :] + np.array([[0.1] * (2 * n), [-0.1] * (2 * n)]))
        except ArithmeticError:
            continue
        vars_ = [xvar(i) for i in range(n)] + [yvar(i) for i in range(n)]
        exprs, idxs = [], []
        for order in range(1, 5):
            for idx in itertools.combinations_with_replacement(range(2 * n), order):
                e = spec.energy
                for k in idx:
                    e = differentiate(e, vars_[k])
                exprs.append(e)
                idxs.append(idx)
        exact = compile_tape(tuple(exprs))(p.x, p.y, spec.params)
        # relative to the largest partial of the same order at this point
        size = {o: max(1.0, max(abs(v) for i, v in zip(idxs, exact) if len(i) == o)) for o in range(1, 5)}
        try:
            for idx, v in zip(idxs, exact):
                # steps shrink with the coordinate so stencils stay clear of the singular cones
                h = default_step(len(idx)) * np.clip(np.abs(z0), 0.3, 1.0)
                approx = stencil_partial(E, z0, idx, h)
                if abs(approx - v) > 1e-5 * size[len(idx)]:
                    bad.append(f"{name} d{idx} exact {v:.6g} fd {approx:.6g}")
        except ArithmeticError:
            continue
        # the kernel's derivative tables agree with the same symbolic partials
        vals = point_values(spec, p, 2)
        table = dict(zip(idxs, exact))
        for m in range(1, 5):
            for yi in itertools.combinations_with_replacement(range(n), m):
                if abs(vals[f"Y{m}"][yi] - table[tuple(n + i for i in yi)]) > 1e-10 * max(1, abs(table[tuple(n + i for i in yi)])):
                    bad.append(f"{name} kernel Y{m}{yi}")
        for m in range(0, 4):
            for k in range(n):
                for yi in itertools.combinations_with_replacement(range(n), m):
                    ref = table[tuple(sorted((k,) + tuple(n + i for i in yi)))]
                    if abs(vals[f"X{m}"][(k,) + yi] - ref) > 1e-10 * max(1, abs(ref)):
                        bad.append(f"{name} kernel X{m}{(k,) + yi}")
        done += 1
        if done == 2:
            break
    if done < 2:
        bad.append(f"{name}: fewer than two points with room for the stencil")
    return bad


RANDERS3 = parse_metric(
    "dim = 3\nparam b = 0.3\n"
    "energy = (sqrt(y1^2 + (1 + x1^2)*y2^2 + y3^2) + b*(y2 + x2*y3/4))^2/2\n"
    "domain = y1^2 + y2^2 + y3^2 > 0\n")


def test_criterion_6_property_suite(capsys):
    problems = []
    for name in names():
        problems += _euler_failures(name)
        problems += _order4_failures(name)
    # F-condition implies SC, on every catalog instance
    f_instances = sc_instances = 0
    for name in names():
        spec, art = builtin(name)
        pts = sample_points(spec, 10, seed=5)
        for ef in art.fields:
            if ef.condition == "F" and ef.should_pass:
                f_instances += 1
                if not check_condition(spec, ef.field, "F", pts).passed:
                    problems.append(f"{name}: F-condition fails for {ef.field.to_dict()}")
                for p in pts:
                    b = raised_gradient(spec, ef.field, p)
                    bf = VectorFieldSpec.parse(";".join(repr(float(v)) for v in b), spec.dim)
                    ys = sample_directions(spec, p.x, 4, seed=1)
                    if not check_condition(spec, bf, "SC", [Bindings(p.x, y) for y in ys]).passed:
                        problems.append(f"{name}: raised gradient not SC at {p.x}")
        fields = [ef.field for ef in art.fields if ef.condition in ("SC", "C") and ef.should_pass]
        for fld in fields:
            sc_instances += 1
            for p in pts:
                fb = fundamental_bundle(spec, p)
                B = fld.values(spec, p.x)
                B0 = float(fb.g.data @ B @ np.array(p.y))
                lhs = np.einsum("i,hijk->hjk", B, t_tensor(spec, p)[0].data)
                s = max(1.0, np.max(np.abs(fb.g.data))) * max(1.0, np.max(np.abs(B)))
                if np.max(np.abs(lhs - B0 / fb.F * fb.C.data)) > 1e-7 * s:
                    problems.append(f"{name}: B T != (B0/F) C for {fld.to_dict()}")
                    break
    if f_instances == 0 or sc_instances == 0:
        problems.append("no F or SC instances in the catalog")
    # Riemannian => Berwald => Landsberg
    for name in names():
        rep = classify_metric(builtin(name)[0], seed=0, n_points=10)
        for pc in rep.points:
            if pc.riemannian_residual < 1e-8 * pc.scale and pc.berwald_residual >= 1e-8 * pc.scale:
                problems.append(f"{name}: Riemannian point that is not Berwald")
            if pc.berwald_residual < 1e-8 * pc.scale and pc.landsberg_residual >= 1e-8 * pc.scale:
                problems.append(f"{name}: Berwald point that is not Landsberg")
    # 2-D main scalar and the semi-C fit on the Randers family
    for eps in (0.3, 0.5, 0.7):
        rep = classify_metric(builtin("randers2d", eps=eps)[0], seed=2, n_points=20)
        for pc in rep.points:
            if not pc.main_scalar_residual < 1e-8:
                problems.append(f"randers2d eps={eps}: main scalar residual {pc.main_scalar_residual:.1e}")
            sc = pc.semi_c
            if abs(sc["r"] + sc["t"] - 1) > 1e-12 or not sc["residual"] < 1e-6:
                problems.append(f"randers2d eps={eps}: semi-C fit {sc}")
    rep = classify_metric(RANDERS3, seed=2, n_points=20)
    for pc in rep.points:
        sc = pc.semi_c
        if abs(sc["r"] + sc["t"] - 1) > 1e-12 or not sc["residual"] < 1e-6 or not sc["identifiable"]:
            problems.append(f"3-D Randers: semi-C fit {sc}")
    ok = not problems
    report(capsys, 6, ok, f"Euler identities, order-4 oracle, FC->SC ({f_instances} instances), "
           f"T contraction ({sc_instances} instances), class chain, main scalar, semi-C fit"
           if ok else "; ".join(problems[:8]))
    assert ok, problems[:20]


# 7 ----------------------------------------------------------------------------

CLI_RUNS = [
    ["eval", "--example", "conic_randers_lift", "--point", "x=1,0.3,1;y=0.2,0.5,1", "--tensor", "all"],
    ["eval", "--metric", "euclid2.fm", "--point", "x=0,0;y=1,0", "--tensor", "cartan"],
    ["classify", "--example", "randers2d", "--seed", "7"],
    ["scfind", "--metric", "ex5_2", "--x", "1,1,1,1", "--ysamples", "40", "--seed", "0"],
    ["scfind", "--example", "ex5_3", "--xsamples", "3", "--seed", "4"],
    ["check", "--example", "conic_randers_lift", "--field", "0;0;-x3", "--kind", "c", "--seed", "2"],
    ["check", "--example", "ex5_2", "--potential", "x2", "--kind", "cc", "--seed", "2"],
    ["verify", "--example", "ex5_3", "--seed", "1"],
    ["catalog-list"],
]


def test_criterion_7_determinism(tmp_path, capsys):
    problems = []
    for k, argv in enumerate(CLI_RUNS):
        outs = []
        for rep in range(2):
            path = tmp_path / f"{k}_{rep}.json"
            code = run_cli(argv + ["--out", str(path)])
            if code != 0:
                problems.append(f"{argv[0]} exited {code}")
            outs.append(path.read_bytes())
        if outs[0] != outs[1]:
            problems.append(f"{' '.join(argv)} differs between runs")
        json.loads(outs[0])
    ok = not problems
    report(capsys, 7, ok, f"{len(CLI_RUNS)} commands byte-identical on rerun" if ok else "; ".join(problems))
    assert ok, problems
