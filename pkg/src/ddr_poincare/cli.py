"""Command-line driver: mesh generation, verification suites, Poincare sweeps,
magnetostatics.

Exit codes: 0 success, 1 I/O error, 2 mesh validation failure, 3 check
failure, 64 usage error.  Reports are JSON on stdout (and --report), with
timings kept in their own field so the rest is reproducible.
"""
import argparse
import csv
import json
import sys
import time

import numpy as np

from . import mesh as meshmod
from . import mimetic as mm
from . import whitney as wh
from . import inverse as inv
from . import magneto as mg
from .ddr import DDRComplex, GRAD, CURL, DIV, BROKEN
from .kernels import BACKEND

EX_IO, EX_INVALID, EX_CHECK, EX_USAGE = 1, 2, 3, 64


class UsageParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


class Checks:
    def __init__(self):
        self.items = []

    def add(self, name, value, tol, ok=None, **extra):
        value = float(value)
        ok = value <= tol if ok is None else bool(ok)
        item = {"name": name, "status": "pass" if ok else "fail", "value": value, "tolerance": float(tol)}
        item.update(extra)
        self.items.append(item)
        return ok

    @property
    def failed(self):
        return [c["name"] for c in self.items if c["status"] != "pass"]


def _mesh_descriptor(m):
    return {"generator": m.header.get("generator", "file"), "n": m.header.get("n"),
            "vertices": m.n_vertices, "edges": m.n_edges, "faces": m.n_faces,
            "elements": m.n_elements, "b2": m.b2, "h": float(m.h)}


def _emit(report, path=None):
    text = json.dumps(report, indent=2)
    print(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")


# ---------------------------------------------------------------- suites

def random_simplices(rng, count, min_quality=0.05):
    """Random tetrahedra with volume bounded below relative to their diameter."""
    out = []
    while len(out) < count:
        x = rng.uniform(-1, 1, size=(4, 3)) * rng.uniform(0.1, 10)
        vol = np.linalg.det(x[1:] - x[0]) / 6
        h = max(np.linalg.norm(x[i] - x[j]) for i in range(4) for j in range(i))
        if abs(vol) > min_quality * h ** 3 / 6:
            if vol < 0:
                x[[1, 2]] = x[[2, 1]]
            out.append(x)
    return out


def suite_whitney(m, k, rng, checks):
    sims = random_simplices(rng, 100)
    sub = mm.context(m).sub
    sims += [sub.points[np.sort(q)] for q in sub.simplices[:50]]
    dual = norm = diff = 0.0
    for x in sims:
        B = wh.local_basis(x, require_positive=False)
        P = wh.dual_pairings(B)
        dual = max(dual, max(np.abs(p - np.eye(len(p))).max() for p in P))
        bn = wh.basis_norms(x)
        for key in ("hat", "edge", "face", "volume"):
            c, q = bn["closed"][key], bn["quadrature"][key]
            norm = max(norm, np.abs(c - q).max() / np.abs(q).max())
        if np.linalg.det(x[1:] - x[0]) > 0:
            diff = max(diff, max(wh.diff_identities(x, rng=rng).values()))
    checks.add("whitney.dual", dual, 1e-12)
    checks.add("whitney.norm", norm, 1e-12)
    checks.add("whitney.diff", diff, 1e-12)
    wc = mm.context(m).wc
    checks.add("whitney.D1D0", abs(wc.D1 @ wc.D0).max(), 0.0)
    checks.add("whitney.D2D1", abs(wc.D2 @ wc.D1).max(), 0.0)


def cohomology(c):
    """Numerical-rank cohomology dimensions of the DDR complex."""
    ranks = []
    for A in (c.G, c.C, c.D):
        B = A.toarray()
        s = np.linalg.svd(B, compute_uv=False) if B.size else np.zeros(0)
        ranks.append(int(np.sum(s > 1e-10 * s.max())) if s.size else 0)
    rG, rC, rD = ranks
    return {"b0": c.dim(GRAD) - rG, "b1": c.dim(CURL) - rC - rG, "b2": c.dim(DIV) - rD - rC,
            "onto": c.dim(BROKEN) - rD == 0}


def suite_complex(m, k, rng, checks):
    c = DDRComplex(m, k)
    amax = lambda A: float(abs(A).max()) if A.nnz else 0.0
    CG = amax(c.C @ c.G)
    DC = amax(c.D @ c.C)
    checks.add("complex.CG", CG, 1e-10, relative=CG / max(amax(c.C) * amax(c.G), 1e-300))
    checks.add("complex.DC", DC, 1e-10, relative=DC / max(amax(c.D) * amax(c.C), 1e-300))
    if max(c.dim(s) for s in (GRAD, CURL, DIV)) <= inv.max_dof():
        coh = cohomology(c)
        checks.add("complex.b0", abs(coh["b0"] - 1), 0, computed=coh["b0"])
        checks.add("complex.b1", abs(coh["b1"]), 0, computed=coh["b1"])
        checks.add("complex.b2", abs(coh["b2"] - m.b2), 0, computed=coh["b2"], expected=m.b2)
        checks.add("complex.onto", 0 if coh["onto"] else 1, 0)
    a = rng.standard_normal(3)
    e = k + 1
    q = lambda x: (x @ a) ** e
    gq = lambda x: e * (x @ a)[:, None] ** (e - 1) * a[None, :]
    r = c.G @ c.interpolate(GRAD, q) - c.interpolate(CURL, gq)
    checks.add("complex.grad_commutes", abs(r).max(), 1e-10)
    B = rng.standard_normal((3, 3))
    w = lambda x: x @ B.T
    r = c.D @ c.interpolate(DIV, w) - c.interpolate(BROKEN, lambda x: np.full(len(x), np.trace(B)))
    checks.add("complex.div_commutes", abs(r).max(), 1e-10)
    return c


def suite_mimetic(m, k, rng, checks):
    v = mm.vertex_poincare_check(m, rng.choice([-1.0, 1.0], m.n_vertices))
    checks.add("mimetic.vertex_ratio_finite", 0 if np.isfinite(v["ratio"]) else 1, 0, ratio=v["ratio"])
    af = -m.n_F[:, 2] * m.area_F
    e = mm.lift_edge_from_face(m, af)
    checks.add("mimetic.edge_closure", e["closure_residual"], 1e-10 * max(np.abs(af).max(), 1), ratio=e["ratio"])
    at = 2 * m.x_T[:, 0] * m.vol_T
    f = mm.lift_face_from_element(m, at)
    checks.add("mimetic.face_closure", f["closure_residual"], 1e-10 * max(np.abs(at).max(), 1), ratio=f["ratio"])
    hb = mm.harmonic_basis(m)
    checks.add("mimetic.harmonic_dim", abs(hb.dim - m.b2) + abs(hb.rank_dim - m.b2), 0,
               analytic=hb.dim, rank=hb.rank_dim)
    if hb.dim:
        checks.add("mimetic.harmonic_div", float(hb.div_residual.max()), 1e-10)
    ok, cases = curl_range_battery(m, rng, hb, 12)
    checks.add("mimetic.curl_range_biconditional", cases - ok, 0, cases=cases)


def curl_range_battery(m, rng, hb, n):
    """Constructed psi with known membership; returns (#correct, #cases)."""
    wc = mm.context(m).wc
    nE, nF = wc.D1.shape[1], wc.D1.shape[0]
    correct = 0
    for i in range(n):
        kind = i % 3
        psi = wc.D1 @ rng.standard_normal(nE)
        expect = True
        if kind == 1:
            psi = psi + rng.standard_normal(nF)
            expect = False
        elif kind == 2:
            if hb.dim:
                psi = psi + hb.members[i % hb.dim] * rng.uniform(0.5, 2)
                expect = False
        out = mm.curl_range_test(m, psi)
        # the verdict must match the construction and the two conditions
        cond = out["div_residual"] <= 1e-10 and (not out["flux"] or max(map(abs, out["flux"])) <= 1e-10)
        correct += int(out["in_range"] == expect == cond)
    return correct, n


SUITES = {"whitney": suite_whitney, "complex": suite_complex, "mimetic": suite_mimetic}


# ---------------------------------------------------------------- commands

def _load(path):
    try:
        return meshmod.load_mesh(path), None
    except OSError as exc:
        return None, (EX_IO, str(exc))
    except meshmod.MeshError as exc:
        return None, (EX_INVALID, str(exc))


def cmd_mesh(args):
    if args.action in ("gen-hex", "gen-voided"):
        if args.n is None or args.out is None:
            raise UsageError("--n and --out are required")
        try:
            m = meshmod.gen_hex_mesh(args.n) if args.action == "gen-hex" else meshmod.gen_voided_cube_mesh(args.n)
        except ValueError as exc:
            raise UsageError(str(exc))
        try:
            m.save(args.out)
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return EX_IO
        _emit({"command": "mesh " + args.action, "mesh": _mesh_descriptor(m), "out": args.out})
        return 0
    if args.inp is None:
        raise UsageError("--in is required")
    try:
        with open(args.inp) as fh:
            data = json.load(fh)
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EX_IO
    except json.JSONDecodeError as exc:
        print(f"mesh_parse: {exc}", file=sys.stderr)
        return EX_INVALID
    try:
        m = meshmod.from_dict(data, check=False)
    except (meshmod.MeshError, ValueError, IndexError) as exc:
        print(f"mesh_parse: {exc}", file=sys.stderr)
        return EX_INVALID
    rep = meshmod.validate_mesh(m)
    _emit({"command": "mesh validate", "report": rep})
    if not rep["valid"]:
        print("\n".join(c["name"] for c in rep["checks"] if c["status"] != "pass"), file=sys.stderr)
        return EX_INVALID
    return 0


def cmd_verify(args):
    m, err = _load(args.mesh)
    if err:
        print(err[1], file=sys.stderr)
        return err[0]
    rng = np.random.default_rng(args.seed)
    checks = Checks()
    timings = {}
    names = list(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        t0 = time.perf_counter()
        SUITES[name](m, args.k, rng, checks)
        timings[name] = time.perf_counter() - t0
    report = {"command": "verify", "suite": args.suite, "mesh": _mesh_descriptor(m), "k": args.k,
              "seed": args.seed, "backend": BACKEND, "checks": checks.items, "timings": timings}
    _emit(report, args.report)
    if checks.failed:
        print("\n".join(checks.failed), file=sys.stderr)
        return EX_CHECK
    return 0


def sweep_row(space, family, n, k):
    m = meshmod.gen_hex_mesh(n) if family == "hex" else meshmod.gen_voided_cube_mesh(n)
    c = DDRComplex(m, k)
    pc = inv.poincare_constant(c, space)
    cp = inv.constructive_constant(c, space, pc)
    return {"n": n, "h": float(m.h), "dofs": c.dim(space), "C_num": float(pc["C_num"]),
            "kernel_dim": int(pc["kernel_dim"]), "expected_kernel_dim": inv.expected_kernel_dim(c, space),
            "C_P": cp, "method": pc["method"]}


def cmd_poincare(args):
    try:
        ns = [int(s) for s in args.n_list.split(",") if s]
    except ValueError:
        raise UsageError(f"bad --n-list {args.n_list!r}")
    rows, timings = [], {}
    checks = Checks()
    for n in ns:
        t0 = time.perf_counter()
        try:
            rows.append(sweep_row(args.op, args.family, n, args.k))
        except ValueError as exc:
            raise UsageError(str(exc))
        timings[str(n)] = time.perf_counter() - t0
    cn = [r["C_num"] for r in rows]
    checks.add("poincare.finite", 0 if all(np.isfinite(cn)) else 1, 0)
    checks.add("poincare.constructive_dominates", sum(r["C_P"] < r["C_num"] * (1 - 1e-9) for r in rows), 0)
    checks.add("poincare.kernel_dims", sum(r["kernel_dim"] != r["expected_kernel_dim"] for r in rows), 0)
    if len(rows) > 1:
        checks.add("poincare.uniformity", max(cn) / min(cn), 2.0, ok=max(cn) / min(cn) < 2.0)
    report = {"command": "poincare", "op": args.op, "family": args.family, "k": args.k,
              "table": rows, "checks": checks.items, "timings": timings}
    _emit(report, args.report)
    if args.csv:
        try:
            with open(args.csv, "w", newline="") as fh:
                wr = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["n"])
                wr.writeheader()
                wr.writerows(rows)
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return EX_IO
    if checks.failed:
        print("\n".join(checks.failed), file=sys.stderr)
        return EX_CHECK
    return 0


def cmd_magneto(args):
    m, err = _load(args.mesh)
    if err:
        print(err[1], file=sys.stderr)
        return err[0]
    t0 = time.perf_counter()
    c = DDRComplex(m, args.k)
    system = mg.assemble_magneto(c, mg.PRESETS[args.f])
    sol = mg.solve_magnetostatics(system)
    isc = mg.infsup_constant(system)
    checks = Checks()
    checks.add("magneto.residual", sol.residual, 1e-9)
    checks.add("magneto.harmonic_orthogonality", sol.harmonic_orthogonality, 1e-9)
    checks.add("magneto.harmonic_dim", abs(system.harmonic.dim - m.b2), 0, ok=not system.harmonic.ambiguous
               and system.harmonic.dim == m.b2)
    checks.add("magneto.infsup_positive", isc, 1e-8, ok=isc > 1e-8)
    if args.f == "zero":
        checks.add("magneto.zero_solution", sol.graph_norm, 1e-10)
    bound = sol.graph_norm * isc / sol.rhs_norm if sol.rhs_norm else 0.0
    report = {"command": "magneto", "mesh": _mesh_descriptor(m), "k": args.k, "f": args.f,
              "dofs": {"curl": c.dim(CURL), "div": c.dim(DIV), "harmonic": system.harmonic.dim},
              "solution": {"sigma_curl_norm": c.component_norm(CURL, sol.sigma),
                           "u_div_norm": c.component_norm(DIV, sol.u),
                           "D_u_norm": sol.div_norm, "p": sol.p.tolist(),
                           "graph_norm": sol.graph_norm, "rhs_norm": sol.rhs_norm,
                           "stability_margin": bound},
              "infsup": isc, "checks": checks.items, "timings": {"total": time.perf_counter() - t0}}
    _emit(report, args.report)
    if args.dump:
        try:
            with open(args.dump, "w") as fh:
                json.dump({"sigma": c.dump(CURL, sol.sigma), "u": c.dump(DIV, sol.u), "p": sol.p.tolist()}, fh)
        except OSError as exc:
            print(str(exc), file=sys.stderr)
            return EX_IO
    if checks.failed:
        print("\n".join(checks.failed), file=sys.stderr)
        return EX_CHECK
    return 0


class UsageError(Exception):
    pass


def build_parser():
    p = UsageParser(prog="ddr-poincare", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=UsageParser)

    pm = sub.add_parser("mesh", help="generate or validate meshes")
    pm.add_argument("action", choices=["gen-hex", "gen-voided", "validate"])
    pm.add_argument("--n", type=int)
    pm.add_argument("--out")
    pm.add_argument("--in", dest="inp")
    pm.set_defaults(func=cmd_mesh)

    pv = sub.add_parser("verify", help="run invariant suites on a mesh")
    pv.add_argument("--suite", choices=["complex", "whitney", "mimetic", "all"], default="all")
    pv.add_argument("--mesh", required=True)
    pv.add_argument("--k", type=int, default=0)
    pv.add_argument("--seed", type=int, default=0)
    pv.add_argument("--report")
    pv.set_defaults(func=cmd_verify)

    pp = sub.add_parser("poincare", help="Poincare constant sweep")
    pp.add_argument("--op", choices=["grad", "curl", "div"], required=True)
    pp.add_argument("--family", choices=["hex", "voided"], default="hex")
    pp.add_argument("--n-list", default="2,3,4")
    pp.add_argument("--k", type=int, default=0)
    pp.add_argument("--csv")
    pp.add_argument("--report")
    pp.set_defaults(func=cmd_poincare)

    pg = sub.add_parser("magneto", help="solve the magnetostatics problem")
    pg.add_argument("--mesh", required=True)
    pg.add_argument("--k", type=int, default=0)
    pg.add_argument("--f", choices=list(mg.PRESETS), default="polynomial")
    pg.add_argument("--dump")
    pg.add_argument("--report")
    pg.set_defaults(func=cmd_magneto)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "k", 0) < 0:
        parser.error("--k must be >= 0")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
