"""Command-line entry point: mesh reports, convergence studies, A/B comparison,
inf-sup estimates and VTK export.

Exit codes: 0 success, 2 usage error, 3 solver failure, 4 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .assembly import field_at_points
from .infsup import MAX_DENSE_N, estimate_infsup
from .mesh import build_box_mesh
from .mms import CASE_NAMES, MmsError, mms_case
from .quadrature import QuadRule
from .scheme import (ErrorReport, SchemeConfig, SolverError, compare_schemes, observed_rates,
                     run_scheme)

__all__ = ["main", "CSV_COLUMNS", "INFSUP_COLUMNS"]

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

CSV_COLUMNS = (
    "case", "scheme", "n", "h", "dof_r", "dof_phi", "dof_zeta", "dof_p", "dof_u",
    "err_r_l2", "err_r_h1", "err_phi_l2", "err_phi_h1", "err_zeta_l2", "err_zeta_hcurl",
    "err_p_h1", "err_u_h1", "it_s1", "it_s2", "it_s3",
)
INFSUP_COLUMNS = ("n", "dim_ned", "dim_constraint", "beta")
COMPARE_TOL = 1e-7

logger = logging.getLogger("decoupled_biharm")


def _levels(text: str) -> list:
    try:
        levels = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated integers: {text!r}")
    if not levels or any(n < 1 for n in levels):
        raise argparse.ArgumentTypeError("levels must be positive")
    if levels != sorted(set(levels)):
        raise argparse.ArgumentTypeError("levels must be strictly ascending")
    return levels


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _row(case_name, scheme, report: ErrorReport, bundle) -> dict:
    d = report.dofs
    row = {
        "case": case_name, "scheme": scheme, "n": bundle.spaces.mesh.n, "h": report.h,
        "dof_r": d["r"], "dof_phi": d["phi"], "dof_zeta": d["zeta"], "dof_p": d["p"],
        "dof_u": d["u"],
    }
    row.update(report.as_dict())
    for i in (1, 2, 3):
        row[f"it_s{i}"] = bundle.reports[f"stage{i}"].iterations
    return row


def _csv_text(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def _write(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _rates(rows) -> dict:
    hs = [r["h"] for r in rows]
    out = {}
    for key in ErrorReport.NORMS:
        out[key] = observed_rates([r[key] for r in rows], hs)
    return out


def cmd_mesh(args) -> int:
    mesh = build_box_mesh(args.n)
    c = mesh.counts()
    print(f"V={c['V']} E={c['E']} F={c['F']} C={c['C']} h={mesh.h!r}")
    if args.info:
        for key in sorted(k for k in c if k not in ("V", "E", "F", "C")):
            print(f"{key}={c[key]}")
    return EXIT_OK


def cmd_convergence(args) -> int:
    case = mms_case(args.case)
    if args.zero_data:
        case = case.with_zero_data()
    rows, status = [], EXIT_OK
    for n in args.levels:
        config = SchemeConfig(scheme=args.scheme, n=n, phi_family=args.phi_family, tol=args.tol)
        try:
            bundle, report = run_scheme(case, config)
        except SolverError as exc:
            print(f"solver failure at n={n}: {exc}", file=sys.stderr)
            status = EXIT_SOLVER
            break
        rows.append(_row(case.name, args.scheme, report, bundle))
        logger.info("n=%d done", n)
    rows.sort(key=lambda r: (r["case"], r["scheme"], r["n"]))
    _write(args.out, _csv_text(rows))
    rates = _rates(rows)
    if args.json:
        _write(args.json, json.dumps({"rows": rows, "rates": rates}, indent=2, sort_keys=True)
               + "\n")
    for key, vals in rates.items():
        shown = " ".join("-" if v is None else f"{v:.2f}" for v in vals)
        print(f"{key:<16s} {shown}")
    return status


def cmd_compare_ab(args) -> int:
    try:
        gaps = compare_schemes(mms_case(args.case), args.n, phi_family=args.phi_family)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    ok = True
    for name, g in gaps.items():
        flag = "ok" if g <= COMPARE_TOL else "FAIL"
        ok &= g <= COMPARE_TOL
        print(f"{name:<10s} {g:.3e} {flag}")
    return EXIT_OK if ok else 1


def cmd_infsup(args) -> int:
    if max(args.levels) > MAX_DENSE_N:
        print(f"error: dense inf-sup estimate supports levels up to {MAX_DENSE_N}",
              file=sys.stderr)
        return EXIT_USAGE
    levels = [estimate_infsup(n, args.phi_family) for n in args.levels]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(INFSUP_COLUMNS)
    for lv in levels:
        w.writerow([lv.n, lv.dim_ned, lv.dim_constraint, repr(lv.beta)])
    _write(args.out, buf.getvalue())
    betas = [lv.beta for lv in levels]
    for lv in levels:
        print(f"n={lv.n} beta={lv.beta:.6f}")
    print(f"min/max ratio={min(betas) / max(betas):.4f}")
    return EXIT_OK


def vertex_samples(space, x) -> np.ndarray:
    """Values of a discrete field at mesh vertices, shape (V,) or (V, 3)."""
    mesh = space.mesh
    rule = QuadRule(np.eye(4), np.full(4, 1.0 / 24.0), 1)
    vals = field_at_points(space, x, rule, "val")
    out = np.zeros((mesh.n_vertices,) + vals.shape[2:])
    out[mesh.cells.reshape(-1)] = vals.reshape((-1,) + vals.shape[2:])
    return out


def vtk_text(bundle) -> str:
    sps = bundle.spaces
    mesh = sps.mesh
    centroid = QuadRule(np.full((1, 4), 0.25), np.array([1.0 / 6.0]), 1)
    curl = field_at_points(sps.ned, bundle.zeta, centroid, "curl")[:, 0]
    u = vertex_samples(sps.u, bundle.u)
    r = vertex_samples(sps.scalar, bundle.r)
    phi = vertex_samples(sps.phi, bundle.phi)

    lines = ["# vtk DataFile Version 3.0", "decoupled bi-Laplacian solution", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [" ".join(repr(float(c)) for c in p) for p in mesh.vertices]
    lines.append(f"CELLS {mesh.n_cells} {5 * mesh.n_cells}")
    lines += ["4 " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {mesh.n_cells}")
    lines += ["10"] * mesh.n_cells
    lines.append(f"POINT_DATA {mesh.n_vertices}")
    for name, vals in (("u", u), ("r", r)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [repr(float(v)) for v in vals]
    lines.append("VECTORS phi double")
    lines += [" ".join(repr(float(c)) for c in v) for v in phi]
    lines.append(f"CELL_DATA {mesh.n_cells}")
    lines.append("VECTORS curl_zeta double")
    lines += [" ".join(repr(float(c)) for c in v) for v in curl]
    return "\n".join(lines) + "\n"


def cmd_export(args) -> int:
    case = mms_case(args.case)
    if args.zero_data:
        case = case.with_zero_data()
    config = SchemeConfig(scheme=args.scheme, n=args.n, phi_family=args.phi_family)
    try:
        bundle, _ = run_scheme(case, config, errors=False)
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    _write(args.out, vtk_text(bundle))
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="decoupled-biharm",
                                 description="Decoupled mixed FEM for the 3D bi-Laplacian.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="entity counts of the cube mesh")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--info", action="store_true", help="also print boundary/interior counts")
    p.set_defaults(func=cmd_mesh)

    def common(p, with_scheme=True):
        p.add_argument("--case", choices=CASE_NAMES, default="poly")
        if with_scheme:
            p.add_argument("--scheme", choices=("A", "B"), default="A")
        p.add_argument("--phi-family", choices=("p1", "p2"), default="p1")

    p = sub.add_parser("convergence", help="manufactured-solution convergence study")
    common(p)
    p.add_argument("--levels", type=_levels, default=[2, 4, 8])
    p.add_argument("--tol", type=float, default=1e-12)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--json", help="optional JSON output with observed rates")
    p.add_argument("--zero-data", action="store_true", help="solve with homogeneous data")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("compare-ab", help="gaps between schemes A and B")
    common(p, with_scheme=False)
    p.add_argument("--n", type=int, default=4)
    p.set_defaults(func=cmd_compare_ab)

    p = sub.add_parser("infsup", help="dense discrete inf-sup estimate")
    p.add_argument("--levels", type=_levels, default=[1, 2, 3])
    p.add_argument("--phi-family", choices=("p1", "p2"), default="p1")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_infsup)

    p = sub.add_parser("export", help="legacy VTK export of a solution")
    common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--zero-data", action="store_true")
    p.set_defaults(func=cmd_export)
    return ap


def _configure_logging() -> None:
    level = os.environ.get("LOG_LEVEL", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "n", 1) is not None and getattr(args, "n", 1) < 1:
        parser.print_usage(sys.stderr)
        print("error: --n must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MmsError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
