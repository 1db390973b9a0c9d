"""Command-line driver and benchmark harness.

Verbs: generate, solve, bench, render, agcs. Exit codes: 0 success,
2 usage or bad input, 3 numerical failure, 4 guard violation.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import agcs
from .bnb import AscentConfig, Mode, branch_and_bound
from .combinatorial import greedy_tour, held_karp_ascent, tour_cost, two_opt
from .convex import realize
from .errors import GcsTspError, GuardError, InputError, NumericalError
from .exact import lower_bound_suite, solve_enumeration, solve_lattice
from .geometry import DEFAULT_TOL
from .instance import bounded_matrix, generate, load, save

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_GUARD = 0, 2, 3, 4
REPORT_VERSION = 1
OPT_TOL = 1e-4  # absolute tolerance when calling a heuristic optimal
METHODS = ("enum", "lattice", "bbb", "cbb", "greedy", "2opt")
RESULT_COLUMNS = ["size", "index", "seed", "optimum", "mst_b", "mot_b", "wot_b",
                  "bbb_bounded", "bbb_realized", "bbb_nodes", "bbb_optimal",
                  "dlow_mst", "dlow_mot", "dlow_wot", "dup_bbb", "error"]
TIMING_COLUMNS = ["size", "index", "bbb_time", "oracle_time"]
SUMMARY_COLUMNS = ["size", "metric", "count", "Min", "Max", "Mean", "Median"]
SUMMARY_METRICS = [("MST-B dlow%", "dlow_mst"), ("MOT-B dlow%", "dlow_mot"),
                   ("WOT-B dlow%", "dlow_wot"), ("BBB dup%", "dup_bbb")]


class UsageError(GcsTspError):
    pass


def default_seed() -> int:
    raw = os.environ.get("GCS_TSP_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return int(raw, 0)
    except ValueError:
        raise UsageError(f"GCS_TSP_SEED must be an integer (got {raw!r})")


def delta_upper(heuristic: float, optimal: float) -> float:
    """Heuristic percent error (heuristic - optimal) / optimal * 100."""
    return (heuristic - optimal) / optimal * 100.0


def delta_lower(optimal: float, lower: float) -> float:
    """Lower-bound percent error (optimal - lower) / optimal * 100."""
    return (optimal - lower) / optimal * 100.0


# -- reports ---------------------------------------------------------------

@dataclass
class SolveReport:
    instance: str
    method: str
    n: int
    d: int
    cost: float  # realized
    bounded_cost: float
    lower_bound: float  # Held-Karp ascent bound on the matrix
    wall_time: float
    nodes: int
    order: list
    waypoints: list
    status: str = "ok"
    optimal: float | None = None
    delta_upper: float | None = None
    delta_lower: float | None = None
    polygons: list = field(default_factory=list)
    bounded_segments: list = field(default_factory=list)
    report_version: int = REPORT_VERSION

    def attach_oracle(self, optimal: float) -> None:
        if not optimal > 0:
            raise InputError("oracle optimum must be positive")
        self.optimal = float(optimal)
        self.delta_upper = delta_upper(self.cost, self.optimal)
        self.delta_lower = delta_lower(self.optimal, self.lower_bound)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1) + "\n"

    @classmethod
    def from_json(cls, text: str) -> SolveReport:
        try:
            doc = json.loads(text)
            if doc.get("report_version") != REPORT_VERSION:
                raise InputError(f"unsupported report_version {doc.get('report_version')!r}")
            return cls(**doc)
        except (json.JSONDecodeError, TypeError, AttributeError) as exc:
            raise InputError(f"malformed report: {exc}") from exc

    def table(self) -> str:
        rows = [("instance", self.instance), ("method", self.method), ("status", self.status),
                ("n", self.n), ("realized cost", f"{self.cost:.6f}"),
                ("bounded cost", f"{self.bounded_cost:.6f}"),
                ("lower bound", f"{self.lower_bound:.6f}"),
                ("wall time [s]", f"{self.wall_time:.4f}"), ("nodes", self.nodes)]
        if self.optimal is not None:
            rows += [("optimal", f"{self.optimal:.6f}"),
                     ("delta upper %", f"{self.delta_upper:.4f}"),
                     ("delta lower %", f"{self.delta_lower:.4f}")]
        rows.append(("order", " ".join(map(str, self.order))))
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{w}}  {v}" for k, v in rows) + "\n"


def _polygon(P) -> list:
    V = P.vertices
    if P.d != 2:
        return []
    c = V.mean(axis=0)
    ang = np.arctan2(V[:, 1] - c[1], V[:, 0] - c[0])
    return V[np.argsort(ang, kind="stable")].tolist()


def _read_oracle(path) -> float:
    text = Path(path).read_text().strip()
    try:
        return float(text)
    except ValueError:
        pass
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"oracle file {path} is neither a number nor a report") from exc
    for key in ("optimal", "cost"):
        if isinstance(doc, dict) and isinstance(doc.get(key), (int, float)):
            if key == "cost" and doc.get("method") not in ("enum", "lattice"):
                continue
            return float(doc[key])
    raise InputError(f"oracle file {path} carries no optimum")


def _ascent(args) -> AscentConfig:
    return AscentConfig(root_iters=args.ascent_iters, t0=args.step, decay=args.decay)


def run_method(inst, method: str, args, C=None) -> SolveReport:
    """Run one solver and package the result; timing covers the solver only."""
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    tol = args.tol
    if C is None:
        C = bounded_matrix(inst, tol)
    A = C.costs
    pk = inst.packed()
    status, nodes = "ok", 0
    t0 = time.perf_counter()
    if method == "enum":
        res = solve_enumeration(inst, tol)
        order, cost, pts, nodes, status = res.order, res.cost, res.waypoints, res.nodes, \
            res.status.value
    elif method == "lattice":
        res = solve_lattice(inst, C, tol, node_cap=args.max_nodes, completion=args.completion)
        order, cost, pts, nodes, status = res.order, res.cost, res.waypoints, res.nodes, \
            res.status.value
    elif method in ("bbb", "cbb"):
        res = branch_and_bound(C, max_nodes=args.max_nodes, ascent=_ascent(args),
                               mode=Mode(method), sets=pk, stall_limit=args.stall, tol=tol)
        order, cost, pts, nodes = res.tour.order(), res.realized_cost, res.points, \
            res.nodes_expanded
        status = "proved" if res.proved_optimal_on_matrix else "heuristic"
    else:
        topo = greedy_tour(A)
        if method == "2opt":
            topo = two_opt(topo, A)
        r = realize(topo, pk, tol)
        order, cost, pts = topo.order(), r.cost, r.points
    wall = time.perf_counter() - t0
    order = [int(v) for v in order]
    lower = held_karp_ascent(A, 0, max_iter=args.ascent_iters, t0=args.step,
                             decay=args.decay).best_bound
    W = C.witnesses
    segs = []
    if W is not None and inst.d == 2:
        for k in range(len(order)):
            u, v = order[k], order[(k + 1) % len(order)]
            segs.append([W[u, v].tolist(), W[v, u].tolist()])
    return SolveReport(
        instance=str(getattr(args, "instance", "")), method=method, n=inst.n, d=inst.d,
        cost=float(cost), bounded_cost=tour_cost(order, A), lower_bound=float(lower),
        wall_time=wall, nodes=int(nodes), order=order, waypoints=np.asarray(pts).tolist(),
        status=status, polygons=[_polygon(P) for P in inst.sets], bounded_segments=segs)


# -- bench -----------------------------------------------------------------

def _bench_one(job):
    size, index, seed, cfg = job
    row = {c: "" for c in RESULT_COLUMNS}
    row.update(size=size, index=index, seed=seed)
    times = {"size": size, "index": index, "bbb_time": "", "oracle_time": ""}
    try:
        inst = generate(size, 2, seed)
        C = bounded_matrix(inst, cfg["tol"])
        b = lower_bound_suite(inst, C, ascent_iters=cfg["ascent_iters"], t0=cfg["step"],
                              decay=cfg["decay"])
        row.update(mst_b=b["MST-B"], mot_b=b["MOT-B"], wot_b=b["WOT-B"])
        t0 = time.perf_counter()
        h = branch_and_bound(C, max_nodes=cfg["max_nodes"], sets=inst.packed(), tol=cfg["tol"],
                             ascent=AscentConfig(root_iters=cfg["ascent_iters"],
                                                 t0=cfg["step"], decay=cfg["decay"]))
        times["bbb_time"] = time.perf_counter() - t0
        row.update(bbb_bounded=h.bounded_cost, bbb_realized=h.realized_cost,
                   bbb_nodes=h.nodes_expanded)
        if size <= cfg["oracle_max_n"]:
            t0 = time.perf_counter()
            ex = solve_lattice(inst, C, cfg["tol"], completion=cfg["completion"],
                               incumbent=(h.tour.order(), h.realized_cost))
            times["oracle_time"] = time.perf_counter() - t0
            if not ex.proven:
                raise GuardError("oracle hit its node cap")
            opt = ex.cost
            row.update(optimum=opt, dlow_mst=delta_lower(opt, b["MST-B"]),
                       dlow_mot=delta_lower(opt, b["MOT-B"]),
                       dlow_wot=delta_lower(opt, b["WOT-B"]),
                       dup_bbb=delta_upper(h.realized_cost, opt),
                       bbb_optimal=int(abs(h.realized_cost - opt) <= OPT_TOL))
    except GcsTspError as exc:
        row["error"] = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return row, times


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def _stats(values) -> list:
    if not values:
        return [0, "", "", "", ""]
    return [len(values), min(values), max(values), math.fsum(values) / len(values),
            statistics.median(values)]


def summarize(rows, columns=SUMMARY_METRICS, key=lambda r: r) -> list[list]:
    """Min/Max/Mean/Median per (size, metric), sorted by size."""
    out = []
    for size in sorted({int(r["size"]) for r in rows}):
        sub = [r for r in rows if int(r["size"]) == size]
        for label, col in columns:
            vals = [float(r[col]) for r in sub if r[col] not in ("", None)]
            out.append([size, label] + _stats(vals))
    return out


def _write_csv(path: Path, header, rows) -> None:
    """Rows are dicts keyed by header or plain lists; floats use repr."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        cells = [r[c] for c in header] if isinstance(r, dict) else r
        w.writerow([_fmt(c) for c in cells])
    path.write_text(buf.getvalue())


def run_bench(sizes, count, seed0, out_dir, cfg, workers=1):
    if count < 0:
        raise UsageError("count must be >= 0")
    for s in sizes:
        if s < 3:
            raise UsageError("sizes must be >= 3")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(s, i, seed0 + i, cfg) for s in sizes for i in range(count)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bench_one, jobs))
    else:
        results = [_bench_one(j) for j in jobs]
    # deterministic fold over sorted instance ids
    results.sort(key=lambda rt: (rt[0]["size"], rt[0]["index"]))
    rows = [r for r, _ in results]
    times = [t for _, t in results]
    _write_csv(out / "results.csv", RESULT_COLUMNS, rows)
    _write_csv(out / "timings.csv", TIMING_COLUMNS, times)
    summary = summarize(rows)
    _write_csv(out / "summary.csv", SUMMARY_COLUMNS, summary)
    tsum = summarize(times, [("BBB time s", "bbb_time"), ("oracle time s", "oracle_time")])
    _write_csv(out / "timing_summary.csv", SUMMARY_COLUMNS, tsum)
    return rows, summary, tsum


def format_summary(summary) -> str:
    lines = [f"{'size':>4}  {'metric':<16}{'count':>6}{'Min':>11}{'Max':>11}"
             f"{'Mean':>11}{'Median':>11}"]
    for size, label, k, *vals in summary:
        cells = "".join(f"{v:>11.4f}" if v != "" else f"{'-':>11}" for v in vals)
        lines.append(f"{size:>4}  {label:<16}{k:>6}{cells}")
    return "\n".join(lines) + "\n"


# -- render ----------------------------------------------------------------

def render_svg(report: SolveReport, width: int = 800) -> str:
    """Polytopes, realized tour (solid) and bounded witness segments (dotted)."""
    if report.d != 2:
        raise InputError("only planar reports can be rendered")
    if len(report.polygons) != report.n or len(report.waypoints) != report.n:
        raise InputError("report does not carry polygons and waypoints for every set")
    pts = [p for poly in report.polygons for p in poly] + list(report.waypoints)
    arr = np.asarray(pts, dtype=float).reshape(-1, 2)
    lo, hi = arr.min(axis=0), arr.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    pad = 0.05 * span
    s = width / (span + 2 * pad)
    height = int(math.ceil((hi[1] - lo[1] + 2 * pad) * s))

    def xy(p):
        return f"{(p[0] - lo[0] + pad) * s:.3f},{(hi[1] - p[1] + pad) * s:.3f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>']
    for k, poly in enumerate(report.polygons):
        out.append(f'<polygon id="set{k}" points="{" ".join(xy(p) for p in poly)}" '
                   'fill="#dde6f0" stroke="#445566" stroke-width="1"/>')
    for a, b in report.bounded_segments:
        out.append(f'<line x1="{xy(a).split(",")[0]}" y1="{xy(a).split(",")[1]}" '
                   f'x2="{xy(b).split(",")[0]}" y2="{xy(b).split(",")[1]}" '
                   'stroke="purple" stroke-width="1.5" stroke-dasharray="4,3"/>')
    order = report.order
    ring = [report.waypoints[v] for v in order] + [report.waypoints[order[0]]]
    out.append(f'<polyline points="{" ".join(xy(p) for p in ring)}" fill="none" '
               'stroke="blue" stroke-width="2"/>')
    for p in report.waypoints:
        x, y = xy(p).split(",")
        out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="blue"/>')
    out.append(f'<text x="8" y="18" font-family="monospace" font-size="14">'
               f'{report.method}: realized {report.cost:.4f}, bounded '
               f'{report.bounded_cost:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- argument parsing ------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _solver_flags(p):
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--max-nodes", type=int, default=10_000)
    p.add_argument("--ascent-iters", type=int, default=1000)
    p.add_argument("--step", type=float, default=2.0, help="initial ascent step t0")
    p.add_argument("--decay", type=float, default=0.95)
    p.add_argument("--stall", type=int, default=15, help="CBB non-improving expansions")
    p.add_argument("--completion", choices=("mst", "bhk"), default="mst",
                   help="lattice completion bound")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gcs-tsp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a random instance")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, default=2)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--out", default=None, help="default: instance_n{n}_s{seed}.json")

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("instance")
    s.add_argument("--method", choices=METHODS, default="bbb")
    s.add_argument("--oracle", default=None, help="number or report holding the optimum")
    s.add_argument("--out", default=None, help="report JSON path")
    s.add_argument("--json", action="store_true", help="print the JSON report")
    _solver_flags(s)

    b = sub.add_parser("bench", help="benchmark tables over random instances")
    b.add_argument("--sizes", type=int, nargs="+", default=[5, 8, 10, 15])
    b.add_argument("--count", type=int, default=100)
    b.add_argument("--seed0", type=int, default=None)
    b.add_argument("--out-dir", default="bench_out")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--oracle-max-n", type=int, default=9)
    _solver_flags(b)

    r = sub.add_parser("render", help="draw a report as SVG")
    r.add_argument("report")
    r.add_argument("--out", default=None)

    a = sub.add_parser("agcs", help="augmented graph tools")
    a.add_argument("action", choices=("build", "export", "count"))
    a.add_argument("--n", type=int, required=True)
    a.add_argument("--format", choices=("dot", "json"), default="dot")
    a.add_argument("--out", default=None)
    return p


def _emit(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _cmd_generate(args) -> int:
    if args.n < 3:
        raise UsageError("--n must be >= 3")
    if args.d < 1:
        raise UsageError("--d must be >= 1")
    seed = default_seed() if args.seed is None else args.seed
    inst = generate(args.n, args.d, seed)
    out = args.out or f"instance_n{args.n}_s{seed}.json"
    save(inst, out)
    print(f"wrote {out}: n_K={inst.n} d={inst.d} seed={seed}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    inst = load(args.instance)
    if inst.n < 3:
        raise UsageError("an instance needs at least 3 sets")
    rep = run_method(inst, args.method, args)
    if args.oracle is not None:
        rep.attach_oracle(_read_oracle(args.oracle))
    if args.out:
        Path(args.out).write_text(rep.to_json())
    sys.stdout.write(rep.to_json() if args.json else rep.table())
    return EXIT_OK


def _cmd_bench(args) -> int:
    seed0 = default_seed() if args.seed0 is None else args.seed0
    cfg = dict(tol=args.tol, max_nodes=args.max_nodes, ascent_iters=args.ascent_iters,
               step=args.step, decay=args.decay, completion=args.completion,
               oracle_max_n=args.oracle_max_n)
    rows, summary, tsum = run_bench(args.sizes, args.count, seed0, args.out_dir, cfg,
                                    args.workers)
    errors = sum(1 for r in rows if r["error"])
    sys.stdout.write(format_summary(summary))
    sys.stdout.write(format_summary(tsum))
    print(f"{len(rows)} rows, {errors} errors, written to {args.out_dir}")
    return EXIT_OK


def _cmd_render(args) -> int:
    try:
        text = Path(args.report).read_text()
    except OSError as exc:
        raise InputError(str(exc)) from exc
    svg = render_svg(SolveReport.from_json(text))
    _emit(svg, args.out or str(Path(args.report).with_suffix(".svg")))
    return EXIT_OK


def _cmd_agcs(args) -> int:
    if args.action == "count":
        s, v, e = agcs.count_formulas(args.n)
        print(f"subgraphs={s} vertices={v} edges={e}")
        return EXIT_OK
    g = agcs.build(args.n)
    if args.action == "build":
        s, v, e = g.counts()
        ok = g.counts() == agcs.count_formulas(args.n)
        print(f"subgraphs={s} vertices={v} edges={e} formulas={'match' if ok else 'MISMATCH'}")
        return EXIT_OK if ok else EXIT_NUMERIC
    text = agcs.export_dot(g) if args.format == "dot" else agcs.export_json(g)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {"generate": _cmd_generate, "solve": _cmd_solve, "bench": _cmd_bench,
            "render": _cmd_render, "agcs": _cmd_agcs}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.verb](args)
    except GuardError as exc:
        print(f"gcs-tsp: guard violation: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except NumericalError as exc:
        print(f"gcs-tsp: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, InputError, GcsTspError, OSError) as exc:
        print(f"gcs-tsp: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    raise SystemExit(main())
