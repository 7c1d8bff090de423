"""Command-line front end.

Every command that writes files writes them into ``--out`` together with a
``manifest.json`` recording the command line, inputs and timing.  ``rerun``
replays a manifest.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import VectorUltrafunction, assemble_derivative, gauss_check, gradient
from .conservation import (
    FluxModel, MarginViolation, NonFiniteState, SolverConfig, advection, burgers,
    conservation_report, margin_band, solve,
)
from .expr import ExpressionError, parse
from .grid import Grid, Region
from .lebesgue import lebesgue_average
from .quadrature import QuadratureError
from .refine import (
    centred_grids, derivative_error_functional, gauss_residual_functional, nested_grids,
    origin_value_functional, region_integral_functional, run_chain, shape_region,
)
from .ultraspace import RadonMeasureSpec, Ultrafunction, format_real, project_function, project_measure

EXIT_MARGIN = 3
EXIT_NONFINITE = 4


@dataclass
class RunManifest:
    command: str
    argv: list
    inputs: dict
    params: dict
    output_dir: str
    cwd: str = ""
    version: str = __version__
    started: str = ""
    wall_clock_seconds: float = 0.0
    outputs: list = field(default_factory=list)


def write_atomic(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def _compile(source: str):
    return parse(source).point_function()


def _parse_point(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError:
        raise SystemExit(f"cannot parse point {text!r}") from None


def flux_from_spec(spec: str, dim: int) -> FluxModel:
    """``burgers``, ``advection:a[,b,...]`` or ``expr:F1;F2;...`` (plain expressions also accepted)."""
    if spec == "burgers":
        return burgers(dim)
    if spec.startswith("advection"):
        _, _, rest = spec.partition(":")
        vel = [float(v) for v in rest.split(",")] if rest else [1.0]
        if len(vel) == 1:
            vel = vel * dim
        if len(vel) != dim:
            raise ValueError(f"advection needs {dim} velocity components, got {len(vel)}")
        return advection(vel)
    body = spec[5:] if spec.startswith("expr:") else spec
    parts = [p for p in body.split(";") if p.strip()]
    if len(parts) == 1:
        parts = parts * dim
    if len(parts) != dim:
        raise ValueError(f"flux needs {dim} components, got {len(parts)}")
    comps = [parse(p).flux_function() for p in parts]
    return FluxModel(tuple(comps), zero_at_zero=False, name="expr:" + ";".join(parts))


class _Run:
    """Collects outputs and writes the manifest at the end of a command."""

    def __init__(self, args, command: str, inputs: dict):
        self.out = Path(args.out) if getattr(args, "out", None) else None
        self.start = time.perf_counter()
        params = {k: v for k, v in vars(args).items() if k not in ("func", "out", "argv", "command") and not k.endswith("_file")}
        self.manifest = RunManifest(
            command=command, argv=list(getattr(args, "argv", [])), inputs=inputs, params=params,
            output_dir=str(self.out) if self.out else "", cwd=os.getcwd(),
            started=_dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        )
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name: str, text: str) -> Path:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        write_atomic(path, text)
        self.manifest.outputs.append(name)
        return path

    def figure(self, name: str, draw) -> None:
        path = self.out / name
        draw(path)
        self.manifest.outputs.append(name)

    def finish(self) -> None:
        if self.out is None:
            return
        self.manifest.wall_clock_seconds = round(time.perf_counter() - self.start, 6)
        write_atomic(self.out / "manifest.json", json.dumps(asdict(self.manifest), indent=2, default=str) + "\n")


def _ultrafunction_outputs(run: _Run, u: Ultrafunction, stem: str, figures: bool, title: str) -> None:
    run.write(f"{stem}.json", u.to_json() + "\n")
    run.write(f"{stem}.csv", u.to_csv())
    if figures:
        from .plotting import plot_ultrafunction
        run.figure(f"{stem}.png", lambda p: plot_ultrafunction(u, p, title=title))


def cmd_build(args) -> int:
    extent = [int(v) for v in args.extent.split(",")]
    if len(extent) == 1:
        extent = extent * args.dim
    origin = _parse_point(args.origin)
    if len(origin) == 1:
        origin = origin * args.dim
    grid = Grid(tuple(extent), tuple(origin), args.h)
    run = _Run(args, "build", {})
    run.write("grid.json", json.dumps(grid.to_dict()) + "\n")
    if args.shape:
        region = shape_region(grid, json.loads(args.shape))
        run.write("region.json", region.to_json() + "\n")
    run.finish()
    return 0


def cmd_project(args) -> int:
    inputs = {}
    if args.measure:
        data = _load_json(args.measure)
        inputs["measure"] = args.measure
        mu, grid = RadonMeasureSpec.from_dict(data, compile_density=_compile)
        if args.grid:
            grid = Grid.from_dict(_load_json(args.grid))
            inputs["grid"] = args.grid
        run = _Run(args, "project", inputs)
        u = project_measure(mu, grid, rtol=args.rtol)
        title = f"projection of {Path(args.measure).name}"
    else:
        if not args.grid:
            raise SystemExit("project --expr needs --grid")
        grid = Grid.from_dict(_load_json(args.grid))
        inputs["grid"] = args.grid
        run = _Run(args, "project", inputs)
        u = project_function(_compile(args.expr), grid, rtol=args.rtol)
        title = args.expr
    _ultrafunction_outputs(run, u, "ultrafunction", args.figures, title)
    run.finish()
    if not args.out:
        print(u.to_json())
    return 0


def cmd_derive(args) -> int:
    u = Ultrafunction.from_dict(_load_json(args.u))
    run = _Run(args, "derive", {"u": args.u})
    if np.any(margin_band(u.grid, 1) & (u.coeffs != 0)):
        print("warning: support touches the box boundary; the derivative there sees a jump to zero", file=sys.stderr)
    if args.axis is None:
        g = gradient(u)
        payload = g.to_dict()
        for j, comp in enumerate(g.components):
            if run.out:
                _ultrafunction_outputs(run, comp, f"derivative_{j}", args.figures, f"D_{j} u")
    else:
        d = assemble_derivative(u.grid, args.axis)(u)
        payload = d.to_dict()
        if run.out:
            _ultrafunction_outputs(run, d, f"derivative_{args.axis}", args.figures, f"D_{args.axis} u")
    run.finish()
    if not run.out:
        print(json.dumps(payload))
    return 0


def cmd_gauss(args) -> int:
    phi = VectorUltrafunction.from_dict(_load_json(args.phi))
    region = Region.from_dict(_load_json(args.region))
    report = gauss_check(phi, region, tol=args.tol)
    d = report.to_dict()
    text = json.dumps(d, indent=2) + "\n"
    if args.out:
        run = _Run(args, "gauss-check", {"phi": args.phi, "region": args.region})
        run.write("gauss_report.json", text)
        run.finish()
    print(text, end="")
    return 0 if report.passed else 1


def cmd_lebesgue(args) -> int:
    region = Region.from_dict(_load_json(args.region))
    x = _parse_point(args.point)
    eta = args.eta if args.eta is not None else 0.25 * region.grid.h
    value = lebesgue_average(region, x, eta)
    print(json.dumps({"point": x, "eta": eta, "value": value}))
    return 0


def _load_u0(args) -> tuple[Ultrafunction, dict]:
    if args.u0:
        return Ultrafunction.from_dict(_load_json(args.u0)), {"u0": args.u0}
    if args.u0_expr and args.grid:
        grid = Grid.from_dict(_load_json(args.grid))
        return project_function(_compile(args.u0_expr), grid), {"grid": args.grid}
    raise SystemExit("solve needs --u0 FILE or --u0-expr EXPR --grid FILE")


def cmd_solve(args) -> int:
    u0, inputs = _load_u0(args)
    flux = flux_from_spec(args.flux, u0.grid.dim)
    region = Region.full(u0.grid)
    if args.region:
        region = Region.from_dict(_load_json(args.region))
        inputs["region"] = args.region
    run = _Run(args, "solve", inputs)
    config = SolverConfig(T=args.T, dt=args.dt, snap_every=args.snap_every, support_margin=args.margin)
    try:
        trace = solve(u0, flux, config, regions={"region": region})
    except MarginViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.finish()
        return EXIT_MARGIN
    except NonFiniteState as exc:
        print(f"error: {exc}", file=sys.stderr)
        run.finish()
        return EXIT_NONFINITE

    for k, (t, u) in enumerate(zip(trace.times, trace.snapshots)):
        run.write(f"snapshots/snap_{k:05d}.json", json.dumps({"t": t, **u.to_dict()}) + "\n")
    rows = conservation_report(trace, region)
    q0 = trace.q[0]
    buf = [["t", "Q", "dQ", "region_flux_residual"]]
    qs = []
    for row in rows:
        q = trace.q[int(round(row.t / trace.dt))] if trace.dt else q0
        qs.append(q)
        buf.append([format_real(row.t), format_real(q), format_real(q - q0), format_real(row.residual)])
    run.write("conservation.csv", "".join(",".join(r) + "\n" for r in buf))
    if args.figures:
        from .plotting import plot_conservation, plot_snapshots
        run.figure("conservation.png", lambda p: plot_conservation([r.t for r in rows], qs, [r.residual for r in rows], p))
        run.figure("snapshots.png", lambda p: plot_snapshots(trace.times, trace.snapshots, p))
    run.finish()
    print(f"solved to T={args.T} in {len(trace.q) - 1} steps (dt={trace.dt:.6g}); max |Q-Q0| = {trace.q_drift:.3e}")
    return 0


def _refine_grids(args, dim: int):
    if args.centred:
        return centred_grids(dim, args.half_width, args.h0, args.levels)
    if not args.grid:
        raise SystemExit("refine needs --grid or --centred")
    return nested_grids(Grid.from_dict(_load_json(args.grid)), args.levels)


def cmd_refine(args) -> int:
    dim = args.dim
    if args.grid:
        dim = Grid.from_dict(_load_json(args.grid)).dim
    grids = _refine_grids(args, dim)
    shape = json.loads(args.shape) if args.shape else None
    kind = "value"
    if args.functional == "region-integral":
        fn = region_integral_functional(_compile(args.expr), shape)
    elif args.functional == "derivative-error":
        kind = "error"
        fn = derivative_error_functional(_compile(args.expr), _compile(args.exact), axis=args.axis)
    elif args.functional == "gauss-residual":
        comps = [_compile(c) for c in args.expr.split(";")]
        fn = gauss_residual_functional(comps, shape, variant=args.variant)
    elif args.functional == "origin-value":
        fn = origin_value_functional(_compile(args.expr))
    else:  # max-abs
        def fn(g):
            u0 = project_function(_compile(args.expr), g)
            trace = solve(u0, flux_from_spec(args.flux, g.dim), SolverConfig(T=args.T))
            return float(np.max(np.abs(trace.snapshots[-1].coeffs)))
    table = run_chain(grids, fn, args.functional, kind)
    run = _Run(args, "refine", {"grid": args.grid} if args.grid else {})
    header = ["stage", "h", "value", "difference", "order", "growth"]
    lines = [",".join(header)]
    for row in table.rows():
        lines.append(",".join("" if row[k] is None else (str(row[k]) if k == "stage" else format_real(row[k])) for k in header))
    text = "\n".join(lines) + "\n"
    if run.out:
        run.write("convergence.csv", text)
        if args.figures:
            from .plotting import plot_refinement
            run.figure("convergence.png", lambda p: plot_refinement(table, p))
    run.finish()
    print(text, end="")
    return 0


def cmd_verify(args) -> int:
    from .verify import run_suite
    results = run_suite(args.suite)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return 0 if all(ok for _, ok, _ in results) else 1


def cmd_rerun(args) -> int:
    """Replay from the recorded working directory so relative paths resolve as before."""
    manifest = _load_json(args.manifest)
    here = os.getcwd()
    os.chdir(manifest.get("cwd") or here)
    try:
        return main(manifest["argv"])
    finally:
        os.chdir(here)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ultracalc", description="Finite-stage ultrafunction calculus.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build", help="write a grid (and optionally a region) as JSON")
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--extent", required=True, help="cells per axis, one value or comma separated")
    s.add_argument("--origin", default="0", help="lower corner, one value or comma separated")
    s.add_argument("--h", type=float, required=True)
    s.add_argument("--shape", help='region shape JSON, e.g. {"ball": [0, 0, 0.5]}')
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("project", help="project a function or a measure onto a grid")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--expr", help="function of x, y, z, r")
    src.add_argument("--measure", help="measure JSON file")
    s.add_argument("--grid", help="grid JSON file")
    s.add_argument("--rtol", type=float, default=1e-10)
    s.add_argument("--out")
    s.add_argument("--figures", action="store_true", help="also render PNG figures")
    s.set_defaults(func=cmd_project)

    s = sub.add_parser("derive", help="apply the derivative (or gradient) to an ultrafunction")
    s.add_argument("--u", required=True)
    s.add_argument("--axis", type=int)
    s.add_argument("--out")
    s.add_argument("--figures", action="store_true")
    s.set_defaults(func=cmd_derive)

    s = sub.add_parser("gauss-check", help="discrete divergence theorem report")
    s.add_argument("--phi", required=True)
    s.add_argument("--region", required=True)
    s.add_argument("--tol", type=float, default=1e-12)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gauss)

    s = sub.add_parser("lebesgue", help="ball average of a region's characteristic function")
    s.add_argument("--region", required=True)
    s.add_argument("--point", required=True, help='comma separated, e.g. "0.5,1.0"')
    s.add_argument("--eta", type=float)
    s.set_defaults(func=cmd_lebesgue)

    s = sub.add_parser("solve", help="integrate a scalar conservation law")
    s.add_argument("--flux", required=True, help="burgers | advection:a[,b..] | expr:F1;F2")
    s.add_argument("--u0")
    s.add_argument("--u0-expr")
    s.add_argument("--grid")
    s.add_argument("--T", type=float, required=True)
    s.add_argument("--dt", type=float)
    s.add_argument("--snap-every", type=float)
    s.add_argument("--margin", type=int, default=2)
    s.add_argument("--region", help="region JSON for the flux-balance residual (default: whole box)")
    s.add_argument("--out", required=True)
    s.add_argument("--figures", action="store_true")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("refine", help="evaluate a functional along a refinement chain")
    s.add_argument("--functional", required=True,
                   choices=["region-integral", "derivative-error", "gauss-residual", "origin-value", "max-abs"])
    s.add_argument("--expr", required=True, help="integrand / function / field components separated by ';'")
    s.add_argument("--exact", help="exact derivative for derivative-error")
    s.add_argument("--axis", type=int, default=0)
    s.add_argument("--shape", help='region shape JSON, e.g. {"ball": [0, 0, 0.5]}')
    s.add_argument("--variant", default="pointwise", choices=["pointwise", "lemma", "tv", "lhs"])
    s.add_argument("--flux", default="burgers")
    s.add_argument("--T", type=float, default=0.1)
    s.add_argument("--grid", help="base grid JSON (nested chain)")
    s.add_argument("--centred", action="store_true", help="odd grids centred on the origin")
    s.add_argument("--dim", type=int, default=1)
    s.add_argument("--half-width", type=float, default=0.5)
    s.add_argument("--h0", type=float, default=0.1)
    s.add_argument("--levels", type=int, default=3)
    s.add_argument("--out")
    s.add_argument("--figures", action="store_true")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("verify", help="compare fast paths with the dense oracle")
    s.add_argument("--suite", default="all", choices=["all", "derivative", "projection", "gauss"])
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("rerun", help="replay the command recorded in a manifest")
    s.add_argument("manifest")
    s.set_defaults(func=cmd_rerun)
    return p


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except (ExpressionError, QuadratureError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
