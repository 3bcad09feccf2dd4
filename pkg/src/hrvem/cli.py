"""Command-line entry point: ``hrvem run|mesh|check``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .checks import property_suite
from .mesh import MeshError, MeshFamily, generate_mesh, validate_mesh, write_mesh
from .study import ConfigError, load_config, run_study, with_overrides

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _levels(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.replace(" ", "").split(",") if x)
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma separated integers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hrvem", description="Mixed virtual elements for plane elasticity.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a convergence study from a config file")
    r.add_argument("config", type=Path)
    r.add_argument("--k", type=int, help="polynomial order (overrides config)")
    r.add_argument("--test", choices=("a", "b", "c"), help="manufactured solution")
    r.add_argument("--levels", type=_levels, help="comma separated mesh resolutions")
    r.add_argument("--out-dir", type=Path, help="output directory")
    r.add_argument("--seed", type=int, help="mesh seed")
    r.add_argument("--tol", type=float, help="relative residual tolerance of the solve")

    m = sub.add_parser("mesh", help="generate a mesh and write it as JSON")
    m.add_argument("family", choices=[f.value for f in MeshFamily])
    m.add_argument("n", type=int)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--out", type=Path, help="output file (default: print a summary only)")

    c = sub.add_parser("check", help="run the numerical property suite")
    c.add_argument("--seed", type=int, default=0)
    return p


def _run(args) -> int:
    cfg = load_config(args.config)
    cfg = with_overrides(cfg, k=args.k, test=args.test, levels=args.levels,
                         out_dir=args.out_dir, seed=args.seed, tol=args.tol)
    report = run_study(cfg)
    print(f"wrote results to {cfg.out_dir}")
    for fr in report.families:
        rates = fr.rates(cfg.exact_threshold)
        shown = ", ".join(f"{k}={v if isinstance(v, str) else format(v, '.3f')}" for k, v in rates.items())
        print(f"  {fr.family}: {shown}" + (f" [aborted: {fr.error}]" if fr.error else ""))
    for f in report.failures:
        print(f"FAIL {f}")
    return EXIT_OK if report.ok else EXIT_FAIL


def _mesh(args) -> int:
    mesh = generate_mesh(args.family, args.n, seed=args.seed)
    rep = validate_mesh(mesh)
    print(f"{args.family} n={args.n}: {mesh.n_cells} cells, {mesh.n_edges} edges, "
          f"{mesh.n_vertices} vertices; {rep.summary()}")
    if args.out:
        write_mesh(mesh, args.out)
        print(f"wrote {args.out}")
    return EXIT_OK


def _check(args) -> int:
    results = property_suite(seed=args.seed)
    for r in results:
        print(r.line())
    bad = sum(not r.ok for r in results)
    print(f"{len(results) - bad}/{len(results)} checks passed")
    return EXIT_OK if bad == 0 else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": _run, "mesh": _mesh, "check": _check}[args.command](args)
    except (ConfigError, MeshError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
