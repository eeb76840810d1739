"""Command-line entry point wiring the laboratory together.

Every run resolves its configuration (map source, numeric parameters, seed)
into ``config.json`` inside the output directory, sufficient to reproduce the
job byte for byte at the same seed and thread count.  Failures exit nonzero
after printing a machine-readable JSON error naming the violated condition.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels, render, stats, symbolic, transfer, vexp
from .errors import GhmError
from .maps import build_affine_family, load_map_spec, save_map_spec, validate_hyperbolicity
from .symbolic import Word


def _parse_family(text):
    params = {}
    for part in text.split(","):
        if not part:
            continue
        try:
            key, value = part.split("=", 1)
        except ValueError:
            raise ValueError(f"family parameter {part!r} is not key=value") from None
        params[key.strip()] = value.strip()
    n = int(params.pop("n"))
    lam_c = float(params.pop("lambda"))
    angle = params.pop("angle_scale", "0")
    angle = "max" if angle == "max" else float(angle)
    layout = params.pop("layout", "stack")
    k = float(params.pop("k")) if "k" in params else None
    if params:
        raise ValueError(f"unknown family parameters: {sorted(params)}")
    return {"n": n, "lambda_c": lam_c, "angle_scale": angle, "layout": layout, "k": k}


def _resolve_map(args):
    if bool(args.family) == bool(args.spec):
        raise ValueError("exactly one of --family or --spec is required")
    if args.family:
        fam = _parse_family(args.family)
        ghm = build_affine_family(
            fam["n"], fam["lambda_c"], fam["angle_scale"], fam["layout"], fam["k"]
        )
        source = {"family": args.family}
    else:
        ghm = load_map_spec(args.spec)
        source = {"spec": str(args.spec)}
    return ghm, source


def _steps_list(text):
    return sorted({int(s) for s in text.split(",") if s})


def _write_json(path, payload):
    with open(path, "w", encoding="utf8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _echo_config(outdir, args, ghm, source, extra=None):
    cfg = {
        "command": args.command,
        "version": __version__,
        "backend": kernels.backend_name(),
        "seed": args.seed,
        "threads": args.threads,
        "map": source,
        "map_summary": {
            "n_branches": ghm.n_branches,
            "k": ghm.k,
            "lambda": ghm.lam,
            "overlap": ghm.overlap_flag,
        },
    }
    if extra:
        cfg["parameters"] = extra
    _write_json(outdir / "config.json", cfg)
    try:
        _write_json(outdir / "map.json", save_map_spec(ghm))
    except GhmError:
        pass  # smooth or curvilinear maps are not serialized


def _cmd_validate(args, ghm, outdir):
    report = validate_hyperbolicity(ghm, args.samples, seed=args.seed)
    _write_json(outdir / "cone_report.json", report.to_dict())
    print(f"cone report: {report.to_dict()}")
    return 0


def _cmd_strips(args, ghm, outdir):
    symbols = tuple(int(s) for s in args.word.split(","))
    word = Word(symbols, args.orientation)
    region = symbolic.refine_strip(ghm, word)
    rows = zip(region.param, region.lower, region.upper, strict=True)
    render.write_csv(
        outdir / "strip.csv",
        [(f"{t:.17g}", f"{lo:.17g}", f"{hi:.17g}") for t, lo, hi in rows],
        header=("param", "lower", "upper"),
    )
    if args.render:
        render.svg_overlay(
            outdir / "strip.svg",
            strips=[region] + [b.domain for b in ghm.branches],
        )
    print(f"strip width: {region.width:.6g}")
    return 0


def _cmd_manifolds(args, ghm, outdir):
    rng = np.random.default_rng(args.seed)
    words = []
    for b in ghm.branches:
        words.append(Word((b.id,), "stable"))
        words.append(Word((b.id,), "unstable"))
    ids = ghm.branch_ids
    for _ in range(args.count):
        syms = tuple(ids[i] for i in rng.integers(0, len(ids), size=3))
        words.append(Word(syms, "stable"))
        words.append(Word(syms, "unstable"))
    polys = []
    for i, w in enumerate(words):
        poly = symbolic.manifold_approx(ghm, w, args.depth)
        color = "#1b6ca8" if w.orientation == "stable" else "#c23b22"
        polys.append((poly, color))
        tag = "s" if w.orientation == "stable" else "u"
        render.polyline_csv(outdir / f"manifold_{tag}{i:02d}.csv", poly)
    render.svg_overlay(outdir / "manifolds.svg", polylines=polys)
    print(f"wrote {len(polys)} manifold polylines at depth {args.depth}")
    return 0


def _cmd_attractor(args, ghm, outdir):
    steps = _steps_list(args.steps)
    n_steps = max(steps) if steps else 0
    result = stats.push_cloud(
        ghm, int(float(args.points)), n_steps, seed=args.seed, m=args.grid, snapshot_steps=steps
    )
    for step, snap in sorted(result.snapshots.items()):
        render.density_csv(outdir / f"cloud_step{step:03d}.csv", snap)
        render.svg_overlay(outdir / f"frame_step{step:03d}.svg", density=snap)
    depth = args.depth or n_steps
    cells = symbolic.attractor_cells(ghm, max(depth, 1), args.grid)
    render.cells_csv(outdir / "attractor_cells.csv", cells)
    if args.render:
        render.svg_overlay(outdir / "attractor_cells.svg", cell_mask=cells)
    print(
        f"cloud of {args.points} points over {n_steps} steps; "
        f"attractor cells cover {cells.mean():.4f} of the square"
    )
    return 0


def _cmd_density(args, ghm, outdir):
    P = transfer.ulam_matrix(ghm, args.grid, args.samples_per_cell, seed=args.seed)
    h = transfer.stationary_density(P, tol=args.tol)
    render.density_csv(outdir / "density.csv", h)
    seminorm = transfer.sobolev_seminorm(h, args.mu)
    _write_json(
        outdir / "density_report.json",
        {
            "grid": args.grid,
            "samples_per_cell": args.samples_per_cell,
            "tol": args.tol,
            "sobolev_mu": args.mu,
            "sobolev_seminorm": seminorm,
        },
    )
    if args.render:
        render.density_png(outdir / "density.png", h)
    print(f"stationary density on {args.grid}^2 grid; |h|_mu = {seminorm:.6g} at mu={args.mu}")
    return 0


def _cmd_gap(args, ghm, outdir):
    P = transfer.ulam_matrix(ghm, args.grid, args.samples_per_cell, seed=args.seed)
    report = transfer.spectral_gap(P)
    _write_json(outdir / "gap_report.json", report.to_dict())
    print(f"spectral report: {report.to_dict()}")
    return 0


def _cmd_vexp(args, ghm, outdir):
    report = vexp.beta_mu_estimate(ghm, args.mu, args.nmax, args.xres, args.angleres)
    _write_json(outdir / "expansion_report.json", report.to_dict())
    np.savetxt(outdir / "b_field.csv", report.field, delimiter=",", fmt="%.17g")
    render.write_csv(
        outdir / "base_points.csv",
        [(f"{x:.17g}", f"{y:.17g}") for x, y in report.base_points],
        header=("x", "y"),
    )
    pieces = vexp.coverage_partition(ghm, args.coverage_res)
    _write_json(outdir / "coverage.json", [p.to_dict() for p in pieces])
    if args.render:
        render.svg_overlay(outdir / "coverage.svg", pieces=pieces)
    print(
        f"beta sequence: {[f'{b:.4f}' for b in report.beta_sequence]} "
        f"(virtually expanding: {report.verdict}); {len(pieces)} coverage pieces"
    )
    return 0


def _cmd_stats(args, ghm, outdir):
    f = stats.builtin_observable(args.observable)
    g = stats.builtin_observable(args.observable2 or args.observable)
    series = stats.correlation_series(
        ghm, f, g, args.nmax, int(float(args.orbit_len)), burn_in=args.burn_in, seed=args.seed
    )
    render.write_csv(
        outdir / "correlation.csv",
        [(int(n), f"{v:.17g}") for n, v in zip(series.lags, series.values, strict=True)],
        header=("lag", "covariance"),
    )
    clt = stats.clt_diagnostic(ghm, f, args.block_len, args.samples, seed=args.seed)
    _write_json(
        outdir / "stats_report.json",
        {
            "observable": args.observable,
            "fitted_rate": series.fitted_rate,
            "noise_floor": series.noise_floor,
            "clt": clt.to_dict(),
        },
    )
    print(f"fitted correlation rate: {series.fitted_rate}; KS statistic: {clt.ks_statistic:.4f}")
    return 0


_HANDLERS = {
    "validate": _cmd_validate,
    "strips": _cmd_strips,
    "manifolds": _cmd_manifolds,
    "attractor": _cmd_attractor,
    "density": _cmd_density,
    "gap": _cmd_gap,
    "vexp": _cmd_vexp,
    "stats": _cmd_stats,
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ghmlab",
        description="Numerical laboratory for generalized horseshoe maps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--family", help="n=<int>,lambda=<real>[,angle_scale=<real>|max][,layout=stack|spread][,k=<real>]")
        p.add_argument("--spec", help="path to a map-spec JSON document")
        p.add_argument("--out", default=None, help="output directory (default ghmlab-<command>)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1,
                       help="reserved; results are seed-determined regardless of thread count")
        p.add_argument("--render", action="store_true", help="write graphical artifacts")

    p = sub.add_parser("validate", help="hyperbolicity axiom audit")
    common(p)
    p.add_argument("--samples", type=int, default=10_000)

    p = sub.add_parser("strips", help="refine one symbolic strip")
    common(p)
    p.add_argument("--word", required=True, help="comma-separated branch ids")
    p.add_argument("--orientation", choices=("stable", "unstable"), default="stable")

    p = sub.add_parser("manifolds", help="approximate stable/unstable manifolds")
    common(p)
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--count", type=int, default=4, help="extra random words per orientation")

    p = sub.add_parser("attractor", help="orbit-cloud frames and attractor cells")
    common(p)
    p.add_argument("--points", default="1e6")
    p.add_argument("--steps", default="1,15", help="comma-separated snapshot steps")
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--depth", type=int, default=None, help="cell-mapping depth (default max step)")

    p = sub.add_parser("density", help="Ulam stationary density and Sobolev diagnostic")
    common(p)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--samples-per-cell", type=int, default=256)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--mu", type=float, default=0.25)

    p = sub.add_parser("gap", help="spectral gap of the Ulam matrix")
    common(p)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--samples-per-cell", type=int, default=256)

    p = sub.add_parser("vexp", help="virtual-expansion certificate and coverage partition")
    common(p)
    p.add_argument("--mu", type=float, default=0.25)
    p.add_argument("--nmax", type=int, default=4)
    p.add_argument("--xres", type=int, default=64)
    p.add_argument("--angleres", type=int, default=64)
    p.add_argument("--coverage-res", type=int, default=128)

    p = sub.add_parser("stats", help="correlation decay and CLT diagnostics")
    common(p)
    p.add_argument("--observable", default="coord_x")
    p.add_argument("--observable2", default=None)
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--orbit-len", default="1e6")
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--block-len", type=int, default=1000)
    p.add_argument("--samples", type=int, default=10_000)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        ghm, source = _resolve_map(args)
        outdir = Path(args.out or f"ghmlab-{args.command}")
        outdir.mkdir(parents=True, exist_ok=True)
        extra = {
            key: value
            for key, value in vars(args).items()
            if key not in ("command", "family", "spec", "out") and value is not None
        }
        _echo_config(outdir, args, ghm, source, extra)
        return _HANDLERS[args.command](args, ghm, outdir)
    except (GhmError, ValueError, KeyError) as exc:
        axiom = getattr(exc, "axiom", None)
        payload = {"error": type(exc).__name__, "message": str(exc)}
        if axiom:
            payload["axiom"] = axiom
        print(json.dumps(payload))
        return 1


if __name__ == "__main__":
    sys.exit(main())
