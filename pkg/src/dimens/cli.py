"""Command line interface: gen, entropy, geom, scan, verify, export.

Every artifact starts with a header carrying the tool version, the seed and
a hash of the resolved configuration, so runs are reproducible and outputs
diff cleanly.  No timestamps are written anywhere: identical invocations
produce byte-identical files.  Exit codes: 0 success, 1 domain error,
2 configuration error.  Partially written outputs are removed on failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, entropy, geometry, scalestats, verify
from .dyadic import DomainError, DyadicCube, DyadicMassTree
from .generators import (build, estimate_leaf_cells, parse_measure_spec,
                         spec_to_json)

MEMORY_GUARD_CELLS = 1 << 26


class ConfigError(Exception):
    """Malformed invocation or configuration document."""


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _header(command: str, seed: int, config: dict) -> str:
    return f"# dimens v{__version__} command={command} seed={seed} config={config_hash(config)}"


def _load_spec(arg: str) -> tuple[dict, object]:
    """Accept a path to a JSON spec or an inline JSON document."""
    text = arg
    if Path(arg).exists():
        text = Path(arg).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"measure spec is not valid JSON: {exc}") from exc
    try:
        return doc, parse_measure_spec(doc)
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def _load_points(tree: DyadicMassTree, arg: str, seed: int) -> np.ndarray:
    """Either an integer count of measure-drawn points or a file of
    whitespace-separated coordinates, one point per line."""
    try:
        n = int(arg)
    except ValueError:
        rows = []
        for line in Path(arg).read_text().splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                rows.append([float(v) for v in line.split()])
        return np.array(rows)
    rng = np.random.default_rng(seed)
    return tree.sample_points(n, rng)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_gen(args, outputs: list[Path]) -> int:
    doc, spec = _load_spec(args.spec)
    estimate = estimate_leaf_cells(spec, args.depth)
    if estimate > MEMORY_GUARD_CELLS:
        raise ConfigError(f"depth {args.depth} estimates {estimate} leaf cells, "
                          f"beyond the 2^26 memory guard")
    tree = build(spec, args.depth)
    out = Path(args.out)
    outputs.append(out)
    config = {"command": "gen", "spec": doc, "depth": args.depth, "seed": args.seed}
    tmp = out.with_suffix(out.suffix + ".body")
    outputs.append(tmp)
    tree.save(tmp)
    with open(out, "w") as fh:
        fh.write(_header("gen", args.seed, config) + "\n")
        fh.write(tmp.read_text())
    tmp.unlink()
    outputs.remove(tmp)
    return 0


def load_tree_file(path: str) -> DyadicMassTree:
    """Read a tree file, tolerating the CLI provenance header line."""
    import tempfile
    text = Path(path).read_text().splitlines()
    start = 0
    while start < len(text) and text[start].startswith("#"):
        start += 1
    with tempfile.NamedTemporaryFile("w", suffix=".tree", delete=False) as fh:
        fh.write("\n".join(text[start:]) + "\n")
        name = fh.name
    try:
        return DyadicMassTree.load(name)
    finally:
        os.unlink(name)


def _cmd_entropy(args, outputs: list[Path]) -> int:
    tree = load_tree_file(args.tree)
    pts = _load_points(tree, args.points, args.seed)
    config = {"command": "entropy", "tree": args.tree, "points": args.points,
              "a": args.a, "N": args.N, "seed": args.seed}
    out = Path(args.out)
    outputs.append(out)
    with open(out, "w", newline="") as fh:
        fh.write(_header("entropy", args.seed, config) + "\n")
        writer = csv.writer(fh)
        coords = [f"x{j}" for j in range(tree.dimension)]
        writer.writerow(coords + ["k", "H_a", "running_average"])
        for x in np.atleast_2d(pts):
            profile = entropy.entropy_average(tree, x, args.a, args.N)
            for k in range(profile.horizon):
                writer.writerow([repr(float(v)) for v in x]
                                + [k + 1, repr(float(profile.entropies[k])),
                                   repr(float(profile.averages[k]))])
    return 0


def _cmd_geom(args, outputs: list[Path]) -> int:
    tree = load_tree_file(args.tree)
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is not valid JSON: {exc}") from exc
    config = {"command": "geom", "tree": args.tree, "op": args.op,
              "params": params, "seed": args.seed}
    out = Path(args.out)
    outputs.append(out)
    rows: list[list] = []
    if args.op == "cone":
        res = geometry.min_conical_ratio(
            tree, params["x"], int(params["k"]), float(params["alpha"]),
            int(params["m"]), frames=int(params.get("frames", 64)),
            seed=args.seed, resolution=params.get("resolution"))
        header = ["op", "k", "alpha", "m", "frames", "seed", "ratio"]
        rows.append(["cone", params["k"], params["alpha"], params["m"],
                     res.frames, args.seed, repr(res.ratio)])
    elif args.op == "hom":
        count = geometry.euclidean_homogeneity(
            tree, params["x"], int(params["k"]), float(params["delta"]),
            float(params["epsilon"]),
            enlargement=float(params.get("enlargement", 5.0)))
        header = ["op", "k", "delta", "epsilon", "frames", "seed", "count"]
        rows.append(["hom", params["k"], params["delta"], params["epsilon"],
                     0, args.seed, count])
    elif args.op == "dyhom":
        count = geometry.dyadic_homogeneity(
            tree, params["x"], int(params["k"]), int(params["a"]),
            float(params["epsilon"]))
        header = ["op", "k", "a", "epsilon", "frames", "seed", "count"]
        rows.append(["dyhom", params["k"], params["a"], params["epsilon"],
                     0, args.seed, count])
    elif args.op == "por":
        res = geometry.porosity_search(
            tree, params["x"], float(params["r"]),
            holes=int(params.get("holes", 1)), mode=params.get("mode", "set"),
            epsilon=params.get("epsilon"),
            frames=int(params.get("frames", 2)), seed=args.seed)
        header = ["op", "r", "holes", "mode", "frames", "seed", "rho"]
        rows.append(["por", params["r"], params.get("holes", 1),
                     params.get("mode", "set"), params.get("frames", 2),
                     args.seed, repr(res.rho)])
    elif args.op == "decomp":
        cube = DyadicCube(int(params["level"]), tuple(params["index"]))
        dec = geometry.decompose_porous(
            tree, cube, float(params["alpha"]), float(params["epsilon"]),
            holes=int(params.get("holes", 1)),
            frames=int(params.get("frames", 2)), seed=args.seed)
        c = dec.certificates
        header = ["op", "level", "alpha", "epsilon", "frames", "seed",
                  "mu_E", "mu_3Q", "c0", "e_bound_ok", "p_cover_count",
                  "porous_children"]
        rows.append(["decomp", params["level"], params["alpha"],
                     params["epsilon"], params.get("frames", 2), args.seed,
                     repr(c["mu_E"]), repr(c["mu_3Q"]), c["c0"],
                     c["e_bound_ok"], c["p_cover_count"],
                     c["porous_children"]])
    else:
        raise ConfigError(f"unknown geom op {args.op!r}")
    with open(out, "w", newline="") as fh:
        fh.write(_header("geom", args.seed, config) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return 0


def _cmd_scan(args, outputs: list[Path]) -> int:
    tree = load_tree_file(args.tree)
    text = args.predicates
    if Path(text).exists():
        text = Path(text).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--predicates is not valid JSON: {exc}") from exc
    try:
        predicates = {name: scalestats.PredicateSpec(p["kind"],
                                                     {k: v for k, v in p.items() if k != "kind"})
                      for name, p in doc.items()}
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed predicate document: {exc}") from exc
    pts = _load_points(tree, args.points, args.seed)
    config = {"command": "scan", "tree": args.tree, "predicates": doc,
              "points": args.points, "N": args.N, "seed": args.seed}
    out = Path(args.out)
    outputs.append(out)
    with open(out, "w", newline="") as fh:
        fh.write(_header("scan", args.seed, config) + "\n")
        writer = csv.writer(fh)
        coords = [f"x{j}" for j in range(tree.dimension)]
        writer.writerow(coords + ["predicate", "fraction", "truncated_at"])
        for x in np.atleast_2d(pts):
            report = scalestats.scale_fraction(tree, x, args.N, predicates)
            for name in predicates:
                writer.writerow([repr(float(v)) for v in x]
                                + [name, repr(report.fractions[name]),
                                   report.truncated[name] if report.truncated[name] else ""])
    return 0


def _cmd_verify(args, outputs: list[Path]) -> int:
    report = verify.run_suite(args.suite, args.depth, args.N, args.seed,
                              points=args.points, frames=args.frames)
    config = {"command": "verify", "suite": args.suite, "depth": args.depth,
              "N": args.N, "seed": args.seed, "points": args.points,
              "frames": args.frames}
    report["config_hash"] = config_hash(config)
    blob = json.dumps(report, indent=2)
    if args.out:
        out = Path(args.out)
        outputs.append(out)
        out.write_text(blob + "\n")
    else:
        print(blob)
    return 0


def _cmd_export(args, outputs: list[Path]) -> int:
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report: {exc}") from exc
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    seed = report.get("seed", 0)
    config = {"command": "export", "report": args.report}
    cases = report.get("cases", [])

    def start(name, columns):
        path = outdir / name
        outputs.append(path)
        fh = open(path, "w", newline="")
        fh.write(_header("export", seed, config) + "\n")
        w = csv.writer(fh)
        w.writerow(columns)
        return fh, w

    fh, w = start("fraction_vs_scale.csv", ["fixture", "theorem", "k", "mean_ratio"])
    for c in cases:
        series = c.get("stats", {}).get("scale_mean_ratios")
        if series:
            for k, v in enumerate(series, start=1):
                w.writerow([c["fixture"], c["theorem"], k, repr(float(v))])
    fh.close()
    fh, w = start("dimension_vs_alpha.csv",
                  ["fixture", "alpha_gap", "dimension", "c_star"])
    for c in cases:
        st = c.get("stats", {})
        if c.get("theorem") == "porosity-dimension-bound" and "dimension" in st:
            w.writerow([c["fixture"], repr(float(c["params"]["alpha_gap"])),
                        repr(float(st["dimension"])), repr(float(st["c_star"]))])
    fh.close()
    fh, w = start("homogeneity_sweep.csv", ["fixture", "epsilon", "fraction"])
    for c in cases:
        for eps, frac in c.get("stats", {}).get("sweep", []):
            w.writerow([c["fixture"], repr(float(eps)), repr(float(frac))])
    fh.close()
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dimens",
                                 description="dyadic mass-tree measure toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="build a tree from a measure spec")
    gen.add_argument("--spec", required=True, help="JSON file or inline JSON")
    gen.add_argument("--depth", type=int, required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=0)

    ent = sub.add_parser("entropy", help="local entropy average profiles")
    ent.add_argument("--tree", required=True)
    ent.add_argument("--points", required=True,
                     help="count of measure-drawn points, or a coordinates file")
    ent.add_argument("--a", type=int, default=1)
    ent.add_argument("--N", type=int, required=True)
    ent.add_argument("--out", required=True)
    ent.add_argument("--seed", type=int, default=0)

    geo = sub.add_parser("geom", help="single geometry queries")
    geo.add_argument("--tree", required=True)
    geo.add_argument("--op", required=True,
                     choices=["cone", "hom", "dyhom", "por", "decomp"])
    geo.add_argument("--params", required=True, help="JSON parameter object")
    geo.add_argument("--seed", type=int, default=0)
    geo.add_argument("--out", required=True)

    scan = sub.add_parser("scan", help="per-point scale-fraction sweeps")
    scan.add_argument("--tree", required=True)
    scan.add_argument("--predicates", required=True,
                      help="JSON file or inline JSON: name -> predicate spec")
    scan.add_argument("--points", required=True)
    scan.add_argument("--N", type=int, required=True)
    scan.add_argument("--seed", type=int, default=0)
    scan.add_argument("--out", required=True)

    ver = sub.add_parser("verify", help="theorem-level verification suites")
    ver.add_argument("--suite", required=True, choices=list(verify.SUITES))
    ver.add_argument("--depth", type=int, required=True)
    ver.add_argument("--N", type=int, required=True)
    ver.add_argument("--seed", type=int, required=True)
    ver.add_argument("--points", type=int, default=4)
    ver.add_argument("--frames", type=int, default=16)
    ver.add_argument("--out", default=None)

    exp = sub.add_parser("export", help="plot-ready CSVs from a verify report")
    exp.add_argument("--report", required=True)
    exp.add_argument("--out-dir", required=True)
    return ap


def main(argv=None) -> int:
    os.environ.setdefault("DIMENS_THREADS", "1")  # sequential engine; recorded for callers
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    handlers = {
        "gen": _cmd_gen,
        "entropy": _cmd_entropy,
        "geom": _cmd_geom,
        "scan": _cmd_scan,
        "verify": _cmd_verify,
        "export": _cmd_export,
    }
    outputs: list[Path] = []
    try:
        return handlers[args.command](args, outputs)
    except ConfigError as exc:
        print(f"dimens: configuration error: {exc}", file=sys.stderr)
        _cleanup(outputs)
        return 2
    except DomainError as exc:
        print(f"dimens: domain error: {exc}", file=sys.stderr)
        _cleanup(outputs)
        return 1
    except FileNotFoundError as exc:
        print(f"dimens: missing file: {exc}", file=sys.stderr)
        _cleanup(outputs)
        return 2


def _cleanup(outputs):
    for p in outputs:
        try:
            Path(p).unlink()
        except OSError:
            pass


if __name__ == "__main__":
    sys.exit(main())
