"""
Command-line front end.

``treespace distance``, ``consensus``, ``pca`` and ``simulate``. Failures
print a single ``error: <category>: <message>`` line to stderr and exit
nonzero.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .consensus import back_transform, majority_consensus, normalize_lengths
from .core import NewickError, TaxonSet, Tree, TreeError, format_trees, parse_newick, read_trees, write_newick
from .geodesic import distance_matrix
from .pca import AnnealConfig, PcaConfig, principal_path
from .simulate import MixtureSpec, simulate_correlated_with_truth, simulate_mixture_with_truth

SCHEMA_VERSION = 1
PATH_SAMPLES = 20


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _num(x: float):
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.12g}")


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_atomic(path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out) -> None:
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        write_atomic(out, text)


def _workers() -> int:
    raw = os.environ.get("TREESPACE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise CliError("config", f"TREESPACE_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def load_trees(path, taxa: TaxonSet | None = None) -> list[Tree]:
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CliError("io", f"{path}: {exc.strerror or exc}") from None
    trees = read_trees(lines, taxa)
    if not trees:
        raise CliError("input", f"{path}: no trees found")
    return trees


# ---------------------------------------------------------------------------
# distance
# ---------------------------------------------------------------------------


def cmd_distance(trees_file, out_csv=None) -> np.ndarray:
    trees = load_trees(trees_file)
    if len(trees) < 2:
        raise CliError("input", "need at least 2 trees")
    d = distance_matrix(trees, workers=_workers())
    n = len(trees)
    rows = ["," + ",".join(str(j) for j in range(n))]
    for i in range(n):
        rows.append(f"{i}," + ",".join(_fmt(v) for v in d[i]))
    _emit("\n".join(rows) + "\n", out_csv)
    return d


# ---------------------------------------------------------------------------
# consensus
# ---------------------------------------------------------------------------


def cmd_consensus(trees_file, out=None, normalize: bool = False, prefix=None) -> Tree:
    """Majority consensus; with *normalize* also write scaled trees and factors.

    The scaled trees go to ``<prefix>.scaled.nwk`` and the factors to
    ``<prefix>.scales.csv``; the consensus itself is then that of the scaled
    trees.
    """
    trees = load_trees(trees_file)
    if normalize:
        trees, scales = normalize_lengths(trees)
        stem = prefix or (Path(out).with_suffix("") if out not in (None, "-") else Path("consensus"))
        write_atomic(f"{stem}.scaled.nwk", format_trees(trees))
        write_atomic(f"{stem}.scales.csv", scales.to_csv())
    tree = majority_consensus(trees)
    _emit(write_newick(tree) + "\n", out)
    return tree


# ---------------------------------------------------------------------------
# pca
# ---------------------------------------------------------------------------

_ANNEAL_KEYS = {f.name for f in fields(AnnealConfig)}
_CONFIG_KEYS = {f.name for f in fields(PcaConfig)} - {"annealing"}


def load_config(path=None, **overrides) -> PcaConfig:
    """Build a :class:`PcaConfig` from a flat JSON object plus overrides.

    Overrides that are None are ignored.
    """
    flat: dict = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                flat = json.load(fh)
        except OSError as exc:
            raise CliError("io", f"{path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise CliError("config", f"{path}: {exc}") from None
        if not isinstance(flat, dict):
            raise CliError("config", f"{path}: expected a JSON object")
    flat.update({k: v for k, v in overrides.items() if v is not None})
    unknown = sorted(set(flat) - _ANNEAL_KEYS - _CONFIG_KEYS)
    if unknown:
        raise CliError("config", f"unknown config keys: {', '.join(unknown)}")
    anneal = {k: flat.pop(k) for k in list(flat) if k in _ANNEAL_KEYS}
    try:
        return PcaConfig(annealing=AnnealConfig(**anneal), **flat)
    except (TypeError, ValueError) as exc:
        raise CliError("config", str(exc)) from None


def _config_echo(cfg: PcaConfig) -> dict:
    out = asdict(cfg)
    out["objective"] = cfg.objective.value
    return out


def path_samples(result) -> list[float]:
    """Breakpoints plus evenly spaced values covering them with a margin."""
    line = result.line
    if line.k == 0:
        return [0.0]
    pts = line.breakpoints + [p.s_star for p in result.projections]
    lo, hi = min(pts), max(pts)
    margin = 0.1 * (hi - lo) if hi > lo else 1.0 / line.speed
    grid = np.linspace(lo - margin, hi + margin, PATH_SAMPLES)
    return sorted(set(line.breakpoints) | {float(s) for s in grid})


def build_report(result, trees, seed: int, config: PcaConfig, wall: float) -> dict:
    line = result.line
    taxa = line.taxa
    fmt = taxa.format_split
    pairs = []
    for sp, nw in zip(line.pairs, result.normalized_weights):
        row = {
            "p": fmt(sp.p),
            "p_prime": fmt(sp.p_prime),
            "change": f"{fmt(sp.p)} -> {fmt(sp.p_prime)}",
            "w": _num(sp.w),
            "normalized_w": _num(nw),
            "s_break": _num(sp.s_break),
        }
        if result.scale_map is not None:
            row["w_original"] = _num(sp.w * result.scale_map.factor(sp.p))
        pairs.append(row)
    midpoint = line.midpoint
    if result.scale_map is not None:
        midpoint = back_transform(midpoint, result.scale_map)
    return {
        "schema_version": SCHEMA_VERSION,
        "input": {"n": len(trees), "m": taxa.m, "taxa": list(taxa.names)},
        "midpoint": write_newick(midpoint),
        "objective": result.objective.value,
        "algorithm": result.algorithm,
        "normalized": result.scale_map is not None,
        "weight_cap": _num(result.weight_cap),
        "pairs": pairs,
        "d2_0": _num(result.d2_0),
        "d2_par": _num(result.d2_par),
        "d2_perp": _num(result.d2_perp),
        "proportion": _num(result.proportion),
        "projections": [
            {"index": i, "s_star": _num(p.s_star), "d_perp": _num(p.d_perp), "d_par": _num(p.d_par)}
            for i, p in enumerate(result.projections)
        ],
        "path_s": [_num(s) for s in path_samples(result)],
        "config": _config_echo(config),
        "seed": seed,
        "wall_time_s": round(wall, 3),
    }


def report_text(report: dict) -> str:
    lines = [
        "principal path report",
        f"trees: {report['input']['n']}   taxa: {report['input']['m']}",
        f"objective: {report['objective']}   algorithm: {report['algorithm']}   "
        f"seed: {report['seed']}   normalized: {str(report['normalized']).lower()}",
        f"midpoint: {report['midpoint']}",
        "",
        f"d2_0       {_fmt(report['d2_0'])}",
        f"d2_par     {_fmt(report['d2_par'])}",
        f"d2_perp    {_fmt(report['d2_perp'])}",
        f"proportion {report['proportion']:.4%}" if report["proportion"] is not None else "proportion n/a",
        "",
    ]
    if report["pairs"]:
        lines.append(f"{'w':>14}  {'norm w':>9}  {'s_break':>14}  change in topology")
        for row in sorted(report["pairs"], key=lambda r: -abs(r["normalized_w"])):
            lines.append(
                f"{row['w']:>14.6g}  {row['normalized_w']:>9.4f}  {row['s_break']:>14.6g}  {row['change']}"
            )
    else:
        lines.append("no split pairs: the line is the midpoint")
    return "\n".join(lines) + "\n"


def cmd_pca(
    trees_file,
    out_dir,
    objective: str | None = None,
    algorithm: str = "greedy",
    normalize: bool | None = None,
    midpoint_file=None,
    seed: int | None = None,
    config_file=None,
) -> dict:
    """Run a principal path search and write report, projections and path."""
    start = time.perf_counter()
    trees = load_trees(trees_file)
    config = load_config(config_file, objective=objective, normalize=normalize, seed=seed)
    x0 = None
    if midpoint_file is not None:
        x0 = load_trees(midpoint_file, trees[0].taxa)[0]
    result = principal_path(trees, x0, config, algorithm)
    if not result.d2_0 > 0:
        raise CliError("degenerate", "d2_0 = 0 (every tree coincides with the midpoint)")
    report = build_report(result, trees, config.seed, config, time.perf_counter() - start)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_atomic(out / "report.json", json.dumps(report, indent=2) + "\n")
    write_atomic(out / "report.txt", report_text(report))
    rows = ["index,s_star,d_perp,d_par"]
    for p in report["projections"]:
        rows.append(f"{p['index']},{_fmt(p['s_star'])},{_fmt(p['d_perp'])},{_fmt(p['d_par'])}")
    write_atomic(out / "projections.csv", "\n".join(rows) + "\n")
    path = [result.line(s) for s in path_samples(result)]
    if result.scale_map is not None:
        path = [back_transform(t, result.scale_map) for t in path]
    write_atomic(out / "path.nwk", format_trees(path))
    return report


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _load_base(text: str) -> Tree:
    if text.lstrip().startswith("("):
        return parse_newick(text)
    return load_trees(text)[0]


def cmd_simulate(
    base: str,
    t1: str,
    t2: str,
    theta: float,
    out,
    truth=None,
    sigma: float = 0.0,
    n: int = 100,
    seed: int = 0,
    t1b: str | None = None,
    t2b: str | None = None,
    rho: float | None = None,
) -> list[Tree]:
    tree = _load_base(base)
    taxa = tree.taxa
    second = None
    if t1b is not None or t2b is not None:
        if t1b is None or t2b is None:
            raise CliError("input", "--t1b and --t2b must be given together")
        second = (taxa.parse_split(t1b), taxa.parse_split(t2b))
    spec = MixtureSpec(
        tree, (taxa.parse_split(t1), taxa.parse_split(t2)), theta, sigma, n, seed, second, rho
    )
    if second is None:
        trees, flags = simulate_mixture_with_truth(spec)
        flags = flags.reshape(-1, 1)
    else:
        trees, flags = simulate_correlated_with_truth(spec)
    _emit(format_trees(trees), out)
    if truth is not None:
        cols = ["index"] + [f"keep_t1_{j + 1}" for j in range(flags.shape[1])]
        rows = [",".join(cols)] + [
            ",".join([str(i)] + [str(int(v)) for v in row]) for i, row in enumerate(flags)
        ]
        write_atomic(truth, "\n".join(rows) + "\n")
    return trees


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treespace", description="Tree-space geometry and principal paths.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("distance", help="pairwise geodesic distance matrix as CSV")
    p.add_argument("trees")
    p.add_argument("-o", "--out", default=None, help="output CSV (default stdout)")

    p = sub.add_parser("consensus", help="majority-rule consensus tree")
    p.add_argument("trees")
    p.add_argument("-o", "--out", default=None, help="output Newick (default stdout)")
    p.add_argument("--normalize", action="store_true", help="normalize branch lengths per split first")
    p.add_argument("--prefix", default=None, help="prefix for the scaled trees and scale CSV")

    p = sub.add_parser("pca", help="fit a principal path")
    p.add_argument("trees")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--objective", choices=["par", "perp"], default=None)
    p.add_argument("--algorithm", choices=["greedy", "anneal"], default="greedy")
    p.add_argument("--normalize", action="store_true", default=None)
    p.add_argument("--midpoint", default=None, help="Newick file whose first tree is the midpoint")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--config", default=None, help="flat JSON object of search settings")

    p = sub.add_parser("simulate", help="simulate a two-topology mixture")
    p.add_argument("--base", required=True, help="Newick file or Newick string")
    p.add_argument("--t1", required=True, help="split in the base tree, e.g. A,B,C|D,E,F,G,H")
    p.add_argument("--t2", required=True, help="its NNI replacement")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--sigma", type=float, default=0.0, help="log-normal jitter")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t1b", default=None)
    p.add_argument("--t2b", default=None)
    p.add_argument("--rho", type=float, default=None)
    p.add_argument("-o", "--out", default=None, help="output Newick (default stdout)")
    p.add_argument("--truth", default=None, help="CSV of per-tree topology indicators")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "distance":
        cmd_distance(args.trees, args.out)
    elif args.command == "consensus":
        cmd_consensus(args.trees, args.out, args.normalize, args.prefix)
    elif args.command == "pca":
        cmd_pca(
            args.trees, args.out, args.objective, args.algorithm,
            args.normalize, args.midpoint, args.seed, args.config,
        )
    else:
        cmd_simulate(
            args.base, args.t1, args.t2, args.theta, args.out, args.truth,
            args.sigma, args.n, args.seed, args.t1b, args.t2b, args.rho,
        )
    return 0


def main(argv=None) -> int:
    try:
        return run(argv)
    except BrokenPipeError:
        sys.stderr.close()
        return 0
    except CliError as exc:
        category, msg = exc.category, str(exc)
    except NewickError as exc:
        category, msg = "parse", str(exc)
    except (TreeError, ValueError) as exc:
        category, msg = "invalid", str(exc)
    except OSError as exc:
        category, msg = "io", str(exc)
    msg = " ".join(msg.split())
    print(f"error: {category}: {msg}", file=sys.stderr)
    return 2 if category in ("config",) else 1


if __name__ == "__main__":
    sys.exit(main())
