"""Command-line surface: experiment orchestration and result persistence.

Subcommands emit plot-ready CSV/JSON plus a manifest with parameter and
output digests.  Flags win over the optional key=value config file; the
GUE_SPECTRA_THREADS environment variable caps replicate parallelism.
"""

from __future__ import annotations

import argparse
import math
import re
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import fredholm, runio, sampling, tracy_widom
from .kernels import (
    ScaledWindow,
    limiting_kernel_matrix,
    scaled_gue_kernel_matrix,
    windows_disjoint,
)

__all__ = ["WindowSpec", "parse_windows", "main"]

_INTERVAL_RE = re.compile(r"\(\s*([^,()]+)\s*,\s*([^,()]+)\s*\)")


@dataclass(frozen=True)
class WindowSpec:
    """Parsed textual window description.

    Grammar (items joined by ';'):
        edge-:(a,b)        left-edge window, shrink exponent 2/3
        edge+:(a,b)        right-edge window, shrink exponent 2/3
        bulk@MU:(a,b)      bulk window at center MU, shrink exponent 1
        raw:(a,b)          unscaled interval (exponent 0)
    A base set may union several intervals: edge-:(a,b)+(c,d).
    A trailing :k=K overrides the shrink exponent.
    """

    center: float
    base: tuple[tuple[float, float], ...]
    kappa: float | None = None

    @classmethod
    def parse(cls, text: str) -> "WindowSpec":
        item = text.strip()
        kappa = None
        km = re.search(r":k=([^:]+)$", item)
        if km:
            kappa = float(km.group(1))
            item = item[: km.start()]
        if ":" not in item:
            raise ValueError(f"window item {text!r} lacks ':'")
        kind, _, body = item.partition(":")
        kind = kind.strip()
        intervals = _INTERVAL_RE.findall(body)
        if not intervals or _INTERVAL_RE.sub("", body).strip("+ ") != "":
            raise ValueError(f"cannot parse intervals in {text!r}")
        base = tuple((float(a), float(b)) for a, b in intervals)
        if kind == "edge-":
            return cls(center=-2.0, base=base, kappa=kappa)
        if kind == "edge+":
            return cls(center=2.0, base=base, kappa=kappa)
        if kind.startswith("bulk@"):
            return cls(center=float(kind[5:]), base=base, kappa=kappa)
        if kind == "raw":
            return cls(center=0.0, base=base, kappa=0.0 if kappa is None else kappa)
        raise ValueError(f"unknown window kind {kind!r} in {text!r}")

    def to_window(self, index: int) -> ScaledWindow:
        if self.kappa is None:
            return ScaledWindow(index=index, center=self.center, base=self.base)
        return ScaledWindow(index=index, center=self.center, base=self.base, kappa=self.kappa)

    def label(self) -> str:
        body = "+".join(f"({a:g},{b:g})" for a, b in self.base)
        if self.kappa == 0.0 and self.center == 0.0:
            return f"raw:{body}"
        if self.center == -2.0:
            head = "edge-"
        elif self.center == 2.0:
            head = "edge+"
        else:
            head = f"bulk@{self.center:g}"
        suffix = "" if self.kappa is None else f":k={self.kappa:g}"
        return f"{head}:{body}{suffix}"


def parse_windows(text: str) -> list[ScaledWindow]:
    specs = [WindowSpec.parse(item) for item in text.split(";") if item.strip()]
    if not specs:
        raise ValueError("empty window list")
    return [spec.to_window(i + 1) for i, spec in enumerate(specs)]


def _parse_n_list(text: str) -> list[int]:
    values = [int(tok) for tok in re.split(r"[,\s]+", text.strip()) if tok]
    if not values:
        raise ValueError("empty n list")
    return values


def _parse_grid(text: str) -> tuple[float, float, float]:
    lo, hi, step = (float(tok) for tok in text.split(":"))
    if not lo < hi or step <= 0:
        raise ValueError(f"bad grid spec {text!r}")
    return lo, hi, step


def _read_config(path: str) -> dict[str, str]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        if not _:
            raise ValueError(f"config line {line!r} is not key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


class _Command:
    """One subcommand: declared options plus config-beneath-flags merging."""

    def __init__(self, name: str, help_text: str, runner):
        self.name = name
        self.help = help_text
        self.runner = runner
        self.options: list[tuple[str, dict, object, object]] = []
        self.required: set[str] = set()

    def add(self, flag: str, *, type=str, default=None, required=False, help=""):
        self.options.append((flag, dict(help=help), type, default))
        if required:
            self.required.add(flag.lstrip("-").replace("-", "_"))

    def register(self, subparsers):
        parser = subparsers.add_parser(self.name, help=self.help)
        parser.add_argument("--config", default=None, help="key=value file merged beneath flags")
        for flag, kwargs, _, _ in self.options:
            parser.add_argument(flag, default=argparse.SUPPRESS, **kwargs)
        parser.set_defaults(_command=self)

    def resolve(self, args: argparse.Namespace, parser: argparse.ArgumentParser) -> dict:
        merged = {
            flag.lstrip("-").replace("-", "_"): default
            for flag, _, _, default in self.options
        }
        types = {
            flag.lstrip("-").replace("-", "_"): type_fn
            for flag, _, type_fn, _ in self.options
        }
        if args.config:
            for key, raw in _read_config(args.config).items():
                if key in types:
                    merged[key] = types[key](raw)
        for key, value in vars(args).items():
            if key in types and value is not None:
                merged[key] = types[key](value) if isinstance(value, str) else value
        for key in self.required:
            if merged.get(key) is None:
                parser.error(f"{self.name}: --{key.replace('_', '-')} is required")
        return merged


def _outdir(opts: dict) -> Path:
    out = Path(opts.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window_labels(text: str) -> list[str]:
    return [WindowSpec.parse(item).label() for item in text.split(";") if item.strip()]


def _run_kernel_limits(opts: dict) -> int:
    ns = _parse_n_list(opts["n"])
    windows = parse_windows(opts["window"])
    if len(windows) != 1:
        raise ValueError("kernel-limits takes exactly one window")
    window = windows[0]
    grid = opts["grid"]
    if window.center == 2.0:
        tag = "airy"
    elif window.center == -2.0:
        tag = "airy_reflected"
    else:
        tag = "sine"
    rows = []
    for n in ns:
        us = np.concatenate([np.linspace(a, b, grid) for a, b in window.base])
        err = float(np.max(np.abs(
            scaled_gue_kernel_matrix(n, window, us) - limiting_kernel_matrix(window, us)
        )))
        rows.append((n, err, tag))
    outdir = _outdir(opts)
    manifest = runio.RunManifest("kernel-limits", params=dict(opts))
    manifest.record(runio.write_csv(outdir / "kernel_limits.csv", ["n", "sup_error", "kernel"], rows))
    manifest.write(outdir)
    return 0


def _distribution_payload(dist: fredholm.CountingDistribution, labels: list[str]) -> dict:
    return {
        "windows": labels,
        "lmax": list(dist.lmax),
        "joint": dist.joint.tolist(),
        "marginals": [m.tolist() for m in dist.marginals],
        "defect": dist.defect.tolist(),
        "max_abs_defect": dist.max_defect(),
        "tail_mass": dist.tail_mass,
        "meta": {k: v for k, v in dist.meta.items() if not isinstance(v, np.ndarray)},
    }


def _run_gap_prob(opts: dict) -> int:
    windows = parse_windows(opts["windows"])
    dist = fredholm.counting_joint_pmf(
        opts["n"], windows, lmax=opts["lmax"], m=opts["quad_points"]
    )
    outdir = _outdir(opts)
    manifest = runio.RunManifest("gap-prob", params=dict(opts))
    payload = {"n": opts["n"], **_distribution_payload(dist, _window_labels(opts["windows"]))}
    manifest.record(runio.write_json(outdir / "gap_prob.json", payload))
    manifest.write(outdir)
    return 0


def _run_independence(opts: dict) -> int:
    ns = _parse_n_list(opts["n"])
    windows = parse_windows(opts["windows"])
    rows = []
    for n in ns:
        if len(windows) > 1 and not windows_disjoint(windows, n):
            raise ValueError(f"realized windows overlap at n={n}; increase n")
        if len(windows) == 1:
            rows.append((n, 0.0))
            continue
        dist = fredholm.counting_joint_pmf(n, windows, lmax=opts["lmax"], m=opts["quad_points"])
        rows.append((n, dist.max_defect()))
    outdir = _outdir(opts)
    manifest = runio.RunManifest("independence", params=dict(opts))
    manifest.record(runio.write_csv(outdir / "independence.csv", ["n", "max_abs_defect"], rows))
    manifest.write(outdir)
    return 0


def _run_sample(opts: dict) -> int:
    windows = parse_windows(opts["windows"]) if opts["windows"] else []
    n, reps, seed = opts["n"], opts["reps"], opts["seed"]
    records = sampling.sample_records(n, reps, seed, windows, route=opts["route"])
    outdir = _outdir(opts)
    manifest = runio.RunManifest("sample", params=dict(opts), seed=seed)

    p = len(windows)
    header = ["replicate"] + [f"count_{i + 1}" for i in range(p)] + [
        "scaled_min", "scaled_max", "condition"]
    rows = [
        (r, *rec.counts, rec.scaled_min, rec.scaled_max, rec.condition)
        for r, rec in enumerate(records)
    ]
    manifest.record(runio.write_csv(outdir / "samples.csv", header, rows))

    summary: dict = {
        "n": n, "reps": reps, "seed": seed, "route": opts["route"],
        "windows": _window_labels(opts["windows"]) if opts["windows"] else [],
    }
    if p >= 1 and reps >= 1000:
        dist, test = sampling.empirical_joint_pmf(records, windows, lmax=opts["lmax"])
        summary["counting"] = _distribution_payload(dist, summary["windows"])
        summary["chi_square"] = {
            "statistic": test.chi2, "dof": test.dof, "pvalue": test.pvalue,
            "pooled_levels": list(test.levels),
        }
    scaled_min = np.array([rec.scaled_min for rec in records])
    scaled_max = np.array([rec.scaled_max for rec in records])
    condition = np.array([rec.condition for rec in records])
    keep = ~np.isnan(condition)
    plus = tracy_widom.tw_plus_table()
    minus = tracy_widom.tw_minus_table()
    cond_table = tracy_widom.condition_limit_table()
    summary["extremes"] = {
        "pearson_correlation": float(np.corrcoef(scaled_min, scaled_max)[0, 1]),
        "ks_scaled_max_vs_limit": sampling.ks_statistic(scaled_max, plus.evaluate),
        "ks_scaled_min_vs_limit": sampling.ks_statistic(scaled_min, minus.evaluate),
    }
    summary["condition"] = {
        "excluded": int(np.sum(~keep)),
        "ks_vs_limit": sampling.ks_statistic(condition[keep], cond_table.evaluate),
    }
    manifest.record(runio.write_json(outdir / "sample_summary.json", summary))
    manifest.write(outdir)
    return 0


def _run_tracy_widom(opts: dict) -> int:
    lo, hi, step = _parse_grid(opts["grid"])
    m = opts["quad_points"]
    plus = tracy_widom.tw_plus_table(lo, hi, step, m)
    minus = tracy_widom.tw_minus_table(-hi, -lo, step, m)
    cond = tracy_widom.condition_limit_table(step=step, m=m)
    outdir = _outdir(opts)
    manifest = runio.RunManifest("tracy-widom", params=dict(opts))
    for name, table in (("tw_plus", plus), ("tw_minus", minus), ("condition_limit", cond)):
        path = runio.write_csv(
            outdir / f"{name}.csv", ["s", "F"],
            zip(table.grid.tolist(), table.values.tolist()),
        )
        manifest.record(path)
    manifest.write(outdir)
    return 0


def _quick_checks() -> list[tuple[str, bool, str]]:
    from .specfun import airy_ai, gauss_legendre, hermite_function

    results = []

    def check(name, fn):
        try:
            fn()
            results.append((name, True, ""))
        except Exception as exc:  # noqa: BLE001 - report any failure
            results.append((name, False, f"{type(exc).__name__}: {exc}"))

    check("quadrature midpoint m=1", lambda: _expect(
        gauss_legendre(1).nodes[0] == 0.0 and gauss_legendre(1).weights[0] == 2.0))
    check("quadrature degree-5 exactness", lambda: _expect(
        abs(gauss_legendre(16, (0.0, 1.0)).integrate(
            gauss_legendre(16, (0.0, 1.0)).nodes ** 5) - 1.0 / 6.0) < 1e-14))
    check("airy decay at +10", lambda: _expect(airy_ai(10.0) < 1e-9))
    check("hermite odd zero", lambda: _expect(hermite_function(6, 1, 0.0).value == 0.0))
    check("kernel symmetry", _check_kernel_symmetry)
    check("determinant at z=0", _check_det_zero)
    check("single-window defect vanishes", _check_single_window_defect)
    check("counting trivia", _check_counting)
    check("reflection identity", lambda: _expect(
        abs(tracy_widom.tw_cdf_minus(0.4) + tracy_widom.tw_cdf_plus(-0.4) - 1.0) == 0.0))
    check("sampler determinism", _check_determinism)
    return results


def _expect(condition: bool):
    if not condition:
        raise AssertionError("condition failed")


def _check_kernel_symmetry():
    from .kernels import gue_kernel
    _expect(abs(gue_kernel(20, 0.3, 0.7) - gue_kernel(20, 0.7, 0.3)) < 1e-12)


def _check_det_zero():
    op = fredholm.discretize(10, [ScaledWindow(1, 0.0, (-1.0, 1.0))], 8)
    _expect(fredholm.fredholm_det(op, 0.0, 1.0) == 1.0)


def _check_single_window_defect():
    w = [ScaledWindow(1, 0.0, (-1.0, 1.0))]
    _expect(fredholm.independence_defect_det(12, w, m=8) == 0.0)


def _check_counting():
    sample = sampling.sample_gue_tridiag(50, 123)
    full = ScaledWindow(1, 0.0, (-3.0, 3.0), kappa=0.0)
    rec = sampling.count_in_windows(sample, [full])
    _expect(rec.counts[0] == 50)
    empty = ScaledWindow(1, 0.0, (1.0, 1.0), kappa=0.0)
    _expect(sampling.count_in_windows(sample, [empty]).counts[0] == 0)


def _check_determinism():
    a = sampling.sample_gue_dense(25, 9).eigenvalues
    b = sampling.sample_gue_dense(25, 9).eigenvalues
    _expect(bool(np.array_equal(a, b)))


def _run_selfcheck(opts: dict) -> int:
    level = opts["level"]
    if level not in ("quick", "full"):
        raise ValueError(f"level must be quick or full, got {level!r}")
    started = time.time()
    results = _quick_checks()
    failures = 0
    for name, passed, message in results:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({message})" if message else ""
        print(f"{status}  {name}{suffix}")
        failures += not passed
    print(f"quick checks: {len(results) - failures}/{len(results)} passed "
          f"in {time.time() - started:.1f} s")
    if failures:
        return 1
    if level == "quick":
        return 0
    acceptance = Path("tests") / "test_acceptance.py"
    if not acceptance.exists():
        print(f"cannot find {acceptance}; run from a source checkout", file=sys.stderr)
        return 2
    proc = subprocess.run([sys.executable, "-m", "pytest", str(acceptance), "-v", "-s"])
    return proc.returncode


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gue-spectra",
        description="GUE spectral statistics: kernels, counting probabilities, "
                    "Monte Carlo, and Tracy-Widom tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    c = _Command("kernel-limits", "sup error of the scaled kernel vs its limit", _run_kernel_limits)
    c.add("--n", type=str, required=True, help="comma-separated matrix sizes")
    c.add("--window", type=str, required=True, help="single window spec")
    c.add("--grid", type=int, default=64, help="grid points per interval")
    c.add("--out", type=str, default=".", help="output directory")
    c.register(sub)

    c = _Command("gap-prob", "joint/marginal occupancy tables from determinants", _run_gap_prob)
    c.add("--n", type=int, required=True, help="matrix size")
    c.add("--windows", type=str, required=True,
          help='e.g. "edge-:(-1,1);bulk@0:(-1,1);edge+:(-1,1)"')
    c.add("--lmax", type=int, default=fredholm.DEFAULT_LMAX, help="occupancy cap per window")
    c.add("--quad-points", type=int, default=None, help="quadrature points per interval")
    c.add("--out", type=str, default=".", help="output directory")
    c.register(sub)

    c = _Command("independence", "max |joint - product| over an n list", _run_independence)
    c.add("--n", type=str, required=True, help="comma-separated matrix sizes")
    c.add("--windows", type=str, required=True, help="window specs")
    c.add("--lmax", type=int, default=2, help="occupancy cap per window")
    c.add("--quad-points", type=int, default=None, help="quadrature points per interval")
    c.add("--out", type=str, default=".", help="output directory")
    c.register(sub)

    c = _Command("sample", "Monte Carlo counting records and test summary", _run_sample)
    c.add("--n", type=int, required=True, help="matrix size")
    c.add("--reps", type=int, required=True, help="number of replicates")
    c.add("--seed", type=int, required=True, help="master seed (mandatory)")
    c.add("--windows", type=str, default="", help="window specs (may be empty)")
    c.add("--lmax", type=int, default=2, help="occupancy cap per window")
    c.add("--route", type=str, default="tridiag", help="dense | tridiag")
    c.add("--out", type=str, default=".", help="output directory")
    c.register(sub)

    c = _Command("tracy-widom", "CDF tables for the extreme-eigenvalue limits", _run_tracy_widom)
    c.add("--grid", type=str, default="-10:6:0.02", help="lo:hi:step table grid")
    c.add("--quad-points", type=int, default=tracy_widom.DEFAULT_RESOLUTION,
          help="Nystrom resolution")
    c.add("--out", type=str, default=".", help="output directory")
    c.register(sub)

    c = _Command("selfcheck", "run built-in checks (quick) or the acceptance suite (full)",
                 _run_selfcheck)
    c.add("--level", type=str, default="quick", help="quick | full")
    c.register(sub)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    command: _Command = args._command
    try:
        opts = command.resolve(args, parser)
        return command.runner(opts)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
