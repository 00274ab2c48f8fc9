"""Command-line front end: ``tropsand {relax,limit,mc,scan,area,avalanche}``.

Exit codes: 0 success, 2 bad flags or inputs, 3 relaxation guard tripped.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import platform
import sys
import warnings
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from . import __version__
from .core import (
    BULK_MAX_SWEEPS,
    DEFAULT_DENOM_LOG2,
    DEFAULT_MAX_SWEEPS,
    GuardError,
    PointConfig,
    SandpileError,
    common_denominator,
    format_state,
    fractional_q,
    limit_case,
    limit_state,
    relax,
)

log = logging.getLogger("tropsand")

EXIT_OK, EXIT_USAGE, EXIT_GUARD = 0, 2, 3


class UsageError(Exception):
    pass


def fmt_float(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------- inputs


@dataclass
class ParsedPoints:
    cfg: PointConfig
    lo: Fraction
    hi: Fraction
    notes: list[str] = field(default_factory=list)

    def to_domain(self, x: Fraction) -> Fraction:
        return self.lo + (self.hi - self.lo) * x


def _parse_exact(tok: str) -> tuple[Fraction, bool]:
    """Value of ``tok`` and whether it was written as a decimal."""
    tok = tok.strip()
    try:
        v = Fraction(tok)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"cannot parse point {tok!r}") from None
    return v, ("/" not in tok and not tok.lstrip("+-").isdigit())


def parse_domain(text: Optional[str]) -> tuple[Fraction, Fraction]:
    if not text:
        return Fraction(0), Fraction(1)
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError("--domain takes two endpoints A,B")
    lo, hi = (_parse_exact(t)[0] for t in parts)
    if not lo < hi:
        raise UsageError("--domain needs A < B")
    return lo, hi


def parse_points(
    text: str,
    denom_log2: int = DEFAULT_DENOM_LOG2,
    domain: Optional[str] = None,
    dedupe: bool = False,
) -> ParsedPoints:
    """Parse ``a/b`` rationals exactly and snap decimals to the ``2**denom_log2`` grid.

    Points on another segment are mapped affinely onto [0, 1].
    """
    lo, hi = parse_domain(domain)
    grid = 1 << denom_log2
    values, notes = [], []
    any_snapped = False
    for tok in text.split(","):
        if not tok.strip():
            continue
        v, decimal = _parse_exact(tok)
        x = (v - lo) / (hi - lo)
        if decimal:
            any_snapped = True
            s = Fraction(round(x * grid), grid)
            if s != x:
                notes.append(f"snapped {tok.strip()} to {lo + (hi - lo) * s}")
            x = s
        values.append(x)
    if not values:
        raise UsageError("no points given")
    for v in values:
        if not 0 < v < 1:
            raise UsageError(f"point {lo + (hi - lo) * v} is not inside ({lo}, {hi})")
    if len(set(values)) != len(values):
        if not dedupe:
            raise UsageError("duplicate points (pass --dedupe to drop repeats)")
        kept = list(dict.fromkeys(values))
        notes.append(f"dropped {len(values) - len(kept)} duplicate point(s)")
        values = kept
    denom = common_denominator(values, grid if any_snapped else 1)
    return ParsedPoints(PointConfig.from_fractions(values, denom), lo, hi, notes)


# ---------------------------------------------------------------- outputs


@dataclass
class RunManifest:
    subcommand: str
    flags: dict
    master_seed: Optional[int]
    denominator_log2: int
    tool_version: str = __version__
    python: str = platform.python_version()

    def write(self, out: Path) -> Path:
        path = out / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


class OutputDir:
    """Collects files for one run; on failure every file written so far is removed."""

    def __init__(self, path):
        self.path = Path(path)
        self.written: list[Path] = []

    def __enter__(self):
        self.path.mkdir(parents=True, exist_ok=True)
        return self

    def file(self, name: str) -> Path:
        p = self.path / name
        self.written.append(p)
        return p

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.written:
                try:
                    p.unlink()
                except FileNotFoundError:
                    pass
        return False


def _manifest(args, seed=None) -> RunManifest:
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    return RunManifest(args.command, flags, seed, args.denom_log2)


def _write_csv(path: Path, header: str, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


# ---------------------------------------------------------------- commands


def cmd_relax(args) -> int:
    pp = parse_points(args.points, args.denom_log2, args.domain, args.dedupe)
    for note in pp.notes:
        log.warning(note)
    show = lambda s: format_state(s, pp.to_domain)  # noqa: E731
    res = relax(pp.cfg, max_sweeps=args.max_sweeps or DEFAULT_MAX_SWEEPS, trace=args.trace)
    pts = [pp.to_domain(x) for x in pp.cfg.as_fractions()]
    if args.format == "csv":
        print("step,sweep,index,point,changed,state")
        for k, st in enumerate(res.trace or [], 1):
            x = pp.to_domain(Fraction(st.point, pp.cfg.denom))
            print(f'{k},{st.sweep},{st.index + 1},{x},{int(st.changed)},"{show(st.state)}"')
        print(f'final,{res.sweeps},,,,"{show(res.final)}"')
        return EXIT_OK
    print("points: " + ", ".join(str(x) for x in pts))
    if args.trace:
        for k, st in enumerate(res.trace, 1):
            x = pp.to_domain(Fraction(st.point, pp.cfg.denom))
            tag = "" if st.changed else "  (unchanged)"
            print(f"step {k} (sweep {st.sweep}): topple at {x} -> {show(st.state)}{tag}")
    print(f"final: {show(res.final)}")
    print(f"L = {res.sweeps}")
    return EXIT_OK


_CASES = {
    1: "case 1: q = 0, the points alone form the stable state",
    2: "case 2: q coincides with a point, which gets multiplicity 2",
    3: "case 3: q is a new break point",
}


def cmd_limit(args) -> int:
    pp = parse_points(args.points, args.denom_log2, args.domain, args.dedupe)
    for note in pp.notes:
        log.warning(note)
    q = Fraction(fractional_q(pp.cfg), pp.cfg.denom)
    print(f"q = {pp.to_domain(q)}")
    print(_CASES[limit_case(pp.cfg)])
    print(f"H = {format_state(limit_state(pp.cfg), pp.to_domain)}")
    return EXIT_OK


def _fit_range(text: str) -> tuple[int, int]:
    try:
        a, b = (int(t) for t in text.split(","))
    except ValueError:
        raise UsageError("--fit-range takes N_MIN,N_MAX") from None
    if not 1 <= a < b:
        raise UsageError("--fit-range needs 1 <= N_MIN < N_MAX")
    return a, b


def cmd_mc(args) -> int:
    from .montecarlo import TrialConfig, ccdf, fit_tail, run_trials, set_workers

    fit_lo, fit_hi = _fit_range(args.fit_range)
    cfg = TrialConfig(args.n, args.trials, args.seed, args.denom_log2,
                      args.max_sweeps or BULK_MAX_SWEEPS)
    set_workers(args.workers)
    with OutputDir(args.out) as out:
        hist = run_trials(cfg)
        table = ccdf(hist)
        _write_csv(out.file("histogram.csv"), "L,count", hist.items())
        _write_csv(
            out.file("ccdf.csv"), "N,ccdf",
            ((N, fmt_float(float(P))) for N, P in table.rows),
        )
        summary = {"n": cfg.n, "trials": cfg.trials, "seed": cfg.master_seed}
        try:
            fit = fit_tail(table, fit_lo, fit_hi)
            summary["fit"] = asdict(fit)
        except ValueError as exc:
            summary["fit"] = None
            summary["fit_skipped"] = str(exc)
        out.file("fit.json").write_text(json.dumps(summary, indent=2) + "\n")
        out.written.append(_manifest(args, cfg.master_seed).write(out.path))
    print(f"trials: {hist.total}")
    for L, c in hist.items()[:5]:
        print(f"freq(L={L}) = {fmt_float(c / hist.total)}")
    if summary["fit"]:
        f = summary["fit"]
        print(f"ccdf slope over [{f['n_min']}, {f['n_max']}] = {f['ccdf_slope']:.4f}"
              f" (pmf exponent {f['pmf_exponent']:.4f})")
    else:
        print(f"fit skipped: {summary['fit_skipped']}")
    print(f"wrote {out.path}")
    return EXIT_OK


def cmd_scan(args) -> int:
    from .montecarlo import set_workers
    from .observables import n2_locus_area
    from .raster import area_estimate, scan

    set_workers(args.workers)
    with OutputDir(args.out) as out:
        g = scan(args.grid, args.max_sweeps or BULK_MAX_SWEEPS, args.denom_log2)
        g.to_csv(out.file("scan.csv"))
        g.to_pgm(out.file("scan.pgm"))
        rows = []
        for N in range(1, int(g.values.max()) + 1):
            est, exact = area_estimate(g, N), n2_locus_area(N)
            if est:
                rows.append((N, est.numerator * g.resolution**2 // est.denominator,
                             fmt_float(float(est)), exact, fmt_float(float(exact))))
        _write_csv(out.file("areas.csv"), "N,cells,area_estimate,exact,exact_decimal", rows)
        out.written.append(_manifest(args).write(out.path))
    for N, _, est, exact, _ in rows[:6]:
        print(f"L={N}: area {est} (exact {exact})")
    print(f"wrote {out.path}")
    if g.tripped:
        print(f"{g.tripped} cells hit the sweep guard (stored as 0)", file=sys.stderr)
        return EXIT_GUARD
    return EXIT_OK


def cmd_area(args) -> int:
    from .observables import n2_locus_area

    print(n2_locus_area(args.N))
    return EXIT_OK


def cmd_avalanche(args) -> int:
    from .montecarlo import (
        TrialConfig, avalanche_trials, ks_critical, ks_distance_square_law, set_workers,
    )

    cfg = TrialConfig(args.n, args.trials, args.seed, args.denom_log2)
    set_workers(args.workers)
    st = avalanche_trials(cfg, bins=args.bins)
    ks = ks_distance_square_law(st.lengths)
    summary = {
        "n": cfg.n, "trials": cfg.trials, "seed": cfg.master_seed,
        "mean": st.mean, "var": st.var, "ks_distance_x2": ks,
        "ks_critical_1pct": ks_critical(cfg.trials), "resampled": st.resampled,
    }
    if args.out:
        with OutputDir(args.out) as out:
            _write_csv(
                out.file("avalanche_density.csv"), "bin_lo,bin_hi,density",
                ((fmt_float(a), fmt_float(b), fmt_float(d))
                 for a, b, d in zip(st.bin_edges[:-1], st.bin_edges[1:], st.density)),
            )
            out.file("avalanche_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
            out.written.append(_manifest(args, cfg.master_seed).write(out.path))
    print(f"mean = {st.mean:.4f} (2/3 = 0.6667)")
    print(f"KS distance to x^2 = {ks:.5f} (1% critical {summary['ks_critical_1pct']:.5f})")
    if st.resampled:
        print(f"resampled degenerate draws: {st.resampled}")
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--denom-log2", type=int, default=DEFAULT_DENOM_LOG2,
                        help="grid exponent for decimals and sampling (default 62)")
    common.add_argument("--max-sweeps", type=int, default=None,
                        help="sweep guard (default 10^7 for relax, 10^10 for mc/scan)")
    common.add_argument("--workers", type=int, default=os.cpu_count(),
                        help="numba threads (default: all cores)")
    common.add_argument("-v", "--verbose", action="store_true")

    pts = argparse.ArgumentParser(add_help=False)
    pts.add_argument("--points", required=True, help="comma-separated, e.g. 4/9,3/9 or 0.25")
    pts.add_argument("--domain", help="segment A,B the points live on (default 0,1)")
    pts.add_argument("--dedupe", action="store_true", help="drop repeated points")

    p = argparse.ArgumentParser(prog="tropsand", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("relax", parents=[common, pts], help="relax a configuration")
    s.add_argument("--trace", action="store_true", help="print every topple")
    s.add_argument("--format", choices=["text", "csv"], default="text")
    s.set_defaults(func=cmd_relax)

    s = sub.add_parser("limit", parents=[common, pts], help="stable state from q")
    s.set_defaults(func=cmd_limit)

    s = sub.add_parser("mc", parents=[common], help="histogram of L over random configurations")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="mc-out")
    s.add_argument("--fit-range", default="10,300")
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("scan", parents=[common], help="L over a grid of two-point configurations")
    s.add_argument("--grid", type=int, default=512)
    s.add_argument("--out", default="scan-out")
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("area", help="exact area of the two-point locus L = N")
    s.add_argument("--N", type=int, required=True)
    s.set_defaults(func=cmd_area)

    s = sub.add_parser("avalanche", parents=[common], help="avalanche interval lengths")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--trials", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--bins", type=int, default=100)
    s.add_argument("--out")
    s.set_defaults(func=cmd_avalanche)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
        format="%(levelname)s: %(message)s",
    )
    # numba falls back to another threading layer on its own; the notice is noise here
    warnings.filterwarnings("ignore", message="The TBB threading layer")
    try:
        return args.func(args)
    except (UsageError, SandpileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GuardError as exc:
        print(f"guard tripped: {exc}", file=sys.stderr)
        return EXIT_GUARD


if __name__ == "__main__":
    sys.exit(main())
