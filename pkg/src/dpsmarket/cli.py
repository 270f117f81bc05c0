"""Command-line front end: single points, parameter sweeps, region maps,
simulator validation and feasibility tables, all written as CSV.

Exit codes: 0 success, 2 invalid specification, 3 solver failure (the
remaining rows are still written, failed ones carry an ``error:`` status),
4 unstable simulator load.

Settings may come from a flat ``key = value`` file given with ``--config``;
command-line flags override it.  Whenever ``--out`` names a file, the
resolved settings are written next to it as ``<out>.cfg`` in the same
format, so any table can be regenerated from its record.
"""
from __future__ import annotations

import argparse
import csv
import itertools
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DPSMarketError, InvalidConfig, UnstableLoad
from .feasibility import build_report, compare_total_subscribers
from .market import MarketParams
from .queueing import Load, QueueConfig
from .simulator import SimConfig, validate_closed_form
from .stage1 import solve_baseline, solve_monopolistic, solve_strategic
from .wardrop import region_map

EXIT_OK, EXIT_SPEC, EXIT_SOLVER, EXIT_UNSTABLE = 0, 2, 3, 4

PARAM_COLUMNS = ["c", "mu", "lambda_d", "alpha1"]
COLUMNS = {
    "baseline": PARAM_COLUMNS + ["p1_star", "n1_star", "pi0_star", "status"],
    "monopolistic": PARAM_COLUMNS
    + ["gamma", "alpha2", "p1_star", "p2_star", "n1_star", "n2_star", "case", "pi_m_star", "status"],
    "strategic": PARAM_COLUMNS
    + ["gamma", "alpha2", "delta", "p1_star", "p2_star", "n1_star", "n2_star", "case",
       "pi1_star", "pi2_star", "converged", "pset_lo1", "pset_hi1", "pset_lo2", "pset_hi2", "status"],
    "feasibility": PARAM_COLUMNS
    + ["gamma", "alpha2", "delta", "pi0_star", "pi_m_star", "pi1_star", "pi2_star",
       "monopolistic_feasible", "strategic_feasible", "lump_sum_lo", "lump_sum_hi",
       "n_total_monopolistic", "n_total_strategic", "strategic_exceeds", "status"],
    "regionmap": ["p1", "p2", "case", "n1", "n2"],
    "sim": ["replication", "mean_T1", "mean_T2", "analytic_T1", "analytic_T2", "rel_err_T1", "rel_err_T2"],
}

DEFAULT_GAMMAS = "0:1:0.02"
DEFAULT_ALPHAS = "0.2,0.4,0.6,0.8,1.0"
DEFAULT_DELTAS = "0.05,0.10,0.15,0.20"


def defaults() -> tuple[MarketParams, QueueConfig]:
    """Reference parameters: c = 1, mu = 1 packet/s, lambda_d = 0.01 packet/s."""
    return MarketParams(c=1.0), QueueConfig(mu=1.0, lambda_d=0.01)


# ---------------------------------------------------------------------------
# value parsing


def parse_values(text: str) -> list[float]:
    """Comma-separated numbers and inclusive ranges ``start:stop:step``."""
    out: list[float] = []
    for item in str(text).split(","):
        item = item.strip()
        if not item:
            continue
        if ":" in item:
            parts = item.split(":")
            if len(parts) != 3:
                raise InvalidConfig(f"range must be start:stop:step, got {item!r}")
            a, b, step = (float(x) for x in parts)
            if not step > 0 or b < a:
                raise InvalidConfig(f"empty or ill-formed range {item!r}")
            n = int(math.floor((b - a) / step + 1e-9)) + 1
            # rounding keeps grid values such as 0.1 exactly as typed
            out.extend(round(a + k * step, 12) for k in range(n))
        else:
            out.append(float(item))
    if not out:
        raise InvalidConfig(f"no values in {text!r}")
    return out


def read_config(path: str) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes equal underscores."""
    settings: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidConfig(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            settings[key.replace("-", "_")] = value
    return settings


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# ---------------------------------------------------------------------------
# sweep specification and execution


@dataclass
class SweepSpec:
    scenario: str
    c: float = 1.0
    mu: float = 1.0
    lambda_d: float = 0.01
    alpha1: list[float] = field(default_factory=lambda: [0.6])
    alpha2: list[float] = field(default_factory=lambda: parse_values(DEFAULT_ALPHAS))
    gamma: list[float] = field(default_factory=lambda: parse_values(DEFAULT_GAMMAS))
    delta: list[float] = field(default_factory=lambda: parse_values(DEFAULT_DELTAS))
    p_grid: list[float] = field(default_factory=list)
    p2_grid: list[float] = field(default_factory=list)
    out: Optional[str] = None
    seed: int = 0
    workers: int = 1
    svg: Optional[str] = None
    # simulator settings
    n1: float = 1.0
    n2: float = 1.0
    departures: int = 100_000
    warmup: Optional[int] = None
    replications: int = 10
    tol_rel: float = 0.02

    def validate(self) -> None:
        if self.scenario not in COLUMNS:
            raise InvalidConfig(f"unknown scenario {self.scenario!r}")
        for name in ("alpha1", "alpha2", "gamma", "delta"):
            if not getattr(self, name):
                raise InvalidConfig(f"axis {name} is empty")
        # constructing the parameter objects runs their range checks
        QueueConfig(self.mu, self.lambda_d, 0.5)
        for g in self.gamma:
            QueueConfig(self.mu, self.lambda_d, g)
        for a1, a2, d in itertools.product(self.alpha1, self.alpha2, self.delta):
            MarketParams(self.c, a1, a2, d)
        if self.scenario == "regionmap":
            if not self.p_grid:
                raise InvalidConfig("regionmap needs --p-grid")
            if len(self.gamma) != 1 or len(self.alpha1) != 1 or len(self.alpha2) != 1:
                raise InvalidConfig("regionmap takes a single gamma, alpha1 and alpha2")
        if self.workers < 1:
            raise InvalidConfig("workers must be at least 1")

    def points(self) -> list[dict]:
        """Parameter points in output order; gamma varies fastest."""
        base = {"c": self.c, "mu": self.mu, "lambda_d": self.lambda_d}
        if self.scenario == "baseline":
            return [dict(base, alpha1=a1) for a1 in self.alpha1]
        deltas = [0.0] if self.scenario == "monopolistic" else self.delta
        return [
            dict(base, alpha1=a1, alpha2=a2, delta=d, gamma=g)
            for a1, a2, d, g in itertools.product(self.alpha1, self.alpha2, deltas, self.gamma)
        ]

    def record(self) -> dict[str, str]:
        """Settings in config-file form."""
        rec = {"scenario": self.scenario, "c": self.c, "mu": self.mu, "lambda_d": self.lambda_d, "seed": self.seed}
        if self.scenario == "sim":
            rec.update(gamma=self.gamma[0], n1=self.n1, n2=self.n2, departures=self.departures,
                       replications=self.replications, tol_rel=self.tol_rel)
            if self.warmup is not None:
                rec["warmup"] = self.warmup
        elif self.scenario == "baseline":
            rec.update(alpha1=self.alpha1)
        else:
            rec.update(alpha1=self.alpha1, alpha2=self.alpha2, gamma=self.gamma)
            if self.scenario != "monopolistic":
                rec.update(delta=self.delta)
            if self.scenario == "regionmap":
                rec.update(p_grid=self.p_grid, p2_grid=self.p2_grid or self.p_grid)
        return {k: ",".join(_fmt(x) for x in v) if isinstance(v, list) else _fmt(v) for k, v in rec.items()}


def solve_point(scenario: str, point: dict) -> dict:
    """Solve one parameter point; failures become a status, not an exception."""
    row = dict(point)
    try:
        queue = QueueConfig(point["mu"], point["lambda_d"], point.get("gamma", 0.5))
        market = MarketParams(point["c"], point["alpha1"], point.get("alpha2", point["alpha1"]), point.get("delta", 0.0))
        if scenario == "baseline":
            r = solve_baseline(queue, market)
            row.update(p1_star=r.p1, n1_star=r.outcome.n1_star, pi0_star=r.profits.pi0)
        elif scenario == "monopolistic":
            r = solve_monopolistic(queue, market)
            row.update(p1_star=r.p1, p2_star=r.p2, n1_star=r.outcome.n1_star, n2_star=r.outcome.n2_star,
                       case=r.outcome.case, pi_m_star=r.profits.pi_m)
        elif scenario == "strategic":
            r = solve_strategic(queue, market)
            lo1, hi1, lo2, hi2 = r.diagnostics["pset"]
            row.update(p1_star=r.p1, p2_star=r.p2, n1_star=r.outcome.n1_star, n2_star=r.outcome.n2_star,
                       case=r.outcome.case, pi1_star=r.profits.pi1, pi2_star=r.profits.pi2,
                       converged=r.diagnostics["converged"],
                       pset_lo1=lo1, pset_hi1=hi1, pset_lo2=lo2, pset_hi2=hi2)
        elif scenario == "feasibility":
            base = solve_baseline(queue, market)
            mono = solve_monopolistic(queue, market)
            strat = solve_strategic(queue, market)
            rep = build_report(base, mono, strat)
            _, _, exceeds = compare_total_subscribers(queue, market, mono, strat)
            lump = rep.lump_sum_range or (math.nan, math.nan)
            row.update(pi0_star=rep.pi0_star, pi_m_star=rep.pi_m_star, pi1_star=rep.pi1_star,
                       pi2_star=rep.pi2_star, monopolistic_feasible=rep.monopolistic_feasible,
                       strategic_feasible=rep.strategic_feasible, lump_sum_lo=lump[0], lump_sum_hi=lump[1],
                       n_total_monopolistic=rep.n_total_monopolistic,
                       n_total_strategic=rep.n_total_strategic, strategic_exceeds=exceeds)
        row["status"] = "ok"
    except DPSMarketError as exc:
        row["status"] = f"error:{type(exc).__name__}"
    return row


def _write_rows(fh, columns: Sequence[str], rows: Iterable[dict]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(col, math.nan)) for col in columns])
        fh.flush()


class _Output:
    def __init__(self, path: Optional[str]):
        self.path = path

    def __enter__(self):
        self.fh = sys.stdout if self.path in (None, "-") else open(self.path, "w", encoding="utf-8", newline="")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        return False


def _write_record(spec: SweepSpec) -> None:
    if spec.out in (None, "-"):
        return
    with open(spec.out + ".cfg", "w", encoding="utf-8") as fh:
        for key, value in spec.record().items():
            fh.write(f"{key} = {value}\n")


def _run_sweep(spec: SweepSpec) -> int:
    points = spec.points()
    columns = COLUMNS[spec.scenario]
    failed = 0

    def rows():
        nonlocal failed
        if spec.workers > 1:
            with ProcessPoolExecutor(max_workers=spec.workers) as pool:
                results = pool.map(solve_point, itertools.repeat(spec.scenario), points)
                for r in results:
                    failed += r["status"] != "ok"
                    yield r
        else:
            for p in points:
                r = solve_point(spec.scenario, p)
                failed += r["status"] != "ok"
                yield r

    collected = []
    with _Output(spec.out) as fh:
        _write_rows(fh, columns, (collected.append(r) or r for r in rows()))
    if spec.svg:
        _plot_sweep(spec, collected)
    if failed:
        _error(EXIT_SOLVER, "SolverFailure", f"{failed} of {len(points)} points failed")
        return EXIT_SOLVER
    return EXIT_OK


def _run_regionmap(spec: SweepSpec) -> int:
    queue = QueueConfig(spec.mu, spec.lambda_d, spec.gamma[0])
    market = MarketParams(spec.c, spec.alpha1[0], spec.alpha2[0], spec.delta[0])
    rows = region_map(queue, market, spec.p_grid, spec.p2_grid or spec.p_grid)
    with _Output(spec.out) as fh:
        _write_rows(fh, COLUMNS["regionmap"], rows)
    if spec.svg:
        _plot_regionmap(spec, rows)
    return EXIT_OK


def _run_sim(spec: SweepSpec) -> int:
    queue = QueueConfig(spec.mu, spec.lambda_d, spec.gamma[0])
    cfg = SimConfig(queue, Load(spec.n1, spec.n2), spec.departures, spec.warmup, spec.replications, spec.seed)
    report = validate_closed_form(cfg, spec.tol_rel, workers=spec.workers)
    res = report.result
    analytic = [c.analytic if c else math.nan for c in report.classes]

    def rel(m, a):
        return abs(m - a) / a if math.isfinite(a) else math.nan

    rows = [
        dict(replication=k, mean_T1=m1, mean_T2=m2, analytic_T1=analytic[0], analytic_T2=analytic[1],
             rel_err_T1=rel(m1, analytic[0]), rel_err_T2=rel(m2, analytic[1]))
        for k, (m1, m2) in enumerate(res.per_replication)
    ]
    rows.append(dict(replication="mean", mean_T1=res.mean_T1, mean_T2=res.mean_T2,
                     analytic_T1=analytic[0], analytic_T2=analytic[1],
                     rel_err_T1=rel(res.mean_T1, analytic[0]), rel_err_T2=rel(res.mean_T2, analytic[1])))
    with _Output(spec.out) as fh:
        _write_rows(fh, COLUMNS["sim"], rows)
    verdict = "pass" if report.passed else "fail"
    parts = []
    for k, c in enumerate(report.classes, 1):
        if c is not None:
            parts.append(f"T{k}: sim={c.observed:.6g} +/- {c.half_width:.3g} analytic={c.analytic:.6g} "
                         f"rel_err={c.rel_err:.3g} in_ci={_fmt(c.within_ci)}")
    print(f"validation {verdict}; " + "; ".join(parts), file=sys.stderr)
    return EXIT_OK


def run(spec: SweepSpec) -> int:
    """Execute a specification and return the process exit status."""
    try:
        spec.validate()
        _write_record(spec)
        if spec.scenario == "regionmap":
            return _run_regionmap(spec)
        if spec.scenario == "sim":
            return _run_sim(spec)
        return _run_sweep(spec)
    except UnstableLoad as exc:
        _error(EXIT_UNSTABLE, type(exc).__name__, str(exc))
        return EXIT_UNSTABLE
    except (InvalidConfig, ValueError) as exc:
        _error(EXIT_SPEC, type(exc).__name__, str(exc))
        return EXIT_SPEC
    except DPSMarketError as exc:
        _error(EXIT_SOLVER, type(exc).__name__, str(exc))
        return EXIT_SOLVER


def _error(code: int, kind: str, message: str) -> None:
    message = message.replace('"', "'")
    print(f'error code={code} kind={kind} message="{message}"', file=sys.stderr)


# ---------------------------------------------------------------------------
# optional SVG rendering


def _pyplot():
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise InvalidConfig("SVG output needs matplotlib (pip install 'artifact[plot]')") from exc
    return plt


_Y_COLUMN = {
    "baseline": "pi0_star",
    "monopolistic": "pi_m_star",
    "strategic": "p1_star",
    "feasibility": "pi_m_star",
}


def _plot_sweep(spec: SweepSpec, rows: list[dict]) -> None:
    plt = _pyplot()
    y = _Y_COLUMN[spec.scenario]
    fig, ax = plt.subplots(figsize=(6, 4))
    if spec.scenario == "baseline":
        ax.plot([r["alpha1"] for r in rows], [r.get(y, math.nan) for r in rows], marker="o")
        ax.set_xlabel("alpha1")
    else:
        key = lambda r: (r["alpha1"], r["alpha2"], r["delta"])  # noqa: E731
        for k, group in itertools.groupby(rows, key=key):
            group = list(group)
            label = f"a1={k[0]:g} a2={k[1]:g}" + (f" d={k[2]:g}" if spec.scenario != "monopolistic" else "")
            ax.plot([r["gamma"] for r in group], [r.get(y, math.nan) for r in group], label=label)
        ax.set_xlabel("gamma")
        ax.legend(fontsize=6)
    ax.set_ylabel(y)
    fig.tight_layout()
    fig.savefig(spec.svg, format="svg", metadata={"Date": None})
    plt.close(fig)


def _plot_regionmap(spec: SweepSpec, rows: list[dict]) -> None:
    plt = _pyplot()
    g1 = np.asarray(spec.p_grid)
    g2 = np.asarray(spec.p2_grid or spec.p_grid)
    codes = {"I": 1, "II": 2, "III": 3, "IV": 4}
    z = np.array([codes[r["case"]] for r in rows]).reshape(len(g1), len(g2))
    fig, ax = plt.subplots(figsize=(5, 4))
    mesh = ax.pcolormesh(g1, g2, z.T, shading="nearest", cmap="viridis", vmin=1, vmax=4)
    fig.colorbar(mesh, ax=ax, ticks=[1, 2, 3, 4], label="case I..IV")
    ax.set_xlabel("p1")
    ax.set_ylabel("p2")
    fig.tight_layout()
    fig.savefig(spec.svg, format="svg", metadata={"Date": None})
    plt.close(fig)


# ---------------------------------------------------------------------------
# argument parsing


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value settings file; flags override it")
    p.add_argument("--c", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda-d", dest="lambda_d", type=float)
    p.add_argument("--out", help="CSV path, '-' or omitted for stdout")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)


def _market_axes(p: argparse.ArgumentParser, scalar: bool) -> None:
    kind = "value" if scalar else "values or a:b:step ranges"
    p.add_argument("--alpha1", help=f"NO base sensitivity ({kind})")
    p.add_argument("--alpha2", help=f"VO base sensitivity ({kind})")
    p.add_argument("--gamma", help=f"slice weight of the VO base ({kind})")
    p.add_argument("--delta", help=f"per-subscriber fee ({kind})")
    p.add_argument("--svg", help="optional SVG rendering of the table")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsmarket", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", help="solve a single parameter point")
    p.add_argument("--scenario", choices=["baseline", "monopolistic", "strategic", "feasibility"])
    _common(p)
    _market_axes(p, scalar=True)

    p = sub.add_parser("sweep", help="solve a grid of parameter points")
    p.add_argument("--scenario", choices=["baseline", "monopolistic", "strategic", "feasibility", "regionmap"])
    _common(p)
    _market_axes(p, scalar=False)
    p.add_argument("--p-grid", dest="p_grid", help="price grid for the region map")
    p.add_argument("--p2-grid", dest="p2_grid")

    p = sub.add_parser("regionmap", help="Wardrop regime over a price grid")
    _common(p)
    _market_axes(p, scalar=True)
    p.add_argument("--p-grid", dest="p_grid")
    p.add_argument("--p2-grid", dest="p2_grid", help="grid for p2 (defaults to --p-grid)")

    p = sub.add_parser("feasibility", help="incentive conditions over a grid")
    _common(p)
    _market_axes(p, scalar=False)

    p = sub.add_parser("sim", help="validate the delay formulas by simulation")
    _common(p)
    p.add_argument("--gamma")
    p.add_argument("--n1", type=float)
    p.add_argument("--n2", type=float)
    p.add_argument("--departures", type=float, help="measured departures per replication")
    p.add_argument("--warmup", type=float)
    p.add_argument("--replications", type=int)
    p.add_argument("--tol-rel", dest="tol_rel", type=float)
    return parser


_EVAL_DEFAULTS = {"alpha1": "0.6", "alpha2": "0.6", "gamma": "0.5", "delta": "0.0"}
_LIST_KEYS = ("alpha1", "alpha2", "gamma", "delta", "p_grid", "p2_grid")
_INT_KEYS = ("seed", "workers", "replications")
_FLOAT_KEYS = ("c", "mu", "lambda_d", "n1", "n2", "tol_rel")


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    settings: dict[str, str] = read_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key in ("config", "command") or value is None:
            continue
        settings[key] = str(value)

    command = args.command
    if command == "eval":
        for k, v in _EVAL_DEFAULTS.items():
            settings.setdefault(k, v)
    elif command == "sim":
        settings.setdefault("gamma", "0.5")
    if command in ("regionmap", "sim", "feasibility"):
        settings["scenario"] = command
    elif "scenario" not in settings:
        raise InvalidConfig(f"{command} needs --scenario")
    if command == "regionmap":
        for k in ("alpha1", "alpha2", "gamma"):
            settings.setdefault(k, _EVAL_DEFAULTS[k])
        settings.setdefault("delta", "0.0")

    known = set(SweepSpec.__dataclass_fields__)
    unknown = set(settings) - known
    if unknown:
        raise InvalidConfig(f"unknown setting(s): {', '.join(sorted(unknown))}")
    kwargs: dict = {}
    for key, value in settings.items():
        if key in _LIST_KEYS:
            kwargs[key] = parse_values(value)
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in ("departures", "warmup"):
            kwargs[key] = int(float(value))
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        else:
            kwargs[key] = value
    spec = SweepSpec(**kwargs)
    if command == "eval":
        if any(len(getattr(spec, k)) != 1 for k in ("alpha1", "alpha2", "gamma", "delta")):
            raise InvalidConfig("eval takes single parameter values; use sweep for grids")
    if command == "sim" and len(spec.gamma) != 1:
        raise InvalidConfig("sim takes a single gamma")
    return spec


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
    except (InvalidConfig, ValueError, OSError) as exc:
        _error(EXIT_SPEC, type(exc).__name__, str(exc))
        return EXIT_SPEC
    return run(spec)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
