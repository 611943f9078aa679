"""Batch experiments, summary statistics, Welch's t-test and search-space size."""

from __future__ import annotations

import csv
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .evolution import EvolutionConfig, RunResult, evolve
from .tileworld import GridMap, load_map


# -- Student t tail via the regularized incomplete beta function -------------

def _betacf(a: float, b: float, x: float, max_iter: int = 300, eps: float = 1e-15) -> float:
    """Continued fraction for I_x(a, b), modified Lentz's method."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = 1.0 / (d if abs(d) > tiny else tiny)
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = 1.0 / (d if abs(d) > tiny else tiny)
        c = 1.0 + aa / c
        c = c if abs(c) > tiny else tiny
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            break
    return h


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must be in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, df: float) -> float:
    if math.isinf(t):
        return 0.0
    p = betainc(df / 2.0, 0.5, df / (df + t * t))
    return min(1.0, max(0.0, p))


@dataclass(frozen=True)
class WelchResult:
    t: float
    df: float
    p: float

    def __iter__(self):
        return iter((self.t, self.df, self.p))


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    na, nb = len(a), len(b)
    if na < 2 or nb < 2:
        raise ValueError("each sample needs at least 2 observations")
    ma, mb = statistics.fmean(a), statistics.fmean(b)
    va, vb = statistics.variance(a), statistics.variance(b)
    qa, qb = va / na, vb / nb
    se2 = qa + qb
    if se2 == 0.0:
        # both samples constant
        df = float(na + nb - 2)
        if ma == mb:
            return WelchResult(0.0, df, 1.0)
        return WelchResult(math.copysign(math.inf, ma - mb), df, 0.0)
    t = (ma - mb) / math.sqrt(se2)
    df = se2 * se2 / (qa * qa / (na - 1) + qb * qb / (nb - 1))
    return WelchResult(t, df, t_two_sided_p(t, df))


# -- search space --------------------------------------------------------------

@dataclass(frozen=True)
class SearchSpaceParams:
    ps: int
    nj: int
    np: int
    nb: Fraction
    na: int = 1

    def __post_init__(self):
        object.__setattr__(self, "nb", Fraction(self.nb))
        for name in ("ps", "nj", "np", "nb", "na"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def tileworld(cls, program_size: int = 3, num_agents: int = 3) -> SearchSpaceParams:
        return cls(program_size, 7, 4, Fraction(4 * 5 + 3 * 4, 7), num_agents)


def search_space(params: SearchSpaceParams, situation_based: bool = False) -> float:
    """log10 of the number of distinct connection settings."""
    base = params.ps * (params.nj * params.nb + params.np)
    exponent = params.ps * (params.nj + params.np)
    value = exponent * math.log10(base)
    if situation_based:
        value += math.log10(params.na)
    return value


def search_space_exact(params: SearchSpaceParams, situation_based: bool = False) -> int:
    base = params.ps * (params.nj * params.nb + params.np)
    if base.denominator != 1:
        raise ValueError("exact size needs an integer total branch count")
    size = 1
    for _ in range(params.ps * (params.nj + params.np)):
        size *= base.numerator
    return size * params.na if situation_based else size


# -- batch experiments ---------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    evolution: EvolutionConfig
    map_path: str
    runs: int = 30
    seed_base: int = 0

    def seeds(self) -> list[int]:
        return [self.seed_base + r for r in range(self.runs)]


@dataclass
class RunSummary:
    run: int
    seed: int
    final_best: float
    success: bool
    curve: list[tuple[int, float]]
    violations: int = 0
    result: RunResult | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class AggregateStats:
    mean: float
    std: float
    successes: int
    n: int

    def line(self) -> str:
        return f"n={self.n} mean={self.mean!r} std={self.std!r} successes={self.successes}"


def summarize(run: int, seed: int, result: RunResult) -> RunSummary:
    return RunSummary(run, seed, result.best.fitness, result.best_result.success,
                      result.best_so_far, result.violations, result)


def aggregate(summaries: Sequence[RunSummary]) -> AggregateStats:
    values = [s.final_best for s in summaries]
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return AggregateStats(statistics.fmean(values), std,
                          sum(s.success for s in summaries), len(values))


def _one_run(args) -> RunSummary:
    run, seed, config, grid, check = args
    return summarize(run, seed, evolve(config, grid, seed, check_structure=check))


def run_batch(config: ExperimentConfig, workers: int = 1, grid: GridMap | None = None,
              check_structure: bool = False) -> tuple[list[RunSummary], AggregateStats]:
    """Run ``config.runs`` independent evolutions on seeds ``seed_base + run``.

    Runs are distributed over ``workers`` processes; the output does not
    depend on the worker count.
    """
    grid = grid or load_map(config.map_path)
    jobs = [(r, s, config.evolution, grid, check_structure) for r, s in enumerate(config.seeds())]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            summaries = list(pool.map(_one_run, jobs))
    else:
        summaries = [_one_run(j) for j in jobs]
    return summaries, aggregate(summaries)


def aggregate_curves(curves: Sequence[Sequence[tuple[int, float]]]
                     ) -> tuple[list[int], list[float], list[list[float]]]:
    """Step-interpolate best-so-far curves onto a shared evaluation grid.

    The grid step is the smallest first-generation evaluation count; each run
    carries its last value forward past its own end. Grid points before a
    run's first point are NaN for that run and left out of the mean.
    """
    if not curves:
        raise ValueError("need at least one curve")
    step = min(c[0][0] for c in curves)
    end = max(c[-1][0] for c in curves)
    grid = list(range(step, end + 1, step))
    if grid[-1] != end:
        grid.append(end)
    columns = []
    for curve in curves:
        col, k = [], -1
        for g in grid:
            while k + 1 < len(curve) and curve[k + 1][0] <= g:
                k += 1
            col.append(curve[k][1] if k >= 0 else math.nan)
        columns.append(col)
    means = []
    for i in range(len(grid)):
        present = [c[i] for c in columns if not math.isnan(c[i])]
        means.append(statistics.fmean(present))
    return grid, means, columns


# -- CSV -----------------------------------------------------------------------

def fmt(value) -> str:
    """CSV cell text; floats use the shortest round-trip repr."""
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def _write(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_runs_csv(path, summaries: Sequence[RunSummary]) -> None:
    _write(Path(path), ("run", "seed", "final_best", "success"),
           ((s.run, s.seed, s.final_best, s.success) for s in summaries))


def write_curve_csv(path, curves: Sequence[Sequence[tuple[int, float]]],
                    names: Sequence[str] | None = None) -> None:
    grid, means, columns = aggregate_curves(curves)
    names = list(names) if names is not None else [f"run{i}" for i in range(len(curves))]
    _write(Path(path), ["evaluations", "mean_best", *names],
           ([g, m, *(c[i] for c in columns)] for i, (g, m) in enumerate(zip(grid, means))))


def read_curve_csv(path) -> tuple[list[str], list[list[tuple[int, float]]]]:
    """Recover the per-run step curves stored in a ``curve.csv``."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    names = header[2:]
    curves = []
    for j in range(len(names)):
        points = [(int(r[0]), float(r[2 + j])) for r in body if r[2 + j] != ""]
        curves.append(points)
    return names, curves


@dataclass(frozen=True)
class CompareRow:
    algorithm: str
    rank: int
    mean: float
    std: float
    successes: int
    p_value: float | None


def compare_rows(results: dict[str, tuple[list[RunSummary], AggregateStats]],
                 reference: str) -> list[CompareRow]:
    """Rank algorithms by mean final best and test each against ``reference``."""
    names = list(results)
    order = sorted(names, key=lambda n: (-results[n][1].mean, names.index(n)))
    ref = [s.final_best for s in results[reference][0]]
    rows = []
    for name in names:
        summaries, agg = results[name]
        p = None
        if name != reference:
            p = welch_t_test([s.final_best for s in summaries], ref).p
        rows.append(CompareRow(name, order.index(name) + 1, agg.mean, agg.std, agg.successes, p))
    return rows


def write_compare_csv(path, rows: Sequence[CompareRow]) -> None:
    _write(Path(path), ("algorithm", "rank", "mean", "std", "successes", "p_value_vs_proposed"),
           ((r.algorithm, r.rank, r.mean, r.std, r.successes, r.p_value) for r in rows))
