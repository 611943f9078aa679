"""Command-line entry point.

Exit codes: 0 success, 1 runtime or validation failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from . import kernel
from .core import dumps_individual
from .evolution import EvolutionConfig, Variant
from .stats import (ExperimentConfig, SearchSpaceParams, compare_rows, read_curve_csv,
                    run_batch, search_space, search_space_exact, write_compare_csv,
                    write_curve_csv, write_runs_csv)
from .tileworld import ConfigurationError, FitnessWeights, MapError, load_map

MAPS_DIR = Path(__file__).parent / "maps"

# key -> (parser, default); None default means required
CONFIG_KEYS = {
    "map": (str, None),
    "variant": (str, "proposed"),
    "out_dir": (str, "out"),
    "seed": (int, 0),
    "workers": (int, 1),
    "runs": (int, 30),
    "generations": (int, 1000),
    "population_size": (int, 100),
    "group_count": (int, ""),
    "num_agents": (int, ""),
    "elite_count": (int, 2),
    "crossover_prob": (float, 0.4),
    "mutation_prob": (float, 0.01),
    "tournament_size": (int, 3),
    "program_size": (int, 3),
    "initial_steps": (int, 60),
    "w1": ("number", 100),
    "w2": ("number", 1),
    "w3": ("number", 20),
}


class UsageError(Exception):
    pass


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not math.isfinite(value):
            raise ValueError(f"not finite: {text}")
        return value


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"config line {lineno}: expected 'key = value'")
        values[key.strip()] = value.strip()
    return values


def resolve_config(values: dict[str, str], base_dir: Path | None = None) -> dict:
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise UsageError(f"unknown key: {unknown[0]}")
    out = {}
    for key, (kind, default) in CONFIG_KEYS.items():
        if key not in values:
            if default is None:
                raise UsageError(f"missing key: {key}")
            out[key] = None if default == "" else default
            continue
        text = values[key]
        try:
            out[key] = _number(text) if kind == "number" else kind(text)
        except ValueError:
            raise UsageError(f"bad value for {key}: {text!r}") from None
    try:
        Variant(out["variant"])
    except ValueError:
        raise UsageError(f"bad value for variant: {out['variant']!r}") from None
    out["map"] = str(_resolve_map(out["map"], base_dir))
    return out


def _resolve_map(name: str, base_dir: Path | None) -> Path:
    path = Path(name)
    if not path.is_absolute() and base_dir is not None and (base_dir / path).exists():
        return base_dir / path
    if not path.exists():
        bundled = MAPS_DIR / (name if name.endswith(".map") else name + ".map")
        if bundled.exists():
            return bundled
    return path


def load_config(args) -> dict:
    values, base = {}, None
    if args.config:
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        values = parse_config_text(text)
        base = Path(args.config).resolve().parent
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects key=value, got {item!r}")
        values[key.strip()] = value.strip()
    for flag, key in (("seed", "seed"), ("workers", "workers"), ("out", "out_dir"),
                      ("variant", "variant")):
        value = getattr(args, flag, None)
        if value is not None:
            values[key] = str(value)
    return resolve_config(values, base)


def evolution_config(cfg: dict, variant: Variant, num_agents: int) -> EvolutionConfig:
    if cfg["num_agents"] is not None and cfg["num_agents"] != num_agents:
        raise UsageError(f"num_agents={cfg['num_agents']} but the map has {num_agents} agents")
    try:
        return EvolutionConfig(
            variant=variant, num_agents=num_agents, population_size=cfg["population_size"],
            group_count=cfg["group_count"], elite_count=cfg["elite_count"],
            crossover_prob=cfg["crossover_prob"], mutation_prob=cfg["mutation_prob"],
            tournament_size=cfg["tournament_size"], generations=cfg["generations"],
            program_size=cfg["program_size"], initial_steps=cfg["initial_steps"],
            weights=FitnessWeights(cfg["w1"], cfg["w2"], cfg["w3"]))
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from None


def matched_generations(budget: EvolutionConfig, config: EvolutionConfig) -> int:
    """Generations giving ``config`` at least the evaluations of ``budget``."""
    return -(-budget.generations * budget.group_count // config.group_count)


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise RuntimeError(f"cannot create output directory {out}: {exc}") from None
    if not os.access(out, os.W_OK):
        raise RuntimeError(f"output directory {out} is not writable")
    return out


def _write_run_outputs(out: Path, summaries) -> None:
    write_runs_csv(out / "runs.csv", summaries)
    write_curve_csv(out / "curve.csv", [s.curve for s in summaries],
                    [f"run{s.run}" for s in summaries])
    best = min(summaries, key=lambda s: (-s.final_best, s.run))
    blocks = [f"# run {best.run} seed {best.seed} fitness {best.final_best}\n"]
    for i, member in enumerate(best.result.best.members):
        blocks.append(f"# member {i}\n" + dumps_individual(member))
    (out / "best_group.txt").write_text("".join(blocks), encoding="utf-8")


def cmd_run(args) -> int:
    cfg = load_config(args)
    grid = load_map(cfg["map"])
    econf = evolution_config(cfg, Variant(cfg["variant"]), len(grid.agents))
    out = _out_dir(cfg["out_dir"])
    exp = ExperimentConfig(econf, cfg["map"], cfg["runs"], cfg["seed"])
    summaries, agg = run_batch(exp, workers=cfg["workers"], grid=grid)
    _write_run_outputs(out, summaries)
    print(f"variant={econf.variant.value} groups={econf.group_count} "
          f"generations={econf.generations} {agg.line()}")
    return 0


def compare_variants(cfg: dict, grid, out: Path, check_structure: bool = False,
                     echo=print) -> dict:
    """Run every variant on matched seeds and evaluation budgets; write outputs.

    Returns ``{label: (summaries, aggregate)}`` in variant order.
    """
    budget = evolution_config(cfg, Variant.GNP, len(grid.agents))
    results = {}
    for variant in Variant:
        econf = evolution_config(cfg, variant, len(grid.agents))
        econf = replace(econf, generations=matched_generations(budget, econf))
        exp = ExperimentConfig(econf, cfg["map"], cfg["runs"], cfg["seed"])
        summaries, agg = run_batch(exp, workers=cfg["workers"], grid=grid,
                                   check_structure=check_structure)
        sub = out / variant.value
        sub.mkdir(exist_ok=True)
        _write_run_outputs(sub, summaries)
        results[variant.label] = (summaries, agg)
        echo(f"{variant.label}: groups={econf.group_count} generations={econf.generations} "
             f"{agg.line()}")
    write_compare_csv(out / "compare.csv", compare_rows(results, Variant.PROPOSED.label))
    return results


def cmd_compare(args) -> int:
    cfg = load_config(args)
    grid = load_map(cfg["map"])
    compare_variants(cfg, grid, _out_dir(cfg["out_dir"]))
    return 0


def cmd_curve(args) -> int:
    curves, names = [], []
    for item in args.inputs:
        path = Path(item)
        source = path / "curve.csv" if path.is_dir() else path
        if not source.exists():
            raise RuntimeError(f"no curve.csv at {item}")
        cols, runs = read_curve_csv(source)
        prefix = (source.parent.name or "input") + "/"
        names += [prefix + c for c in cols]
        curves += runs
    out = _out_dir(args.out or ".")
    write_curve_csv(out / "curve.csv", curves, names)
    print(f"{len(curves)} runs -> {out / 'curve.csv'}")
    return 0


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text}") from None


def cmd_search_space(args) -> int:
    try:
        params = SearchSpaceParams(args.ps, args.nj, args.np, args.nb, args.na)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    plain = search_space(params)
    situated = search_space(params, situation_based=True)
    print(f"log10 = {plain:.4f}")
    print(f"situation-based log10 = {situated:.4f} (NA={params.na})")
    if args.exact:
        try:
            size = search_space_exact(params)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        print(f"size = {size}")
        print(f"situation-based size = {size * params.na}")
    return 0


def cmd_validate_map(args) -> int:
    try:
        grid = load_map(args.path)
    except (OSError, MapError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{grid.width}x{grid.height}, agents={len(grid.agents)}, "
          f"tiles={len(grid.tiles)}, holes={len(grid.holes)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sbgnp", description=__doc__.splitlines()[0])
    parser.add_argument("--kernel-info", action="store_true", help="print the episode kernel in use")
    sub = parser.add_subparsers(dest="command")

    def experiment(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--out")
        p.add_argument("--variant", choices=[v.value for v in Variant])
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any config key")

    experiment(sub.add_parser("run", help="batch of runs for one variant"))
    experiment(sub.add_parser("compare", help="all four variants, compare.csv"))
    p = sub.add_parser("curve", help="merge curve.csv files from earlier runs")
    p.add_argument("inputs", nargs="+", help="run output directories or curve.csv files")
    p.add_argument("--out")
    p = sub.add_parser("search-space", help="size of the connection search space")
    p.add_argument("--ps", type=int, default=3)
    p.add_argument("--nj", type=int, default=7)
    p.add_argument("--np", type=int, default=4)
    p.add_argument("--nb", type=_fraction, default=Fraction(32, 7))
    p.add_argument("--na", type=int, default=3)
    p.add_argument("--exact", action="store_true", help="also print the exact integer size")
    p = sub.add_parser("validate-map", help="parse a map file and print its contents")
    p.add_argument("path")
    return parser


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "curve": cmd_curve,
            "search-space": cmd_search_space, "validate-map": cmd_validate_map}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.kernel_info:
        print(f"kernel: {kernel.BACKEND} (available: {', '.join(kernel.available())})")
        if args.command is None:
            return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MapError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
