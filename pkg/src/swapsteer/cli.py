"""Command-line entry point.

    swapsteer <command> [--config PATH] [--seed N] [--out PATH] [--format human|machine]

Exit codes: 0 success, 2 config error, 3 assumption violation
(rank deficiency, premise unmet), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from ._parallel import parallel_map
from .config import ScenarioConfig, build_strategy, parse_config, with_overrides
from .errors import ConfigError, SwapSteerError
from .randomness import CertifyConfig, EveConfig, certify, entangled_source_attack
from .report import RunReport, SweepPoint, render_report
from .scenario import correlations, isotropic_strategy
from .selftest import PREMISE_TOL, verify_selftest
from .witness import LhsConfig, lhs_bound, witness_expectation_form

COMMANDS = ("witness", "selftest", "certify", "lhs-bound", "sweep", "attack-demo")


class _Timer:
    def __init__(self) -> None:
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = time.perf_counter() - t0


def _eve_config(c: ScenarioConfig) -> EveConfig:
    o = c.optimizer
    return EveConfig(
        eve_dim=o.eve_dim,
        restarts=o.eve_restarts,
        iterations=o.eve_iterations,
        consistency_tol=c.tolerance("consistency", 1e-8),
    )


def run(command: str, c: ScenarioConfig, base_dir: Path | None = None) -> RunReport:
    """Execute one command; errors from the computation modules propagate."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    timer = _Timer()
    out: dict = {}
    premise_tol = c.tolerance("premise", PREMISE_TOL)

    if command == "lhs-bound":
        with timer.stage("lhs"):
            out["lhs"] = lhs_bound(LhsConfig(c.optimizer.restarts, c.optimizer.iterations), seed=c.seed)
    elif command == "attack-demo":
        with timer.stage("attack"):
            demo = entangled_source_attack()
        out["attack"] = demo
        out["table"] = tuple(map(tuple, demo.table.probabilities.tolist()))
    elif command == "sweep":
        with timer.stage("sweep"):
            points = parallel_map(lambda v: SweepPoint(v, witness_expectation_form(isotropic_strategy(v))), c.sweep_grid)
        out["sweep"] = tuple(points)
    else:
        with timer.stage("strategy"):
            s = build_strategy(c, base_dir)
        with timer.stage("witness"):
            out["witness"] = witness_expectation_form(s)
            out["table"] = tuple(map(tuple, correlations(s).probabilities.tolist()))
        if command == "selftest":
            with timer.stage("selftest"):
                out["extraction"] = verify_selftest(
                    s, tol=premise_tol, structural_tol=c.tolerance("structural", 1e-9), seed=c.seed
                )
        elif command == "certify":
            with timer.stage("certify"):
                out["certification"] = certify(s, CertifyConfig(premise_tol, _eve_config(c)), seed=c.seed)
    return RunReport(command=command, config=c, timing=timer.stages, **out)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="swapsteer", description="Two-source swap-steering numerics.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="key=value scenario config (defaults apply if omitted)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--format", choices=("human", "machine"))
    return p


def _load_config(path: Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return parse_config(text)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        c = _load_config(args.config)
        c = with_overrides(
            c,
            seed=args.seed,
            output_format=args.format,
            output_path=str(args.out) if args.out else None,
        )
        base_dir = args.config.parent if args.config else None
        report = run(args.command, c, base_dir)
        text = render_report(report, c.output_format)
        if c.output_path:
            Path(c.output_path).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    except SwapSteerError as exc:
        print(f"swapsteer {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        # malformed environment settings such as SWAPSTEER_THREADS
        print(f"swapsteer {args.command}: ConfigError: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
