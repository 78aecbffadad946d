"""Scenario configuration and strategy files.

Config text is flat ``key=value`` tokens separated by whitespace or
newlines; ``#`` starts a comment. Dotted prefixes group related keys::

    strategy=isotropic v=0.8 seed=3
    optimizer.restarts=32
    output.format=machine

Strategy files hold complex-matrix literal blocks::

    matrix source1 4 4
    0.5,0 0,0 0,0 0.5,0
    ...

Each block header gives a name and the row/column counts, followed by
``rows * cols`` row-major ``re,im`` tokens. Required names are
``source1``, ``source2`` and ``bob.0`` .. ``bob.3``; ``alice.0`` ..
``alice.3`` optionally override Alice's Bell measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .scenario import (
    D,
    Povm,
    Strategy,
    ideal_strategy,
    isotropic_strategy,
    product_strategy,
)

STRATEGIES = ("ideal", "isotropic", "product", "custom")
FORMATS = ("human", "machine")
FORMAT_ALIASES = {"human-table": "human", "machine-record": "machine"}
DEFAULT_GRID = tuple(round(0.1 * k, 10) for k in range(11))
TOLERANCE_KEYS = ("premise", "consistency", "structural")


@dataclass(frozen=True)
class OptimizerSettings:
    restarts: int = 32
    iterations: int = 400
    eve_dim: int = 16
    eve_restarts: int = 2
    eve_iterations: int = 40


@dataclass(frozen=True)
class ScenarioConfig:
    strategy: str = "ideal"
    v: float = 1.0
    path: str | None = None
    seed: int = 0
    tolerances: dict = field(default_factory=dict)
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    output_path: str | None = None
    output_format: str = "human"
    sweep_grid: tuple[float, ...] = DEFAULT_GRID

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"field 'strategy': expected one of {STRATEGIES}, got {self.strategy!r}")
        if not 0.0 <= self.v <= 1.0:
            raise ConfigError(f"field 'v': visibility must lie in [0, 1], got {self.v!r}")
        if self.strategy == "custom" and not self.path:
            raise ConfigError("field 'path': required for strategy=custom")
        if self.output_format not in FORMATS:
            raise ConfigError(f"field 'output.format': expected one of {FORMATS}, got {self.output_format!r}")
        for key, value in self.tolerances.items():
            if key not in TOLERANCE_KEYS:
                raise ConfigError(f"field 'tolerance.{key}': unknown tolerance")
            if not value > 0:
                raise ConfigError(f"field 'tolerance.{key}': must be positive")
        opt = self.optimizer
        for f in fields(opt):
            if getattr(opt, f.name) < 1:
                raise ConfigError(f"field 'optimizer.{f.name}': must be >= 1")
        if not self.sweep_grid:
            raise ConfigError("field 'sweep.grid': needs at least one point")
        for v in self.sweep_grid:
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"field 'sweep.grid': point {v!r} outside [0, 1]")

    def tolerance(self, key: str, default: float) -> float:
        return float(self.tolerances.get(key, default))


def _parse_float(key: str, raw: str, line: int) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"line {line}: field '{key}': not a number: {raw!r}") from None
    if not np.isfinite(value):
        raise ConfigError(f"line {line}: field '{key}': must be finite")
    return value


def _parse_int(key: str, raw: str, line: int) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"line {line}: field '{key}': not an integer: {raw!r}") from None


def _tokens(text: str):
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0]
        for token in line.split():
            yield lineno, token


def parse_config(text: str) -> ScenarioConfig:
    values: dict = {}
    tolerances: dict = {}
    opt: dict = {}
    seen: dict[str, int] = {}
    opt_names = {f.name for f in fields(OptimizerSettings)}
    for lineno, token in _tokens(text):
        if "=" not in token:
            raise ConfigError(f"line {lineno}: expected key=value, got {token!r}")
        key, raw = token.split("=", 1)
        if key in seen:
            raise ConfigError(f"line {lineno}: field '{key}' repeated (first on line {seen[key]})")
        seen[key] = lineno
        if key == "strategy":
            if raw.startswith("isotropic(") and raw.endswith(")"):
                values["strategy"] = "isotropic"
                values["v"] = _parse_float("v", raw[len("isotropic(") : -1], lineno)
            else:
                values["strategy"] = raw
        elif key == "v":
            values["v"] = _parse_float(key, raw, lineno)
        elif key == "path":
            values["path"] = raw
        elif key == "seed":
            values["seed"] = _parse_int(key, raw, lineno)
        elif key.startswith("tolerance."):
            name = key.split(".", 1)[1]
            if name not in TOLERANCE_KEYS:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            tolerances[name] = _parse_float(key, raw, lineno)
        elif key.startswith("optimizer."):
            name = key.split(".", 1)[1]
            if name not in opt_names:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            opt[name] = _parse_int(key, raw, lineno)
        elif key == "output.path":
            values["output_path"] = raw
        elif key == "output.format":
            values["output_format"] = FORMAT_ALIASES.get(raw, raw)
        elif key == "sweep.grid":
            values["sweep_grid"] = tuple(
                _parse_float(key, part, lineno) for part in raw.split(",") if part
            )
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    try:
        return ScenarioConfig(tolerances=tolerances, optimizer=OptimizerSettings(**opt), **values)
    except ConfigError as exc:
        # messages name the offending key as field '<key>'; v may come from strategy=isotropic(v)
        key = str(exc).split("'")[1] if "'" in str(exc) else ""
        line = seen.get(key, seen.get("strategy"))
        raise ConfigError(f"line {line}: {exc}" if line else str(exc)) from None


def render_config(c: ScenarioConfig) -> str:
    lines = [f"strategy={c.strategy}", f"v={c.v!r}"]
    if c.path is not None:
        lines.append(f"path={c.path}")
    lines.append(f"seed={c.seed}")
    for key in sorted(c.tolerances):
        lines.append(f"tolerance.{key}={float(c.tolerances[key])!r}")
    for f in fields(c.optimizer):
        lines.append(f"optimizer.{f.name}={getattr(c.optimizer, f.name)}")
    if c.output_path is not None:
        lines.append(f"output.path={c.output_path}")
    lines.append(f"output.format={c.output_format}")
    lines.append("sweep.grid=" + ",".join(repr(float(v)) for v in c.sweep_grid))
    return "\n".join(lines) + "\n"


def config_items(c: ScenarioConfig) -> list[tuple[str, str]]:
    """The rendered config as (key, value) pairs."""
    return [tuple(line.split("=", 1)) for line in render_config(c).splitlines()]


def with_overrides(c: ScenarioConfig, **changes) -> ScenarioConfig:
    changes = {k: v for k, v in changes.items() if v is not None}
    return replace(c, **changes) if changes else c


# --- strategy files -------------------------------------------------------


def _format_complex(z: complex) -> str:
    return f"{float(z.real)!r},{float(z.imag)!r}"


def render_matrix_block(name: str, m: np.ndarray) -> str:
    rows, cols = m.shape
    body = "\n".join(" ".join(_format_complex(z) for z in row) for row in m)
    return f"matrix {name} {rows} {cols}\n{body}\n"


def parse_matrix_blocks(text: str) -> dict[str, np.ndarray]:
    tokens = list(_tokens(text))
    blocks: dict[str, np.ndarray] = {}
    i = 0
    while i < len(tokens):
        lineno, word = tokens[i]
        if word != "matrix":
            raise ConfigError(f"line {lineno}: expected 'matrix', got {word!r}")
        if i + 3 >= len(tokens):
            raise ConfigError(f"line {lineno}: truncated matrix header")
        name = tokens[i + 1][1]
        rows = _parse_int("rows", tokens[i + 2][1], lineno)
        cols = _parse_int("cols", tokens[i + 3][1], lineno)
        if rows < 1 or cols < 1:
            raise ConfigError(f"line {lineno}: matrix {name!r} needs positive dimensions")
        if name in blocks:
            raise ConfigError(f"line {lineno}: matrix {name!r} defined twice")
        i += 4
        entries = tokens[i : i + rows * cols]
        if len(entries) != rows * cols:
            raise ConfigError(f"line {lineno}: matrix {name!r} needs {rows * cols} entries, got {len(entries)}")
        values = []
        for ln, tok in entries:
            parts = tok.split(",")
            if len(parts) != 2:
                raise ConfigError(f"line {ln}: expected 're,im', got {tok!r}")
            values.append(complex(_parse_float(name, parts[0], ln), _parse_float(name, parts[1], ln)))
        blocks[name] = np.array(values, dtype=complex).reshape(rows, cols)
        i += rows * cols
    return blocks


def render_strategy(s: Strategy) -> str:
    parts = [render_matrix_block("source1", s.source1), render_matrix_block("source2", s.source2)]
    parts += [render_matrix_block(f"bob.{b}", e) for b, e in enumerate(s.bob.elements)]
    parts += [render_matrix_block(f"alice.{a}", e) for a, e in enumerate(s.alice.elements)]
    return "".join(parts)


def parse_strategy(text: str) -> Strategy:
    blocks = parse_matrix_blocks(text)
    known = {"source1", "source2"} | {f"bob.{b}" for b in range(D)} | {f"alice.{a}" for a in range(D)}
    unknown = sorted(set(blocks) - known)
    if unknown:
        raise ConfigError(f"unknown matrix blocks {unknown}")
    missing = [n for n in ("source1", "source2", *(f"bob.{b}" for b in range(D))) if n not in blocks]
    if missing:
        raise ConfigError(f"strategy file is missing blocks {missing}")
    alice_names = [f"alice.{a}" for a in range(D)]
    try:
        bob = Povm(tuple(blocks[f"bob.{b}"] for b in range(D)))
        kwargs = {}
        if any(n in blocks for n in alice_names):
            if not all(n in blocks for n in alice_names):
                raise ConfigError("alice.0 .. alice.3 must be given together")
            kwargs["alice"] = Povm(tuple(blocks[n] for n in alice_names))
        return Strategy(blocks["source1"], blocks["source2"], bob, **kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"invalid strategy: {exc}") from None


def load_strategy(path: str | Path) -> Strategy:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read strategy file {path}: {exc}") from None
    return parse_strategy(text)


def build_strategy(c: ScenarioConfig, base_dir: Path | None = None) -> Strategy:
    if c.strategy == "ideal":
        return ideal_strategy()
    if c.strategy == "isotropic":
        return isotropic_strategy(c.v)
    if c.strategy == "product":
        return product_strategy()
    path = Path(c.path)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return load_strategy(path)
