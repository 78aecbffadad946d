"""Run reports and their two renderings.

The machine format is UTF-8 ``key=value`` lines, keys sorted within a
record, records separated by a blank line. Floats are written with
``repr`` so that parsing them back gives the same bits; complex values are
split into ``.re`` and ``.im`` keys. Wall-clock timing appears only in the
human table, which keeps machine output byte-identical across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ScenarioConfig, config_items, parse_config
from .randomness import AttackDemo, CertificationResult
from .selftest import ExtractionReport
from .witness import LhsBoundEstimate, WitnessResult


@dataclass(frozen=True)
class SweepPoint:
    v: float
    witness: WitnessResult


@dataclass(frozen=True)
class RunReport:
    command: str
    config: ScenarioConfig
    witness: WitnessResult | None = None
    extraction: ExtractionReport | None = None
    certification: CertificationResult | None = None
    lhs: LhsBoundEstimate | None = None
    attack: AttackDemo | None = None
    sweep: tuple[SweepPoint, ...] = ()
    table: tuple[tuple[float, ...], ...] | None = None
    timing: dict = field(default_factory=dict, compare=False)
    version: str = __version__

    def records(self) -> list[dict]:
        """Ordered list of flat records; one per sweep point, otherwise one."""
        head = {"command": self.command, "version": self.version}
        head.update({f"config.{k}": v for k, v in config_items(self.config)})
        if self.command == "sweep":
            return [{**head, "point": i, "v": p.v, **_witness_fields(p.witness)} for i, p in enumerate(self.sweep)]
        rec = dict(head)
        if self.witness is not None:
            rec.update(_witness_fields(self.witness))
        if self.table is not None:
            rec.update({f"p.{a}.{b}": x for a, row in enumerate(self.table) for b, x in enumerate(row)})
        if self.extraction is not None:
            rec.update(_extraction_fields(self.extraction))
        if self.certification is not None:
            rec.update(_certification_fields(self.certification))
        if self.lhs is not None:
            rec.update(_lhs_fields(self.lhs))
        if self.attack is not None:
            rec["attack.guessing_probability"] = self.attack.guessing_probability
            rec["attack.w"] = self.attack.witness
        return [rec]

    def check_finite(self) -> None:
        for rec in self.records():
            for k, v in rec.items():
                if isinstance(v, float) and not math.isfinite(v):
                    raise ValueError(f"non-finite report field {k} = {v}")


def _witness_fields(w: WitnessResult) -> dict:
    out = {"w": w.value}
    for k, t in enumerate(w.terms):
        out[f"term.{k}"] = complex(t)
    for k, r in enumerate(w.residuals):
        out[f"residual.{k}"] = r
    return out


def _extraction_fields(x: ExtractionReport) -> dict:
    s = x.support
    return {
        "selftest.certifies": x.certifies(),
        "selftest.projective": x.projective,
        "selftest.projective_defect": x.projective_defect,
        "selftest.state_fidelity": x.state_fidelity,
        "selftest.measurement_defect": x.measurement_defect,
        "selftest.support_defect": s.defect,
        "selftest.g_defect": s.g_defect,
        "selftest.g_relation_defect": s.g_relation_defect,
        "selftest.block_dims": "|".join(",".join(map(str, b)) for b in s.block_dims),
        "selftest.junk_dims": ",".join(map(str, s.junk_dims)),
        "selftest.projected_residual": x.projected_residual,
        "selftest.transpose_identity_defect": x.transpose_identity_defect,
    }


def _certification_fields(c: CertificationResult) -> dict:
    out = {
        "certify.status": c.status.value,
        "certify.guessing_probability": c.guessing_probability,
        "certify.min_entropy_bits": c.min_entropy_bits,
        "certify.w": c.witness,
    }
    out.update({f"certify.caveat.{i}": text for i, text in enumerate(c.caveats)})
    return out


def _lhs_fields(e: LhsBoundEstimate) -> dict:
    a = e.argmax
    return {
        "lhs.beta": e.beta,
        "lhs.restart": a["restart"],
        "lhs.a1.theta": a["alice_a1_bloch"][0],
        "lhs.a1.phi": a["alice_a1_bloch"][1],
        "lhs.a2.theta": a["alice_a2_bloch"][0],
        "lhs.a2.phi": a["alice_a2_bloch"][1],
        "lhs.bob_outcome": a["bob_outcome"],
        "lhs.bob_outcome_label": a["bob_outcome_label"],
        "lhs.trace_length": len(e.trace),
    }


# --- machine format --------------------------------------------------------


def _machine_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    text = str(v)
    if "\n" in text:
        raise ValueError("record values must be single-line")
    return text


def _flatten(rec: dict) -> dict[str, str]:
    out = {}
    for k, v in rec.items():
        if isinstance(v, np.generic):
            v = v.item()
        if isinstance(v, complex):
            out[f"{k}.re"] = repr(float(v.real))
            out[f"{k}.im"] = repr(float(v.imag))
        else:
            out[k] = _machine_value(v)
    return out


def render_machine(records: list[dict]) -> str:
    blocks = []
    for rec in records:
        flat = _flatten(rec)
        blocks.append("\n".join(f"{k}={flat[k]}" for k in sorted(flat)))
    return "\n\n".join(blocks) + "\n"


def _parse_scalar(text: str):
    if text in ("true", "false"):
        return text == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_machine(text: str) -> list[dict]:
    """Parse machine records back into dicts of int/float/bool/str values."""
    records = []
    for block in text.strip("\n").split("\n\n"):
        if not block.strip():
            continue
        rec = {}
        for line in block.splitlines():
            key, _, value = line.partition("=")
            rec[key] = _parse_scalar(value)
        records.append(rec)
    return records


def config_from_record(rec: dict) -> ScenarioConfig:
    """Rebuild the echoed config from a parsed machine record."""
    lines = []
    for k, v in rec.items():
        if k.startswith("config."):
            lines.append(f"{k[len('config.'):]}={v!r}" if isinstance(v, float) else f"{k[len('config.'):]}={v}")
    return parse_config("\n".join(lines))


# --- human format ----------------------------------------------------------

_LABELS = {"w": "W"}


def _human_value(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, complex):
        return f"{v.real:#.12g} {'+' if v.imag >= 0 else '-'} {abs(v.imag):#.12g}i"
    if isinstance(v, float):
        return f"{v:#.12g}"
    return str(v)


def render_human(r: RunReport) -> str:
    """Aligned table, labels right-justified so rows read ``W = 1.00000000000``."""
    lines = [f"swapsteer {r.version}  command: {r.command}"]
    lines.append("config: " + " ".join(f"{k}={v}" for k, v in config_items(r.config)))
    for rec in r.records():
        rows = [
            (_LABELS.get(k, k), _human_value(v))
            for k, v in rec.items()
            if not k.startswith("config.") and k not in ("command", "version")
        ]
        width = max(len(label) for label, _ in rows) if rows else 0
        lines.append("")
        lines.extend(f"{label:>{width}} = {value}" for label, value in rows)
    if r.timing:
        lines.append("")
        width = max(len(k) for k in r.timing) + len("time.")
        lines.extend(f"{'time.' + k:>{width}} = {t:.3f} s" for k, t in r.timing.items())
    return "\n".join(lines) + "\n"


def render_report(r: RunReport, fmt: str = "human") -> str:
    r.check_finite()
    if fmt in ("machine", "machine-record"):
        return render_machine(r.records())
    if fmt in ("human", "human-table"):
        return render_human(r)
    raise ValueError(f"unknown format {fmt!r}")
