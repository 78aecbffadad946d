"""Witness and heuristic guessing probability along the isotropic noise line.

Writes one machine record per visibility; G comes from the adversary search
and is a lower bound on Eve's optimum (only v = 1 is certified).

    python3 scripts/run_sweep.py --points 11 --out sweep.txt
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from swapsteer.randomness import CertifyConfig, EveConfig, certify
from swapsteer.report import render_machine
from swapsteer.scenario import isotropic_strategy
from swapsteer.witness import witness_expectation_form


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=11)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eve-iterations", type=int, default=40)
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    config = CertifyConfig(eve=EveConfig(iterations=args.eve_iterations))
    records = []
    for v in np.linspace(0.0, 1.0, args.points):
        v = float(round(v, 12))
        s = isotropic_strategy(v)
        res = certify(s, config, seed=args.seed)
        records.append(
            {
                "v": v,
                "w": witness_expectation_form(s).value,
                "w_closed_form": (1 + 3 * v * v) / 4,
                "guessing_probability": res.guessing_probability,
                "min_entropy_bits": res.min_entropy_bits,
                "status": res.status.value,
            }
        )
        print(f"v={v:.3f}  W={records[-1]['w']:.6f}  G={res.guessing_probability:.6f}  {res.status.value}", file=sys.stderr)
    text = render_machine(records)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
