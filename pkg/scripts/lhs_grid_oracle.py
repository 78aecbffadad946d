"""Brute-force the LHS value on a Bloch-angle grid and compare with the optimiser.

The printed grid maximum is the constant frozen in tests/oracles.py.

    python3 scripts/lhs_grid_oracle.py --step 0.01
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))

from oracles import lhs_grid_max  # noqa: E402

from swapsteer.witness import LhsConfig, lhs_bound  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--restarts", type=int, default=32)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    t0 = time.perf_counter()
    beta_grid, (t1, t2, phi) = lhs_grid_max(args.step)
    t_grid = time.perf_counter() - t0
    t0 = time.perf_counter()
    est = lhs_bound(LhsConfig(restarts=args.restarts), seed=args.seed)
    t_opt = time.perf_counter() - t0
    print(f"grid step {args.step}: beta = {beta_grid!r} at theta1={t1:.4f} theta2={t2:.4f} phase={phi:.4f} ({t_grid:.1f} s)")
    print(f"optimiser, {args.restarts} restarts: beta = {est.beta!r} ({t_opt:.2f} s)")
    print(f"difference: {abs(beta_grid - est.beta):.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
