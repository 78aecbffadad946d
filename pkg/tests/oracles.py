"""Independent reference computations used by the tests.

Nothing here imports the package's linear algebra: states are assembled
entry by entry and Bell vectors are written out by hand, so agreement with
the library is evidence rather than a tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

S = 1 / math.sqrt(2)

# phi+, phi-, psi+, psi- over |00>, |01>, |10>, |11>
BELL = np.array(
    [
        [S, 0, 0, S],
        [S, 0, 0, -S],
        [0, S, S, 0],
        [0, S, -S, 0],
    ],
    dtype=complex,
)


def global_state(source1: np.ndarray, source2: np.ndarray) -> np.ndarray:
    """rho on (A1, A2, B1, B2) from sources on (A1, B1) and (A2, B2), index loops only."""
    m1 = source1.shape[0] // 2
    m2 = source2.shape[0] // 2
    n = 4 * m1 * m2
    rho = np.zeros((n, n), dtype=complex)
    idx = lambda a1, a2, b1, b2: ((a1 * 2 + a2) * m1 + b1) * m2 + b2  # noqa: E731
    rng1 = list(itertools.product(range(2), range(m1)))
    rng2 = list(itertools.product(range(2), range(m2)))
    for (a1, b1), (c1, d1) in itertools.product(rng1, rng1):
        x = source1[a1 * m1 + b1, c1 * m1 + d1]
        if x == 0:
            continue
        for (a2, b2), (c2, d2) in itertools.product(rng2, rng2):
            y = source2[a2 * m2 + b2, c2 * m2 + d2]
            if y != 0:
                rho[idx(a1, a2, b1, b2), idx(c1, c2, d1, d2)] += x * y
    return rho


def direct_table(source1: np.ndarray, source2: np.ndarray, bob_elements) -> np.ndarray:
    """p(a, b) = sum_ij <i|Pi_a (x) N_b|j> rho_ji with Alice's Bell projectors written out."""
    rho = global_state(source1, source2)
    mb = bob_elements[0].shape[0]
    table = np.zeros((4, 4))
    for a in range(4):
        pa = np.outer(BELL[a], BELL[a].conj())
        for b in range(4):
            nb = bob_elements[b]
            total = 0j
            for i, j in itertools.product(range(4), range(4)):
                if pa[i, j] == 0:
                    continue
                for k, l in itertools.product(range(mb), range(mb)):
                    total += pa[i, j] * nb[k, l] * rho[j * mb + l, i * mb + k]
            table[a, b] = total.real
    return table


def direct_witness(source1: np.ndarray, source2: np.ndarray, bob_elements) -> float:
    t = direct_table(source1, source2, bob_elements)
    return float(sum(t[a, a] for a in range(4)))


def isotropic(v: float) -> np.ndarray:
    phi = BELL[0]
    return v * np.outer(phi, phi.conj()) + (1 - v) * np.eye(4) / 4


def bell_elements():
    return [np.outer(BELL[b], BELL[b].conj()) for b in range(4)]


def lhs_grid_max(step: float = 0.01) -> tuple[float, tuple[float, float, float]]:
    """Brute-force max_b |<phi_b|alpha (x) beta>|^2 over a Bloch-angle grid.

    Polar angles run over [0, pi] and one relative phase over [0, 2 pi]; the
    second phase is set to zero because every Bell overlap depends on the
    phases only through their sum or their difference, and a single free
    phase reaches any value of either.
    """
    nt = int(math.ceil(math.pi / step))
    nphi = int(math.ceil(2 * math.pi / step))
    thetas = np.linspace(0.0, math.pi, nt + 1)
    phis = np.linspace(0.0, 2 * math.pi, nphi + 1)
    c2, s2 = np.cos(thetas / 2), np.sin(thetas / 2)
    e = np.exp(1j * phis)
    best, arg = -1.0, (0.0, 0.0, 0.0)
    for t1 in thetas:
        c1, s1 = math.cos(t1 / 2), math.sin(t1 / 2)
        # amplitudes of alpha (x) beta on |00>,|01>,|10>,|11>; axes (theta2, phi)
        amp00 = c1 * c2[:, None] * np.ones_like(e)[None, :]
        amp01 = c1 * s2[:, None] * np.ones_like(e)[None, :]
        amp10 = s1 * c2[:, None] * e[None, :]
        amp11 = s1 * s2[:, None] * e[None, :]
        overlaps = np.stack(
            [
                np.abs(amp00 + amp11) ** 2 / 2,
                np.abs(amp00 - amp11) ** 2 / 2,
                np.abs(amp01 + amp10) ** 2 / 2,
                np.abs(amp01 - amp10) ** 2 / 2,
            ]
        ).max(axis=0)
        k = int(np.argmax(overlaps))
        if overlaps.flat[k] > best:
            i, j = np.unravel_index(k, overlaps.shape)
            best, arg = float(overlaps.flat[k]), (float(t1), float(thetas[i]), float(phis[j]))
    return best, arg


# Frozen output of lhs_grid_max(0.01); regenerate with scripts/lhs_grid_oracle.py.
LHS_GRID_BETA = 0.5
