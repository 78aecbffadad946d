"""Swap-steering scenario: sources, measurements, correlations.

Two independent sources each distribute a pair (A_i, B_i). Alice (trusted)
holds qubits A1, A2 and measures in the Bell basis; Bob holds B1, B2 (each
possibly carrying extra junk levels) and performs an arbitrary four-outcome
POVM. The global subsystem order is always ``(A1, A2, B1, B2)``; sources
are supplied in ``(A_i, B_i)`` order and reindexed by :func:`arrange_sources`.

Outcome ``a = 0..3`` labels the Bell states phi+, phi-, psi+, psi- in that
order; the same labelling is used for Bob when his measurement is the
reference Bell measurement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import (
    HERMITIAN_TOL,
    SubsystemShape,
    as_matrix,
    check_density,
    dagger,
    is_psd,
    kron,
    partial_trace,
    permute,
    proj,
)

D = 4
OMEGA = np.exp(2j * np.pi / D)
BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")
ORDER = ("A1", "A2", "B1", "B2")
POVM_TOL = 1e-10
PROJECTIVE_TOL = 1e-9
TABLE_TOL = 1e-10


def bell_basis() -> np.ndarray:
    """Rows are |phi+>, |phi->, |psi+>, |psi-> in the computational basis."""
    s = 1 / np.sqrt(2)
    return np.array(
        [
            [s, 0, 0, s],
            [s, 0, 0, -s],
            [0, s, s, 0],
            [0, s, -s, 0],
        ],
        dtype=complex,
    )


def phi_plus() -> np.ndarray:
    return bell_basis()[0]


def _roots(d: int) -> np.ndarray:
    # exact values for d = 4 keep i**k free of rounding noise
    if d == 4:
        return np.array([1, 1j, -1, -1j], dtype=complex)
    return np.exp(2j * np.pi * np.arange(d) / d)


@dataclass(frozen=True)
class Povm:
    elements: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        elements = tuple(as_matrix(e, "POVM element") for e in self.elements)
        if not elements:
            raise ValueError("POVM needs at least one element")
        dim = elements[0].shape[0]
        for k, e in enumerate(elements):
            if e.shape != (dim, dim):
                raise ValueError(f"POVM element {k} has shape {e.shape}, expected {(dim, dim)}")
            if not is_psd(e, POVM_TOL):
                raise ValueError(f"POVM element {k} is not positive semidefinite")
        total = sum(elements)
        if np.max(np.abs(total - np.eye(dim))) > POVM_TOL:
            raise ValueError("POVM elements do not sum to the identity")
        object.__setattr__(self, "elements", elements)

    @classmethod
    def from_basis(cls, vectors) -> "Povm":
        """Rank-one projective measurement onto the rows of ``vectors``."""
        return cls(tuple(proj(v) for v in np.asarray(vectors, dtype=complex)))

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    @property
    def outcomes(self) -> int:
        return len(self.elements)

    @property
    def projective(self) -> bool:
        return all(np.max(np.abs(e @ e - e)) <= PROJECTIVE_TOL for e in self.elements)

    def conjugated(self, u: np.ndarray) -> "Povm":
        """The POVM ``{u E u^dagger}``."""
        return Povm(tuple(u @ e @ dagger(u) for e in self.elements))


def bell_povm() -> Povm:
    return Povm.from_basis(bell_basis())


def observable_from_povm(p: Povm, k: int) -> np.ndarray:
    """Fourier component ``sum_a omega**(a k) P_a`` of a POVM."""
    d = p.outcomes
    if not 0 <= k < d:
        raise IndexError(f"observable index {k} out of range for {d} outcomes")
    w = _roots(d)
    return sum(w[(a * k) % d] * e for a, e in enumerate(p.elements))


@dataclass(frozen=True)
class Observable:
    matrices: tuple[np.ndarray, ...]

    @classmethod
    def from_povm(cls, p: Povm) -> "Observable":
        return cls(tuple(observable_from_povm(p, k) for k in range(p.outcomes)))

    @property
    def d(self) -> int:
        return len(self.matrices)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.matrices[k % self.d]

    def adjoint_defect(self) -> float:
        """max_k |A^(d-k) - (A^(k))^dagger|."""
        return max(
            float(np.max(np.abs(self[self.d - k] - dagger(self[k])))) for k in range(self.d)
        )

    def contraction_excess(self) -> float:
        """How far the largest eigenvalue of A^(k) A^(k)^dagger exceeds 1 (0 if not)."""
        worst = max(float(np.linalg.eigvalsh(a @ dagger(a)).max()) for a in self.matrices)
        return max(worst - 1.0, 0.0)

    def power_defect(self) -> float:
        """max_k |A^(k) - (A^(1))^k|; zero for projective measurements."""
        base = self.matrices[1]
        return max(
            float(np.max(np.abs(self[k] - np.linalg.matrix_power(base, k))))
            for k in range(self.d)
        )


def trusted_observable() -> Observable:
    """Alice's Bell-basis observable family; ``[1]`` is A0 = sum_k i^k |phi_k><phi_k|."""
    return Observable.from_povm(bell_povm())


def trusted_a0() -> np.ndarray:
    return trusted_observable()[1]


@dataclass(frozen=True)
class CorrelationTable:
    probabilities: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (D, D):
            raise ValueError(f"correlation table must be {D}x{D}, got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValueError("correlation table has non-finite entries")
        if p.min() < -TABLE_TOL or p.max() > 1 + TABLE_TOL:
            raise ValueError("correlation table entries outside [0, 1]")
        if abs(p.sum() - 1.0) > TABLE_TOL:
            raise ValueError(f"correlation table sums to {p.sum()!r}, expected 1")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probabilities", p)

    def __getitem__(self, ab) -> float:
        return float(self.probabilities[ab])

    @property
    def alice_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=1)

    @property
    def bob_marginal(self) -> np.ndarray:
        return self.probabilities.sum(axis=0)

    def max_deviation(self, other: "CorrelationTable") -> float:
        return float(np.max(np.abs(self.probabilities - other.probabilities)))


def uniform_table() -> CorrelationTable:
    return CorrelationTable(np.full((D, D), 1 / D**2))


def ideal_table() -> CorrelationTable:
    return CorrelationTable(np.eye(D) / D)


def _fourier_matrix(d: int = D) -> np.ndarray:
    w = _roots(d)
    return np.array([[w[(a * k) % d] for a in range(d)] for k in range(d)])


def expectation_values(t: CorrelationTable) -> np.ndarray:
    """``E[k, l] = sum_{a,b} omega**(a k + b l) p(a, b)``."""
    f = _fourier_matrix()
    return f @ t.probabilities @ f.T


def probabilities_from_expectations(e, tol: float = TABLE_TOL) -> CorrelationTable:
    """Inverse transform ``p(a, b) = d**-2 sum_{k,l} omega**-(a k + b l) E[k, l]``."""
    e = np.asarray(e, dtype=complex)
    if e.shape != (D, D):
        raise ValueError(f"expectation table must be {D}x{D}, got {e.shape}")
    f = np.conj(_fourier_matrix())
    p = f @ e @ f.T / D**2
    if np.max(np.abs(p.imag)) > tol:
        raise ValueError("expectation table is not the image of a real distribution")
    if p.real.min() < -tol:
        raise ValueError("expectation table reconstructs to negative probabilities")
    return CorrelationTable(p.real)


def isotropic_source(v: float) -> np.ndarray:
    """``v |phi+><phi+| + (1 - v) I/4`` on one (A_i, B_i) pair."""
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"visibility v must lie in [0, 1], got {v!r}")
    return v * proj(phi_plus()) + (1 - v) * np.eye(4) / 4


def pure_source(psi) -> np.ndarray:
    return proj(psi)


def arrange_sources(source1: np.ndarray, source2: np.ndarray) -> np.ndarray:
    """``source1 (x) source2`` reordered from (A1, B1, A2, B2) to (A1, A2, B1, B2)."""
    m1, m2 = source1.shape[0] // 2, source2.shape[0] // 2
    shape = SubsystemShape((2, m1, 2, m2), ("A1", "B1", "A2", "B2"))
    return permute(kron(source1, source2), shape, ORDER)


@dataclass(frozen=True)
class Strategy:
    """Two source states, Bob's POVM on B1 B2, and Alice's (normally Bell) POVM."""

    source1: np.ndarray
    source2: np.ndarray
    bob: Povm
    alice: Povm = field(default_factory=bell_povm)

    def __post_init__(self) -> None:
        for name in ("source1", "source2"):
            rho = check_density(getattr(self, name), HERMITIAN_TOL, name)
            if rho.shape[0] % 2:
                raise ValueError(f"{name} must carry a qubit on Alice's side")
            object.__setattr__(self, name, rho)
        if self.alice.dim != 4 or self.alice.outcomes != D:
            raise ValueError("Alice's measurement must be a 4-outcome POVM on two qubits")
        if self.bob.outcomes != D:
            raise ValueError("Bob's measurement must have 4 outcomes")
        m1, m2 = self.bob_dims
        if self.bob.dim != m1 * m2:
            raise ValueError(
                f"Bob's POVM acts on dimension {self.bob.dim}, sources give {m1}*{m2}"
            )

    @property
    def bob_dims(self) -> tuple[int, int]:
        return self.source1.shape[0] // 2, self.source2.shape[0] // 2

    @property
    def shape(self) -> SubsystemShape:
        m1, m2 = self.bob_dims
        return SubsystemShape((2, 2, m1, m2), ORDER)

    @cached_property
    def state(self) -> np.ndarray:
        """The joint state in (A1, A2, B1, B2) order."""
        return arrange_sources(self.source1, self.source2)

    @cached_property
    def bob_state(self) -> np.ndarray:
        return partial_trace(self.state, self.shape, ("B1", "B2"))


def joint_table(rho: np.ndarray, alice: Povm, bob: Povm) -> CorrelationTable:
    """``p(a, b) = Tr[(M_a (x) N_b) rho]`` for rho on (Alice's 4 dims) (x) (Bob)."""
    dim_b = bob.dim
    if rho.shape != (alice.dim * dim_b, alice.dim * dim_b):
        raise ValueError(f"state of shape {rho.shape} does not match POVMs {alice.dim}x{dim_b}")
    rho = rho.reshape(alice.dim, dim_b, alice.dim, dim_b)
    p = np.empty((alice.outcomes, bob.outcomes))
    for a, m in enumerate(alice.elements):
        # X_a = Tr_A[(M_a (x) 1) rho]
        x = np.einsum("ij,jbic->bc", m, rho)
        for b, n in enumerate(bob.elements):
            p[a, b] = np.einsum("cb,bc->", n, x).real
    return CorrelationTable(p)


def correlations(s: Strategy) -> CorrelationTable:
    """``p(a, b) = Tr[(M_a (x) N_b) rho]`` on the arranged state."""
    return joint_table(s.state, s.alice, s.bob)


def ideal_strategy() -> Strategy:
    rho = pure_source(phi_plus())
    return Strategy(rho, rho, bell_povm())


def isotropic_strategy(v: float) -> Strategy:
    rho = isotropic_source(v)
    return Strategy(rho, rho, bell_povm())


def product_strategy() -> Strategy:
    """Both sources |00><00|, Bob measures in the Bell basis."""
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = 1.0
    return Strategy(rho, rho, bell_povm())


def partially_entangled_strategy(theta: float) -> Strategy:
    """Both sources ``cos(theta)|00> + sin(theta)|11>``, Bob measures in the Bell basis."""
    psi = np.array([np.cos(theta), 0, 0, np.sin(theta)], dtype=complex)
    rho = pure_source(psi)
    return Strategy(rho, rho, bell_povm())


def with_bob_unitaries(s: Strategy, v1: np.ndarray, v2: np.ndarray) -> Strategy:
    """Apply Bob-local unitaries v1 on B1 and v2 on B2, to the sources and to his POVM."""
    w1 = kron(np.eye(2), v1)
    w2 = kron(np.eye(2), v2)
    return Strategy(
        w1 @ s.source1 @ dagger(w1),
        w2 @ s.source2 @ dagger(w2),
        s.bob.conjugated(kron(v1, v2)),
        s.alice,
    )
