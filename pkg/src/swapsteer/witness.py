"""Swap-steering witness W and the local-hidden-state bound.

``W = p(0,0) + p(1,1) + p(2,2) + p(3,3)``, equivalently
``W = 1/4 sum_k <A0^k (x) B0^(4-k)>``. Its quantum and algebraic maximum is 1,
reached only when every term equals 1, i.e. when
``(A0^k (x) B0^(4-k)) rho = rho`` for all k.

The LHS bound is estimated for the model in which two independent classical
sources hand Alice qubit states (sigma for A1, tau for A2) drawn from hidden
variables, and Bob outputs a deterministic function of those variables. The
objective is linear in each hidden-variable distribution, so the maximum is
reached at a single product state and a single best-response outcome:

    beta = max_{sigma, tau, b} <phi_b| sigma (x) tau |phi_b>.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .scenario import (
    BELL_LABELS,
    D,
    CorrelationTable,
    Strategy,
    bell_basis,
    correlations,
    observable_from_povm,
    trusted_a0,
)


def witness_value(t: CorrelationTable) -> float:
    return float(np.trace(t.probabilities))


@dataclass(frozen=True)
class WitnessResult:
    value: float
    terms: tuple[complex, ...]
    residuals: tuple[float, ...]


def _term_operators(s: Strategy) -> list[np.ndarray]:
    a0 = trusted_a0()
    ops = []
    for k in range(D):
        bk = observable_from_povm(s.bob, (D - k) % D)
        ops.append(np.kron(np.linalg.matrix_power(a0, k), bk))
    return ops


def witness_expectation_form(s: Strategy) -> WitnessResult:
    rho = s.state
    terms = []
    residuals = []
    for op in _term_operators(s):
        terms.append(complex(np.trace(op @ rho)))
        residuals.append(float(np.linalg.norm(op @ rho - rho)))
    value = float(sum(t.real for t in terms) / D)
    return WitnessResult(value, tuple(terms), tuple(residuals))


def max_violation_residuals(s: Strategy) -> tuple[float, ...]:
    """Frobenius norms ``|(A0^k (x) B0^(4-k)) rho - rho|`` for k = 0..3."""
    rho = s.state
    return tuple(float(np.linalg.norm(op @ rho - rho)) for op in _term_operators(s))


def witness(s: Strategy) -> float:
    return witness_value(correlations(s))


# --- LHS bound ------------------------------------------------------------


def bloch_ket(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def product_overlaps(angles) -> np.ndarray:
    """``|<phi_b| alpha (x) beta>|**2`` for all four b, angles = (t1, p1, t2, p2)."""
    t1, p1, t2, p2 = angles
    v = np.kron(bloch_ket(t1, p1), bloch_ket(t2, p2))
    return np.abs(bell_basis().conj() @ v) ** 2


def lhs_mixture_value(states1, weights1, states2, weights2) -> float:
    """Unreduced LHS objective for finite hidden-variable ensembles.

    ``sum_{l1,l2} q1[l1] q2[l2] max_b <phi_b| sigma_l1 (x) tau_l2 |phi_b>`` with
    sigma, tau given as qubit density matrices; Bob's response is the best
    deterministic one per hidden-variable pair.
    """
    bell = bell_basis()
    total = 0.0
    for q1, sigma in zip(weights1, states1):
        for q2, tau in zip(weights2, states2):
            rho = np.kron(sigma, tau)
            best = max(float(np.real(b.conj() @ rho @ b)) for b in bell)
            total += q1 * q2 * best
    return float(total)


@dataclass(frozen=True)
class LhsConfig:
    restarts: int = 32
    iterations: int = 400
    initial_step: float = 0.5
    min_step: float = 1e-13
    fd_step: float = 1e-6

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (self.initial_step > 0 and self.min_step > 0 and self.fd_step > 0):
            raise ValueError("step sizes must be positive")


@dataclass(frozen=True)
class LhsBoundEstimate:
    beta: float
    argmax: dict
    trace: tuple[tuple[int, float], ...] = field(repr=False)


def _ascend(x: np.ndarray, config: LhsConfig) -> tuple[np.ndarray, list[float]]:
    """Monotone ascent on max_b overlap: a step is taken only if it improves."""
    value = float(product_overlaps(x).max())
    history = [value]
    step = config.initial_step
    h = config.fd_step
    eye = np.eye(4)
    for _ in range(config.iterations):
        b = int(np.argmax(product_overlaps(x)))
        grad = np.array(
            [
                (product_overlaps(x + h * e)[b] - product_overlaps(x - h * e)[b]) / (2 * h)
                for e in eye
            ]
        )
        if np.linalg.norm(grad) < 1e-14:
            break
        while step >= config.min_step:
            trial = x + step * grad
            trial_value = float(product_overlaps(trial).max())
            if trial_value > value:
                x, value = trial, trial_value
                step *= 1.5
                break
            step *= 0.5
        else:
            break
        history.append(value)
    return x, history


def lhs_bound(config: LhsConfig | None = None, seed: int = 0) -> LhsBoundEstimate:
    config = config or LhsConfig()
    seeds = np.random.SeedSequence(seed).spawn(config.restarts)

    def one(ss: np.random.SeedSequence):
        rng = np.random.default_rng(ss)
        x0 = rng.uniform([0, 0, 0, 0], [np.pi, 2 * np.pi, np.pi, 2 * np.pi])
        return _ascend(x0, config)

    runs = parallel_map(one, seeds)
    trace = tuple((r, v) for r, (_, hist) in enumerate(runs) for v in hist)
    best = max(range(len(runs)), key=lambda r: runs[r][1][-1])
    x, hist = runs[best]
    overlaps = product_overlaps(x)
    b = int(np.argmax(overlaps))
    argmax = {
        "restart": best,
        "alice_a1_bloch": (float(x[0]), float(x[1])),
        "alice_a2_bloch": (float(x[2]), float(x[3])),
        "bob_outcome": b,
        "bob_outcome_label": BELL_LABELS[b],
    }
    return LhsBoundEstimate(beta=float(hist[-1]), argmax=argmax, trace=trace)
