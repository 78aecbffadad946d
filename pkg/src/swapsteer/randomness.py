"""Randomness of Bob's outcome against an eavesdropper holding a purification.

Eve's guessing probability is
``G = sup sum_b <psi| 1_A (x) N_b (x) E_b |psi>`` over joint states and
measurements that reproduce the observed table. At exact maximal violation
the self-test fixes Bob's side to two maximally entangled pairs measured in
the Bell basis, so ``G = 1/4`` and ``H_min = -log2 G = 2`` bits. This relies
on the sources being at most classically correlated; with entangled sources
Eve guesses perfectly (:func:`entangled_source_attack`).

Away from maximal violation :func:`optimize_eve` searches for a good attack
in which a classical register ``lambda`` (copied to Eve and into Bob's
device) selects pure product sources and a projective measurement for Bob.
Its value is a lower bound on the supremum, never a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog

from ._parallel import parallel_map
from .errors import ConsistencyError, InfeasibleTargetError
from .linalg import (
    SubsystemShape,
    basis_ket,
    check_density,
    dagger,
    eig_hermitian,
    fix_phase,
    permute,
    permute_vector,
    random_state_vector,
    random_unitary,
    reduced_state,
    unit_vector,
)
from .scenario import (
    D,
    ORDER,
    CorrelationTable,
    Povm,
    Strategy,
    bell_basis,
    bell_povm,
    correlations,
    joint_table,
)
from .witness import witness_expectation_form, witness_value

CONSISTENCY_TOL = 1e-8
_SOURCE_ORDER = SubsystemShape((2, 2, 2, 2), ("A1", "B1", "A2", "B2"))
PREMISE_TOL = 1e-7
ABE = ("A1", "A2", "B", "E")


@dataclass(frozen=True)
class EveStrategy:
    """Pure state on (A1, A2, B, E), Bob's POVM on B and Eve's 4-outcome POVM on E."""

    state: np.ndarray
    shape: SubsystemShape
    bob: Povm
    eve: Povm

    def __post_init__(self) -> None:
        state = unit_vector(self.state, 1e-9)
        if self.shape.labels != ABE or self.shape.dims[:2] != (2, 2):
            raise ValueError(f"shape must be (A1:2, A2:2, B, E), got {self.shape}")
        if state.size != self.shape.total:
            raise ValueError(f"state has {state.size} amplitudes, shape needs {self.shape.total}")
        if self.bob.dim != self.shape.dim("B") or self.bob.outcomes != D:
            raise ValueError("Bob's POVM does not match the B factor")
        if self.eve.dim != self.shape.dim("E") or self.eve.outcomes != D:
            raise ValueError("Eve's POVM must have 4 outcomes on the E factor")
        object.__setattr__(self, "state", state)

    @property
    def eve_dim(self) -> int:
        return self.shape.dim("E")

    def ab_state(self) -> np.ndarray:
        return reduced_state(self.state, self.shape, ("A1", "A2", "B"))

    def table(self) -> CorrelationTable:
        return joint_table(self.ab_state(), bell_povm(), self.bob)


def purify(rho: np.ndarray, cutoff: float = 1e-12) -> np.ndarray:
    """``sum_k sqrt(lam_k) |v_k>|k>`` with a purifier of dimension rank(rho)."""
    rho = check_density(rho)
    vals, vecs = eig_hermitian(rho)
    keep = np.flatnonzero(vals > cutoff)
    rank = keep.size
    psi = np.zeros((rho.shape[0], rank), dtype=complex)
    for k, idx in enumerate(keep):
        psi[:, k] = np.sqrt(vals[idx]) * vecs[:, idx]
    psi = psi.reshape(-1)
    return psi / np.linalg.norm(psi)


def guess_outcome_povm(dim: int, outcome: int = 0) -> Povm:
    """Eve ignores her system and always announces ``outcome``."""
    zero = np.zeros((dim, dim))
    return Povm(tuple(np.eye(dim) if e == outcome else zero for e in range(D)))


def eve_from_strategy(s: Strategy, eve: Povm | None = None) -> EveStrategy:
    """Purify the strategy's state; Eve holds the purifying system."""
    psi = purify(s.state)
    rank = psi.size // s.state.shape[0]
    shape = SubsystemShape((2, 2, s.bob.dim, rank), ABE)
    eve = eve if eve is not None else guess_outcome_povm(rank)
    return EveStrategy(psi, shape, s.bob, eve)


def eve_consistency_check(e: EveStrategy, target: CorrelationTable, tol: float = CONSISTENCY_TOL) -> bool:
    return e.table().max_deviation(target) <= tol


def _raw_guess(e: EveStrategy) -> float:
    rho_be = reduced_state(e.state, e.shape, ("B", "E"))
    g = sum(
        np.trace(np.kron(n, m) @ rho_be) for n, m in zip(e.bob.elements, e.eve.elements)
    )
    return float(np.real(g))


def guessing_probability(
    target: CorrelationTable | Strategy, e: EveStrategy, tol: float = CONSISTENCY_TOL
) -> float:
    """``sum_b <psi| 1_A (x) N_b (x) E_b |psi>``, after checking invisibility."""
    if isinstance(target, Strategy):
        target = correlations(target)
    if not eve_consistency_check(e, target, tol):
        raise ConsistencyError(
            f"Eve's strategy deviates from the observed table by {e.table().max_deviation(target):.3e}"
        )
    return _raw_guess(e)


def min_entropy(g: float) -> float:
    if not 0.0 < g <= 1.0:
        raise ValueError(f"guessing probability must lie in (0, 1], got {g!r}")
    return -math.log2(g)


def optimal_eve_povm(state: np.ndarray, shape: SubsystemShape, bob: Povm) -> Povm:
    """Best Eve measurement for a fixed state, exact when her conditional states commute.

    Eve's unnormalised conditional states sigma_b = Tr_AB[(N_b (x) 1) psi] are
    jointly diagonalised through a generic linear combination; each common
    eigenvector is assigned to the b with the largest weight.
    """
    rho_be = reduced_state(state, shape, ("B", "E"))
    dim_b, dim_e = shape.dim("B"), shape.dim("E")
    t = rho_be.reshape(dim_b, dim_e, dim_b, dim_e)
    sigmas = [np.einsum("ji,iejf->ef", n, t) for n in bob.elements]
    # fixed irrational weights: a deterministic, generic combination
    mix = sum(c * s for c, s in zip((1.0, math.pi, math.e, math.sqrt(2)), sigmas))
    _, vecs = eig_hermitian((mix + dagger(mix)) / 2)
    elements = [np.zeros((dim_e, dim_e), dtype=complex) for _ in range(D)]
    for k in range(dim_e):
        v = vecs[:, k]
        scores = [float(np.real(np.vdot(v, s @ v))) for s in sigmas]
        elements[int(np.argmax(scores))] += np.outer(v, v.conj())
    return Povm(tuple(elements))


# --- adversary search -----------------------------------------------------


class SourceMode(str, Enum):
    INDEPENDENT_CLASSICAL = "independent-classical"


@dataclass(frozen=True)
class EveConfig:
    eve_dim: int = 16
    restarts: int = 2
    iterations: int = 40
    pricing_starts: int = 3
    pricing_sweeps: int = 60
    random_columns: int = 8
    consistency_tol: float = CONSISTENCY_TOL
    mode: SourceMode = SourceMode.INDEPENDENT_CLASSICAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SourceMode(self.mode))
        for name in ("eve_dim", "restarts", "iterations", "pricing_starts", "pricing_sweeps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.random_columns < 0:
            raise ValueError("random_columns must be >= 0")
        if not self.consistency_tol > 0:
            raise ValueError("consistency_tol must be positive")


@dataclass
class _Component:
    """One value of Eve's classical register: pure product sources and Bob's basis."""

    psi1: np.ndarray  # on (A1, B1), qubits
    psi2: np.ndarray  # on (A2, B2)
    basis: np.ndarray  # columns u_b, Bob measures |u_b><u_b| on B1 B2
    guess: int = 0

    def vector(self) -> np.ndarray:
        """Joint vector in (A1, A2, B1, B2) order."""
        return permute_vector(np.kron(self.psi1, self.psi2), _SOURCE_ORDER, ORDER)

    def table(self) -> np.ndarray:
        psi = self.vector().reshape(4, 4)
        amp = bell_basis().conj() @ psi @ self.basis.conj()
        return np.abs(amp) ** 2

    def set_best_guess(self) -> None:
        self.guess = int(np.argmax(self.table().sum(axis=0)))

    def gain(self) -> float:
        return float(self.table().sum(axis=0)[self.guess])


def _objective(comp: _Component, prices: np.ndarray, kappa: float) -> float:
    t = comp.table()
    return float(np.sum(prices * t) + kappa * t.sum(axis=0)[comp.guess])




def _cost_operator(prices: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """sum_ab C[a,b] |phi_a><phi_a| (x) |u_b><u_b| in (A1, B1, A2, B2) order."""
    bell = bell_basis()
    op = np.zeros((16, 16), dtype=complex)
    for a in range(D):
        pa = np.outer(bell[a], bell[a].conj())
        for b in range(D):
            if prices[a, b]:
                ub = basis[:, b]
                op += prices[a, b] * np.kron(pa, np.outer(ub, ub.conj()))
    return permute(op, _SOURCE_ORDER.select(ORDER), _SOURCE_ORDER.labels)


def _top_eigvec(h: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((h + dagger(h)) / 2)
    return fix_phase(vecs[:, -1])


def _price(comp: _Component, prices: np.ndarray, kappa: float, sweeps: int) -> tuple[_Component, float]:
    """See-saw on one component: sources by top eigenvector, Bob's basis by a polar step, guess by argmax."""
    comp = _Component(comp.psi1.copy(), comp.psi2.copy(), comp.basis.copy(), comp.guess)
    bell = bell_basis()
    value = _objective(comp, prices, kappa)
    for _ in range(sweeps):
        old = value
        c = prices.copy()
        c[:, comp.guess] += kappa
        op = _cost_operator(c, comp.basis).reshape(4, 4, 4, 4)
        k1 = np.einsum("j,ijkl,l->ik", comp.psi2.conj(), op, comp.psi2)
        comp.psi1 = _top_eigvec(k1)
        k2 = np.einsum("i,ijkl,k->jl", comp.psi1.conj(), op, comp.psi1)
        comp.psi2 = _top_eigvec(k2)

        psi = comp.vector().reshape(4, 4)
        # R_a = Tr_A[(|phi_a><phi_a| (x) 1) psi psi^dag] on Bob, p(a,b) = <u_b|R_a|u_b>
        amps = bell.conj() @ psi
        r = [np.outer(amps[a], amps[a].conj()) for a in range(D)]
        xs = [sum(c[a, b] * r[a] for a in range(D)) for b in range(D)]
        shift = max(0.0, -min(float(np.linalg.eigvalsh((x + dagger(x)) / 2).min()) for x in xs))
        for _ in range(5):
            g = np.column_stack(
                [(xs[b] + shift * np.eye(4)) @ comp.basis[:, b] for b in range(D)]
            )
            w, _, vh = np.linalg.svd(g)
            trial = w @ vh
            before = float(sum(np.real(np.vdot(comp.basis[:, b], xs[b] @ comp.basis[:, b])) for b in range(D)))
            after = float(sum(np.real(np.vdot(trial[:, b], xs[b] @ trial[:, b])) for b in range(D)))
            if after <= before + 1e-15:
                break
            comp.basis = trial
        if kappa:
            comp.set_best_guess()
        value = _objective(comp, prices, kappa)
        if value - old <= 1e-13:
            break
    return comp, value


def _seed_pool(rng: np.random.Generator, extra: int) -> list[_Component]:
    bell = bell_basis()
    pool = []
    # honest-type columns: Bell-state sources, Bob measures in the Bell basis
    for s in range(D):
        for t in range(D):
            pool.append(_Component(bell[s].copy(), bell[t].copy(), bell.T.copy()))
    # classical columns: computational product states, Bob reads out his qubits
    for x in range(2):
        for y in range(2):
            for b in range(D):
                b1, b2 = divmod(b, 2)
                pool.append(
                    _Component(
                        np.kron(basis_ket(x, 2), basis_ket(b1, 2)),
                        np.kron(basis_ket(y, 2), basis_ket(b2, 2)),
                        np.eye(4, dtype=complex),
                    )
                )
    for _ in range(extra):
        pool.append(
            _Component(
                random_state_vector(4, rng),
                random_state_vector(4, rng),
                random_unitary(4, rng),
            )
        )
    for comp in pool:
        comp.set_best_guess()
    return pool


_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _phase1(tables: np.ndarray, target: np.ndarray):
    n = tables.shape[1]
    a_eq = np.hstack([tables, np.eye(16), -np.eye(16)])
    cost = np.concatenate([np.zeros(n), np.ones(32)])
    res = linprog(cost, A_eq=a_eq, b_eq=target, bounds=(0, None), method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        raise InfeasibleTargetError(f"phase-1 LP failed: {res.message}")
    return float(res.fun), res.eqlin.marginals


def _phase2(tables: np.ndarray, gains: np.ndarray, target: np.ndarray):
    res = linprog(-gains, A_eq=tables, b_eq=target, bounds=(0, None), method="highs", options=_LP_OPTIONS)
    if res.status != 0:
        raise InfeasibleTargetError(f"phase-2 LP failed: {res.message}")
    return res.x, -float(res.fun), res.eqlin.marginals


def _polish(tables: np.ndarray, q: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Re-solve the equality system on the LP support to remove solver slack."""
    support = np.flatnonzero(q > 1e-12)
    sol, *_ = np.linalg.lstsq(tables[:, support], target, rcond=None)
    if sol.min() < -1e-12:
        return q
    out = np.zeros_like(q)
    out[support] = np.clip(sol, 0.0, None)
    return out


@dataclass(frozen=True)
class EveOptimum:
    strategy: EveStrategy
    guessing_probability: float
    trace: tuple[tuple[int, float], ...] = field(repr=False)
    restart_values: tuple[float, ...] = ()

    def __iter__(self):
        yield self.strategy
        yield self.guessing_probability


def _search(target: np.ndarray, config: EveConfig, ss: np.random.SeedSequence):
    rng = np.random.default_rng(ss)
    pool = _seed_pool(rng, config.random_columns)
    history: list[float] = []
    q = None
    for _ in range(config.iterations):
        tables = np.column_stack([c.table().reshape(-1) for c in pool])
        infeasibility, duals = _phase1(tables, target)
        if infeasibility > 1e-11:
            prices, kappa = duals.reshape(D, D), 0.0
        else:
            gains = np.array([c.gain() for c in pool])
            q, value, duals = _phase2(tables, gains, target)
            history.append(value)
            prices, kappa = duals.reshape(D, D), 1.0
        starts = [pool[int(rng.integers(len(pool)))] for _ in range(config.pricing_starts - 1)]
        starts.append(
            _Component(random_state_vector(4, rng), random_state_vector(4, rng), random_unitary(4, rng))
        )
        best, best_value = None, -np.inf
        for start in starts:
            if kappa:
                start.set_best_guess()
            cand, val = _price(start, prices, kappa, config.pricing_sweeps)
            if val > best_value:
                best, best_value = cand, val
        if best_value <= 1e-9:
            if kappa == 0.0:
                raise InfeasibleTargetError(
                    f"no classically-correlated source model reproduces the table (residual {infeasibility:.3e})"
                )
            break
        pool.append(best)
    tables = np.column_stack([c.table().reshape(-1) for c in pool])
    infeasibility, _ = _phase1(tables, target)
    if infeasibility > 1e-11:
        raise InfeasibleTargetError(
            f"no classically-correlated source model reproduces the table (residual {infeasibility:.3e})"
        )
    gains = np.array([c.gain() for c in pool])
    q, value, _ = _phase2(tables, gains, target)
    if not history or value >= history[-1]:
        history.append(value)
    q = _polish(tables, q, target)
    return pool, q, history


def _assemble(pool: list[_Component], q: np.ndarray, eve_dim: int) -> EveStrategy:
    support = [k for k in np.flatnonzero(q > 0)]
    if len(support) > eve_dim:
        raise InfeasibleTargetError(
            f"attack needs {len(support)} register values, eve_dim is {eve_dim}"
        )
    dim_b = 4 * eve_dim
    psi = np.zeros((4, dim_b, eve_dim), dtype=complex)
    bob = [np.zeros((dim_b, dim_b), dtype=complex) for _ in range(D)]
    used = set()
    for lam, k in enumerate(support):
        comp = pool[k]
        vec = comp.vector().reshape(4, 4)
        reg = basis_ket(lam, eve_dim)
        psi[:, :, lam] = np.sqrt(q[k]) * np.einsum("ab,r->abr", vec, reg).reshape(4, dim_b)
        for b in range(D):
            u = comp.basis[:, b]
            bob[b] += np.kron(np.outer(u, u.conj()), np.outer(reg, reg))
        used.add(lam)
    for lam in range(eve_dim):
        if lam not in used:
            reg = basis_ket(lam, eve_dim)
            for b in range(D):
                bob[b] += np.kron(np.outer(basis_ket(b, 4), basis_ket(b, 4)), np.outer(reg, reg))
    shape = SubsystemShape((2, 2, dim_b, eve_dim), ABE)
    state = psi.reshape(-1)
    state = state / np.linalg.norm(state)
    bob_povm = Povm(tuple(bob))
    return EveStrategy(state, shape, bob_povm, optimal_eve_povm(state, shape, bob_povm))


def optimize_eve(target: CorrelationTable, config: EveConfig | None = None, seed: int = 0) -> EveOptimum:
    """Search for Eve's best invisible attack with classically correlated sources.

    Column generation over register values: a linear program picks the
    weights of the current columns (maximising Eve's success subject to
    reproducing ``target`` exactly), and a see-saw over one column's sources,
    Bob's basis and Eve's guess prices in a new column from the LP duals.
    The recorded value never decreases within a restart. The result is a
    lower bound on the optimal guessing probability.
    """
    config = config or EveConfig()
    t = target.probabilities.reshape(-1)
    seeds = np.random.SeedSequence(seed).spawn(config.restarts)
    runs = parallel_map(lambda ss: _search(t, config, ss), seeds)
    trace = tuple((r, v) for r, (_, _, hist) in enumerate(runs) for v in hist)
    finals = tuple(hist[-1] for _, _, hist in runs)
    best = int(np.argmax(finals))
    pool, q, _ = runs[best]
    strategy = _assemble(pool, q, config.eve_dim)
    g = guessing_probability(target, strategy, config.consistency_tol)
    return EveOptimum(strategy, g, trace, finals)


# --- certification ----------------------------------------------------------


class Status(str, Enum):
    CERTIFIED = "certified-2-bits"
    PREMISE_UNMET = "premise-unmet"
    HEURISTIC = "heuristic-bound"


CLASSICAL_SOURCES_CAVEAT = (
    "assumes the two sources are correlated only classically; "
    "entangled sources let Eve guess Bob's outcome perfectly (see attack-demo)"
)


@dataclass(frozen=True)
class CertificationResult:
    guessing_probability: float
    min_entropy_bits: float
    witness: float
    status: Status
    caveats: tuple[str, ...]

    @property
    def certified(self) -> bool:
        return self.status is Status.CERTIFIED


@dataclass(frozen=True)
class CertifyConfig:
    premise_tol: float = PREMISE_TOL
    eve: EveConfig = field(default_factory=EveConfig)

    def __post_init__(self) -> None:
        if not 0 <= self.premise_tol < 1:
            raise ValueError("premise_tol must lie in [0, 1)")


def certify(s: Strategy, config: CertifyConfig | None = None, seed: int = 0) -> CertificationResult:
    config = config or CertifyConfig()
    w = witness_expectation_form(s).value
    if w >= 1 - config.premise_tol:
        g = 0.25
        return CertificationResult(
            guessing_probability=g,
            min_entropy_bits=min_entropy(g),
            witness=w,
            status=Status.CERTIFIED,
            caveats=(CLASSICAL_SOURCES_CAVEAT,),
        )
    table = correlations(s)
    caveats = (
        CLASSICAL_SOURCES_CAVEAT,
        f"W = {w:.12g} is below 1 - {config.premise_tol:g}; no certificate",
    )
    try:
        best = optimize_eve(table, config.eve, seed)
    except InfeasibleTargetError as exc:
        return CertificationResult(1.0, 0.0, w, Status.PREMISE_UNMET, caveats + (str(exc),))
    g = min(max(best.guessing_probability, 0.25), 1.0)
    return CertificationResult(
        guessing_probability=g,
        min_entropy_bits=min_entropy(g),
        witness=w,
        status=Status.HEURISTIC,
        caveats=caveats
        + (
            "heuristic: G is the best attack found (a lower bound on Eve's optimum), not an upper bound",
            f"search limited to classical registers of dimension {config.eve.eve_dim}",
        ),
    )


@dataclass(frozen=True)
class AttackDemo:
    strategy: EveStrategy
    table: CorrelationTable
    guessing_probability: float
    witness: float

    def __iter__(self):
        yield self.strategy
        yield self.table
        yield self.guessing_probability


def entangled_source_attack() -> AttackDemo:
    """Sources jointly prepare |phi_b> on A1 A2 while Bob and Eve both hold the label b.

    ``|psi> = 1/2 sum_b |phi_b>_{A1A2} |b>_B |b>_E``; Bob announces b, Alice's
    Bell measurement returns a = b, and Eve reads b off her register.
    """
    bell = bell_basis()
    psi = np.zeros((4, 4, 4), dtype=complex)
    for b in range(D):
        psi[:, b, b] = bell[b] / 2
    shape = SubsystemShape((2, 2, 4, 4), ABE)
    readout = Povm.from_basis(np.eye(4))
    strategy = EveStrategy(psi.reshape(-1), shape, readout, readout)
    table = strategy.table()
    g = guessing_probability(table, strategy)
    return AttackDemo(strategy, table, g, witness_value(table))
