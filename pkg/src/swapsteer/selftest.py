"""Self-testing extraction for maximal swap-steering violation.

Given a strategy reaching W = 1, the steps below reconstruct the local
unitaries U1 (on B1) and U2 (on B2) that bring the sources to
``|phi+>_{A1 B1'} |phi+>_{A2 B2'}`` times a junk state and Bob's observable
to ``A0 (x) 1_junk``:

1. Bob's observable B0 must be unitary (projective measurement); checked on a
   full-rank reduced state of Bob.
2. Each source is eigendecomposed, ``rho_i = sum_s p_s |psi^i_s><psi^i_s|``.
3. Every eigenvector is Schmidt decomposed across A_i | B_i; U_i sends the
   right Schmidt vectors of the s-th eigenvector to the conjugated left ones
   on the block ``C^2 (x) |s>`` of ``B_i = B_i' (x) B_i''``.
4. Bob's supports of different eigenvectors must be orthogonal; this is read
   off from the vectors g^a_{ss'} appearing in the Bell-basis expansion of
   ``|psi^1_s>|psi^2_s'>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    PremiseUnmetError,
    RankDeficiencyError,
    SchmidtRankError,
    SupportOverlapError,
)
from .linalg import (
    SubsystemShape,
    basis_ket,
    dagger,
    eig_hermitian,
    fidelity,
    kron,
    partial_trace,
    permute,
    permute_vector,
    proj,
    schmidt_decompose,
    unit_vector,
)
from .scenario import (
    D,
    ORDER,
    Povm,
    Strategy,
    arrange_sources,
    observable_from_povm,
    phi_plus,
    trusted_a0,
)
from .witness import witness_expectation_form

PREMISE_TOL = 1e-7
RANK_TOL = 1e-8
EIG_CUTOFF = 1e-12
SCHMIDT_RANK_TOL = 1e-8


def check_projective(s: Strategy, tol: float = 1e-9) -> tuple[bool, float]:
    """Unitarity of B0 = sum_b i^b N_b; returns (passed, defect).

    The defect is ``max(|B0 B0^dag - 1|_F, |B0^dag B0 - 1|_F)``. Raises
    :class:`RankDeficiencyError` if Bob's reduced state is not full rank, since
    the measurement is only determined on the support of that state.
    """
    ev = np.linalg.eigvalsh(s.bob_state)
    if ev.min() <= RANK_TOL:
        raise RankDeficiencyError(
            f"full-rank assumption violated: Bob's reduced state has eigenvalue {ev.min():.3e}"
        )
    b0 = observable_from_povm(s.bob, 1)
    eye = np.eye(b0.shape[0])
    defect = max(
        float(np.linalg.norm(b0 @ dagger(b0) - eye)),
        float(np.linalg.norm(dagger(b0) @ b0 - eye)),
    )
    return defect <= tol, defect


@dataclass(frozen=True)
class SourceEnsemble:
    """``rho = sum_{s,s'} weights[s, s'] psi^1_s (x) psi^2_s'`` with orthonormal families."""

    weights: np.ndarray
    source1_vectors: tuple[np.ndarray, ...]
    source2_vectors: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        v1 = tuple(unit_vector(v, 1e-9) for v in self.source1_vectors)
        v2 = tuple(unit_vector(v, 1e-9) for v in self.source2_vectors)
        if w.shape != (len(v1), len(v2)):
            raise ValueError(f"weights shape {w.shape} does not match ({len(v1)}, {len(v2)})")
        if w.min() < 0 or abs(w.sum() - 1.0) > 1e-10:
            raise ValueError("ensemble weights must be nonnegative and sum to 1")
        for name, family in (("source1", v1), ("source2", v2)):
            if len({v.size for v in family}) != 1 or family[0].size % 2:
                raise ValueError(f"{name} vectors must share one even dimension")
            gram = np.array([[np.vdot(a, b) for b in family] for a in family])
            if np.max(np.abs(gram - np.eye(len(family)))) > 1e-9:
                raise ValueError(f"{name} vectors are not orthonormal")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "source1_vectors", v1)
        object.__setattr__(self, "source2_vectors", v2)

    @classmethod
    def from_terms(cls, terms) -> "SourceEnsemble":
        """Build from ``[(weight, psi1, psi2), ...]``; repeated vectors (up to phase) are merged."""
        fam1: list[np.ndarray] = []
        fam2: list[np.ndarray] = []
        idx = []

        def find(family, v):
            v = np.asarray(v, dtype=complex).reshape(-1)
            for k, u in enumerate(family):
                if u.size == v.size and abs(abs(np.vdot(u, v)) - 1) <= 1e-9:
                    return k
            family.append(v)
            return len(family) - 1

        for w, v1, v2 in terms:
            idx.append((float(w), find(fam1, v1), find(fam2, v2)))
        weights = np.zeros((len(fam1), len(fam2)))
        for w, i, j in idx:
            weights[i, j] += w
        return cls(weights, tuple(fam1), tuple(fam2))

    @property
    def bob_dims(self) -> tuple[int, int]:
        return self.source1_vectors[0].size // 2, self.source2_vectors[0].size // 2

    def state(self) -> np.ndarray:
        """The represented state in (A1, A2, B1, B2) order."""
        rho = 0
        for s, v1 in enumerate(self.source1_vectors):
            for t, v2 in enumerate(self.source2_vectors):
                if self.weights[s, t]:
                    rho = rho + self.weights[s, t] * arrange_sources(proj(v1), proj(v2))
        return rho


def eigendecompose_separable(source1: np.ndarray, source2: np.ndarray) -> SourceEnsemble:
    families = []
    probs = []
    for rho in (source1, source2):
        if rho.shape[0] % 2:
            raise ValueError("source must carry a qubit on Alice's side")
        vals, vecs = eig_hermitian(rho)
        if vals.min() < -1e-10 or abs(vals.sum() - 1) > 1e-10:
            raise ValueError("source is not a density operator")
        keep = vals > EIG_CUTOFF
        families.append(tuple(vecs[:, k] for k in np.flatnonzero(keep)))
        p = vals[keep]
        probs.append(p / p.sum())
    return SourceEnsemble(np.outer(*probs), families[0], families[1])


def _pair_shape(m: int) -> SubsystemShape:
    return SubsystemShape((2, m), ("A", "B"))


def conditional_vectors(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bob vectors f_j = sqrt(2) (<j|_A (x) 1) psi, so psi = sum_j |j> f_j / sqrt(2)."""
    rows = np.asarray(psi, dtype=complex).reshape(2, -1) * np.sqrt(2)
    return rows[0], rows[1]


def _local_unitary(vectors: tuple[np.ndarray, ...]) -> np.ndarray:
    m = vectors[0].size // 2
    k = len(vectors)
    if m % 2:
        raise SupportOverlapError(f"Bob's factor of dimension {m} cannot host a qubit block")
    junk = m // 2
    if k > junk:
        raise SupportOverlapError(
            f"{k} eigenvectors cannot have orthogonal 2-dim Bob supports in dimension {m}"
        )
    fs, ts = [], []
    for s, psi in enumerate(vectors):
        sd = schmidt_decompose(psi, _pair_shape(m), ("A",))
        if sd.coefficients[-1] <= SCHMIDT_RANK_TOL:
            raise SchmidtRankError(
                f"eigenvector {s} has Schmidt rank 1; extraction needs entangled sources"
            )
        for j in range(2):
            fs.append(sd.right[:, j])
            ts.append(np.kron(np.conj(sd.left[:, j]), basis_ket(s, junk)))
    f = np.column_stack(fs)
    t = np.column_stack(ts)
    if np.max(np.abs(dagger(f) @ f - np.eye(2 * k))) > 1e-8:
        raise SupportOverlapError("Bob's supports of distinct eigenvectors overlap")
    x, _, yh = np.linalg.svd(t @ dagger(f))
    u = x @ yh
    # one global phase per junk block: largest-magnitude entry real positive
    for s in range(junk):
        rows = [s, s + junk]
        block = u[rows, :]
        flat = np.abs(block).reshape(-1)
        pivot = block.reshape(-1)[int(np.flatnonzero(flat >= flat.max() - 1e-12)[0])]
        u[rows, :] = block * (np.conj(pivot) / abs(pivot))
    return u


def extract_local_unitaries(e: SourceEnsemble) -> tuple[np.ndarray, np.ndarray]:
    """Block unitaries ``U_i = (+)_s U_{s,i}`` on B_i = B_i' (x) B_i''."""
    return _local_unitary(e.source1_vectors), _local_unitary(e.source2_vectors)


def g_vectors(psi1: np.ndarray, psi2: np.ndarray) -> np.ndarray:
    """Rows g^a with ``|psi1>|psi2> = 1/2 sum_a |phi_a>_{A1A2} |g^a>_{B1B2}``."""
    c0, c1 = conditional_vectors(psi1)
    d0, d1 = conditional_vectors(psi2)
    s = 1 / np.sqrt(2)
    return np.array(
        [
            s * (np.kron(c0, d0) + np.kron(c1, d1)),
            s * (np.kron(c0, d0) - np.kron(c1, d1)),
            s * (np.kron(c0, d1) + np.kron(c1, d0)),
            s * (np.kron(c0, d1) - np.kron(c1, d0)),
        ]
    )


@dataclass(frozen=True)
class SupportCheck:
    defect: float
    g_defect: float
    support_defect: float
    g_relation_defect: float
    block_dims: tuple[tuple[int, ...], tuple[int, ...]]
    junk_dims: tuple[int, int]


def support_orthogonality_check(e: SourceEnsemble, bob: Povm) -> SupportCheck:
    """Orthogonality defects of the g-vectors and of Bob's per-eigenvector supports.

    ``g_defect`` is max |<g^b_{ll'}|g^a_{ss'}>| over a != b and all index
    pairs; ``support_defect`` is max |<f_{x,i,l}|f_{y,i,s}>| over l != s.
    ``g_relation_defect`` is max |omega^a B0^(3) g^a - g^a| over all pairs.
    """
    pairs = [(s, t) for s in range(len(e.source1_vectors)) for t in range(len(e.source2_vectors))]
    gs = {
        (s, t): g_vectors(e.source1_vectors[s], e.source2_vectors[t]) for s, t in pairs
    }
    g_defect = 0.0
    for p in pairs:
        for q in pairs:
            overlaps = np.abs(np.conj(gs[q]) @ gs[p].T)
            np.fill_diagonal(overlaps, 0.0)
            g_defect = max(g_defect, float(overlaps.max()))

    support_defect = 0.0
    block_dims = []
    for family in (e.source1_vectors, e.source2_vectors):
        conds = [np.column_stack(conditional_vectors(v)) for v in family]
        dims = []
        for c in conds:
            sv = np.linalg.svd(c, compute_uv=False)
            dims.append(int(np.sum(sv > SCHMIDT_RANK_TOL)))
        block_dims.append(tuple(dims))
        for i in range(len(conds)):
            for j in range(len(conds)):
                if i != j:
                    support_defect = max(
                        support_defect, float(np.abs(dagger(conds[i]) @ conds[j]).max())
                    )

    b3 = observable_from_povm(bob, 3)
    w = np.array([1, 1j, -1, -1j])
    rel = 0.0
    for g in gs.values():
        for a in range(D):
            rel = max(rel, float(np.linalg.norm(w[a] * (b3 @ g[a]) - g[a])))

    m1, m2 = e.bob_dims
    return SupportCheck(
        defect=max(g_defect, support_defect),
        g_defect=g_defect,
        support_defect=support_defect,
        g_relation_defect=rel,
        block_dims=(block_dims[0], block_dims[1]),
        junk_dims=(m1 // 2, m2 // 2),
    )


def _arranged_vector(psi1: np.ndarray, psi2: np.ndarray) -> np.ndarray:
    m1, m2 = psi1.size // 2, psi2.size // 2
    shape = SubsystemShape((2, m1, 2, m2), ("A1", "B1", "A2", "B2"))
    return permute_vector(np.kron(psi1, psi2), shape, ORDER)


def projected_residual(e: SourceEnsemble, bob: Povm) -> float:
    """max over k, s, s' of ``|(A0^k (x) Bbar^(4-k)) psi - psi|``, psi = |psi^1_s>|psi^2_s'>.

    Bbar compresses B0 onto the support of ``Tr_A psi^1_s (x) Tr_A psi^2_s'``.
    """
    a0 = trusted_a0()
    b0 = observable_from_povm(bob, 1)
    worst = 0.0
    for psi1 in e.source1_vectors:
        for psi2 in e.source2_vectors:
            m1, m2 = psi1.size // 2, psi2.size // 2
            r1 = partial_trace(proj(psi1), _pair_shape(m1), ("B",))
            r2 = partial_trace(proj(psi2), _pair_shape(m2), ("B",))
            vals, vecs = np.linalg.eigh(np.kron(r1, r2))
            support = vecs[:, vals > EIG_CUTOFF]
            pi = support @ dagger(support)
            bbar = pi @ b0 @ pi
            vec = _arranged_vector(psi1, psi2)
            for k in range(D):
                op = np.kron(np.linalg.matrix_power(a0, k), np.linalg.matrix_power(bbar, D - k))
                worst = max(worst, float(np.linalg.norm(op @ vec - vec)))
    return worst


def filter_commutator(p1: np.ndarray, p2: np.ndarray) -> float:
    """``|[A0, (P1 (x) P2)^2]|_F`` for local filters P1, P2."""
    a0 = trusted_a0()
    sq = np.linalg.matrix_power(np.kron(p1, p2), 2)
    return float(np.linalg.norm(a0 @ sq - sq @ a0))


def transpose_identity_defect(rng: np.random.Generator, dim: int = 2) -> float:
    """``|(R (x) Q)|phi+> - (R Q^T (x) 1)|phi+>|`` for random R, Q."""
    r = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    phi = np.eye(dim).reshape(-1) / np.sqrt(dim)
    lhs = np.kron(r, q) @ phi
    rhs = np.kron(r @ q.T, np.eye(dim)) @ phi
    return float(np.linalg.norm(lhs - rhs))


def _extracted_shape(m1: int, m2: int) -> SubsystemShape:
    return SubsystemShape(
        (2, 2, 2, m1 // 2, 2, m2 // 2), ("A1", "A2", "B1'", "B1''", "B2'", "B2''")
    )


def reference_state() -> np.ndarray:
    """``|phi+>_{A1 B1'} |phi+>_{A2 B2'}`` in (A1, A2, B1', B2') order."""
    rho = proj(phi_plus())
    return arrange_sources(rho, rho)


def extracted_state(s: Strategy, u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    """Apply 1_A (x) U1 (x) U2 and trace out the junk; result in (A1, A2, B1', B2') order."""
    w = kron(np.eye(4), u1, u2)
    rho = w @ s.state @ dagger(w)
    m1, m2 = s.bob_dims
    return partial_trace(rho, _extracted_shape(m1, m2), ("A1", "A2", "B1'", "B2'"))


def measurement_defect(bob: Povm, u1: np.ndarray, u2: np.ndarray) -> float:
    """``|(U1 (x) U2) B0 (U1 (x) U2)^dag - A0 (x) 1_junk|_F``."""
    m1, m2 = u1.shape[0], u2.shape[0]
    u = np.kron(u1, u2)
    rotated = u @ observable_from_povm(bob, 1) @ dagger(u)
    shape = SubsystemShape((2, m1 // 2, 2, m2 // 2), ("B1'", "B1''", "B2'", "B2''"))
    rotated = permute(rotated, shape, ("B1'", "B2'", "B1''", "B2''"))
    target = np.kron(trusted_a0(), np.eye((m1 // 2) * (m2 // 2)))
    return float(np.linalg.norm(rotated - target))


@dataclass(frozen=True)
class ExtractionReport:
    witness: float
    projective: bool
    projective_defect: float
    u1: np.ndarray
    u2: np.ndarray
    state_fidelity: float
    measurement_defect: float
    support: SupportCheck
    projected_residual: float
    transpose_identity_defect: float

    @property
    def support_orthogonality_defect(self) -> float:
        return self.support.defect

    @property
    def block_dims(self):
        return self.support.block_dims

    def certifies(self, fidelity_tol: float = 1e-9, defect_tol: float = 1e-8) -> bool:
        return (
            self.projective
            and self.state_fidelity >= 1 - fidelity_tol
            and self.measurement_defect <= defect_tol
            and self.support.defect <= defect_tol
        )


def verify_selftest(
    s: Strategy,
    tol: float = PREMISE_TOL,
    structural_tol: float = 1e-9,
    seed: int = 0,
) -> ExtractionReport:
    """Run the full extraction; refuses unless W >= 1 - tol."""
    w = witness_expectation_form(s).value
    if w < 1 - tol:
        raise PremiseUnmetError(
            f"self-test premise unmet: W = {w:.12g} < 1 - {tol:g}; no certificate issued"
        )
    projective, pdefect = check_projective(s, structural_tol)
    ensemble = eigendecompose_separable(s.source1, s.source2)
    u1, u2 = extract_local_unitaries(ensemble)
    support = support_orthogonality_check(ensemble, s.bob)
    fid = fidelity(extracted_state(s, u1, u2), reference_state())
    tdef = transpose_identity_defect(np.random.default_rng(seed))
    if tdef > 1e-10:
        raise AssertionError(f"transposition identity failed: {tdef}")
    return ExtractionReport(
        witness=w,
        projective=projective,
        projective_defect=pdefect,
        u1=u1,
        u2=u2,
        state_fidelity=fid,
        measurement_defect=measurement_defect(s.bob, u1, u2),
        support=support,
        projected_residual=projected_residual(ensemble, s.bob),
        transpose_identity_defect=tdef,
    )
