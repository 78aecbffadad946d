import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import BELL
from swapsteer.errors import PremiseUnmetError, RankDeficiencyError, SupportOverlapError
from swapsteer.linalg import (
    SubsystemShape,
    fidelity,
    kron,
    partial_trace,
    permute,
    permute_vector,
    proj,
    random_unitary,
)
from swapsteer.scenario import (
    Povm,
    Strategy,
    arrange_sources,
    bell_povm,
    ideal_strategy,
    isotropic_source,
    partially_entangled_strategy,
    phi_plus,
    product_strategy,
    with_bob_unitaries,
)
from swapsteer.selftest import (
    SourceEnsemble,
    check_projective,
    eigendecompose_separable,
    extract_local_unitaries,
    extracted_state,
    filter_commutator,
    g_vectors,
    projected_residual,
    reference_state,
    support_orthogonality_check,
    transpose_identity_defect,
    verify_selftest,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)
PSI_MINUS = np.array([0, 1, -1, 0], dtype=complex) / np.sqrt(2)


def embedded(w: np.ndarray, s: int) -> np.ndarray:
    """phi+ with Bob's qubit sent into the s-th 2-dim block of the 4-dim space spanned by w."""
    return np.kron(np.eye(2), w[:, 2 * s : 2 * s + 2]) @ phi_plus()


def bell_with_junk(w1: np.ndarray, w2: np.ndarray) -> Povm:
    """Bell measurement on (B1', B2') with junk untouched, rotated by w1 (x) w2.

    Each Bob space B_i = C^4 is read as (junk index, qubit) through w_i's column
    blocks, i.e. column 2*s + q of w_i is |q>_{B_i'} |s>_{B_i''}.
    """
    shape = SubsystemShape((2, 2, 2, 2), ("B1'", "B2'", "B1''", "B2''"))
    elements = []
    for e in bell_povm().elements:
        big = permute(np.kron(e, np.eye(4)), shape, ("B1''", "B1'", "B2''", "B2'"))
        elements.append(np.kron(w1, w2) @ big @ np.kron(w1, w2).conj().T)
    return Povm(tuple(elements))


def junk_strategy(junk: np.ndarray) -> Strategy:
    """source1 = phi+_{A1 B1'} (x) junk_{B1''}; Bob measures Bell on (B1', B2)."""
    source1 = np.kron(proj(phi_plus()), junk)
    shape = SubsystemShape((2, 2, 2), ("B1'", "B2", "B1''"))
    bob = Povm(tuple(permute(np.kron(e, np.eye(2)), shape, ("B1'", "B1''", "B2")) for e in bell_povm().elements))
    return Strategy(source1, proj(phi_plus()), bob)


def test_check_projective_examples():
    ok, defect = check_projective(ideal_strategy())
    assert ok and defect <= 1e-12
    noisy = Povm(tuple(0.9 * e + 0.1 * np.eye(4) / 4 for e in bell_povm().elements))
    ok, defect = check_projective(Strategy(ideal_strategy().source1, ideal_strategy().source2, noisy))
    assert not ok and defect > 0.01
    with pytest.raises(RankDeficiencyError, match="full-rank assumption violated"):
        check_projective(product_strategy())


def test_eigendecompose_examples():
    rho = proj(phi_plus())
    e = eigendecompose_separable(rho, rho)
    assert e.weights.shape == (1, 1) and e.weights[0, 0] == pytest.approx(1)
    mixed = (proj(phi_plus()) + proj(PSI_MINUS)) / 2
    e = eigendecompose_separable(mixed, rho)
    assert np.allclose(e.weights.ravel(), [0.5, 0.5])
    e = eigendecompose_separable(isotropic_source(0.8), rho)
    assert np.allclose(e.weights.ravel(), [0.85, 0.05, 0.05, 0.05], atol=1e-12)
    assert np.allclose(e.state(), arrange_sources(isotropic_source(0.8), rho), atol=1e-12)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        SourceEnsemble(np.array([[0.5, 0.5]]), (phi_plus(),), (phi_plus(), phi_plus()))
    with pytest.raises(ValueError):
        SourceEnsemble(np.array([[0.7]]), (phi_plus(),), (phi_plus(),))
    e = SourceEnsemble.from_terms([(0.5, phi_plus(), phi_plus()), (0.5, -phi_plus(), phi_plus())])
    assert e.weights.shape == (1, 1)


@given(seeds)
def test_ensemble_state_is_density(seed):
    rng = np.random.default_rng(seed)
    w1, w2 = random_unitary(4, rng), random_unitary(4, rng)
    q = rng.dirichlet(np.ones(4)).reshape(2, 2)
    e = SourceEnsemble(q, (embedded(w1, 0), embedded(w1, 1)), (embedded(w2, 0), embedded(w2, 1)))
    rho = e.state()
    assert np.trace(rho).real == pytest.approx(1, abs=1e-10)
    assert np.linalg.eigvalsh(rho).min() >= -1e-10


def test_extract_ideal_is_identity():
    rho = proj(phi_plus())
    u1, u2 = extract_local_unitaries(eigendecompose_separable(rho, rho))
    assert np.allclose(u1, np.eye(2)) and np.allclose(u2, np.eye(2))


def test_extract_inverts_known_scrambling():
    v = random_unitary(2, np.random.default_rng(8))
    s = with_bob_unitaries(ideal_strategy(), v, np.eye(2))
    u1, u2 = extract_local_unitaries(eigendecompose_separable(s.source1, s.source2))
    prod = u1 @ v
    assert np.allclose(prod, prod[0, 0] * np.eye(2), atol=1e-10)
    assert abs(abs(prod[0, 0]) - 1) <= 1e-10
    assert np.allclose(u2, np.eye(2))


def test_partially_entangled_pipeline_has_low_fidelity():
    s = partially_entangled_strategy(0.3)
    u1, u2 = extract_local_unitaries(eigendecompose_separable(s.source1, s.source2))
    for u in (u1, u2):
        assert np.allclose(u @ u.conj().T, np.eye(2), atol=1e-9)
    f = fidelity(extracted_state(s, u1, u2), reference_state())
    # per source |<phi+|psi>|^2 = (cos 0.3 + sin 0.3)^2 / 2
    assert f == pytest.approx(((np.cos(0.3) + np.sin(0.3)) ** 2 / 2) ** 2, abs=1e-10)
    assert f < 1


def test_support_single_block():
    rho = proj(phi_plus())
    chk = support_orthogonality_check(eigendecompose_separable(rho, rho), bell_povm())
    assert chk.defect <= 1e-12
    assert chk.block_dims == ((2,), (2,))


def test_support_orthogonal_junk_blocks():
    rng = np.random.default_rng(21)
    w1, w2 = random_unitary(4, rng), random_unitary(4, rng)
    e = SourceEnsemble(
        np.array([[0.42, 0.18], [0.28, 0.12]]),
        (embedded(w1, 0), embedded(w1, 1)),
        (embedded(w2, 0), embedded(w2, 1)),
    )
    # direct inner products between Bob supports of different terms
    for w in (w1, w2):
        assert np.abs(w[:, :2].conj().T @ w[:, 2:]).max() <= 1e-12
    chk = support_orthogonality_check(e, bell_with_junk(w1, w2))
    assert chk.defect <= 1e-10
    assert chk.block_dims == ((2, 2), (2, 2))
    assert chk.g_relation_defect <= 1e-10


def test_support_overlap_detected():
    e = SourceEnsemble(np.array([[0.5], [0.5]]), (phi_plus(), PSI_MINUS), (phi_plus(),))
    chk = support_orthogonality_check(e, bell_povm())
    assert chk.defect > 0.1
    with pytest.raises(SupportOverlapError):
        extract_local_unitaries(e)


def test_g_vectors_expand_product():
    rng = np.random.default_rng(2)
    w1, w2 = random_unitary(4, rng), random_unitary(4, rng)
    psi1, psi2 = embedded(w1, 1), embedded(w2, 0)
    g = g_vectors(psi1, psi2)
    total = sum(np.kron(BELL[a], g[a]) for a in range(4)) / 2
    shape = SubsystemShape((2, 4, 2, 4), ("A1", "B1", "A2", "B2"))
    direct = permute_vector(np.kron(psi1, psi2), shape, ("A1", "A2", "B1", "B2"))
    assert np.allclose(total, direct, atol=1e-12)


def test_ideal_structural_identities():
    rho = proj(phi_plus())
    e = eigendecompose_separable(rho, rho)
    assert projected_residual(e, bell_povm()) <= 1e-10
    assert support_orthogonality_check(e, bell_povm()).g_relation_defect <= 1e-10
    assert transpose_identity_defect(np.random.default_rng(0)) <= 1e-12


def test_filter_commutator_grid():
    # P_i = sqrt(2) diag(cos t_i, sin t_i) has Tr P_i^2 = 2; commuting forces P1 (x) P2 = 1
    grid = np.linspace(0.05, np.pi / 2 - 0.05, 41)
    assert np.any(np.isclose(grid, np.pi / 4))
    hits = 0
    for t1 in grid:
        for t2 in grid:
            p1 = np.sqrt(2) * np.diag([np.cos(t1), np.sin(t1)])
            p2 = np.sqrt(2) * np.diag([np.cos(t2), np.sin(t2)])
            if filter_commutator(p1, p2) <= 1e-10:
                hits += 1
                assert np.linalg.norm(np.kron(p1, p2) - np.eye(4)) <= 1e-8
    assert hits == 1


def test_verify_ideal():
    r = verify_selftest(ideal_strategy())
    assert r.state_fidelity == pytest.approx(1, abs=1e-9)
    assert r.measurement_defect <= 1e-9
    assert r.certifies()
    for u in (r.u1, r.u2):
        assert np.allclose(u @ u.conj().T, np.eye(u.shape[0]), atol=1e-9)
    assert min(r.projective_defect, r.measurement_defect, r.projected_residual, r.support.defect) >= 0


@given(seeds)
def test_verify_scrambled(seed):
    rng = np.random.default_rng(seed)
    s = with_bob_unitaries(ideal_strategy(), random_unitary(2, rng), random_unitary(2, rng))
    r = verify_selftest(s)
    assert r.state_fidelity >= 1 - 1e-9
    assert r.measurement_defect <= 1e-8


def test_verify_mixed_junk_on_both_sides():
    rng = np.random.default_rng(17)
    w1, w2 = random_unitary(4, rng), random_unitary(4, rng)
    q1, q2 = np.array([0.6, 0.4]), np.array([0.75, 0.25])
    src1 = sum(q * proj(embedded(w1, s)) for s, q in enumerate(q1))
    src2 = sum(q * proj(embedded(w2, s)) for s, q in enumerate(q2))
    r = verify_selftest(Strategy(src1, src2, bell_with_junk(w1, w2)))
    assert r.state_fidelity >= 1 - 1e-9
    assert r.measurement_defect <= 1e-8
    assert r.block_dims == ((2, 2), (2, 2))
    assert r.support.junk_dims == (2, 2)


def test_verify_junk_qubit_mixed():
    s = junk_strategy(np.diag([0.7, 0.3]))
    r = verify_selftest(s)
    assert r.state_fidelity == pytest.approx(1, abs=1e-9)
    assert r.block_dims == ((2, 2), (2,))
    assert r.support.junk_dims == (2, 1)
    # the junk factor of the rotated state is what was put in
    w = kron(np.eye(4), r.u1, r.u2)
    rho = w @ s.state @ w.conj().T
    shape = SubsystemShape((2, 2, 2, 2, 2), ("A1", "A2", "B1'", "B1''", "B2'"))
    junk = partial_trace(rho, shape, ("B1''",))
    assert np.allclose(np.sort(np.linalg.eigvalsh(junk)), [0.3, 0.7], atol=1e-10)


def test_verify_junk_qubit_pure_is_rank_deficient():
    # a pure junk state leaves Bob's reduced state singular, outside the full-rank premise
    with pytest.raises(RankDeficiencyError):
        verify_selftest(junk_strategy(np.diag([1.0, 0.0])))


@pytest.mark.parametrize("theta", [np.pi / 4 - 0.2, np.pi / 4 + 0.2])
def test_verify_refuses_partial_entanglement(theta):
    with pytest.raises(PremiseUnmetError):
        verify_selftest(partially_entangled_strategy(theta))
