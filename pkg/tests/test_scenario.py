import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import random_povm
from oracles import BELL, direct_table
from swapsteer.linalg import SubsystemShape, permute, proj, random_density, random_unitary
from swapsteer.scenario import (
    CorrelationTable,
    Observable,
    Povm,
    Strategy,
    arrange_sources,
    bell_basis,
    bell_povm,
    correlations,
    expectation_values,
    ideal_strategy,
    ideal_table,
    isotropic_source,
    isotropic_strategy,
    observable_from_povm,
    phi_plus,
    probabilities_from_expectations,
    product_strategy,
    trusted_a0,
    trusted_observable,
    uniform_table,
)

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_table(rng) -> CorrelationTable:
    return CorrelationTable(rng.dirichlet(np.ones(16)).reshape(4, 4))


def test_bell_basis():
    b = bell_basis()
    assert np.allclose(b.conj() @ b.T, np.eye(4), atol=1e-15)
    assert np.allclose(b[0], np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert np.all(np.imag(b) == 0)
    assert np.allclose(b, BELL)


def test_trusted_observable():
    a0 = trusted_a0()
    for k, phi in enumerate(BELL):
        assert np.allclose(a0 @ phi, 1j**k * phi, atol=1e-15)
    assert np.allclose(np.linalg.matrix_power(a0, 4), np.eye(4))
    assert np.allclose(a0.T, a0)
    obs = trusted_observable()
    assert np.allclose(obs[1], a0) and np.allclose(obs[5], a0)


def test_observable_from_povm_examples():
    rng = np.random.default_rng(0)
    p = Povm(random_povm(3, rng))
    assert np.allclose(observable_from_povm(p, 0), np.eye(3))
    bell = bell_povm()
    assert np.allclose(observable_from_povm(bell, 1), trusted_a0())
    assert np.allclose(observable_from_povm(bell, 3), trusted_a0().conj().T)
    with pytest.raises(IndexError):
        observable_from_povm(bell, 4)


def test_povm_validation():
    with pytest.raises(ValueError):
        Povm((np.eye(2), np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))))
    with pytest.raises(ValueError):
        Povm((np.diag([1.5, 0]), np.diag([-0.5, 1]), np.zeros((2, 2)), np.zeros((2, 2))))
    assert bell_povm().projective
    noisy = Povm(tuple(0.9 * e + 0.1 * np.eye(4) / 4 for e in bell_povm().elements))
    assert not noisy.projective


@given(seeds)
def test_observable_invariants_random_povm(seed):
    rng = np.random.default_rng(seed)
    obs = Observable.from_povm(Povm(random_povm(4, rng)))
    assert obs.adjoint_defect() <= 1e-10
    assert obs.contraction_excess() <= 1e-10


@given(seeds)
def test_projective_power_property(seed):
    rng = np.random.default_rng(seed)
    u = random_unitary(4, rng)
    p = Povm.from_basis(u.T)
    assert p.projective
    a1 = observable_from_povm(p, 1)
    for k in range(4):
        assert np.abs(observable_from_povm(p, k) - np.linalg.matrix_power(a1, k)).max() <= 1e-10
    assert Observable.from_povm(p).power_defect() <= 1e-10


def test_correlation_table_validation():
    with pytest.raises(ValueError):
        CorrelationTable(np.full((4, 4), 0.1))
    with pytest.raises(ValueError):
        CorrelationTable(np.full((3, 3), 1 / 9))
    t = uniform_table()
    with pytest.raises(ValueError):
        t.probabilities[0, 0] = 1.0


def test_correlations_examples():
    assert ideal_strategy()  # constructs
    assert np.abs(correlations(ideal_strategy()).probabilities - np.eye(4) / 4).max() <= 1e-15
    prod = correlations(product_strategy()).probabilities
    marg = np.array([0.5, 0.5, 0, 0])
    assert np.allclose(prod, np.outer(marg, marg), atol=1e-15)
    assert np.allclose(correlations(isotropic_strategy(0.0)).probabilities, 1 / 16, atol=1e-15)


def test_correlations_match_index_loop_oracle():
    rng = np.random.default_rng(11)
    for _ in range(5):
        s1, s2 = random_density(4, rng), random_density(4, rng)
        bob = random_povm(4, rng)
        s = Strategy(s1, s2, Povm(bob))
        assert np.abs(correlations(s).probabilities - direct_table(s1, s2, bob)).max() <= 1e-12


@given(seeds)
def test_correlations_normalised_random(seed):
    rng = np.random.default_rng(seed)
    m1, m2 = rng.integers(1, 3, size=2) * 2
    s = Strategy(random_density(2 * m1, rng), random_density(2 * m2, rng), Povm(random_povm(m1 * m2, rng)))
    p = correlations(s).probabilities
    assert abs(p.sum() - 1) <= 1e-10
    assert p.min() >= 0


def test_expectation_examples():
    e = expectation_values(uniform_table())
    ref = np.zeros((4, 4))
    ref[0, 0] = 1
    assert np.allclose(e, ref, atol=1e-15)
    e = expectation_values(ideal_table())
    k, l = np.indices((4, 4))
    assert np.allclose(e, ((k + l) % 4 == 0).astype(float), atol=1e-15)
    assert np.allclose(probabilities_from_expectations(ref).probabilities, 1 / 16)
    assert np.allclose(
        probabilities_from_expectations(expectation_values(ideal_table())).probabilities, np.eye(4) / 4
    )


def test_probabilities_from_expectations_rejects_invalid():
    e = np.zeros((4, 4), dtype=complex)
    e[0, 0] = 1
    e[1, 0] = 2.0
    with pytest.raises(ValueError):
        probabilities_from_expectations(e)


@given(seeds)
def test_fourier_round_trip(seed):
    t = random_table(np.random.default_rng(seed))
    back = probabilities_from_expectations(expectation_values(t))
    assert t.max_deviation(back) <= 1e-12


def test_isotropic_source():
    assert np.allclose(isotropic_source(1.0), proj(phi_plus()))
    assert np.allclose(isotropic_source(0.0), np.eye(4) / 4)
    assert np.allclose(np.linalg.eigvalsh(isotropic_source(0.8))[::-1], [0.85, 0.05, 0.05, 0.05])
    with pytest.raises(ValueError):
        isotropic_source(1.2)


def test_arrange_sources_orders_alice_first():
    rng = np.random.default_rng(4)
    a1, b1, a2, b2 = (random_density(2, rng) for _ in range(4))
    rho = arrange_sources(np.kron(a1, b1), np.kron(a2, b2))
    assert np.allclose(rho, np.kron(np.kron(a1, a2), np.kron(b1, b2)))
    sh = SubsystemShape((2, 2, 2, 2), ("A1", "B1", "A2", "B2"))
    assert np.allclose(rho, permute(np.kron(np.kron(a1, b1), np.kron(a2, b2)), sh, ("A1", "A2", "B1", "B2")))


def test_strategy_validation():
    with pytest.raises(ValueError):
        Strategy(np.eye(4), np.eye(4) / 4, bell_povm())
    with pytest.raises(ValueError):
        Strategy(np.eye(6) / 6, np.eye(4) / 4, bell_povm())  # Alice factor must be a qubit pair with even size
    with pytest.raises(ValueError):
        Strategy(np.eye(8) / 8, np.eye(4) / 4, bell_povm())  # Bob POVM is 4-dim but Bob holds 8
