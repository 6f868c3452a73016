import itertools
from math import comb

import numpy as np
import pytest

from cloning_lab.qudit import DimensionError, NotAStateError, haar_random_state, haar_random_states, projector, shrink_operator
from cloning_lab.symmetric import (
    FrameRankError,
    PseudoMixture,
    SizeGuardError,
    SymmetricBasis,
    SymmetricState,
    apply_pseudo_mixture_channel,
    embed_product_state,
    partial_trace_full,
    pseudo_mixture_decompose,
    reduce_operator,
    reduce_single_particle,
    sym_dimension,
    symmetrizer,
    tensor_power,
)


def permutation_average(d, n):
    """Average of the n! subsystem permutation operators on (C^d)^n."""
    full = d**n
    eye = np.eye(full).reshape((d,) * n + (full,))
    total = np.zeros((full, full))
    perms = list(itertools.permutations(range(n)))
    for perm in perms:
        total += np.transpose(eye, perm + (n,)).reshape(full, full)
    return total / len(perms)


def random_symmetric_state(d, n, rng, rank=3):
    dim = sym_dimension(d, n)
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return SymmetricState(SymmetricBasis(d, n), m / np.trace(m).real)


@pytest.mark.parametrize("d, n, dim", [(2, 1, 2), (2, 3, 4), (3, 2, 6)])
def test_sym_dimension_examples(d, n, dim):
    assert sym_dimension(d, n) == dim


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("n", range(6))
def test_basis_length_matches_dimension(d, n):
    basis = SymmetricBasis(d, n)
    assert len(basis) == sym_dimension(d, n) == comb(n + d - 1, n)
    assert len(set(basis.occupations)) == len(basis)
    assert all(sum(o) == n and min(o) >= 0 for o in basis.occupations)
    assert list(basis.occupations) == sorted(basis.occupations, reverse=True)


def test_basis_order_qubit_pair():
    assert SymmetricBasis(2, 2).occupations == ((2, 0), (1, 1), (0, 2))


def test_embed_single_copy_is_identity(rng):
    psi = haar_random_state(4, rng)
    assert np.allclose(embed_product_state(psi, 1), psi, atol=1e-15)


def test_embed_plus_state_two_copies():
    psi = np.array([1.0, 1.0]) / np.sqrt(2)
    assert np.allclose(embed_product_state(psi, 2), [0.5, 1 / np.sqrt(2), 0.5], atol=1e-15)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_embed_norm(d, rng):
    for psi in haar_random_states(d, 10, rng):
        assert np.linalg.norm(embed_product_state(psi, 3)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d, n", [(2, 1), (2, 2), (2, 3), (3, 2), (2, 4), (3, 3), (4, 2)])
def test_symmetrizer_matches_permutation_average(d, n):
    s = symmetrizer(d, n)
    assert np.abs(s - permutation_average(d, n)).max() <= 1e-12
    assert np.abs(s @ s - s).max() <= 1e-12
    assert np.abs(s - s.conj().T).max() <= 1e-12
    assert np.trace(s) == pytest.approx(sym_dimension(d, n), abs=1e-12)
    assert np.linalg.matrix_rank(s) == sym_dimension(d, n)


def test_symmetrizer_identity_for_one_copy():
    assert np.allclose(symmetrizer(3, 1), np.eye(3), atol=0)


def test_symmetrizer_annihilates_singlet():
    singlet = np.array([0, 1, -1, 0]) / np.sqrt(2)
    s = symmetrizer(2, 2)
    assert np.abs(s @ singlet).max() <= 1e-15
    assert np.linalg.matrix_rank(s) == 3


def test_symmetrizer_size_guard():
    with pytest.raises(SizeGuardError):
        symmetrizer(2, 13)


@pytest.mark.parametrize("d, n", [(2, 3), (3, 2), (3, 3)])
def test_embedding_consistency(d, n, rng):
    s = symmetrizer(d, n)
    v = SymmetricBasis(d, n).isometry()
    for psi in haar_random_states(d, 5, rng):
        full = tensor_power(psi, n)
        assert np.abs(s @ full - full).max() <= 1e-12
        assert np.abs(v.T @ full - embed_product_state(psi, n)).max() <= 1e-12


@pytest.mark.parametrize("d, n", [(2, 3), (3, 2), (3, 3), (2, 5)])
def test_reduction_matches_full_partial_trace(d, n, rng):
    state = random_symmetric_state(d, n, rng)
    full = state.to_full()
    red = reduce_single_particle(state)
    assert np.trace(red).real == pytest.approx(1.0, abs=1e-12)
    for keep in range(n):
        assert np.abs(partial_trace_full(full, d, n, keep) - red).max() <= 1e-12


def test_reduction_of_product_state(rng):
    psi = haar_random_state(3, rng)
    red = reduce_single_particle(SymmetricState.product(psi, 4))
    assert np.abs(red - projector(psi)).max() <= 1e-12


def test_reduction_of_maximally_mixed_pair():
    red = reduce_single_particle(SymmetricState.maximally_mixed(2, 2))
    assert np.abs(red - np.eye(2) / 2).max() <= 1e-15


def test_state_rejects_invalid_matrices():
    basis = SymmetricBasis(2, 2)
    with pytest.raises(DimensionError):
        SymmetricState(basis, np.eye(4) / 4)
    with pytest.raises(NotAStateError):
        SymmetricState(basis, np.eye(3))
    with pytest.raises(NotAStateError):
        SymmetricState(basis, np.diag([1.5, -0.5, 0.0]))


def test_decompose_frame_member(rng):
    frame = haar_random_states(2, 40, rng)
    state = SymmetricState.product(frame[7], 2)
    pm = pseudo_mixture_decompose(state, frame)
    assert pm.residual <= 1e-8
    assert pm.total_weight == pytest.approx(1.0, abs=1e-8)
    indicator = np.zeros(40)
    indicator[7] = 1.0
    exact = PseudoMixture(indicator, frame, 2)
    assert np.abs(exact.operator() - state.matrix).max() <= 1e-12


@pytest.mark.parametrize("d, n", [(2, 2), (2, 3), (3, 2)])
def test_decompose_random_state(d, n, rng):
    state = random_symmetric_state(d, n, rng)
    frame = haar_random_states(d, 2 * sym_dimension(d, n) ** 2, rng)
    pm = pseudo_mixture_decompose(state, frame)
    assert np.linalg.norm(pm.operator() - state.matrix) <= 1e-8
    assert abs(pm.total_weight - 1) <= 1e-8
    # reduction is linear, so it commutes with the decomposition
    assert np.abs(pm.single_particle() - reduce_single_particle(state)).max() <= 1e-10


def test_decompose_rank_deficient_frame(rng):
    state = random_symmetric_state(3, 2, rng)
    with pytest.raises(FrameRankError) as info:
        pseudo_mixture_decompose(state, haar_random_states(3, 10, rng))
    assert info.value.residual > 1e-8


def test_reduction_linearity_on_arbitrary_weights(rng):
    frame = haar_random_states(3, 12, rng)
    alphas = rng.standard_normal(12)
    alphas /= alphas.sum()
    pm = PseudoMixture(alphas, frame, 3)
    assert np.abs(reduce_operator(pm.operator(), 3, 3) - pm.single_particle()).max() <= 1e-10


def test_pseudo_mixture_channel(rng):
    state = random_symmetric_state(2, 2, rng)
    pm = pseudo_mixture_decompose(state, haar_random_states(2, 18, rng))
    red = reduce_single_particle(state)
    assert np.abs(apply_pseudo_mixture_channel(pm, 1.0) - red).max() <= 1e-8
    assert np.abs(apply_pseudo_mixture_channel(pm, 0.0) - np.eye(2) / 2).max() <= 1e-8
    assert np.abs(apply_pseudo_mixture_channel(pm, 0.4) - shrink_operator(red, 0.4)).max() <= 1e-8
