import numpy as np
import pytest
from scipy.linalg import expm

import oracle
from spinxfer.basis import BasisCatalog
from spinxfer.chain import ChainSpec, HamiltonianBlocks, build_positions, coupling_matrix, hamiltonian_blocks
from spinxfer.evolution import (
    BlockOperator,
    EvolutionError,
    eigendecompose,
    propagator,
    propagator_columns,
)


def spectral_for(n):
    cat = BasisCatalog(n)
    blocks = hamiltonian_blocks(coupling_matrix(build_positions(ChainSpec(n_sites=n))), cat)
    return cat, blocks, eigendecompose(blocks)


def test_propagator_matches_expm():
    cat, blocks, spec = spectral_for(8)
    V = propagator(spec, 3.1)
    assert np.abs(V.B1 - expm(-3.1j * blocks.H1)).max() < 1e-12
    assert np.abs(V.B2 - expm(-3.1j * blocks.H2)).max() < 1e-12
    assert V.B0[0, 0] == 1


def test_propagator_matches_full_space():
    n, t = 6, 1.7
    cat, _, spec = spectral_for(n)
    V = propagator(spec, t)
    full = expm(-1j * t * oracle.xx_hamiltonian(oracle.dipolar(oracle.positions(n))))
    for k, B in ((1, V.B1), (2, V.B2)):
        idx = [int(str(c), 2) for c in cat.sectors[k]]
        assert np.abs(B - full[np.ix_(idx, idx)]).max() < 1e-12


def test_unitarity_n42():
    _, _, spec = spectral_for(42)
    V = propagator(spec, 58.9826)
    assert V.unitarity_error() < 1e-12


def test_zero_time_is_identity():
    _, _, spec = spectral_for(7)
    V = propagator(spec, 0.0)
    assert np.abs(V.B1 - np.eye(7)).max() < 1e-12
    assert np.abs(V.B2 - np.eye(21)).max() < 1e-12


def test_group_property():
    _, _, spec = spectral_for(7)
    a = propagator(spec, 0.7) @ propagator(spec, 1.1)
    b = propagator(spec, 1.8)
    assert max(np.abs(x - y).max() for x, y in zip(a.blocks, b.blocks)) < 1e-12
    back = propagator(spec, 1.8) @ propagator(spec, 1.8).dagger()
    assert back.unitarity_error() < 1e-12


def test_columns_match_full_block():
    _, _, spec = spectral_for(9)
    V = propagator(spec, 2.5)
    cols = [0, 4, 8]
    assert np.abs(propagator_columns(spec, 2.5, 1, cols) - V.B1[:, cols]).max() < 1e-14
    assert np.abs(propagator_columns(spec, 2.5, 2, [3, 10]) - V.B2[:, [3, 10]]).max() < 1e-14


def test_rejects_nonsymmetric_block():
    H = np.array([[0.0, 1.0], [0.5, 0.0]])
    with pytest.raises(EvolutionError):
        eigendecompose(HamiltonianBlocks(np.zeros((1, 1)), H, np.eye(1)))


def test_block_identity():
    I = BlockOperator.identity((1, 3, 3))
    assert I.unitarity_error() == 0
