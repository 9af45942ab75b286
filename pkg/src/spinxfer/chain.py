"""Chain geometry and the XX dipole-dipole Hamiltonian in the 0/1/2-excitation sectors.

Units: gamma^2 hbar = 1 and the bulk nearest-neighbour coupling is 1, so times
are measured in units of 1/delta.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import BasisCatalog

DEFAULT_N_SITES = 42
DEFAULT_DELTA_1 = 0.3005
DEFAULT_DELTA_2 = 0.5311


class ChainError(ValueError):
    pass


@dataclass(frozen=True)
class ChainSpec:
    n_sites: int = DEFAULT_N_SITES
    delta_1: float = DEFAULT_DELTA_1
    delta_2: float = DEFAULT_DELTA_2
    delta_bulk: float = 1.0
    symmetric: bool = True

    def __post_init__(self):
        if self.n_sites < 2:
            raise ChainError(f"chain needs at least 2 sites, got {self.n_sites}")
        for name in ("delta_1", "delta_2", "delta_bulk"):
            if not getattr(self, name) > 0:
                raise ChainError(f"{name} must be positive, got {getattr(self, name)}")
        if not self.symmetric:
            raise ChainError("only mirror-symmetric end couplings are supported")

    def nearest_neighbour(self) -> np.ndarray:
        """Couplings delta_i between sites i and i+1, i = 1..N-1."""
        n = self.n_sites
        d = np.full(n - 1, float(self.delta_bulk))
        d[0] = d[-1] = self.delta_1 * self.delta_bulk
        if n - 1 >= 4:
            d[1] = d[-2] = self.delta_2 * self.delta_bulk
        return d


@dataclass(frozen=True)
class HamiltonianBlocks:
    H0: np.ndarray
    H1: np.ndarray
    H2: np.ndarray

    def __iter__(self):
        return iter((self.H0, self.H1, self.H2))


def build_positions(spec: ChainSpec) -> np.ndarray:
    return positions_from_couplings(spec.nearest_neighbour())


def positions_from_couplings(delta: np.ndarray) -> np.ndarray:
    """Site coordinates whose nearest-neighbour inverse-cube couplings equal ``delta``."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise ChainError("nearest-neighbour couplings must be positive")
    return np.concatenate([[0.0], np.cumsum(delta ** (-1.0 / 3.0))])


def coupling_matrix(positions) -> np.ndarray:
    """All-pairs dipole couplings D_ij = |x_i - x_j|^-3 with zero diagonal."""
    x = np.asarray(positions, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ChainError("positions must be a 1-d array with at least two sites")
    if np.any(np.diff(x) <= 0):
        raise ChainError("positions must be strictly increasing (coincident sites make D singular)")
    r = np.abs(x[:, None] - x[None, :])
    np.fill_diagonal(r, np.inf)
    return r ** -3.0


def hamiltonian_blocks(D: np.ndarray, catalog: BasisCatalog) -> HamiltonianBlocks:
    """Sector blocks of H = sum_{i<j} D_ij (I_ix I_jx + I_iy I_jy).

    The flip-flop amplitude is D_ij / 2 since I_x I_x + I_y I_y = (I+ I- + I- I+) / 2.
    """
    D = np.asarray(D, dtype=float)
    n = catalog.n_sites
    if D.shape != (n, n):
        raise ChainError(f"coupling matrix shape {D.shape} does not match {n} sites")

    # one excitation at site j sits at offset n-1-j
    order1 = np.arange(n - 1, -1, -1)
    H1 = 0.5 * D[np.ix_(order1, order1)]
    np.fill_diagonal(H1, 0.0)

    pairs = [tuple(j for j, b in enumerate(c.bits) if b) for c in catalog.sectors[2]]
    index2 = {p: i for i, p in enumerate(pairs)}
    H2 = np.zeros((len(pairs), len(pairs)))
    for row, (p, q) in enumerate(pairs):
        for moving, fixed in ((p, q), (q, p)):
            for dest in range(n):
                if dest == p or dest == q:
                    continue
                col = index2[tuple(sorted((dest, fixed)))]
                H2[row, col] = 0.5 * D[moving, dest]
    return HamiltonianBlocks(np.zeros((1, 1)), H1, H2)
