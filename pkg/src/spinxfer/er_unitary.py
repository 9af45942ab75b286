"""The 11x11 extended-receiver unitary as an ordered product of planar rotations.

Each of the 21 admissible index pairs (n, m) carries two angles: a kind-1
rotation exp(i phi gamma1) with gamma1 = sigma_x on (n, m), and a kind-2
rotation exp(i phi gamma2) with gamma2 = sigma_y on (n, m).  Indices are
1-based positions in the extended-receiver basis ``ER_ORDER``.

Every pair lies inside one excitation sector of that basis, so the product is
assembled sector by sector (a 4x4 and a 6x6 block) and the vacuum is untouched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import ER_ORDER, BasisCatalog, split_tail, ER_INDEX
from .evolution import BlockOperator

TWO_PI = 2.0 * np.pi

PAIRS: tuple[tuple[int, int], ...] = (
    (2, 3), (2, 5), (2, 8), (3, 5), (3, 8), (4, 6), (4, 7), (4, 9), (4, 10), (4, 11), (5, 8),
    (6, 7), (6, 9), (6, 10), (6, 11), (7, 9), (7, 10), (7, 11), (9, 10), (9, 11), (10, 11),
)
# vector layout: all kind-1 angles in pair order, then all kind-2 angles
PARAM_KEYS: tuple[tuple[int, int, int], ...] = tuple(
    (kind, n, m) for kind in (1, 2) for (n, m) in PAIRS
)
KEY_INDEX = {key: i for i, key in enumerate(PARAM_KEYS)}
N_PARAMS = len(PARAM_KEYS)

# 1-based ER positions belonging to the one- and two-excitation sectors
SECTOR_POSITIONS = (
    tuple(i + 1 for i, c in enumerate(ER_ORDER) if sum(c) == 1),
    tuple(i + 1 for i, c in enumerate(ER_ORDER) if sum(c) == 2),
)
_LOCAL = {pos: (s, j) for s, positions in enumerate(SECTOR_POSITIONS) for j, pos in enumerate(positions)}

ORDERINGS = ("canonical", "alternate", "canonical-swapped", "alternate-swapped")


class PhiError(ValueError):
    pass


@dataclass(frozen=True)
class PhiVector:
    """The 42 rotation angles, reduced to [0, 2pi)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.shape != (N_PARAMS,):
            raise PhiError(f"expected {N_PARAMS} angles, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise PhiError("angles must be finite")
        v = np.mod(v, TWO_PI)
        v[v >= TWO_PI] = 0.0
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls) -> "PhiVector":
        return cls(np.zeros(N_PARAMS))

    @classmethod
    def from_mapping(cls, angles: dict) -> "PhiVector":
        missing = set(PARAM_KEYS) - set(angles)
        extra = set(angles) - set(PARAM_KEYS)
        if missing or extra:
            raise PhiError(f"angle keys mismatch: missing {sorted(missing)}, unknown {sorted(extra)}")
        return cls(np.array([angles[k] for k in PARAM_KEYS]))

    def __getitem__(self, key: tuple[int, int, int]) -> float:
        return float(self.values[KEY_INDEX[key]])

    def items(self):
        return zip(PARAM_KEYS, self.values.tolist())


def _check_pair(n: int, m: int):
    if (n, m) not in PAIRS:
        raise PhiError(f"pair ({n},{m}) is not an admissible generator pair")


def elementary_rotation(kind: int, n: int, m: int, phi: float) -> np.ndarray:
    """exp(i phi gamma^(kind; n m)) as an 11x11 matrix."""
    _check_pair(n, m)
    if kind not in (1, 2):
        raise PhiError(f"kind must be 1 or 2, got {kind}")
    R = np.eye(11, dtype=complex)
    c, s = np.cos(phi), np.sin(phi)
    i, j = n - 1, m - 1
    if kind == 1:
        R[i, i], R[i, j], R[j, i], R[j, j] = c, 1j * s, 1j * s, c
    else:
        R[i, i], R[i, j], R[j, i], R[j, j] = c, s, -s, c
    return R


def factor_sequence(ordering: str = "canonical") -> list[int]:
    """Parameter indices in order of application (first entry acts first, i.e. is rightmost)."""
    if ordering not in ORDERINGS:
        raise PhiError(f"unknown ordering {ordering!r}; choose from {ORDERINGS}")
    pairs = list(PAIRS) if ordering.startswith("canonical") else list(reversed(PAIRS))
    kinds = (2, 1) if ordering.endswith("swapped") else (1, 2)
    return [KEY_INDEX[(k, n, m)] for (n, m) in pairs for k in kinds]


def _sector_factors(ordering: str):
    """Per sector: list of (param index, kind, local i, local j) in application order."""
    out = ([], [])
    for p in factor_sequence(ordering):
        kind, n, m = PARAM_KEYS[p]
        s, i = _LOCAL[n]
        _, j = _LOCAL[m]
        out[s].append((p, kind, i, j))
    return out


_FACTORS = {o: _sector_factors(o) for o in ORDERINGS}


def _rotate_rows(X: np.ndarray, kind: int, i: int, j: int, c: float, s: float):
    xi, xj = X[i].copy(), X[j]
    if kind == 1:
        X[i] = c * xi + 1j * s * xj
        X[j] = 1j * s * xi + c * xj
    else:
        X[i] = c * xi + s * xj
        X[j] = -s * xi + c * xj


def sector_blocks(phi, ordering: str = "canonical") -> tuple[np.ndarray, np.ndarray]:
    """The 4x4 one-excitation and 6x6 two-excitation blocks of U^(ER)."""
    values = phi.values if isinstance(phi, PhiVector) else np.asarray(phi, dtype=float)
    cos, sin = np.cos(values), np.sin(values)
    blocks = []
    for factors, dim in zip(_FACTORS[ordering], (4, 6)):
        U = np.eye(dim, dtype=complex)
        for p, kind, i, j in factors:
            _rotate_rows(U, kind, i, j, cos[p], sin[p])
        blocks.append(U)
    return blocks[0], blocks[1]


def sector_blocks_jacobian(phi, ordering: str = "canonical"):
    """Blocks of U^(ER) and their derivatives with respect to all 42 angles.

    Returns ``(U1, U2, dU1, dU2)`` with ``dU1`` of shape (42, 4, 4) and ``dU2`` of
    shape (42, 6, 6).  For a factor F_k = exp(i phi_k g_k) in U = P_k F_k S_{k-1},
    dU/dphi_k = P_k (i g_k) F_k S_{k-1}; i g_k only touches two rows.
    """
    values = phi.values if isinstance(phi, PhiVector) else np.asarray(phi, dtype=float)
    cos, sin = np.cos(values), np.sin(values)
    results = []
    for factors, dim in zip(_FACTORS[ordering], (4, 6)):
        K = len(factors)
        suffix = np.empty((K, dim, dim), dtype=complex)  # suffix[k] = F_k ... F_1
        U = np.eye(dim, dtype=complex)
        for k, (p, kind, i, j) in enumerate(factors):
            _rotate_rows(U, kind, i, j, cos[p], sin[p])
            suffix[k] = U
        dU = np.zeros((N_PARAMS, dim, dim), dtype=complex)
        prefix = np.eye(dim, dtype=complex)  # F_K ... F_{k+1}
        for k in range(K - 1, -1, -1):
            p, kind, i, j = factors[k]
            S = suffix[k]
            if kind == 1:
                gi, gj = 1j * S[j], 1j * S[i]
            else:
                gi, gj = S[j], -S[i]
            dU[p] = np.outer(prefix[:, i], gi) + np.outer(prefix[:, j], gj)
            # prefix <- prefix @ F_k: rotate columns i, j
            ci, cj = prefix[:, i].copy(), prefix[:, j]
            c, s = cos[p], sin[p]
            if kind == 1:
                prefix[:, i] = c * ci + 1j * s * cj
                prefix[:, j] = 1j * s * ci + c * cj
            else:
                prefix[:, i] = c * ci - s * cj
                prefix[:, j] = s * ci + c * cj
        results.append((U, dU))
    (U1, dU1), (U2, dU2) = results
    return U1, U2, dU1, dU2


def compose(phi, ordering: str = "canonical") -> np.ndarray:
    """U^(ER) as an 11x11 matrix over ``ER_ORDER``."""
    U1, U2 = sector_blocks(phi, ordering)
    U = np.zeros((11, 11), dtype=complex)
    U[0, 0] = 1.0
    for block, positions in zip((U1, U2), SECTOR_POSITIONS):
        idx = np.array(positions) - 1
        U[np.ix_(idx, idx)] = block
    return U


def compose_by_products(phi, ordering: str = "canonical") -> np.ndarray:
    """Reference product of full 11x11 factors; slow, kept for cross-checks."""
    values = phi.values if isinstance(phi, PhiVector) else np.asarray(phi, dtype=float)
    U = np.eye(11, dtype=complex)
    for p in factor_sequence(ordering):
        kind, n, m = PARAM_KEYS[p]
        U = elementary_rotation(kind, n, m, values[p]) @ U
    return U


def embed(u: np.ndarray, catalog: BasisCatalog) -> BlockOperator:
    """E^(S,TL) (x) u in the chain's sector bases (the last four sites are the extended receiver)."""
    if catalog.n_sites < 6:
        raise PhiError("embedding needs at least 6 sites")
    blocks = [np.ones((1, 1), dtype=complex)]
    for k in (1, 2):
        sector = catalog.sectors[k]
        heads, tails = [], []
        for cfg in sector:
            h, t = split_tail(cfg, 4)
            heads.append(h.bits)
            tails.append(ER_INDEX[t.bits])
        tails = np.array(tails)
        B = np.zeros((len(sector), len(sector)), dtype=complex)
        groups = {}
        for off, h in enumerate(heads):
            groups.setdefault(h, []).append(off)
        for offs in groups.values():
            offs = np.array(offs)
            B[np.ix_(offs, offs)] = u[np.ix_(tails[offs], tails[offs])]
        blocks.append(B)
    return BlockOperator(*blocks)
