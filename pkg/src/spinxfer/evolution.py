"""Sector propagators V(t) = exp(-iHt) from a one-off eigendecomposition."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import HamiltonianBlocks

DEFAULT_TIME = 58.9826


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SpectralData:
    """Eigenvalues and orthonormal eigenvectors of the 1- and 2-excitation blocks."""

    eigenvalues: tuple[np.ndarray, np.ndarray]
    eigenvectors: tuple[np.ndarray, np.ndarray]


@dataclass(frozen=True)
class BlockOperator:
    """Operator that is block diagonal over the 0/1/2-excitation sectors."""

    B0: np.ndarray
    B1: np.ndarray
    B2: np.ndarray

    @property
    def blocks(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.B0, self.B1, self.B2

    def __matmul__(self, other: "BlockOperator") -> "BlockOperator":
        return BlockOperator(*(a @ b for a, b in zip(self.blocks, other.blocks)))

    def dagger(self) -> "BlockOperator":
        return BlockOperator(*(b.conj().T for b in self.blocks))

    def unitarity_error(self) -> float:
        return max(np.abs(b.conj().T @ b - np.eye(b.shape[0])).max() for b in self.blocks)

    @classmethod
    def identity(cls, dims) -> "BlockOperator":
        return cls(*(np.eye(d, dtype=complex) for d in dims))


def eigendecompose(blocks: HamiltonianBlocks) -> SpectralData:
    vals, vecs = [], []
    for k, H in ((1, blocks.H1), (2, blocks.H2)):
        if np.abs(H - H.T).max() > 1e-12:
            raise EvolutionError(f"sector-{k} block is not symmetric")
        try:
            w, Q = np.linalg.eigh(H)
        except np.linalg.LinAlgError as exc:
            raise EvolutionError(f"eigh failed on the {H.shape[0]}x{H.shape[0]} sector-{k} block: {exc}") from exc
        vals.append(w)
        vecs.append(Q)
    return SpectralData(tuple(vals), tuple(vecs))


def propagator(spectral: SpectralData, t: float) -> BlockOperator:
    """exp(-iHt) per sector; the vacuum has zero energy so B0 = 1."""
    blocks = [np.ones((1, 1), dtype=complex)]
    for w, Q in zip(spectral.eigenvalues, spectral.eigenvectors):
        blocks.append((Q * np.exp(-1j * w * t)) @ Q.T)
    return BlockOperator(*blocks)


def propagator_columns(spectral: SpectralData, t: float, sector: int, columns) -> np.ndarray:
    """Selected columns of V(t) in one sector without forming the full block."""
    w = spectral.eigenvalues[sector - 1]
    Q = spectral.eigenvectors[sector - 1]
    return (Q * np.exp(-1j * w * t)) @ Q[columns].T
