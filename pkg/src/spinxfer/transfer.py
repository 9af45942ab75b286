"""From the rotation angles to the receiver's density matrix and transfer coefficients.

The environment (transmission line and extended receiver) starts in the
vacuum, so only the four columns of W fed by sender states |i1 i2 0...0> ever
matter.  ``TransferModel`` precomputes the corresponding columns of V(t) once;
everything downstream is a few small matrix products with the U^(ER) blocks.

Two-qubit matrices use the basis (00, 01, 10, 11) with the first bit on the
lower-numbered site.  Coefficient arrays ``a[n][i]`` etc. use index 0 for the
one-excitation state 01 and index 1 for 10.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .basis import ER_INDEX, ER_ORDER, BasisCatalog, split_tail
from .chain import ChainError, ChainSpec, build_positions, coupling_matrix, hamiltonian_blocks
from .er_unitary import SECTOR_POSITIONS, compose, embed, sector_blocks, sector_blocks_jacobian
from .evolution import DEFAULT_TIME, BlockOperator, SpectralData, eigendecompose, propagator, propagator_columns

TWO_QUBIT = ("00", "01", "10", "11")
ONE_EXC = ("01", "10")


def excitations(label: str) -> int:
    return label.count("1")


@dataclass(frozen=True)
class TransferCoefficients:
    """Complex factors linking sender and receiver coherences.

    ``a``, ``b``, ``c`` are indexed ``[n][i]`` and ``f`` is indexed ``[n][m]``
    with 0 <-> 01 and 1 <-> 10.  ``f_diag`` are the two diagonal entries of ``f``.
    """

    d: complex
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    f: np.ndarray
    f_11_11: complex

    @property
    def f_diag(self) -> np.ndarray:
        return np.diag(self.f).copy()

    @classmethod
    def from_base(cls, g: np.ndarray) -> "TransferCoefficients":
        """Build from the packed vector (a00, a01, a10, a11, b00, b01, b10, b11, d, f_11_11)."""
        g = np.asarray(g, dtype=complex)
        a = g[0:4].reshape(2, 2)
        b = g[4:8].reshape(2, 2)
        d = complex(g[8])
        c = a.conj() * d
        f = np.outer(a[0].conj(), a[1])
        return cls(d=d, a=a, b=b, c=c, f=f, f_11_11=complex(g[9]))

    def base(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), self.b.ravel(), [self.d, self.f_11_11]])

    def as_dict(self) -> dict:
        out = {"d": self.d, "f_11_11": self.f_11_11}
        for name in ("a", "b", "c", "f"):
            arr = getattr(self, name)
            for r, rl in enumerate(ONE_EXC):
                for s, sl in enumerate(ONE_EXC):
                    out[f"{name}[{rl}][{sl}]"] = complex(arr[r, s])
        return out


def coherence_order(row: str, col: str) -> int:
    """Order of entry (row; col): excitations of the column minus those of the row."""
    return excitations(col) - excitations(row)


def coherence_decompose(rho) -> dict[int, np.ndarray]:
    """Split a 4x4 matrix into its coherence-order components -2..2."""
    rho = np.asarray(rho, dtype=complex)
    order = np.array([[coherence_order(r, c) for c in TWO_QUBIT] for r in TWO_QUBIT])
    return {n: np.where(order == n, rho, 0) for n in range(-2, 3)}


def is_physical(rho, tol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    return (
        np.abs(rho - rho.conj().T).max() < 1e-12
        and abs(np.trace(rho) - 1) < 1e-12
        and np.linalg.eigvalsh(rho).min() >= -tol
    )


class TransferModel:
    """Chain + propagation time, with everything that does not depend on the angles cached."""

    def __init__(self, spec: ChainSpec | None = None, t: float = DEFAULT_TIME,
                 *, catalog: BasisCatalog | None = None, spectral: SpectralData | None = None):
        self.spec = spec or ChainSpec()
        if self.spec.n_sites < 6:
            raise ChainError(f"transfer needs at least 6 sites (2 sender + 4 extended receiver), got {self.spec.n_sites}")
        self.t = float(t)
        self.catalog = catalog or BasisCatalog(self.spec.n_sites)
        if spectral is None:
            D = coupling_matrix(build_positions(self.spec))
            spectral = eigendecompose(hamiltonian_blocks(D, self.catalog))
        self.spectral = spectral
        self._prepare()

    @classmethod
    def default(cls) -> "TransferModel":
        return cls(ChainSpec(), DEFAULT_TIME)

    def at_time(self, t: float) -> "TransferModel":
        return TransferModel(self.spec, t, catalog=self.catalog, spectral=self.spectral)

    @property
    def n_sites(self) -> int:
        return self.catalog.n_sites

    def sender_config(self, label: str) -> str:
        return label + "0" * (self.n_sites - 2)

    def _prepare(self):
        n = self.n_sites
        cat = self.catalog
        # columns of V for the sender inputs, per sector
        self.cols1 = propagator_columns(
            self.spectral, self.t, 1, [cat.offset(self.sender_config(l)) for l in ONE_EXC]
        )  # (N, 2)
        self.col2 = propagator_columns(self.spectral, self.t, 2, [cat.offset(self.sender_config("11"))])[:, 0]

        head0 = "0" * (n - 4)
        one_tails = [ER_ORDER[p - 1] for p in SECTOR_POSITIONS[0]]
        two_tails = [ER_ORDER[p - 1] for p in SECTOR_POSITIONS[1]]
        bits = lambda t: "".join(map(str, t))
        heads1 = ["".join("1" if j == h else "0" for j in range(n - 4)) for h in range(n - 4)]

        self.v = np.array([[self.cols1[cat.offset(head0 + bits(t)), i] for t in one_tails] for i in range(2)])
        self.p = np.array([[self.cols1[cat.offset(h + "0000"), i] for h in heads1] for i in range(2)])
        self.w = np.array([self.col2[cat.offset(head0 + bits(t))] for t in two_tails])
        self.M = np.array([[self.col2[cat.offset(h + bits(t))] for t in one_tails] for h in heads1])

        loc1 = {bits(t): j for j, t in enumerate(one_tails)}
        loc2 = {bits(t): j for j, t in enumerate(two_tails)}
        self._recv1 = [loc1["00" + r] for r in ONE_EXC]
        self._anc1 = [loc1["0100"], loc1["1000"]]
        self._anc2 = [[loc2["01" + r] for r in ONE_EXC], [loc2["10" + r] for r in ONE_EXC]]
        self._d2 = loc2["0011"]

    # --- fast coefficient path -------------------------------------------------

    def _base_from_linear(self, A, MU, Wd, dA=None, dMU=None, dWd=None):
        r1, anc1, anc2 = self._recv1, self._anc1, self._anc2
        g = np.empty(10, dtype=complex)
        g[0:4] = A[:, r1].T.conj().ravel()  # a[n][i] = conj(A_i[n])
        for n in range(2):
            for i in range(2):
                g[4 + 2 * n + i] = (self.p[i] @ MU[:, r1[n]].conj()
                                    + sum(A[i, anc1[j]] * Wd[anc2[j][n]].conj() for j in range(2)))
        g[8] = Wd[self._d2].conj()
        g[9] = (MU[:, r1[0]] @ MU[:, r1[1]].conj()
                + sum(Wd[anc2[j][0]] * Wd[anc2[j][1]].conj() for j in range(2)))
        if dA is None:
            return g
        P = dA.shape[0]
        dg = np.empty((P, 10), dtype=complex)
        dg[:, 0:4] = np.conj(dA[:, :, r1]).transpose(0, 2, 1).reshape(P, 4)
        for n in range(2):
            for i in range(2):
                val = dMU[:, :, r1[n]].conj() @ self.p[i]
                for j in range(2):
                    val = val + dA[:, i, anc1[j]] * Wd[anc2[j][n]].conj() + A[i, anc1[j]] * dWd[:, anc2[j][n]].conj()
                dg[:, 4 + 2 * n + i] = val
        dg[:, 8] = dWd[:, self._d2].conj()
        val = dMU[:, :, r1[0]] @ MU[:, r1[1]].conj() + dMU[:, :, r1[1]].conj() @ MU[:, r1[0]]
        for j in range(2):
            x, y = anc2[j]
            val = val + dWd[:, x] * Wd[y].conj() + Wd[x] * dWd[:, y].conj()
        dg[:, 9] = val
        return g, dg

    def base_from_blocks(self, U1: np.ndarray, U2: np.ndarray) -> np.ndarray:
        A = self.v @ U1.T          # A[i, tau] = W[0 tau; i 0]
        MU = self.M @ U1.T         # MU[h, tau] = W[h tau; 11 0]
        Wd = U2 @ self.w           # Wd[tau2] = W[0 tau2; 11 0]
        return self._base_from_linear(A, MU, Wd)

    def base_vector(self, phi, ordering: str = "canonical") -> np.ndarray:
        """Packed coefficients (a00, a01, a10, a11, b00, b01, b10, b11, d, f_11_11)."""
        return self.base_from_blocks(*sector_blocks(phi, ordering))

    def base_jacobian(self, phi, ordering: str = "canonical") -> tuple[np.ndarray, np.ndarray]:
        """Packed coefficients and their complex derivatives, shape (42, 10)."""
        U1, U2, dU1, dU2 = sector_blocks_jacobian(phi, ordering)
        A = self.v @ U1.T
        MU = self.M @ U1.T
        Wd = U2 @ self.w
        dA = np.einsum("ik,pjk->pij", self.v, dU1)
        dMU = np.einsum("hk,pjk->phj", self.M, dU1)
        dWd = np.einsum("pjk,k->pj", dU2, self.w)
        return self._base_from_linear(A, MU, Wd, dA, dMU, dWd)

    def coefficients(self, phi, ordering: str = "canonical") -> TransferCoefficients:
        return TransferCoefficients.from_base(self.base_vector(phi, ordering))

    # --- general path through the full W ------------------------------------------

    def total_W(self, phi, ordering: str = "canonical") -> BlockOperator:
        """W = (E (x) U^(ER)) V(t) as full sector blocks (dense; for checks and small chains)."""
        return embed(compose(phi, ordering), self.catalog) @ propagator(self.spectral, self.t)

    @cached_property
    def _env_layout(self):
        """Per sector: environment index and receiver index of every configuration."""
        env_index: dict[tuple, int] = {}
        layout = []
        for sector in self.catalog.sectors:
            e_idx, r_idx = [], []
            for cfg in sector:
                env, rec = split_tail(cfg, 2)
                e_idx.append(env_index.setdefault(env.bits, len(env_index)))
                r_idx.append(2 * rec.bits[0] + rec.bits[1])
            layout.append((np.array(e_idx), np.array(r_idx)))
        return layout, len(env_index)

    def kraus_operators(self, W: BlockOperator) -> np.ndarray:
        """K[e, n, I] = W[e n; I 0...0] for every environment configuration e."""
        layout, n_env = self._env_layout
        K = np.zeros((n_env, 4, 4), dtype=complex)
        for I, label in enumerate(TWO_QUBIT):
            k, off = self.catalog.index_of(self.sender_config(label))
            col = W.blocks[k][:, off]
            e_idx, r_idx = layout[k]
            K[e_idx, r_idx, I] = col
        return K

    def sender_kraus(self, phi, ordering: str = "canonical") -> np.ndarray:
        """Kraus operators computed from the four sender columns only (no dense W)."""
        layout, n_env = self._env_layout
        u = compose(phi, ordering)
        K = np.zeros((n_env, 4, 4), dtype=complex)
        K[layout[0][0], layout[0][1], 0] = 1.0
        heads, tails = self._head_tail
        for k, cols in ((1, self.cols1), (2, self.col2[:, None])):
            labels = ONE_EXC if k == 1 else ("11",)
            e_idx, r_idx = layout[k]
            for c, label in enumerate(labels):
                col = _apply_tail_unitary(cols[:, c], heads[k], tails[k], u)
                K[e_idx, r_idx, TWO_QUBIT.index(label)] = col
        return K

    @cached_property
    def _head_tail(self):
        heads, tails = {}, {}
        for k in (1, 2):
            hid, tid, seen = [], [], {}
            for cfg in self.catalog.sectors[k]:
                h, t = split_tail(cfg, 4)
                hid.append(seen.setdefault(h.bits, len(seen)))
                tid.append(ER_INDEX[t.bits])
            heads[k], tails[k] = np.array(hid), np.array(tid)
        return heads, tails


def _apply_tail_unitary(vec, head_ids, tail_ids, u):
    X = np.zeros((head_ids.max() + 1, 11), dtype=complex)
    X[head_ids, tail_ids] = vec
    return (X @ u.T)[head_ids, tail_ids]


def transfer_tensor(K: np.ndarray) -> np.ndarray:
    """T[n, m, I, J] = sum_e K[e, n, I] conj(K[e, m, J])."""
    return np.einsum("eni,emj->nmij", K, K.conj())


def apply_kraus(K: np.ndarray, rho_s) -> np.ndarray:
    rho_s = np.asarray(rho_s, dtype=complex)
    return np.einsum("eni,ij,emj->nm", K, rho_s, K.conj())


def kraus_completeness_error(K: np.ndarray) -> float:
    S = np.einsum("eni,enj->ij", K.conj(), K)
    return float(np.abs(S - np.eye(4)).max())


def receiver_state(rho_s, model: TransferModel, phi=None, ordering: str = "canonical", W: BlockOperator | None = None):
    """Partial trace over sites 1..N-2 of W (rho_S (x) vacuum) W^dagger."""
    K = model.kraus_operators(W) if W is not None else model.sender_kraus(phi, ordering)
    return apply_kraus(K, rho_s)


def receiver_from_coefficients(rho_s, coef: TransferCoefficients) -> dict[tuple[str, str], complex]:
    """Upper off-diagonal receiver entries predicted by the coefficient structure."""
    r = np.asarray(rho_s, dtype=complex)
    ix = {l: i for i, l in enumerate(TWO_QUBIT)}
    s = lambda x, y: r[ix[x], ix[y]]
    out = {("00", "11"): coef.d * s("00", "11")}
    for n, nl in enumerate(ONE_EXC):
        out[("00", nl)] = sum(coef.a[n, i] * s("00", il) + coef.b[n, i] * s(il, "11") for i, il in enumerate(ONE_EXC))
        out[(nl, "11")] = sum(coef.c[n, i] * s(il, "11") for i, il in enumerate(ONE_EXC))
    out[("01", "10")] = (sum(coef.f[n, m] * s(nl, ml) for n, nl in enumerate(ONE_EXC) for m, ml in enumerate(ONE_EXC))
                         + coef.f_11_11 * s("11", "11"))
    return out
