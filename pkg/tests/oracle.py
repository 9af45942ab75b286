"""Brute-force reference: full 2^N Hilbert space, Pauli matrices, dense expm.

Nothing here uses the sector machinery of the package; the receiver unitary is
rebuilt from its generators with scipy's matrix exponential on the 16-dim
space of the last four sites.
"""
import numpy as np
from scipy.linalg import expm

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
I2 = np.eye(2)

ER_STATES = ("0000", "0001", "0010", "0011", "0100", "0101", "0110", "1000", "1001", "1010", "1100")
PAIRS = [(2, 3), (2, 5), (2, 8), (3, 5), (3, 8), (4, 6), (4, 7), (4, 9), (4, 10), (4, 11), (5, 8),
         (6, 7), (6, 9), (6, 10), (6, 11), (7, 9), (7, 10), (7, 11), (9, 10), (9, 11), (10, 11)]


def site_op(op, i, n):
    """op on site i (0-based, site 0 is the most significant bit)."""
    out = np.ones((1, 1))
    for k in range(n):
        out = np.kron(out, op if k == i else I2)
    return out


def positions(n, d1=0.3005, d2=0.5311):
    d = np.ones(n - 1)
    d[0] = d[-1] = d1
    if n - 1 >= 4:
        d[1] = d[-2] = d2
    return np.concatenate([[0.0], np.cumsum(d ** (-1 / 3))])


def dipolar(x):
    n = len(x)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = abs(x[i] - x[j]) ** -3
    return D


def xx_hamiltonian(D):
    """sum_{i<j} D_ij (Ix Ix + Iy Iy) with I = sigma/2."""
    n = D.shape[0]
    H = np.zeros((2 ** n, 2 ** n), dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            H += D[i, j] * (site_op(X, i, n) @ site_op(X, j, n) + site_op(Y, i, n) @ site_op(Y, j, n)) / 4
    return H


def er_generator(kind, n, m):
    """sigma_x (kind 1) or sigma_y (kind 2) between ER states n and m, on 16 dims."""
    a, b = int(ER_STATES[n - 1], 2), int(ER_STATES[m - 1], 2)
    G = np.zeros((16, 16), dtype=complex)
    if kind == 1:
        G[a, b] = G[b, a] = 1
    else:
        G[a, b], G[b, a] = -1j, 1j
    return G


def er_unitary(phi_by_key, ordering="canonical"):
    """Product of exp(i phi G); the first factor applied is (2,3) kind 1 for canonical."""
    pairs = PAIRS if ordering.startswith("canonical") else PAIRS[::-1]
    kinds = (2, 1) if ordering.endswith("swapped") else (1, 2)
    U = np.eye(16, dtype=complex)
    for n, m in pairs:
        for k in kinds:
            U = expm(1j * phi_by_key[(k, n, m)] * er_generator(k, n, m)) @ U
    return U


def partial_trace_keep_last(rho, n, keep):
    """Reduce an n-qubit density matrix onto its last ``keep`` qubits."""
    dk = 2 ** keep
    r = rho.reshape(2 ** (n - keep), dk, 2 ** (n - keep), dk)
    return np.einsum("aiaj->ij", r)


def receiver_state(rho_s, n, t, phi_by_key, ordering="canonical", D=None):
    D = dipolar(positions(n)) if D is None else D
    H = xx_hamiltonian(D)
    V = expm(-1j * H * t)
    rest = np.zeros((2 ** (n - 2), 2 ** (n - 2)))
    rest[0, 0] = 1
    rho0 = np.kron(rho_s, rest)
    W = np.kron(np.eye(2 ** (n - 4)), er_unitary(phi_by_key, ordering)) @ V
    return partial_trace_keep_last(W @ rho0 @ W.conj().T, n, 2)


def random_state(rng, dim=4, rank=None):
    rank = rank or dim
    A = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


def phi_dict(values):
    keys = [(k, n, m) for k in (1, 2) for (n, m) in PAIRS]
    return dict(zip(keys, values))
