"""Target operations on the receiver's coherences, as residuals over transfer coefficients.

Residuals act on the packed coefficient vector
``g = (a00, a01, a10, a11, b00, b01, b10, b11, d, f_11_11)`` (see
``TransferCoefficients.base``).  Every residual map is real-linear in ``g``,
so applying it to dg/dphi gives the Jacobian directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transfer import ONE_EXC, TWO_QUBIT, TransferCoefficients

KINDS = ("restore", "zero1", "zero2", "zero3", "rearrange", "lincomb", "linsys")

# power-series ratios: a[01][.], b[01][.], a[10][.], b[10][.], d  per unit alpha
EXP_SERIES_RATIOS = (1, 1 / 2, 1 / 6, 1 / 24, -1, 1 / 2, -1 / 6, 1 / 24, 1 / 120)
DEFAULT_LINSYS_A = ((0.4, 0.3), (0.6, 0.2))

BASE_NAMES = ("a[01][01]", "a[01][10]", "a[10][01]", "a[10][10]",
              "b[01][01]", "b[01][10]", "b[10][01]", "b[10][10]", "d", "f_11_11")
_A00, _A01, _A10, _A11, _B00, _B01, _B10, _B11, _D, _F11 = range(10)
_RESTORE = [_A01, _A10, _B00, _B01, _B10, _B11, _F11]
_LINCOMB = [_A00, _A01, _B00, _B01, _A10, _A11, _B10, _B11, _D]
_SELECT = {
    "restore": _RESTORE,
    "zero1": _RESTORE + [_A00],
    "zero2": _RESTORE + [_A11],
    "zero3": _RESTORE + [_D],
    "rearrange": [_A00, _A11, _B00, _B01, _B10, _B11, _F11],
}


class OperationError(ValueError):
    pass


@dataclass(frozen=True)
class OperationSpec:
    kind: str
    A: np.ndarray | None = None
    ratios: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise OperationError(f"unknown operation {self.kind!r}; choose from {KINDS}")
        if self.kind == "linsys":
            A = np.array(DEFAULT_LINSYS_A if self.A is None else self.A, dtype=float)
            if A.shape != (2, 2) or not np.all(np.isfinite(A)):
                raise OperationError("linsys needs a finite real 2x2 matrix A")
            if abs(np.linalg.det(A)) < 1e-12:
                raise OperationError(f"linsys matrix is singular: {A.tolist()}")
            object.__setattr__(self, "A", A)
        if self.kind == "lincomb":
            r = np.array(EXP_SERIES_RATIOS if self.ratios is None else self.ratios, dtype=complex)
            if r.shape != (9,) or not np.all(np.isfinite(r)) or not np.any(r):
                raise OperationError("lincomb needs nine finite target ratios, not all zero")
            object.__setattr__(self, "ratios", r)

    def to_dict(self) -> dict:
        out = {"name": self.kind}
        if self.A is not None:
            out["A"] = self.A.tolist()
        if self.ratios is not None:
            out["ratios"] = [[z.real, z.imag] for z in self.ratios]
        return out


@dataclass
class ResidualReport:
    residuals: np.ndarray
    norm: float
    objective: float
    aux: complex | None = None
    survivors: dict = field(default_factory=dict)


def _lincomb_alpha(spec: OperationSpec, g):
    t = spec.ratios
    G = g[..., _LINCOMB]
    return (G @ t.conj()) / np.vdot(t, t).real


def _linsys_matrix(spec: OperationSpec, g):
    a = g[..., 0:4].reshape(g.shape[:-1] + (2, 2))
    return a @ spec.A


def _linsys_c(S):
    d1, d2 = S[..., 0, 0], S[..., 1, 1]
    # least squares over |d1-c|^2 + |d2-c|^2 + Im(c)^2
    return (d1.real + d2.real) / 2 + 1j * (d1.imag + d2.imag) / 3


def complex_residuals(spec: OperationSpec, g: np.ndarray) -> np.ndarray:
    """Complex residual vector(s); ``g`` may carry leading batch axes."""
    g = np.asarray(g)
    kind = spec.kind
    if kind in _SELECT:
        return g[..., _SELECT[kind]]
    if kind == "lincomb":
        alpha = _lincomb_alpha(spec, g)
        return g[..., _LINCOMB] - alpha[..., None] * spec.ratios
    S = _linsys_matrix(spec, g)
    c = _linsys_c(S)
    return np.stack([S[..., 0, 1], S[..., 1, 0], S[..., 0, 0] - c, S[..., 1, 1] - c, c.imag + 0j], axis=-1)


def residual_names(spec: OperationSpec) -> list[str]:
    if spec.kind in _SELECT:
        return [BASE_NAMES[i] for i in _SELECT[spec.kind]]
    if spec.kind == "lincomb":
        return [f"{BASE_NAMES[i]} - ratio*alpha" for i in _LINCOMB]
    return ["(aA)[1][2]", "(aA)[2][1]", "(aA)[1][1] - c", "(aA)[2][2] - c", "Im(c)"]


def implied_zeros(spec: OperationSpec) -> list[str]:
    """Coefficients forced to vanish by the residual constraints through c = conj(a) d and f = conj(a) a."""
    return {
        "restore": ["c[01][10]", "c[10][01]", "f[01][01]", "f[10][10]", "f[10][01]"],
        "zero1": ["c[01][10]", "c[10][01]", "f[01][01]", "f[10][10]", "f[10][01]", "c[01][01]", "f[01][10]"],
        "zero2": ["c[01][10]", "c[10][01]", "f[01][01]", "f[10][10]", "f[10][01]", "c[10][10]", "f[01][10]"],
        "zero3": ["c[01][10]", "c[10][01]", "f[01][01]", "f[10][10]", "f[10][01]", "c[01][01]", "c[10][10]"],
        "rearrange": ["c[01][01]", "c[10][10]", "f[01][01]", "f[10][10]", "f[01][10]"],
    }.get(spec.kind, [])


def real_residuals(spec: OperationSpec, g: np.ndarray) -> np.ndarray:
    r = complex_residuals(spec, g)
    return np.concatenate([r.real, r.imag], axis=-1)


def aux_value(spec: OperationSpec, g: np.ndarray) -> complex | None:
    if spec.kind == "lincomb":
        return complex(_lincomb_alpha(spec, np.asarray(g)))
    if spec.kind == "linsys":
        return complex(_linsys_c(_linsys_matrix(spec, np.asarray(g))))
    return None


def surviving_factors(spec: OperationSpec, coef: TransferCoefficients) -> dict[str, complex]:
    """Scale factors that carry sender data to the receiver under the operation."""
    a, c, f, d = coef.a, coef.c, coef.f, coef.d
    kind = spec.kind
    if kind == "restore":
        names = {"a[01][01]": a[0, 0], "a[10][10]": a[1, 1], "c[01][01]": c[0, 0],
                 "c[10][10]": c[1, 1], "f[01][10]": f[0, 1], "d": d}
    elif kind == "zero1":
        names = {"a[10][10]": a[1, 1], "c[10][10]": c[1, 1], "d": d}
    elif kind == "zero2":
        names = {"a[01][01]": a[0, 0], "c[01][01]": c[0, 0], "d": d}
    elif kind == "zero3":
        names = {"a[01][01]": a[0, 0], "a[10][10]": a[1, 1], "f[01][10]": f[0, 1]}
    elif kind == "rearrange":
        names = {"a[01][10]": a[0, 1], "a[10][01]": a[1, 0], "c[01][10]": c[0, 1],
                 "c[10][01]": c[1, 0], "f[10][01]": f[1, 0], "d": d}
    else:
        names = {}
    return {k: complex(v) for k, v in names.items()}


def objective(spec: OperationSpec, coef: TransferCoefficients) -> float:
    if spec.kind == "lincomb":
        return abs(aux_value(spec, coef.base()))
    if spec.kind == "linsys":
        return aux_value(spec, coef.base()).real
    return float(sum(abs(v) for v in surviving_factors(spec, coef).values()))


# surviving factors as products over packed entries: ("a", i), ("d",), ("c", i) = conj(a_i) d,
# ("f", i, j) = conj(a_i) a_j; must match surviving_factors
_SURVIVOR_TERMS = {
    "restore": [("a", _A00), ("a", _A11), ("c", _A00), ("c", _A11), ("f", _A00, _A11), ("d",)],
    "zero1": [("a", _A11), ("c", _A11), ("d",)],
    "zero2": [("a", _A00), ("c", _A00), ("d",)],
    "zero3": [("a", _A00), ("a", _A11), ("f", _A00, _A11)],
    "rearrange": [("a", _A01), ("a", _A10), ("c", _A01), ("c", _A10), ("f", _A01, _A10), ("d",)],
}


def objective_gradient(spec: OperationSpec, g: np.ndarray, dg: np.ndarray) -> tuple[float, np.ndarray]:
    """Objective and its gradient, given packed coefficients ``g`` and their derivatives ``dg`` (P, 10)."""
    if spec.kind == "lincomb":
        alpha = _lincomb_alpha(spec, g)
        return abs(alpha), (np.conj(alpha) * _lincomb_alpha(spec, dg)).real / max(abs(alpha), 1e-300)
    if spec.kind == "linsys":
        return _linsys_c(_linsys_matrix(spec, g)).real, _linsys_c(_linsys_matrix(spec, dg)).real
    value, grad = 0.0, np.zeros(dg.shape[0])
    for term in _SURVIVOR_TERMS[spec.kind]:
        if term[0] == "a":
            z, dz = g[term[1]], dg[:, term[1]]
        elif term[0] == "d":
            z, dz = g[_D], dg[:, _D]
        elif term[0] == "c":
            i = term[1]
            z = np.conj(g[i]) * g[_D]
            dz = np.conj(dg[:, i]) * g[_D] + np.conj(g[i]) * dg[:, _D]
        else:
            i, j = term[1], term[2]
            z = np.conj(g[i]) * g[j]
            dz = np.conj(dg[:, i]) * g[j] + np.conj(g[i]) * dg[:, j]
        value += abs(z)
        # d|z| = Re(conj(z) dz) / |z|; zero factors contribute no direction
        if abs(z) > 0:
            grad += (np.conj(z) * dz).real / abs(z)
    return float(value), grad


def residual(spec: OperationSpec, coef: TransferCoefficients) -> ResidualReport:
    g = coef.base()
    r = complex_residuals(spec, g)
    return ResidualReport(
        residuals=r,
        norm=float(np.linalg.norm(r)),
        objective=objective(spec, coef),
        aux=aux_value(spec, g),
        survivors=surviving_factors(spec, coef),
    )


# --- verification on receiver states -------------------------------------------------

_IX = {l: i for i, l in enumerate(TWO_QUBIT)}


def _entry(rho, row: str, col: str) -> complex:
    return complex(rho[_IX[row], _IX[col]])


def _upper_state(entries: dict) -> np.ndarray:
    """Hermitian 4x4 matrix with the given upper off-diagonal entries (zero diagonal)."""
    rho = np.zeros((4, 4), dtype=complex)
    for (r, c), v in entries.items():
        rho[_IX[r], _IX[c]] = v
        rho[_IX[c], _IX[r]] = np.conj(v)
    return rho


def monomial_sender(x: float, diag=(0.25, 0.25, 0.25, 0.25), coherence_0110: complex = 0.0) -> np.ndarray:
    """Sender matrix with the first/second-order entries set to x, x^2, ..., x^5."""
    rho = _upper_state({("00", "01"): x, ("00", "10"): x ** 2, ("01", "11"): x ** 3,
                        ("10", "11"): x ** 4, ("00", "11"): x ** 5, ("01", "10"): coherence_0110})
    rho[np.diag_indices(4)] = diag
    return rho


def linsys_sender(b, diag=(0.4, 0.2, 0.2, 0.2), coherence_0011: complex = 0.0) -> np.ndarray:
    """Sender matrix carrying the right-hand side b in rho_{00;01}, rho_{00;10}."""
    rho = _upper_state({("00", "01"): b[0], ("00", "10"): b[1], ("00", "11"): coherence_0011})
    rho[np.diag_indices(4)] = diag
    return rho


def _single_entry_probes():
    probes = []
    for r, c in (("00", "01"), ("00", "10"), ("01", "11"), ("10", "11"), ("00", "11"), ("01", "10")):
        probes.append(((r, c), _upper_state({(r, c): 0.1})))
    return probes


@dataclass
class VerificationReport:
    passed: bool
    checks: list = field(default_factory=list)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c["ok"]]


def verify_application(spec: OperationSpec, channel, coef: TransferCoefficients, tol: float = 1e-6,
                       x: float = 0.1) -> VerificationReport:
    """Check the receiver pattern an operation promises by running probe states through ``channel``.

    ``channel`` maps a 4x4 sender matrix to the 4x4 receiver matrix (it must be
    the actual pipeline, not the coefficient formulas).
    """
    checks = []

    def check(name, got, want):
        err = abs(got - want)
        checks.append({"name": name, "got": complex(got), "want": complex(want), "error": float(err), "ok": err < tol})

    kind = spec.kind
    a, c, d, f = coef.a, coef.c, coef.d, coef.f
    if kind in ("restore", "zero1", "zero2", "zero3", "rearrange"):
        if kind == "rearrange":
            routes = {("00", "01"): [(("00", "10"), a[1, 0])], ("00", "10"): [(("00", "01"), a[0, 1])],
                      ("01", "11"): [(("10", "11"), c[1, 0])], ("10", "11"): [(("01", "11"), c[0, 1])],
                      ("00", "11"): [(("00", "11"), d)], ("01", "10"): [(("01", "10"), f[1, 0])]}
        else:
            routes = {("00", "01"): [(("00", "01"), a[0, 0])], ("00", "10"): [(("00", "10"), a[1, 1])],
                      ("01", "11"): [(("01", "11"), c[0, 0])], ("10", "11"): [(("10", "11"), c[1, 1])],
                      ("00", "11"): [(("00", "11"), d)], ("01", "10"): [(("01", "10"), f[0, 1])]}
        zeroed = {"zero1": [("00", "01"), ("01", "11"), ("01", "10")],
                  "zero2": [("00", "10"), ("10", "11"), ("01", "10")],
                  "zero3": [("01", "11"), ("10", "11"), ("00", "11")]}.get(kind, [])
        offdiag = [(r, cc) for i, r in enumerate(TWO_QUBIT) for cc in TWO_QUBIT[i + 1:]]
        for src, probe in _single_entry_probes():
            out = channel(probe)
            expected = {dst: factor * 0.1 for dst, factor in routes[src]}
            for dst in offdiag:
                want = 0.0 if dst in zeroed else expected.get(dst, 0.0)
                check(f"probe {src[0]};{src[1]} -> receiver {dst[0]};{dst[1]}", _entry(out, *dst), want)
    elif kind == "lincomb":
        alpha = aux_value(spec, coef.base())
        t = spec.ratios
        for xv in (x, 0.0):
            out = channel(monomial_sender(xv))
            check(f"x={xv} receiver 00;01", _entry(out, "00", "01"),
                  alpha * (t[0] * xv + t[1] * xv ** 2 + t[2] * xv ** 3 + t[3] * xv ** 4))
            check(f"x={xv} receiver 00;10", _entry(out, "00", "10"),
                  alpha * (t[4] * xv + t[5] * xv ** 2 + t[6] * xv ** 3 + t[7] * xv ** 4))
            check(f"x={xv} receiver 00;11", _entry(out, "00", "11"), alpha * t[8] * xv ** 5)
    elif kind == "linsys":
        cval = aux_value(spec, coef.base())
        xs = np.array([0.05, 0.05])
        for scale in (1.0, 0.5):
            xv = scale * xs
            out = channel(linsys_sender(spec.A @ xv))
            check(f"x={xv.tolist()} receiver 00;01", _entry(out, "00", "01"), cval * xv[0])
            check(f"x={xv.tolist()} receiver 00;10", _entry(out, "00", "10"), cval * xv[1])
    # trace consistency of the diagonal bookkeeping on a generic physical input
    rng = np.random.default_rng(7)
    X = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    rho = X @ X.conj().T
    rho /= np.trace(rho).real
    check("trace preserved", np.trace(channel(rho)), 1.0)
    passed = all(ch["ok"] for ch in checks)
    return VerificationReport(passed, checks)
