import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from spinxfer.commands import channel_for
from spinxfer.er_unitary import N_PARAMS
from spinxfer.operations import (
    BASE_NAMES,
    EXP_SERIES_RATIOS,
    KINDS,
    OperationError,
    OperationSpec,
    aux_value,
    complex_residuals,
    implied_zeros,
    monomial_sender,
    real_residuals,
    residual,
    residual_names,
    verify_application,
)
from spinxfer.optimizer import SearchConfig, local_solve, start_point
from spinxfer.transfer import TransferCoefficients, transfer_tensor

finite = st.floats(-3, 3, allow_nan=False)
base_vectors = st.lists(st.tuples(finite, finite), min_size=10, max_size=10).map(
    lambda v: np.array([complex(a, b) for a, b in v]))


def test_spec_validation():
    with pytest.raises(OperationError):
        OperationSpec("transpose")
    with pytest.raises(OperationError):
        OperationSpec("linsys", A=[[1, 2], [2, 4]])
    with pytest.raises(OperationError):
        OperationSpec("linsys", A=[[1, 2, 3]])
    with pytest.raises(OperationError):
        OperationSpec("lincomb", ratios=np.zeros(9))
    assert np.abs(OperationSpec("linsys").A - np.array([[0.4, 0.3], [0.6, 0.2]])).max() == 0
    assert np.abs(OperationSpec("lincomb").ratios - np.array(EXP_SERIES_RATIOS)).max() == 0


@pytest.mark.parametrize("kind", KINDS)
def test_residual_names_match_length(kind):
    spec = OperationSpec(kind)
    r = complex_residuals(spec, np.ones(10, dtype=complex))
    assert len(residual_names(spec)) == r.shape[-1]


@settings(max_examples=30, deadline=None)
@given(base_vectors, base_vectors, st.floats(-2, 2, allow_nan=False), st.sampled_from(KINDS))
def test_residuals_are_real_linear(g1, g2, s, kind):
    spec = OperationSpec(kind)
    lhs = real_residuals(spec, g1 + s * g2)
    rhs = real_residuals(spec, g1) + s * real_residuals(spec, g2)
    assert np.abs(lhs - rhs).max() < 1e-10


@settings(max_examples=30, deadline=None)
@given(base_vectors)
def test_lincomb_alpha_is_least_squares(g):
    spec = OperationSpec("lincomb")
    G = g[[0, 1, 4, 5, 2, 3, 6, 7, 8]]
    alpha_ls = np.linalg.lstsq(spec.ratios[:, None], G, rcond=None)[0][0]
    assert abs(aux_value(spec, g) - alpha_ls) < 1e-10


@settings(max_examples=20, deadline=None)
@given(base_vectors)
def test_linsys_c_minimises_residual(g):
    spec = OperationSpec("linsys")
    c = aux_value(spec, g)
    S = g[:4].reshape(2, 2) @ spec.A

    def cost(v):
        cc = complex(*v)
        return abs(S[0, 0] - cc) ** 2 + abs(S[1, 1] - cc) ** 2 + cc.imag ** 2

    res = minimize(cost, [0.0, 0.0], method="BFGS", options={"gtol": 1e-12})
    assert abs(c - complex(*res.x)) < 1e-6
    assert np.linalg.norm(complex_residuals(spec, g)) ** 2 == pytest.approx(
        cost([c.real, c.imag]) + abs(S[0, 1]) ** 2 + abs(S[1, 0]) ** 2)


def test_implied_zeros_follow_from_residuals():
    rng = np.random.default_rng(1)
    for kind in ("restore", "zero1", "zero2", "zero3", "rearrange"):
        spec = OperationSpec(kind)
        g = rng.normal(size=10) + 1j * rng.normal(size=10)
        names = residual_names(spec)
        g[[BASE_NAMES.index(n) for n in names]] = 0
        coef = TransferCoefficients.from_base(g)
        values = coef.as_dict()
        assert max(abs(values[n]) for n in implied_zeros(spec)) == 0
        assert residual(spec, coef).norm == 0


def test_restore_objective_sums_survivors():
    g = np.zeros(10, dtype=complex)
    g[0], g[3], g[8] = 0.5, 0.4j, 0.3
    rep = residual(OperationSpec("restore"), TransferCoefficients.from_base(g))
    assert rep.norm == 0
    # |a00| + |a11| + |c00| + |c11| + |f01| + |d|
    assert rep.objective == pytest.approx(0.5 + 0.4 + 0.15 + 0.12 + 0.2 + 0.3)


def test_table_rows_nearly_satisfy_their_operation(model42, table_phi):
    for name, phi in table_phi.items():
        rep = residual(OperationSpec(name), model42.coefficients(phi))
        assert rep.norm < 1e-4, name


def test_monomial_sender_entries():
    rho = monomial_sender(0.1)
    assert rho[0, 1] == 0.1 and rho[0, 2] == pytest.approx(0.01)
    assert rho[1, 3] == pytest.approx(1e-3) and rho[2, 3] == pytest.approx(1e-4)
    assert rho[0, 3] == pytest.approx(1e-5)
    assert np.abs(rho - rho.conj().T).max() == 0


@pytest.mark.parametrize("kind", ["zero1", "rearrange", "lincomb", "linsys"])
def test_verification_passes_on_refined_solution(kind, model42, table_phi):
    spec = OperationSpec(kind)
    sol = local_solve(spec, table_phi[kind], model42, SearchConfig(restarts=1))
    assert sol.converged
    coef = model42.coefficients(sol.phi)
    ver = verify_application(spec, channel_for(model42, sol.phi, "canonical"), coef)
    assert ver.passed, ver.failures


def test_verification_fails_on_random_angles(model42):
    phi = np.random.default_rng(2).uniform(0, 2 * np.pi, N_PARAMS)
    for kind in ("zero1", "lincomb", "linsys"):
        spec = OperationSpec(kind)
        ver = verify_application(spec, channel_for(model42, phi, "canonical"), model42.coefficients(phi))
        assert not ver.passed


def test_restore_solution_has_diagonal_transfer_tensor(model42):
    sol = local_solve(OperationSpec("restore"), start_point(4, 0), model42)
    assert sol.converged
    T4 = transfer_tensor(model42.sender_kraus(sol.phi))
    worst = 0.0
    for n in range(4):
        for m in range(n + 1, 4):
            others = np.ones((4, 4), dtype=bool)
            others[n, m] = False
            worst = max(worst, np.abs(T4[n, m][others]).max())
    assert worst < 1e-7
