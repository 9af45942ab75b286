"""Subcommand implementations.  Each returns ``(report, exit_code)``."""
from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .basis import BasisCatalog
from .chain import build_positions, coupling_matrix, hamiltonian_blocks
from .evolution import eigendecompose
from .er_unitary import PhiVector
from .io import RunConfig, data_path, load_published_values, make_report, read_phi_table
from .operations import (
    KINDS,
    OperationSpec,
    implied_zeros,
    linsys_sender,
    residual,
    residual_names,
    verify_application,
)
from .optimizer import multistart
from .transfer import TransferCoefficients, TransferModel, apply_kraus, is_physical, receiver_state

log = logging.getLogger(__name__)

PATTERN_TOL = 1e-3
PRINTED_TOL = 2e-4
REPRO_MAG_TOL = 1e-3
REPRO_PHASE_TOL = 1e-2
REPRO_FALLBACK_TOL = 5e-2


def build_model(config: RunConfig) -> TransferModel:
    return TransferModel(config.chain, config.time)


def phase_distance(p: float, q: float) -> float:
    """Wrap-aware distance between two angles."""
    return float(abs((p - q + np.pi) % (2 * np.pi) - np.pi))


def channel_for(model: TransferModel, phi, ordering: str):
    K = model.sender_kraus(phi, ordering)
    return lambda rho: apply_kraus(K, rho)


# --- model -------------------------------------------------------------------------

def cmd_model(config: RunConfig, model: TransferModel | None = None):
    x = build_positions(config.chain)
    D = coupling_matrix(x)
    nn = np.diag(D, 1)
    if model is None:
        catalog = BasisCatalog(config.chain.n_sites)
        vals = eigendecompose(hamiltonian_blocks(D, catalog)).eigenvalues
        dims = catalog.dims
    else:
        vals, dims = model.spectral.eigenvalues, model.catalog.dims
    body = {
        "chain": {"n_sites": config.chain.n_sites, "delta_1": config.chain.delta_1,
                  "delta_2": config.chain.delta_2, "delta_bulk": config.chain.delta_bulk, "time": config.time},
        "positions": x,
        "nearest_neighbour_couplings": nn,
        "coupling_summary": {"max": float(D.max()), "min_offdiag": float(D[np.triu_indices_from(D, 1)].min()),
                             "D_13": float(D[0, 2]) if len(x) > 2 else None},
        "sector_dims": list(dims),
        "eigenvalue_range": {"sector1": [float(vals[0].min()), float(vals[0].max())],
                             "sector2": [float(vals[1].min()), float(vals[1].max())]},
    }
    return make_report("model", config, body), 0


# --- coefficients --------------------------------------------------------------------

def pattern_flags(coef: TransferCoefficients, floor: float = 0.01, tol: float = PATTERN_TOL) -> list[str]:
    flags = []
    for kind in KINDS:
        rep = residual(OperationSpec(kind), coef)
        if rep.norm < tol and rep.objective > floor:
            flags.append(kind)
    return flags


def coefficient_body(coef: TransferCoefficients) -> dict:
    out = {}
    for name, z in coef.as_dict().items():
        out[name] = {"abs": round(abs(z), 6), "phase": round(float(np.angle(z)), 6),
                     "re": float(z.real), "im": float(z.imag)}
    return out


def cmd_coefficients(config: RunConfig, phi: PhiVector, model: TransferModel | None = None,
                     pattern_tol: float = PATTERN_TOL):
    model = model or build_model(config)
    coef = model.coefficients(phi, config.ordering)
    body = {"coefficients": coefficient_body(coef),
            "patterns": pattern_flags(coef, config.search.objective_floor, pattern_tol),
            "pattern_tolerance": pattern_tol}
    return make_report("coefficients", config, body), 0


# --- verify-table ------------------------------------------------------------------

def printed_identity_checks(published: dict) -> list[dict]:
    """Check c = conj(a) d and f = conj(a) a on the published numbers themselves."""
    checks = []
    for ident in published["identities"]:
        vals = published["rows"][ident["row"]]["values"]
        if ident["kind"] == "c":
            (cm, cp), (am, ap), (dm, dp) = vals[ident["c"]], vals[ident["a"]], vals["d"]
            want_m, want_p, target = am * dm, dp - ap, ident["c"]
            got_m, got_p = cm, cp
        else:
            (fm, fp), (lm, lp), (rm, rp) = vals[ident["f"]], vals[ident["a_left"]], vals[ident["a_right"]]
            want_m, want_p, target = lm * rm, rp - lp, ident["f"]
            got_m, got_p = fm, fp
        mag_err = abs(got_m - want_m)
        ph_err = phase_distance(got_p, want_p)
        checks.append({
            "row": ident["row"], "coefficient": target,
            "printed": [got_m, got_p], "from_identity": [want_m, want_p],
            "magnitude_error": mag_err, "phase_error": ph_err,
            "verdict": "pass" if mag_err <= PRINTED_TOL and ph_err <= PRINTED_TOL else "fail",
        })
    return checks


def _spec_for_row(row: dict) -> OperationSpec:
    return OperationSpec(row["operation"], A=row.get("A"))


def reproduce_row(row: dict, phi: PhiVector, model: TransferModel, ordering: str) -> dict:
    """Compare pipeline coefficients for a published angle row with the published factors."""
    spec = _spec_for_row(row)
    coef = model.coefficients(phi, ordering)
    rep = residual(spec, coef)
    lookup = coef.as_dict()
    zero_names = list(dict.fromkeys(row.get("zero", []) + implied_zeros(spec)))
    zeros = {name: abs(lookup[name]) for name in zero_names}
    zeros.update({name: abs(r) for name, r in zip(residual_names(spec), rep.residuals)})
    values = {}
    for name, (mag, ph) in row.get("values", {}).items():
        z = lookup[name]
        values[name] = {"computed": [abs(z), float(np.angle(z))], "printed": [mag, ph],
                        "magnitude_error": abs(abs(z) - mag), "phase_error": phase_distance(float(np.angle(z)), ph)}
    objective = None
    if "objective" in row:
        objective = {"computed": rep.objective, "printed": row["objective"],
                     "error": abs(rep.objective - row["objective"])}
    max_zero = max(zeros.values()) if zeros else 0.0
    values_ok = all(v["magnitude_error"] <= REPRO_MAG_TOL and v["phase_error"] <= REPRO_PHASE_TOL for v in values.values())
    objective_ok = objective is None or objective["error"] <= REPRO_MAG_TOL
    strict = max_zero < REPRO_MAG_TOL and values_ok and objective_ok
    return {
        "ordering": ordering,
        "operation": spec.kind,
        "designated_zeros": zeros,
        "max_designated_zero": max_zero,
        "values": values,
        "objective": objective,
        "aux": rep.aux,
        "reproduced": strict,
        "pattern_within_fallback": max_zero < REPRO_FALLBACK_TOL,
    }


def cmd_verify_table(config: RunConfig, table_dir=None, model: TransferModel | None = None, orderings=None):
    published = load_published_values()
    model = model or build_model(config)
    identity = printed_identity_checks(published)
    orderings = orderings or [config.ordering]
    rows = {}
    for name, row in published["rows"].items():
        if not row.get("phi_file"):
            rows[name] = {"citation": row["citation"], "verdict": "skipped",
                          "reason": "no published angle row for this operation"}
            continue
        path = (data_path(row["phi_file"]) if table_dir is None
                else _find_in_dir(table_dir, row["phi_file"]))
        phi = read_phi_table(path)
        results = [reproduce_row(row, phi, model, o) for o in orderings]
        best = min(results, key=lambda r: (not r["reproduced"], r["max_designated_zero"]))
        rows[name] = {"citation": row["citation"], "phi_file": str(path), "by_ordering": results,
                      "best_ordering": best["ordering"], "reproduced": best["reproduced"],
                      "verdict": "pass" if best["reproduced"] else "fail"}
    checked = [n for n in rows if rows[n]["verdict"] != "skipped"]
    identities_ok = all(c["verdict"] == "pass" for c in identity)
    reproduced = [o for o in orderings if all(
        next(r for r in rows[n]["by_ordering"] if r["ordering"] == o)["reproduced"] for n in checked)]
    verdict = "pass" if identities_ok and reproduced else "fail"
    if not reproduced:
        fallback = [o for o in orderings if all(
            next(r for r in rows[n]["by_ordering"] if r["ordering"] == o)["pattern_within_fallback"] for n in checked)]
        discrepancy = ("no ordering reproduces the published factors within 1e-3 / 1e-2 rad; "
                       f"orderings meeting the 5e-2 zero-pattern fallback: {fallback or 'none'}")
    else:
        discrepancy = None
    body = {
        "printed_identities": identity,
        "rows": rows,
        "orderings_reproducing_all_rows": reproduced,
        "discrepancy": discrepancy,
        "verdict": verdict,
    }
    return make_report("verify-table", config, body), 0 if verdict == "pass" else 1


def _find_in_dir(table_dir, rel):
    p = Path(table_dir) / Path(rel).name
    if not p.exists():
        raise FileNotFoundError(f"angle table {p} not found")
    return p


# --- optimize / apply ------------------------------------------------------------------

def solution_body(spec: OperationSpec, phi: PhiVector, model: TransferModel, ordering: str, verify_tol=1e-6) -> dict:
    coef = model.coefficients(phi, ordering)
    rep = residual(spec, coef)
    ver = verify_application(spec, channel_for(model, phi, ordering), coef, tol=verify_tol)
    return {
        "coefficients": coefficient_body(coef),
        "residuals": dict(zip(residual_names(spec), rep.residuals.tolist())),
        "residual_norm": rep.norm,
        "objective": rep.objective,
        "aux": rep.aux,
        "survivors": rep.survivors,
        "verification": {"verdict": "pass" if ver.passed else "fail",
                         "failures": [c["name"] for c in ver.failures]},
        "phi": dict((f"{k}:{n},{m}", v) for (k, n, m), v in phi.items()),
    }


def cmd_optimize(config: RunConfig, model: TransferModel | None = None, stream=None):
    model = model or build_model(config)
    result = multistart(config.operation, model, config.search, stream=stream)
    body = {
        "operation": config.operation.to_dict(),
        "success": result.success,
        "feasible_count": result.feasible_count,
        "restarts": config.search.restarts,
        "best_restart": result.best_restart,
        "residual_tol": config.search.residual_tol,
        "ascent": [{k: r[k] for k in ("restart", "start_objective", "objective")} for r in result.ascent_log],
    }
    if result.best_phi is not None:
        body.update(solution_body(config.operation, result.best_phi, model, config.ordering))
    return make_report("optimize", config, body), (0 if result.success else 1), result


def cmd_apply(config: RunConfig, phi: PhiVector, rho_s, model: TransferModel | None = None):
    model = model or build_model(config)
    rho_r = receiver_state(rho_s, model, phi, config.ordering)
    body = {
        "sender": rho_s.tolist(),
        "receiver": rho_r.tolist(),
        "sender_physical": bool(is_physical(rho_s)),
        "receiver_trace": complex(np.trace(rho_r)),
    }
    body.update(solution_body(config.operation, phi, model, config.ordering))
    ok = body["verification"]["verdict"] == "pass"
    return make_report("apply", config, body), 0 if ok else 1


# --- solve-linsys ----------------------------------------------------------------------

class LinsysError(ValueError):
    pass


def physical_linsys_sender(b, diag=(0.4, 0.2, 0.2, 0.2)):
    """Sender state carrying b; b is scaled down (with a warning) if the state is not positive."""
    b = np.asarray(b, dtype=float)
    scale = 1.0
    for _ in range(60):
        rho = linsys_sender(scale * b, diag)
        if np.linalg.eigvalsh(rho).min() >= 0:
            if scale != 1.0:
                log.warning("right-hand side scaled by %.6g to keep the sender state positive", scale)
            return rho, scale
        scale *= 0.5
    raise LinsysError("cannot embed b in a positive sender state")


def cmd_solve_linsys(config: RunConfig, A, b, phi: PhiVector | None = None,
                     model: TransferModel | None = None, stream=None):
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.shape != (2, 2) or abs(np.linalg.det(A)) < 1e-12:
        raise LinsysError(f"A must be an invertible 2x2 matrix, got {A.tolist()}")
    if b.shape != (2,):
        raise LinsysError("b must have two entries")
    model = model or build_model(config)
    spec = OperationSpec("linsys", A=A)
    search = None
    if phi is None:
        cfg = RunConfig(config.chain, config.time, spec, config.search, config.ordering, config.io)
        _, code, result = cmd_optimize(cfg, model, stream=stream)
        if not result.success:
            return make_report("solve-linsys", config, {"success": False, "reason": "no feasible angles found",
                                                        "best_residual": result.residual_norm}), 1
        phi = result.best_phi
        search = {"feasible_count": result.feasible_count, "best_restart": result.best_restart}
    coef = model.coefficients(phi, config.ordering)
    rep = residual(spec, coef)
    c = rep.aux
    rho_s, scale = physical_linsys_sender(b)
    rho_r = receiver_state(rho_s, model, phi, config.ordering)
    raw = np.array([rho_r[0, 1], rho_r[0, 2]])
    x_hat = raw / c / scale
    x_real = x_hat.real
    body = {
        "success": True,
        "A": A, "b": b,
        "c": c,
        "residual_norm": rep.norm,
        "b_scale": scale,
        "receiver_entries": raw.tolist(),
        "x_hat": x_real,
        "x_hat_imag": x_hat.imag,
        "classical_residual": float(np.linalg.norm(A @ x_real - b)),
        "classical_solution": np.linalg.solve(A, b),
        "search": search,
        "phi": dict((f"{k}:{n},{m}", v) for (k, n, m), v in phi.items()),
    }
    ok = rep.norm < max(config.search.residual_tol, 1e-6) and c.real > 0
    return make_report("solve-linsys", config, body), 0 if ok else 1
