"""Multi-start search over the 42 rotation angles.

Each restart draws its starting point from its own random stream, derived from
``(seed, restart index)``, so results do not depend on worker count or
scheduling and a longer run extends a shorter one.  Local solves minimise the
squared residual norm with a trust-region least-squares method.  Least squares
only lands somewhere on the feasible set, so the best few feasible restarts are
then pushed uphill in the operation objective while the residual is held at
zero (SLSQP with equality constraints, then a least-squares polish).  Among
all feasible solutions the one with the largest objective wins.
"""
from __future__ import annotations

import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from .er_unitary import N_PARAMS, TWO_PI, PhiVector
from .operations import OperationSpec, ResidualReport, objective_gradient, real_residuals, residual
from .transfer import TransferModel

FD_STEP = 1e-6
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SearchConfig:
    restarts: int = 1000
    seed: int = 20200417
    residual_tol: float = 1e-8
    max_iterations: int = 500
    objective_floor: float = 0.01
    workers: int = 1
    jacobian: str = "analytic"
    ordering: str = "canonical"
    verbose: bool = False
    ascend_top: int = 10
    ascend_iterations: int = 300

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.jacobian not in ("analytic", "fd"):
            raise ValueError("jacobian must be 'analytic' or 'fd'")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.ascend_top < 0 or self.ascend_iterations < 1:
            raise ValueError("ascend_top must be >= 0 and ascend_iterations >= 1")


@dataclass
class LocalResult:
    phi: PhiVector
    report: ResidualReport
    converged: bool
    nfev: int


@dataclass
class SearchResult:
    best_phi: PhiVector | None
    residual_norm: float
    objective: float
    aux: complex | None
    feasible_count: int
    best_restart: int | None
    success: bool
    log: list = field(default_factory=list)
    ascent_log: list = field(default_factory=list)


def start_point(seed: int, index: int) -> np.ndarray:
    """Uniform starting angles for restart ``index``; independent of any other restart."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    return rng.uniform(0.0, TWO_PI, N_PARAMS)


def _fd_jacobian(fun, x: np.ndarray) -> np.ndarray:
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = FD_STEP
        cols.append((fun(x + e) - fun(x - e)) / (2 * FD_STEP))
    return np.array(cols).T


def local_solve(spec: OperationSpec, phi0, model: TransferModel, config: SearchConfig = SearchConfig()) -> LocalResult:
    """Minimise the residual norm from ``phi0``; deterministic in its inputs."""
    x0 = np.asarray(phi0.values if isinstance(phi0, PhiVector) else phi0, dtype=float)
    ordering = config.ordering

    def fun(x):
        return real_residuals(spec, model.base_vector(x, ordering))

    if config.jacobian == "analytic":
        def jac(x):
            _, dg = model.base_jacobian(x, ordering)
            return real_residuals(spec, dg).T
    else:
        def jac(x):
            return _fd_jacobian(fun, x)

    tiny = np.finfo(float).eps
    sol = least_squares(fun, x0, jac=jac, method="trf", xtol=tiny, ftol=tiny, gtol=tiny,
                        max_nfev=config.max_iterations)
    # keep the start if the solver did not improve on it (e.g. already at a solution)
    x = sol.x if np.linalg.norm(sol.fun) <= np.linalg.norm(fun(x0)) else x0
    phi = PhiVector(x)
    report = residual(spec, model.coefficients(phi, ordering))
    return LocalResult(phi, report, report.norm < config.residual_tol, int(sol.nfev))


def _independent_residuals(spec: OperationSpec) -> np.ndarray:
    """Orthonormal rows spanning the range of the (real-linear) residual map.

    Eliminating alpha or c leaves dependent residual components; SLSQP needs
    independent equality constraints.
    """
    unit = np.concatenate([np.eye(10), 1j * np.eye(10)]).astype(complex)
    L = real_residuals(spec, unit).T
    u, sv, _ = np.linalg.svd(L, full_matrices=False)
    return u[:, sv > 1e-10 * sv[0]].T


def ascend(spec: OperationSpec, phi0, model: TransferModel, config: SearchConfig = SearchConfig()) -> LocalResult:
    """Raise the objective from a feasible ``phi0`` while keeping the residual at zero.

    Returns the polished result, or the re-evaluated start if the climb does not
    end on a feasible point with a larger objective.
    """
    x0 = np.asarray(phi0.values if isinstance(phi0, PhiVector) else phi0, dtype=float)
    ordering = config.ordering
    cache = {}

    def jac_at(x):
        key = x.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = model.base_jacobian(x, ordering)
        return cache[key]

    def neg_objective(x):
        value, grad = objective_gradient(spec, *jac_at(x))
        return -value, -grad

    Q = _independent_residuals(spec)
    constraint = {"type": "eq",
                  "fun": lambda x: Q @ real_residuals(spec, jac_at(x)[0]),
                  "jac": lambda x: Q @ real_residuals(spec, jac_at(x)[1]).T}
    start = residual(spec, model.coefficients(PhiVector(x0), ordering))
    sol = minimize(neg_objective, x0, jac=True, method="SLSQP", constraints=[constraint],
                   options={"maxiter": config.ascend_iterations, "ftol": 1e-12})
    polished = local_solve(spec, sol.x, model, config)
    if polished.converged and polished.report.objective > start.objective:
        return LocalResult(polished.phi, polished.report, True, int(sol.nfev) + polished.nfev)
    return LocalResult(PhiVector(x0), start, start.norm < config.residual_tol, int(sol.nfev))


# worker-process state, set once per process by the pool initializer
_WORKER: dict = {}


def _init_worker(spec, model, config):
    _WORKER.update(spec=spec, model=model, config=config)


def _run_restart(index: int) -> dict:
    spec, model, config = _WORKER["spec"], _WORKER["model"], _WORKER["config"]
    res = local_solve(spec, start_point(config.seed, index), model, config)
    return {
        "restart": index,
        "residual_norm": res.report.norm,
        "objective": res.report.objective,
        "aux": res.report.aux,
        "converged": res.converged,
        "nfev": res.nfev,
        "phi": res.phi.values.tolist(),
    }


def _run_ascent(rec: dict) -> dict:
    spec, model, config = _WORKER["spec"], _WORKER["model"], _WORKER["config"]
    res = ascend(spec, rec["phi"], model, config)
    return {
        "restart": rec["restart"],
        "stage": "ascent",
        "start_objective": rec["objective"],
        "residual_norm": res.report.norm,
        "objective": res.report.objective,
        "aux": res.report.aux,
        "converged": res.converged,
        "nfev": res.nfev,
        "phi": res.phi.values.tolist(),
    }


def _feasible(rec: dict, config: SearchConfig) -> bool:
    return rec["residual_norm"] < config.residual_tol and rec["objective"] > config.objective_floor


def _better(a: dict, b: dict | None) -> bool:
    """Is ``a`` preferred over ``b``: larger objective, then smaller residual, then lower index."""
    if b is None:
        return True
    if abs(a["objective"] - b["objective"]) > TIE_TOL:
        return a["objective"] > b["objective"]
    if a["residual_norm"] != b["residual_norm"]:
        return a["residual_norm"] < b["residual_norm"]
    return a["restart"] < b["restart"]


def select(records: list[dict], config: SearchConfig) -> SearchResult:
    """Deterministic fold over restart records ordered by index."""
    best, closest, feasible = None, None, 0
    for rec in sorted(records, key=lambda r: r["restart"]):
        if closest is None or rec["residual_norm"] < closest["residual_norm"]:
            closest = rec
        if _feasible(rec, config):
            feasible += 1
            if _better(rec, best):
                best = rec
    log = [{k: v for k, v in r.items() if k != "phi"} for r in sorted(records, key=lambda r: r["restart"])]
    if best is None:
        if closest is None:
            return SearchResult(None, float("inf"), 0.0, None, 0, None, False, log)
        return SearchResult(PhiVector(closest["phi"]), closest["residual_norm"], closest["objective"],
                            closest["aux"], 0, closest["restart"], False, log)
    return SearchResult(PhiVector(best["phi"]), best["residual_norm"], best["objective"], best["aux"],
                        feasible, best["restart"], True, log)


def _emit(rec: dict, stream):
    out = {k: v for k, v in rec.items() if k != "phi"}
    if isinstance(out.get("aux"), complex):
        out["aux"] = [out["aux"].real, out["aux"].imag]
    stream.write(json.dumps(out) + "\n")
    stream.flush()


def _top_feasible(records: list[dict], config: SearchConfig) -> list[dict]:
    """The ``ascend_top`` most preferred feasible records, in preference order."""
    ranked = []
    for rec in sorted((r for r in records if _feasible(r, config)), key=lambda r: r["restart"]):
        pos = 0
        while pos < len(ranked) and not _better(rec, ranked[pos]):
            pos += 1
        ranked.insert(pos, rec)
    return ranked[:config.ascend_top]


def multistart(spec: OperationSpec, model: TransferModel, config: SearchConfig = SearchConfig(),
               stream=None) -> SearchResult:
    """Run ``config.restarts`` local solves, climb the best few, and pick the best feasible one."""
    stream = stream or sys.stderr
    indices = range(config.restarts)
    records = []

    def collect(rec):
        records.append(rec)
        if config.verbose:
            _emit(rec, stream)

    _init_worker(spec, model, config)
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers, initializer=_init_worker, initargs=(spec, model, config)) as pool:
            for rec in pool.map(_run_restart, indices, chunksize=max(1, config.restarts // (8 * config.workers))):
                collect(rec)
            climbs = list(pool.map(_run_ascent, _top_feasible(records, config)))
    else:
        for i in indices:
            collect(_run_restart(i))
        climbs = [_run_ascent(rec) for rec in _top_feasible(records, config)]
    if config.verbose:
        for rec in climbs:
            _emit(rec, stream)
    # a climbed record replaces its restart in the selection; the restart log is left as solved
    climbed = {rec["restart"]: rec for rec in climbs}
    result = select([climbed.get(r["restart"], r) for r in records], config)
    result.log = [{k: v for k, v in r.items() if k != "phi"} for r in sorted(records, key=lambda r: r["restart"])]
    result.ascent_log = [{k: v for k, v in r.items() if k != "phi"} for r in climbs]
    return result
