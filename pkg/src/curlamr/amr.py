"""Solve-estimate-mark-refine loop with bulk (Doerfler) marking.

Bookkeeping follows the reporting conventions of the benchmark study: for
the duality estimators the error column holds the joint energy error
xi = (|||u - u_T|||^2_{mu,beta} + |||sigma - sigma_T|||^2_{beta,mu})^(1/2),
the relative error divides by the joint norm of the exact pair, and the
effectivity index is eta / xi.  The residual estimator reports the primal
energy error, relative error and eta / error.
"""

import time
from dataclasses import dataclass, field as dc_field

import numpy as np

from .estimators import eta_new, eta_res, eta_tilde, recover_local
from .fem import (assemble_auxiliary, assemble_primal, energy_error,
                  energy_norm_exact, solve_system)
from .linalg import SolveConfig
from .mesh import bisect

ESTIMATORS = ("new", "new_local", "res")


@dataclass
class AmrConfig:
    estimator: str = "new"
    theta: float = 0.5
    max_dof: int = 150000
    max_iterations: int = 40
    target_rel_error: float = None
    solver_primal: SolveConfig = dc_field(default_factory=SolveConfig)
    solver_auxiliary: SolveConfig = dc_field(default_factory=SolveConfig)
    quad_volume: int = 4
    quad_face: int = 4
    quad_edge: int = 5
    error_quad: int = None       # defaults to quad_volume

    def __post_init__(self):
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if not (0.0 < self.theta <= 1.0):
            raise ValueError("Doerfler theta must lie in (0, 1]")
        if not (self.max_dof or self.max_iterations or self.target_rel_error):
            raise ValueError("at least one stopping criterion must be set")
        if self.error_quad is None:
            self.error_quad = self.quad_volume


@dataclass
class ConvergenceRecord:
    iteration: int
    dof: int
    error: float
    rel_error: float
    eta: float
    eff_index: float
    seconds: float

    CSV_HEADER = "iter,dof,error,rel_error,eta,eff_index,seconds"

    def csv_row(self):
        return (f"{self.iteration},{self.dof},{self.error!r},"
                f"{self.rel_error!r},{self.eta!r},{self.eff_index!r},"
                f"{self.seconds!r}")


def dorfler_mark(indicators, theta):
    """Smallest element set carrying a theta fraction of the squared total.

    Greedy by descending indicator with element id breaking ties; an
    all-zero input returns the empty set.
    """
    indicators = np.asarray(indicators, dtype=np.float64)
    if np.any(indicators < 0):
        raise ValueError("indicators must be nonnegative")
    if not (0.0 < theta <= 1.0):
        raise ValueError("theta must lie in (0, 1]")
    sq = indicators ** 2
    total = sq.sum()
    if total == 0.0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(len(sq)), -sq))
    csum = np.cumsum(sq[order])
    target = theta * total
    k = int(np.searchsorted(csum, target * (1.0 - 1e-14))) + 1
    k = min(k, int(np.count_nonzero(sq)))
    return np.sort(order[:k])


def solve_status(problem, mesh, config):
    """One primal (+ auxiliary) solve with the configured estimator.

    Returns a dict with fields, reports and error measures; run_amr wraps
    this per iteration and the acceptance harness reuses it directly.
    """
    mu = problem.mu_per_tet(mesh)
    beta = problem.beta_per_tet(mesh)
    state = {"mesh": mesh}

    system = assemble_primal(mesh, problem, config.quad_volume,
                             config.quad_face, config.quad_edge)
    u_T, it_p, res_p = solve_system(system, config.solver_primal)
    state.update(u=u_T, dof=system.space.num_free,
                 primal_iterations=it_p, primal_residual=res_p)

    err_u, err_u_tot = energy_error(mesh, u_T, problem.exact_u,
                                    problem.exact_curl_u, mu, beta,
                                    config.error_quad)
    norm_u = energy_norm_exact(mesh, problem.exact_u, problem.exact_curl_u,
                               mu, beta, config.error_quad)
    state.update(err_u=err_u, err_u_tot=err_u_tot, norm_u=norm_u)

    if config.estimator in ("new", "new_local"):
        aux = assemble_auxiliary(mesh, problem, config.quad_volume,
                                 config.quad_face, config.quad_edge)
        sigma_T, it_a, res_a = solve_system(aux, config.solver_auxiliary)
        state.update(sigma=sigma_T, aux_iterations=it_a, aux_residual=res_a)

        # swapped-role energy norm for the auxiliary variable
        err_s, err_s_tot = energy_error(mesh, sigma_T, problem.exact_sigma,
                                        problem.exact_curl_sigma, beta, mu,
                                        config.error_quad)
        norm_s = energy_norm_exact(mesh, problem.exact_sigma,
                                   problem.exact_curl_sigma, beta, mu,
                                   config.error_quad)
        xi = float(np.sqrt(err_u_tot ** 2 + err_s_tot ** 2))
        joint = float(np.sqrt(norm_u ** 2 + norm_s ** 2))
        state.update(err_sigma=err_s, err_sigma_tot=err_s_tot, xi=xi,
                     joint_norm=joint)

        if config.estimator == "new":
            report = eta_new(mesh, u_T, sigma_T, problem, config.quad_volume,
                             metadata={"sigma_mode": config.solver_auxiliary.mode})
        else:
            sigma_tilde = recover_local(mesh, u_T, problem, config.quad_volume)
            state["sigma_tilde"] = sigma_tilde
            report = eta_tilde(mesh, u_T, sigma_tilde, problem,
                               config.quad_volume,
                               metadata={"recovery": "vertex_patch"})
        error = xi
        rel = xi / joint if joint > 0 else np.inf
    else:
        report = eta_res(mesh, u_T, problem, config.quad_volume,
                         config.quad_face)
        error = err_u_tot
        rel = err_u_tot / norm_u if norm_u > 0 else np.inf

    state.update(report=report, error=error, rel_error=rel,
                 eff_index=report.total / error if error > 0 else np.inf)
    return state


def run_amr(problem, mesh, config, on_record=None):
    """Adaptive loop; returns (records, final solver state).

    on_record, when given, is called with each ConvergenceRecord as soon
    as it is complete, so callers can stream results to disk and keep the
    partial history if a later iteration fails.
    """
    records = []
    state = None
    t0 = time.perf_counter()
    for it in range(config.max_iterations):
        state = solve_status(problem, mesh, config)
        rec = ConvergenceRecord(
            iteration=it, dof=state["dof"], error=state["error"],
            rel_error=state["rel_error"], eta=state["report"].total,
            eff_index=state["eff_index"],
            seconds=time.perf_counter() - t0)
        records.append(rec)
        if on_record is not None:
            on_record(rec)

        if config.target_rel_error and rec.rel_error <= config.target_rel_error:
            break
        if config.max_dof and rec.dof >= config.max_dof:
            break
        marked = dorfler_mark(state["report"].indicators, config.theta)
        if marked.size == 0:
            break
        mesh = bisect(mesh, marked)
    return records, state
