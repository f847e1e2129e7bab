"""Conditioned averages under postselection, weak values and the g -> 0 limit.

The numerator of the conditioned average is evaluated through the exact split

    sum_j alpha_j tr[P_f M_j rho M_j]
        = 1/2 tr[P_f {A, rho}] + tr[P_f S],
    S = -1/2 sum_j alpha_j [M_j, [M_j, rho]],

so that the divergent contextual values (alpha ~ 1/g**2) only ever multiply
O(g**2) double commutators instead of O(1) sandwiches that cancel.
"""

from dataclasses import dataclass
from typing import Callable, List, Union

import numpy as np

from .contextual import (
    CUSTOM,
    SOLVE_RTOL,
    SOLVE_TOL,
    CvSolution,
    Observable,
    build_cv_problem,
    custom_solution,
    default_grid,
    solve_minvar,
    solve_pinv,
)
from .errors import (
    DegenerateGridError,
    DimensionError,
    ImpossibleOutcomeError,
    NoContextualValuesError,
    NotDiagonalError,
)
from .measurement import VANISHING_PROB, MeasurementFamily, outcome_probabilities, povm_elements
from .operators import DensityMatrix, Postselection, anticommutator, commutator, double_commutator_diagonal

CONVERGES = "converges_to_weak_value"
ANOMALOUS = "anomalous"
INCONCLUSIVE = "inconclusive"

ANOMALY_FACTOR = 10.0
ANOMALY_FLOOR = 1e-6
# Below this the sweep cannot certify anything in double precision.
UNCERTAINTY_FLOOR = 1e-12


@dataclass(frozen=True)
class ConditionedAverageBreakdown:
    g: float
    value: float
    weak_term: float
    anomalous_term: float
    denominator: float


@dataclass(frozen=True)
class WeakLimitReport:
    sweep: List[ConditionedAverageBreakdown]
    limit_estimate: float
    limit_uncertainty: float
    weak_value: float
    anomaly_estimate: float
    verdict: str


def _postselection_prob(rho, post):
    if rho.dim != post.dim:
        raise DimensionError(f"state of dim {rho.dim} vs postselection of dim {post.dim}")
    prob = float(np.trace(post.projector @ rho.matrix).real)
    if prob <= VANISHING_PROB:
        raise ImpossibleOutcomeError(f"postselection probability {prob:.3g} vanishes")
    return prob


def weak_value(obs: Observable, rho: DensityMatrix, post: Postselection):
    if obs.dim != rho.dim:
        raise DimensionError(f"observable of dim {obs.dim} vs state of dim {rho.dim}")
    prob = _postselection_prob(rho, post)
    num = 0.5 * np.trace(post.projector @ anticommutator(obs.matrix, rho.matrix)).real
    return float(num / prob)


def _is_diagonal(m):
    return not np.any(m - np.diag(np.diag(m)))


def anomalous_matrix_at_g(fam: MeasurementFamily, g, sol: CvSolution, rho: DensityMatrix):
    """``S(g) = -1/2 sum_k alpha_k [M_k, [M_k, rho]]``."""
    if rho.dim != fam.dim:
        raise DimensionError(f"state of dim {rho.dim} vs family of dim {fam.dim}")
    ops = fam.operators(g)
    if len(sol.alpha) != len(ops):
        raise DimensionError(f"{len(sol.alpha)} contextual values for {len(ops)} outcomes")
    s = np.zeros((fam.dim, fam.dim), dtype=complex)
    for alpha, m in zip(sol.alpha, ops):
        if _is_diagonal(m):
            dc = double_commutator_diagonal(np.diag(m).real, rho.matrix)
        else:
            dc = commutator(m, commutator(m, rho.matrix))
        s -= 0.5 * alpha * dc
    return s


def conditioned_average(
    fam: MeasurementFamily,
    g,
    sol: CvSolution,
    rho: DensityMatrix,
    post: Postselection,
    obs: Observable = None,
):
    """Conditioned average of the contextual values given successful postselection.

    ``obs`` is the observable the solution was built for; when omitted it
    is reconstructed as ``sum_j alpha_j E_j``.
    """
    if post.dim != fam.dim:
        raise DimensionError(f"postselection of dim {post.dim} vs family of dim {fam.dim}")
    s = anomalous_matrix_at_g(fam, g, sol, rho)
    ops = fam.operators(g)
    pf = post.projector
    denom = float(sum(np.trace(m @ pf @ m @ rho.matrix).real for m in ops))
    if denom <= VANISHING_PROB:
        raise ImpossibleOutcomeError(f"postselection probability {denom:.3g} vanishes at g={g:g}")
    if obs is None:
        a = sum(alpha * (m.conj().T @ m) for alpha, m in zip(sol.alpha, ops))
    else:
        a = obs.matrix
    weak = 0.5 * np.trace(pf @ anticommutator(a, rho.matrix)).real / denom
    anomalous = np.trace(pf @ s).real / denom
    return ConditionedAverageBreakdown(
        g=float(g),
        value=float(weak + anomalous),
        weak_term=float(weak),
        anomalous_term=float(anomalous),
        denominator=denom,
    )


def raw_conditioned_average(fam, g, alpha, rho, post):
    """Direct ratio of the alpha-weighted and unweighted postselection probabilities."""
    ops = fam.operators(g)
    joint = np.array([np.trace(m @ post.projector @ m @ rho.matrix).real for m in ops])
    return float(np.dot(alpha, joint) / joint.sum())


Solver = Union[str, Callable[[float], np.ndarray]]


def solve_at(fam: MeasurementFamily, obs: Observable, solver: Solver, g, rho=None):
    """Contextual values for ``fam`` at ``g`` using ``solver``.

    ``solver`` is ``"pinv"``, ``"minvar"`` (needs ``rho``), or a callable
    returning alpha for a given g.
    """
    povm = povm_elements(fam, g)
    try:
        prob = build_cv_problem(povm, obs, source_g=g)
    except NotDiagonalError:
        if not callable(solver):
            raise
        alpha = np.asarray(solver(g), dtype=float)
        if alpha.shape != (len(povm),):
            raise DimensionError(f"alpha has shape {alpha.shape}, expected ({len(povm)},)")
        a = sum(x * e for x, e in zip(alpha, povm))
        res = float(np.max(np.abs(a - obs.matrix)))
        if res > SOLVE_TOL + SOLVE_RTOL * np.sum(np.abs(alpha)):
            raise NoContextualValuesError(
                f"custom alpha does not reproduce the observable at g={g:g} (residual {res:.3g})", res
            )
        alpha.setflags(write=False)
        return CvSolution(alpha=alpha, method=CUSTOM, residual=res)
    if solver == "pinv":
        return solve_pinv(prob)
    if solver == "minvar":
        if rho is None:
            raise ValueError("minvar solver needs the state to compute outcome probabilities")
        return solve_minvar(prob, outcome_probabilities(fam, g, rho))
    if callable(solver):
        return custom_solution(prob, solver(g))
    raise ValueError(f"unknown solver {solver!r}")


def _constant_term(gs, values):
    t = gs / gs.max()
    v = np.vander(t, 3, increasing=True)
    coef, *_ = np.linalg.lstsq(v, values, rcond=None)
    return float(coef[0]), float(np.linalg.norm(v @ coef - values))


def extrapolate_weak_limit(
    fam: MeasurementFamily,
    obs: Observable,
    solver: Solver,
    rho: DensityMatrix,
    post: Postselection,
    grid=None,
):
    """Sweep the conditioned average over ``grid`` and extrapolate to g -> 0.

    The sweep values are fitted with a quadratic in g; the constant term is
    the limit estimate.  Its uncertainty is the larger of the fit residual
    and the change in the constant when the smallest g is dropped.
    """
    grid = default_grid() if grid is None else list(grid)
    gs = np.array(sorted((float(g) for g in grid), reverse=True))
    if gs.size < 4 or np.unique(gs).size != gs.size or np.any(gs <= 0):
        raise DegenerateGridError("grid needs at least 4 distinct positive g values")
    wv = weak_value(obs, rho, post)

    sweep = []
    for g in gs:
        try:
            sol = solve_at(fam, obs, solver, g, rho)
        except NoContextualValuesError as exc:
            raise NoContextualValuesError(f"at g={g:g}: {exc}", exc.residual) from exc
        sweep.append(conditioned_average(fam, g, sol, rho, post, obs))

    values = np.array([b.value for b in sweep])
    limit, fit_residual = _constant_term(gs, values)
    partial, _ = _constant_term(gs[:-1], values[:-1])
    uncertainty = max(fit_residual, abs(limit - partial), UNCERTAINTY_FLOOR * max(1.0, abs(limit)))
    anomaly = limit - wv
    if abs(anomaly) > max(ANOMALY_FACTOR * uncertainty, ANOMALY_FLOOR):
        verdict = ANOMALOUS
    elif abs(anomaly) <= uncertainty:
        verdict = CONVERGES
    else:
        verdict = INCONCLUSIVE
    return WeakLimitReport(
        sweep=sweep,
        limit_estimate=limit,
        limit_uncertainty=uncertainty,
        weak_value=wv,
        anomaly_estimate=anomaly,
        verdict=verdict,
    )
