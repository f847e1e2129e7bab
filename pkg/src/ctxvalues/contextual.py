"""Contextual values: the linear system ``F alpha = a`` and its solutions.

For a POVM ``{E_j}`` and observable ``A`` that are simultaneously
diagonal, ``A = sum_j alpha_j E_j`` reduces to ``F alpha = a`` with
``F[m, j] = (E_j)[m, m]`` and ``a = diag(A)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGridError, DimensionError, NoContextualValuesError, NotDiagonalError
from .operators import HERMITIAN_TOL, as_matrix, hermiticity_residual

RANK_RTOL = 1e-12
SOLVE_TOL = 1e-9
# Rounding allowance per unit of |F| |alpha|; alpha grows like 1/g**2 near the weak limit.
SOLVE_RTOL = 1e-13
WEIGHT_FLOOR = 1e-15
DIAGONAL_TOL = 1e-12

PSEUDO_INVERSE = "pseudo_inverse"
MIN_VARIANCE = "min_variance"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_matrix(self.matrix)
        res = hermiticity_residual(m)
        if res > HERMITIAN_TOL:
            raise ValueError(f"observable is not Hermitian (residual {res:.3g})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def eigenvalues(self):
        """Diagonal entries; these are the eigenvalues when the matrix is diagonal."""
        return np.diag(self.matrix).real.copy()


@dataclass(frozen=True, eq=False)
class CvProblem:
    f_matrix: np.ndarray
    target: np.ndarray
    source_g: float = float("nan")


@dataclass(frozen=True, eq=False)
class CvSolution:
    alpha: np.ndarray
    method: str
    residual: float


@dataclass(frozen=True)
class CvStatistics:
    mean: float
    second_moment: float
    variance: float
    bound_star: float
    bound_dstar: float


def _offdiag(m):
    m = np.asarray(m)
    return float(np.max(np.abs(m - np.diag(np.diag(m))))) if m.shape[0] > 1 else 0.0


def build_cv_problem(povm, obs: Observable, source_g=float("nan")):
    """Assemble ``F`` and ``a`` from commuting diagonal POVM elements and observable."""
    elements = [as_matrix(e) for e in povm]
    for j, e in enumerate(elements):
        if e.shape[0] != obs.dim:
            raise DimensionError(f"E_{j + 1} has dim {e.shape[0]}, observable has dim {obs.dim}")
    worst = max([_offdiag(e) for e in elements] + [_offdiag(obs.matrix)])
    if worst > DIAGONAL_TOL:
        raise NotDiagonalError(
            f"POVM elements and observable must be simultaneously diagonal "
            f"(off-diagonal magnitude {worst:.3g}); diagonalize them in a common basis first"
        )
    f = np.column_stack([np.diag(e).real for e in elements])
    return CvProblem(f_matrix=f, target=obs.eigenvalues, source_g=float(source_g))


def _svd(f):
    f = np.atleast_2d(np.asarray(f, dtype=float))
    u, s, vh = np.linalg.svd(f, full_matrices=True)
    cutoff = RANK_RTOL * (s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff)) if s.size and s[0] > 0 else 0
    return u, s, vh, rank


def pseudo_inverse(f):
    """Moore-Penrose pseudo-inverse via SVD, truncating singular values below the cutoff."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    u, s, vh, r = _svd(f)
    return (vh[:r].T / s[:r]) @ u[:, :r].T


def _null_matrix(f):
    _, _, vh, r = _svd(f)
    return vh[r:].T


def nullspace_basis(f):
    """Orthonormal basis of ``{x : F x = 0}`` as a list of vectors."""
    n = _null_matrix(f)
    return [n[:, k].copy() for k in range(n.shape[1])]


def _residual(f, alpha, target):
    return float(np.linalg.norm(f @ alpha - target))


def solve_tolerance(f, alpha):
    """Accepted ``||F alpha - a||``: absolute floor plus a backward-error term."""
    scale = np.linalg.norm(f, 2) * np.linalg.norm(alpha) if np.size(f) else 0.0
    return SOLVE_TOL + SOLVE_RTOL * scale


def _finish(prob, alpha, method):
    res = _residual(prob.f_matrix, alpha, prob.target)
    if res > solve_tolerance(prob.f_matrix, alpha):
        raise NoContextualValuesError(
            f"no exact contextual values exist at g={prob.source_g:g}: "
            f"||F alpha - a|| = {res:.3g}",
            res,
        )
    alpha = np.asarray(alpha, dtype=float)
    alpha.setflags(write=False)
    return CvSolution(alpha=alpha, method=method, residual=res)


def solve_pinv(prob: CvProblem):
    alpha = pseudo_inverse(prob.f_matrix) @ prob.target
    return _finish(prob, alpha, PSEUDO_INVERSE)


def custom_solution(prob: CvProblem, alpha):
    """Wrap a user-supplied ``alpha`` after checking that it solves ``prob``."""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (prob.f_matrix.shape[1],):
        raise DimensionError(f"alpha has shape {alpha.shape}, expected ({prob.f_matrix.shape[1]},)")
    return _finish(prob, alpha, CUSTOM)


def _check_probabilities(p, n):
    p = np.asarray(p, dtype=float)
    if p.shape != (n,):
        raise DimensionError(f"probability vector has shape {p.shape}, expected ({n},)")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-10:
        raise ValueError("p must be a probability vector")
    return p


def solve_minvar(prob: CvProblem, p):
    """Solution of ``F alpha = a`` minimizing the second moment ``sum_j p_j alpha_j**2``.

    With every ``p_j`` above the weight floor this is the weighted
    least-norm solution ``W^-1/2 (F W^-1/2)^+ a``.  Otherwise the
    objective does not see the zero-probability components, and the
    minimizer of least Euclidean norm is returned.
    """
    f = prob.f_matrix
    p = _check_probabilities(p, f.shape[1])
    if np.all(p > WEIGHT_FLOOR):
        scale = 1.0 / np.sqrt(p)
        alpha = scale * (pseudo_inverse(f * scale) @ prob.target)
        return _finish(prob, alpha, MIN_VARIANCE)

    # Parametrize alpha = alpha0 + N c and minimize (alpha0 + N c)^T W (alpha0 + N c).
    w = np.where(p > WEIGHT_FLOOR, p, 0.0)
    alpha0 = pseudo_inverse(f) @ prob.target
    null = _null_matrix(f)
    if null.shape[1] == 0:
        return _finish(prob, alpha0, MIN_VARIANCE)
    gram = null.T @ (w[:, None] * null)
    c = -pseudo_inverse(gram) @ (null.T @ (w * alpha0))
    alpha = alpha0 + null @ c
    free = null @ _null_matrix(gram)
    if free.shape[1]:
        alpha = alpha - free @ (free.T @ alpha)
    return _finish(prob, alpha, MIN_VARIANCE)


def necessary_condition_residual(prob: CvProblem, sol: CvSolution, p):
    """Norm of the projection of ``(p_j alpha_j)`` onto the nullspace of ``F``.

    Zero is necessary for ``sol`` to minimize the second moment.
    """
    p = np.asarray(p, dtype=float)
    if p.shape != sol.alpha.shape:
        raise DimensionError("p and alpha differ in length")
    null = _null_matrix(prob.f_matrix)
    if null.shape[1] == 0:
        return 0.0
    return float(np.linalg.norm(null.T @ (p * sol.alpha)))


def cv_statistics(alpha, p):
    alpha = np.asarray(alpha, dtype=float)
    p = np.asarray(p, dtype=float)
    if alpha.shape != p.shape:
        raise DimensionError(f"alpha has {alpha.size} entries, p has {p.size}")
    mean = float(p @ alpha)
    second = float(p @ alpha**2)
    return CvStatistics(
        mean=mean,
        second_moment=second,
        variance=second - mean**2,
        bound_star=float(np.sum(alpha**2)),
        bound_dstar=float(np.sqrt(np.sum(alpha**4))),
    )


def default_grid(g0=1e-2, ratio=0.5, count=8):
    return [g0 * ratio**k for k in range(count)]


def fit_leading_order(samples, power):
    """Estimate ``lim_{g->0} g**power * value(g)`` from ``(g, value)`` samples.

    ``g**power * value`` is fitted by least squares to ``c0 + c1 g + c2 g**2``
    and ``c0`` is returned.
    """
    samples = [(float(g), float(v)) for g, v in samples]
    if len(samples) < 4:
        raise DegenerateGridError(f"need at least 4 samples, got {len(samples)}")
    gs = np.array([g for g, _ in samples])
    if np.any(gs <= 0):
        raise DegenerateGridError("all g must be positive")
    if np.unique(gs).size < 4:
        raise DegenerateGridError("need at least 4 distinct g values")
    ys = np.array([v for _, v in samples]) * gs**power
    t = gs / gs.max()
    coef, *_ = np.linalg.lstsq(np.vander(t, 3, increasing=True), ys, rcond=None)
    return float(coef[0])
