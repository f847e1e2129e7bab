"""Parametric families of positive measurement operators and their statistics."""

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, DomainError, ImpossibleOutcomeError, InvalidFamilyError
from .operators import DensityMatrix, Postselection, as_matrix, hermiticity_residual, min_eigenvalue

COMPLETENESS_TOL = 1e-12
OPERATOR_POSITIVITY_TOL = 1e-10
VANISHING_PROB = 1e-14


@dataclass(frozen=True, eq=False)
class MeasurementFamily:
    """Map ``g -> [M_1(g), ..., M_N(g)]`` of Hermitian PSD operators on ``(0, g_max]``.

    ``evaluate`` must return a sequence of ``n_outcomes`` square arrays of
    size ``dim``.  ``check_points`` are the g values validated at
    construction; when omitted, ``g_max``, ``g_max/10`` and ``g_max/100``
    are used.
    """

    dim: int
    n_outcomes: int
    evaluate: Callable[[float], Sequence[np.ndarray]]
    g_max: float
    label: str = ""
    check_points: tuple = ()

    def __post_init__(self):
        if self.dim < 1 or self.n_outcomes < 1:
            raise InvalidFamilyError("family needs dim >= 1 and at least one outcome")
        if not self.g_max > 0:
            raise InvalidFamilyError(f"g_max must be positive, got {self.g_max}")
        points = self.check_points or (self.g_max, self.g_max / 10, self.g_max / 100)
        for g in points:
            ops = self.operators(g)
            for j, m in enumerate(ops):
                herm = hermiticity_residual(m)
                if herm > OPERATOR_POSITIVITY_TOL:
                    raise InvalidFamilyError(
                        f"{self.label}: M_{j + 1}({g:g}) not Hermitian (residual {herm:.3g})"
                    )
                lam = min_eigenvalue(m)
                if lam < -OPERATOR_POSITIVITY_TOL:
                    raise InvalidFamilyError(
                        f"{self.label}: M_{j + 1}({g:g}) has negative eigenvalue {lam:.3g}"
                    )
            res = _completeness(ops)
            if res > COMPLETENESS_TOL:
                raise InvalidFamilyError(
                    f"{self.label}: sum of M_j^2 differs from identity by {res:.3g} at g={g:g}"
                )

    def check_domain(self, g):
        if not (0.0 < g <= self.g_max):
            raise DomainError(f"g={g!r} outside the domain (0, {self.g_max}] of family {self.label!r}")

    def operators(self, g):
        """Measurement operators at ``g`` as complex arrays (domain checked)."""
        self.check_domain(g)
        ops = [as_matrix(m) for m in self.evaluate(g)]
        if len(ops) != self.n_outcomes:
            raise InvalidFamilyError(
                f"{self.label}: expected {self.n_outcomes} operators at g={g:g}, got {len(ops)}"
            )
        for m in ops:
            if m.shape[0] != self.dim:
                raise DimensionError(f"{self.label}: operator of dim {m.shape[0]}, expected {self.dim}")
        return ops


def diagonal_family(diagonals, g_max, label="", check_points=()):
    """Family whose operators are diagonal, given as ``g -> list of real diagonals``."""
    probe = diagonals(g_max)

    def evaluate(g):
        return [np.diag(np.asarray(d, dtype=float)).astype(np.complex128) for d in diagonals(g)]

    return MeasurementFamily(
        dim=len(probe[0]),
        n_outcomes=len(probe),
        evaluate=evaluate,
        g_max=g_max,
        label=label,
        check_points=check_points,
    )


def tabulated_family(table, label="table"):
    """Family defined only at the g values of ``table`` (a ``{g: [M_j]}`` mapping)."""
    if not table:
        raise InvalidFamilyError("tabulated family needs at least one g")
    items = sorted((float(g), [as_matrix(m) for m in ops]) for g, ops in table.items())
    keys = np.array([g for g, _ in items])

    def evaluate(g):
        k = int(np.argmin(np.abs(keys - g)))
        if abs(keys[k] - g) > 1e-12 * max(1.0, abs(g)):
            raise DomainError(f"g={g!r} is not one of the tabulated values of {label!r}")
        return items[k][1]

    first = items[0][1]
    return MeasurementFamily(
        dim=first[0].shape[0],
        n_outcomes=len(first),
        evaluate=evaluate,
        g_max=float(keys[-1]),
        label=label,
        check_points=tuple(keys),
    )


@dataclass(frozen=True, eq=False)
class PovmSet:
    elements: tuple

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True)
class PostselectionStats:
    joint: np.ndarray
    conditional: np.ndarray
    success_prob: float


def _completeness(ops):
    dim = ops[0].shape[0]
    total = sum(m.conj().T @ m for m in ops)
    return float(np.max(np.abs(total - np.eye(dim))))


def _check_state(fam, rho):
    if rho.dim != fam.dim:
        raise DimensionError(f"state of dim {rho.dim} does not match family dim {fam.dim}")


def povm_elements(fam, g):
    return PovmSet(tuple(m.conj().T @ m for m in fam.operators(g)))


def completeness_residual(fam, g):
    return _completeness(fam.operators(g))


def outcome_probabilities(fam, g, rho: DensityMatrix):
    _check_state(fam, rho)
    p = np.array([np.trace(e @ rho.matrix).real for e in povm_elements(fam, g)])
    return np.clip(p, 0.0, 1.0)


def post_measurement_state(m, rho: DensityMatrix):
    """Return the normalized state after outcome ``m`` and its probability ``eta``."""
    m = as_matrix(m)
    if m.shape[0] != rho.dim:
        raise DimensionError(f"operator of dim {m.shape[0]} vs state of dim {rho.dim}")
    unnorm = m @ rho.matrix @ m.conj().T
    eta = float(np.trace(unnorm).real)
    if eta <= VANISHING_PROB:
        raise ImpossibleOutcomeError(f"outcome has probability {eta:.3g}")
    out = unnorm / eta
    out.setflags(write=False)
    return DensityMatrix(out), eta


def postselection_stats(fam, g, rho: DensityMatrix, post: Postselection):
    _check_state(fam, rho)
    if post.dim != fam.dim:
        raise DimensionError(f"postselection of dim {post.dim} does not match family dim {fam.dim}")
    pf = post.projector
    joint = np.array(
        [np.trace(m.conj().T @ pf @ m @ rho.matrix).real for m in fam.operators(g)]
    )
    success = float(joint.sum())
    if success <= VANISHING_PROB:
        raise ImpossibleOutcomeError(f"postselection succeeds with probability {success:.3g}")
    return PostselectionStats(joint=joint, conditional=joint / success, success_prob=success)


def weakness_residual(fam, g, rho: DensityMatrix):
    """Largest max-norm distance between a post-measurement state and ``rho``.

    Impossible outcomes are skipped.
    """
    _check_state(fam, rho)
    worst = None
    for m in fam.operators(g):
        try:
            after, _ = post_measurement_state(m, rho)
        except ImpossibleOutcomeError:
            continue
        d = float(np.max(np.abs(after.matrix - rho.matrix)))
        worst = d if worst is None else max(worst, d)
    if worst is None:
        raise ImpossibleOutcomeError(f"every outcome is impossible at g={g:g}")
    return worst


def denominator_deviation(fam, g, rho: DensityMatrix, post: Postselection):
    """``sum_j tr[P_f M_j rho M_j] - tr[P_f rho]``; tends to zero in the weak limit."""
    stats = postselection_stats(fam, g, rho, post)
    return stats.success_prob - float(np.trace(post.projector @ rho.matrix).real)


def fitted_order(gs, values):
    """Leading exponent ``p`` of ``value ~ C g**p (1 + d g)`` by least squares.

    Fits ``log|value| = log C + p log g + d g``; the ``d g`` term absorbs the
    first correction so that e.g. ``g - g**2`` reports order 1, not slightly less.
    With fewer than four points the correction term is dropped.
    """
    gs = np.asarray(gs, dtype=float)
    v = np.abs(np.asarray(values, dtype=float))
    if gs.size < 2 or np.any(gs <= 0) or np.any(v == 0):
        raise ValueError("order fit needs at least two positive g and nonzero values")
    cols = [np.ones_like(gs), np.log(gs)]
    if gs.size >= 4:
        cols.append(gs)
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), np.log(v), rcond=None)
    return float(coef[1])
