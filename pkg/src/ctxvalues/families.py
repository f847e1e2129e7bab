"""Built-in measurement families with their observables and closed-form contextual values."""

from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .contextual import Observable, build_cv_problem, solve_pinv
from .measurement import MeasurementFamily, diagonal_family, povm_elements


@dataclass(frozen=True, eq=False)
class ExampleCatalogEntry:
    name: str
    family: MeasurementFamily
    observable: Observable
    closed_form_solutions: Dict[str, Callable[[float], np.ndarray]] = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def problem(self, g):
        return build_cv_problem(povm_elements(self.family, g), self.observable, source_g=g)


def _numeric_pinv(family, observable):
    def alpha(g):
        return np.array(solve_pinv(build_cv_problem(povm_elements(family, g), observable, g)).alpha)

    return alpha


def version1_family(a=1.0, b=1.0):
    """Three 2x2 diagonal operators; M_3 is a multiple of the identity."""
    a, b = float(a), float(b)

    def diagonals(g):
        m3 = np.sqrt(0.5 - 2 * g * g)
        return [(0.5 + g, 0.5 - g), (0.5 - g, 0.5 + g), (m3, m3)]

    fam = diagonal_family(diagonals, g_max=0.2, label="version1")
    obs = Observable(np.diag([a, b]).astype(complex))

    def inverse_square(g):
        a1 = 1.0 / g**2
        a2 = a1 - (a - b) / (2 * g)
        a3 = (a - (0.5 + g) ** 2 * a1 - (0.5 - g) ** 2 * a2) / (0.5 - 2 * g * g)
        return np.array([a1, a2, a3])

    return ExampleCatalogEntry(
        name="version1",
        family=fam,
        observable=obs,
        closed_form_solutions={"inverse_square": inverse_square, "pinv": _numeric_pinv(fam, obs)},
        params={"a": a, "b": b},
    )


def dj3x3_family():
    """Three 3x3 diagonal operators with an invertible F, observable diag(1, 0, 0)."""

    def diagonals(g):
        return [
            np.sqrt([0.5 + g, 0.5, 0.5 + g]),
            np.sqrt([1 / 3 + g * g, 1 / 3 + g, 1 / 3]),
            np.sqrt([1 / 6 - g - g * g, 1 / 6 - g, 1 / 6 - g]),
        ]

    fam = diagonal_family(diagonals, g_max=0.14, label="dj3x3")
    obs = Observable(np.diag([1.0, 0.0, 0.0]).astype(complex))

    def pinv(g):
        lead = (1 - 6 * g) / (6 * g * g)
        return np.array([lead, lead, (-5 - 6 * g) / (6 * g * g)])

    return ExampleCatalogEntry(
        name="dj3x3", family=fam, observable=obs, closed_form_solutions={"pinv": pinv}
    )


def dj3x3_inverse(g):
    """Closed-form inverse of the dj3x3 F matrix.

    Entry (1, 2) is ``-(1 - 2g)/(2g)``; with a plus sign ``F @ inverse``
    is not the identity.
    """
    g2 = 6 * g * g
    return np.array(
        [
            [(1 - 6 * g) / g2, -(1 - 2 * g) / (2 * g), (-1 + 9 * g) / g2],
            [(1 - 6 * g) / g2, (1 + 2 * g) / (2 * g), (-1 + 3 * g) / g2],
            [(-5 - 6 * g) / g2, (1 + 2 * g) / (2 * g), (3 * g + 5) / g2],
        ]
    )


def identity_family(dim=2, n=1):
    """``n`` copies of ``I/sqrt(n)``; observable is the identity."""
    dim, n = int(dim), int(n)
    if dim < 1 or n < 1:
        raise ValueError("identity family needs dim >= 1 and n >= 1")
    m = np.eye(dim, dtype=complex) / np.sqrt(n)
    fam = MeasurementFamily(
        dim=dim, n_outcomes=n, evaluate=lambda g: [m] * n, g_max=1.0, label="identity"
    )
    obs = Observable(np.eye(dim, dtype=complex))
    return ExampleCatalogEntry(
        name="identity",
        family=fam,
        observable=obs,
        closed_form_solutions={"uniform": lambda g: np.ones(n)},
        params={"dim": dim, "n": n},
    )


BUILTINS = {
    "version1": version1_family,
    "dj3x3": dj3x3_family,
    "identity": identity_family,
}


def get_entry(name, **params):
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown builtin family {name!r}; choose from {sorted(BUILTINS)}") from None
    return factory(**params)
