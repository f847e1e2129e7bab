import numpy as np
import pytest

from ctxvalues.contextual import CvSolution, Observable, default_grid
from ctxvalues.errors import DegenerateGridError, DimensionError, ImpossibleOutcomeError, NoContextualValuesError
from ctxvalues.families import dj3x3_family, identity_family, version1_family
from ctxvalues.measurement import tabulated_family
from ctxvalues.operators import projector_from_vector, validate_density
from ctxvalues.weaklimit import (
    ANOMALOUS,
    CONVERGES,
    anomalous_matrix_at_g,
    conditioned_average,
    extrapolate_weak_limit,
    raw_conditioned_average,
    solve_at,
    weak_value,
)

from conftest import random_density, random_hermitian, random_positive_family_ops

V1 = version1_family(1.0, 1.0)
DJ = dj3x3_family()


def version1_limit_oracle(f, rho):
    """Closed-form weak limit for version1, A = I, alpha_1 = alpha_2 = 1/g**2."""
    f1, f2 = f
    cross = np.real(np.conj(f2) * f1 * rho[1, 0])
    denom = abs(f1) ** 2 * rho[0, 0] + 2 * cross + abs(f2) ** 2 * rho[1, 1]
    return 1.0 + -8 * cross / denom


def test_weak_value_examples(rng):
    for _ in range(10):
        rho = random_density(rng, 3)
        post = projector_from_vector(rng.normal(size=3) + 1j * rng.normal(size=3))
        assert weak_value(Observable(np.eye(3)), rho, post) == pytest.approx(1.0)
    rho = validate_density(np.eye(2) / 2)
    assert weak_value(Observable(np.diag([1.0, 0.0])), rho, projector_from_vector([1, 0])) == pytest.approx(1.0)


def test_weak_value_pure_state(rng):
    for _ in range(20):
        psi = rng.normal(size=3) + 1j * rng.normal(size=3)
        psi /= np.linalg.norm(psi)
        f = rng.normal(size=3) + 1j * rng.normal(size=3)
        f /= np.linalg.norm(f)
        a = random_hermitian(rng, 3)
        inner = np.vdot(f, psi)
        expected = np.real(np.vdot(f, a @ psi) * np.conj(inner)) / abs(inner) ** 2
        rho = validate_density(np.outer(psi, psi.conj()))
        assert weak_value(Observable(a), rho, projector_from_vector(f)) == pytest.approx(expected, rel=1e-10)


def test_weak_value_vanishing_postselection():
    with pytest.raises(ImpossibleOutcomeError):
        weak_value(Observable(np.eye(2)), validate_density(np.diag([1.0, 0.0])), projector_from_vector([0, 1]))


def test_conditioned_average_identity_family(rng):
    fam = identity_family(3, 1).family
    sol = CvSolution(np.array([2.5]), "custom", 0.0)
    for _ in range(5):
        rho = random_density(rng, 3)
        post = projector_from_vector(rng.normal(size=3))
        assert conditioned_average(fam, 0.5, sol, rho, post).value == pytest.approx(2.5)


def test_conditioned_average_version1_counterexample(counterexample_state, diagonal_post):
    g = 1e-3
    sol = solve_at(V1.family, V1.observable, V1.closed_form_solutions["inverse_square"], g)
    out = conditioned_average(V1.family, g, sol, counterexample_state, diagonal_post, V1.observable)
    assert out.value == pytest.approx(1 - 0.8 / 0.7, abs=2e-3)
    assert out.anomalous_term == pytest.approx(-0.8 / 0.7, abs=2e-3)


def test_conditioned_average_split_matches_raw_numerator(state3):
    g = 1e-2
    post = projector_from_vector([1, 1, 1])
    sol = solve_at(DJ.family, DJ.observable, "pinv", g)
    out = conditioned_average(DJ.family, g, sol, state3, post, DJ.observable)
    assert abs(out.value - out.weak_term - out.anomalous_term) <= 1e-10 * max(1, abs(out.value))
    raw = raw_conditioned_average(DJ.family, g, sol.alpha, state3, post)
    assert out.value == pytest.approx(raw, abs=1e-10)


def test_split_identity_random_non_commuting(rng):
    for _ in range(100):
        n, k = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        ops = random_positive_family_ops(rng, n, k)
        fam = tabulated_family({0.1: ops})
        alpha = rng.normal(size=k) * 5
        obs = Observable(sum(a * m @ m for a, m in zip(alpha, ops)))
        rho = random_density(rng, n)
        post = projector_from_vector(rng.normal(size=n) + 1j * rng.normal(size=n))
        sol = solve_at(fam, obs, lambda g: alpha, 0.1)
        out = conditioned_average(fam, 0.1, sol, rho, post, obs)
        raw = raw_conditioned_average(fam, 0.1, alpha, rho, post)
        assert abs(out.value - raw) <= 1e-10 * max(1, abs(raw))
        assert abs(out.value - out.weak_term - out.anomalous_term) <= 1e-10 * max(1, abs(out.value))


def test_conditioned_average_without_observable_reconstructs_it(counterexample_state, diagonal_post):
    g = 0.05
    sol = solve_at(V1.family, V1.observable, "pinv", g)
    with_obs = conditioned_average(V1.family, g, sol, counterexample_state, diagonal_post, V1.observable)
    without = conditioned_average(V1.family, g, sol, counterexample_state, diagonal_post)
    assert without.value == pytest.approx(with_obs.value, abs=1e-12)


def test_conditioned_average_dimension_mismatch(counterexample_state):
    sol = solve_at(V1.family, V1.observable, "pinv", 0.1)
    with pytest.raises(DimensionError):
        conditioned_average(V1.family, 0.1, sol, counterexample_state, projector_from_vector([1, 1, 1]))


def test_anomalous_matrix_examples(counterexample_state, state3):
    fam = identity_family(2, 2).family
    sol = CvSolution(np.array([1e8, -3.0]), "custom", 0.0)
    assert not np.any(anomalous_matrix_at_g(fam, 0.1, sol, counterexample_state))

    rho = counterexample_state.matrix
    for g in (0.1, 1e-2, 1e-4):
        sol = CvSolution(V1.closed_form_solutions["inverse_square"](g), "custom", 0.0)
        s = anomalous_matrix_at_g(V1.family, g, sol, counterexample_state)
        assert s[0, 1] == pytest.approx(-4 * rho[0, 1], rel=1e-8)
        assert s[0, 0] == 0 and s[1, 1] == 0

    vals = []
    for g in (1e-3, 1e-4, 1e-5):
        sol = solve_at(DJ.family, DJ.observable, "pinv", g)
        vals.append(anomalous_matrix_at_g(DJ.family, g, sol, state3)[0, 1].real)
    assert abs(vals[-1]) > 1e-3
    assert vals[-1] / state3.matrix[0, 1].real == pytest.approx(-5 / 48, rel=1e-3)


def test_anomalous_term_sign_convention(counterexample_state, diagonal_post):
    g = 1e-2
    sol = solve_at(V1.family, V1.observable, V1.closed_form_solutions["inverse_square"], g)
    out = conditioned_average(V1.family, g, sol, counterexample_state, diagonal_post, V1.observable)
    s = anomalous_matrix_at_g(V1.family, g, sol, counterexample_state)
    expected = np.trace(diagonal_post.projector @ s).real / out.denominator
    assert out.anomalous_term == pytest.approx(expected, rel=1e-12)


def test_anomalous_term_g_independent_for_inverse_square(counterexample_state, diagonal_post):
    terms = []
    for g in (1e-2, 1e-4):
        sol = solve_at(V1.family, V1.observable, V1.closed_form_solutions["inverse_square"], g)
        terms.append(conditioned_average(V1.family, g, sol, counterexample_state, diagonal_post, V1.observable).anomalous_term)
    assert abs(terms[0] - terms[1]) < 1e-3


def test_weak_term_converges_to_weak_value(rng):
    for entry in (V1, DJ, version1_family(1.0, 0.0)):
        rho = random_density(rng, entry.family.dim)
        post = projector_from_vector(rng.normal(size=entry.family.dim))
        rep = extrapolate_weak_limit(entry.family, entry.observable, "pinv", rho, post)
        gs = np.array([b.g for b in rep.sweep])
        weak = np.array([b.weak_term for b in rep.sweep])
        const = np.polyfit(gs, weak, 2)[-1]
        assert const == pytest.approx(rep.weak_value, abs=1e-6)


def test_extrapolate_identity_family(rng):
    entry = identity_family(2, 3)
    for c in (1.0, -2.5):
        obs = Observable(c * np.eye(2))
        rep = extrapolate_weak_limit(entry.family, obs, "pinv", random_density(rng, 2), projector_from_vector([1, 1j]))
        assert rep.limit_estimate == pytest.approx(c, abs=1e-12)
        assert rep.verdict == CONVERGES


def test_extrapolate_version1(counterexample_state, diagonal_post):
    rep = extrapolate_weak_limit(
        V1.family, V1.observable, V1.closed_form_solutions["inverse_square"], counterexample_state, diagonal_post
    )
    assert rep.anomaly_estimate == pytest.approx(-0.8 / 0.7, abs=1e-3)
    assert rep.limit_estimate == pytest.approx(version1_limit_oracle((1 / np.sqrt(2), 1 / np.sqrt(2)), counterexample_state.matrix), abs=1e-3)
    assert rep.verdict == ANOMALOUS


def test_extrapolate_version1_general_postselection(rng, counterexample_state):
    for _ in range(5):
        f = rng.normal(size=2) + 1j * rng.normal(size=2)
        f /= np.linalg.norm(f)
        rep = extrapolate_weak_limit(
            V1.family, V1.observable, V1.closed_form_solutions["inverse_square"], counterexample_state, projector_from_vector(f)
        )
        assert rep.limit_estimate == pytest.approx(version1_limit_oracle(f, counterexample_state.matrix), abs=1e-6)


def test_extrapolate_dj3x3(state3):
    rep = extrapolate_weak_limit(DJ.family, DJ.observable, "pinv", state3, projector_from_vector([1, 1, 1]))
    assert rep.verdict == ANOMALOUS
    assert abs(rep.anomaly_estimate) > 1e-3


def test_verdict_stable_when_grid_extended(counterexample_state, diagonal_post, state3):
    grid = default_grid()
    longer = grid + [grid[-1] / 2]
    cases = [
        (V1, V1.closed_form_solutions["inverse_square"], counterexample_state, diagonal_post),
        (DJ, "pinv", state3, projector_from_vector([1, 1, 1])),
    ]
    for entry, solver, rho, post in cases:
        for g in (grid, longer):
            assert extrapolate_weak_limit(entry.family, entry.observable, solver, rho, post, g).verdict == ANOMALOUS


def test_extrapolate_minvar_runs(counterexample_state, diagonal_post):
    entry = version1_family(1.0, 0.0)
    rep = extrapolate_weak_limit(entry.family, entry.observable, "minvar", counterexample_state, diagonal_post)
    assert len(rep.sweep) == 8


def test_extrapolate_errors(counterexample_state, diagonal_post):
    with pytest.raises(DegenerateGridError):
        extrapolate_weak_limit(V1.family, V1.observable, "pinv", counterexample_state, diagonal_post, [0.1, 0.05, 0.02])
    with pytest.raises(NoContextualValuesError, match="g=0.01"):
        extrapolate_weak_limit(
            V1.family, V1.observable, lambda g: np.ones(3) * 5, counterexample_state, diagonal_post
        )
