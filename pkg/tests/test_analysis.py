import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmfix.analysis import (
    PencilEvaluator,
    admissible_values,
    check_restricted_yielding,
    nedm_recovers_truth,
    nedm_solve,
    perturbation_spectrum,
    yielding_interval,
)
from edmfix.core import BlockClass, classify_block, kappa, kappa_dagger, kappa_star, unit_matrix
from edmfix.datasets import hard_example
from edmfix.exceptions import EDMError
from edmfix.facial import orthonormal_complement

from oracles import edm_of, is_edm_rank, plant, random_config


def psd(D, rel=1e-8):
    lam = np.linalg.eigvalsh(kappa_dagger(D))
    return lam[0] >= -rel * max(1.0, np.abs(lam).max())


# perturbation spectrum


def test_spectrum_k6():
    vp, lp, vm, lm = perturbation_spectrum(6, 3, 4)
    assert lp == 0.5 and lm == pytest.approx(-1 / 3)
    GE = kappa_dagger(unit_matrix(6, 3, 4))
    np.testing.assert_allclose(GE @ vp, lp * vp, atol=1e-12)
    np.testing.assert_allclose(GE @ vm, lm * vm, atol=1e-12)


def test_spectrum_k3_and_orthogonality():
    vp, _, vm, lm = perturbation_spectrum(3, 0, 2)
    assert lm == pytest.approx(-1 / 6)
    assert vp @ vm == pytest.approx(0, abs=1e-15)
    assert vp.sum() == pytest.approx(0) and vm.sum() == pytest.approx(0)


def test_spectrum_rejects_bad_indices():
    with pytest.raises(EDMError):
        perturbation_spectrum(2, 0, 1)
    with pytest.raises(EDMError):
        perturbation_spectrum(5, 2, 2)


@given(st.integers(3, 30), st.data())
def test_spectrum_reconstructs(k, data):
    i = data.draw(st.integers(0, k - 2))
    j = data.draw(st.integers(i + 1, k - 1))
    vp, lp, vm, lm = perturbation_spectrum(k, i, j)
    rebuilt = lp * np.outer(vp, vp) / (vp @ vp) + lm * np.outer(vm, vm) / (vm @ vm)
    np.testing.assert_allclose(rebuilt, kappa_dagger(unit_matrix(k, i, j)), atol=1e-12)


# yielding interval


def test_yield_hard_example_grid():
    D = hard_example(1.2)
    ya = yielding_interval(D, 3, 4, 3)
    grid = np.round(np.arange(-2.0, 15.0 + 1e-9, 0.05), 10)
    ok = ya.grid(grid)
    assert grid[ok].min() == pytest.approx(0.0, abs=0.05)
    assert grid[ok].max() == pytest.approx(12.8, abs=0.05)
    direct = np.array([ya.direct_is_edm(e) for e in grid])
    assert np.array_equal(ok, direct)
    lo, hi = ya.interval
    assert lo < 0 < hi


def test_yield_zero_always_edm(rng):
    D = edm_of(random_config(rng, 8, 3))
    ya = yielding_interval(D, 1, 5, 3)
    assert ya.edm_condition(0.0) and ya.contains(0.0)
    np.testing.assert_array_equal(ya.perturbed(0.0), D)


def test_yield_rejects_non_edm():
    with pytest.raises(EDMError):
        yielding_interval(hard_example(18.0), 3, 4, 3)


@settings(max_examples=20)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1), st.data())
def test_yield_condition_matches_direct(d, seed, data):
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(d + 2, d + 6))
    D = edm_of(random_config(rng, n, d))
    i = data.draw(st.integers(0, n - 2))
    j = data.draw(st.integers(i + 1, n - 1))
    ya = yielding_interval(D, i, j, d)
    lo, hi = ya.interval
    assert lo < 0 < hi
    left = lo if np.isfinite(lo) else -3 * D.max()
    right = hi if np.isfinite(hi) else 3 * D.max()
    for eps in np.linspace(left, right, 201)[1:-1]:
        assert ya.edm_condition(eps) == psd(ya.perturbed(eps))


# restricted yielding


def test_restricted_yielding_coincident_points():
    P = np.array([[0.0, 0], [0, 0], [0, 0], [1, 2], [3, -1]])
    diag = check_restricted_yielding(edm_of(P), 3, 4, 2)
    assert diag.restricted and diag.manifold_dim == 0


def test_restricted_yielding_hard_example_block():
    D1 = hard_example(14.0)[:5, :5]
    diag = check_restricted_yielding(D1, 3, 4, 3)
    assert diag.kind == "RestrictedYielding" and diag.manifold_dim == 1


def test_general_position_not_yielding(rng):
    D = edm_of(random_config(rng, 10, 3))
    assert check_restricted_yielding(D, 2, 7, 3).kind == "NotYielding"


# pencil


def test_pencil_hard_example():
    ev = PencilEvaluator(hard_example(18.0), 3)
    expect = {(3, 4): [1.2, 14.0], (3, 5): [2.0, 8.4], (4, 5): [6.0, 14.0]}
    for (a, b), vals in expect.items():
        got, iv = ev.values(a, b)
        assert iv is None
        np.testing.assert_allclose(sorted(got), vals, atol=1e-10)
    for v in (1.2, 14.0):
        D = hard_example(18.0)
        D[3, 4] = D[4, 3] = v
        assert classify_block(D, range(6), 3) is BlockClass.GOOD


def test_pencil_interval_on_restricted_pair():
    D = edm_of(np.array([[0.0, 0], [0, 0], [0, 0], [1, 2], [3, -1]]))
    vals, iv = admissible_values(D, 3, 4, 2)
    assert iv is not None and iv[0] < D[3, 4] < iv[1]


@settings(max_examples=25)
@given(st.integers(1, 4), st.integers(0, 2**32 - 1), st.data())
def test_pencil_recovers_planted_value(d, seed, data):
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(d + 3, d + 12))
    D0 = edm_of(random_config(rng, n, d))
    i = data.draw(st.integers(0, n - 2))
    j = data.draw(st.integers(i + 1, n - 1))
    alpha = data.draw(st.floats(0.05, 5.0)) * data.draw(st.sampled_from([-1, 1]))
    vals, iv = admissible_values(plant(D0, i, j, alpha), i, j, d)
    assert iv is None
    assert any(abs(v - D0[i, j]) <= 1e-8 * max(1.0, D0.max()) for v in vals)
    for v in vals:
        D = plant(D0, i, j, alpha)
        D[i, j] = D[j, i] = v
        assert is_edm_rank(D, d)


# nearest EDM


def test_nedm_fixed_point(rng):
    D = edm_of(random_config(rng, 7, 2))
    res = nedm_solve(D)
    assert res.converged
    np.testing.assert_allclose(res.D_nearest, D, atol=1e-8 * D.max())


def test_nedm_coincident_pair_recovered(rng):
    P = random_config(rng, 8, 2)
    P[5] = P[2]
    D0 = edm_of(P)
    res = nedm_solve(plant(D0, 2, 5, -1.0))
    assert np.linalg.norm(res.D_nearest - D0) <= 1e-6 * np.linalg.norm(D0)
    assert nedm_recovers_truth(D0, 2, 5, -1.0)


def test_nedm_positive_distance_not_recovered(rng):
    D0 = edm_of(random_config(rng, 8, 2))
    Dn = plant(D0, 1, 6, -0.5 * D0[1, 6] - 0.5)
    res = nedm_solve(Dn)
    assert np.linalg.norm(res.D_nearest - D0) > 1e-5 * np.linalg.norm(D0)
    assert not nedm_recovers_truth(D0, 1, 6, -0.5 * D0[1, 6] - 0.5)


def test_nedm_closed_form_cases():
    P = np.array([[0.0, 0], [1, 0], [1, 0], [0, 2], [3, 1]])
    D0 = edm_of(P)
    assert nedm_recovers_truth(D0, 1, 2, -0.5)
    # D0[0, 3] = 4
    assert D0[0, 3] == 4.0
    assert not nedm_recovers_truth(D0, 0, 3, -4.5)
    assert not nedm_recovers_truth(D0, 1, 2, 0.5)
    triangle = edm_of(np.array([[0.0, 0], [2, 0], [0, 2]]))
    with pytest.raises(EDMError):
        nedm_recovers_truth(triangle, 0, 1, 0.1)  # still an EDM


def test_nedm_objective_monotone_and_optimal(rng):
    D0 = edm_of(random_config(rng, 9, 3))
    Dn = plant(D0, 0, 4, 3.0)
    Dn = plant(Dn, 2, 7, -2.0)
    res = nedm_solve(Dn)
    h = np.array(res.history)
    assert np.all(np.diff(h) <= 1e-12 * max(1.0, h[0]))
    V = orthonormal_complement(np.ones(9))
    grad = V.T @ kappa_star(res.D_nearest - Dn) @ V
    X = res.X_bar
    for _ in range(50):
        A = rng.standard_normal((8, 8))
        Y = A @ A.T
        assert np.sum(grad * (Y - X)) >= -1e-7 * np.linalg.norm(grad) * np.linalg.norm(Y - X)


@given(st.integers(3, 31), st.integers(0, 2**32 - 1))
def test_kv_adjoint_positive_definite(n, seed):
    rng = np.random.default_rng(seed)
    V = orthonormal_complement(np.ones(n))
    A = rng.standard_normal((n - 1, n - 1))
    X = A + A.T
    val = np.sum(X * (V.T @ kappa_star(kappa(V @ X @ V.T)) @ V))
    assert val > 0
