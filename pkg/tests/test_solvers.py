import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmfix.core import kappa
from edmfix.datasets import HARD_SUITE, gale_example, hard_example
from edmfix.exceptions import EDMError, HardCaseNeeded, NoCorruptionFound, UnsolvableHardCase
from edmfix.instance import GenSpec, generate
from edmfix.solvers import (
    SOLVERS,
    Correction,
    NoisyInstance,
    complete_from_faces,
    find_anchor,
    locate_in_small_block,
    solve,
    solve_biev,
    solve_hard,
    solve_mbfv,
    solve_sbgt,
    split_indices,
    validate_solution,
)
from edmfix.solvers.mbfv import chain_faces, window_layout

from oracles import edm_of, plant, random_config

MAIN = ["biev", "mbfv", "sbgt"]


def planted(n, d, i, j, alpha, seed):
    D0 = edm_of(random_config(np.random.default_rng(seed), n, d))
    return NoisyInstance(plant(D0, i, j, alpha), d, truth=(i, j, alpha)), D0


# split / completion / small blocks


def test_split_indices_example():
    I1, I2 = split_indices(100, 5)
    assert (I1[0], I1[-1], I2[0], I2[-1]) == (0, 53, 45, 99)
    assert np.intersect1d(I1, I2).size == 9


@pytest.mark.parametrize("d", [1, 2, 5])
def test_split_indices_boundary(d):
    n = 2 * d + 4
    I1, I2 = split_indices(n, d)
    assert min(I1.size, I2.size) >= d + 2
    assert np.intersect1d(I1, I2).size >= d + 2
    assert np.union1d(I1, I2).size == n


def test_split_indices_below_cutoff():
    with pytest.raises(EDMError):
        split_indices(6, 2)


@pytest.mark.parametrize("strategy", ["directq", "lsq"])
def test_complete_from_faces_clean(rng, strategy):
    D = edm_of(random_config(rng, 30, 3))
    R = complete_from_faces(D, split_indices(30, 3), 3, strategy=strategy)
    assert np.linalg.norm(R - D) <= 1e-10 * np.linalg.norm(D)
    R = complete_from_faces(D, [np.arange(30)], 3, strategy=strategy)
    assert np.linalg.norm(R - D) <= 1e-10 * np.linalg.norm(D)


def test_complete_from_faces_fills_gale_example():
    D = gale_example()
    noisy = D.copy()
    for i, j in ((0, 4), (0, 5), (1, 5)):
        noisy[i, j] = noisy[j, i] = -7.0
    R = complete_from_faces(noisy, [np.arange(4), np.arange(1, 5), np.arange(2, 6)], 2)
    np.testing.assert_allclose(R, D, atol=1e-10)


def test_locate_in_small_block_planted(rng):
    inst, _ = planted(12, 2, 1, 2, 0.8, seed=4)
    assert locate_in_small_block(inst.D, np.arange(3), 2, np.arange(3, 12)) == (1, 2)


def test_locate_in_small_block_pair():
    inst, _ = planted(10, 2, 3, 7, -0.4, seed=5)
    outside = np.setdiff1d(np.arange(10), [3, 7])
    assert locate_in_small_block(inst.D, np.array([3, 7]), 2, outside) == (3, 7)


def test_locate_in_small_block_hard_example_escalates():
    with pytest.raises(HardCaseNeeded):
        locate_in_small_block(hard_example(18.0), np.array([3, 4, 5]), 3, np.array([0, 1, 2]))


# the three main solvers


@pytest.mark.parametrize("method", MAIN)
@pytest.mark.parametrize("n,d,seed", [(60, 2, 0), (200, 3, 1), (400, 5, 2)])
def test_random_recovery(method, n, d, seed):
    inst = generate(GenSpec(n=n, d=d, seed=seed))
    report = SOLVERS[method](inst)
    assert report.diagnostics["pair_correct"]
    assert report.alpha_rel_error <= 1e-9
    assert report.rel_error <= 1e-9
    assert validate_solution(inst, report).passed


@pytest.mark.parametrize("method", MAIN)
def test_pair_at_corner(method):
    inst, _ = planted(120, 3, 0, 119, 1.5, seed=7)
    report = SOLVERS[method](inst)
    assert (report.correction.i, report.correction.j) == (0, 119)


def test_biev_corner_pair_found_at_first_split():
    inst, _ = planted(120, 3, 0, 119, 1.5, seed=7)
    trace = solve_biev(inst).diagnostics["trace"]
    assert trace[0][1:] == ("good", "good")


def test_biev_small_instance_goes_to_small_block():
    inst, _ = planted(7, 2, 2, 5, 0.9, seed=3)
    report = solve_biev(inst)
    assert report.diagnostics["trace"][0][0] == "small_block"
    assert report.diagnostics["pair_correct"]


def test_biev_lsq_strategy():
    inst, _ = planted(150, 3, 10, 140, -0.3, seed=8)
    report = solve_biev(inst, strategy="lsq")
    assert report.alpha_rel_error <= 1e-9


def test_biev_recursion_depth():
    inst = generate(GenSpec(n=1000, d=3, seed=11))
    trace = solve_biev(inst).diagnostics["trace"]
    splits = [t for t in trace if isinstance(t[0], (int, np.integer))]
    sizes = [t[0] for t in splits]
    assert all(a > b for a, b in zip(sizes, sizes[1:]))
    assert len(splits) <= int(np.ceil(np.log2(1000))) + 2


def test_mbfv_window_layout():
    starts, sizes = window_layout(100, 3)
    assert sizes[0] == 12 and starts[1] - starts[0] == 6
    ends = starts + sizes
    assert ends[-1] == 100
    assert np.all(ends[:-1] - starts[1:] == 6)
    assert window_layout(10, 3)[0].tolist() == [0]


def test_mbfv_noise_in_first_window():
    inst, _ = planted(200, 3, 1, 4, 0.5, seed=9)
    report = solve_mbfv(inst)
    assert 0 in report.diagnostics["bad_windows"]
    assert report.diagnostics["pair_correct"]
    assert "branch2_steps" not in report.diagnostics


def test_mbfv_clean_instance_reports_nothing_to_fix(rng):
    inst = NoisyInstance(edm_of(random_config(rng, 100, 3)), 3)
    with pytest.raises(NoCorruptionFound):
        solve_mbfv(inst)


def test_chain_faces_spans_config(rng):
    from edmfix.core import classify_windows, window_indices
    from edmfix.solvers.mbfv import _window_faces

    n, d = 80, 3
    P = random_config(rng, n, d)
    D = edm_of(P)
    starts, sizes = window_layout(n, d)
    faces = []
    for s, k in zip(starts, sizes):
        _, lam, U = classify_windows(D, window_indices([s], k), d, vectors=True)
        faces.append(_window_faces(lam, U, d)[0])
    U, branches = chain_faces(faces, starts, sizes, n)
    target = np.hstack([P, np.ones((n, 1))])
    Q, _ = np.linalg.qr(U)
    assert np.linalg.norm(target - Q @ (Q.T @ target)) <= 1e-8 * np.linalg.norm(target)


def test_sbgt_gale_example_noise():
    D = gale_example()
    inst = NoisyInstance(plant(D, 0, 4, 3.0), 2, truth=(0, 4, 3.0))
    report = solve_sbgt(inst)
    assert (report.correction.i, report.correction.j) == (0, 4)
    assert report.correction.corrected_value == pytest.approx(5.0, abs=1e-10)


def test_sbgt_bad_window_path():
    inst, _ = planted(50, 2, 3, 4, 0.6, seed=12)
    report = solve_sbgt(inst)
    assert report.diagnostics["bad_windows"]
    assert report.diagnostics["pair_correct"]


def test_sbgt_dense_method():
    inst, _ = planted(80, 3, 5, 60, 0.6, seed=13)
    assert solve_sbgt(inst, method="dense").alpha_rel_error <= 1e-9


@settings(max_examples=25)
@given(
    st.sampled_from([2, 3, 5]),
    st.integers(40, 300),
    st.integers(0, 2**32 - 1),
)
def test_solvers_agree(d, n, seed):
    inst = generate(GenSpec(n=n, d=d, seed=seed))
    reports = [solve(inst, m) for m in MAIN]
    pairs = {(r.correction.i, r.correction.j) for r in reports}
    assert pairs == {inst.truth[:2]}
    alphas = np.array([r.correction.alpha_hat for r in reports])
    assert np.max(np.abs(alphas - alphas[0])) <= 1e-7 * abs(alphas[0])


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0), st.sampled_from(MAIN))
def test_scaling_invariance(seed, c, method):
    inst = generate(GenSpec(n=80, d=3, seed=seed))
    base = solve(inst, method).correction
    scaled = solve(NoisyInstance(c * inst.D, 3), method).correction
    assert (scaled.i, scaled.j) == (base.i, base.j)
    assert scaled.alpha_hat == pytest.approx(c * base.alpha_hat, rel=1e-7)


@settings(max_examples=30)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.data())
def test_close_pairs_with_fallback(d, seed, data):
    rng = np.random.default_rng(seed)
    n = data.draw(st.integers(d + 4, 120))
    i = data.draw(st.integers(0, n - 2))
    j = data.draw(st.integers(i + 1, min(n - 1, i + d + 3)))
    alpha = float(rng.choice([-1, 1]) * 10 ** rng.uniform(-2, 1))
    inst, _ = planted(n, d, i, j, alpha, seed)
    for method in MAIN:
        report = solve(inst, method)
        assert (report.correction.i, report.correction.j) == (i, j)
        assert report.alpha_rel_error <= 1e-8


def test_fallback_is_recorded():
    # Most points on a line: the halves complete non-uniquely.
    inst = generate(GenSpec(n=100, d=3, seed=1, hard=(86, 1)))
    report = solve(inst, "biev")
    assert report.diagnostics["fallback_from"] == "biev"
    assert report.diagnostics["pair_correct"]
    with pytest.raises(HardCaseNeeded):
        solve(inst, "biev", fallback=False)


def test_single_window_instance():
    inst, _ = planted(11, 5, 0, 6, 0.5, seed=0)
    report = solve(inst, "mbfv", fallback=False)
    assert report.diagnostics["pair_correct"]


def test_unknown_method():
    inst, _ = planted(20, 2, 0, 1, 0.5, seed=0)
    with pytest.raises(ValueError):
        solve(inst, "nope")


# hard cases


@pytest.mark.parametrize("d,m,k", HARD_SUITE)
def test_hard_suite_one_seed(d, m, k):
    inst = generate(GenSpec(n=100, d=d, seed=1, hard=(m, k)))
    report = solve_hard(inst)
    assert report.diagnostics["pair_correct"]
    assert report.alpha_rel_error <= 1e-9


def test_hard_matches_mbfv_in_general_position():
    inst = generate(GenSpec(n=150, d=3, seed=21))
    a, b = solve_hard(inst).correction, solve_mbfv(inst).correction
    assert (a.i, a.j) == (b.i, b.j)
    assert a.alpha_hat == pytest.approx(b.alpha_hat, rel=1e-9)


def test_hard_example_is_ambiguous():
    with pytest.raises(UnsolvableHardCase) as info:
        solve_hard(NoisyInstance(hard_example(18.0), 3))
    found = {}
    for c in info.value.candidates:
        found.setdefault((c.i, c.j), set()).add(round(c.corrected_value, 8))
    assert found == {(3, 4): {14.0, 1.2}, (3, 5): {8.4, 2.0}, (4, 5): {14.0, 6.0}}


def test_find_anchor_routes(rng):
    D = edm_of(random_config(rng, 30, 3))
    anchor, route = find_anchor(D, 3)
    assert route == "consecutive" and anchor.size == 4
    P = random_config(rng, 30, 3)
    P[:20, 2] = 0.0
    P[:20, 1] = 0.0  # first twenty points on a line
    anchor, route = find_anchor(edm_of(P), 3)
    assert anchor.size == 4
    from edmfix.core import BlockClass, classify_block

    assert classify_block(edm_of(P), anchor, 3) is BlockClass.GOOD


# validation


def test_validate_solution_flags_problems():
    inst = generate(GenSpec(n=50, d=2, seed=3))
    report = solve_mbfv(inst)
    assert validate_solution(inst, report).passed
    wrong = NoisyInstance(inst.D, 2, truth=(inst.truth[0], inst.truth[1], inst.truth[2] + 1.0))
    res = validate_solution(wrong, report)
    assert not res.checks["truth"] and res.messages
    R = report.recovered
    R[0, 1] += 1.0
    R[1, 0] += 1.0
    res = validate_solution(inst, report)
    assert not res.checks["single_entry"]


def test_correction_to_dict_is_one_based():
    c = Correction(i=0, j=4, alpha_hat=1.0, corrected_value=2.0)
    assert c.to_dict()["i"] == 1 and c.to_dict(one_based=False)["j"] == 4


def test_instance_rejects_bad_input():
    with pytest.raises(EDMError):
        NoisyInstance(np.eye(3), 1)
    with pytest.raises(EDMError):
        NoisyInstance(np.zeros((4, 4)), 1, truth=(2, 1, 1.0))
    with pytest.raises(EDMError):
        NoisyInstance(np.zeros((4, 4)), 1, truth=(1, 2, 0.0))
