import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edmfix.core import BlockClass, classify_block
from edmfix.datasets import hard_example
from edmfix.exceptions import EDMError
from edmfix.instance import (
    GenSpec,
    brute_force_oracle,
    generate,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
)

from oracles import edm_of, random_config, trilateration_oracle


def test_generate_is_deterministic():
    a, b = generate(GenSpec(n=10, d=2, seed=1)), generate(GenSpec(n=10, d=2, seed=1))
    np.testing.assert_array_equal(a.D, b.D)
    assert a.truth == b.truth


def test_generate_clean_matrix_is_good():
    inst = generate(GenSpec(n=30, d=3, seed=4))
    assert classify_block(inst.clean_matrix(), range(30), 3) is BlockClass.GOOD
    assert classify_block(inst.D, range(30), 3) is BlockClass.BAD
    assert abs(inst.truth[2]) >= 0.01


def test_generate_hard_mode_flat():
    inst = generate(GenSpec(n=100, d=4, seed=2, hard=(82, 3)))
    flat = inst.info["flat"]
    assert flat.size == 82
    P = inst.info["config"][flat]
    s = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    assert np.sum(s > 1e-9 * s[0]) == 3


@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.data())
def test_hard_mode_affine_rank(d, seed, data):
    k = data.draw(st.integers(0, d - 1))
    m = data.draw(st.integers(k + 2, 40))
    inst = generate(GenSpec(n=40, d=d, seed=seed, hard=(m, k)))
    P = inst.info["config"][inst.info["flat"]]
    s = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    assert np.sum(s > 1e-9 * max(1.0, np.abs(P).max())) == k


def test_nonnegative_flag():
    for seed in range(20):
        inst = generate(GenSpec(n=8, d=2, seed=seed, nonnegative=True))
        assert inst.D.min() >= 0


def test_off_manifold_bias():
    inst = generate(GenSpec(n=50, d=3, seed=3, hard=(40, 1), bias_off_manifold=True))
    i, j, _ = inst.truth
    assert i not in inst.info["flat"] and j not in inst.info["flat"]


@pytest.mark.parametrize(
    "kw",
    [dict(n=3, d=2), dict(n=10, d=0), dict(n=10, d=2, noise_min_abs=0), dict(n=10, d=2, hard=(5, 2))],
)
def test_spec_validation(kw):
    with pytest.raises(EDMError):
        generate(GenSpec(**kw))


def test_round_trip(tmp_path):
    inst = generate(GenSpec(n=12, d=2, seed=5))
    path = tmp_path / "x.json"
    save_instance(inst, path)
    back = load_instance(path)
    np.testing.assert_array_equal(back.D, inst.D)
    assert back.truth == inst.truth and back.d == 2
    obj = json.loads(path.read_text())
    assert obj["truth"]["i"] == inst.truth[0] + 1


def test_load_errors(tmp_path):
    inst = generate(GenSpec(n=6, d=2, seed=5))
    obj = instance_to_dict(inst)
    del obj["truth"]
    assert instance_from_dict(obj).truth is None
    obj["D"] = obj["D"][:-1]
    with pytest.raises(EDMError):
        instance_from_dict(obj)
    bad = instance_to_dict(inst)
    bad["D"][0] = 1.0
    with pytest.raises(EDMError):
        instance_from_dict(bad)
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(EDMError):
        load_instance(path)


def test_oracle_singleton_on_generated():
    inst = generate(GenSpec(n=15, d=3, seed=8))
    found = brute_force_oracle(inst.D, 3)
    assert len(found) == 1
    c = found[0]
    assert (c.i, c.j) == inst.truth[:2]
    assert c.alpha_hat == pytest.approx(inst.truth[2], rel=1e-8)


def test_oracle_hard_example():
    pairs = {}
    for c in brute_force_oracle(hard_example(18.0), 3):
        pairs.setdefault((c.i, c.j), []).append(c.corrected_value)
    for key, vals in {(3, 4): [1.2, 14], (3, 5): [2, 8.4], (4, 5): [6, 14]}.items():
        np.testing.assert_allclose(sorted(pairs[key]), vals, atol=1e-9)


def test_oracle_clean_edm_is_empty(rng):
    assert brute_force_oracle(edm_of(random_config(rng, 12, 2)), 2) == []


@settings(max_examples=15)
@given(st.sampled_from([2, 3]), st.integers(0, 2**32 - 1))
def test_oracle_matches_trilateration(d, seed):
    inst = generate(GenSpec(n=14, d=d, seed=seed))
    a = sorted((c.i, c.j, round(c.corrected_value, 6)) for c in brute_force_oracle(inst.D, d))
    b = sorted((i, j, round(v, 6)) for i, j, v in trilateration_oracle(inst.D, d))
    assert a == b
