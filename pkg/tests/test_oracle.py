from math import comb

import numpy as np
import pytest

from conftest import TOY_UTILS, random_observations, random_universe, toy_universe
from dagchoice.core import Bounds, Observation
from dagchoice.errors import GuardError
from dagchoice.oracle import (
    brute_force_loglik, count_lmdc_size, enumerate_count_lmdc, enumerate_lmdc, lmdc_size,
)


def test_toy_probabilities():
    cs = enumerate_lmdc(3, Bounds(1, 2))
    np.testing.assert_allclose(cs.probabilities(TOY_UTILS), [0.414, 0.251, 0.152, 0.0924, 0.056, 0.034], atol=5e-4)


def test_uniform_utilities_uniform_probabilities():
    cs = enumerate_lmdc(6, Bounds(1, 4))
    np.testing.assert_allclose(cs.probabilities(np.zeros(6)), 1 / len(cs))
    assert len(cs) == sum(comb(6, t) for t in range(1, 5))


def test_single_choice_is_mnl():
    v = np.array([0.3, -1.0, 2.0, 0.0])
    p = enumerate_lmdc(4, Bounds(1, 1)).probabilities(v)
    np.testing.assert_allclose(p, np.exp(v) / np.exp(v).sum(), rtol=1e-14)


def test_count_enumeration_examples():
    np.testing.assert_allclose(enumerate_count_lmdc(1, Bounds(0, 2)).probabilities([0.0]), [1 / 3] * 3)
    cs = enumerate_count_lmdc(2, Bounds(1, 2))
    assert len(cs) == 5
    v = np.array([-0.3, 0.8])
    w = np.exp(cs.counts @ v)
    np.testing.assert_allclose(cs.probabilities(v), w / w.sum(), rtol=1e-14)


def test_count_enumeration_restricted_to_binary():
    v = np.array([0.1, -0.4, 0.9, 0.2])
    full = enumerate_count_lmdc(4, Bounds(1, 3))
    plain = enumerate_lmdc(4, Bounds(1, 3))
    binary = np.all(full.counts <= 1, axis=1)
    idx = full.index()
    sub = np.array([idx[tuple(r)] for r in plain.counts.tolist()])
    assert binary.sum() == len(plain)
    u = full.counts[sub] @ v
    np.testing.assert_allclose(np.exp(u) / np.exp(u).sum(), plain.probabilities(v), rtol=1e-13)


def test_guard_refuses_huge_enumeration():
    assert lmdc_size(40, Bounds(0, 20)) > 10**7
    with pytest.raises(GuardError) as exc:
        enumerate_lmdc(40, Bounds(0, 20))
    assert exc.value.size == lmdc_size(40, Bounds(0, 20))
    with pytest.raises(GuardError):
        enumerate_count_lmdc(30, Bounds(0, 12))
    assert count_lmdc_size(30, Bounds(0, 12)) > 10**7


def test_brute_force_loglik_examples(toy):
    obs = [Observation.from_items("s4", Bounds(1, 2), [0, 1])]
    assert brute_force_loglik(toy, obs, [-1.0]) == pytest.approx(np.log(0.093), rel=2e-2)
    assert brute_force_loglik(toy, [], [-1.0]) == 0.0


def test_brute_force_loglik_sums_groups():
    rng = np.random.default_rng(0)
    u = random_universe(rng, 5)
    obs = random_observations(rng, 5, 12, [Bounds(0, 2), Bounds(2, 4)])
    beta = rng.normal(size=3)
    each = sum(brute_force_loglik(u, [o], beta) for o in obs)
    assert brute_force_loglik(u, obs, beta) == pytest.approx(each, abs=1e-12)
