"""Loss terms and the multi-level buffer policy."""

import itertools
import math

import numpy as np
import pytest

from flowdeblur import (
    BufferPolicy,
    LossWeights,
    ParameterError,
    ShapeError,
    artifacts_penalty,
    buffer_counts,
    buffer_sample,
    cgan_generator_loss,
    cgan_objective,
    content_loss,
    total_loss,
    wasserstein_estimate,
)


def test_artifacts_penalty_is_positive_part() -> None:
    assert artifacts_penalty(0.8, 0.3) == pytest.approx(0.5)
    assert artifacts_penalty(0.3, 0.8) == 0.0
    assert artifacts_penalty(0.4, 0.4) == 0.0
    with pytest.raises(ParameterError):
        artifacts_penalty(math.nan, 0.0)


def test_wasserstein_estimate_is_difference_of_means() -> None:
    assert wasserstein_estimate([1.0, 2.0, 3.0], [0.5, 0.5]) == pytest.approx(1.5)
    assert wasserstein_estimate([0.2], [0.2]) == 0.0
    with pytest.raises(ParameterError):
        wasserstein_estimate([], [1.0])


def test_generator_loss_stays_finite() -> None:
    assert cgan_generator_loss(0.0) == 0.0
    assert cgan_generator_loss(0.5) == pytest.approx(math.log(0.5))
    assert math.isfinite(cgan_generator_loss(1.0))
    assert cgan_generator_loss(1.0) == pytest.approx(math.log(1e-12), rel=1e-3)
    with pytest.raises(ParameterError):
        cgan_generator_loss(1.5)


def test_cgan_objective() -> None:
    expected = math.log(0.9) + (math.log(0.8) + math.log(0.6)) / 2
    assert cgan_objective([0.9], [0.2, 0.4]) == pytest.approx(expected)
    assert math.isfinite(cgan_objective([0.0], [1.0]))
    with pytest.raises(ParameterError):
        cgan_objective([], [0.1])
    with pytest.raises(ParameterError):
        cgan_objective([-0.1], [0.1])


def test_content_loss_is_mean_squared_difference(rng) -> None:
    a = rng.normal(size=(4, 6, 5))
    assert content_loss(a, a) == 0.0
    assert content_loss(a, a + 0.5) == pytest.approx(0.25)
    with pytest.raises(ShapeError):
        content_loss(a, a[:, :5])
    with pytest.raises(ShapeError):
        content_loss(np.zeros((0, 2)), np.zeros((0, 2)))


def test_total_loss_combines_terms_linearly() -> None:
    weights = LossWeights(gamma=0.5, lam=2.0)
    assert total_loss(1.0, -0.4, 0.25, weights) == pytest.approx(1.0 - 0.2 + 0.5)
    assert total_loss(1.0, 9.0, 9.0, LossWeights()) == 1.0
    assert total_loss(2.0, 0.0, 0.0, weights) == 2 * total_loss(1.0, 0.0, 0.0, weights)
    with pytest.raises(ParameterError):
        LossWeights(gamma=-1.0)


def test_artifacts_penalty_matches_positive_part_on_random_pairs(rng) -> None:
    pairs = rng.normal(scale=10.0, size=(100_000, 2))
    got = np.array([artifacts_penalty(float(g), float(s)) for g, s in pairs])
    np.testing.assert_array_equal(got, np.maximum(pairs[:, 0] - pairs[:, 1], 0.0))
    assert np.all(got >= 0.0)


def test_artifacts_penalty_is_monotone(rng) -> None:
    for g, s, step in rng.uniform(-5.0, 5.0, size=(1000, 3)):
        step = abs(float(step))
        base = artifacts_penalty(float(g), float(s))
        assert artifacts_penalty(float(g) + step, float(s)) >= base
        assert artifacts_penalty(float(g), float(s) + step) <= base


def test_wasserstein_estimate_is_antisymmetric_mean_gap(rng) -> None:
    for _ in range(200):
        a = rng.normal(size=int(rng.integers(1, 40))).tolist()
        b = rng.normal(size=int(rng.integers(1, 40))).tolist()
        forward = wasserstein_estimate(a, b)
        assert forward == pytest.approx(np.mean(a) - np.mean(b), abs=1e-12)
        assert wasserstein_estimate(b, a) == pytest.approx(-forward, abs=1e-12)
        assert wasserstein_estimate(a, a) == 0.0


def test_total_loss_is_linear_in_each_term(rng) -> None:
    for _ in range(500):
        gamma, lam = rng.uniform(0.0, 5.0, size=2)
        weights = LossWeights(gamma=float(gamma), lam=float(lam))
        c1, a1, p1, c2, a2, p2 = (float(x) for x in rng.normal(size=6))
        k = float(rng.normal())
        combined = total_loss(c1 + k * c2, a1 + k * a2, p1 + k * p2, weights)
        separate = total_loss(c1, a1, p1, weights) + k * total_loss(c2, a2, p2, weights)
        assert combined == pytest.approx(separate, abs=1e-9)
        assert total_loss(c1, a1, p1, weights) == pytest.approx(c1 + gamma * a1 + lam * p1)


def test_buffer_counts_follow_proportions() -> None:
    assert buffer_counts(BufferPolicy(capacity=10)) == (5, 3, 2)
    assert buffer_counts(BufferPolicy()) == (500, 300, 200)
    assert sum(buffer_counts(BufferPolicy(capacity=7))) == 7


def test_buffer_counts_minimise_rounding_error() -> None:
    """Largest-remainder counts beat every other split on worst-case error."""
    for capacity in range(1, 21):
        policy = BufferPolicy(capacity=capacity)
        counts = buffer_counts(policy)
        exact = [capacity * p for p in policy.proportions]
        err = max(abs(c - e) for c, e in zip(counts, exact, strict=True))
        for split in itertools.product(range(capacity + 1), repeat=3):
            if sum(split) == capacity:
                best = max(abs(c - e) for c, e in zip(split, exact, strict=True))
                assert err <= best + 1e-9


def test_buffer_policy_validation() -> None:
    with pytest.raises(ParameterError):
        BufferPolicy(proportions=(0.5, 0.6))
    with pytest.raises(ParameterError):
        BufferPolicy(proportions=(1.2, -0.2))
    with pytest.raises(ParameterError):
        BufferPolicy(capacity=0)


def test_buffer_sample_draws_per_level_and_is_deterministic() -> None:
    levels = [[(tag, i) for i in range(size)] for tag, size in (("l1", 50), ("l2", 50), ("l3", 5))]
    policy = BufferPolicy(capacity=20)
    a = buffer_sample(levels, policy, seed=3)
    assert a == buffer_sample(levels, policy, seed=3)
    assert len(a) == 20
    tags = [tag for tag, _ in a]
    assert (tags.count("l1"), tags.count("l2"), tags.count("l3")) == (10, 6, 4)
    assert len({item for item in a if item[0] == "l1"}) == 10
    with pytest.raises(ParameterError):
        buffer_sample(levels[:2], policy, seed=0)
