import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

import oracles
from chainconc import (
    ChainSpec,
    Distribution,
    EnumerationCapError,
    Kernel,
    Trajectory,
    ValidationError,
    chain_from_dict,
    conditional_law,
    dobrushin_coefficient,
    homogeneous_chain,
    marginal,
    prefix_probability,
    sample_trajectories,
    sample_trajectory,
    t_step_pair_tv,
    tv_distance,
    validate_chain,
)
from chainconc.chain import block_law_given_coordinate
from conftest import random_chain

TWO_STATE = [[0.9, 0.1], [0.2, 0.8]]


def dist(*probs):
    return Distribution.from_array(list(probs))


# ---------------------------------------------------------------------------
# validation


def test_validate_accepts_exact_stochastic_chain():
    spec = ChainSpec((2, 2), dist(0.5, 0.5), (Kernel(np.array([[0.5, 0.5], [0.5, 0.5]])),))
    out = validate_chain(spec)
    assert out.coord_sizes == (2, 2)
    assert_allclose(out.kernels[0].rows.sum(axis=1), 1.0, atol=0)


def test_validate_rejects_bad_row_sum_naming_kernel():
    spec = ChainSpec((2, 2), dist(0.5, 0.5), (Kernel(np.array([[1.0, 0.5], [0.5, 0.5]])),))
    with pytest.raises(ValidationError, match="kernel 0"):
        validate_chain(spec)


def test_validate_renormalizes_within_tolerance():
    row = np.array([0.5, 0.5 + 1e-13])
    spec = ChainSpec((2, 2), dist(0.5, 0.5), (Kernel(np.stack([row, row])),))
    out = validate_chain(spec)
    assert_allclose(out.kernels[0].rows.sum(axis=1), 1.0, rtol=0, atol=0)


def test_validate_rejects_negative_entry():
    with pytest.raises(ValidationError, match="negative"):
        Distribution.from_array([1.1, -0.1])


def test_validate_rejects_shape_mismatch():
    spec = ChainSpec((2, 3), dist(0.5, 0.5), (Kernel(np.eye(2)),))
    with pytest.raises(ValidationError, match="shape"):
        validate_chain(spec)


def test_chain_from_dict_homogeneous_shorthand():
    spec = chain_from_dict({"kernel": TWO_STATE, "n": 5})
    assert spec.n == 5
    assert len(spec.kernels) == 4
    assert_allclose(spec.initial.probs, [0.5, 0.5])  # uniform default
    explicit = chain_from_dict(
        {"coord_sizes": [2, 2], "initial": [1.0, 0.0], "kernels": [TWO_STATE]}
    )
    assert explicit.n == 2


# ---------------------------------------------------------------------------
# total variation distance


@pytest.mark.parametrize(
    "p, q, expected",
    [
        ((0.5, 0.5), (0.5, 0.5), 0.0),
        ((1.0, 0.0), (0.0, 1.0), 1.0),
        ((0.5, 0.5), (0.8, 0.2), 0.3),
    ],
)
def test_tv_distance_examples(p, q, expected):
    assert tv_distance(dist(*p), dist(*q)) == pytest.approx(expected, abs=1e-15)


def test_tv_distance_length_mismatch():
    with pytest.raises(ValidationError):
        tv_distance(dist(1.0), dist(0.5, 0.5))


@given(st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_tv_distance_is_a_metric(size, seed):
    rng = np.random.default_rng(seed)
    triple = [Distribution(v / v.sum()) for v in rng.random((3, size)) + 0.01]
    p, q, r = triple
    assert tv_distance(p, q) == tv_distance(q, p)
    assert 0.0 <= tv_distance(p, q) <= 1.0
    assert tv_distance(p, r) <= tv_distance(p, q) + tv_distance(q, r) + 1e-12
    assert tv_distance(p, p) == 0.0


# ---------------------------------------------------------------------------
# Dobrushin coefficient


@pytest.mark.parametrize(
    "rows, expected",
    [
        (np.eye(2), 1.0),
        (np.array([[0.3, 0.7], [0.3, 0.7]]), 0.0),
        (np.array(TWO_STATE), 0.7),
    ],
)
def test_dobrushin_examples(rows, expected):
    assert dobrushin_coefficient(Kernel(rows)) == pytest.approx(expected, abs=1e-15)


def test_dobrushin_bounds_and_zero_iff_equal_rows(rng):
    for _ in range(25):
        spec = random_chain(rng)
        for k in spec.kernels:
            theta = dobrushin_coefficient(k)
            assert 0.0 <= theta <= 1.0
            rows_equal = np.allclose(k.rows, k.rows[0], atol=0, rtol=0)
            assert (theta == 0.0) == rows_equal


# ---------------------------------------------------------------------------
# conditional laws


def test_conditional_law_product_chain_ignores_prefix():
    # all kernel rows equal: coordinates independent
    k = Kernel(np.array([[0.3, 0.7], [0.3, 0.7]]))
    spec = validate_chain(ChainSpec((2, 2, 2), dist(0.4, 0.6), (k, k)))
    law0 = conditional_law(spec, [0], 1)
    law1 = conditional_law(spec, [1], 1)
    assert_allclose(law0.probs, law1.probs, atol=1e-15)


def test_conditional_law_last_step_is_kernel_row():
    spec = homogeneous_chain(TWO_STATE, 4, initial=[0.5, 0.5])
    law = conditional_law(spec, [0, 1, 1], 3)
    assert_allclose(law.probs, [0.2, 0.8], atol=1e-15)


def test_conditional_law_three_step_example_against_enumeration():
    spec = homogeneous_chain(TWO_STATE, 3, initial=[0.5, 0.5])
    law = conditional_law(spec, [0], 1)
    assert_allclose(law.probs, [0.81, 0.09, 0.02, 0.08], atol=1e-12)
    assert_allclose(law.probs, oracles.conditional_block_law(spec, [0], 1), atol=1e-12)


def test_conditional_law_matches_enumeration_on_random_chains(rng):
    for _ in range(10):
        spec = random_chain(rng)
        i = int(rng.integers(0, spec.n))
        j = int(rng.integers(i, spec.n))
        prefix = [int(rng.integers(0, s)) for s in spec.coord_sizes[:i]]
        law = conditional_law(spec, prefix, j)
        assert_allclose(law.probs, oracles.conditional_block_law(spec, prefix, j), atol=1e-12)


def test_conditional_law_marginal_consistency(rng):
    # marginalizing the block law onto X_j reproduces the forward marginal
    for _ in range(10):
        spec = random_chain(rng)
        assert spec.joint_size() <= 10**4
        j = int(rng.integers(0, spec.n))
        block = conditional_law(spec, [], j)
        block_sizes = spec.coord_sizes[j:]
        onto_j = block.probs.reshape(block_sizes).reshape(block_sizes[0], -1).sum(axis=1)
        assert_allclose(onto_j, marginal(spec, j).probs, atol=1e-12)


def test_conditional_law_rejects_zero_probability_prefix():
    spec = chain_from_dict(
        {"coord_sizes": [2, 2], "initial": [1.0, 0.0], "kernels": [TWO_STATE]}
    )
    with pytest.raises(ValidationError, match="zero probability"):
        conditional_law(spec, [1], 1)


def test_conditional_law_respects_cap():
    spec = homogeneous_chain(TWO_STATE, 12)
    with pytest.raises(EnumerationCapError):
        conditional_law(spec, [], 0, cap=100)


def test_block_law_given_coordinate_matches_oracle(rng):
    for _ in range(10):
        spec = random_chain(rng)
        i = int(rng.integers(0, spec.n - 1))
        j = int(rng.integers(i + 1, spec.n))
        v = int(rng.integers(0, spec.coord_sizes[i]))
        law = block_law_given_coordinate(spec, i, v, j)
        assert_allclose(law.probs, oracles.block_law_given_value(spec, i, v, j), atol=1e-12)


def test_prefix_probability_product_formula(rng):
    spec = random_chain(rng, n=4)
    law = oracles.joint_law(spec)
    total = sum(p for traj, p in law.items() if traj[:2] == (1, 0))
    assert prefix_probability(spec, [1, 0]) == pytest.approx(total, abs=1e-12)


# ---------------------------------------------------------------------------
# t-step pair TV


def test_t_step_zero_is_one_for_nontrivial_spaces():
    spec = homogeneous_chain(TWO_STATE, 3)
    assert t_step_pair_tv(spec, 0, 0) == 1.0


def test_t_step_uniform_kernel_is_zero():
    spec = homogeneous_chain([[0.5, 0.5], [0.5, 0.5]], 3)
    assert t_step_pair_tv(spec, 0, 1) == 0.0


def test_t_step_matches_matrix_power_oracle():
    spec = homogeneous_chain(TWO_STATE, 20)
    assert t_step_pair_tv(spec, 0, 4) == pytest.approx(0.2401, abs=1e-12)
    assert t_step_pair_tv(spec, 3, 4) == pytest.approx(oracles.t_step_tv(spec, 3, 4), abs=1e-15)


def test_t_step_submultiplicative_in_dobrushin(rng):
    for _ in range(15):
        spec = random_chain(rng)
        thetas = [dobrushin_coefficient(k) for k in spec.kernels]
        for i in range(spec.n):
            for t in range(spec.n - i):
                bound = float(np.prod(thetas[i: i + t])) if t else 1.0
                assert t_step_pair_tv(spec, i, t) <= bound + 1e-12


def test_t_step_index_errors():
    spec = homogeneous_chain(TWO_STATE, 3)
    with pytest.raises(ValidationError):
        t_step_pair_tv(spec, 2, 1)
    with pytest.raises(ValidationError):
        t_step_pair_tv(spec, 3, 0)


# ---------------------------------------------------------------------------
# sampling


def test_sample_trajectory_deterministic_chain_unique_path():
    flip = np.array([[0.0, 1.0], [1.0, 0.0]])
    spec = chain_from_dict(
        {"coord_sizes": [2, 2, 2], "initial": [1.0, 0.0], "kernels": [flip.tolist()] * 2}
    )
    for seed in (0, 1, 12345):
        assert sample_trajectory(spec, seed) == Trajectory((0, 1, 0))


def test_sample_trajectory_is_deterministic():
    spec = homogeneous_chain(TWO_STATE, 6)
    assert sample_trajectory(spec, 42) == sample_trajectory(spec, 42)
    assert sample_trajectory(spec, 42, replicate=3) == sample_trajectory(spec, 42, replicate=3)


def test_sample_trajectories_rows_match_single_samples():
    spec = homogeneous_chain(TWO_STATE, 5)
    block = sample_trajectories(spec, 7, 10)
    for r in range(10):
        assert tuple(block[r]) == sample_trajectory(spec, 7, replicate=r).states
    # chunk-independence: rows [3, 10) reproduce the same trajectories
    tail = sample_trajectories(spec, 7, 7, first=3)
    assert np.array_equal(tail, block[3:])


def test_sample_uniform_chain_frequencies():
    spec = homogeneous_chain([[0.5, 0.5], [0.5, 0.5]], 4)
    m = 10**5
    states = sample_trajectories(spec, 42, m)
    se = 0.5 / np.sqrt(m)
    for c in range(spec.n):
        freq = float(np.mean(states[:, c] == 0))
        assert abs(freq - 0.5) <= 3 * se


def test_sample_marginals_chi_square():
    from scipy.stats import chi2

    spec = homogeneous_chain(TWO_STATE, 6, initial=[0.5, 0.5])
    m = 10**5
    states = sample_trajectories(spec, 42, m)
    for c in range(spec.n):
        expected = marginal(spec, c).probs * m
        observed = np.bincount(states[:, c], minlength=spec.coord_sizes[c])
        stat = float(((observed - expected) ** 2 / expected).sum())
        assert stat <= chi2.ppf(1 - 0.001, df=spec.coord_sizes[c] - 1)
