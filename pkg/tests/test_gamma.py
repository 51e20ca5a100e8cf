import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

import oracles
from chainconc import (
    GammaMatrix,
    ValidationError,
    gamma_contractive,
    gamma_ergodic,
    operator_norm,
)


def test_contractive_matrix_matches_displayed_pattern():
    g = gamma_contractive([0.5, 0.5])
    assert_allclose(
        g.entries,
        [[1.0, 0.5, 0.25], [0.0, 1.0, 0.5], [0.0, 0.0, 1.0]],
        atol=0,
    )
    assert g.provenance == "contractive"


def test_contractive_theta_zero_gives_identity():
    assert_allclose(gamma_contractive([0.0, 0.0, 0.0]).entries, np.eye(4), atol=0)


def test_contractive_theta_one_gives_ones_triangle():
    assert_allclose(gamma_contractive([1.0, 1.0]).entries, np.triu(np.ones((3, 3))), atol=0)


def test_contractive_uses_running_products():
    g = gamma_contractive([0.5, 0.2, 0.9])
    assert g.entries[0, 2] == pytest.approx(0.1, abs=1e-15)
    assert g.entries[0, 3] == pytest.approx(0.09, abs=1e-15)
    assert g.entries[1, 3] == pytest.approx(0.18, abs=1e-15)


def test_contractive_rejects_out_of_range_theta():
    with pytest.raises(ValidationError):
        gamma_contractive([0.5, 1.2])
    with pytest.raises(ValidationError):
        gamma_contractive([-0.1])


def test_ergodic_singleton_is_identity():
    assert_allclose(gamma_ergodic(1, 0.3).entries, np.eye(1), atol=0)


def test_ergodic_first_row_pattern():
    g = gamma_ergodic(4, 0.25)
    assert_allclose(g.entries[0], [1.0, 1.0, 0.25, 0.0625], atol=0)
    assert g.provenance == "ergodic"


def test_ergodic_eps_zero_is_banded():
    g = gamma_ergodic(4, 0.0)
    expected = np.eye(4) + np.diag(np.ones(3), k=1)
    assert_allclose(g.entries, expected, atol=0)


def test_ergodic_rejects_bad_inputs():
    with pytest.raises(ValidationError):
        gamma_ergodic(0, 0.5)
    with pytest.raises(ValidationError):
        gamma_ergodic(3, 1.0)


def test_gamma_matrix_invariants_enforced():
    with pytest.raises(ValidationError):
        GammaMatrix(np.array([[1.0, 0.5], [0.5, 1.0]]), "contractive")  # not triangular
    with pytest.raises(ValidationError):
        GammaMatrix(np.array([[2.0, 0.0], [0.0, 1.0]]), "contractive")  # bad diagonal
    with pytest.raises(ValidationError):
        GammaMatrix(np.eye(2), "mystery")  # unknown provenance


# ---------------------------------------------------------------------------
# operator norm


def test_operator_norm_identity():
    assert operator_norm(GammaMatrix(np.eye(5), "contractive")) == pytest.approx(1.0, abs=1e-12)


def test_operator_norm_small_triangular_example():
    g = GammaMatrix(np.array([[1.0, 0.5], [0.0, 1.0]]), "contractive")
    # dense eigensolver oracle on the 2x2 symmetrized product
    expected = math.sqrt(float(np.linalg.eigvalsh(g.entries.T @ g.entries)[-1]))
    assert operator_norm(g) == pytest.approx(expected, rel=1e-9)
    assert operator_norm(g) == pytest.approx(1.28078, abs=1e-5)


def test_operator_norm_golden_ratio():
    g = GammaMatrix(np.triu(np.ones((2, 2))), "contractive")
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    assert operator_norm(g) == pytest.approx(golden, rel=1e-9)


def test_operator_norm_matches_svd_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(1, 8))
        m = np.triu(rng.random((n, n)))
        np.fill_diagonal(m, 1.0)
        g = GammaMatrix(m, "brute_force_tv")
        assert operator_norm(g) == pytest.approx(oracles.spectral_norm(m), rel=1e-9)
        assert operator_norm(g) >= 1.0 - 1e-12  # unit diagonal forces norm >= 1
