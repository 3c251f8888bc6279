import numpy as np
import pytest

from ringres.linalg import (
    PowerIterationResult,
    largest_singular_value,
    matvec,
    scale_to_radius,
    solve_ridge,
    spectral_radius,
)


def test_matvec_example():
    out = matvec([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0])
    np.testing.assert_allclose(out, [3.0, 7.0])


def test_matvec_identity():
    v = np.arange(5.0)
    np.testing.assert_allclose(matvec(np.eye(5), v), v)


def test_matvec_zero_matrix():
    np.testing.assert_allclose(matvec(np.zeros((3, 3)), np.ones(3)), np.zeros(3))


def test_matvec_dimension_mismatch():
    with pytest.raises(ValueError):
        matvec(np.eye(3), np.ones(4))


def test_matvec_linearity():
    rng = np.random.default_rng(7)
    m = rng.standard_normal((6, 6))
    u = rng.standard_normal(6)
    v = rng.standard_normal(6)
    lhs = matvec(m, 2.0 * u + 3.0 * v)
    rhs = 2.0 * matvec(m, u) + 3.0 * matvec(m, v)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)


def test_spectral_radius_matches_svd():
    rng = np.random.default_rng(42)
    m = rng.uniform(-1.0, 1.0, size=(10, 10))
    exact = np.linalg.svd(m, compute_uv=False)[0]
    assert abs(spectral_radius(m) - exact) < 1e-5


def test_spectral_radius_diagonal():
    m = np.diag([3.0, -5.0, 1.0])
    assert abs(spectral_radius(m) - 5.0) < 1e-6


def test_spectral_radius_zero_matrix():
    assert spectral_radius(np.zeros((4, 4))) == 0.0


def test_spectral_radius_nonsquare_rejected():
    with pytest.raises(ValueError):
        spectral_radius(np.ones((3, 4)))


def test_largest_singular_value_reports_convergence():
    rng = np.random.default_rng(3)
    m = rng.uniform(-1.0, 1.0, size=(8, 8))
    result = largest_singular_value(m)
    assert isinstance(result, PowerIterationResult)
    assert result.converged
    assert result.iterations <= 1000
    exact = np.linalg.svd(m, compute_uv=False)[0]
    assert abs(result.value - exact) < 1e-4


def test_scale_to_radius_hits_target():
    rng = np.random.default_rng(0)
    for target in (0.1, 0.9, 2.5):
        m = rng.uniform(-1.0, 1.0, size=(20, 20))
        scaled = scale_to_radius(m, target)
        exact = np.linalg.svd(scaled, compute_uv=False)[0]
        assert abs(exact - target) < 1e-5 * max(1.0, target)


def test_scale_to_radius_idempotent():
    rng = np.random.default_rng(1)
    m = rng.uniform(-1.0, 1.0, size=(12, 12))
    once = scale_to_radius(m, 0.5)
    twice = scale_to_radius(once, 0.5)
    np.testing.assert_allclose(once, twice, atol=1e-10)


def test_scale_to_radius_rejects_bad_target():
    with pytest.raises(ValueError):
        scale_to_radius(np.eye(3), 0.0)
    with pytest.raises(ValueError):
        scale_to_radius(np.eye(3), -1.0)


def test_scale_to_radius_rejects_zero_matrix():
    with pytest.raises(ValueError):
        scale_to_radius(np.zeros((3, 3)), 1.0)


def _ridge_oracle(X, Y, lam):
    # direct normal-equation solve, the definition being tested against
    p = X.shape[1]
    return np.linalg.inv(X.T @ X + lam * np.eye(p)) @ X.T @ Y


@pytest.mark.parametrize("lam", [0.0, 0.1, 10.0])
def test_solve_ridge_matches_normal_equations(lam):
    rng = np.random.default_rng(5)
    X = rng.standard_normal((50, 10))
    Y = rng.standard_normal((50, 3))
    W = solve_ridge(X, Y, lam)
    if lam == 0.0:
        oracle, _, _, _ = np.linalg.lstsq(X, Y, rcond=None)
    else:
        oracle = _ridge_oracle(X, Y, lam)
    assert W.shape == (10, 3)
    np.testing.assert_allclose(W, oracle, atol=1e-8)


def test_solve_ridge_exact_recovery():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((40, 6))
    W_true = rng.standard_normal((6, 2))
    Y = X @ W_true
    W = solve_ridge(X, Y, 0.0)
    np.testing.assert_allclose(W, W_true, atol=1e-8)


def test_solve_ridge_wide_matches_tall_path():
    # dual solve for wide X must agree with the normal-equation oracle
    rng = np.random.default_rng(13)
    X = rng.standard_normal((8, 30))
    Y = rng.standard_normal((8, 2))
    W = solve_ridge(X, Y, 0.5)
    oracle = _ridge_oracle(X, Y, 0.5)
    assert W.shape == (30, 2)
    np.testing.assert_allclose(W, oracle, atol=1e-8)


def test_solve_ridge_singular_needs_lambda():
    X = np.zeros((10, 4))
    X[:, 0] = 1.0
    X[:, 1] = 1.0  # duplicate column -> rank deficient
    Y = np.ones((10, 1))
    with pytest.raises(ValueError, match="lambda"):
        solve_ridge(X, Y, 0.0)
    W = solve_ridge(X, Y, 0.1)  # regularized solve succeeds
    assert np.all(np.isfinite(W))


def test_solve_ridge_large_lambda_shrinks_to_zero():
    rng = np.random.default_rng(17)
    X = rng.standard_normal((30, 5))
    Y = rng.standard_normal((30, 2))
    W = solve_ridge(X, Y, 1e12)
    assert np.max(np.abs(W)) < 1e-6


def test_solve_ridge_shrinkage_is_monotone():
    rng = np.random.default_rng(19)
    X = rng.standard_normal((40, 8))
    Y = rng.standard_normal((40, 3))
    norms = [
        float(np.linalg.norm(solve_ridge(X, Y, lam))) for lam in (0.0, 0.1, 1.0, 10.0)
    ]
    assert all(a >= b for a, b in zip(norms, norms[1:]))


def test_solve_ridge_row_mismatch():
    with pytest.raises(ValueError):
        solve_ridge(np.ones((5, 2)), np.ones((6, 1)), 1.0)


def test_solve_ridge_negative_lambda():
    with pytest.raises(ValueError):
        solve_ridge(np.ones((5, 2)), np.ones((5, 1)), -1.0)
