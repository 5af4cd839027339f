import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rdpgfit.exceptions import ManifoldError, RetractionError
from rdpgfit.manifold import (
    constraint_violation,
    is_on_manifold,
    manifold_dimension,
    normal_coefficients,
    project_normal,
    project_tangent,
    retract,
    riemannian_grad,
    tangent_space_dimension,
    tangent_violation,
    to_manifold,
)

X0 = np.vstack([np.eye(2), np.zeros((1, 2))])


def random_point(rng, n=10, d=3):
    return to_manifold(rng.normal(size=(n, d)))


def ls_normal_projection(X, Z):
    """Oracle: least-squares projection of Z onto span{X S : S symmetric hollow}."""
    n, d = X.shape
    iu, ju = np.triu_indices(d, 1)
    basis = []
    for a, b in zip(iu, ju):
        S = np.zeros((d, d))
        S[a, b] = S[b, a] = 1.0
        basis.append((X @ S).ravel())
    B = np.array(basis).T
    coef, *_ = np.linalg.lstsq(B, Z.ravel(), rcond=None)
    return (B @ coef).reshape(n, d)


def hollow_symmetric(rng, d):
    S = rng.normal(size=(d, d))
    S = S + S.T
    np.fill_diagonal(S, 0.0)
    return S


class TestMembership:
    def test_identity_columns(self):
        assert is_on_manifold(np.eye(5)[:, :3])

    def test_equal_columns(self):
        X = np.ones((4, 2))
        assert not is_on_manifold(X)

    def test_zero_column(self):
        X = np.eye(4)[:, :2].copy()
        X[:, 1] = 0.0
        assert not is_on_manifold(X)

    def test_wide_matrix(self):
        assert not is_on_manifold(np.eye(2, 3))

    def test_scaled_columns_are_on_manifold(self):
        assert is_on_manifold(np.eye(4)[:, :2] * np.array([1e-3, 1e3]))


class TestNormalProjection:
    def test_hand_example(self):
        Z = np.zeros((3, 2))
        Z[:2] = [[1, 2], [3, 4]]
        expected = np.zeros((3, 2))
        expected[:2] = [[0, 2.5], [2.5, 0]]
        np.testing.assert_allclose(project_normal(X0, Z), expected, atol=1e-15)
        np.testing.assert_allclose(ls_normal_projection(X0, Z), expected, atol=1e-12)

    def test_least_squares_oracle(self, rng):
        for _ in range(10):
            X = random_point(rng, 7, 3)
            Z = rng.normal(size=(7, 3))
            np.testing.assert_allclose(project_normal(X, Z), ls_normal_projection(X, Z), atol=1e-10)

    def test_tangent_input_is_annihilated(self, rng):
        X = random_point(rng)
        zeta = project_tangent(X, rng.normal(size=X.shape))
        assert np.linalg.norm(project_normal(X, zeta)) < 1e-12 * np.linalg.norm(zeta)

    def test_normal_input_is_fixed(self, rng):
        X = random_point(rng)
        Z = X @ hollow_symmetric(rng, 3)
        np.testing.assert_allclose(project_normal(X, Z), Z, atol=1e-12 * np.linalg.norm(Z))

    def test_coefficient_structure(self, rng):
        X = random_point(rng)
        L = normal_coefficients(X, rng.normal(size=X.shape))
        np.testing.assert_array_equal(np.diag(L), 0.0)
        np.testing.assert_allclose(L, L.T, atol=0)

    def test_zero_column_rejected(self):
        X = X0.copy()
        X[:, 1] = 0.0
        with pytest.raises(ManifoldError):
            project_normal(X, np.ones((3, 2)))


class TestTangentProjection:
    def test_normal_input_gives_zero(self, rng):
        X = random_point(rng)
        Z = X @ hollow_symmetric(rng, 3)
        assert np.linalg.norm(project_tangent(X, Z)) < 1e-12 * np.linalg.norm(Z)

    def test_tangent_input_unchanged(self, rng):
        X = random_point(rng)
        zeta = project_tangent(X, rng.normal(size=X.shape))
        np.testing.assert_allclose(project_tangent(X, zeta), zeta, atol=1e-12)

    def test_orthogonal_to_normal_part(self, rng):
        X = random_point(rng)
        Z = rng.normal(size=X.shape)
        inner = np.sum(project_tangent(X, Z) * project_normal(X, Z))
        assert abs(inner) <= 1e-9 * np.sum(Z * Z)

    @given(seed=st.integers(0, 10_000), n=st.integers(3, 12), d=st.integers(1, 3))
    def test_decomposition_and_idempotence(self, seed, n, d):
        rng = np.random.default_rng(seed)
        X = random_point(rng, n, d) * rng.uniform(0.1, 10, size=d)
        Z = rng.normal(size=(n, d))
        T, N = project_tangent(X, Z), project_normal(X, Z)
        scale = np.linalg.norm(Z)
        assert np.linalg.norm(T + N - Z) <= 1e-10 * scale
        assert np.linalg.norm(project_tangent(X, T) - T) <= 1e-10 * scale
        assert np.linalg.norm(project_normal(X, N) - N) <= 1e-10 * scale
        assert np.linalg.norm(project_normal(X, T)) <= 1e-10 * scale
        assert np.linalg.norm(project_tangent(X, N)) <= 1e-10 * scale
        assert tangent_violation(X, T) <= 1e-9 * np.linalg.norm(X) * max(np.linalg.norm(T), 1e-300)


class TestRetraction:
    def test_zero_step(self, rng):
        X = random_point(rng)
        np.testing.assert_array_equal(retract(X, np.zeros_like(X)), X)

    def test_zero_step_via_modified_qr(self, rng):
        # an orthogonal-column matrix is its own modified-QR factor
        X = random_point(rng)
        np.testing.assert_allclose(to_manifold(X), X, atol=1e-12)

    def test_first_order_agreement(self, rng):
        zeta = project_tangent(X0, rng.normal(size=(3, 2)))
        ts = [1e-2 / 2**k for k in range(12)]
        gaps = [np.linalg.norm(retract(X0, t * zeta) - (X0 + t * zeta)) for t in ts]
        ratios = np.array(gaps[:-1]) / np.array(gaps[1:])
        assert np.all((ratios >= 3.5) & (ratios <= 4.5))

    @given(seed=st.integers(0, 10_000), scale=st.floats(1e-3, 1e2))
    def test_output_on_manifold(self, seed, scale):
        rng = np.random.default_rng(seed)
        X = random_point(rng, 8, 3)
        Y = retract(X, scale * project_tangent(X, rng.normal(size=X.shape)))
        assert is_on_manifold(Y, 1e-9)

    def test_rank_deficient_step(self):
        X = X0.copy()
        zeta = np.zeros_like(X)
        zeta[:, 1] = -X[:, 1]
        with pytest.raises(RetractionError):
            retract(X, zeta)


class TestRiemannianGrad:
    def test_zero(self, rng):
        X = random_point(rng)
        np.testing.assert_array_equal(riemannian_grad(X, np.zeros_like(X)), 0.0)

    def test_normal_gradient(self, rng):
        X = random_point(rng)
        G = X @ hollow_symmetric(rng, 3)
        assert np.linalg.norm(riemannian_grad(X, G)) < 1e-12 * np.linalg.norm(G)

    def test_directional_derivative(self, rng):
        # f(X) = <C, X> + 0.5 ||X||^2, Euclidean gradient C + X
        n, d = 10, 3
        C = rng.normal(size=(n, d))
        f = lambda Y: np.sum(C * Y) + 0.5 * np.sum(Y * Y)
        X = random_point(rng, n, d)
        g = riemannian_grad(X, C + X)
        h = 1e-6
        fd = (f(retract(X, h * g)) - f(retract(X, -h * g))) / (2 * h)
        exact = np.sum((C + X) * g)
        assert abs(fd - exact) <= 1e-6 * abs(exact)
        np.testing.assert_allclose(exact, np.sum(g * g), rtol=1e-10)


class TestDimension:
    def test_six_by_three(self, rng):
        X = random_point(rng, 6, 3)
        assert tangent_space_dimension(X) == 15 == manifold_dimension(6, 3)

    @pytest.mark.parametrize("n,d", [(4, 1), (5, 2), (10, 3), (7, 4)])
    def test_formula(self, n, d, rng):
        X = random_point(rng, n, d) * rng.uniform(0.5, 3, size=d)
        assert tangent_space_dimension(X) == n * d - d * (d - 1) // 2


def test_constraint_violation_scale_free(rng):
    X = rng.normal(size=(6, 2))
    assert np.isclose(constraint_violation(X), constraint_violation(10 * X))
