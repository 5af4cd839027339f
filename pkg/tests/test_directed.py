import numpy as np
import pytest
from _oracles import central_difference, random_mask
from hypothesis import given
from hypothesis import strategies as st

from rdpgfit.directed import (
    ArmijoConfig,
    DirectedEmbedding,
    ase_directed,
    cost_directed,
    grad_directed,
    max_offdiag_gram,
    orthogonalize_pair,
    pair_constraint_violation,
    random_manifold_init,
    rescale_columns,
    solve_riemannian_gd,
    verify_ambiguity_reduction,
)
from rdpgfit.exceptions import ContractError, DegenerateColumnError, DimensionError, InvalidConfigError, SingularSystemError
from rdpgfit.graph import SbmConfig, hollow_mask, sample_rdpg, sample_sbm
from rdpgfit.manifold import is_on_manifold
from rdpgfit.undirected import SolverConfig, cost_undirected, grad_undirected

PI4 = np.array(
    [
        [0.5, 0.1, 0.2, 0.05],
        [0.05, 0.4, 0.1, 0.2],
        [0.2, 0.05, 0.45, 0.1],
        [0.1, 0.2, 0.05, 0.35],
    ]
)


def directed_sbm(n_per=30, seed=0):
    return sample_sbm(SbmConfig(sizes=[n_per] * 4, Pi=PI4, directed=True, seed=seed))


class TestCost:
    def test_zero_factors_count_edges(self, rng):
        A = sample_rdpg(np.full((10, 10), 0.3), directed=True, seed=rng)
        Z = np.zeros((10, 2))
        assert cost_directed(A, hollow_mask(10), Z, Z) == A.sum()

    def test_exact_factorisation_full_mask(self, rng):
        Xl, Xr = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        assert cost_directed(Xl @ Xr.T, np.ones((6, 6)), Xl, Xr) == 0.0

    def test_reduces_to_undirected(self, rng):
        A = sample_rdpg(np.full((9, 9), 0.4), seed=rng)
        M = random_mask(9, rng)
        X = rng.normal(size=(9, 2))
        assert np.isclose(cost_directed(A, M, X, X), cost_undirected(A, M, X))


class TestGradient:
    def test_zero_at_exact_fit(self, rng):
        Xl, Xr = rng.normal(size=(6, 2)), rng.normal(size=(6, 2))
        Gl, Gr = grad_directed(Xl @ Xr.T, np.ones((6, 6)), Xl, Xr)
        assert np.abs(Gl).max() < 1e-12 and np.abs(Gr).max() < 1e-12

    @given(seed=st.integers(0, 10_000))
    def test_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, d = 10, 2
        A = sample_rdpg(np.full((n, n), 0.4), directed=True, seed=rng)
        M = random_mask(n, rng, directed=True)
        Xl, Xr = rng.normal(size=(n, d)), rng.normal(size=(n, d))
        Gl, Gr = grad_directed(A, M, Xl, Xr)
        Fl = central_difference(lambda Y: cost_directed(A, M, Y, Xr), Xl)
        Fr = central_difference(lambda Y: cost_directed(A, M, Xl, Y), Xr)
        assert np.linalg.norm(Gl - Fl) <= 1e-6 * np.linalg.norm(Fl)
        assert np.linalg.norm(Gr - Fr) <= 1e-6 * np.linalg.norm(Fr)

    def test_chain_rule_identity(self, rng):
        A = sample_rdpg(np.full((9, 9), 0.4), seed=rng)
        M = random_mask(9, rng)
        X = rng.normal(size=(9, 2))
        Gl, Gr = grad_directed(A, M, X, X)
        np.testing.assert_allclose(Gl + Gr, grad_undirected(A, M, X), atol=1e-12)


class TestAseDirected:
    def test_diagonal(self):
        emb = ase_directed(np.diag([5.0, 2.0]), 1)
        np.testing.assert_allclose(emb.Xl[:, 0], [np.sqrt(5), 0])
        np.testing.assert_allclose(emb.Xr[:, 0], [np.sqrt(5), 0])

    def test_psd_factors_coincide(self, rng):
        B = rng.normal(size=(8, 3))
        emb = ase_directed(B @ B.T, 3)
        np.testing.assert_allclose(np.abs(emb.Xl), np.abs(emb.Xr), atol=1e-10)
        np.testing.assert_allclose(emb.Xl, emb.Xr, atol=1e-10)

    def test_constraint_holds_by_construction(self):
        emb = ase_directed(directed_sbm(), 4)
        assert pair_constraint_violation(emb.Xl, emb.Xr) < 1e-12

    def test_rank_deficient(self):
        with pytest.raises(DimensionError):
            ase_directed(np.diag([1.0, 0.0, 0.0]), 2)


class TestRescale:
    def test_hand_example(self):
        emb = rescale_columns(np.array([[2.0]]), np.array([[8.0]]))
        np.testing.assert_allclose(emb.Xl, [[4.0]])
        np.testing.assert_allclose(emb.Xr, [[4.0]])

    def test_identity_when_balanced(self, rng):
        Xl = rng.normal(size=(5, 2))
        Xr = Xl[::-1].copy()
        emb = rescale_columns(Xl, Xr)
        np.testing.assert_allclose(emb.Xl, Xl)
        np.testing.assert_allclose(emb.Xr, Xr)

    @given(seed=st.integers(0, 10_000))
    def test_product_preserved_and_norms_equal(self, seed):
        rng = np.random.default_rng(seed)
        Xl = rng.normal(size=(7, 3)) * rng.uniform(0.1, 10, size=3)
        Xr = rng.normal(size=(7, 3)) * rng.uniform(0.1, 10, size=3)
        emb = rescale_columns(Xl, Xr)
        P = Xl @ Xr.T
        assert np.linalg.norm(emb.Xl @ emb.Xr.T - P) <= 1e-12 * np.linalg.norm(P) * 10
        np.testing.assert_allclose(np.linalg.norm(emb.Xl, axis=0), np.linalg.norm(emb.Xr, axis=0), rtol=1e-13)

    def test_zero_column(self):
        with pytest.raises(DegenerateColumnError):
            rescale_columns(np.zeros((3, 1)), np.ones((3, 1)))


def constrained_pair(rng, n=20, d=3):
    emb = ase_directed(directed_sbm(n_per=n // 4 + 5, seed=int(rng.integers(1000))), d)
    return emb.Xl, emb.Xr


def random_orthonormal(d, rng):
    Q, R = np.linalg.qr(rng.normal(size=(d, d)))
    return Q * np.sign(np.diag(R))


class TestAmbiguity:
    def test_rotation(self, rng):
        Xl, Xr = constrained_pair(rng, d=2)
        c, s = np.cos(0.7), np.sin(0.7)
        assert verify_ambiguity_reduction(Xl, Xr, np.array([[c, -s], [s, c]]))

    def test_identity(self, rng):
        Xl, Xr = constrained_pair(rng, d=2)
        assert verify_ambiguity_reduction(Xl, Xr, np.eye(2))

    def test_diagonal_scaling_breaks_constraint(self, rng):
        Xl, Xr = constrained_pair(rng, d=2)
        assert not verify_ambiguity_reduction(Xl, Xr, np.diag([2.0, 0.5]))

    def test_rotation_generally_breaks_diagonality(self, rng):
        # only the equality of the Gram matrices survives a rotation
        Xl, Xr = constrained_pair(rng, d=2)
        c, s = np.cos(0.7), np.sin(0.7)
        T = np.array([[c, -s], [s, c]])
        assert max_offdiag_gram(Xl @ T, Xr @ T) > 1e-6
        np.testing.assert_allclose((Xl @ T).T @ (Xl @ T), (Xr @ T).T @ (Xr @ T), atol=1e-10)

    def test_unconstrained_input_rejected(self, rng):
        with pytest.raises(ContractError):
            verify_ambiguity_reduction(rng.normal(size=(5, 2)), rng.normal(size=(5, 2)), np.eye(2))

    @given(seed=st.integers(0, 10_000))
    def test_orthonormal_iff_admissible(self, seed):
        rng = np.random.default_rng(seed)
        Xl, Xr = constrained_pair(rng)
        Q = random_orthonormal(3, rng)
        assert verify_ambiguity_reduction(Xl, Xr, Q)
        B = rng.normal(size=(3, 3))
        if abs(np.linalg.svd(B, compute_uv=False) - 1).max() > 1e-2:
            assert not verify_ambiguity_reduction(Xl, Xr, B)

    def test_singular(self, rng):
        Xl, Xr = constrained_pair(rng, d=2)
        with pytest.raises(SingularSystemError):
            verify_ambiguity_reduction(Xl, Xr, np.zeros((2, 2)))


class TestOrthogonalizePair:
    def test_product_preserved_and_feasible(self, rng):
        Xl, Xr = rng.normal(size=(15, 3)), rng.normal(size=(15, 3))
        Yl, Yr = orthogonalize_pair(Xl, Xr)
        np.testing.assert_allclose(Yl @ Yr.T, Xl @ Xr.T, atol=1e-12)
        assert pair_constraint_violation(Yl, Yr) < 1e-12

    def test_feasible_input_unchanged(self, rng):
        Xl, Xr = constrained_pair(rng)
        Yl, Yr = orthogonalize_pair(Xl, Xr)
        np.testing.assert_allclose(Yl, Xl, atol=1e-10)
        np.testing.assert_allclose(Yr, Xr, atol=1e-10)

    def test_small_perturbation_keeps_orientation(self, rng):
        Xl, Xr = constrained_pair(rng)
        Yl, Yr = orthogonalize_pair(np.vstack([Xl, 0.1 * Xl[:1]]), np.vstack([Xr, 0.1 * Xr[:1]]))
        assert np.linalg.norm(Yl[:-1] - Xl) < 0.05 * np.linalg.norm(Xl)


class TestRiemannianGd:
    def test_warm_start_at_ase_never_increases(self):
        A = directed_sbm(seed=3)
        M = hollow_mask(A.shape[0])
        base = ase_directed(A, 4)
        f_ase = cost_directed(A, M, base.Xl, base.Xr)
        emb, rep = solve_riemannian_gd(A, M, SolverConfig(d=4), ArmijoConfig())
        assert np.all(np.diff(rep.trace) <= 0)
        assert rep.final_cost <= f_ase + 1e-9
        assert rep.max_violation <= 1e-8

    def test_armijo_sufficient_decrease(self):
        A = directed_sbm(seed=4)
        M = hollow_mask(A.shape[0])
        cfg = SolverConfig(d=4, init="random", seed=2, max_iters=50)
        _, rep = solve_riemannian_gd(A, M, cfg, ArmijoConfig())
        assert np.all(np.diff(rep.trace) < 0)

    def test_random_init_iterates_stay_feasible(self):
        A = directed_sbm(seed=5)
        cfg = SolverConfig(d=4, init="random", seed=0, max_iters=200)
        emb, rep = solve_riemannian_gd(A, None, cfg, ArmijoConfig())
        assert max(rep.violations) <= 1e-8
        assert len(rep.violations) == rep.iters + 1
        assert pair_constraint_violation(emb.Xl, emb.Xr) <= 1e-6
        assert rep.final_cost <= rep.trace[0]

    def test_zero_gradient_returns_init(self, rng):
        Xl = np.eye(6)[:, :2] * 2.0
        Xr = np.eye(6)[:, :2] * 2.0
        A = Xl @ Xr.T
        M = np.ones((6, 6))
        np.fill_diagonal(M, 0.0)
        np.fill_diagonal(A, 0.0)
        # diagonal-only residual is masked out, so the gradient vanishes
        emb, rep = solve_riemannian_gd(A, M, SolverConfig(d=2, init=(Xl, Xr)), ArmijoConfig())
        assert rep.iters == 0 and rep.converged
        np.testing.assert_array_equal(emb.Xl, Xl)

    def test_fixed_step(self):
        A = directed_sbm(seed=6)
        cfg = SolverConfig(d=4, step_size=1e-3, max_iters=30)
        _, rep = solve_riemannian_gd(A, None, cfg)
        assert rep.step_size == 1e-3
        assert rep.max_violation <= 1e-8

    def test_armijo_exhaustion_reports_not_converged(self):
        A = directed_sbm(seed=7)
        armijo = ArmijoConfig(initial_step=1e3, max_backtracks=0)
        _, rep = solve_riemannian_gd(A, None, SolverConfig(d=4, init="random"), armijo)
        assert not rep.converged
        assert "Armijo" in rep.message

    def test_off_manifold_warm_start_is_repaired(self, rng):
        A = directed_sbm(seed=8)
        Xl, Xr = rng.normal(size=(A.shape[0], 4)), rng.normal(size=(A.shape[0], 4))
        _, rep = solve_riemannian_gd(A, None, SolverConfig(d=4, init=(Xl, Xr), max_iters=5), ArmijoConfig())
        assert rep.max_violation <= 1e-8

    def test_random_manifold_init(self, rng):
        A = directed_sbm()
        Xl, Xr = random_manifold_init(A, hollow_mask(A.shape[0]), 3, seed=1)
        assert is_on_manifold(Xl) and is_on_manifold(Xr)

    def test_needs_config(self):
        with pytest.raises(InvalidConfigError):
            solve_riemannian_gd(np.zeros((3, 3)))


def test_armijo_validation():
    with pytest.raises(InvalidConfigError):
        ArmijoConfig(beta=1.5)
    with pytest.raises(InvalidConfigError):
        ArmijoConfig(initial_step=0)


def test_max_offdiag_gram(rng):
    Xl, Xr = constrained_pair(rng)
    assert max_offdiag_gram(Xl, Xr) < 1e-10
    assert max_offdiag_gram(np.ones((3, 2)), np.ones((3, 2))) == 3.0


def test_embedding_shapes():
    with pytest.raises(ValueError):
        DirectedEmbedding(np.zeros((3, 2)), np.zeros((3, 1)))
