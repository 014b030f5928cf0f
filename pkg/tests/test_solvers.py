import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from carpetlab.errors import ConvergenceError, SingularSystem
from carpetlab.geometry import WeightConfig
from carpetlab.network import build_grid_graph
from carpetlab.solvers import DirichletFactor, dirichlet_solve, harmonic_extensions, pcg

from oracles import dense_dirichlet


def _random_laplacian(seed, n=40):
    rng = np.random.default_rng(seed)
    # a path keeps the graph connected; random chords on top
    a = list(range(n - 1))
    b = list(range(1, n))
    extra = rng.integers(0, n, size=(2 * n, 2))
    extra = extra[extra[:, 0] != extra[:, 1]]
    a += extra[:, 0].tolist()
    b += extra[:, 1].tolist()
    w = rng.uniform(0.1, 5.0, size=len(a))
    A = sp.coo_matrix((np.r_[w, w], (np.r_[a, b], np.r_[b, a])), shape=(n, n)).tocsr()
    return (sp.diags(np.asarray(A.sum(axis=1)).ravel()) - A).tocsr()


@given(st.integers(0, 10**6))
def test_all_methods_agree_with_dense_oracle(seed):
    L = _random_laplacian(seed)
    fixed = np.array([0, 7, 39])
    vals = np.array([0.0, 0.3, 1.0])
    ref = dense_dirichlet(L, fixed, vals)
    for method in ("pcg", "amg", "direct", "dense"):
        u, info = dirichlet_solve(L, fixed, vals, tol=1e-12, method=method)
        np.testing.assert_allclose(u, ref, atol=1e-9)
        assert info.residual <= 1e-10


def test_pcg_residual_target_and_iteration_cap():
    L = _random_laplacian(3, n=200)
    A = (L + sp.identity(200)).tocsr()
    b = np.ones(200)
    x, info = pcg(A, b, tol=1e-11)
    assert np.linalg.norm(b - A @ x) <= 1e-11 * np.linalg.norm(b) * 1.01
    with pytest.raises(ConvergenceError) as exc:
        pcg(A, b, tol=1e-14, maxiter=2)
    assert exc.value.iterations == 2 and exc.value.bound > 0


def test_warm_start_is_used():
    L = _random_laplacian(5, n=300)
    u, info = dirichlet_solve(L, [0, 299], [0.0, 1.0], tol=1e-12, method="pcg")
    _, again = dirichlet_solve(L, [0, 299], [0.0, 1.0], tol=1e-12, method="pcg", x0=u)
    assert again.iterations < info.iterations


def test_unpinned_component_is_rejected():
    L = sp.block_diag([_random_laplacian(1, 10), _random_laplacian(2, 10)]).tocsr()
    with pytest.raises(SingularSystem):
        dirichlet_solve(L, [0], [1.0])
    with pytest.raises(ValueError):
        dirichlet_solve(L, [0, 0, 10], [1.0, 1.0, 0.0])


def test_poisson_right_hand_side():
    L = _random_laplacian(7)
    rhs = np.linspace(0, 1, 40)
    u, _ = dirichlet_solve(L, [0], [0.0], rhs=rhs, tol=1e-12, method="direct")
    free = np.arange(1, 40)
    np.testing.assert_allclose((L @ u)[free], rhs[free], atol=1e-9)


def test_many_right_hand_sides_match_single_solves():
    g = build_grid_graph(1, WeightConfig(2), 3)
    fixed = np.nonzero(g.degree == 1)[0]
    data = np.random.default_rng(1).uniform(size=(fixed.size, 3))
    H = harmonic_extensions(g.laplacian, fixed, data)
    for j in range(3):
        u, _ = dirichlet_solve(g.laplacian, fixed, data[:, j], tol=1e-13, method="pcg")
        np.testing.assert_allclose(H[:, j], u, atol=1e-10)
    fac = DirichletFactor(g.laplacian, fixed)
    rows = np.array([3, 5, 8])
    np.testing.assert_allclose(fac.extend(data, rows=rows), H[rows], atol=1e-14)
