import math

import numpy as np
import pytest

from svridge import Adjacency, RBFFeatures, build_grid_centers, design_matrix, make_basis, rbf_width
from svridge.basis import BasisSpec


def test_centers_1d():
    np.testing.assert_allclose(build_grid_centers((-2, 2), 5)[:, 0], [-2, -1, 0, 1, 2])


def test_centers_2d_row_major():
    c = build_grid_centers([(0, 1), (0, 1)], 2)
    np.testing.assert_array_equal(c, [[0, 0], [0, 1], [1, 0], [1, 1]])


def test_single_center_rejected():
    with pytest.raises(ValueError):
        build_grid_centers((0, 1), 1)


def test_width_rules():
    c = np.linspace(0, 1, 11)
    assert math.isclose(rbf_width(c), 0.1)
    assert math.isclose(rbf_width(c, 2.0), 0.2)
    with pytest.raises(ValueError):
        rbf_width(c, 0.0)


def test_gaussian_values():
    spec = make_basis((-2, 2), 5)
    phi = design_matrix(spec, [[0.0], [0.0 + spec.width]]).phi
    assert phi[0, 2] == 1.0
    assert math.isclose(phi[1, 2], math.exp(-0.5), rel_tol=1e-15)
    assert math.isclose(math.exp(-0.5), 0.60653, rel_tol=1e-5)


def test_design_matrix_matches_scalar_loop():
    rng = np.random.default_rng(3)
    spec = make_basis((0, 1), 4, scale=1.3)
    xs = rng.uniform(0, 1, 7)
    phi = design_matrix(spec, xs).phi
    for i, x in enumerate(xs):
        for j, c in enumerate(spec.centers[:, 0]):
            assert math.isclose(phi[i, j], math.exp(-((x - c) ** 2) / (2 * spec.width**2)),
                                rel_tol=1e-14)
    assert np.all((phi > 0) & (phi <= 1))


def test_row_permutation_equivariance():
    rng = np.random.default_rng(4)
    spec = make_basis([(0, 1), (0, 1)], 4)
    xs = rng.uniform(0, 1, (9, 2))
    perm = rng.permutation(9)
    np.testing.assert_array_equal(design_matrix(spec, xs[perm]).phi, design_matrix(spec, xs).phi[perm])


@pytest.mark.parametrize("g", [2, 3, 10])
def test_adjacency_edge_counts(g):
    assert len(Adjacency.chain(g).edges) == g - 1
    grid = Adjacency.grid((g, g))
    assert len(grid.edges) == 2 * g * (g - 1)
    assert grid.is_connected()
    L = grid.laplacian()
    np.testing.assert_array_equal(L, L.T)
    np.testing.assert_array_equal(L.sum(1), 0)
    assert np.linalg.eigvalsh(L).min() > -1e-12


def test_grid_adjacency_has_no_row_wrap():
    adj = Adjacency.grid((3, 3))
    # centre 2 ends the first row; centre 3 starts the second
    assert 3 not in adj.neighbors[2]
    assert adj.neighbors[4] == (1, 3, 5, 7)


def test_chain_laplacian_is_difference_penalty():
    lam = np.random.default_rng(0).uniform(0.1, 2, 8)
    adj = Adjacency.chain(8)
    assert math.isclose(lam @ adj.laplacian() @ lam, np.sum(np.diff(lam) ** 2), rel_tol=1e-13)
    assert math.isclose(adj.difference_penalty(lam), np.sum(np.diff(lam) ** 2), rel_tol=1e-13)


def test_no_zero_columns_when_centres_inside_data():
    spec = make_basis((0, 1), 20)
    phi = design_matrix(spec, np.linspace(0, 1, 50)).phi
    assert phi.max(axis=0).min() > 0.5


def test_spec_validation():
    with pytest.raises(ValueError):
        BasisSpec(centers=[[0.0], [0.0]], width=1.0, domain=[(0, 1)], grid_shape=(2,))
    with pytest.raises(ValueError):
        BasisSpec(centers=[[0.0], [1.0]], width=0.0, domain=[(0, 1)], grid_shape=(2,))


def test_default_sizes():
    assert make_basis((-2, 2)).dims == 1
    assert make_basis([(0, 1), (0, 1)]).grid_shape == (10, 10)


def test_rbf_transformer():
    X = np.linspace(0, 1, 12)[:, None]
    feats = RBFFeatures(n_centers=6, width_scale=1.5).fit(X)
    out = feats.transform(X)
    assert out.shape == (12, 6)
    with pytest.raises(ValueError):
        feats.transform(np.zeros((2, 2)))
