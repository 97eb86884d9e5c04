"""Gaussian radial basis functions on regular grids."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .core import CompatibilityError, Dataset, _frozen, _normalize_domain, validate_compatibility

DEFAULT_M_1D = 30
DEFAULT_M_PER_DIM_2D = 10


@dataclass(frozen=True)
class Adjacency:
    """Undirected neighbour structure over the basis centres.

    ``edges`` holds each edge once as ``(i, j)`` with ``i < j``; ``neighbors[k]``
    lists the neighbours of centre ``k`` in ascending order.
    """

    size: int
    edges: np.ndarray
    neighbors: tuple = field(repr=False, default=None)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=int).reshape(-1, 2)
        edges = np.sort(edges, axis=1)
        nb = [[] for _ in range(self.size)]
        for i, j in edges:
            nb[i].append(j)
            nb[j].append(i)
        object.__setattr__(self, "edges", _frozen(edges, dtype=int))
        object.__setattr__(self, "neighbors", tuple(tuple(sorted(v)) for v in nb))

    @classmethod
    def chain(cls, m):
        return cls(m, np.column_stack([np.arange(m - 1), np.arange(1, m)]))

    @classmethod
    def grid(cls, shape):
        """4-neighbour adjacency of a row-major grid of the given shape."""
        if len(shape) == 1:
            return cls.chain(shape[0])
        rows, cols = shape
        idx = np.arange(rows * cols).reshape(rows, cols)
        horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
        vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
        return cls(rows * cols, np.vstack([horiz, vert]))

    @property
    def degree(self):
        return np.array([len(v) for v in self.neighbors])

    @property
    def max_degree(self):
        return int(self.degree.max()) if self.size else 0

    def laplacian(self):
        """Graph Laplacian; for a chain this is the first-difference D'D matrix."""
        L = np.zeros((self.size, self.size))
        i, j = self.edges[:, 0], self.edges[:, 1]
        np.add.at(L, (i, j), -1.0)
        np.add.at(L, (j, i), -1.0)
        L[np.diag_indices(self.size)] = self.degree
        return L

    def difference_penalty(self, lam):
        """Sum of squared differences of ``lam`` across edges."""
        lam = np.asarray(lam, dtype=float)
        d = lam[self.edges[:, 0]] - lam[self.edges[:, 1]]
        return float(d @ d)

    def is_connected(self):
        if self.size == 0:
            return False
        seen = {0}
        stack = [0]
        while stack:
            k = stack.pop()
            for v in self.neighbors[k]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.size


@dataclass(frozen=True)
class BasisSpec:
    """Gaussian RBF basis: centres on a regular grid with a common width."""

    centers: np.ndarray
    width: float
    domain: tuple
    grid_shape: tuple
    kind: str = "gaussian-rbf"

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        m, dims = centers.shape
        if dims not in (1, 2):
            raise ValueError("built-in bases support 1 or 2 dimensions")
        if m < 2:
            raise ValueError("a basis needs at least 2 centres")
        if len(np.unique(centers, axis=0)) != m:
            raise ValueError("centres must be pairwise distinct")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if int(np.prod(self.grid_shape)) != m:
            raise ValueError("grid_shape does not match the number of centres")
        if self.kind != "gaussian-rbf":
            raise ValueError(f"unsupported basis kind {self.kind!r}")
        object.__setattr__(self, "centers", _frozen(centers))
        object.__setattr__(self, "width", float(self.width))
        object.__setattr__(self, "domain", _normalize_domain(self.domain, dims))
        object.__setattr__(self, "grid_shape", tuple(int(g) for g in self.grid_shape))

    @property
    def dims(self):
        return self.centers.shape[1]

    @property
    def m(self):
        return self.centers.shape[0]

    def adjacency(self):
        return Adjacency.grid(self.grid_shape)

    def evaluate(self, xs):
        """Basis matrix at ``xs`` without domain checks (for plotting grids)."""
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        sq = ((xs[:, None, :] - self.centers[None, :, :]) ** 2).sum(-1)
        return np.exp(-sq / (2.0 * self.width**2))

    def to_dict(self):
        return {
            "kind": self.kind,
            "dims": self.dims,
            "centers": self.centers.tolist(),
            "width": self.width,
            "domain": [list(d) for d in self.domain],
            "grid_shape": list(self.grid_shape),
        }


@dataclass(frozen=True)
class DesignMatrix:
    """``phi[i, j] = phi_j(x_i)`` together with the centre adjacency."""

    phi: np.ndarray
    adjacency: Adjacency

    def __post_init__(self):
        object.__setattr__(self, "phi", _frozen(self.phi))

    @property
    def shape(self):
        return self.phi.shape


def build_grid_centers(domain, m_per_dim, dims=None):
    """Equally spaced centres including the endpoints of each interval.

    For two dimensions the tensor grid is returned in row-major order (the
    first coordinate varies slowest).
    """
    if m_per_dim < 2:
        raise ValueError(f"m_per_dim must be >= 2, got {m_per_dim}")
    dom = np.asarray(domain, dtype=float)
    if dom.shape == (2,):
        dom = np.tile(dom, (dims or 1, 1))
    if dims is not None and dom.shape[0] != dims:
        raise ValueError(f"domain has {dom.shape[0]} dimensions, expected {dims}")
    axes = [np.linspace(lo, hi, m_per_dim) for lo, hi in dom]
    return np.array(list(product(*axes)))


def rbf_width(centers, scale=1.0):
    """Bandwidth as ``scale`` times the grid spacing of ``centers``.

    For multi-dimensional grids the smallest per-axis spacing is used.
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    centers = np.asarray(centers, dtype=float)
    if centers.ndim == 1:
        centers = centers[:, None]
    spacings = []
    for j in range(centers.shape[1]):
        u = np.unique(centers[:, j])
        if u.size > 1:
            spacings.append(np.diff(u).min())
    if not spacings:
        raise ValueError("cannot infer spacing from a single centre")
    return scale * float(min(spacings))


def make_basis(domain, m_per_dim=None, scale=1.0, dims=None):
    """Build a :class:`BasisSpec` on ``domain`` with the package defaults."""
    dom = np.asarray(domain, dtype=float)
    if dom.shape == (2,):
        dom = np.tile(dom, (dims or 1, 1))
    dims = dom.shape[0]
    if m_per_dim is None:
        m_per_dim = DEFAULT_M_1D if dims == 1 else DEFAULT_M_PER_DIM_2D
    centers = build_grid_centers(dom, m_per_dim, dims)
    return BasisSpec(
        centers=centers,
        width=rbf_width(centers, scale),
        domain=dom,
        grid_shape=(m_per_dim,) * dims,
    )


def design_matrix(spec: BasisSpec, xs) -> DesignMatrix:
    """Evaluate the basis at the design points.

    ``xs`` may be a :class:`Dataset` (checked with ``validate_compatibility``)
    or a raw (n, p) array, which is checked against the basis domain.
    """
    if not isinstance(xs, Dataset):
        xs = np.asarray(xs, dtype=float)
        if xs.ndim == 1:
            xs = xs[:, None]
        if xs.shape[1] != spec.dims:
            raise CompatibilityError(
                f"dimension mismatch: points have p={xs.shape[1]}, basis has dims={spec.dims}"
            )
        ds = Dataset(xs, np.zeros(xs.shape[0]), domain=None)
    else:
        ds = xs
    validate_compatibility(ds, spec)
    return DesignMatrix(spec.evaluate(ds.xs), spec.adjacency())


def as_phi(phi):
    """Accept a :class:`DesignMatrix` or a plain array; return ``(array, adjacency)``."""
    if isinstance(phi, DesignMatrix):
        return phi.phi, phi.adjacency
    arr = np.asarray(phi, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr, Adjacency.chain(arr.shape[1])


class RBFFeatures(TransformerMixin, BaseEstimator):
    """Expand inputs in Gaussian RBFs centred on a regular grid.

    Parameters
    ----------
    n_centers : int, optional
        Centres per dimension; defaults to 30 in 1-d and 10 in 2-d.
    width_scale : float
        Bandwidth in units of the grid spacing.
    domain : array-like, optional
        ``(lo, hi)`` per dimension; defaults to the range seen in ``fit``.
    """

    def __init__(self, n_centers=None, width_scale=1.0, domain=None):
        self.n_centers = n_centers
        self.width_scale = width_scale
        self.domain = domain

    def fit(self, X, y=None):
        X = check_array(X, ensure_min_samples=1)
        dom = self.domain
        if dom is None:
            dom = np.column_stack([X.min(0), X.max(0)])
        self.basis_ = make_basis(dom, self.n_centers, self.width_scale, dims=X.shape[1])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, but RBFFeatures was fitted with {self.n_features_in_}"
            )
        return self.basis_.evaluate(X)
