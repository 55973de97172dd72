"""Block parcellation and the per-parcel sparse spatial prior machinery."""

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError

PINV_CUTOFF = 1e-10


@dataclass
class Parcellation:
    """Partition of the stored voxels into axis-aligned blocks.

    ``labels[v]`` is the 0-based parcel of voxel ``v``; ``indices[g]`` lists
    the voxels of parcel ``g`` in ascending order.
    """

    labels: np.ndarray
    indices: list
    splits: tuple
    requested: int

    @property
    def n_parcels(self):
        return len(self.indices)

    @property
    def sizes(self):
        return np.array([len(ix) for ix in self.indices])


def _factorizations(n, k):
    if k == 1:
        yield (n,)
        return
    for f in range(1, n + 1):
        if n % f == 0:
            for rest in _factorizations(n // f, k - 1):
                yield (f,) + rest


def _choose_splits(dims, n_parcels):
    dims = np.asarray(dims)
    best = None
    for splits in _factorizations(n_parcels, len(dims)):
        s = np.asarray(splits)
        if np.any(s > dims):
            continue
        sides = dims / s
        score = sides.max() / sides.min()
        if best is None or score < best[0] - 1e-12:
            best = (score, tuple(int(v) for v in splits))
    return None if best is None else best[1]


def parcellate(dims, n_parcels, mask=None):
    """Split the grid into ``n_parcels`` near-equal axis-aligned blocks.

    The per-axis split counts are the factorization of ``n_parcels`` whose
    blocks are closest to square. If no factorization fits the grid, the
    nearest smaller count that does is used and a warning is issued.
    Blocks along an axis have ``floor`` or ``ceil`` of ``dim / splits``
    voxels. With a ``mask``, only masked voxels are assigned and empty
    blocks are dropped.
    """
    dims = tuple(int(d) for d in dims)
    n_vox = int(np.prod(dims))
    if n_parcels < 1:
        raise ConfigError("number of parcels must be at least 1")
    if n_parcels > n_vox:
        raise ConfigError("more parcels ({}) than voxels ({})".format(
            n_parcels, n_vox))
    splits = None
    g = n_parcels
    while splits is None:
        splits = _choose_splits(dims, g)
        if splits is None:
            g -= 1
    if g != n_parcels:
        warnings.warn("{} parcels do not fit grid {}; using {}".format(
            n_parcels, dims, g))

    axis_labels = []
    for d, s in zip(dims, splits):
        sizes = [len(a) for a in np.array_split(np.arange(d), s)]
        axis_labels.append(np.repeat(np.arange(s), sizes))
    block = np.zeros(dims, dtype=int)
    for axis, lab in enumerate(axis_labels):
        shape = [1] * len(dims)
        shape[axis] = dims[axis]
        block = block * splits[axis] + lab.reshape(shape)
    block = block.ravel()
    if mask is not None:
        block = block[np.asarray(mask, dtype=bool).ravel()]
    present = np.unique(block)
    relabel = np.full(int(np.prod(splits)), -1)
    relabel[present] = np.arange(present.size)
    labels = relabel[block]
    indices = [np.flatnonzero(labels == k) for k in range(present.size)]
    return Parcellation(labels, indices, tuple(splits), n_parcels)


def build_adjacency(coords, neighborhood="edge+corner"):
    """Binary symmetric adjacency of voxels at integer ``coords``.

    ``"edge"`` links voxels at Manhattan distance 1; ``"edge+corner"``
    links voxels at Chebyshev distance 1 (8 neighbours in 2D, 26 in 3D).
    """
    coords = np.atleast_2d(np.asarray(coords))
    if coords.shape[0] == 0:
        raise DataError("empty parcel")
    diff = np.abs(coords[:, None, :] - coords[None, :, :])
    if neighborhood == "edge":
        adj = diff.sum(-1) == 1
    elif neighborhood == "edge+corner":
        adj = diff.max(-1) == 1
    else:
        raise ConfigError("unknown neighborhood {!r}".format(neighborhood))
    return adj.astype(float)


def laplacian(adjacency):
    """Graph Laplacian ``diag(A 1) - A``."""
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
        raise DataError("adjacency must be a symmetric square matrix")
    return np.diag(a.sum(axis=1)) - a


def eigenbasis(adjacency, q):
    """Leading ``q`` unit eigenvectors of ``adjacency``, largest first.

    Each column's largest-magnitude entry is made positive. Columns with
    (numerically) equal eigenvalues are ordered by the index of that entry.
    """
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    if not 1 <= q <= n:
        raise ConfigError("q must be in [1, {}], got {}".format(n, q))
    w, vecs = np.linalg.eigh(a)
    w = w[::-1]
    vecs = vecs[:, ::-1]
    lead = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[lead, np.arange(n)])
    vecs = vecs * np.where(signs == 0, 1.0, signs)

    tol = 1e-10 * max(1.0, np.max(np.abs(w)))
    order = []
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and abs(w[stop] - w[start]) <= tol:
            stop += 1
        group = list(range(start, stop))
        order.extend(sorted(group, key=lambda j: (lead[j], j)))
        start = stop
    order = np.asarray(order[:q])
    return vecs[:, order], w[order]


def default_q(n_vox):
    """Basis size scaled from 5 eigenvectors per ~200 voxels, at least 3."""
    return int(min(n_vox, max(3, round(5 * n_vox / 200))))


@dataclass
class ParcelGraph:
    """Spatial prior quantities for one parcel."""

    adjacency: np.ndarray
    laplacian: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray
    prior_precision: np.ndarray

    @property
    def q(self):
        return self.basis.shape[1]

    @property
    def n_voxels(self):
        return self.basis.shape[0]

    def leverage(self):
        """``m_v' Qs^+ m_v`` for each voxel, using a cutoff pseudo-inverse."""
        qs_inv = np.linalg.pinv(self.prior_precision, rcond=PINV_CUTOFF,
                                hermitian=True)
        return np.einsum("ij,jk,ik->i", self.basis, qs_inv, self.basis)

    def delta_covariance_factor(self):
        """Cholesky factor of ``(Qs + M'M)^-1``."""
        h = self.prior_precision + self.basis.T @ self.basis
        return np.linalg.cholesky(np.linalg.inv(h))


def parcel_graph(coords, q=None, neighborhood="edge+corner"):
    adj = build_adjacency(coords, neighborhood)
    lap = laplacian(adj)
    q = default_q(adj.shape[0]) if q is None else min(int(q), adj.shape[0])
    basis, w = eigenbasis(adj, q)
    qs = basis.T @ lap @ basis
    qs = 0.5 * (qs + qs.T)
    return ParcelGraph(adj, lap, basis, w, qs)


def build_parcel_graphs(coords, parcellation, q=None,
                        neighborhood="edge+corner"):
    """One ParcelGraph per parcel, in parcel order."""
    coords = np.asarray(coords)
    return [parcel_graph(coords[ix], q, neighborhood)
            for ix in parcellation.indices]


__all__ = [
    "Parcellation", "ParcelGraph", "parcellate", "build_adjacency",
    "laplacian", "eigenbasis", "default_q", "parcel_graph",
    "build_parcel_graphs",
]
