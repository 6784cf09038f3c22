"""P1 stiffness assembly with per-pixel splitting and Dirichlet elimination.

The diffusion bilinear form restricted to pixel ``i`` yields a sparse
symmetric positive-semidefinite matrix ``B_i`` over the interior-vertex
unknowns. The operator for a coefficient vector ``sigma`` is then

    ``B_sigma = B_0 + sum_i sigma_i * B_i``

with ``B_0 = 0`` for the pure diffusion model (it is kept explicitly so
models with a coefficient-independent part fit the same structure).
Homogeneous Dirichlet data is imposed by deleting boundary rows/columns,
which keeps ``B_sigma`` exactly symmetric positive definite.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import DiskSpec, PixelGrid, TriMesh

__all__ = [
    "StiffnessSet",
    "LoadVector",
    "element_stiffness",
    "assemble_pixel_matrices",
    "assemble_global",
    "global_matrix",
    "assemble_load",
    "write_matrix",
]


def element_stiffness(vertices) -> np.ndarray:
    """3x3 stiffness matrix of a single triangle.

    Entry ``(a, b)`` is ``area * grad(L_a) . grad(L_b)`` for the linear
    nodal basis ``L_a`` on the triangle. The result is symmetric positive
    semidefinite with zero row sums, and invariant under uniform scaling
    of the triangle.

    Raises
    ------
    ValueError
        If the triangle is degenerate or negatively oriented.
    """
    v = np.asarray(vertices, dtype=float)
    if v.shape != (3, 2):
        raise ValueError(f"expected three 2D vertices, got shape {v.shape}")
    x, y = v[:, 0], v[:, 1]
    twice_area = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
    if twice_area <= 0:
        raise ValueError(
            f"triangle has non-positive area {0.5 * twice_area}; vertices "
            "must be distinct and counter-clockwise"
        )
    # Gradient of L_a is (b_a, c_a) / (2*area) with the classic coefficients.
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    return (np.outer(b, b) + np.outer(c, c)) / (2.0 * twice_area)


@dataclass(frozen=True, eq=False)
class StiffnessSet:
    """Pixel stiffness matrices over the interior-vertex unknowns.

    Attributes
    ----------
    pixel_matrices : list of (N, N) CSR matrices
        One symmetric PSD matrix per pixel, supported on the vertices of
        that pixel's elements.
    b0 : (N, N) CSR matrix
        Coefficient-independent part; identically zero for diffusion.
    n : int
        Number of pixels.
    N : int
        Number of interior-vertex unknowns.
    supports, blocks
        Per pixel: the sorted unknown indices its matrix touches and the
        dense restriction of the matrix to them (used for fast quadratic
        forms; same data as ``pixel_matrices``).
    """

    pixel_matrices: list
    b0: sp.csr_matrix
    n: int
    N: int
    supports: list = field(repr=False, default=None)
    blocks: list = field(repr=False, default=None)
    _union_indptr: np.ndarray = field(repr=False, default=None)
    _union_indices: np.ndarray = field(repr=False, default=None)
    _positions: list = field(repr=False, default=None)
    _b0_positions: np.ndarray = field(repr=False, default=None)


def _scatter_to_csr(rows, cols, data, N) -> sp.csr_matrix:
    m = sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m


def _element_contributions(mesh: TriMesh):
    """Free-index row/col/value triplets of every element matrix."""
    fidx = mesh.free_index
    all_rows, all_cols, all_data, all_tri = [], [], [], []
    for t in range(mesh.n_triangles):
        tri = mesh.triangles[t]
        K = element_stiffness(mesh.vertices[tri])
        f = fidx[tri]
        for a in range(3):
            if f[a] < 0:
                continue
            for bb in range(3):
                if f[bb] < 0:
                    continue
                all_rows.append(f[a])
                all_cols.append(f[bb])
                all_data.append(K[a, bb])
                all_tri.append(t)
    return (
        np.array(all_rows, dtype=np.int64),
        np.array(all_cols, dtype=np.int64),
        np.array(all_data, dtype=float),
        np.array(all_tri, dtype=np.int64),
    )


def assemble_pixel_matrices(mesh: TriMesh, grid: PixelGrid | None = None) -> StiffnessSet:
    """Assemble one stiffness matrix per pixel, plus the zero ``b0``.

    Boundary rows/columns are deleted, so matrices act on the ``N``
    interior unknowns. Assembly order is fixed (element index ascending)
    and therefore deterministic.
    """
    if grid is None:
        grid = mesh.grid
    elif grid.nx != mesh.grid.nx:
        raise ValueError("mesh was built for a different pixel grid")

    N = mesh.n_free
    rows, cols, data, tri = _element_contributions(mesh)
    pix = mesh.element_pixel[tri]

    pixel_matrices = []
    supports = []
    blocks = []
    for i in range(grid.n):
        sel = pix == i
        Bi = _scatter_to_csr(rows[sel], cols[sel], data[sel], N)
        pixel_matrices.append(Bi)
        sup = np.unique(rows[sel])
        supports.append(sup)
        blocks.append(Bi[np.ix_(sup, sup)].toarray())

    b0 = sp.csr_matrix((N, N))

    union_indptr, union_indices, positions, b0_pos = _union_pattern(
        pixel_matrices, b0, N
    )
    return StiffnessSet(
        pixel_matrices=pixel_matrices,
        b0=b0,
        n=grid.n,
        N=N,
        supports=supports,
        blocks=blocks,
        _union_indptr=union_indptr,
        _union_indices=union_indices,
        _positions=positions,
        _b0_positions=b0_pos,
    )


def _union_pattern(pixel_matrices, b0, N):
    """Shared sparsity pattern of all pixel matrices, with per-matrix slots.

    Lets ``global_matrix`` form ``B_sigma`` by accumulating each matrix's
    data into one preallocated value array instead of summing sparse
    matrices pairwise.
    """
    keys = [m.tocoo() for m in pixel_matrices] + [b0.tocoo()]
    flat = np.concatenate([c.row.astype(np.int64) * N + c.col for c in keys]) if N else np.array([], dtype=np.int64)
    union = np.unique(flat)
    union_rows = union // N if N else np.array([], dtype=np.int64)
    union_cols = union % N if N else np.array([], dtype=np.int64)
    indptr = np.zeros(N + 1, dtype=np.int64)
    np.add.at(indptr, union_rows + 1, 1)
    indptr = np.cumsum(indptr)
    positions = [
        np.searchsorted(union, c.row.astype(np.int64) * N + c.col) for c in keys[:-1]
    ]
    b0_pos = np.searchsorted(union, keys[-1].row.astype(np.int64) * N + keys[-1].col)
    return indptr, union_cols, positions, b0_pos


def global_matrix(stiffness: StiffnessSet, sigma) -> sp.csr_matrix:
    """Form ``B_sigma = b0 + sum_i sigma_i B_i`` for a positive coefficient.

    Raises
    ------
    ValueError
        If any coefficient entry is not strictly positive (positivity is
        what makes the operator coercive, hence the matrix SPD).
    """
    s = np.asarray(sigma, dtype=float).reshape(-1)
    if s.shape != (stiffness.n,):
        raise ValueError(f"sigma must have {stiffness.n} entries, got {s.shape}")
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("all coefficient entries must be finite and > 0")
    data = np.zeros(stiffness._union_indices.size)
    if stiffness.b0.nnz:
        data[stiffness._b0_positions] += stiffness.b0.data
    for i in range(stiffness.n):
        Bi = stiffness.pixel_matrices[i]
        if Bi.nnz:
            data[stiffness._positions[i]] += s[i] * Bi.data
    return sp.csr_matrix(
        (data, stiffness._union_indices.copy(), stiffness._union_indptr.copy()),
        shape=(stiffness.N, stiffness.N),
    )


def assemble_global(mesh: TriMesh, grid: PixelGrid, sigma) -> sp.csr_matrix:
    """Assemble ``B_sigma`` directly by weighting element matrices.

    Independent of the pixel-matrix route: elements are scattered in one
    pass with weight ``sigma[pixel(element)]``. Used to cross-check the
    identities ``B_i = B_{1+e_i} - B_1`` and ``b0 = B_1 - sum_i B_i``.
    """
    s = np.asarray(sigma, dtype=float).reshape(-1)
    if s.shape != (grid.n,):
        raise ValueError(f"sigma must have {grid.n} entries, got {s.shape}")
    rows, cols, data, tri = _element_contributions(mesh)
    weighted = data * s[mesh.element_pixel[tri]]
    return _scatter_to_csr(rows, cols, weighted, mesh.n_free)


@dataclass(frozen=True, eq=False)
class LoadVector:
    """Assembled right-hand side of a disk-indicator excitation.

    ``y[j]`` is the integral of the j-th interior hat function over the
    resolved disk region; entries are nonnegative and vanish for vertices
    not touching the disk's elements.
    """

    y: np.ndarray
    disk: DiskSpec


def assemble_load(mesh: TriMesh, disk: DiskSpec) -> LoadVector:
    """Integrate interior hat functions over a resolved disk.

    The integral of each nodal basis function over a full triangle is a
    third of its area, which is exact for the piecewise-linear basis, so
    each element contributes ``area/3`` to its three vertices. Boundary
    vertices carry no unknown and their contributions are dropped.
    """
    y = np.zeros(mesh.n_free)
    tri = mesh.triangles[disk.element_set]
    contrib = np.repeat(mesh.areas()[disk.element_set] / 3.0, 3)
    f = mesh.free_index[tri].ravel()
    keep = f >= 0
    np.add.at(y, f[keep], contrib[keep])
    if disk.element_set.size and not y.any():
        warnings.warn(
            "load vector is identically zero: disk region touches no "
            "interior vertex",
            stacklevel=2,
        )
    return LoadVector(y=y, disk=disk)


def write_matrix(matrix, stream) -> None:
    """Dump a sparse matrix in coordinate text form, ``i j value`` per line.

    Indices are 1-based; entries appear in row-major order.
    """
    coo = sp.csr_matrix(matrix).tocoo()
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        stream.write(f"{r + 1} {c + 1} {v:.17g}\n")
