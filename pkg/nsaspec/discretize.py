"""
Finite-difference discretization of P = (hD - A(x))^2 + V(x).

The box [-L, L]^n carries N interior nodes per axis with Dirichlet conditions,
spacing delta = 2L / (N + 1). Node values are flattened in C order, so axis j
has stride N^(n-1-j).

For every edge p -> q = p + stride_j the stencil is

    M[p, q] = -h^2/delta^2 + i h Abar_j / delta
    M[q, p] = -h^2/delta^2 - i h Abar_j / delta

with Abar_j the node average of A_j over the edge, and the diagonal is
2n h^2/delta^2 + |A|^2 + V. With real V the matrix is exactly Hermitian, and
its Hermitian part is positive semidefinite whenever V1 >= 0.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from nsaspec.errors import DimensionGuard, DimensionMismatch, PreconditionError
from nsaspec.potential import PotentialSpec, evaluate_many
from nsaspec.streams import random_unit_vectors

logger = logging.getLogger(__name__)

MIN_POINTS = 16
MAX_POINTS_2D = 256
SUPPORTED_DIMS = (1, 2)


@dataclass(frozen=True)
class Grid:
    """Interior nodes of [-L, L]^dim, N per axis."""
    dim: int
    L: float
    N: int

    def __post_init__(self):
        if self.dim not in SUPPORTED_DIMS:
            raise DimensionGuard(f"grids exist for n in {SUPPORTED_DIMS}, got n={self.dim}")
        if self.N < MIN_POINTS:
            raise PreconditionError(f"need at least {MIN_POINTS} points per axis, got {self.N}")
        if self.dim == 2 and self.N > MAX_POINTS_2D:
            raise DimensionGuard(f"2D grids are capped at N={MAX_POINTS_2D}, got {self.N}")
        if self.L <= 0:
            raise PreconditionError("half width L must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / (self.N + 1)

    @property
    def size(self) -> int:
        return self.N ** self.dim

    def axis(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(1, self.N + 1)

    def coordinates(self) -> np.ndarray:
        """Node coordinates, one row per flattened index."""
        mesh = np.meshgrid(*([self.axis()] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def resolves(self, h: float) -> bool:
        """delta^2 <= h/4, i.e. delta <= 0.5 sqrt(h)."""
        return self.spacing ** 2 <= h / 4.0


@dataclass(frozen=True)
class GridOperator:
    """Sparse discretization of P at one value of h."""
    h: float
    matrix: sp.csr_matrix
    grid: Grid
    spec: PotentialSpec
    resolution_ok: bool = True

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def scale(self) -> float:
        """Max absolute row sum; an upper bound for ||M||_2 on these stencils."""
        return float(abs(self.matrix).sum(axis=1).max())

    def hermitian_defect(self) -> float:
        """max |M - M^H| entrywise."""
        defect = self.matrix - self.matrix.conj().T
        return float(abs(defect).max()) if defect.nnz else 0.0

    def accretivity_probe(self, rng: np.random.Generator, probes: int = 100) -> float:
        """min over random unit u of Re <Mu, u>."""
        U = random_unit_vectors(rng, self.size, probes)
        values = np.real(np.sum(U.conj() * (self.matrix @ U), axis=0))
        return float(values.min())

    def shifted(self, z: complex) -> sp.csc_matrix:
        """M - z I in CSC form, ready for sparse LU."""
        return (self.matrix - z * sp.identity(self.size, dtype=complex, format="csr")).tocsc()


def assemble(spec: PotentialSpec, grid: Grid, h: float) -> GridOperator:
    """
    Discretize P = sum_j [-h^2 d_j^2 + ih (A_j d_j + d_j A_j) + A_j^2] + V.

    Raises:
        DimensionMismatch: spec and grid dimensions differ
        PreconditionError: h outside (0, 1]
    """
    if spec.dim != grid.dim:
        raise DimensionMismatch(f"potential has n={spec.dim}, grid has n={grid.dim}")
    if not 0 < h <= 1:
        raise PreconditionError(f"h must lie in (0, 1], got {h}")

    n, N, delta = grid.dim, grid.N, grid.spacing
    coords = grid.coordinates()
    A, V, _, _ = evaluate_many(spec, coords)

    resolution_ok = grid.resolves(h)
    if not resolution_ok:
        logger.warning("grid spacing %.4g does not resolve h=%.4g (need delta^2 <= h/4)", delta, h)

    size = grid.size
    diagonal = 2 * n * h * h / delta ** 2 + np.sum(A * A, axis=1) + V
    rows, cols, vals = [np.arange(size)], [np.arange(size)], [diagonal.astype(complex)]

    index = np.arange(size).reshape((N,) * n)
    kinetic = -h * h / delta ** 2
    for j in range(n):
        tail = [slice(None)] * n
        head = [slice(None)] * n
        tail[j] = slice(0, N - 1)
        head[j] = slice(1, N)
        p = index[tuple(tail)].ravel()
        q = index[tuple(head)].ravel()
        A_bar = 0.5 * (A[p, j] + A[q, j])
        magnetic = 1j * h * A_bar / delta
        rows += [p, q]
        cols += [q, p]
        vals += [kinetic + magnetic, kinetic - magnetic]

    matrix = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(size, size),
    ).tocsr()
    logger.debug("assembled %d x %d operator at h=%g (%d nonzeros)", size, size, h, matrix.nnz)
    return GridOperator(h=h, matrix=matrix, grid=grid, spec=spec, resolution_ok=resolution_ok)
