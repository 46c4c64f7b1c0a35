"""
Brute-force reference computations.

Nothing in this module is clever; each function recomputes something the rest
of the package derives another way, so the two can be compared in tests and in
the verify-all run:

    hermite_galerkin_spectrum  vs  model.model_spectrum
    dense_expm                 vs  semigroup.propagate (Krylov path)
    det_winding                vs  model.pencil_multiplicity_contour
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from nsaspec.errors import ArgumentJump, ContourTooClose, DimensionGuard, PreconditionError
from nsaspec.model import QuadraticModel, companion_roots, pencil_matrix

logger = logging.getLogger(__name__)

MIN_HERMITE_DEGREE = 8
DENSE_LIMIT = 2000
MAX_ARGUMENT_STEP = np.pi / 2


# =============================================================================
# HERMITE-GALERKIN
# =============================================================================

@dataclass(frozen=True)
class HermiteTruncation:
    """Tensor Hermite basis of total degree <= max_degree in `dim` variables."""
    dim: int
    max_degree: int

    @property
    def size(self) -> int:
        return math.comb(self.max_degree + self.dim, self.dim)

    @property
    def trusted(self) -> int:
        return math.ceil(self.size / 4)


def degree_within(dim: int, K: int, limit: int = DENSE_LIMIT) -> int:
    """Largest degree <= K whose truncation (built on degree + 1) has at most `limit` functions."""
    degree = K
    while degree > MIN_HERMITE_DEGREE and HermiteTruncation(dim, degree + 1).size > limit:
        degree -= 1
    return degree


def _multi_indices(dim: int, degree: int) -> List[Tuple[int, ...]]:
    """All alpha in N^dim with |alpha| <= degree, ordered by total degree."""
    indices = [alpha for alpha in itertools.product(range(degree + 1), repeat=dim)
               if sum(alpha) <= degree]
    return sorted(indices, key=lambda alpha: (sum(alpha), alpha))


def _ladder(indices: List[Tuple[int, ...]], lookup: Dict[Tuple[int, ...], int],
            axis: int) -> np.ndarray:
    """Annihilation operator a_axis on the truncated basis."""
    size = len(indices)
    lower = np.zeros((size, size))
    for column, alpha in enumerate(indices):
        if alpha[axis] == 0:
            continue
        target = alpha[:axis] + (alpha[axis] - 1,) + alpha[axis + 1:]
        lower[lookup[target], column] = np.sqrt(alpha[axis])
    return lower


def hermite_matrix(model: QuadraticModel, K: int) -> np.ndarray:
    """
    Galerkin matrix of Q = (D - Ax)^2 + 1/2 Vx.x on Hermite functions of
    total degree <= K.

    Uses x = (a + a*)/sqrt(2) and d/dx = (a - a*)/sqrt(2) per coordinate.
    The single-factor operators live on degree <= K+1, so every product of two
    of them is exact on the degree <= K block that is returned.
    """
    if not model.is_antisymmetric():
        raise PreconditionError("A must be antisymmetric")
    if K < MIN_HERMITE_DEGREE:
        raise PreconditionError(f"Hermite degree K must be >= {MIN_HERMITE_DEGREE}, got {K}")

    n = model.dim
    indices = _multi_indices(n, K + 1)
    lookup = {alpha: k for k, alpha in enumerate(indices)}
    keep = HermiteTruncation(n, K).size

    position, momentum = [], []
    for axis in range(n):
        a = _ladder(indices, lookup, axis)
        adag = a.T
        position.append((a + adag) / np.sqrt(2.0))
        momentum.append(-1j * (a - adag) / np.sqrt(2.0))

    size = len(indices)
    Q = np.zeros((size, size), dtype=complex)
    for j in range(n):
        kinetic = momentum[j] - sum(model.A[j, k] * position[k] for k in range(n))
        Q += kinetic @ kinetic
    for j in range(n):
        for k in range(n):
            if model.V[j, k] != 0:
                Q += 0.5 * model.V[j, k] * (position[j] @ position[k])
    return Q[:keep, :keep]


def hermite_galerkin_spectrum(model: QuadraticModel, K: int) -> List[complex]:
    """
    Trusted eigenvalues of the degree-K Hermite truncation of Q.

    Dense eigensolve of hermite_matrix(); returns the lowest quarter of the
    truncated spectrum, sorted by real part.
    """
    truncation = HermiteTruncation(model.dim, K)
    eigenvalues = la.eigvals(hermite_matrix(model, K))
    ordered = sorted(eigenvalues, key=lambda z: (z.real, z.imag))
    logger.debug("Hermite K=%d: basis %d, trusting %d", K, truncation.size, truncation.trusted)
    return [complex(z) for z in ordered[:truncation.trusted]]


# =============================================================================
# DENSE MATRIX EXPONENTIAL
# =============================================================================

def dense_expm(matrix, t: float) -> np.ndarray:
    """exp(-t M) by scipy's scaling-and-squaring Pade algorithm."""
    if sp.issparse(matrix):
        matrix = matrix.toarray()
    matrix = np.asarray(matrix)
    if matrix.shape[0] > DENSE_LIMIT:
        raise DimensionGuard(f"dense exponential limited to size {DENSE_LIMIT}, got {matrix.shape[0]}")
    if t == 0:
        return np.eye(matrix.shape[0], dtype=complex)
    return la.expm(-t * matrix.astype(complex))


# =============================================================================
# DETERMINANT WINDING
# =============================================================================

def det_winding(model: QuadraticModel, center: complex, radius: float, nodes: int = 256) -> int:
    """
    Winding number of lambda -> det T(lambda) around 0 along |lambda - center| = radius.

    The argument of det T is read from slogdet at each node and the wrapped
    increments are summed.

    Raises:
        ContourTooClose: a root lies within 0.1 * radius of the circle
        ArgumentJump: an increment exceeds pi/2; use more nodes
    """
    roots = companion_roots(model)
    gaps = np.abs(np.abs(roots - center) - radius)
    if np.any(gaps < 0.1 * radius):
        raise ContourTooClose(f"a pencil root is within {gaps.min():.3e} of the contour")

    theta = 2.0 * np.pi * np.arange(nodes + 1) / nodes
    phases = []
    for z in center + radius * np.exp(1j * theta):
        sign, _ = np.linalg.slogdet(pencil_matrix(model, z))
        phases.append(np.angle(sign))
    steps = np.angle(np.exp(1j * np.diff(phases)))
    if np.max(np.abs(steps)) > MAX_ARGUMENT_STEP:
        raise ArgumentJump(f"argument step {np.max(np.abs(steps)):.3f} > pi/2 with {nodes} nodes")
    return int(round(np.sum(steps) / (2.0 * np.pi)))
