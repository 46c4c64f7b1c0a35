"""
Quadratic Model Spectra
=======================

Exact spectral algebra of the quadratic magnetic Schrödinger operator

    Q = (D - A x)^2 + 1/2 V x.x,      D = -i d/dx,

where A is a real n x n matrix and V a complex symmetric n x n matrix with
Re V >= 0. Everything here is small dense linear algebra: the interesting
operator is infinite dimensional, but its spectrum is fully determined by the
2n x 2n Hamilton map F, equivalently by the quadratic pencil

    T(lambda) = lambda^2 + 2 lambda A + V / 2.

KEY CONCEPTS:
-------------
1. Gauge: only the antisymmetric part of A matters. antisymmetrize() strips
   the symmetric part and records it.
2. Pencil roots come in +/- pairs. The n roots in the upper half plane give
   the "generators" g_j = lambda_j / i, all with Re g_j > 0.
3. Spec(Q) = { sum_j g_j (1 + 2 nu_j) : nu in N^n }, the eigenvalue lattice.
4. The singular space S is trivial exactly when V is invertible; two
   independent computations of S are provided and must agree.

Example usage:
    from nsaspec.model import QuadraticModel, model_spectrum

    model = QuadraticModel.build([[0.0]], [[2j]])
    for point in model_spectrum(model, re_bound=2.5):
        print(point.value, point.index)
"""
import heapq
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
import scipy.linalg as la

from nsaspec.errors import (
    ContourTooClose,
    CountMismatch,
    CrossCheckFailure,
    EmptyWindow,
    MismatchWithClosedForm,
    NonIntegerResidual,
    NotAntisymmetric,
    PreconditionError,
    RealRootError,
    SectorViolation,
)

logger = logging.getLogger(__name__)

# =============================================================================
# TOLERANCES
# =============================================================================

PSD_TOL = 1e-12            # Re V eigenvalues may dip this far below zero
ANTISYM_TOL = 1e-12        # relative, for ||A + A^T||
CROSS_CHECK_TOL = 1e-8     # Hamilton map vs companion linearization
REAL_AXIS_TOL = 1e-8       # |Im lambda| below this means "on the real axis"
CLUSTER_TOL = 1e-6         # relative distance for merging nearly equal roots
LATTICE_MERGE_TOL = 1e-10  # relative distance for merging lattice values
SINGULAR_TOL = 1e-8        # singular values below this count as zero
SPAN_TOL = 1e-10           # mutual containment of subspaces
CONTOUR_RESIDUAL_TOL = 1e-6


# =============================================================================
# DATA TYPES
# =============================================================================

@dataclass(frozen=True)
class QuadraticModel:
    """
    The pair (A, V) defining Q = (D - Ax)^2 + 1/2 Vx.x.

    Build with QuadraticModel.build(A, V); it symmetrizes V exactly and checks
    that Re V is positive semidefinite.
    """
    dim: int
    A: np.ndarray
    V: np.ndarray

    @classmethod
    def build(cls, A, V) -> "QuadraticModel":
        A = np.array(A, dtype=float, ndmin=2)
        V = np.array(V, dtype=complex, ndmin=2)
        n = A.shape[0]
        if A.shape != (n, n) or V.shape != (n, n):
            raise PreconditionError(f"A and V must both be {n}x{n}, got {A.shape} and {V.shape}")
        V = 0.5 * (V + V.T)
        V1 = V.real
        lowest = np.linalg.eigvalsh(V1).min()
        if lowest < -PSD_TOL:
            raise PreconditionError(f"Re V is not positive semidefinite (eigenvalue {lowest:.3e})")
        A.setflags(write=False)
        V.setflags(write=False)
        return cls(dim=n, A=A, V=V)

    @property
    def V1(self) -> np.ndarray:
        return self.V.real

    @property
    def V2(self) -> np.ndarray:
        return self.V.imag

    def is_antisymmetric(self) -> bool:
        scale = max(1.0, np.linalg.norm(self.A))
        return np.linalg.norm(self.A + self.A.T) <= ANTISYM_TOL * scale

    def to_dict(self) -> dict:
        return {
            "A": self.A.tolist(),
            "V": [[[z.real, z.imag] for z in row] for row in self.V],
        }


@dataclass(frozen=True)
class GaugeRecord:
    """Symmetric part S removed from A by antisymmetrize()."""
    S: np.ndarray


@dataclass(frozen=True)
class HamiltonMap:
    """F = [[-A, I], [A^2 - V/2, -A]], the linearized Hamilton field."""
    F: np.ndarray

    @property
    def dim(self) -> int:
        return self.F.shape[0] // 2


@dataclass(frozen=True)
class PencilRoot:
    """A root of det T(lambda) = 0 with its algebraic multiplicity."""
    lam: complex
    multiplicity: int


@dataclass(frozen=True)
class ModelEigenvalue:
    """One lattice point sum_j g_j (1 + 2 nu_j) of Spec(Q)."""
    value: complex
    index: Tuple[int, ...]
    generators: Tuple[complex, ...]
    multiplicity: int = 1


@dataclass(frozen=True)
class SingularSpaceBasis:
    """Orthonormal real basis of the singular space, one vector per row."""
    vectors: np.ndarray
    method: str

    @property
    def dimension(self) -> int:
        return self.vectors.shape[0]

    def spans_equal(self, other: "SingularSpaceBasis", tol: float = SPAN_TOL) -> bool:
        """Mutual containment of the two spans."""
        if self.dimension != other.dimension:
            return False
        if self.dimension == 0:
            return True
        return (_containment_defect(self.vectors, other.vectors) < tol
                and _containment_defect(other.vectors, self.vectors) < tol)


def _containment_defect(rows: np.ndarray, basis_rows: np.ndarray) -> float:
    """Largest distance from a row of `rows` to span(basis_rows)."""
    Q = la.orth(basis_rows.T)
    residual = rows.T - Q @ (Q.T @ rows.T)
    return float(np.max(np.linalg.norm(residual, axis=0)))


# =============================================================================
# GAUGE AND HAMILTON MAP
# =============================================================================

def antisymmetrize(model: QuadraticModel) -> Tuple[QuadraticModel, GaugeRecord]:
    """
    Remove the symmetric (pure gauge) part of A.

    The spectrum of Q only depends on A - A^T, since the symmetric part S
    contributes the gradient field of 1/2 Sx.x. V is passed through untouched.
    """
    A_out = 0.5 * (model.A - model.A.T)
    S = model.A - A_out
    return QuadraticModel.build(A_out, model.V), GaugeRecord(S=S)


def _require_antisymmetric(model: QuadraticModel) -> None:
    if not model.is_antisymmetric():
        raise NotAntisymmetric("A must be antisymmetric; call antisymmetrize() first")


def hamilton_map(model: QuadraticModel) -> HamiltonMap:
    """Assemble F = [[-A, I], [A^2 - V/2, -A]]."""
    _require_antisymmetric(model)
    n = model.dim
    A = model.A.astype(complex)
    F = np.block([
        [-A, np.eye(n, dtype=complex)],
        [A @ A - 0.5 * model.V, -A],
    ])
    return HamiltonMap(F=F)


def pencil_matrix(model: QuadraticModel, lam: complex) -> np.ndarray:
    """T(lambda) = lambda^2 + 2 lambda A + V/2."""
    n = model.dim
    return lam * lam * np.eye(n) + 2.0 * lam * model.A + 0.5 * model.V


def pencil_derivative(model: QuadraticModel, lam: complex) -> np.ndarray:
    """dT/dlambda = 2 lambda + 2 A."""
    return 2.0 * lam * np.eye(model.dim) + 2.0 * model.A


def companion_matrix(model: QuadraticModel) -> np.ndarray:
    """
    First companion linearization acting on [lambda x; x].

    lambda [lambda x; x] = [[-2A, -V/2], [I, 0]] [lambda x; x]
    """
    n = model.dim
    return np.block([
        [-2.0 * model.A.astype(complex), -0.5 * model.V],
        [np.eye(n, dtype=complex), np.zeros((n, n), dtype=complex)],
    ])


# =============================================================================
# PENCIL ROOTS
# =============================================================================

def match_nearest(first: Sequence[complex], second: Sequence[complex]) -> List[Tuple[int, int, float]]:
    """
    Greedy nearest-neighbour pairing of two point sets.

    Repeatedly takes the closest remaining (i, j) pair. Returns
    (index_in_first, index_in_second, distance) triples; unmatched points of
    the longer set are dropped.
    """
    a = np.asarray(first, dtype=complex)
    b = np.asarray(second, dtype=complex)
    if a.size == 0 or b.size == 0:
        return []
    distances = np.abs(a[:, None] - b[None, :])
    pairs = []
    used_a, used_b = set(), set()
    for flat in np.argsort(distances, axis=None, kind="stable"):
        i, j = np.unravel_index(flat, distances.shape)
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append((int(i), int(j), float(distances[i, j])))
        if len(pairs) == min(a.size, b.size):
            break
    return pairs


def _cluster(values: np.ndarray) -> List[PencilRoot]:
    """Merge roots within CLUSTER_TOL relative distance (single linkage)."""
    order = np.argsort(values.real + 1e-3 * values.imag, kind="stable")
    remaining = [complex(values[k]) for k in order]
    clusters: List[List[complex]] = []
    for value in remaining:
        for members in clusters:
            if any(abs(value - m) <= CLUSTER_TOL * max(1.0, abs(m)) for m in members):
                members.append(value)
                break
        else:
            clusters.append([value])
    return [PencilRoot(lam=complex(np.mean(members)), multiplicity=len(members))
            for members in clusters]


def pencil_eigenvalues(model: QuadraticModel) -> List[PencilRoot]:
    """
    All 2n roots of det T(lambda) = 0, with multiplicity.

    Computed twice (Hamilton map and companion linearization), paired by
    nearest neighbour and required to agree to 1e-8 before clustering.

    Raises:
        CrossCheckFailure: the two eigenvalue sets disagree
        RealRootError: some root has |Im lambda| < 1e-8
    """
    from_hamilton = la.eigvals(hamilton_map(model).F)
    from_companion = la.eigvals(companion_matrix(model))
    scale = max(1.0, float(np.max(np.abs(from_hamilton))))
    pairs = match_nearest(from_hamilton, from_companion)
    worst = max(d for _, _, d in pairs)
    if len(pairs) != 2 * model.dim or worst > CROSS_CHECK_TOL * scale:
        raise CrossCheckFailure(
            f"Hamilton map and companion roots differ by {worst:.3e} (tolerance {CROSS_CHECK_TOL:.0e})")
    on_axis = from_hamilton[np.abs(from_hamilton.imag) < REAL_AXIS_TOL]
    if on_axis.size:
        raise RealRootError(
            f"pencil root {complex(on_axis[0]):.6g} lies on the real axis; V is not invertible")
    return _cluster(from_hamilton)


def positive_half(roots: Sequence[PencilRoot]) -> List[PencilRoot]:
    """The roots with Im lambda > 0; their multiplicities must sum to n."""
    total = sum(r.multiplicity for r in roots)
    for root in roots:
        if abs(root.lam.imag) < REAL_AXIS_TOL:
            raise RealRootError(f"root {root.lam:.6g} lies on the real axis")
    upper = [r for r in roots if r.lam.imag > 0]
    count = sum(r.multiplicity for r in upper)
    if 2 * count != total:
        raise CountMismatch(f"{count} roots in the upper half plane, expected {total // 2}")
    return upper


def generators(model: QuadraticModel) -> Tuple[complex, ...]:
    """The n values lambda_j / i (with multiplicity), after gauge fixing."""
    fixed, _ = antisymmetrize(model)
    upper = positive_half(pencil_eigenvalues(fixed))
    values = []
    for root in upper:
        values.extend([root.lam / 1j] * root.multiplicity)
    return tuple(sorted(values, key=lambda g: (g.real, g.imag)))


# =============================================================================
# EIGENVALUE LATTICE
# =============================================================================

def model_spectrum(model: QuadraticModel, re_bound: float) -> List[ModelEigenvalue]:
    """
    Every lattice point with Re <= re_bound, sorted by real part.

    Enumerates index vectors best-first (priority queue on the real part), so
    only points inside the window are ever generated. Coinciding values are
    merged and their multiplicities summed.

    Raises:
        RealRootError: V is not invertible
        EmptyWindow: nothing lies below re_bound
    """
    gens = generators(model)
    n = len(gens)
    g = np.array(gens)

    def value_of(index):
        return complex(np.sum(g * (1 + 2 * np.array(index))))

    start = (0,) * n
    heap = [(value_of(start).real, start)]
    seen = {start}
    raw: List[ModelEigenvalue] = []
    while heap:
        re_value, index = heapq.heappop(heap)
        if re_value > re_bound:
            break
        raw.append(ModelEigenvalue(value=value_of(index), index=index, generators=gens))
        for j in range(n):
            successor = index[:j] + (index[j] + 1,) + index[j + 1:]
            if successor not in seen:
                seen.add(successor)
                heapq.heappush(heap, (value_of(successor).real, successor))

    if not raw:
        raise EmptyWindow(f"no lattice point has Re <= {re_bound}")

    merged: List[ModelEigenvalue] = []
    for point in raw:
        for k, existing in enumerate(merged):
            if abs(point.value - existing.value) <= LATTICE_MERGE_TOL * max(1.0, abs(existing.value)):
                merged[k] = ModelEigenvalue(existing.value, existing.index, gens,
                                            existing.multiplicity + 1)
                break
        else:
            merged.append(point)
    return sorted(merged, key=lambda p: (p.value.real, p.value.imag))


def spectral_gap(model: QuadraticModel) -> Tuple[complex, float]:
    """
    Bottom eigenvalue mu0 = sum_j g_j and the gap tau0 to the rest.

    Spec(Q) minus {mu0} lies in {Re z >= Re mu0 + tau0}.
    """
    gens = generators(model)
    mu0 = complex(sum(gens))
    step = 2.0 * min(g.real for g in gens)
    lattice = model_spectrum(model, re_bound=mu0.real + step * (1 + 1e-9) + 1e-12)
    others = [p.value.real - mu0.real for p in lattice
              if abs(p.value - mu0) > LATTICE_MERGE_TOL * max(1.0, abs(mu0))]
    return mu0, float(min(others))


def sector_angle(model: QuadraticModel) -> float:
    """theta0 = max_j |arg g_j|; every lattice value has |arg| <= theta0."""
    gens = generators(model)
    angles = [abs(np.angle(g)) for g in gens]
    theta0 = float(max(angles))
    if theta0 >= np.pi / 2:
        raise SectorViolation(f"generator with |arg| = {theta0:.6f} >= pi/2")
    return theta0


# =============================================================================
# SINGULAR SPACE
# =============================================================================

def symbol_matrix(model: QuadraticModel) -> np.ndarray:
    """Complex symmetric M with q(y, eta) = Y.M Y, Y = (y, eta)."""
    n = model.dim
    A = model.A
    return np.block([
        [A.T @ A + 0.5 * model.V, -A.T.astype(complex)],
        [-A.astype(complex), np.eye(n, dtype=complex)],
    ])


def quadratic_symbol(model: QuadraticModel, Y: np.ndarray) -> complex:
    """q(y, eta) = (eta - Ay)^2 + 1/2 Vy.y."""
    n = model.dim
    y, eta = Y[:n], Y[n:]
    shifted = eta - model.A @ y
    return complex(shifted @ shifted + 0.5 * y @ model.V @ y)


def _null_space(matrix: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal columns spanning {x : ||matrix x|| <= tol ||x||}."""
    if matrix.shape[1] == 0:
        return np.zeros((0, 0))
    _, s, vh = la.svd(matrix)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T


def singular_space_closed_form(model: QuadraticModel) -> SingularSpaceBasis:
    """
    S = {(y, Ay) : V1 y.y = 0, V2 y = 0}.

    Kernel of V2 first, then the null directions of V1 inside it; V1 >= 0
    turns V1 y.y = 0 into V1 y = 0.
    """
    _require_antisymmetric(model)
    n = model.dim
    tol = SINGULAR_TOL * max(1.0, np.linalg.norm(model.V))
    K = _null_space(model.V2, tol)
    if K.shape[1]:
        W = _null_space(model.V1 @ K, tol)
        Y = K @ W
    else:
        Y = np.zeros((n, 0))
    vectors = np.vstack([Y, model.A @ Y]).T if Y.shape[1] else np.zeros((0, 2 * n))
    if vectors.shape[0]:
        vectors = la.orth(vectors.T).T
    return SingularSpaceBasis(vectors=np.real(vectors), method="closed-form")


def singular_space_iterative(model: QuadraticModel, max_k: int) -> SingularSpaceBasis:
    """
    S straight from its definition, as nested kernels of the quadratic forms

        Y -> H^k_{Im q} Re q (Y),  k = 0..max_k.

    Each form is represented by a real symmetric 2n x 2n matrix G_k with
    G_0 = Re M and G_{k+1} = 2 (G_k J I - I J G_k), I = Im M. On the current
    kernel the restricted form must be semidefinite; its null directions
    become the next kernel. Odd orders vanish on the kernel of the preceding
    even order, so forms up to order 2 * max_k are applied.

    Raises:
        MismatchWithClosedForm: result differs from the closed form, or a
            restricted form is indefinite (both mean an implementation bug)
    """
    _require_antisymmetric(model)
    n = model.dim
    if max_k < 2 * n - 1:
        raise PreconditionError(f"max_k must be at least 2n-1 = {2 * n - 1}")

    M = symbol_matrix(model)
    G = M.real.copy()
    I_form = M.imag
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    K = np.eye(2 * n)

    for k in range(2 * max_k + 1):
        if K.shape[1] == 0:
            break
        restricted = K.T @ G @ K
        restricted = 0.5 * (restricted + restricted.T)
        tol = SPAN_TOL * max(1.0, np.linalg.norm(G))
        eigenvalues, eigenvectors = np.linalg.eigh(restricted)
        if np.all(np.abs(eigenvalues) <= tol):
            pass
        elif eigenvalues.min() >= -tol or eigenvalues.max() <= tol:
            K = K @ eigenvectors[:, np.abs(eigenvalues) <= tol]
        else:
            raise MismatchWithClosedForm(f"restricted form of order {k} is indefinite")
        G = 2.0 * (G @ J @ I_form - I_form @ J @ G)

    iterative = SingularSpaceBasis(vectors=K.T.copy(), method="iterative")
    closed = singular_space_closed_form(model)
    if not iterative.spans_equal(closed):
        raise MismatchWithClosedForm(
            f"iterative dimension {iterative.dimension} vs closed-form {closed.dimension}")
    return iterative


# =============================================================================
# CONTOUR MULTIPLICITIES
# =============================================================================

def companion_roots(model: QuadraticModel) -> np.ndarray:
    """Unclustered pencil roots from the companion linearization."""
    return la.eigvals(companion_matrix(model))


def pencil_multiplicity_contour(model: QuadraticModel, lambda0: complex,
                                radius: float, nodes: int) -> int:
    """
    (1/2 pi i) contour integral of tr(T^-1 dT/dlambda) around |lambda - lambda0| = radius.

    Trapezoidal rule with `nodes` points; the result must be within 1e-6 of
    an integer.

    Raises:
        ContourTooClose: a root lies within 0.1 * radius of the circle
        NonIntegerResidual: the rounded count is not trustworthy
    """
    if radius <= 0 or nodes < 4:
        raise PreconditionError("radius must be positive and nodes >= 4")
    roots = companion_roots(model)
    gaps = np.abs(np.abs(roots - lambda0) - radius)
    if np.any(gaps < 0.1 * radius):
        raise ContourTooClose(f"a pencil root is within {gaps.min():.3e} of the contour")

    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    points = lambda0 + radius * np.exp(1j * theta)
    total = 0.0 + 0.0j
    for z, phase in zip(points, np.exp(1j * theta)):
        integrand = np.trace(la.solve(pencil_matrix(model, z), pencil_derivative(model, z)))
        total += integrand * radius * phase
    count = total / nodes
    rounded = int(round(count.real))
    residual = abs(count - rounded)
    if residual >= CONTOUR_RESIDUAL_TOL:
        raise NonIntegerResidual(f"contour count {count:.8g} is not an integer")
    return rounded


@dataclass(frozen=True)
class ClusterCount:
    """Multiplicity of one root cluster, from clustering and from the contour."""
    root: PencilRoot
    radius: float
    contour_count: int


def contour_multiplicities(model: QuadraticModel, nodes: int = 256) -> List[ClusterCount]:
    """
    Contour count around every root cluster of the pencil.

    The radius is 0.3 x the distance to the nearest other cluster, which keeps
    every other root outside 1.1 radius and the enclosed cluster near the
    centre.
    """
    roots = pencil_eigenvalues(model)
    counts = []
    for k, root in enumerate(roots):
        others = [abs(root.lam - r.lam) for j, r in enumerate(roots) if j != k]
        radius = 0.3 * min(others) if others else 1.0
        count = pencil_multiplicity_contour(model, root.lam, radius, nodes)
        counts.append(ClusterCount(root=root, radius=radius, contour_count=count))
    return counts
