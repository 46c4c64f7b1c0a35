"""
Spectral Computations on a GridOperator
=======================================

Eigenvalues in the disc |lambda| < Ch, resolvent norms, and contour-integral
spectral projections for the discretized operator M ~ P.

KEY CONCEPTS:
-------------
1. Shift-invert: eigenvalues near a shift sigma are the largest eigenvalues of
   (M - sigma)^-1. A sparse LU of M - sigma turns that into cheap solves.
2. Resolvent norm: ||(M - z)^-1|| = 1 / sigma_min(M - z). Far from normal
   operators this can be huge well away from the spectrum.
3. Projection: Pi = (1/2 pi i) contour integral of (z - M)^-1 around one
   eigenvalue. The trapezoid rule on a circle converges geometrically, so
   doubling the node count is a cheap convergence check.

Dense LAPACK paths are used when the matrix has at most DENSE_LIMIT rows;
everything else is matrix free.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg as la
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs, eigsh, splu
from scipy.stats import linregress

from nsaspec.discretize import Grid, GridOperator, assemble
from nsaspec.errors import (
    AmbiguousPairing,
    AnnulusNotClean,
    ConvergenceFailure,
    EmptyWindow,
    FactorizationSingular,
    PreconditionError,
    QuadratureNotConverged,
)
from nsaspec.model import spectral_gap
from nsaspec.normest import DEFAULT_ITERATIONS, DEFAULT_PROBES, estimate_norm
from nsaspec.potential import MinimumPoint, PotentialSpec
from nsaspec.streams import random_unit_vectors, task_rng

logger = logging.getLogger(__name__)

# =============================================================================
# CONSTANTS
# =============================================================================

DENSE_LIMIT = 2000
DISC_BUFFER = 0.05            # eigenvalues within 5% of the disc rim are flagged
INITIAL_SHIFT_K = 6
MAX_SHIFT_K = 48
AMBIGUITY_TOL = 1e-3          # in units of h
SEPARATION = 0.05             # required |a - Re mu_k|
PARABOLIC_C = 10.0
PROJECTION_NODES = 32
PROJECTION_SKETCH = 8
RANK_TOL = 1e-6
DRIFT_TOL = 1e-6


# =============================================================================
# DATA TYPES
# =============================================================================

@dataclass(frozen=True)
class Eigenpair:
    lam: complex
    vector: np.ndarray = field(repr=False)
    residual: float


@dataclass(frozen=True)
class ResolventSample:
    z: complex
    norm: float
    method: str        # "exact-smallest-singular", "iterative" or "singular"


@dataclass(frozen=True)
class LineProbe:
    """Samples along Re z = a h and the sup of h ||(M - z)^-1||."""
    a: float
    h: float
    sup_scaled: float
    samples: Tuple[ResolventSample, ...]


@dataclass(frozen=True)
class ParabolicSample:
    """||(M - is)^-1|| and its compensated value norm * h^(2/3) * s^(1/3)."""
    h: float
    s: float
    norm: float
    compensated: float
    method: str


@dataclass(frozen=True)
class AsymptoticsRow:
    h: float
    lam: complex
    ratio: complex        # lambda_0(h) / h
    deviation: float      # |ratio - mu0|


@dataclass(frozen=True)
class AsymptoticsTable:
    mu0: complex
    rows: Tuple[AsymptoticsRow, ...]
    slope: Optional[float]
    intercept: Optional[float]


@dataclass(frozen=True)
class ProjectionDiagnostics:
    """Contour projection around one eigenvalue plus its health checks."""
    lambda_center: complex
    radius: float
    nodes: int
    idem_residual: float
    trace: complex
    rank: int
    norm: float
    drift: float
    commutator: float
    apply: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    apply_adjoint: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)


# =============================================================================
# EIGENVALUES IN A DISC
# =============================================================================

def _dense_eigenpairs(op: GridOperator) -> List[Eigenpair]:
    M = op.matrix.toarray()
    values, vectors = la.eig(M)
    pairs = []
    for k, lam in enumerate(values):
        v = vectors[:, k] / np.linalg.norm(vectors[:, k])
        pairs.append(Eigenpair(complex(lam), v, float(np.linalg.norm(M @ v - lam * v))))
    return pairs


def _shifts(radius: float) -> np.ndarray:
    """Square lattice of spacing radius/2 covering the right half of the disc."""
    spacing = radius / 2
    ticks = spacing * np.arange(-3, 4)
    grid = (ticks[:, None] + 1j * ticks[None, :]).ravel()
    keep = (np.abs(grid) <= radius + spacing / np.sqrt(2) + 1e-12) & (grid.real > -spacing / 2)
    return grid[keep]


def _covered(centers: Sequence[complex], reaches: Sequence[float], radius: float) -> bool:
    r = np.linspace(0.0, radius, 24)
    theta = np.linspace(-np.pi / 2, np.pi / 2, 49)
    points = (r[:, None] * np.exp(1j * theta[None, :])).ravel()
    hit = np.zeros(points.shape, dtype=bool)
    for center, reach in zip(centers, reaches):
        hit |= np.abs(points - center) < reach
    return bool(np.all(hit))


def _shift_invert_eigenpairs(op: GridOperator, radius: float,
                             rng: np.random.Generator) -> List[Eigenpair]:
    M = op.matrix
    centers, reaches, pairs = [], [], []
    spacing = radius / 2
    for sigma in _shifts(radius):
        try:
            sigma, lams, vectors, reach = _shift_invert(op, sigma, rng, 0.75 * spacing)
        except ArpackNoConvergence as exc:
            logger.warning("shift-invert at sigma=%.4g%+.4gj did not converge: %s",
                           sigma.real, sigma.imag, exc)
            continue
        centers.append(sigma)
        reaches.append(reach)
        for k, lam in enumerate(lams):
            v = vectors[:, k] / np.linalg.norm(vectors[:, k])
            pairs.append(Eigenpair(complex(lam), v, float(np.linalg.norm(M @ v - lam * v))))
    if not _covered(centers, reaches, radius):
        raise ConvergenceFailure(f"shift-invert shifts do not cover the disc of radius {radius:.4g}")
    return pairs


def _shift_invert(op: GridOperator, sigma: complex, rng: np.random.Generator, target: float):
    """Eigenpairs nearest sigma and the radius of the disc they exhaust."""
    size = op.size
    try:
        lu = splu(op.shifted(sigma))
    except RuntimeError:
        sigma = sigma + 1e-3 * (abs(sigma) + op.h) * (1 + 1j)
        lu = splu(op.shifted(sigma))
    inverse = LinearOperator((size, size), matvec=lu.solve, dtype=complex)
    v0 = random_unit_vectors(rng, size, 1)[:, 0]

    k_cap = min(MAX_SHIFT_K, size - 2)
    k = min(INITIAL_SHIFT_K, k_cap)
    while True:
        mu, vectors = eigs(inverse, k=k, which="LM", v0=v0)
        lams = sigma + 1.0 / mu
        reach = float(np.max(np.abs(lams - sigma)))
        if reach >= target or k >= k_cap:
            return sigma, lams, vectors, reach
        k = min(2 * k, k_cap)


def eigs_in_disc(op: GridOperator, C: float, max_count: Optional[int] = None,
                 method: str = "auto", rng: Optional[np.random.Generator] = None) -> List[Eigenpair]:
    """
    All eigenvalues of M with |lambda| < C h, sorted by real part.

    method="auto" uses a dense eigensolve up to DENSE_LIMIT rows and
    shift-invert Arnoldi on a lattice of shifts beyond. Eigenvalues within 5%
    of the rim are logged, since they sit on the edge of the window.

    Raises:
        PreconditionError: the grid does not resolve h
        ConvergenceFailure: failed shifts leave part of the disc uncovered
    """
    if not op.resolution_ok:
        raise PreconditionError(f"grid spacing {op.grid.spacing:.4g} does not resolve h={op.h}")
    if method not in ("auto", "dense", "shift-invert"):
        raise PreconditionError(f"unknown eigensolver method {method!r}")
    radius = C * op.h
    rng = rng if rng is not None else task_rng(0, f"eigs/h={op.h:g}")
    use_dense = method == "dense" or (method == "auto" and op.size <= DENSE_LIMIT)

    candidates = _dense_eigenpairs(op) if use_dense else _shift_invert_eigenpairs(op, radius, rng)
    inside = sorted((p for p in candidates if abs(p.lam) < radius),
                    key=lambda p: (p.lam.real, p.lam.imag))

    merged: List[Eigenpair] = []
    for pair in inside:
        if merged and any(abs(pair.lam - m.lam) <= 1e-6 * op.h for m in merged):
            continue
        merged.append(pair)

    scale = op.scale
    for pair in merged:
        if pair.residual >= 1e-8 * scale:
            logger.warning("eigenpair at %.6g%+.6gj has residual %.3e", pair.lam.real,
                           pair.lam.imag, pair.residual)
        if abs(pair.lam) > (1 - DISC_BUFFER) * radius:
            logger.warning("eigenvalue %.6g%+.6gj lies within %.0f%% of the disc rim",
                           pair.lam.real, pair.lam.imag, 100 * DISC_BUFFER)
    if max_count is not None and len(merged) > max_count:
        logger.warning("%d eigenvalues in the disc, keeping the first %d", len(merged), max_count)
        merged = merged[:max_count]
    logger.info("h=%g: %d eigenvalue(s) with |lambda| < %.4g", op.h, len(merged), radius)
    return merged


# =============================================================================
# LEADING-ORDER ASYMPTOTICS
# =============================================================================

def ground_model_value(minima: Sequence[MinimumPoint]) -> complex:
    """
    Bottom of the union of the quadratic spectra at the minima.

    Raises:
        PreconditionError: that bottom is not simple with margin 0.1
    """
    if not minima:
        raise PreconditionError("at least one verified minimum is needed")
    bottoms = sorted((spectral_gap(m.model) for m in minima), key=lambda g: g[0].real)
    mu0, tau0 = bottoms[0]
    if tau0 <= 0.1:
        raise PreconditionError(f"spectral gap {tau0:.4g} at the bottom eigenvalue is below 0.1")
    for other, _ in bottoms[1:]:
        if abs(other - mu0) <= 0.1:
            raise PreconditionError("two minima share the bottom eigenvalue")
    return mu0


def _ground_row(spec: PotentialSpec, grid: Grid, h: float, mu0: complex, C: float) -> AsymptoticsRow:
    op = assemble(spec, grid, h)
    pairs = eigs_in_disc(op, C)
    if not pairs:
        raise EmptyWindow(f"no eigenvalue in |lambda| < {C}h at h={h}")
    target = h * mu0
    distances = sorted(abs(p.lam - target) for p in pairs)
    if len(distances) > 1 and distances[1] < AMBIGUITY_TOL * h:
        raise AmbiguousPairing(f"two eigenvalues within {AMBIGUITY_TOL}h of h*mu0 at h={h}")
    nearest = min(pairs, key=lambda p: abs(p.lam - target))
    ratio = nearest.lam / h
    return AsymptoticsRow(h=h, lam=nearest.lam, ratio=ratio, deviation=float(abs(ratio - mu0)))


def leading_eigenvalue_asymptotics(spec: PotentialSpec, minima: Sequence[MinimumPoint],
                                   h_list: Sequence[float], C: float, grid: Grid,
                                   jobs: int = 1) -> AsymptoticsTable:
    """
    Tabulate lambda_0(h)/h against mu0 and fit log deviation against log h.

    Rows keep the order of h_list regardless of `jobs`.
    """
    mu0 = ground_model_value(minima)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = list(pool.map(lambda h: _ground_row(spec, grid, h, mu0, C), h_list))

    slope = intercept = None
    if len(rows) >= 2 and all(r.deviation > 0 for r in rows):
        fit = linregress(np.log([r.h for r in rows]), np.log([r.deviation for r in rows]))
        slope, intercept = float(fit.slope), float(fit.intercept)
    return AsymptoticsTable(mu0=mu0, rows=tuple(rows), slope=slope, intercept=intercept)


# =============================================================================
# RESOLVENT NORMS
# =============================================================================

def _dense_resolvent_norm(op: GridOperator, z: complex) -> float:
    shifted = op.matrix.toarray() - z * np.eye(op.size)
    sigma_min = la.svdvals(shifted).min()
    return np.inf if sigma_min == 0 else float(1.0 / sigma_min)


def _iterative_resolvent_norm(op: GridOperator, z: complex, rng: np.random.Generator) -> float:
    try:
        lu = splu(op.shifted(z))
    except RuntimeError as exc:
        raise FactorizationSingular(f"M - z is singular at z={z}") from exc
    size = op.size
    gram = LinearOperator((size, size), dtype=complex,
                          matvec=lambda v: lu.solve(lu.solve(v, trans="H")))
    v0 = random_unit_vectors(rng, size, 1)[:, 0]
    try:
        top = eigsh(gram, k=1, which="LM", v0=v0, tol=1e-10, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise ConvergenceFailure(f"resolvent norm iteration failed at z={z}") from exc
    return float(np.sqrt(abs(top[0])))


def resolvent_norm(op: GridOperator, z: complex, method: str = "auto",
                   rng: Optional[np.random.Generator] = None) -> ResolventSample:
    """
    ||(M - z)^-1||.

    "iterative": largest eigenvalue of (M - z)^-1 (M - z)^-H via ARPACK on
    sparse LU solves. "dense": 1 / smallest singular value. A singular
    factorization yields norm = inf instead of an exception.
    """
    if method not in ("auto", "dense", "iterative"):
        raise PreconditionError(f"unknown resolvent method {method!r}")
    use_dense = method == "dense" or (method == "auto" and op.size <= DENSE_LIMIT)
    if use_dense:
        return ResolventSample(complex(z), _dense_resolvent_norm(op, z), "exact-smallest-singular")
    rng = rng if rng is not None else task_rng(0, f"resolvent/{complex(z)}")
    try:
        return ResolventSample(complex(z), _iterative_resolvent_norm(op, z, rng), "iterative")
    except FactorizationSingular:
        logger.info("factorization singular at z=%s; reporting an infinite norm", z)
        return ResolventSample(complex(z), np.inf, "singular")


def line_sup_resolvent(op: GridOperator, a: float, im_range: Tuple[float, float], samples: int,
                       reference_re: Sequence[float], method: str = "auto") -> LineProbe:
    """
    sup of h ||(M - z)^-1|| over z = a h + i s, s evenly spaced in im_range.

    Raises:
        PreconditionError: a is within 0.05 of some Re mu_k in reference_re
    """
    gaps = [abs(a - re) for re in reference_re]
    if gaps and min(gaps) <= SEPARATION:
        raise PreconditionError(f"a={a} is within {SEPARATION} of a model eigenvalue real part")
    h = op.h
    points = [a * h + 1j * s for s in np.linspace(im_range[0], im_range[1], samples)]
    results = tuple(resolvent_norm(op, z, method) for z in points)
    sup_scaled = max(h * r.norm for r in results)
    return LineProbe(a=a, h=h, sup_scaled=float(sup_scaled), samples=results)


def parabolic_probe(op: GridOperator, s_list: Sequence[float], C: float = PARABOLIC_C,
                    method: str = "auto") -> List[ParabolicSample]:
    """
    ||(M - is)^-1|| on the imaginary axis, compensated by h^(2/3) s^(1/3).

    Raises:
        PreconditionError: some s is below C h
    """
    h = op.h
    low = [s for s in s_list if s < C * h]
    if low:
        raise PreconditionError(f"s={low[0]} lies below C h = {C * h:.4g}")
    out = []
    for s in s_list:
        sample = resolvent_norm(op, 1j * s, method)
        out.append(ParabolicSample(h=h, s=float(s), norm=sample.norm,
                                   compensated=sample.norm * h ** (2.0 / 3.0) * s ** (1.0 / 3.0),
                                   method=sample.method))
    return out


# =============================================================================
# SPECTRAL PROJECTIONS
# =============================================================================

def default_radius(lam: complex, eigenvalues: Sequence[complex], factor: float = 0.5) -> float:
    """factor * distance from lam to the nearest other eigenvalue."""
    others = [abs(mu - lam) for mu in eigenvalues if abs(mu - lam) > 1e-12 * max(1.0, abs(lam))]
    if not others:
        raise PreconditionError("no other eigenvalue to size the contour against")
    return factor * min(others)


class _ContourQuadrature:
    """Trapezoid-rule resolvent integral on 2M nodes, usable at M or 2M."""

    def __init__(self, op: GridOperator, center: complex, radius: float, nodes: int):
        self.op = op
        count = 2 * nodes
        theta = 2.0 * np.pi * np.arange(count) / count
        self.points = center + radius * np.exp(1j * theta)
        self.steps = radius * np.exp(1j * theta)
        self.factors = [splu(op.shifted(z)) for z in self.points]

    def action(self, v: np.ndarray, every: int) -> np.ndarray:
        # (z - M)^-1 = -(M - z)^-1
        count = len(self.points) // every
        total = np.zeros_like(v, dtype=complex)
        for k in range(0, len(self.points), every):
            total -= self.steps[k] * self.factors[k].solve(v)
        return total / count

    def adjoint(self, v: np.ndarray, every: int) -> np.ndarray:
        count = len(self.points) // every
        total = np.zeros_like(v, dtype=complex)
        for k in range(0, len(self.points), every):
            total -= np.conj(self.steps[k]) * self.factors[k].solve(v, trans="H")
        return total / count


def spectral_projection(op: GridOperator, lam: complex, radius: float,
                        nodes: int = PROJECTION_NODES,
                        eigenvalues: Optional[Sequence[complex]] = None,
                        rng: Optional[np.random.Generator] = None,
                        probes: int = DEFAULT_PROBES,
                        iterations: int = DEFAULT_ITERATIONS) -> ProjectionDiagnostics:
    """
    Pi = (1/2 pi i) contour integral of (z - M)^-1 on |z - lam| = radius.

    The projection is applied matrix free. The quadrature uses 2 * nodes
    points; the even-indexed half gives the `nodes` rule, and the difference
    of the two rules on probe vectors is the reported drift.

    Raises:
        AnnulusNotClean: an eigenvalue lies in 0.5 r <= |z - lam| <= 1.5 r
        QuadratureNotConverged: drift above 1e-6
    """
    if eigenvalues is not None:
        for mu in eigenvalues:
            if 0.5 * radius <= abs(mu - lam) <= 1.5 * radius:
                raise AnnulusNotClean(f"eigenvalue {mu:.6g} lies in the contour annulus")
    rng = rng if rng is not None else task_rng(0, f"projection/{complex(lam)}")
    size = op.size
    quad = _ContourQuadrature(op, lam, radius, nodes)

    def apply(v):
        return quad.action(v, every=1)

    def apply_adjoint(v):
        return quad.adjoint(v, every=1)

    omega = random_unit_vectors(rng, size, max(probes, PROJECTION_SKETCH))
    fine = apply(omega)
    coarse = quad.action(omega, every=2)
    drift = float(np.max(np.linalg.norm(fine - coarse, axis=0)
                         / np.maximum(1.0, np.linalg.norm(fine, axis=0))))
    if drift > DRIFT_TOL:
        raise QuadratureNotConverged(f"doubling {nodes} nodes moved the projection by {drift:.3e}")
    logger.debug("projection at %s: quadrature drift %.3e", lam, drift)

    U, s, _ = la.svd(fine, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * max(1.0, s[0])))
    Q = U[:, :rank]
    trace = complex(np.trace(Q.conj().T @ apply(Q))) if rank else 0.0j

    M = op.matrix
    idem = estimate_norm(lambda v: apply(apply(v)) - apply(v),
                         lambda v: apply_adjoint(apply_adjoint(v)) - apply_adjoint(v),
                         size, rng, probes, iterations)
    norm = estimate_norm(apply, apply_adjoint, size, rng, probes, iterations)
    commutator = estimate_norm(lambda v: M @ apply(v) - apply(M @ v),
                               lambda v: apply_adjoint(M.conj().T @ v) - M.conj().T @ apply_adjoint(v),
                               size, rng, probes, iterations) / op.scale

    return ProjectionDiagnostics(
        lambda_center=complex(lam), radius=float(radius), nodes=nodes,
        idem_residual=float(idem), trace=trace, rank=rank, norm=float(norm),
        drift=drift, commutator=float(commutator),
        apply=apply, apply_adjoint=apply_adjoint,
    )
