"""
The contraction semigroup exp(-tM/h) and the decay of its remainder.

Two ways to apply exp(-tM/h):

  dense   scipy.linalg.expm, cached per t, for at most DENSE_LIMIT rows
  krylov  adaptive Arnoldi time stepping in the style of Expokit's expv,
          using only sparse matrix-vector products

The remainder after removing the low-lying spectral projections,

    R(t) = exp(-tM/h) - sum_k exp(-t lambda_k / h) Pi_k,

is measured in operator norm by randomized power iteration and its decay rate
fitted on a log scale.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg as la
from scipy.stats import linregress

from nsaspec.discretize import GridOperator
from nsaspec.errors import NoiseFloor, PreconditionError, StepFailure
from nsaspec.normest import DEFAULT_ITERATIONS, DEFAULT_PROBES, estimate_norm
from nsaspec.oracles import dense_expm
from nsaspec.spectral import ProjectionDiagnostics
from nsaspec.streams import random_unit_vectors

logger = logging.getLogger(__name__)

DENSE_LIMIT = 2000
KRYLOV_DIM = 30
KRYLOV_TOL = 1e-8
MAX_REJECTIONS = 10
NOISE_FLOOR = 1e-8
MIN_FIT_POINTS = 5


# =============================================================================
# KRYLOV EXPONENTIAL ACTION
# =============================================================================

def _round_step(step: float) -> float:
    """Round a step size up to two significant digits."""
    if not math.isfinite(step):
        return step
    scale = 10.0 ** (math.floor(math.log10(step)) - 1)
    return math.ceil(step / scale) * scale


def krylov_expv(matvec, tau: float, v: np.ndarray, anorm: float,
                m: int = KRYLOV_DIM, tol: float = KRYLOV_TOL) -> np.ndarray:
    """
    exp(tau * A) v for A given by `matvec`, with ||A|| about `anorm`.

    Arnoldi on the (m+2)-augmented Hessenberg matrix, local error estimated
    from its last two rows, step size adapted so the error over [0, tau]
    stays below tol * ||v||.

    Raises:
        StepFailure: a step was rejected MAX_REJECTIONS times
    """
    n = v.shape[0]
    beta0 = float(np.linalg.norm(v))
    if beta0 == 0.0 or tau == 0.0:
        return v.astype(complex)
    m = min(m, n - 1)
    gamma, delta, breakdown_tol = 0.9, 1.2, 1e-7

    w = v.astype(complex) / beta0
    beta = 1.0
    t_now = 0.0
    fact = ((m + 1) / math.e) ** (m + 1) * math.sqrt(2.0 * math.pi * (m + 1))
    t_new = _round_step((1.0 / anorm) * ((fact * tol) / (4.0 * anorm)) ** (1.0 / m))

    while t_now < tau:
        t_step = min(tau - t_now, t_new)
        V = np.zeros((n, m + 1), dtype=complex)
        H = np.zeros((m + 2, m + 2), dtype=complex)
        V[:, 0] = w / beta
        happy = False
        mb = m
        for j in range(m):
            p = matvec(V[:, j])
            for i in range(j + 1):
                H[i, j] = np.vdot(V[:, i], p)
                p = p - H[i, j] * V[:, i]
            s = np.linalg.norm(p)
            if s < breakdown_tol:
                happy, mb = True, j + 1
                t_step = tau - t_now
                break
            H[j + 1, j] = s
            V[:, j + 1] = p / s

        if not happy:
            H[m + 1, m] = 1.0
            avnorm = np.linalg.norm(matvec(V[:, m]))

        rejections = 0
        while True:
            size = mb if happy else m + 2
            F = la.expm(t_step * H[:size, :size])
            if happy:
                err_loc = 0.0
                xm = 1.0 / m
                break
            phi1 = abs(beta * F[m, 0])
            phi2 = abs(beta * F[m + 1, 0] * avnorm)
            if phi1 > 10.0 * phi2:
                err_loc, xm = phi2, 1.0 / m
            elif phi1 > phi2:
                err_loc, xm = phi1 * phi2 / (phi1 - phi2), 1.0 / m
            else:
                err_loc, xm = phi1, 1.0 / (m - 1)
            if err_loc <= delta * (t_step / tau) * tol:
                break
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise StepFailure(f"Krylov step rejected {MAX_REJECTIONS} times at t={t_now:.4g}")
            t_step = _round_step(gamma * t_step * (t_step * tol / (tau * err_loc)) ** xm)

        used = mb if happy else m + 1
        w = V[:, :used] @ (beta * F[:used, 0])
        beta = float(np.linalg.norm(w))
        t_now += t_step
        if err_loc > 0:
            t_new = _round_step(gamma * t_step * (t_step * tol / (tau * err_loc)) ** xm)
        else:
            t_new = tau - t_now
        if beta == 0.0:
            break
    return beta0 * w


# =============================================================================
# PROPAGATOR
# =============================================================================

class Propagator:
    """
    Applies exp(-tM/h) and its adjoint to vectors or blocks of column vectors.

    Example:
        prop = Propagator(op)
        u = prop.apply(v, t=1.0)
    """

    def __init__(self, op: GridOperator, method: str = "auto"):
        if method not in ("auto", "dense", "krylov"):
            raise PreconditionError(f"unknown propagator method {method!r}")
        if method == "auto":
            method = "dense" if op.size <= DENSE_LIMIT else "krylov"
        self.op = op
        self.method = method
        self._cache: Dict[float, np.ndarray] = {}
        self._anorm = op.scale / op.h

    def _dense(self, t: float) -> np.ndarray:
        if t not in self._cache:
            self._cache[t] = dense_expm(self.op.matrix / self.op.h, t)
        return self._cache[t]

    def _krylov(self, v: np.ndarray, t: float, adjoint: bool) -> np.ndarray:
        M = self.op.matrix.conj().T.tocsr() if adjoint else self.op.matrix
        h = self.op.h

        def matvec(x):
            return -(M @ x) / h

        if v.ndim == 1:
            return krylov_expv(matvec, t, v, self._anorm)
        return np.column_stack([krylov_expv(matvec, t, v[:, k], self._anorm)
                                for k in range(v.shape[1])])

    def apply(self, v: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise PreconditionError("the semigroup is only defined for t >= 0")
        if t == 0:
            return np.array(v, dtype=complex)
        if self.method == "dense":
            return self._dense(t) @ v
        return self._krylov(v, t, adjoint=False)

    def apply_adjoint(self, v: np.ndarray, t: float) -> np.ndarray:
        if t < 0:
            raise PreconditionError("the semigroup is only defined for t >= 0")
        if t == 0:
            return np.array(v, dtype=complex)
        if self.method == "dense":
            return self._dense(t).conj().T @ v
        return self._krylov(v, t, adjoint=True)


def propagate(op: GridOperator, v: np.ndarray, t: float, method: str = "auto") -> np.ndarray:
    """exp(-tM/h) v."""
    return Propagator(op, method).apply(v, t)


# =============================================================================
# REMAINDER AND DECAY
# =============================================================================

@dataclass
class DecaySeries:
    times: List[float]
    remainder_norms: List[float]
    reference_a: float
    fitted_rate: Optional[float] = None
    r_squared: Optional[float] = None
    max_deviation: Optional[float] = None
    fit_mask: List[bool] = field(default_factory=list)


def remainder_norm(op: GridOperator, lambdas: Sequence[complex],
                   projections: Sequence[ProjectionDiagnostics], t: float,
                   rng: np.random.Generator, propagator: Optional[Propagator] = None,
                   probes: int = DEFAULT_PROBES, iterations: int = DEFAULT_ITERATIONS) -> float:
    """
    ||exp(-tM/h) - sum_k exp(-t lambda_k/h) Pi_k|| by randomized power iteration.

    The projections together make up the spectral projection onto the
    eigenvalues with Re lambda < a h.
    """
    if len(lambdas) != len(projections):
        raise PreconditionError("one projection per eigenvalue is needed")
    prop = propagator or Propagator(op)
    weights = [np.exp(-t * lam / op.h) for lam in lambdas]

    def apply(v):
        out = prop.apply(v, t)
        for weight, proj in zip(weights, projections):
            out = out - weight * proj.apply(v)
        return out

    def apply_adjoint(v):
        out = prop.apply_adjoint(v, t)
        for weight, proj in zip(weights, projections):
            out = out - np.conj(weight) * proj.apply_adjoint(v)
        return out

    return estimate_norm(apply, apply_adjoint, op.size, rng, probes, iterations)


def _fit(times: Sequence[float], norms: Sequence[float]):
    t = np.asarray(times, dtype=float)
    r = np.asarray(norms, dtype=float)
    mask = r > 10.0 * NOISE_FLOOR
    if int(mask.sum()) < MIN_FIT_POINTS:
        raise NoiseFloor(f"only {int(mask.sum())} remainder(s) above {10 * NOISE_FLOOR:g}; "
                         f"need {MIN_FIT_POINTS}")
    fit = linregress(t[mask], np.log(r[mask]))
    residuals = np.log(r[mask]) - (fit.intercept + fit.slope * t[mask])
    return -float(fit.slope), float(fit.rvalue ** 2), float(np.max(np.abs(residuals))), mask


def decay_rate_fit(series: DecaySeries) -> float:
    """
    Least-squares slope of log R(t) against t, sign flipped.

    Only points above ten times the 1e-8 noise floor are used.

    Raises:
        NoiseFloor: fewer than 5 such points
    """
    rate, _, _, _ = _fit(series.times, series.remainder_norms)
    return rate


def measure_decay(op: GridOperator, lambdas: Sequence[complex],
                  projections: Sequence[ProjectionDiagnostics], times: Sequence[float], a: float,
                  rng: np.random.Generator, probes: int = DEFAULT_PROBES,
                  iterations: int = DEFAULT_ITERATIONS) -> DecaySeries:
    """Remainder norms over `times` with the log-linear fit filled in."""
    prop = Propagator(op)
    norms = [remainder_norm(op, lambdas, projections, t, rng, prop, probes, iterations)
             for t in times]
    series = DecaySeries(times=[float(t) for t in times], remainder_norms=norms, reference_a=a)
    rate, r_squared, deviation, mask = _fit(series.times, norms)
    series.fitted_rate = rate
    series.r_squared = r_squared
    series.max_deviation = deviation
    series.fit_mask = [bool(x) for x in mask]
    logger.info("h=%g: fitted decay rate %.4f (a = %g, R^2 = %.5f)", op.h, rate, a, r_squared)
    return series


def contraction_check(op: GridOperator, times: Sequence[float], rng: np.random.Generator,
                      count: int = 50, propagator: Optional[Propagator] = None) -> float:
    """max ||exp(-tM/h) v|| / ||v|| over random unit v and the given times."""
    prop = propagator or Propagator(op)
    V = random_unit_vectors(rng, op.size, count)
    worst = 0.0
    for t in times:
        worst = max(worst, float(np.max(np.linalg.norm(prop.apply(V, t), axis=0))))
    return worst


def composition_check(op: GridOperator, t1: float, t2: float, rng: np.random.Generator,
                      count: int = 50, propagator: Optional[Propagator] = None) -> float:
    """max ||P(t1 + t2) v - P(t1) P(t2) v|| over random unit v."""
    prop = propagator or Propagator(op)
    V = random_unit_vectors(rng, op.size, count)
    joint = prop.apply(V, t1 + t2)
    split = prop.apply(prop.apply(V, t2), t1)
    return float(np.max(np.linalg.norm(joint - split, axis=0)))
