"""
Potential Catalog and Hypothesis Checks
=======================================

A PotentialSpec describes the symbol

    p(x, xi) = (xi - A(x))^2 + V(x),   V = V1 + i V2,

through a small catalog of terms whose derivatives are known exactly:

    A(x) = a + B x                          (affine magnetic potential)
    V(x) = sum of c * x^alpha * (1 + |x|^2)^(-m)

with |alpha| - 2m <= 2, so second derivatives of V stay bounded by
construction. Everything else in the package evaluates potentials through
evaluate()/evaluate_many() below.

KEY CONCEPTS:
-------------
1. Structural hypotheses (gradient of A bounded, higher derivatives of A zero,
   Hessian of V bounded) hold by construction and are reported as "symbolic".
2. Pointwise and at-infinity hypotheses are SAMPLED on quasi-random shells.
   The report says "sampled", never "proved".
3. Minima are the zeros of V1. They are normally declared in the config;
   locate_zero_candidates() finds them when they are not.

Example usage:
    spec = PotentialSpec.from_dict({
        "dim": 1,
        "terms": [{"coeff": [1, 1], "alpha": [2]}],
        "minima": [[0]],
    })
    minima = verify_minima(spec, spec.minima)
    report = check_assumptions(spec)
"""
import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy import optimize
from scipy.stats import norm, qmc

from nsaspec.errors import DegenerateHessian, InputError, NotAMinimum, PreconditionError
from nsaspec.model import QuadraticModel, antisymmetrize
from nsaspec.streams import task_rng

logger = logging.getLogger(__name__)

# =============================================================================
# CONSTANTS
# =============================================================================

MINIMUM_TOL = 1e-10        # V1, grad V1, V2, grad V2 at a minimum
HESSIAN_TOL = 1e-8         # sigma_min(V'') below this is degenerate
ZERO_SET_TOL = 1e-10       # V1 below this counts as a zero
ZERO_SEPARATION = 0.5      # zeros closer than this to a declared minimum are that minimum
ORDER_BALL_RADIUS = 20.0
DEFAULT_C_GRID = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 1000.0)
MIN_SAMPLE_RADIUS = 10.0
MIN_SHELL_SAMPLES = 1000

ASSUMPTION_IDS = (
    "accretive",
    "magnetic_gradient_bounded",
    "magnetic_higher_derivatives_vanish",
    "potential_hessian_bounded",
    "imaginary_part_controlled",
    "elliptic_at_infinity",
    "imaginary_part_vanishes_at_minima",
    "symbol_elliptic_at_infinity",
    "imaginary_part_strengthened",
)


def parse_complex(value) -> complex:
    """Accept a plain number or a [re, im] pair."""
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise InputError(f"complex numbers are written [re, im], got {value!r}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, bool) or not isinstance(value, (int, float, complex)):
        raise InputError(f"expected a number or [re, im], got {value!r}")
    return complex(value)


def complex_to_json(value: complex):
    """Inverse of parse_complex; real values stay plain numbers."""
    value = complex(value)
    return value.real if value.imag == 0 else [value.real, value.imag]


# =============================================================================
# DATA TYPES
# =============================================================================

@dataclass(frozen=True)
class VTerm:
    """c * x^alpha * (1 + |x|^2)^(-damping)."""
    coeff: complex
    alpha: Tuple[int, ...]
    damping: int = 0

    @property
    def degree(self) -> int:
        return sum(self.alpha) - 2 * self.damping


@dataclass(frozen=True)
class PotentialSpec:
    """Magnetic and electric potential from the term catalog."""
    dim: int
    magnetic_offset: np.ndarray
    magnetic_jacobian: np.ndarray
    terms: Tuple[VTerm, ...]
    minima: Tuple[Tuple[float, ...], ...] = field(default=())

    def __post_init__(self):
        if self.dim < 1:
            raise InputError("potential dimension must be positive")
        if self.magnetic_offset.shape != (self.dim,):
            raise InputError(f"magnetic offset must have length {self.dim}")
        if self.magnetic_jacobian.shape != (self.dim, self.dim):
            raise InputError(f"magnetic jacobian must be {self.dim}x{self.dim}")
        for term in self.terms:
            if len(term.alpha) != self.dim or any(a < 0 for a in term.alpha):
                raise InputError(f"term exponent {term.alpha} does not fit dimension {self.dim}")
            if term.damping < 0:
                raise InputError("damping exponent must be non-negative")
            if term.degree > 2:
                raise InputError(
                    f"term x^{term.alpha} (1+|x|^2)^-{term.damping} grows faster than |x|^2")
        for point in self.minima:
            if len(point) != self.dim:
                raise InputError(f"minimum {point} does not fit dimension {self.dim}")

    @classmethod
    def from_dict(cls, data: dict) -> "PotentialSpec":
        """
        Build from the config representation:

            {"dim": 2,
             "magnetic": {"offset": [0, 0], "jacobian": [[0, -0.5], [0.5, 0]]},
             "terms": [{"coeff": [1, 1], "alpha": [2, 0], "damping": 0}, ...],
             "minima": [[0, 0]]}
        """
        dim = int(data["dim"])
        magnetic = data.get("magnetic") or {}
        offset = np.array(magnetic.get("offset", [0.0] * dim), dtype=float)
        jacobian = np.array(magnetic.get("jacobian", np.zeros((dim, dim))), dtype=float)
        terms = tuple(
            VTerm(coeff=parse_complex(term["coeff"]),
                  alpha=tuple(int(a) for a in term["alpha"]),
                  damping=int(term.get("damping", 0)))
            for term in data.get("terms", [])
        )
        minima = tuple(tuple(float(c) for c in point) for point in data.get("minima", []))
        return cls(dim=dim, magnetic_offset=offset, magnetic_jacobian=jacobian,
                   terms=terms, minima=minima)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "magnetic": {
                "offset": self.magnetic_offset.tolist(),
                "jacobian": self.magnetic_jacobian.tolist(),
            },
            "terms": [
                {"coeff": complex_to_json(t.coeff), "alpha": list(t.alpha), "damping": t.damping}
                for t in self.terms
            ],
            "minima": [list(point) for point in self.minima],
        }


@dataclass(frozen=True)
class MinimumPoint:
    """A verified zero x_j of V1 with its local quadratic model."""
    x: np.ndarray
    hessV: np.ndarray
    magJac: np.ndarray
    model: QuadraticModel


@dataclass(frozen=True)
class AssumptionCheck:
    """One hypothesis: pass/fail, worst sample, margin and best constant."""
    id: str
    passed: bool
    method: str                          # "symbolic" or "sampled"
    margin: float
    constant: Optional[float] = None
    witness: Optional[Tuple[float, ...]] = None
    detail: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    checks: Tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def by_id(self, check_id: str) -> AssumptionCheck:
        for check in self.checks:
            if check.id == check_id:
                return check
        raise KeyError(check_id)

    def to_records(self) -> List[dict]:
        return [
            {
                "id": c.id,
                "passed": c.passed,
                "method": c.method,
                "margin": c.margin,
                "constant": c.constant,
                "witness": None if c.witness is None else " ".join(f"{v:.6g}" for v in c.witness),
                "detail": c.detail,
            }
            for c in self.checks
        ]


# =============================================================================
# EXACT EVALUATION
# =============================================================================

def _monomial(X: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    if np.any(alpha < 0):
        return np.zeros(X.shape[0])
    return np.prod(X ** alpha, axis=1)


def _term_derivatives(term: VTerm, X: np.ndarray):
    """Value, gradient and Hessian of one term at every row of X."""
    points, n = X.shape
    alpha = np.array(term.alpha)
    unit = np.eye(n, dtype=int)

    p = _monomial(X, alpha)
    dp = np.stack([alpha[j] * _monomial(X, alpha - unit[j]) for j in range(n)], axis=1)
    d2p = np.empty((points, n, n))
    for j in range(n):
        for k in range(n):
            factor = alpha[j] * (alpha[k] - (1 if j == k else 0))
            d2p[:, j, k] = factor * _monomial(X, alpha - unit[j] - unit[k])

    m = term.damping
    if m == 0:
        w = np.ones(points)
        dw = np.zeros((points, n))
        d2w = np.zeros((points, n, n))
    else:
        s = 1.0 + np.sum(X * X, axis=1)
        w = s ** (-m)
        dw = -2.0 * m * X * (s ** (-m - 1))[:, None]
        d2w = (-2.0 * m * np.eye(n)[None, :, :] * (s ** (-m - 1))[:, None, None]
               + 4.0 * m * (m + 1) * X[:, :, None] * X[:, None, :] * (s ** (-m - 2))[:, None, None])

    value = p * w
    grad = dp * w[:, None] + p[:, None] * dw
    hess = (d2p * w[:, None, None]
            + dp[:, :, None] * dw[:, None, :]
            + dw[:, :, None] * dp[:, None, :]
            + p[:, None, None] * d2w)
    return term.coeff * value, term.coeff * grad, term.coeff * hess


def evaluate_many(spec: PotentialSpec, X: np.ndarray):
    """
    Vectorized evaluate(): X has one point per row.

    Returns (A, V, gradV, hessV) with shapes (P, n), (P,), (P, n), (P, n, n).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    points, n = X.shape
    A = spec.magnetic_offset[None, :] + X @ spec.magnetic_jacobian.T
    V = np.zeros(points, dtype=complex)
    gradV = np.zeros((points, n), dtype=complex)
    hessV = np.zeros((points, n, n), dtype=complex)
    for term in spec.terms:
        value, grad, hess = _term_derivatives(term, X)
        V += value
        gradV += grad
        hessV += hess
    return A, V, gradV, hessV


def evaluate(spec: PotentialSpec, x):
    """(A(x), V(x), grad V(x), Hess V(x)) at a single point, exactly."""
    x = np.asarray(x, dtype=float).reshape(1, spec.dim)
    if not np.all(np.isfinite(x)):
        raise InputError("evaluation point must be finite")
    A, V, gradV, hessV = evaluate_many(spec, x)
    return A[0], complex(V[0]), gradV[0], hessV[0]


# =============================================================================
# SAMPLING
# =============================================================================

def _ball_points(dim: int, radius: float, count: int, rng: np.random.Generator,
                 inner: float = 0.0) -> np.ndarray:
    """Scrambled-Halton points with inner <= |x| < radius."""
    sampler = qmc.Halton(d=dim + 1, scramble=True, seed=rng)
    u = sampler.random(count)
    directions = norm.ppf(np.clip(u[:, :dim], 1e-12, 1 - 1e-12))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    # uniform in volume between the two radii
    r = (inner ** dim + u[:, dim] * (radius ** dim - inner ** dim)) ** (1.0 / dim)
    return directions * r[:, None]


def _shells(dim: int, sample_radius: float, count: int, seed: int, tag: str) -> np.ndarray:
    """Shell bands R/4, R/2, R, 2R, each [r, 2r)."""
    bands = []
    for r in (sample_radius / 4, sample_radius / 2, sample_radius, 2 * sample_radius):
        rng = task_rng(seed, f"{tag}/shell/{r:g}")
        bands.append(_ball_points(dim, 2 * r, count, rng, inner=r))
    return np.vstack(bands)


# =============================================================================
# MINIMA
# =============================================================================

def verify_minima(spec: PotentialSpec, candidates: Iterable[Sequence[float]],
                  sample_radius: float = MIN_SAMPLE_RADIUS, samples: int = 4096,
                  seed: int = 0) -> List[MinimumPoint]:
    """
    Check each candidate is a doubly characteristic zero and build its model.

    At each x_j: V1, grad V1, V2 and grad V2 vanish to 1e-10 and V''(x_j) is
    invertible. The zero set of V1 is also sampled over the ball of radius
    `sample_radius`: a zero far from every candidate means V1^-1(0) is not the
    declared finite set.

    Raises:
        NotAMinimum: names the failing condition
        DegenerateHessian: sigma_min(V''(x_j)) < 1e-8
    """
    points = [np.asarray(c, dtype=float) for c in candidates]
    minima = []
    for x in points:
        _, V, gradV, hessV = evaluate(spec, x)
        conditions = {
            "V1(x_j) = 0": abs(V.real),
            "grad V1(x_j) = 0": float(np.max(np.abs(gradV.real))),
            "V2(x_j) = 0": abs(V.imag),
            "grad V2(x_j) = 0": float(np.max(np.abs(gradV.imag))),
        }
        for name, size in conditions.items():
            if size > MINIMUM_TOL:
                raise NotAMinimum(f"{name} fails at x = {x.tolist()} (|.| = {size:.3e})")
        sigma_min = float(np.linalg.svd(hessV, compute_uv=False).min())
        if sigma_min < HESSIAN_TOL:
            raise DegenerateHessian(f"V''(x_j) is singular at x = {x.tolist()} (sigma_min {sigma_min:.3e})")

        magJac = spec.magnetic_jacobian.copy()
        model, _ = antisymmetrize(QuadraticModel.build(magJac, hessV))
        minima.append(MinimumPoint(x=x, hessV=hessV, magJac=magJac, model=model))

    rng = task_rng(seed, "potential/zero-set")
    X = _ball_points(spec.dim, sample_radius, samples, rng)
    _, V, _, _ = evaluate_many(spec, X)
    zeros = X[V.real <= ZERO_SET_TOL]
    for z in zeros:
        if all(np.linalg.norm(z - x) > ZERO_SEPARATION for x in points):
            raise NotAMinimum(
                f"V1 vanishes at x = {np.round(z, 6).tolist()}, away from every declared minimum; "
                "the zero set of V1 is not finite")
    return minima


def locate_zero_candidates(spec: PotentialSpec, radius: float = MIN_SAMPLE_RADIUS,
                           seed: int = 0, samples: int = 4096, starts: int = 8) -> List[np.ndarray]:
    """
    Find zeros of V1 when none are declared.

    The lowest sampled values of V1 seed a Newton trust-region refinement with
    the exact gradient and Hessian. Refined points with V1 below 1e-8 are kept,
    duplicates within 1e-6 merged.
    """
    rng = task_rng(seed, "potential/locate")
    X = _ball_points(spec.dim, radius, samples, rng)
    _, V, _, _ = evaluate_many(spec, X)
    order = np.argsort(V.real)[:starts]

    def fun(x):
        return evaluate(spec, x)[1].real

    def jac(x):
        return evaluate(spec, x)[2].real

    def hess(x):
        return evaluate(spec, x)[3].real

    found: List[np.ndarray] = []
    for k in order:
        result = optimize.minimize(fun, X[k], jac=jac, hess=hess, method="trust-exact",
                                   options={"gtol": 1e-12})
        if result.fun > 1e-8:
            continue
        if all(np.linalg.norm(result.x - f) > 1e-6 for f in found):
            found.append(result.x)
    logger.info("located %d zero candidate(s) of V1", len(found))
    return found


# =============================================================================
# ORDER FUNCTION
# =============================================================================

def order_function(spec: PotentialSpec, X) -> np.ndarray:
    """m(x, xi) = 1 + (xi - A(x))^2 + V1(x) + |V2'(x)|^2, rowwise on X = (x, xi)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = spec.dim
    x, xi = X[:, :n], X[:, n:]
    A, V, gradV, _ = evaluate_many(spec, x)
    shifted = xi - A
    values = (1.0 + np.sum(shifted ** 2, axis=1) + V.real
              + np.sum(gradV.imag ** 2, axis=1))
    return values if values.size > 1 else values.reshape(())


def _order_gradient(spec: PotentialSpec, X: np.ndarray) -> np.ndarray:
    n = spec.dim
    x, xi = X[:, :n], X[:, n:]
    A, _, gradV, hessV = evaluate_many(spec, x)
    shifted = xi - A
    d_xi = 2.0 * shifted
    d_x = (-2.0 * shifted @ spec.magnetic_jacobian
           + gradV.real
           + 2.0 * np.einsum("pjk,pk->pj", hessV.imag, gradV.imag))
    return np.hstack([d_x, d_xi])


def _phase_ball(dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    # one row of normals per point, so a shorter draw is a prefix of a longer one
    draws = rng.standard_normal((count, dim + 1))
    directions = draws[:, :dim] / np.linalg.norm(draws[:, :dim], axis=1, keepdims=True)
    r = ORDER_BALL_RADIUS * norm.cdf(draws[:, dim]) ** (1.0 / dim)
    return directions * r[:, None]


def check_order_property(spec: PotentialSpec, gamma: float = 0.5, trials: int = 10_000,
                         seed: int = 0) -> float:
    """
    Worst sampled constant in m(X) <= C <X - Y>^(1/(1-gamma)) m(Y).

    Pairs are drawn uniformly in the phase-space ball of radius 20. The draws
    for `trials` are a prefix of the draws for 2 * trials under the same seed,
    so doubling can only raise the reported constant.
    """
    if not 0 < gamma < 1:
        raise PreconditionError("gamma must lie in (0, 1)")
    if trials < 10_000:
        raise PreconditionError("at least 10^4 trials are needed")
    d = 2 * spec.dim
    rng = task_rng(seed, "potential/order")
    pairs = _phase_ball(d, 2 * trials, rng).reshape(trials, 2, d)
    X, Y = pairs[:, 0], pairs[:, 1]
    bracket = np.sqrt(1.0 + np.sum((X - Y) ** 2, axis=1))
    ratios = order_function(spec, X) / (bracket ** (1.0 / (1.0 - gamma)) * order_function(spec, Y))
    return float(np.max(ratios))


def order_gradient_ratio(spec: PotentialSpec, samples: int = 10_000, seed: int = 0) -> float:
    """Sampled sup of |grad m| / m^(1/2) over the phase-space ball of radius 20."""
    rng = task_rng(seed, "potential/order-gradient")
    X = _phase_ball(2 * spec.dim, samples, rng)
    gradient = np.linalg.norm(_order_gradient(spec, X), axis=1)
    return float(np.max(gradient / np.sqrt(order_function(spec, X))))


def minimum_neighbourhood_ratio(spec: PotentialSpec, minimum: MinimumPoint, radius: float = 0.1,
                                samples: int = 2000, seed: int = 0) -> Tuple[float, float]:
    """(min, max) of (V1 + |V2'|^2)(x_j + y) / |y|^2 over sampled 0 < |y| <= radius."""
    rng = task_rng(seed, "potential/neighbourhood")
    Y = _ball_points(spec.dim, radius, samples, rng, inner=1e-3 * radius)
    _, V, gradV, _ = evaluate_many(spec, minimum.x[None, :] + Y)
    ratios = (V.real + np.sum(gradV.imag ** 2, axis=1)) / np.sum(Y * Y, axis=1)
    return float(ratios.min()), float(ratios.max())


# =============================================================================
# HYPOTHESIS REPORT
# =============================================================================

def _best_constant(c_grid: Sequence[float], needed: np.ndarray, points: np.ndarray,
                   norms: Optional[np.ndarray] = None) -> Tuple[bool, float, Optional[float], tuple]:
    """
    Smallest grid constant C with needed <= C on the samples.

    With `norms`, only samples with norms >= C count (at-infinity conditions),
    and a C with no such samples is skipped rather than passed vacuously.
    Returns (passed, margin, constant, witness).
    """
    for C in sorted(c_grid):
        mask = np.ones(needed.shape, dtype=bool) if norms is None else norms >= C
        if not np.any(mask):
            continue
        worst = int(np.argmax(np.where(mask, needed, -np.inf)))
        if needed[worst] <= C:
            return True, float(C - needed[worst]), float(C), tuple(points[worst])
    mask = np.ones(needed.shape, dtype=bool) if norms is None else norms >= min(c_grid)
    worst = int(np.argmax(np.where(mask, needed, -np.inf)))
    return False, float(max(c_grid) - needed[worst]), None, tuple(points[worst])


def _ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    out = np.full(numerator.shape, np.inf)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    out[(denominator <= 0) & (numerator <= 0)] = 0.0
    return out


def check_assumptions(spec: PotentialSpec, sample_radius: float = MIN_SAMPLE_RADIUS,
                      shell_samples: int = MIN_SHELL_SAMPLES,
                      c_grid: Sequence[float] = DEFAULT_C_GRID, seed: int = 0,
                      minima: Optional[Sequence[Sequence[float]]] = None) -> AssumptionReport:
    """
    Certify or sample every hypothesis on the potential.

    Failures are report entries, never exceptions. Minima default to the
    declared ones, then to locate_zero_candidates().
    """
    if sample_radius < MIN_SAMPLE_RADIUS:
        raise PreconditionError(f"sample radius must be >= {MIN_SAMPLE_RADIUS}")
    if shell_samples < MIN_SHELL_SAMPLES:
        raise PreconditionError(f"at least {MIN_SHELL_SAMPLES} samples per shell are needed")

    n = spec.dim
    shell_x = _shells(n, sample_radius, shell_samples, seed, "x")
    core_x = _ball_points(n, sample_radius / 4, shell_samples, task_rng(seed, "x/core"))
    every_x = np.vstack([core_x, shell_x])
    _, V, gradV, hessV = evaluate_many(spec, every_x)
    V1, V2 = V.real, V.imag
    grad_V2_sq = np.sum(gradV.imag ** 2, axis=1)
    checks = []

    # accretive
    worst = int(np.argmin(V1))
    checks.append(AssumptionCheck("accretive", bool(V1[worst] >= -1e-12), "sampled",
                                  float(V1[worst]), witness=tuple(every_x[worst])))

    # structural, by construction of the catalog
    checks.append(AssumptionCheck("magnetic_gradient_bounded", True, "symbolic",
                                  float(np.linalg.norm(spec.magnetic_jacobian, 2)),
                                  detail="A is affine"))
    checks.append(AssumptionCheck("magnetic_higher_derivatives_vanish", True, "symbolic", 0.0,
                                  detail="A is affine"))
    hess_sup = float(np.max(np.linalg.norm(hessV, ord=2, axis=(1, 2))))
    checks.append(AssumptionCheck("potential_hessian_bounded", True, "symbolic", hess_sup,
                                  detail="every term has degree <= 2; margin is the sampled sup"))

    # |V2| <= C (1 + V1 + |V2'|^2)
    needed = _ratio(np.abs(V2), 1.0 + V1 + grad_V2_sq)
    passed, margin, constant, witness = _best_constant(c_grid, needed, every_x)
    checks.append(AssumptionCheck("imaginary_part_controlled", passed, "sampled", margin,
                                  constant, witness))

    # V1 >= (1 + |V2'|^2) / C for |x| >= C
    shell_count = shell_x.shape[0]
    needed = _ratio(1.0 + grad_V2_sq[-shell_count:], V1[-shell_count:])
    passed, margin, constant, witness = _best_constant(
        c_grid, needed, shell_x, norms=np.linalg.norm(shell_x, axis=1))
    checks.append(AssumptionCheck("elliptic_at_infinity", passed, "sampled", margin,
                                  constant, witness))

    # V2 and its gradient vanish at the minima
    declared = list(minima) if minima is not None else list(spec.minima)
    try:
        if not declared:
            declared = locate_zero_candidates(spec, sample_radius, seed)
        found = verify_minima(spec, declared, sample_radius=sample_radius, seed=seed)
        checks.append(AssumptionCheck("imaginary_part_vanishes_at_minima", bool(found), "sampled",
                                      0.0, detail=f"{len(found)} minimum point(s)"))
    except InputError as exc:
        # a minimum whose Re V'' is not accretive cannot carry a model
        checks.append(AssumptionCheck("imaginary_part_vanishes_at_minima", False, "sampled", 0.0,
                                      detail=str(exc)))

    # Re p >= m / C for |X| >= C in phase space
    shell_X = _shells(2 * n, sample_radius, shell_samples, seed, "phase")
    A, Vp, gradVp, _ = evaluate_many(spec, shell_X[:, :n])
    re_p = np.sum((shell_X[:, n:] - A) ** 2, axis=1) + Vp.real
    m = 1.0 + re_p + np.sum(gradVp.imag ** 2, axis=1)
    needed = _ratio(m, re_p)
    passed, margin, constant, witness = _best_constant(
        c_grid, needed, shell_X, norms=np.linalg.norm(shell_X, axis=1))
    checks.append(AssumptionCheck("symbol_elliptic_at_infinity", passed, "sampled", margin,
                                  constant, witness))

    # |V2| <= C (V1 + |V2'|^2) everywhere
    needed = _ratio(np.abs(V2), V1 + grad_V2_sq)
    passed, margin, constant, witness = _best_constant(c_grid, needed, every_x)
    checks.append(AssumptionCheck("imaginary_part_strengthened", passed, "sampled", margin,
                                  constant, witness))

    report = AssumptionReport(checks=tuple(checks))
    logger.info("assumption check: %d/%d passed",
                sum(c.passed for c in report.checks), len(report.checks))
    return report
