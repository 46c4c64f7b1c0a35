"""
Randomized operator-norm estimation from matrix-free actions.

Used wherever the operator is only available as "apply to a vector": spectral
projections, their idempotency and commutator defects, and semigroup
remainders. The estimate is a lower bound that converges to ||X|| quickly when
the top singular value is separated.
"""
from typing import Callable

import numpy as np

from nsaspec.streams import random_unit_vectors

Action = Callable[[np.ndarray], np.ndarray]

DEFAULT_PROBES = 5
DEFAULT_ITERATIONS = 10


def estimate_norm(apply: Action, apply_adjoint: Action, size: int,
                  rng: np.random.Generator, probes: int = DEFAULT_PROBES,
                  iterations: int = DEFAULT_ITERATIONS) -> float:
    """
    Estimate ||X|| by power iteration on X^H X.

    Args:
        apply: v -> X v
        apply_adjoint: w -> X^H w
        size: length of the vectors X acts on
        rng: source of the starting probes
        probes: number of independent starting vectors
        iterations: power steps per probe

    Returns:
        The largest ||X v|| / ||v|| seen over all probes and iterations.
    """
    best = 0.0
    starts = random_unit_vectors(rng, size, probes)
    for column in range(probes):
        v = starts[:, column]
        for _ in range(iterations):
            w = apply(v)
            value = float(np.linalg.norm(w))
            best = max(best, value)
            if value == 0.0:
                break
            u = apply_adjoint(w)
            norm_u = np.linalg.norm(u)
            if norm_u == 0.0:
                break
            v = u / norm_u
    return best
