"""Named, reproducible random streams derived from one master seed."""
import hashlib

import numpy as np


def _name_key(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def task_rng(seed: int, name: str) -> np.random.Generator:
    """
    Return the generator for task `name` under master seed `seed`.

    The same (seed, name) pair always yields the same stream, independent of
    how many other streams were drawn before it or in which thread.

    Example:
        rng = task_rng(7, "semigroup/h=0.05/probes")
        v = rng.standard_normal(100)
    """
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=(_name_key(name),))
    return np.random.default_rng(sequence)


def random_unit_vectors(rng: np.random.Generator, size: int, count: int) -> np.ndarray:
    """Complex Gaussian vectors of unit norm, one per column."""
    block = rng.standard_normal((size, count)) + 1j * rng.standard_normal((size, count))
    return block / np.linalg.norm(block, axis=0, keepdims=True)
