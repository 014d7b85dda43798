"""Haar and Ginibre sampling of states and channels from a seeded generator."""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from .linalg import DensityMatrix, PureState, SystemShape


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(dim, random_state=rng)


def random_pure(shape: SystemShape, rng: np.random.Generator) -> PureState:
    z = rng.normal(size=shape.total) + 1j * rng.normal(size=shape.total)
    return PureState.normalized(z, shape)


def random_density(shape: SystemShape, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Ginibre-ensemble mixed state of the given rank (full rank by default)."""
    n = shape.total
    k = n if rank is None else rank
    g = rng.normal(size=(n, k)) + 1j * rng.normal(size=(n, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, shape)


def random_kraus(d_in: int, d_out: int, n_ops: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Kraus operators cut from a Haar-random Stinespring isometry."""
    big = n_ops * d_out
    if big < d_in:
        raise ValueError("need n_ops * d_out >= d_in for a trace-preserving map")
    iso = random_unitary(big, rng)[:, :d_in]
    return [iso[k * d_out:(k + 1) * d_out, :] for k in range(n_ops)]
