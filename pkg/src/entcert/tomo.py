"""Bipartite state tomography from exact product-measurement statistics.

Each side measures a list of projective settings (rank-one projectors, one
per outcome); the joint statistics table is indexed
``[a_setting, b_setting, a_outcome, b_outcome]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvariantViolation
from .linalg import DensityMatrix, SystemShape, hermitian_part


def local_settings(d: int) -> np.ndarray:
    """Eigenbases of the generalized Gell-Mann observables, shape (settings, d, d, d).

    The diagonal observables share the computational basis, so it appears
    once; each pair j < k adds the bases of the symmetric and antisymmetric
    matrices.  For d = 2 this is Z, X, Y.
    """
    if d == 1:
        return np.ones((1, 1, 1, 1), dtype=complex)
    bases = [np.eye(d, dtype=complex)]
    for j in range(d):
        for k in range(j + 1, d):
            for phase in (1, 1j):
                b = np.eye(d, dtype=complex)
                b[:, j] = 0
                b[:, k] = 0
                b[j, j], b[k, j] = 1 / np.sqrt(2), phase / np.sqrt(2)
                b[j, k], b[k, k] = 1 / np.sqrt(2), -phase / np.sqrt(2)
                bases.append(b)
    return np.stack([np.einsum("ax,bx->xab", b, b.conj()) for b in bases])


@dataclass(frozen=True, eq=False)
class ProductMeasurementSet:
    a_settings: np.ndarray  # (settings, outcomes, d_a, d_a)
    b_settings: np.ndarray
    labels: tuple[str, str] = ("A", "B")

    @property
    def shape(self) -> SystemShape:
        return SystemShape((self.a_settings.shape[-1], self.b_settings.shape[-1]), self.labels)

    def effects(self) -> np.ndarray:
        """All product effects, ordered like a flattened statistics table."""
        e = np.einsum("sxij,tykl->stxyikjl", self.a_settings, self.b_settings)
        n = self.shape.total
        return e.reshape(-1, n, n)

    def design_matrix(self) -> np.ndarray:
        """Rows r with p = r . vec(rho), vec taken row-major."""
        e = self.effects()
        return np.transpose(e, (0, 2, 1)).reshape(len(e), -1)

    def gram_rank(self) -> int:
        return int(np.linalg.matrix_rank(self.design_matrix(), tol=1e-10))


@dataclass(frozen=True, eq=False)
class Statistics:
    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 4:
            raise InvariantViolation("statistics table must be 4-dimensional")
        if np.any(t < -1e-12):
            raise InvariantViolation(f"negative outcome probability {t.min():.3e}")
        dev = float(np.max(np.abs(t.sum(axis=(2, 3)) - 1.0)))
        if dev > 1e-9:
            raise InvariantViolation(f"an outcome distribution sums to 1 + {dev:.3e}", dev)
        object.__setattr__(self, "table", t)


def ic_product_set(dim_a: int, dim_b: int, labels: tuple[str, str] = ("A", "B")) -> ProductMeasurementSet:
    ms = ProductMeasurementSet(local_settings(dim_a), local_settings(dim_b), tuple(labels))
    full = (dim_a * dim_b) ** 2
    if ms.gram_rank() != full:
        raise InvariantViolation(f"measurement set is not informationally complete (rank < {full})")
    return ms


def exact_statistics(rho: DensityMatrix, ms: ProductMeasurementSet) -> Statistics:
    if rho.shape.dims != ms.shape.dims:
        raise ValueError(f"state has dims {rho.shape.dims}, measurements expect {ms.shape.dims}")
    da, db = ms.shape.dims
    r = rho.matrix.reshape(da, db, da, db)
    p = np.einsum("sxji,tylk,ikjl->stxy", ms.a_settings, ms.b_settings, r).real
    return Statistics(p)


def reconstruct(stats: Statistics, ms: ProductMeasurementSet) -> DensityMatrix:
    """Linear inversion through the pseudo-inverse of the effect design matrix."""
    a = ms.design_matrix()
    n = ms.shape.total
    if stats.table.size != a.shape[0]:
        raise ValueError("statistics table does not match the measurement set")
    if np.linalg.matrix_rank(a, tol=1e-10) < n * n:
        raise InvariantViolation("measurement set is rank-deficient; state is not identifiable")
    vec = np.linalg.pinv(a) @ stats.table.reshape(-1)
    m = hermitian_part(vec.reshape(n, n))
    return DensityMatrix(m / np.trace(m).real, ms.shape)


def correlation_test(stats: Statistics) -> float:
    """max |p(a, b) - p(a) p(b)| over setting pairs and outcomes."""
    t = stats.table
    pa = t.sum(axis=3)
    pb = t.sum(axis=2)
    return float(np.max(np.abs(t - pa[:, :, :, None] * pb[:, :, None, :])))
