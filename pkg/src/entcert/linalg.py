"""Dense linear algebra on labeled tensor-product Hilbert spaces.

States carry a :class:`SystemShape` (ordered subsystem dimensions and labels),
so partial traces and cuts can be addressed by name ("R", "Q", "E", ...).
Entropies are in bits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import InvariantViolation

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10
NORM_TOL = 1e-10
EIG_CLIP = 1e-12


def hermitian_part(m: np.ndarray) -> np.ndarray:
    return (m + m.conj().T) / 2


def _as_label_set(labels: str | Iterable[str]) -> set[str]:
    if isinstance(labels, str):
        return {labels}
    return set(labels)


@dataclass(frozen=True)
class SystemShape:
    dims: tuple[int, ...]
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.dims) != len(self.labels):
            raise InvariantViolation("dims and labels differ in length")
        if len(set(self.labels)) != len(self.labels):
            raise InvariantViolation(f"duplicate labels in {self.labels}")
        if any(d < 1 for d in self.dims):
            raise InvariantViolation(f"subsystem dimensions must be >= 1, got {self.dims}")

    @classmethod
    def single(cls, dim: int, label: str = "Q") -> SystemShape:
        return cls((dim,), (label,))

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.dims else 1

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown label {label!r}; have {self.labels}") from None

    def dim(self, label: str) -> int:
        return self.dims[self.index(label)]

    def split(self, keep: str | Iterable[str]) -> tuple[list[int], list[int]]:
        """Axis indices of the kept and the complementary subsystems."""
        keep = _as_label_set(keep)
        for lab in keep:
            self.index(lab)
        kept = [i for i, lab in enumerate(self.labels) if lab in keep]
        rest = [i for i, lab in enumerate(self.labels) if lab not in keep]
        return kept, rest

    def sub(self, axes: Sequence[int]) -> SystemShape:
        return SystemShape(tuple(self.dims[i] for i in axes), tuple(self.labels[i] for i in axes))

    def __add__(self, other: SystemShape) -> SystemShape:
        return SystemShape(self.dims + other.dims, self.labels + other.labels)


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray
    shape: SystemShape

    def __post_init__(self):
        psi = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if psi.size != self.shape.total:
            raise InvariantViolation(
                f"amplitude vector has length {psi.size}, shape needs {self.shape.total}"
            )
        dev = abs(np.linalg.norm(psi) - 1.0)
        if dev > NORM_TOL:
            raise InvariantViolation(f"state is not normalized (|norm - 1| = {dev:.3e})", dev)
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)

    @classmethod
    def normalized(cls, amplitudes, shape: SystemShape) -> PureState:
        psi = np.asarray(amplitudes, dtype=complex).reshape(-1)
        return cls(psi / np.linalg.norm(psi), shape)

    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.shape.dims)

    def density(self) -> DensityMatrix:
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.shape)

    def reorder(self, labels: Sequence[str]) -> PureState:
        axes = [self.shape.index(lab) for lab in labels]
        if sorted(axes) != list(range(len(self.shape.dims))):
            raise KeyError(f"{labels} is not a permutation of {self.shape.labels}")
        t = np.transpose(self.tensor_view(), axes)
        return PureState(t.reshape(-1), self.shape.sub(axes))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray
    shape: SystemShape

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.shape.total
        if m.shape != (n, n):
            raise InvariantViolation(f"matrix has shape {m.shape}, shape needs {(n, n)}")
        herm_dev = float(np.max(np.abs(m - m.conj().T))) if n else 0.0
        if herm_dev > HERMITIAN_TOL:
            raise InvariantViolation(f"matrix is not Hermitian (deviation {herm_dev:.3e})", herm_dev)
        m = hermitian_part(m)
        tr_dev = abs(np.trace(m).real - 1.0)
        if tr_dev > TRACE_TOL:
            raise InvariantViolation(f"trace deviates from 1 by {tr_dev:.3e}", tr_dev)
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -PSD_TOL:
            raise InvariantViolation(f"negative eigenvalue {lo:.3e}", -lo)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def maximally_mixed(cls, shape: SystemShape) -> DensityMatrix:
        return cls(np.eye(shape.total) / shape.total, shape)

    @property
    def dim(self) -> int:
        return self.shape.total

    def tensor_view(self) -> np.ndarray:
        return self.matrix.reshape(self.shape.dims * 2)

    def reorder(self, labels: Sequence[str]) -> DensityMatrix:
        axes = [self.shape.index(lab) for lab in labels]
        if sorted(axes) != list(range(len(self.shape.dims))):
            raise KeyError(f"{labels} is not a permutation of {self.shape.labels}")
        k = len(axes)
        t = np.transpose(self.tensor_view(), axes + [a + k for a in axes])
        n = self.shape.total
        return DensityMatrix(t.reshape(n, n), self.shape.sub(axes))

    def relabel(self, labels: Sequence[str]) -> DensityMatrix:
        return DensityMatrix(self.matrix, SystemShape(self.shape.dims, tuple(labels)))


@dataclass(frozen=True, eq=False)
class SchmidtDecomposition:
    coefficients: np.ndarray
    left_basis: np.ndarray  # columns are |l_i>
    right_basis: np.ndarray  # columns are |r_i>
    left_shape: SystemShape
    right_shape: SystemShape

    def reconstruct(self) -> np.ndarray:
        """State vector in (left, right) subsystem order."""
        return np.einsum("i,ai,bi->ab", self.coefficients, self.left_basis,
                         self.right_basis).reshape(-1)


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Weighted states averaging to a fixed density matrix."""

    weights: np.ndarray
    states: tuple[DensityMatrix, ...]

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if len(w) != len(self.states) or len(w) == 0:
            raise InvariantViolation("ensemble needs one weight per state and at least one state")
        if np.any(w < -1e-12):
            raise InvariantViolation(f"negative ensemble weight {w.min():.3e}")
        dev = abs(w.sum() - 1.0)
        if dev > 1e-9:
            raise InvariantViolation(f"ensemble weights sum to 1 + {dev:.3e}", dev)
        shapes = {s.shape for s in self.states}
        if len(shapes) != 1:
            raise InvariantViolation("ensemble states live on different shapes")
        w = np.clip(w, 0.0, None)
        w = w / w.sum()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "states", tuple(self.states))

    @classmethod
    def from_vectors(cls, weights, vectors, shape: SystemShape) -> Ensemble:
        return cls(weights, tuple(PureState.normalized(v, shape).density() for v in vectors))

    @property
    def shape(self) -> SystemShape:
        return self.states[0].shape

    def __len__(self) -> int:
        return len(self.states)

    def average_matrix(self) -> np.ndarray:
        return sum(p * s.matrix for p, s in zip(self.weights, self.states))

    def average(self) -> DensityMatrix:
        return DensityMatrix(self.average_matrix(), self.shape)

    def pure_vectors(self, tol: float = 1e-9) -> list[np.ndarray]:
        """Unit vectors of the (pure) member states, up to global phase."""
        out = []
        for s in self.states:
            w, v = np.linalg.eigh(s.matrix)
            if w[-1] < 1 - tol:
                raise InvariantViolation(f"ensemble member is not pure (top eigenvalue {w[-1]:.6f})")
            out.append(v[:, -1])
        return out


def _check_disjoint(a: SystemShape, b: SystemShape) -> None:
    clash = set(a.labels) & set(b.labels)
    if clash:
        raise InvariantViolation(f"duplicate labels across tensor factors: {sorted(clash)}")


def tensor(a, b):
    """Kronecker product of two states of the same kind."""
    _check_disjoint(a.shape, b.shape)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), a.shape + b.shape)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.shape + b.shape)
    raise TypeError("tensor() needs two PureStates or two DensityMatrices")


def partial_trace(rho: DensityMatrix | PureState, keep: str | Iterable[str]) -> DensityMatrix:
    """Reduced state on ``keep``, in the original label order."""
    shape = rho.shape
    kept, rest = shape.split(keep)
    if not kept:
        raise KeyError("keep must name at least one subsystem")
    dk = int(np.prod([shape.dims[i] for i in kept]))
    dr = int(np.prod([shape.dims[i] for i in rest])) if rest else 1
    if isinstance(rho, PureState):
        t = np.transpose(rho.tensor_view(), kept + rest).reshape(dk, dr)
        red = t @ t.conj().T
    else:
        k = len(shape.dims)
        t = np.transpose(rho.tensor_view(), kept + rest + [k + i for i in kept + rest])
        red = np.trace(t.reshape(dk, dr, dk, dr), axis1=1, axis2=3)
    return DensityMatrix(red, shape.sub(kept))


def spectrum(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of the Hermitian part, with roundoff negatives clipped to 0."""
    w = np.linalg.eigvalsh(hermitian_part(np.asarray(m, dtype=complex)))
    return np.where(w < 0, 0.0, w)


def entropy_of_spectrum(w: np.ndarray) -> float:
    w = np.asarray(w, dtype=float)
    w = w[w > EIG_CLIP]
    return float(-np.sum(w * np.log2(w))) + 0.0


def vn_entropy(rho: DensityMatrix | np.ndarray) -> float:
    m = rho.matrix if isinstance(rho, DensityMatrix) else rho
    return entropy_of_spectrum(spectrum(m))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.any(p < -1e-12):
        raise ValueError(f"probability {p.min():.3e} is negative")
    dev = abs(p.sum() - 1.0)
    if dev > 1e-9:
        raise ValueError(f"probabilities sum to 1 + {dev:.3e}")
    p = np.clip(p, 0.0, None)
    return entropy_of_spectrum(p / p.sum())


def binary_entropy(x: float) -> float:
    return shannon_entropy([x, 1.0 - x])


def schmidt(psi: PureState, cut: str | Iterable[str]) -> SchmidtDecomposition:
    shape = psi.shape
    left, right = shape.split(cut)
    if not left or not right:
        raise KeyError("cut must be a nonempty proper subset of the labels")
    ls, rs = shape.sub(left), shape.sub(right)
    mat = np.transpose(psi.tensor_view(), left + right).reshape(ls.total, rs.total)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    keep = s > EIG_CLIP
    if not np.any(keep):
        keep[0] = True
    u, s, v = u[:, keep], s[keep], vh[keep].T
    for i in range(u.shape[1]):
        j = int(np.argmax(np.abs(u[:, i]) > 1e-12))
        phase = u[j, i] / abs(u[j, i])
        u[:, i] /= phase
        v[:, i] *= phase
    return SchmidtDecomposition(s, u, v, ls, rs)


def eigen_decomposition(rho: DensityMatrix, cutoff: float = EIG_CLIP) -> tuple[np.ndarray, np.ndarray]:
    """Nonzero eigenpairs, sorted by eigenvalue descending."""
    w, v = np.linalg.eigh(rho.matrix)
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    keep = w > cutoff
    return w[keep], v[:, keep]


def purify(rho: DensityMatrix, env_label: str) -> PureState:
    """Eigen-purification sum_i sqrt(l_i) |i> |i_env>, env dimension = rank."""
    w, v = eigen_decomposition(rho)
    w = w / w.sum()
    r = len(w)
    amp = np.einsum("i,ai,ij->aj", np.sqrt(w), v, np.eye(r))
    return PureState.normalized(amp.reshape(-1), rho.shape + SystemShape.single(r, env_label))


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(m))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def uhlmann_fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    if rho.shape.dims != sigma.shape.dims:
        raise ValueError(f"shape mismatch {rho.shape.dims} vs {sigma.shape.dims}")
    # nuclear norm of sqrt(rho) sqrt(sigma); avoids square roots of roundoff eigenvalues
    prod = psd_sqrt(rho.matrix) @ psd_sqrt(sigma.matrix)
    f = float(np.sum(np.linalg.svd(prod, compute_uv=False)) ** 2)
    return min(max(f, 0.0), 1.0)


def mutual_information(rho: DensityMatrix | PureState, cut: str | Iterable[str]) -> float:
    left, right = rho.shape.split(cut)
    if not left or not right:
        raise KeyError("cut must be a nonempty proper subset of the labels")
    s_ab = 0.0 if isinstance(rho, PureState) else vn_entropy(rho)
    s_a = vn_entropy(partial_trace(rho, [rho.shape.labels[i] for i in left]))
    s_b = vn_entropy(partial_trace(rho, [rho.shape.labels[i] for i in right]))
    return s_a + s_b - s_ab


def basis_vector(dim: int, index: int) -> np.ndarray:
    e = np.zeros(dim, dtype=complex)
    e[index] = 1.0
    return e


def is_unitary(u: np.ndarray, tol: float = 1e-9) -> bool:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        return False
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))) < tol
