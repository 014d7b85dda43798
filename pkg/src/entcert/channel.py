"""Quantum channels in operator-sum form and their unitary dilations.

Conventions: a Kraus operator ``A`` maps the input space to the output space
(shape ``(out_dim, in_dim)``).  The joint space of a dilation is ordered
system-then-environment, so basis index ``(q, e)`` is ``q * env_dim + e``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import CompletenessViolation, InvariantViolation
from .linalg import DensityMatrix, Ensemble, SystemShape, hermitian_part, is_unitary

COMPLETENESS_TOL = 1e-9
ZERO_OP_TOL = 1e-12
ENSEMBLE_CUTOFF = 1e-14
CHANNEL_EQ_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class KrausChannel:
    operators: tuple[np.ndarray, ...]
    in_dim: int
    out_dim: int
    name: str | None = None

    def __post_init__(self):
        ops = tuple(np.array(a, dtype=complex) for a in self.operators)
        if not ops:
            raise InvariantViolation("a channel needs at least one Kraus operator")
        for a in ops:
            if a.shape != (self.out_dim, self.in_dim):
                raise InvariantViolation(
                    f"Kraus operator has shape {a.shape}, expected {(self.out_dim, self.in_dim)}"
                )
            a.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @classmethod
    def from_operators(cls, operators: Sequence[np.ndarray], name: str | None = None) -> KrausChannel:
        ops = [np.atleast_2d(np.asarray(a, dtype=complex)) for a in operators]
        out_dim, in_dim = ops[0].shape
        return cls(tuple(ops), in_dim, out_dim, name)

    @property
    def stack(self) -> np.ndarray:
        """Operators as an array of shape (n, out_dim, in_dim)."""
        return np.stack(self.operators)

    def __len__(self) -> int:
        return len(self.operators)

    def completeness_deviation(self) -> float:
        s = np.einsum("kji,kjl->il", self.stack.conj(), self.stack)
        return float(np.linalg.norm(s - np.eye(self.in_dim), 2))


@dataclass(frozen=True, eq=False)
class UnitaryDilation:
    joint_unitary: np.ndarray
    sys_dim: int
    env_dim: int
    env_init: int = 0
    env_basis: np.ndarray | None = None  # columns; standard basis when None

    def __post_init__(self):
        d = self.sys_dim * self.env_dim
        if self.joint_unitary.shape != (d, d) or not is_unitary(self.joint_unitary):
            raise InvariantViolation("joint_unitary is not a unitary on system x environment")
        basis = np.eye(self.env_dim, dtype=complex) if self.env_basis is None else self.env_basis
        _check_basis(basis, self.env_dim)
        object.__setattr__(self, "env_basis", basis)


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    matrix: np.ndarray
    in_dim: int
    out_dim: int


def _check_basis(basis: np.ndarray, dim: int) -> None:
    basis = np.asarray(basis)
    if basis.shape != (dim, dim):
        raise InvariantViolation(f"environment basis must be {dim} vectors of length {dim}")
    dev = float(np.max(np.abs(basis.conj().T @ basis - np.eye(dim))))
    if dev > 1e-9:
        raise InvariantViolation(f"environment basis is not orthonormal (deviation {dev:.3e})", dev)


def validate(channel: KrausChannel) -> None:
    dev = channel.completeness_deviation()
    if dev > COMPLETENESS_TOL:
        raise CompletenessViolation(
            f"sum_k A_k^dag A_k deviates from identity by {dev:.3e} (operator norm)", dev
        )


def choi(channel: KrausChannel) -> ChoiMatrix:
    """J = sum_ij |i><j| (x) E(|i><j|), input factor first."""
    vecs = np.stack([a.T.reshape(-1) for a in channel.operators])
    return ChoiMatrix(vecs.T @ vecs.conj(), channel.in_dim, channel.out_dim)


def choi_distance(a: KrausChannel, b: KrausChannel) -> float:
    if (a.in_dim, a.out_dim) != (b.in_dim, b.out_dim):
        return float("inf")
    return float(np.max(np.abs(choi(a).matrix - choi(b).matrix)))


def channels_equal(a: KrausChannel, b: KrausChannel, tol: float = CHANNEL_EQ_TOL) -> bool:
    return choi_distance(a, b) < tol


def _output_shape(channel: KrausChannel, shape: SystemShape) -> SystemShape:
    if channel.out_dim == channel.in_dim:
        return shape
    return SystemShape.single(channel.out_dim, "".join(shape.labels))


def apply_matrix(channel: KrausChannel, m: np.ndarray) -> np.ndarray:
    a = channel.stack
    return np.einsum("koi,ij,kpj->op", a, m, a.conj())


def apply(channel: KrausChannel, rho: DensityMatrix) -> DensityMatrix:
    if rho.dim != channel.in_dim:
        raise ValueError(f"state dimension {rho.dim} != channel input dimension {channel.in_dim}")
    return DensityMatrix(apply_matrix(channel, rho.matrix), _output_shape(channel, rho.shape))


def apply_extended(channel: KrausChannel, joint: DensityMatrix, target: str) -> DensityMatrix:
    """(I (x) E)(joint) with the channel acting on subsystem ``target``."""
    shape = joint.shape
    t = shape.index(target)
    if shape.dims[t] != channel.in_dim:
        raise ValueError(
            f"subsystem {target!r} has dimension {shape.dims[t]}, channel expects {channel.in_dim}"
        )
    pre = int(np.prod(shape.dims[:t]))
    post = int(np.prod(shape.dims[t + 1:]))
    x = joint.matrix.reshape(pre, channel.in_dim, post, pre, channel.in_dim, post)
    a = channel.stack
    y = np.einsum("koi,aibcjd,kpj->aobcpd", a, x, a.conj(), optimize=True)
    n = pre * channel.out_dim * post
    dims = list(shape.dims)
    dims[t] = channel.out_dim
    return DensityMatrix(y.reshape(n, n), SystemShape(tuple(dims), shape.labels))


def compose(second: KrausChannel, first: KrausChannel) -> KrausChannel:
    """The channel ``second o first``."""
    if first.out_dim != second.in_dim:
        raise ValueError("dimension mismatch in composition")
    return KrausChannel.from_operators([b @ a for b in second.operators for a in first.operators])


def trim(channel: KrausChannel, tol: float = ZERO_OP_TOL) -> KrausChannel:
    ops = [a for a in channel.operators if np.linalg.norm(a) >= tol]
    if not ops:
        raise InvariantViolation("every Kraus operator is zero")
    return KrausChannel(tuple(ops), channel.in_dim, channel.out_dim, channel.name)


def pad(channel: KrausChannel, m: int) -> np.ndarray:
    """Operator stack padded with zero operators to length ``m``."""
    a = channel.stack
    if m < len(a):
        raise ValueError(f"cannot pad {len(a)} operators down to {m}")
    out = np.zeros((m,) + a.shape[1:], dtype=complex)
    out[: len(a)] = a
    return out


def mix_representation(channel: KrausChannel, v: np.ndarray) -> KrausChannel:
    """B_k = sum_l V_kl A_l, padding the Kraus list with zeros up to V's size."""
    v = np.asarray(v, dtype=complex)
    if not is_unitary(v):
        raise InvariantViolation("mixing matrix is not unitary within 1e-9")
    b = np.einsum("kl,lij->kij", v, pad(channel, v.shape[0]))
    return KrausChannel(tuple(b), channel.in_dim, channel.out_dim, channel.name)


def _complete_columns(fixed: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a unitary by Gram-Schmidt over the standard basis."""
    d = fixed.shape[0]
    cols = [fixed[:, j] for j in range(fixed.shape[1])]
    for i in range(d):
        if len(cols) == d:
            break
        v = np.zeros(d, dtype=complex)
        v[i] = 1.0
        for _ in range(2):
            for c in cols:
                v = v - np.vdot(c, v) * c
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            cols.append(v / nv)
    return np.stack(cols, axis=1)


def dilate(channel: KrausChannel) -> UnitaryDilation:
    """Joint unitary with U|psi>|0> = sum_k (A_k|psi>)|k>, zero operators trimmed."""
    ch = trim(channel)
    if ch.in_dim != ch.out_dim:
        raise ValueError("a unitary dilation needs equal input and output dimensions")
    d, n = ch.in_dim, len(ch)
    a = ch.stack
    u = np.zeros((d * n, d * n), dtype=complex)
    # column (q, 0) holds sum_k A_k|q> (x) |k>, row index (q', k)
    fixed_cols = [q * n for q in range(d)]
    u[:, fixed_cols] = np.transpose(a, (1, 0, 2)).reshape(d * n, d)
    rest = [c for c in range(d * n) if c not in fixed_cols]
    if rest:
        full = _complete_columns(u[:, fixed_cols])
        u[:, rest] = full[:, d:]
    return UnitaryDilation(u, d, n, 0, np.eye(n, dtype=complex))


def kraus_from_dilation(d: UnitaryDilation, basis: np.ndarray | None = None) -> KrausChannel:
    """A_k |psi> = <k_E| U |psi, 0_E> for the environment basis columns ``basis``."""
    basis = d.env_basis if basis is None else np.asarray(basis, dtype=complex)
    _check_basis(basis, d.env_dim)
    q, n = d.sys_dim, d.env_dim
    cols = d.joint_unitary.reshape(q, n, q, n)[:, :, :, d.env_init]  # (q', e, q)
    ops = np.einsum("ek,oei->koi", basis.conj(), cols)
    return KrausChannel(tuple(ops), q, q)


def complementary(channel: KrausChannel) -> KrausChannel:
    """Channel to the environment: (F_j)_{k,i} = (A_k)_{j,i}."""
    a = channel.stack
    return KrausChannel(tuple(np.transpose(a, (1, 0, 2))), channel.in_dim, len(a))


def output_ensemble(channel: KrausChannel, rho: DensityMatrix,
                    cutoff: float = ENSEMBLE_CUTOFF) -> Ensemble:
    shape = _output_shape(channel, rho.shape)
    weights, states = [], []
    for a in channel.operators:
        m = a @ rho.matrix @ a.conj().T
        p = float(np.trace(m).real)
        if p < cutoff:
            continue
        weights.append(p)
        states.append(DensityMatrix(hermitian_part(m) / p, shape))
    w = np.array(weights)
    return Ensemble(w / w.sum(), tuple(states))


def identity_channel(dim: int) -> KrausChannel:
    return KrausChannel((np.eye(dim, dtype=complex),), dim, dim, "identity")


def unitary_channel(u: np.ndarray) -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    return KrausChannel((u,), u.shape[1], u.shape[0], "unitary")
