"""Coherent information and entanglement of formation.

Minimizations over ensembles (or, equivalently, over operator-sum
representations) are parametrized by isometries ``U``: given spanning vectors
``phi_i`` of the state's support, the ensemble members are
``psi_k = sum_i U_ki phi_i`` with weight ``|psi_k|^2``.  Every isometry gives a
valid ensemble, so every reported minimum is attained by an explicit ensemble
and is an upper bound on the true minimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import channel as ch
from .errors import InfeasibleEnsemble, InvariantViolation
from .linalg import (
    DensityMatrix,
    Ensemble,
    PureState,
    SystemShape,
    binary_entropy,
    eigen_decomposition,
    hermitian_part,
    partial_trace,
    psd_sqrt,
    purify,
    vn_entropy,
)
from .optimize import OptimizerConfig, complete_to_unitary, minimize_isometry

LN2 = np.log(2.0)
_TINY = 1e-300

__all__ = [
    "Ensemble",
    "MeasureResult",
    "OptimizerConfig",
    "Povm",
    "coherent_information",
    "coherent_information_intrinsic",
    "coherent_information_parts",
    "concurrence_2q",
    "concurrence_eof_2q",
    "eof_intrinsic",
    "eof_mixed",
    "eof_pure",
    "hjw_ensemble",
    "hjw_measurement",
]


@dataclass(frozen=True, eq=False)
class MeasureResult:
    value: float
    argmin: np.ndarray  # mixing isometry/unitary at the reported point
    restarts_used: int
    converged: bool
    ensemble_size: int
    ensemble: Ensemble | None = None


@dataclass(frozen=True, eq=False)
class Povm:
    elements: tuple[np.ndarray, ...]

    def __post_init__(self):
        els = tuple(np.asarray(e, dtype=complex) for e in self.elements)
        if not els:
            raise InvariantViolation("a POVM needs at least one element")
        d = els[0].shape[0]
        for e in els:
            if e.shape != (d, d):
                raise InvariantViolation("POVM elements must be square and share a dimension")
            if np.max(np.abs(e - e.conj().T)) > 1e-10 or np.linalg.eigvalsh(hermitian_part(e))[0] < -1e-10:
                raise InvariantViolation("POVM element is not positive semidefinite")
        dev = float(np.max(np.abs(sum(els) - np.eye(d))))
        if dev > 1e-9:
            raise InvariantViolation(f"POVM elements sum to identity + {dev:.3e}", dev)
        object.__setattr__(self, "elements", els)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]


def _as_single(rho: DensityMatrix, label: str = "Q") -> DensityMatrix:
    return DensityMatrix(rho.matrix, SystemShape.single(rho.dim, label))


def coherent_information_parts(channel: ch.KrausChannel, rho_q: DensityMatrix) -> tuple[float, float]:
    """(S^{Q'}, S^{RQ'}) for the channel acting on half of a purification of rho_q."""
    if rho_q.dim != channel.in_dim:
        raise ValueError(f"state dimension {rho_q.dim} != channel input dimension {channel.in_dim}")
    rq = purify(_as_single(rho_q), "R")
    out = ch.apply_extended(channel, rq.density(), "Q")
    return vn_entropy(partial_trace(out, "Q")), vn_entropy(out)


def coherent_information(channel: ch.KrausChannel, rho_q: DensityMatrix) -> float:
    s_q, s_rq = coherent_information_parts(channel, rho_q)
    return s_q - s_rq


def coherent_information_intrinsic(channel: ch.KrausChannel, rho_q: DensityMatrix,
                                   cfg: OptimizerConfig = OptimizerConfig()) -> MeasureResult:
    """S^{Q'} minus the smallest Shannon entropy of Kraus weights over representations.

    Since the minimized entropy is an upper bound, the returned value is a
    lower bound on I.
    """
    if rho_q.dim != channel.in_dim:
        raise ValueError(f"state dimension {rho_q.dim} != channel input dimension {channel.in_dim}")
    a = ch.trim(channel).stack
    s_out = vn_entropy(ch.apply_matrix(channel, rho_q.matrix))
    n = len(a)
    # weight Gram matrix: diag(U lam U^dag) are the Kraus weights of the mixed representation
    lam = hermitian_part(np.einsum("koi,ij,loj->kl", a, rho_q.matrix, a.conj()))

    def objective(u):
        p = np.einsum("ki,ij,kj->k", u, lam, u.conj()).real
        pc = np.clip(p, _TINY, None)
        f = float(-np.sum(p * np.log(pc))) / LN2
        dh = -(np.log(pc) + 1.0) / LN2
        return f, dh[:, None] * (u @ lam)

    w, v = np.linalg.eigh(lam)
    res = minimize_isometry(objective, n, n, cfg, warm_starts=[v.conj().T])
    return MeasureResult(s_out - res.value, res.isometry, res.restarts_used, res.converged, n)


def _average_entropy_objective(phis: np.ndarray):
    """f(U) = sum_k p_k S(sigma_k / p_k) with sigma_k = M_k M_k^dag, M_k = sum_i U_ki phi_i."""

    def objective(u):
        m = np.einsum("ki,iab->kab", u, phis)
        sig = m @ np.conj(np.transpose(m, (0, 2, 1)))
        s, vecs = np.linalg.eigh(sig)
        s = np.clip(s, 0.0, None)
        p = s.sum(axis=1)
        pos = s > _TINY
        logs = np.log(np.where(pos, s, 1.0))
        logp = np.log(np.clip(p, _TINY, None))[:, None]
        f = float(np.sum(np.where(pos, s * (logp - logs), 0.0))) / LN2
        coef = np.where(pos, logp - logs, 0.0) / LN2
        gm = np.einsum("kaj,kj,kbj,kbc->kac", vecs, coef, vecs.conj(), m)
        gamma = np.einsum("iab,kab->ki", phis.conj(), gm)
        return f, gamma

    return objective


def _ensemble_from(u: np.ndarray, phis: np.ndarray, shape: SystemShape,
                   labels: tuple[str, ...]) -> Ensemble:
    vecs = np.einsum("ki,iab->kab", u, phis).reshape(u.shape[0], -1)
    p = np.sum(np.abs(vecs) ** 2, axis=1)
    keep = p > ch.ENSEMBLE_CUTOFF
    states = tuple(
        PureState.normalized(v, shape).reorder(labels).density() for v in vecs[keep]
    )
    return Ensemble(p[keep] / p[keep].sum(), states)


def eof_pure(psi: PureState, cut: str | Iterable[str]) -> float:
    return vn_entropy(partial_trace(psi, cut))


def eof_mixed(rho: DensityMatrix, cut: str | Iterable[str],
              cfg: OptimizerConfig = OptimizerConfig()) -> MeasureResult:
    """Entanglement of formation across ``cut`` (an upper bound on E).

    Ensembles are generated from the eigen-decomposition by isometries with
    rank**2 rows; the eigen-ensemble itself is the warm start.
    """
    kept, rest = rho.shape.split(cut)
    if not kept or not rest:
        raise KeyError("cut must be a nonempty proper subset of the labels")
    order = [rho.shape.labels[i] for i in kept + rest]
    work = rho.reorder(order)
    da = int(np.prod([rho.shape.dims[i] for i in kept]))
    db = work.dim // da
    w, v = eigen_decomposition(work)
    w = w / w.sum()
    r = len(w)
    phis = (np.sqrt(w)[None, :] * v).T.reshape(r, da, db)
    if r == 1:
        iso = np.eye(1, dtype=complex)
        value = vn_entropy(phis[0] @ phis[0].conj().T)
        return MeasureResult(value, iso, 1, True, 1,
                             _ensemble_from(iso, phis, work.shape, rho.shape.labels))
    m = r * r
    res = minimize_isometry(_average_entropy_objective(phis), m, r, cfg,
                            warm_starts=[np.eye(m, r, dtype=complex)])
    ens = _ensemble_from(res.isometry, phis, work.shape, rho.shape.labels)
    return MeasureResult(res.value, res.isometry, res.restarts_used, res.converged, m, ens)


def eof_intrinsic(channel: ch.KrausChannel, rho_q: DensityMatrix,
                  cfg: OptimizerConfig = OptimizerConfig()) -> MeasureResult:
    """min over operator-sum representations of sum_k p_k S(A_k rho A_k^dag / p_k).

    ``argmin`` is the full mixing unitary V, so ``mix_representation(channel, V)``
    reproduces the minimizing representation.
    """
    if rho_q.dim != channel.in_dim:
        raise ValueError(f"state dimension {rho_q.dim} != channel input dimension {channel.in_dim}")
    trimmed = ch.trim(channel)
    a = trimmed.stack
    n = len(a)
    # A_l rho^{1/2} M^dag gives A_l rho A_l^dag, so no reference system is needed
    phis = a @ psd_sqrt(rho_q.matrix)
    objective = _average_entropy_objective(phis)
    if n == 1:
        f, _ = objective(np.eye(1, dtype=complex))
        return MeasureResult(f, np.eye(1, dtype=complex), 1, True, 1)
    m = n * n
    res = minimize_isometry(objective, m, n, cfg, warm_starts=[np.eye(m, n, dtype=complex)])
    return MeasureResult(res.value, complete_to_unitary(res.isometry), res.restarts_used,
                         res.converged, m)


_SY = np.array([[0, -1j], [1j, 0]])


def concurrence_2q(rho: DensityMatrix) -> float:
    if rho.shape.dims != (2, 2):
        raise ValueError(f"two-qubit concurrence needs shape (2, 2), got {rho.shape.dims}")
    yy = np.kron(_SY, _SY)
    tilde = yy @ rho.matrix.conj() @ yy
    sr = psd_sqrt(rho.matrix)
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(hermitian_part(sr @ tilde @ sr)), 0.0, None))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_eof_2q(rho: DensityMatrix) -> float:
    """Closed-form two-qubit entanglement of formation from the concurrence."""
    c = concurrence_2q(rho)
    return binary_entropy((1 + np.sqrt(max(0.0, 1 - c * c))) / 2)


def _split_ancilla(purification: PureState, ancilla: str) -> tuple[np.ndarray, SystemShape, tuple[str, ...]]:
    labels = tuple(lab for lab in purification.shape.labels if lab != ancilla)
    if len(labels) == len(purification.shape.labels):
        raise KeyError(f"unknown ancilla label {ancilla!r}")
    psi = purification.reorder(labels + (ancilla,))
    db = purification.shape.dim(ancilla)
    mat = psi.amplitudes.reshape(-1, db)
    return mat, psi.shape.sub(range(len(labels))), labels


def hjw_ensemble(purification: PureState, ancilla: str, povm: Povm) -> Ensemble:
    """Relative states of the other subsystems for each outcome of ``povm`` on ``ancilla``."""
    mat, shape, _ = _split_ancilla(purification, ancilla)
    if povm.dim != mat.shape[1]:
        raise ValueError(f"POVM dimension {povm.dim} != ancilla dimension {mat.shape[1]}")
    weights, states = [], []
    for e in povm.elements:
        x = hermitian_part(mat @ e.T @ mat.conj().T)
        p = float(np.trace(x).real)
        if p < ch.ENSEMBLE_CUTOFF:
            continue
        weights.append(p)
        states.append(DensityMatrix(x / p, shape))
    w = np.clip(np.array(weights), 0.0, None)
    return Ensemble(w / w.sum(), tuple(states))


def hjw_measurement(purification: PureState, ancilla: str, target: Ensemble) -> Povm:
    """A POVM on ``ancilla`` whose relative-state ensemble is ``target``."""
    mat, shape, _ = _split_ancilla(purification, ancilla)
    if target.shape.dims != shape.dims:
        raise ValueError(f"target lives on {target.shape.dims}, marginal on {shape.dims}")
    marginal = mat @ mat.conj().T
    dev = float(np.max(np.abs(target.average_matrix() - marginal)))
    if dev > 1e-9:
        raise InfeasibleEnsemble(f"target ensemble misses the marginal by {dev:.3e}")
    vecs = target.pure_vectors()
    pinv = np.linalg.pinv(mat, rcond=1e-10)
    db = mat.shape[1]
    elements = []
    for p, v in zip(target.weights, vecs):
        a = pinv @ (np.sqrt(p) * v)
        elements.append(np.outer(a.conj(), a))
    # outside the support of mat^dag mat the measurement is free; fold it into one outcome
    elements[0] = elements[0] + (np.eye(db) - pinv @ mat).T
    return Povm(tuple(hermitian_part(e) for e in elements))
