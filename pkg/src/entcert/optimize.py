"""Minimization over isometries via the exponential map of the unitary group.

Each restart fixes a base unitary ``W0`` and searches ``W = W0 @ expm(K)``
over anti-Hermitian generators ``K``; the isometry handed to the objective is
the first ``r`` columns of ``W``.  Objectives return their value together with
the Wirtinger gradient ``dF/d conj(U)``; the gradient with respect to the
generator is pulled back through the exact Frechet derivative of ``expm``
(one Hermitian eigendecomposition per evaluation), then L-BFGS does the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .sampling import random_unitary

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 16
    max_iter: int = 3000
    stall_iters: int = 50
    stall_tol: float = 1e-9
    agreement_tol: float = 1e-5
    seed: int = 0


@dataclass(frozen=True, eq=False)
class IsometryResult:
    value: float
    isometry: np.ndarray
    restarts_used: int
    converged: bool
    start_values: list[float] = field(default_factory=list)


def _generator(theta: np.ndarray, m: int) -> np.ndarray:
    t = theta.reshape(m, m)
    up = np.triu(t, 1)
    lo = np.tril(t, -1)
    return (up - up.T) + 1j * (lo + lo.T) + 1j * np.diag(np.diag(t))


def _generator_grad(h: np.ndarray) -> np.ndarray:
    """Real gradient w.r.t. theta given dF = 2 Re <H, dK>."""
    g = np.empty(h.shape, dtype=float)
    s = h - h.T
    a = h + h.T
    iu = np.triu_indices(h.shape[0], 1)
    g[iu] = 2 * s[iu].real
    g[(iu[1], iu[0])] = 2 * a[iu].imag
    g[np.diag_indices(h.shape[0])] = 2 * np.diag(h).imag
    return g.reshape(-1)


def expm_with_adjoint(k: np.ndarray) -> tuple[np.ndarray, Callable[[np.ndarray], np.ndarray]]:
    """expm(K) for anti-Hermitian K and the adjoint of its Frechet derivative."""
    w, v = np.linalg.eigh(-1j * k)
    e = np.exp(1j * w)
    ek = (v * e) @ v.conj().T
    diff = w[:, None] - w[None, :]
    phi = np.exp(0.5j * (w[:, None] + w[None, :])) * np.sinc(diff / (2 * np.pi))

    def adjoint(y: np.ndarray) -> np.ndarray:
        return v @ (phi.conj() * (v.conj().T @ y @ v)) @ v.conj().T

    return ek, adjoint


def complete_to_unitary(iso: np.ndarray) -> np.ndarray:
    """A unitary whose leading columns are (the orthonormalized) ``iso``."""
    m, r = iso.shape
    q, rr = np.linalg.qr(np.concatenate([iso, np.eye(m, dtype=complex)], axis=1))
    phases = np.diag(rr)[:r]
    q[:, :r] *= np.where(np.abs(phases) > 0, phases / np.abs(phases), 1.0)
    return q


def _run_start(objective: Objective, w0: np.ndarray, r: int, cfg: OptimizerConfig):
    m = w0.shape[0]

    def fun(theta):
        ek, adjoint = expm_with_adjoint(_generator(theta, m))
        w = w0 @ ek
        f, gamma = objective(w[:, :r])
        full = np.zeros((m, m), dtype=complex)
        full[:, :r] = gamma
        h = adjoint(w0.conj().T @ full)
        return f, _generator_grad(h)

    history: list[float] = []
    best = [np.inf, np.zeros(m * m)]

    def tracked(theta):
        f, g = fun(theta)
        if f < best[0]:
            best[0], best[1] = f, theta.copy()
        return f, g

    def callback(intermediate_result):
        history.append(best[0])
        if len(history) > cfg.stall_iters and history[-cfg.stall_iters - 1] - history[-1] < cfg.stall_tol:
            raise StopIteration

    minimize(tracked, np.zeros(m * m), jac=True, method="L-BFGS-B", callback=callback,
             options={"maxiter": cfg.max_iter, "ftol": 1e-15, "gtol": 1e-12, "maxcor": 30})
    w = w0 @ expm_with_adjoint(_generator(best[1], m))[0]
    iso = w[:, :r]
    return float(objective(iso)[0]), iso


def minimize_isometry(objective: Objective, m: int, r: int, cfg: OptimizerConfig,
                      warm_starts: Sequence[np.ndarray] = ()) -> IsometryResult:
    """Minimize ``objective`` over m x r isometries.

    Runs one local search per warm start plus ``cfg.restarts`` Haar-random
    starts.  The reported value is attained by the returned isometry, so it is
    an upper bound on the global minimum.  ``converged`` means at least two
    independent starts landed within ``cfg.agreement_tol`` of the best value.
    """
    if r > m:
        raise ValueError("isometry needs r <= m")
    rng = np.random.default_rng(cfg.seed)
    starts = [complete_to_unitary(np.asarray(w, dtype=complex)) for w in warm_starts]
    starts += [random_unitary(m, rng) for _ in range(cfg.restarts)]
    if m == 1:
        starts = starts[:1] or [np.eye(1, dtype=complex)]
    values, isos = [], []
    for w0 in starts:
        f, iso = _run_start(objective, w0, r, cfg)
        values.append(f)
        isos.append(iso)
    best = int(np.argmin(values))
    agree = sum(v <= values[best] + cfg.agreement_tol for v in values)
    converged = agree >= 2 or len(values) == 1
    return IsometryResult(values[best], isos[best], len(values), converged, values)
