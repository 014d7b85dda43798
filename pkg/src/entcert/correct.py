"""Perfect-correctability certificates and explicit recovery maps.

Inputs are pure states of two subsystems: a reference (left untouched) and a
target on which the channel acts.  By default the target is the last label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import channel as ch
from .errors import CertificationDiscrepancy, NotCorrectable
from .linalg import (
    DensityMatrix,
    PureState,
    SystemShape,
    eigen_decomposition,
    hermitian_part,
    mutual_information,
    partial_trace,
    psd_sqrt,
    schmidt,
    vn_entropy,
)
from .measures import eof_mixed
from .optimize import OptimizerConfig, minimize_isometry

DEFAULT_TOL = 1e-7
PRODUCT_TOL_FACTOR = 10.0
EOF_GAP_TOL = 1e-4
RANK_CUTOFF = 1e-10
ENTROPY_NOISE = 1e-12
ORTHONORMALITY_TOL = 1e-7


class Method(str, Enum):
    SCHMIDT_BLOCK = "schmidt_block"
    PETZ = "petz"
    OPTIMIZED = "optimized"


@dataclass(frozen=True)
class Certificate:
    """``correctable`` follows the coherent-information gap alone.

    ``eof_value`` (an upper bound), ``re_mutual_info`` between reference and
    environment, and ``kl_residual`` are corroborating evidence.
    """

    s_q: float
    coherent_info: float
    eof_value: float | None
    eof_converged: bool | None
    re_mutual_info: float
    kl_residual: float
    correctable: bool
    tolerance: float


@dataclass(frozen=True, eq=False)
class RecoveryMap:
    channel: ch.KrausChannel
    method: Method


@dataclass(frozen=True)
class ApproxReport:
    epsilon: float
    fidelity_bound: float
    achieved_fidelity: float
    method: Method
    bound_met: bool


def _roles(input: PureState, target: str | None) -> tuple[str, str]:
    labels = input.shape.labels
    if len(labels) != 2:
        raise ValueError(f"input must have exactly two subsystems, got {labels}")
    target = labels[1] if target is None else target
    if target not in labels:
        raise KeyError(f"unknown target label {target!r}")
    ref = labels[0] if labels[1] == target else labels[1]
    return ref, target


def _env_label(*taken: str) -> str:
    label = "E"
    while label in taken:
        label += "'"
    return label


def _check_dims(channel: ch.KrausChannel, input: PureState, target: str) -> None:
    d = input.shape.dim(target)
    if d != channel.in_dim:
        raise ValueError(f"subsystem {target!r} has dimension {d}, channel expects {channel.in_dim}")


def tripartite_output(channel: ch.KrausChannel, input: PureState,
                      target: str | None = None) -> tuple[np.ndarray, str, str]:
    """Amplitudes of |Psi'^{RQE}> as an array (d_R, d_Q', d_E), via the unitary dilation."""
    ref, target = _roles(input, target)
    _check_dims(channel, input, target)
    psi = input.reorder((ref, target)).amplitudes.reshape(input.shape.dim(ref), -1)
    trimmed = ch.trim(channel)
    if trimmed.in_dim == trimmed.out_dim:
        d = ch.dilate(trimmed)
        n = d.env_dim
        joint = np.zeros((psi.shape[0], d.sys_dim * n), dtype=complex)
        joint[:, ::n] = psi  # |Psi> (x) |0_E>
        out = joint @ d.joint_unitary.T
        t = out.reshape(psi.shape[0], d.sys_dim, n)
    else:
        t = np.einsum("koi,ri->rok", trimmed.stack, psi)
    return t, ref, target


def re_output(channel: ch.KrausChannel, input: PureState, target: str | None = None) -> DensityMatrix:
    """Joint output state of reference and environment."""
    t, ref, target = tripartite_output(channel, input, target)
    dr, _, de = t.shape
    m = np.einsum("rqe,sqf->resf", t, t.conj()).reshape(dr * de, dr * de)
    return DensityMatrix(m, SystemShape((dr, de), (ref, _env_label(ref, target))))


def knill_laflamme_residual(channel: ch.KrausChannel, rho_q: DensityMatrix) -> float:
    """max_{jk} || P A_j^dag A_k P - lambda_jk P || over the support projector P of rho_q."""
    _, basis = eigen_decomposition(rho_q, RANK_CUTOFF)
    a = ch.trim(channel).stack @ basis
    c = np.einsum("jqa,kqb->jkab", a.conj(), a)
    s = basis.shape[1]
    lam = np.trace(c, axis1=2, axis2=3) / s
    dev = c - lam[:, :, None, None] * np.eye(s)
    return float(max(np.linalg.norm(dev[j, k], 2) for j in range(len(a)) for k in range(len(a))))


def certify(channel: ch.KrausChannel, input: PureState, tol: float = DEFAULT_TOL,
            cfg: OptimizerConfig = OptimizerConfig(), target: str | None = None,
            skip_eof: bool = False, strict: bool = True) -> Certificate:
    """Decide perfect correctability from the coherent-information gap.

    Independent corroborating tests are computed alongside (see Certificate);
    with ``strict`` any disagreement raises CertificationDiscrepancy.
    """
    ref, target = _roles(input, target)
    _check_dims(channel, input, target)
    rho_q = partial_trace(input, target)
    s_q = vn_entropy(rho_q)
    out = ch.apply_extended(channel, input.density(), target)
    info = vn_entropy(partial_trace(out, target)) - vn_entropy(out)
    eof_value = eof_conv = None
    if not skip_eof:
        res = eof_mixed(out, ref, cfg)
        eof_value, eof_conv = res.value, res.converged
    re_mi = mutual_information(re_output(channel, input, target), ref)
    kl = knill_laflamme_residual(channel, rho_q)
    cert = Certificate(s_q, info, eof_value, eof_conv, re_mi, kl, s_q - info < tol, tol)
    if strict:
        _check_consistency(cert)
    return cert


def _check_consistency(cert: Certificate) -> None:
    flags = {
        "coherent-information gap": cert.correctable,
        "reference-environment product test": cert.re_mutual_info < PRODUCT_TOL_FACTOR * cert.tolerance,
        "Knill-Laflamme residual": cert.kl_residual < cert.tolerance,
    }
    if len(set(flags.values())) > 1:
        detail = ", ".join(f"{k}={v}" for k, v in flags.items())
        raise CertificationDiscrepancy(f"correctability tests disagree: {detail}")
    if cert.eof_value is not None:
        if cert.eof_value < cert.coherent_info - 1e-6:
            raise CertificationDiscrepancy(
                f"entanglement of formation {cert.eof_value:.9f} below coherent information "
                f"{cert.coherent_info:.9f}"
            )
        if cert.correctable and cert.s_q - cert.eof_value > EOF_GAP_TOL:
            raise CertificationDiscrepancy(
                f"correctable by the coherent-information test but S^Q - E = "
                f"{cert.s_q - cert.eof_value:.3e}"
            )


def _completing_terms(deficit: np.ndarray, targets: np.ndarray) -> list[np.ndarray]:
    """Kraus terms C_t with sum_t C_t^dag C_t = deficit, mapping into ``targets`` columns."""
    w, v = np.linalg.eigh(hermitian_part(deficit))
    keep = w > 1e-12
    w, v = w[keep], v[:, keep]
    out_dim = targets.shape[0]
    terms = []
    for start in range(0, len(w), out_dim):
        chunk = slice(start, start + out_dim)
        k = len(w[chunk])
        terms.append(targets[:, :k] @ (np.sqrt(w[chunk])[:, None] * v[:, chunk].conj().T))
    return terms


def _full_basis(first: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of C^dim whose leading columns span ``first``."""
    if first.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    q, _ = np.linalg.qr(np.concatenate([first, np.eye(dim, dtype=complex)], axis=1))
    q[:, : first.shape[1]] = first
    return q


def synthesize_recovery(channel: ch.KrausChannel, input: PureState,
                        target: str | None = None) -> RecoveryMap:
    """Recovery built from the reference-environment product structure.

    With rho^{R'} = sum_i r_i |r_i><r_i| (the input's own Schmidt basis) and
    sigma^{E'} = sum_j s_j |e_j><e_j|, the vectors
    q_ij = (<r_i| (x) 1 (x) <e_j|) |Psi'> / sqrt(r_i s_j) are orthonormal exactly
    when the output of R and E is a product.  Block j of the recovery sends
    q_ij to the Schmidt partner q_i^0 of |r_i> in the input.
    """
    t, ref, target = tripartite_output(channel, input, target)
    sd = schmidt(input.reorder((ref, target)), ref)
    keep = sd.coefficients ** 2 > RANK_CUTOFF
    r_vals = sd.coefficients[keep] ** 2
    r_vecs = sd.left_basis[:, keep]
    q0 = sd.right_basis[:, keep]
    sigma_e = np.einsum("rqe,rqf->ef", t, t.conj())
    s_vals, e_vecs = np.linalg.eigh(hermitian_part(sigma_e))
    order = np.argsort(s_vals)[::-1]
    s_vals, e_vecs = s_vals[order], e_vecs[:, order]
    sel = s_vals > RANK_CUTOFF
    s_vals, e_vecs = s_vals[sel], e_vecs[:, sel]

    q = np.einsum("ri,rqe,ej->qij", r_vecs.conj(), t, e_vecs.conj())
    q = q / np.sqrt(np.outer(r_vals, s_vals))[None]
    d_out = t.shape[1]
    flat = q.reshape(d_out, -1)
    dev = float(np.max(np.abs(flat.conj().T @ flat - np.eye(flat.shape[1]))))
    if dev > ORTHONORMALITY_TOL:
        raise NotCorrectable(
            f"relative states q_ij are not orthonormal (deviation {dev:.3e}); "
            "reference and environment are correlated"
        )
    blocks = [q0 @ q[:, :, j].conj().T for j in range(len(s_vals))]
    d_in = channel.in_dim
    covered = sum(b.conj().T @ b for b in blocks)
    blocks += _completing_terms(np.eye(d_out) - covered, _full_basis(q0, d_in))
    rec = ch.KrausChannel(tuple(blocks), d_out, d_in, "schmidt_block_recovery")
    ch.validate(rec)
    return RecoveryMap(rec, Method.SCHMIDT_BLOCK)


def petz_recovery(channel: ch.KrausChannel, rho_q: DensityMatrix) -> RecoveryMap:
    """Kraus terms rho^{1/2} A_k^dag sigma^{-1/2}, sigma = E(rho), completed on ker(sigma)."""
    sigma = ch.apply_matrix(channel, rho_q.matrix)
    w, v = np.linalg.eigh(hermitian_part(sigma))
    sup = w > RANK_CUTOFF * max(1.0, w.max())
    inv_sqrt = (v[:, sup] / np.sqrt(w[sup])) @ v[:, sup].conj().T
    root = psd_sqrt(rho_q.matrix)
    ops = [root @ a.conj().T @ inv_sqrt for a in ch.trim(channel).operators]
    ops = [k for k in ops if np.linalg.norm(k) > ch.ZERO_OP_TOL]
    covered = sum(k.conj().T @ k for k in ops)
    ops += _completing_terms(np.eye(channel.out_dim) - covered, np.eye(channel.in_dim, dtype=complex))
    rec = ch.KrausChannel(tuple(ops), channel.out_dim, channel.in_dim, "petz_recovery")
    ch.validate(rec)
    return RecoveryMap(rec, Method.PETZ)


def verify_recovery(channel: ch.KrausChannel, recovery: RecoveryMap | ch.KrausChannel,
                    input: PureState, target: str | None = None) -> float:
    """Entanglement fidelity <Psi| (I (x) D o E)(|Psi><Psi|) |Psi>."""
    _, target = _roles(input, target)
    rec = recovery.channel if isinstance(recovery, RecoveryMap) else recovery
    if rec.in_dim != channel.out_dim or rec.out_dim != channel.in_dim:
        raise ValueError("recovery dimensions do not invert the channel's")
    out = ch.apply_extended(channel, input.density(), target)
    back = ch.apply_extended(rec, out, target)
    psi = input.amplitudes
    return float(min(1.0, max(0.0, np.vdot(psi, back.matrix @ psi).real)))


def _fidelity_objective(channel: ch.KrausChannel, input: PureState, target: str, d_q: int):
    ref = _roles(input, target)[0]
    psi = input.reorder((ref, target)).amplitudes.reshape(input.shape.dim(ref), -1)
    out = ch.apply_extended(channel, input.reorder((ref, target)).density(), target)
    w, v = eigen_decomposition(out)
    vecs = (np.sqrt(w)[None, :] * v).T.reshape(len(w), psi.shape[0], -1)
    y = np.einsum("rq,arp->aqp", psi.conj(), vecs)

    def objective(u):
        k = u.reshape(-1, d_q, u.shape[1])
        c = np.einsum("tqp,aqp->ta", k, y)
        grad = -np.einsum("ta,aqp->tqp", c, y.conj())
        return -float(np.sum(np.abs(c) ** 2)), grad.reshape(u.shape)

    return objective


def optimized_recovery(channel: ch.KrausChannel, input: PureState, cfg: OptimizerConfig = OptimizerConfig(),
                       target: str | None = None,
                       warm: list[RecoveryMap] = ()) -> tuple[RecoveryMap, float]:
    """Search recovery Stinespring isometries for the best entanglement fidelity."""
    _, target = _roles(input, target)
    d_q, d_out = channel.in_dim, channel.out_dim
    n_ops = d_q * d_out if d_q * d_out <= 16 else max([math.ceil(d_out / d_q)] + [len(w.channel) for w in warm])
    starts = []
    for w in warm:
        if len(w.channel) <= n_ops:
            starts.append(ch.pad(w.channel, n_ops).reshape(n_ops * d_q, d_out))
    res = minimize_isometry(_fidelity_objective(channel, input, target, d_q), n_ops * d_q, d_out,
                            cfg, warm_starts=starts)
    k = res.isometry.reshape(n_ops, d_q, d_out)
    rec = ch.trim(ch.KrausChannel(tuple(k), d_out, d_q, "optimized_recovery"))
    return RecoveryMap(rec, Method.OPTIMIZED), -res.value


def approx_report(channel: ch.KrausChannel, input: PureState, cfg: OptimizerConfig = OptimizerConfig(),
                  target: str | None = None, tol: float = DEFAULT_TOL) -> ApproxReport:
    """Coherent-information loss together with the best recovery fidelity found for it."""
    ref, target = _roles(input, target)
    _check_dims(channel, input, target)
    rho_q = partial_trace(input, target)
    out = ch.apply_extended(channel, input.density(), target)
    eps = vn_entropy(rho_q) - (vn_entropy(partial_trace(out, target)) - vn_entropy(out))
    # entropy roundoff is ~1e-15 bits, and its square root would otherwise dent the bound
    bound = max(0.0, 1.0 - 2.0 * math.sqrt(eps if eps > ENTROPY_NOISE else 0.0))
    candidates = [petz_recovery(channel, rho_q)]
    if eps < tol:
        try:
            candidates.append(synthesize_recovery(channel, input, target))
        except NotCorrectable:
            pass
    scored = [(verify_recovery(channel, c, input, target), c.method) for c in candidates]
    best_f, best_m = max(scored, key=lambda s: s[0])
    if best_f < 1.0 - 1e-12:
        rec, f_opt = optimized_recovery(channel, input, cfg, target, warm=candidates)
        f_opt = verify_recovery(channel, rec, input, target)
        if f_opt > best_f:
            best_f, best_m = f_opt, rec.method
    return ApproxReport(eps, bound, best_f, best_m, best_f >= bound)


def apply_local(channel_r: ch.KrausChannel, channel_q: ch.KrausChannel, rho: DensityMatrix,
                order: str = "rq") -> DensityMatrix:
    """(E^R (x) E^Q)(rho) for a two-subsystem state, applying the factors in ``order``."""
    r_lab, q_lab = rho.shape.labels
    steps = {"r": (channel_r, r_lab), "q": (channel_q, q_lab)}
    for key in order:
        c, lab = steps[key]
        rho = ch.apply_extended(c, rho, lab)
    return rho


def certify_local(channel_r: ch.KrausChannel, channel_q: ch.KrausChannel, input: PureState,
                  tol: float = DEFAULT_TOL, cfg: OptimizerConfig = OptimizerConfig(),
                  skip_eof: bool = False, strict: bool = True) -> Certificate:
    """Two-sided local noise: correctable iff each single-sided stage is.

    ``coherent_info`` is the smaller of the two stage values, ``re_mutual_info``
    and ``kl_residual`` the larger; ``eof_value`` is computed on the full
    two-sided output.
    """
    r_lab, q_lab = input.shape.labels
    stage_q = certify(channel_q, input, tol, cfg, target=q_lab, skip_eof=True, strict=strict)
    stage_r = certify(channel_r, input, tol, cfg, target=r_lab, skip_eof=True, strict=strict)
    eof_value = eof_conv = None
    if not skip_eof:
        res = eof_mixed(apply_local(channel_r, channel_q, input.density()), r_lab, cfg)
        eof_value, eof_conv = res.value, res.converged
    return Certificate(
        s_q=stage_q.s_q,
        coherent_info=min(stage_q.coherent_info, stage_r.coherent_info),
        eof_value=eof_value,
        eof_converged=eof_conv,
        re_mutual_info=max(stage_q.re_mutual_info, stage_r.re_mutual_info),
        kl_residual=max(stage_q.kl_residual, stage_r.kl_residual),
        correctable=stage_q.correctable and stage_r.correctable,
        tolerance=tol,
    )


def local_fidelity(channel_r, channel_q, rec_r: RecoveryMap, rec_q: RecoveryMap,
                   input: PureState) -> float:
    noisy = apply_local(channel_r, channel_q, input.density())
    back = apply_local(rec_r.channel, rec_q.channel, noisy)
    psi = input.amplitudes
    return float(min(1.0, max(0.0, np.vdot(psi, back.matrix @ psi).real)))


def recover_local(channel_r: ch.KrausChannel, channel_q: ch.KrausChannel,
                  input: PureState) -> tuple[RecoveryMap, RecoveryMap]:
    """Independent recoveries (D^R, D^Q); D^R (x) D^Q undoes E^R (x) E^Q without communication."""
    r_lab, q_lab = input.shape.labels
    rec_q = synthesize_recovery(channel_q, input, target=q_lab)
    rec_r = synthesize_recovery(channel_r, input, target=r_lab)
    f = local_fidelity(channel_r, channel_q, rec_r, rec_q, input)
    if f < 1 - 1e-8:
        raise NotCorrectable(f"composed local recovery reaches fidelity {f:.12f} only")
    return rec_r, rec_q
