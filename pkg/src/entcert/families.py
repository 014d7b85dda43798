"""Built-in noise families with their default inputs, plus seeded instance corpora."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .channel import KrausChannel, identity_channel, unitary_channel
from .linalg import PureState, SystemShape
from .sampling import random_kraus, random_pure, random_unitary

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_prob(p: float, name: str = "p") -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {p}")
    return p


def dephasing(p: float) -> KrausChannel:
    p = _check_prob(p)
    return KrausChannel((np.sqrt(1 - p) * I2, np.sqrt(p) * Z), 2, 2, f"dephasing:{p:g}")


def bitflip(p: float) -> KrausChannel:
    p = _check_prob(p)
    return KrausChannel((np.sqrt(1 - p) * I2, np.sqrt(p) * X), 2, 2, f"bitflip:{p:g}")


def depolarizing(p: float) -> KrausChannel:
    """rho -> (1 - p) rho + p I/2; p = 1 gives Pauli Kraus operators of weight 1/2 each."""
    p = _check_prob(p)
    ops = (np.sqrt(1 - 3 * p / 4) * I2, np.sqrt(p / 4) * X, np.sqrt(p / 4) * Y, np.sqrt(p / 4) * Z)
    return KrausChannel(ops, 2, 2, f"depolarizing:{p:g}")


def amplitude_damping(gamma: float) -> KrausChannel:
    g = _check_prob(gamma, "gamma")
    a0 = np.array([[1, 0], [0, np.sqrt(1 - g)]], dtype=complex)
    a1 = np.array([[0, np.sqrt(g)], [0, 0]], dtype=complex)
    return KrausChannel((a0, a1), 2, 2, f"amplitude-damping:{g:g}")


def repetition_bitflip(p: float) -> KrausChannel:
    """Bit flip on the first of three qubits: {sqrt(1-p) I, sqrt(p) X_1}."""
    p = _check_prob(p)
    x1 = np.kron(X, np.eye(4))
    return KrausChannel((np.sqrt(1 - p) * np.eye(8, dtype=complex), np.sqrt(p) * x1), 8, 8,
                        f"repetition:{p:g}")


def bell_state(labels=("R", "Q")) -> PureState:
    return PureState(np.array([1, 0, 0, 1]) / np.sqrt(2), SystemShape((2, 2), labels))


def product_state(labels=("R", "Q")) -> PureState:
    return PureState(np.array([1, 0, 0, 0]), SystemShape((2, 2), labels))


def repetition_state(labels=("R", "Q")) -> PureState:
    """(|0>|000> + |1>|111>)/sqrt(2) with R one qubit and Q three qubits."""
    psi = np.zeros(16, dtype=complex)
    psi[0] = psi[8 + 7] = 1 / np.sqrt(2)
    return PureState(psi, SystemShape((2, 8), labels))


FAMILIES: dict[str, Callable[[float], KrausChannel]] = {
    "dephasing": dephasing,
    "bitflip": bitflip,
    "depolarizing": depolarizing,
    "amplitude-damping": amplitude_damping,
}

STATES: dict[str, Callable[[], PureState]] = {
    "bell": bell_state,
    "product": product_state,
    "repetition": repetition_state,
}


@dataclass(frozen=True)
class Example:
    channel: Callable[[float], KrausChannel]
    state: str
    default_param: float | None = None


EXAMPLES: dict[str, Example] = {
    "identity": Example(lambda _: identity_channel(2), "bell"),
    "dephasing": Example(dephasing, "bell", 0.1),
    "bitflip": Example(bitflip, "bell", 0.1),
    "depolarizing": Example(depolarizing, "bell", 1.0),
    "amplitude-damping": Example(amplitude_damping, "bell", 0.1),
    "hadamard": Example(lambda _: unitary_channel(np.array([[1, 1], [1, -1]]) / np.sqrt(2)), "bell"),
    "repetition": Example(repetition_bitflip, "repetition", 0.3),
}


def parse_example(spec: str) -> tuple[KrausChannel, PureState]:
    """``name`` or ``name:param`` -> (channel, default input state)."""
    name, _, param = spec.partition(":")
    if name not in EXAMPLES:
        raise KeyError(f"unknown example {name!r}; choose from {sorted(EXAMPLES)}")
    ex = EXAMPLES[name]
    value = float(param) if param else ex.default_param
    return ex.channel(value), STATES[ex.state]()


@dataclass(frozen=True, eq=False)
class Instance:
    channel: KrausChannel
    input: PureState
    correctable: bool


def code_instance(rng: np.random.Generator, k: int | None = None, n_err: int | None = None) -> Instance:
    """A channel that is perfectly correctable on the support of a random input.

    The input lives on R (x) C with C = W span{|0>..|k-1>}; Kraus operators
    sqrt(c_j) W' S^j W^dag shift C into mutually orthogonal blocks and then
    apply a random unitary W'.
    """
    k = int(rng.integers(2, 4)) if k is None else k
    n_err = int(rng.integers(1, 4 if k == 2 else 3)) if n_err is None else n_err
    d = k * n_err
    w = random_unitary(d, rng)
    w2 = random_unitary(d, rng)
    shift = np.roll(np.eye(d, dtype=complex), k, axis=0)
    c = rng.dirichlet(np.ones(n_err))
    ops = tuple(np.sqrt(c[j]) * w2 @ np.linalg.matrix_power(shift, j) @ w.conj().T for j in range(n_err))
    coeffs = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    psi = coeffs @ w[:, :k].T  # sum_{r,i} M[r,i] |r> (x) W|i>
    state = PureState.normalized(psi.reshape(-1), SystemShape((k, d), ("R", "Q")))
    return Instance(KrausChannel(ops, d, d, "code"), state, True)


def noisy_instance(rng: np.random.Generator, min_gap: float = 1e-3) -> Instance:
    """A generic random channel on a random entangled input (not correctable)."""
    from .measures import coherent_information
    from .linalg import partial_trace, vn_entropy

    while True:
        d = int(rng.integers(2, 5))
        n = int(rng.integers(2, 4))
        chan = KrausChannel(tuple(random_kraus(d, d, n, rng)), d, d, "random")
        state = random_pure(SystemShape((d, d), ("R", "Q")), rng)
        rho_q = partial_trace(state, "Q")
        if vn_entropy(rho_q) - coherent_information(chan, rho_q) > min_gap:
            return Instance(chan, state, False)


def correctability_corpus(seed: int = 0, n_each: int = 50) -> list[Instance]:
    rng = np.random.default_rng(seed)
    out = [code_instance(rng) for _ in range(n_each)]
    out += [noisy_instance(rng) for _ in range(n_each)]
    return out


def two_sided_instance(rng: np.random.Generator) -> tuple[KrausChannel, KrausChannel, PureState]:
    """Random unitary noise on R together with correctable code noise on Q."""
    inst = code_instance(rng)
    k = inst.input.shape.dims[0]
    return unitary_channel(random_unitary(k, rng)), inst.channel, inst.input
