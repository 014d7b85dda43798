"""JSON channel/state specification files and analysis reports.

Complex numbers are written as ``[re, im]`` pairs.  Every file carries
``format_version`` (currently 1); unknown keys are rejected.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .channel import KrausChannel, validate
from .linalg import DensityMatrix, PureState, SystemShape

FORMAT_VERSION = 1

_CHANNEL_KEYS = {"format_version", "kraus", "in_dim", "out_dim", "name"}
_STATE_KEYS = {"format_version", "kind", "amplitudes", "matrix", "dims", "labels"}


class SpecParseError(ValueError):
    """A spec file is not valid JSON or does not match the schema."""


def encode_complex(a) -> Any:
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return [float(a.real), float(a.imag)]
    return [encode_complex(x) for x in a]


def decode_complex(obj, ndim: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SpecParseError(f"{what}: entries must be [re, im] pairs of numbers") from exc
    if arr.ndim != ndim + 1 or arr.shape[-1] != 2:
        raise SpecParseError(f"{what}: expected a {ndim}-d array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _read_json(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpecParseError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SpecParseError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    if not isinstance(data, dict):
        raise SpecParseError(f"{path}: top level must be an object")
    return data


def _check_keys(data: dict, allowed: set[str], required: set[str], path) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise SpecParseError(f"{path}: unknown field(s) {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise SpecParseError(f"{path}: missing field(s) {sorted(missing)}")
    if data["format_version"] != FORMAT_VERSION:
        raise SpecParseError(f"{path}: unsupported format_version {data['format_version']!r}")


def _int_field(data: dict, key: str, path) -> int:
    v = data[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < 1:
        raise SpecParseError(f"{path}: {key} must be a positive integer")
    return v


def channel_from_dict(data: dict, path="<channel>") -> KrausChannel:
    _check_keys(data, _CHANNEL_KEYS, _CHANNEL_KEYS - {"name"}, path)
    in_dim = _int_field(data, "in_dim", path)
    out_dim = _int_field(data, "out_dim", path)
    if not isinstance(data["kraus"], list) or not data["kraus"]:
        raise SpecParseError(f"{path}: kraus must be a nonempty list")
    ops = tuple(decode_complex(k, 2, f"{path}: kraus[{i}]") for i, k in enumerate(data["kraus"]))
    name = data.get("name")
    if name is not None and not isinstance(name, str):
        raise SpecParseError(f"{path}: name must be a string")
    return KrausChannel(ops, in_dim, out_dim, name)


def channel_to_dict(channel: KrausChannel) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "in_dim": channel.in_dim,
        "out_dim": channel.out_dim,
        "kraus": [encode_complex(a) for a in channel.operators],
    }
    if channel.name:
        out["name"] = channel.name
    return out


def load_channel(path) -> KrausChannel:
    """Parse and check completeness (raises CompletenessViolation)."""
    chan = channel_from_dict(_read_json(path), path)
    validate(chan)
    return chan


def save_channel(channel: KrausChannel, path) -> None:
    Path(path).write_text(json.dumps(channel_to_dict(channel), indent=1) + "\n")


def state_from_dict(data: dict, path="<state>") -> PureState | DensityMatrix:
    _check_keys(data, _STATE_KEYS, {"format_version", "kind", "dims", "labels"}, path)
    dims, labels = data["dims"], data["labels"]
    if not isinstance(dims, list) or not all(isinstance(d, int) and not isinstance(d, bool) for d in dims):
        raise SpecParseError(f"{path}: dims must be a list of integers")
    if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
        raise SpecParseError(f"{path}: labels must be a list of strings")
    shape = SystemShape(tuple(dims), tuple(labels))
    kind = data["kind"]
    if kind == "pure":
        if "amplitudes" not in data or "matrix" in data:
            raise SpecParseError(f"{path}: a pure state needs 'amplitudes' (and no 'matrix')")
        return PureState(decode_complex(data["amplitudes"], 1, f"{path}: amplitudes"), shape)
    if kind == "mixed":
        if "matrix" not in data or "amplitudes" in data:
            raise SpecParseError(f"{path}: a mixed state needs 'matrix' (and no 'amplitudes')")
        return DensityMatrix(decode_complex(data["matrix"], 2, f"{path}: matrix"), shape)
    raise SpecParseError(f"{path}: kind must be 'pure' or 'mixed', got {kind!r}")


def state_to_dict(state: PureState | DensityMatrix) -> dict:
    out = {
        "format_version": FORMAT_VERSION,
        "dims": list(state.shape.dims),
        "labels": list(state.shape.labels),
    }
    if isinstance(state, PureState):
        out["kind"] = "pure"
        out["amplitudes"] = encode_complex(state.amplitudes)
    else:
        out["kind"] = "mixed"
        out["matrix"] = encode_complex(state.matrix)
    return out


def load_state(path) -> PureState | DensityMatrix:
    return state_from_dict(_read_json(path), path)


def save_state(state: PureState | DensityMatrix, path) -> None:
    Path(path).write_text(json.dumps(state_to_dict(state), indent=1) + "\n")


@dataclass
class Report:
    command: str
    version: str
    inputs: dict
    results: dict
    timing: dict | None = None
    recovery: dict | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"command": self.command, "version": self.version, "inputs": self.inputs,
               "results": self.results}
        if self.recovery is not None:
            out["recovery"] = self.recovery
        if self.timing is not None:
            out["timing"] = self.timing
        out.update(self.extra)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> Report:
        data = dict(data)
        known = {k: data.pop(k) for k in ("command", "version", "inputs", "results")}
        return cls(**known, timing=data.pop("timing", None), recovery=data.pop("recovery", None),
                   extra=data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True)

    @classmethod
    def loads(cls, text: str) -> Report:
        return cls.from_dict(json.loads(text))

    def tsv(self) -> str:
        lines = []
        for section in ("inputs", "results"):
            for key, value in _flatten(getattr(self, section)):
                lines.append(f"{section}.{key}\t{value}")
        return "\n".join(lines)


def _flatten(d: dict, prefix: str = ""):
    for key in sorted(d):
        value = d[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        else:
            yield name, "" if value is None else (repr(value) if isinstance(value, float) else value)
