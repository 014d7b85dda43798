"""``entcert`` command-line front end.

Exit codes: 0 success / correctable, 1 not correctable, 2 parse error,
3 semantic or invariant error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import channel as ch
from . import correct, families, measures, tomo
from .errors import CertificationDiscrepancy, InvariantViolation, NotCorrectable
from .linalg import PureState, mutual_information, partial_trace, purify, vn_entropy
from .optimize import OptimizerConfig
from .specfile import (
    Report,
    SpecParseError,
    channel_to_dict,
    load_channel,
    load_state,
    save_channel,
    save_state,
)

EXIT_OK, EXIT_NOT_CORRECTABLE, EXIT_PARSE, EXIT_SEMANTIC = 0, 1, 2, 3

SWEEP_COLUMNS = ["family", "p", "S_Q", "I", "E", "E_converged", "eps_I", "bound", "F", "F_method", "eps_E"]


class _Usage(SpecParseError):
    pass


def _config(args) -> OptimizerConfig:
    return OptimizerConfig(restarts=args.restarts, max_iter=args.max_iter, seed=args.seed)


def _load_inputs(args, need_channel: bool = True):
    chan = default_state = None
    if need_channel:
        if bool(args.channel) == bool(args.example):
            raise _Usage("give exactly one of --channel or --example")
        if args.channel:
            chan = load_channel(args.channel)
        else:
            try:
                chan, default_state = families.parse_example(args.example)
            except (KeyError, ValueError) as exc:
                raise _Usage(f"bad --example {args.example!r}: {exc}") from None
    if args.state and args.state_example:
        raise _Usage("give at most one of --state or --state-example")
    if args.state:
        state = load_state(args.state)
    elif args.state_example:
        if args.state_example not in families.STATES:
            raise _Usage(f"unknown --state-example {args.state_example!r}; choose from {sorted(families.STATES)}")
        state = families.STATES[args.state_example]()
    elif default_state is not None:
        state = default_state
    else:
        raise _Usage("no input state: give --state or --state-example")
    return chan, state


def _as_rq_input(state) -> PureState:
    """Pure two-subsystem input; a single-system state is purified with a reference R."""
    if isinstance(state, PureState) and len(state.shape.dims) == 2:
        return state
    if len(state.shape.dims) == 1:
        rho = state.density() if isinstance(state, PureState) else state
        return purify(rho, "R").reorder(("R", state.shape.labels[0]))
    raise InvariantViolation(
        f"input must be a pure state of two subsystems or any state of one, got {state.shape.labels}"
    )


def _inputs_echo(args, chan, state) -> dict:
    echo = {
        "channel": (getattr(args, "channel", None) or f"example:{args.example}") if chan is not None else None,
        "state": args.state or (f"example:{args.state_example}" if args.state_example else "example-default"),
        "state_dims": list(state.shape.dims),
        "state_labels": list(state.shape.labels),
        "tol": args.tol,
        "restarts": args.restarts,
        "max_iter": args.max_iter,
        "seed": args.seed,
        "skip_eof": args.skip_eof,
    }
    if chan is not None:
        echo.update(channel_name=chan.name, in_dim=chan.in_dim, out_dim=chan.out_dim, n_kraus=len(chan))
    return echo


def _emit(report: Report, args) -> None:
    print(report.tsv() if args.format == "tsv" else report.dumps())


def _check_target(chan: ch.KrausChannel, rq: PureState) -> None:
    d = rq.shape.dims[1]
    if d != chan.in_dim:
        raise InvariantViolation(
            f"dimension mismatch: subsystem {rq.shape.labels[1]!r} has dimension {d}, "
            f"channel acts on dimension {chan.in_dim}"
        )


def cmd_analyze(args) -> int:
    t0 = time.perf_counter()
    chan, state = _load_inputs(args)
    rq = _as_rq_input(state)
    _check_target(chan, rq)
    ref, q = rq.shape.labels
    cfg = _config(args)
    rho_q = partial_trace(rq, q)
    out = ch.apply_extended(chan, rq.density(), q)
    s_qo, s_rqo = vn_entropy(partial_trace(out, q)), vn_entropy(out)
    results = {
        "S_Q": vn_entropy(rho_q),
        "S_Q_out": s_qo,
        "S_RQ_out": s_rqo,
        "coherent_info": s_qo - s_rqo,
        "re_mutual_info": mutual_information(correct.re_output(chan, rq), ref),
        "eof": None,
    }
    if not args.skip_eof:
        res = measures.eof_mixed(out, ref, cfg)
        results["eof"] = _measure_dict(res)
    report = Report("analyze", __version__, _inputs_echo(args, chan, state), results)
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - t0}
    _emit(report, args)
    return EXIT_OK


def _measure_dict(res: measures.MeasureResult) -> dict:
    return {"value": res.value, "upper_bound": True, "converged": res.converged,
            "restarts_used": res.restarts_used, "ensemble_size": res.ensemble_size}


def _certificate_dict(cert: correct.Certificate) -> dict:
    return {
        "S_Q": cert.s_q,
        "coherent_info": cert.coherent_info,
        "eof_upper_bound": cert.eof_value,
        "eof_converged": cert.eof_converged,
        "re_mutual_info": cert.re_mutual_info,
        "kl_residual": cert.kl_residual,
        "correctable": cert.correctable,
        "tolerance": cert.tolerance,
    }


def cmd_certify(args) -> int:
    t0 = time.perf_counter()
    chan, state = _load_inputs(args)
    rq = _as_rq_input(state)
    _check_target(chan, rq)
    cert = correct.certify(chan, rq, args.tol, _config(args), skip_eof=args.skip_eof)
    report = Report("certify", __version__, _inputs_echo(args, chan, state), _certificate_dict(cert))
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - t0}
    _emit(report, args)
    return EXIT_OK if cert.correctable else EXIT_NOT_CORRECTABLE


def cmd_recover(args) -> int:
    t0 = time.perf_counter()
    chan, state = _load_inputs(args)
    rq = _as_rq_input(state)
    _check_target(chan, rq)
    cert = correct.certify(chan, rq, args.tol, _config(args), skip_eof=True)
    if not cert.correctable:
        raise NotCorrectable(
            f"coherent-information gap S_Q - I = {cert.s_q - cert.coherent_info:.6g} exceeds tol {args.tol:g}"
        )
    if args.method == "petz":
        rec = correct.petz_recovery(chan, partial_trace(rq, rq.shape.labels[1]))
    else:
        rec = correct.synthesize_recovery(chan, rq)
    fid = correct.verify_recovery(chan, rec, rq)
    if args.out:
        save_channel(rec.channel, args.out)
    results = {"method": rec.method.value, "fidelity": fid, "n_kraus": len(rec.channel),
               "out": args.out, **_certificate_dict(cert)}
    report = Report("recover", __version__, _inputs_echo(args, chan, state), results,
                    recovery=channel_to_dict(rec.channel))
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - t0}
    _emit(report, args)
    return EXIT_OK


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise _Usage(f"bad --grid {text!r}: {exc}") from None


def sweep_rows(family: str, grid: list[float], rq: PureState, cfg: OptimizerConfig,
               skip_eof: bool = False) -> list[dict]:
    ref, q = rq.shape.labels
    make = families.FAMILIES[family]
    rows = []
    for p in grid:
        chan = make(p)
        _check_target(chan, rq)
        out = ch.apply_extended(chan, rq.density(), q)
        s_q = vn_entropy(partial_trace(rq, q))
        info = vn_entropy(partial_trace(out, q)) - vn_entropy(out)
        approx = correct.approx_report(chan, rq, cfg)
        row = {"family": family, "p": p, "S_Q": s_q, "I": info, "E": None, "E_converged": None,
               "eps_I": approx.epsilon, "bound": approx.fidelity_bound, "F": approx.achieved_fidelity,
               "F_method": approx.method.value, "eps_E": None}
        if not skip_eof:
            res = measures.eof_mixed(out, ref, cfg)
            row.update(E=res.value, E_converged=res.converged, eps_E=s_q - res.value)
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    if args.family not in families.FAMILIES:
        raise _Usage(f"unknown family {args.family!r}; choose from {sorted(families.FAMILIES)}")
    grid = parse_grid(args.grid)
    if args.state or args.state_example:
        _, state = _load_inputs(args, need_channel=False)
    else:
        state = families.bell_state()
    rq = _as_rq_input(state)
    try:
        rows = sweep_rows(args.family, grid, rq, _config(args), args.skip_eof)
    except ValueError as exc:
        if "must lie in" in str(exc):
            raise _Usage(str(exc)) from None
        raise
    if args.format == "json":  # sweep defaults to tsv for plotting tools
        print(json.dumps(rows, indent=2, sort_keys=True))
    else:
        print("\t".join(SWEEP_COLUMNS))
        for row in rows:
            print("\t".join("" if row[c] is None else repr(row[c]) if isinstance(row[c], float) else str(row[c])
                            for c in SWEEP_COLUMNS))
    return EXIT_OK


def cmd_tomo(args) -> int:
    t0 = time.perf_counter()
    _, state = _load_inputs(args, need_channel=False)
    if len(state.shape.dims) != 2:
        raise InvariantViolation(f"tomography needs a bipartite state, got labels {state.shape.labels}")
    rho = state.density() if isinstance(state, PureState) else state
    ms = tomo.ic_product_set(*rho.shape.dims, labels=rho.shape.labels)
    stats = tomo.exact_statistics(rho, ms)
    rec = tomo.reconstruct(stats, ms)
    results = {
        "reconstruction_error": float(np.max(np.abs(rec.matrix - rho.matrix))),
        "correlation": tomo.correlation_test(stats),
        "gram_rank": ms.gram_rank(),
        "settings": [len(ms.a_settings), len(ms.b_settings)],
        "mutual_information": mutual_information(rec, rec.shape.labels[0]),
    }
    report = Report("tomo", __version__, _inputs_echo(args, None, state), results)
    if args.timing:
        report.timing = {"seconds": time.perf_counter() - t0}
    _emit(report, args)
    return EXIT_OK


def cmd_examples(args) -> int:
    out = Path(args.directory)
    out.mkdir(parents=True, exist_ok=True)
    for name, ex in families.EXAMPLES.items():
        save_channel(ex.channel(ex.default_param), out / f"{name}.channel.json")
    for name, make in families.STATES.items():
        save_state(make(), out / f"{name}.state.json")
    print(f"wrote {len(families.EXAMPLES)} channels and {len(families.STATES)} states to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"entcert {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--state", help="state spec file (JSON)")
    common.add_argument("--state-example", help=f"built-in state: {', '.join(families.STATES)}")
    common.add_argument("--tol", type=float, default=correct.DEFAULT_TOL, help="correctability tolerance in bits")
    common.add_argument("--restarts", type=int, default=16, help="random optimizer restarts")
    common.add_argument("--max-iter", type=int, default=3000, help="iterations per optimizer start")
    common.add_argument("--seed", type=int, default=0, help="seed for all optimizer randomness")
    common.add_argument("--skip-eof", action="store_true", help="skip the entanglement-of-formation optimizer")
    common.add_argument("--format", choices=["json", "tsv"],
                        help="output format (default json; tsv for sweep)")
    common.add_argument("--timing", action="store_true", help="include wall-clock timing in the report")

    with_channel = argparse.ArgumentParser(add_help=False, parents=[common])
    with_channel.add_argument("--channel", help="channel spec file (JSON)")
    with_channel.add_argument("--example", help=f"built-in channel NAME[:PARAM]: {', '.join(families.EXAMPLES)}")

    p = sub.add_parser("analyze", parents=[with_channel], help="entropies, I and E of the channel output")
    p.set_defaults(func=cmd_analyze)
    p = sub.add_parser("certify", parents=[with_channel], help="decide perfect correctability")
    p.set_defaults(func=cmd_certify)
    p = sub.add_parser("recover", parents=[with_channel], help="synthesize and verify a recovery map")
    p.add_argument("--out", help="write the recovery channel here")
    p.add_argument("--method", choices=["schmidt_block", "petz"], default="schmidt_block")
    p.set_defaults(func=cmd_recover)
    p = sub.add_parser("sweep", parents=[common], help="table of I, E, fidelity over a noise family")
    p.add_argument("family", help=f"one of {', '.join(families.FAMILIES)}")
    p.add_argument("--grid", default="0:1:0.1", help="START:STOP:STEP or comma-separated values")
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("tomo", parents=[common], help="product-measurement tomography round trip")
    p.set_defaults(func=cmd_tomo)
    p = sub.add_parser("examples", help="write the built-in example spec files")
    p.add_argument("directory")
    p.set_defaults(func=cmd_examples)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecParseError as exc:
        print(f"entcert: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except NotCorrectable as exc:
        print(f"entcert: NotCorrectable: {exc}", file=sys.stderr)
        return EXIT_NOT_CORRECTABLE
    except (InvariantViolation, CertificationDiscrepancy, ValueError, KeyError) as exc:
        dev = getattr(exc, "deviation", None)
        tail = f" (deviation {dev:.3e})" if dev is not None else ""
        print(f"entcert: {type(exc).__name__}: {exc}{tail}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
