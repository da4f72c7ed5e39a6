"""Command-line front end: ``qnet simulate | boundcheck | info``.

Exit codes: 0 success, 2 configuration error, 3 capacity or locality
violation, 4 a bound inequality was violated.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import boundcheck as bc
from . import protocols as pr
from .infotheory import conditional_mutual_information, entropy, mutual_information
from .netmodel import CapacityError, LocalityError, NetworkError, ScheduleError
from .qcore import (
    QCoreError,
    PureState,
    RegisterLayout,
    bell_state,
    state_from_json,
)

EXIT_OK, EXIT_CONFIG, EXIT_NETWORK, EXIT_VIOLATION = 0, 2, 3, 4


class ConfigError(Exception):
    pass


def _g(x: float) -> str:
    s = f"{x:.6g}"
    return "0" if s == "-0" else s


def _default_seed() -> int:
    env = os.environ.get("QNET_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"QNET_SEED must be an integer, got {env!r}") from None


def _load_state(spec: str, name: str):
    path = Path(spec)
    if path.suffix == ".json" or path.exists():
        try:
            return state_from_json(json.loads(path.read_text()))
        except (OSError, json.JSONDecodeError, QCoreError) as exc:
            raise ConfigError(f"cannot read state {spec!r}: {exc}") from None
    try:
        return pr.preset_state(spec, name)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


JOINT_PRESETS = {
    # Phi+ between input 1 and the reference, input 2 in |0>.
    "bell-ref": lambda: PureState(
        RegisterLayout.qubits("A1", "A2", "R"), np.array([1, 0, 0, 0, 0, 1, 0, 0]) / np.sqrt(2)
    ),
    "bell-cross": lambda: bell_state(("A1", "A2")),
}


def _load_joint(spec: str):
    if spec in JOINT_PRESETS:
        return JOINT_PRESETS[spec]()
    return _load_state(spec, "phi")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# simulate


def _simulate_result(args, seed: int):
    name = args.protocol
    if name == "classical-xor":
        if args.x1 is None or args.x2 is None:
            raise ConfigError("classical-xor needs --x1 and --x2")
        return pr.classical_xor_protocol(args.x1, args.x2)
    if name == "entangled-joint":
        return pr.entangled_protocol_joint(_load_joint(args.phi), mode=args.mode, seed=seed)
    if args.trials > 1:
        return pr.haar_average(name, trials=args.trials, seed=seed)
    psi1 = _load_state(args.psi1, "A1")
    psi2 = _load_state(args.psi2, "A2")
    if name == "entangled":
        return pr.entangled_protocol(psi1, psi2, mode=args.mode, seed=seed)
    if name == "baseline":
        return pr.baseline_route_and_estimate(psi1, psi2, seed=seed, mode=args.mode)
    if name == "measure-all":
        return pr.measure_all_protocol(psi1, psi2, seed=seed, mode=args.mode)
    return pr.trivial_protocol(psi1, psi2)


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    result = _simulate_result(args, seed)
    if args.protocol == "classical-xor":
        b1, b2 = result
        payload = {"protocol": "classical-xor", "x1": args.x1, "x2": args.x2, "b1": b1, "b2": b2}
        if args.format == "json":
            text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
        elif args.format == "csv":
            text = "protocol,x1,x2,b1,b2\n" f"classical-xor,{args.x1},{args.x2},{b1},{b2}\n"
        else:
            text = f"classical-xor  inputs ({args.x1},{args.x2})  outputs B1={b1} B2={b2}\n"
        _emit(text, args.output)
        return EXIT_OK

    if args.format == "json":
        text = json.dumps(pr.result_to_json(result), indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        text = pr.result_to_csv(result)
    else:
        text = _result_table(result)
    _emit(text, args.output)
    return EXIT_OK


def _result_table(result) -> str:
    lines = [f"protocol: {result.protocol}", f"branches: {len(result.branches)}"]
    if len(result.branches) <= 32:
        lines.append(f"{'branch':>6}  {'probability':>11}  {'fidelity_1':>10}  {'fidelity_2':>10}  outcomes")
        for b in result.branches:
            oc = " ".join(f"{k}={''.join(map(str, v))}" for k, v in b.outcomes.items())
            lines.append(f"{b.index:>6}  {_g(b.probability):>11}  {_g(b.fidelity_1):>10}  {_g(b.fidelity_2):>10}  {oc}")
    lines.append(f"fidelity_1: {_g(result.fidelity_1)}")
    lines.append(f"fidelity_2: {_g(result.fidelity_2)}")
    lines.append(f"average:    {_g(result.average)}")
    lines.append(f"min branch fidelity: {_g(result.min_fidelity)}")
    if result.resources:
        lines.append("resources: " + ", ".join(f"{k}={v}" for k, v in result.resources.items()))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# boundcheck


def cmd_boundcheck(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    fe_max, favg_max = bc.fidelity_thresholds()
    if args.thresholds_only:
        if args.format == "json":
            text = json.dumps({"fe_max": fe_max, "favg_max": favg_max}, indent=2, sort_keys=True) + "\n"
        else:
            text = f"fe_max    {_g(fe_max)}\nfavg_max  {_g(favg_max)}\n"
        _emit(text, args.output)
        return EXIT_OK
    if args.protocol is None:
        raise ConfigError("boundcheck needs --protocol or --thresholds-only")
    if args.protocol not in pr.REFERENCE_TRACES:
        raise ConfigError(f"no bound audit for protocol {args.protocol!r}")

    traces = pr.REFERENCE_TRACES[args.protocol]()
    report = bc.audit_chain(traces)
    payload = bc.report_to_json(report)
    verdict = EXIT_OK
    favg = None
    if report.applicable:
        result = pr.haar_average(args.protocol, trials=args.trials, seed=seed)
        favg = result.average
        bound_ok = bc.verify_bound_on_protocol(result, traces)
        payload["average_fidelity"] = favg
        payload["trials"] = args.trials
        payload["bound_holds"] = bound_ok
        payload["twirled_entropy_sum"] = bc.twirled_entropy_sum(traces)
        if not (report.holds and bound_ok):
            verdict = EXIT_VIOLATION

    if args.format == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        lines = [f"protocol  {args.protocol}", f"fe_max    {_g(fe_max)}", f"favg_max  {_g(favg_max)}"]
        if not report.applicable:
            lines.append(f"NOT APPLICABLE: {report.warning}")
        else:
            lines.append(f"independence I(R1E1D1:R2E2D2) = {_g(report.independence)}")
            lines.append(bc.report_to_table(report))
            sign = "<=" if favg <= favg_max + 1e-6 else ">"
            lines.append(f"favg {_g(favg)} {sign} {_g(favg_max)}  ({args.trials} Haar trials)")
            lines.append(f"twirled entropy sum {_g(payload['twirled_entropy_sum'])} (>= 1 required)")
            lines.append("all hold" if verdict == EXIT_OK else "VIOLATION")
        text = "\n".join(lines) + "\n"
    _emit(text, args.output)
    return verdict


# ---------------------------------------------------------------------------
# info


def _parse_groups(text: str) -> list[list[str]]:
    groups = [[r.strip() for r in g.split(",") if r.strip()] for g in text.split(";")]
    if any(not g for g in groups):
        raise ConfigError(f"empty register group in {text!r}")
    return groups


def cmd_info(args) -> int:
    try:
        obj = json.loads(Path(args.state).read_text())
        state = state_from_json(obj)
    except (OSError, json.JSONDecodeError, QCoreError) as exc:
        raise ConfigError(f"cannot read state {args.state!r}: {exc}") from None
    groups = _parse_groups(args.groups) if args.groups else [[n] for n in state.layout.names]
    given = _parse_groups(args.given)[0] if args.given else None
    rows = []
    try:
        for g in groups:
            rows.append((f"H({''.join(g)})", entropy(state, g)))
        if len(groups) >= 2:
            a, b = groups[0], groups[1]
            rows.append((f"I({''.join(a)}:{''.join(b)})", mutual_information(state, a, b)))
            if given:
                rows.append(
                    (f"I({''.join(a)}:{''.join(b)}|{''.join(given)})", conditional_mutual_information(state, a, b, given))
                )
    except QCoreError as exc:
        raise ConfigError(str(exc)) from None
    if args.format == "json":
        text = json.dumps({k: v for k, v in rows}, indent=2, sort_keys=True) + "\n"
    else:
        w = max(len(k) for k, _ in rows)
        text = "\n".join(f"{k.ljust(w)}  {_g(v)}" for k, v in rows) + "\n"
    _emit(text, args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qnet", description="Quantum network coding on the butterfly network.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (default: $QNET_SEED or 0)")
        sp.add_argument("--format", choices=("table", "json", "csv"), default="table")
        sp.add_argument("--output", default=None, help="write to this file instead of stdout")

    s = sub.add_parser("simulate", help="run a protocol")
    s.add_argument("--protocol", required=True, choices=pr.PROTOCOL_NAMES)
    s.add_argument("--psi1", default="zero", help="preset (zero, one, plus, minus, haar:SEED) or state JSON file")
    s.add_argument("--psi2", default="zero")
    s.add_argument("--phi", default="bell-ref", help="joint input: bell-ref, bell-cross or JSON file")
    s.add_argument("--x1", type=int, choices=(0, 1))
    s.add_argument("--x2", type=int, choices=(0, 1))
    s.add_argument("--mode", choices=("enumerate", "sample"), default="enumerate")
    s.add_argument("--trials", type=int, default=1, help=">1: average over Haar-random inputs")
    common(s)
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("boundcheck", help="audit a protocol against the no-entanglement bound")
    b.add_argument("--protocol", choices=tuple(pr.REFERENCE_TRACES))
    b.add_argument("--thresholds-only", action="store_true")
    b.add_argument("--trials", type=int, default=10_000)
    common(b)
    b.set_defaults(func=cmd_boundcheck)

    i = sub.add_parser("info", help="entropies of a state file")
    i.add_argument("state")
    i.add_argument("--groups", default=None, help="register groups, e.g. 'A;B' or 'q0;q1,q2'")
    i.add_argument("--given", default=None, help="conditioning group for I(A:B|C)")
    common(i)
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (CapacityError, LocalityError, ScheduleError) as exc:
        print(f"network violation: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except NetworkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
