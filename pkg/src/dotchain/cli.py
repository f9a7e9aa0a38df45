"""Command-line front end.

Run configs are INI files with ``[device]``, ``[protocol]``, ``[sweep]``,
``[calibrate]``, ``[chain]`` and ``[output]`` sections. Energies are in meV
and times in ns. Exit codes: 0 success, 2 config or usage error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analysis import FreeEvolutionConfig, Scheme, SweepSpec, free_evolution_study, sweep
from .chain import ChainSpec, n_dot_transfer
from .errors import ConfigError, DotChainError, ParameterError
from .evolution import DEFAULT_TOL, LogicalState
from .hamiltonian import DeviceParams, sw_effective_couplings
from .protocols import (
    AdiabaticConfig,
    PulseGatedConfig,
    adiabatic_wait,
    build_schedule,
    calibrate_gate_duration,
    calibrate_wait_time,
    pulse_gated_wait,
    run_transfer,
    theta_grid,
)
from .units import ns_to_ps, ps_to_ns

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
WORKERS_ENV = "DOTCHAIN_WORKERS"

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^#;=:\s][^=:]*?)\s*[=:]")


class _Config:
    """configparser wrapper that remembers where each key was written."""

    def __init__(self, path: str) -> None:
        self.path = path
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc.strerror or exc}") from exc
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
        try:
            self.parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(str(exc).replace("\n", " ")) from exc
        self.lines: dict[tuple[str, str], int] = {}
        self.section_lines: dict[str, int] = {}
        section = None
        for n, line in enumerate(text.splitlines(), start=1):
            if m := _SECTION_RE.match(line):
                section = m.group(1).strip()
                self.section_lines[section] = n
            elif section and (m := _KEY_RE.match(line)):
                self.lines[(section, self.parser.optionxform(m.group(1).strip()))] = n

    def fail(self, section: str, key: str | None, message: str) -> ConfigError:
        line = self.lines.get((section, key)) if key else self.section_lines.get(section)
        where = f"{self.path}:{line}" if line else self.path
        what = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{where}: {what}: {message}")

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def raw(self, section: str, key: str, default: str | None = None) -> str:
        if self.has(section, key):
            return self.parser.get(section, key).strip()
        if default is None:
            raise self.fail(section, None, f"missing required key '{key}'")
        return default

    def number(self, section: str, key: str, default: float | None = None) -> float:
        if not self.has(section, key):
            if default is None:
                raise self.fail(section, None, f"missing required key '{key}'")
            return default
        text = self.raw(section, key)
        try:
            value = float(text)
        except ValueError:
            raise self.fail(section, key, f"expected a number, got {text!r}") from None
        if not math.isfinite(value):
            raise self.fail(section, key, f"value must be finite, got {text!r}")
        return value

    def integer(self, section: str, key: str, default: int) -> int:
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        try:
            return int(text)
        except ValueError:
            raise self.fail(section, key, f"expected an integer, got {text!r}") from None

    def auto_number(self, section: str, key: str) -> float | None:
        """A number, or None for 'auto' / absent."""
        if not self.has(section, key) or self.raw(section, key).lower() == "auto":
            return None
        return self.number(section, key)

    def number_list(self, section: str, key: str, default: tuple[float, ...]) -> tuple[float, ...]:
        if not self.has(section, key):
            return default
        text = self.raw(section, key)
        items = [s for s in re.split(r"[,\s]+", text) if s]
        try:
            values = tuple(float(s) for s in items)
        except ValueError:
            raise self.fail(section, key, f"expected a comma-separated list of numbers, got {text!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise self.fail(section, key, "values must be finite")
        return values


@dataclass(frozen=True)
class RunConfig:
    params: DeviceParams
    scheme: Scheme
    protocol: PulseGatedConfig | AdiabaticConfig | FreeEvolutionConfig
    sweep: SweepSpec
    free_sample_dt: float  # ps
    free_threshold: float
    calibrate: dict
    n_dots: int
    output_format: str
    output_path: str
    tol: float


def _guard(cfg: _Config, section: str, key: str | None, build):
    try:
        return build()
    except ParameterError as exc:
        raise cfg.fail(section, key, str(exc)) from None


def load_config(path: str) -> RunConfig:
    cfg = _Config(path)
    if not cfg.parser.has_section("device"):
        raise ConfigError(f"{path}: missing [device] section")

    def device() -> DeviceParams:
        return DeviceParams(
            t=cfg.number("device", "t_mev"),
            j_e=cfg.number("device", "je_mev"),
            u=cfg.number("device", "u_mev"),
            k=cfg.number("device", "k_mev"),
            mu=cfg.number("device", "mu_mev", 0.0),
        )

    params = _guard(cfg, "device", None, device)

    scheme_name = cfg.raw("protocol", "scheme", "pulse_gated").lower().replace("-", "_")
    try:
        scheme = Scheme(scheme_name)
    except ValueError:
        raise cfg.fail("protocol", "scheme", f"unknown scheme {scheme_name!r}") from None

    def as_ps(x: float | None) -> float | None:
        return None if x is None else ns_to_ps(x)

    def protocol():
        if scheme is Scheme.PULSE_GATED:
            return PulseGatedConfig(
                eps_resonant=cfg.number("protocol", "eps_resonant_mev", 5.0),
                d_p=cfg.number("protocol", "d_p_mev", 10.0),
                gate_duration=as_ps(cfg.auto_number("protocol", "gate_duration_ns")),
                wait_time=as_ps(cfg.auto_number("protocol", "wait_time_ns")),
                pre_hold=ns_to_ps(cfg.number("protocol", "pre_hold_ns", 0.0)),
                post_hold=ns_to_ps(cfg.number("protocol", "post_hold_ns", 0.0)),
            )
        if scheme is Scheme.ADIABATIC:
            return AdiabaticConfig(
                d_ad=cfg.number("protocol", "d_ad_mev", 8.0),
                ramp_duration=ns_to_ps(cfg.number("protocol", "ramp_duration_ns", 65.8)),
                eps_mid=cfg.number("protocol", "eps_mid_mev", -1.0),
                wait_time=as_ps(cfg.auto_number("protocol", "wait_time_ns")),
                eps_reference=cfg.number("protocol", "eps_reference_mev", 5.0),
            )
        duration = cfg.number("protocol", "duration_ns")
        if duration < 0:
            raise ParameterError("duration_ns must be non-negative")
        return FreeEvolutionConfig(duration=ns_to_ps(duration))

    proto = _guard(cfg, "protocol", None, protocol)

    theta_points = cfg.integer("sweep", "theta_points", 33)
    theta_lo = cfg.number("sweep", "theta_min", 0.0)
    theta_hi = cfg.number("sweep", "theta_max", math.pi)
    phis = cfg.number_list("sweep", "phi_list", (0.0,))
    deltas = cfg.number_list("sweep", "delta_u_list", (0.0,))
    if theta_points < 2:
        raise cfg.fail("sweep", "theta_points", f"theta grid needs at least 2 points, got {theta_points}")
    if not phis:
        raise cfg.fail("sweep", "phi_list", "list is empty")
    if not deltas:
        raise cfg.fail("sweep", "delta_u_list", "list is empty")
    spec = _guard(cfg, "sweep", None, lambda: SweepSpec(theta_points, (theta_lo, theta_hi), phis, deltas, scheme))

    sample_dt = ns_to_ps(cfg.number("protocol", "sample_dt_ns", 0.001)) if scheme is Scheme.FREE_EVOLUTION else 1.0
    if not 0.0 < sample_dt <= 1.0:
        raise cfg.fail("protocol", "sample_dt_ns", "sample spacing must lie in (0, 0.001] ns")
    threshold = cfg.number("protocol", "threshold", 0.7)

    cal: dict = {"target": cfg.raw("calibrate", "target", "wait").lower()}
    if cal["target"] not in ("wait", "gate"):
        raise cfg.fail("calibrate", "target", f"expected 'wait' or 'gate', got {cal['target']!r}")
    if cfg.has("calibrate", "window_ns"):
        window = cfg.number_list("calibrate", "window_ns", ())
        if len(window) != 2 or window[0] > window[1] or window[0] < 0:
            raise cfg.fail("calibrate", "window_ns", "expected 'lo, hi' with 0 <= lo <= hi")
        cal["window"] = (ns_to_ps(window[0]), ns_to_ps(window[1]))
    if cfg.has("calibrate", "wait_window_ns"):
        window = cfg.number_list("calibrate", "wait_window_ns", ())
        if len(window) != 2 or window[0] > window[1] or window[0] < 0:
            raise cfg.fail("calibrate", "wait_window_ns", "expected 'lo, hi' with 0 <= lo <= hi")
        cal["wait_window"] = (ns_to_ps(window[0]), ns_to_ps(window[1]))
    cal["grid_points"] = cfg.integer("calibrate", "grid_points", 41)
    if cal["grid_points"] < 3:
        raise cfg.fail("calibrate", "grid_points", "need at least 3 grid points")

    n_dots = cfg.integer("chain", "n_dots", 3)
    if n_dots < 3:
        raise cfg.fail("chain", "n_dots", f"a chain needs at least 3 dots, got {n_dots}")

    fmt = cfg.raw("output", "format", "csv").lower()
    if fmt not in ("csv", "json"):
        raise cfg.fail("output", "format", f"expected csv or json, got {fmt!r}")
    out_path = cfg.raw("output", "path", "-")
    tol = cfg.number("run", "tol", DEFAULT_TOL)
    if tol <= 0:
        raise cfg.fail("run", "tol", "tolerance must be positive")
    return RunConfig(params, scheme, proto, spec, sample_dt, threshold, cal, n_dots, fmt, out_path, tol)


# ----------------------------------------------------------------------------
# output


def _metadata(command: str, args) -> dict:
    meta = {"command": command, "version": __version__}
    if getattr(args, "timestamp", False):
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat()
    return meta


def _json_doc(command: str, args, body: dict) -> str:
    return json.dumps({"metadata": _metadata(command, args), **body}, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if not path or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def _resolve_workers(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def _protocol_config(run: RunConfig, command: str):
    if run.scheme is Scheme.FREE_EVOLUTION:
        raise ConfigError(f"'{command}' needs a pulse_gated or adiabatic [protocol] scheme")
    return run.protocol


# ----------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    run = load_config(args.config)
    state = _guard_args(lambda: LogicalState(args.theta, args.phi))
    if run.scheme is Scheme.FREE_EVOLUTION:
        schedule = run.protocol.schedule()
    else:
        schedule = build_schedule(run.params, run.protocol)
    result = run_transfer(state, run.params, schedule, tol=run.tol)
    body = {"theta": state.theta, "phi": state.phi, "scheme": run.scheme.value, **result.to_dict()}
    _emit(_json_doc("simulate", args, body), args.output)
    return EXIT_OK


def cmd_sweep(args) -> int:
    run = load_config(args.config)
    table = sweep(run.sweep, run.params, run.protocol, tol=run.tol, workers=_resolve_workers(args.workers))
    fmt = args.format or run.output_format
    text = table.to_csv() if fmt == "csv" else _json_doc("sweep", args, json.loads(table.to_json()))
    _emit(text, args.output or run.output_path)
    return EXIT_OK


def cmd_free_evolution(args) -> int:
    run = load_config(args.config)
    if run.scheme is not Scheme.FREE_EVOLUTION:
        raise ConfigError(f"{args.config}: free-evolution needs 'scheme = free_evolution' in [protocol]")
    trace = free_evolution_study(
        run.params,
        ps_to_ns(run.protocol.duration),
        run.free_sample_dt,
        run.free_threshold,
        theta_points=run.sweep.theta_points,
        eps=run.protocol.eps,
    )
    fmt = args.format or run.output_format
    text = trace.to_csv() if fmt == "csv" else _json_doc("free-evolution", args, json.loads(trace.to_json()))
    _emit(text, args.output or run.output_path)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    run = load_config(args.config)
    proto = _protocol_config(run, "calibrate")
    cal = run.calibrate
    states = [LogicalState(float(th)) for th in theta_grid(run.sweep.theta_points, *run.sweep.theta_range)]
    if cal["target"] == "gate":
        if not isinstance(proto, PulseGatedConfig):
            raise ConfigError(f"{args.config}: gate calibration applies to the pulse_gated scheme only")
        if "window" not in cal:
            raise ConfigError(f"{args.config}: [calibrate] window_ns is required for gate calibration")
        res = calibrate_gate_duration(
            run.params,
            proto,
            cal["window"],
            cal["grid_points"],
            thetas=[s.theta for s in states],
            wait_window=cal.get("wait_window"),
            tol=run.tol,
        )
        body = {
            "target": "gate",
            "gate_duration_ns": ps_to_ns(res.duration),
            "wait_time_ns": ps_to_ns(res.wait),
            "transfer_time_ns": ps_to_ns(proto.pre_hold + res.duration + res.wait + proto.post_hold),
            "worst_case_fidelity": res.worst_case_fidelity,
        }
    else:
        if isinstance(proto, PulseGatedConfig):
            template = build_schedule(run.params, proto.replace(wait_time=0.0, post_hold=0.0))
            nominal = pulse_gated_wait(proto.eps_resonant)
            default_window = (0.0, 2.0 * math.pi * nominal / 3.0)
        else:
            template = build_schedule(run.params, proto.replace(wait_time=0.0))
            nominal = adiabatic_wait(proto.eps_reference)
            default_window = (0.0, 4.0 * math.pi * nominal / 12.0)
        window = cal.get("window", default_window)
        res = calibrate_wait_time(states, run.params, template, window, cal["grid_points"], tol=run.tol)
        body = {
            "target": "wait",
            "wait_time_ns": ps_to_ns(res.wait),
            "nominal_wait_ns": ps_to_ns(nominal),
            "window_ns": [ps_to_ns(window[0]), ps_to_ns(window[1])],
            "worst_case_fidelity": res.worst_case_fidelity,
        }
    body["scheme"] = run.scheme.value
    _emit(_json_doc("calibrate", args, body), args.output)
    return EXIT_OK


def cmd_sw(args) -> int:
    params = _guard_args(lambda: DeviceParams(t=args.t, j_e=args.je, u=args.u, k=args.k))
    j_s, j_t = sw_effective_couplings(params, args.eps)
    body = {
        "j_s": j_s,
        "j_t": j_t,
        "pulse_gated_condition": params.pulse_gated_condition,
    }
    _emit(_json_doc("sw", args, body), args.output)
    if params.pulse_gated_condition:
        print("pulse-gated condition satisfied", file=sys.stderr)
    return EXIT_OK


def cmd_chain(args) -> int:
    run = load_config(args.config)
    proto = _protocol_config(run, "chain")
    n_dots = args.n_dots if args.n_dots is not None else run.n_dots
    spec = _guard_args(lambda: ChainSpec(n_dots, proto))
    state = _guard_args(lambda: LogicalState(args.theta, args.phi))
    result = n_dot_transfer(spec, state, run.params, tol=run.tol)
    body = {"n_dots": n_dots, "theta": state.theta, "phi": state.phi, **result.to_dict()}
    _emit(_json_doc("chain", args, body), args.output)
    return EXIT_OK


def _guard_args(build):
    try:
        return build()
    except ParameterError as exc:
        raise ConfigError(str(exc)) from None


# ----------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dotchain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, fmt: bool = False):
        p.add_argument("-o", "--output", help="output file ('-' for stdout)")
        p.add_argument("--timestamp", action="store_true", help="add a timestamp to JSON metadata")
        if fmt:
            p.add_argument("--format", choices=("csv", "json"), help="override [output] format")

    p = sub.add_parser("simulate", help="run one transfer and print the result as JSON")
    p.add_argument("config")
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="theta/phi/delta_u grid of transfers")
    p.add_argument("config")
    p.add_argument("--workers", type=int, help=f"worker processes (overrides ${WORKERS_ENV})")
    common(p, fmt=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("free-evolution", help="fidelity versus hold time with all dots on resonance")
    p.add_argument("config")
    common(p, fmt=True)
    p.set_defaults(func=cmd_free_evolution)

    p = sub.add_parser("calibrate", help="optimize the wait time or the gate duration")
    p.add_argument("config")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("sw", help="second-order effective couplings")
    p.add_argument("--t", type=float, required=True, help="tunnel coupling, meV")
    p.add_argument("--u", type=float, required=True, help="intradot Coulomb energy, meV")
    p.add_argument("--k", type=float, required=True, help="interdot Coulomb energy, meV")
    p.add_argument("--eps", type=float, required=True, help="outer-dot resonant detuning, meV")
    p.add_argument("--je", type=float, default=0.0, help="exchange energy, meV")
    common(p)
    p.set_defaults(func=cmd_sw)

    p = sub.add_parser("chain", help="sequential transfer along an N-dot chain")
    p.add_argument("config")
    p.add_argument("--n-dots", type=int)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--phi", type=float, default=0.0)
    common(p)
    p.set_defaults(func=cmd_chain)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"dotchain: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DotChainError as exc:
        print(f"dotchain: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"dotchain: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
