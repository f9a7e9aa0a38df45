"""Pulse-gated and adiabatic transfer protocols for one triple of dots.

Pulse-gated: three square detuning pulses on the outer dots,

    regime I   (+D_p, 0, -D_p)   qubit parked on dots (1, 2)
    regime II  (eps,  0,  eps)   outer dots resonant, transfer for the gate time
    regime III (-D_p, 0, +D_p)   qubit parked on dots (2, 3), phase-correcting wait

Adiabatic: a linear ramp of eps_1 and eps_3 through the eps_1 = eps_3
avoided crossing, followed by a wait at the final detunings.

Durations are in ps; ``None`` selects the closed-form default.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ParameterError
from .evolution import (
    DEFAULT_TOL,
    DetuningSchedule,
    LogicalState,
    QubitState,
    ScheduleSegment,
    apply_blocks,
    schedule_propagators,
)
from .hamiltonian import BASIS_LABELS, S23, T23, DeviceParams, pulse_gated_coupling
from .units import HBAR, ps_to_ns

DEFAULT_THETA_POINTS = 33
REFINE_FACTOR = 10


def theta_grid(points: int = DEFAULT_THETA_POINTS, lo: float = 0.0, hi: float = math.pi) -> np.ndarray:
    return np.linspace(lo, hi, points)


@dataclass(frozen=True)
class PulseGatedConfig:
    eps_resonant: float = 5.0
    d_p: float = 10.0
    gate_duration: float | None = None
    wait_time: float | None = None
    pre_hold: float = 0.0
    post_hold: float = 0.0

    def __post_init__(self) -> None:
        if not self.d_p > self.eps_resonant > 0:
            raise ParameterError(f"need d_p > eps_resonant > 0, got d_p={self.d_p}, eps={self.eps_resonant}")
        for name in ("gate_duration", "wait_time", "pre_hold", "post_hold"):
            value = getattr(self, name)
            if value is not None and not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"{name} must be a finite non-negative duration, got {value!r}")

    def replace(self, **changes) -> PulseGatedConfig:
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return PulseGatedConfig(**values)


@dataclass(frozen=True)
class AdiabaticConfig:
    d_ad: float = 8.0
    ramp_duration: float = 65_800.0  # ps
    eps_mid: float = -1.0
    wait_time: float | None = None
    eps_reference: float = 5.0  # energy scale of the default wait 12 hbar / eps

    def __post_init__(self) -> None:
        if not self.d_ad > abs(self.eps_mid):
            raise ParameterError(f"need d_ad > |eps_mid|, got d_ad={self.d_ad}, eps_mid={self.eps_mid}")
        if not (math.isfinite(self.ramp_duration) and self.ramp_duration > 0):
            raise ParameterError(f"ramp_duration must be positive, got {self.ramp_duration!r}")
        if self.wait_time is not None and not (math.isfinite(self.wait_time) and self.wait_time >= 0):
            raise ParameterError(f"wait_time must be a finite non-negative duration, got {self.wait_time!r}")
        if not self.eps_reference > 0:
            raise ParameterError("eps_reference must be positive")

    def replace(self, **changes) -> AdiabaticConfig:
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return AdiabaticConfig(**values)


def auto_gate_duration(params: DeviceParams, eps_resonant: float) -> float:
    """hbar * pi / J with J = 2 t^2 / (K + eps); only meaningful at U = 2K."""
    if not params.pulse_gated_condition:
        raise ParameterError(
            f"automatic gate duration needs U = 2K (got U={params.u}, K={params.k}); "
            "pass an explicit or calibrated gate_duration"
        )
    j = pulse_gated_coupling(params, eps_resonant)
    if j == 0.0:
        raise ParameterError("zero tunnel coupling: no transfer possible")
    return HBAR * math.pi / j


def pulse_gated_wait(eps_resonant: float) -> float:
    return 3.0 * HBAR / eps_resonant


def adiabatic_wait(eps_reference: float) -> float:
    return 12.0 * HBAR / eps_reference


def pulse_gated_schedule(params: DeviceParams, cfg: PulseGatedConfig) -> DetuningSchedule:
    """Regime I (pre_hold), II (gate), III (wait + post_hold), always three segments."""
    gate = cfg.gate_duration if cfg.gate_duration is not None else auto_gate_duration(params, cfg.eps_resonant)
    wait = cfg.wait_time if cfg.wait_time is not None else pulse_gated_wait(cfg.eps_resonant)
    d, e = cfg.d_p, cfg.eps_resonant
    return DetuningSchedule(
        (
            ScheduleSegment.constant((d, 0.0, -d), cfg.pre_hold),
            ScheduleSegment.constant((e, 0.0, e), gate),
            ScheduleSegment.constant((-d, 0.0, d), wait + cfg.post_hold),
        )
    )


def adiabatic_schedule(params: DeviceParams, cfg: AdiabaticConfig) -> DetuningSchedule:
    """Linear ramp (m, m, -D) -> (-D, m, m) over ``ramp_duration``, then the wait."""
    del params  # the recipe does not depend on the device constants
    m, d = cfg.eps_mid, cfg.d_ad
    wait = cfg.wait_time if cfg.wait_time is not None else adiabatic_wait(cfg.eps_reference)
    return DetuningSchedule(
        (
            ScheduleSegment.ramp((m, m, -d), (-d, m, m), cfg.ramp_duration),
            ScheduleSegment.constant((-d, m, m), wait),
        )
    )


def build_schedule(params: DeviceParams, cfg: PulseGatedConfig | AdiabaticConfig) -> DetuningSchedule:
    if isinstance(cfg, PulseGatedConfig):
        return pulse_gated_schedule(params, cfg)
    if isinstance(cfg, AdiabaticConfig):
        return adiabatic_schedule(params, cfg)
    raise TypeError(f"unknown protocol config {type(cfg).__name__}")


@dataclass(frozen=True, eq=False)
class TransferResult:
    final_state: QubitState
    fidelity: float
    leakage: dict[str, float]
    transfer_time: float  # ns
    schedule_used: DetuningSchedule
    target_population: float = field(default=0.0)

    @property
    def leakage_total(self) -> float:
        return float(sum(self.leakage.values()))

    @property
    def infidelity(self) -> float:
        return 1.0 - self.fidelity

    def to_dict(self) -> dict:
        amps = self.final_state.amps
        return {
            "fidelity": self.fidelity,
            "infidelity": self.infidelity,
            "leakage": dict(self.leakage),
            "leakage_total": self.leakage_total,
            "target_population": self.target_population,
            "transfer_time_ns": self.transfer_time,
            "final_state": {
                "labels": list(BASIS_LABELS),
                "real": [float(a.real) for a in amps],
                "imag": [float(a.imag) for a in amps],
                "time_ns": ps_to_ns(self.final_state.time),
            },
            "schedule": [
                {
                    "kind": seg.kind.value,
                    "duration_ns": ps_to_ns(seg.duration),
                    "eps_start_mev": list(seg.eps_start),
                    "eps_end_mev": list(seg.eps_end),
                }
                for seg in self.schedule_used.segments
            ],
        }


def transfer_state(
    initial: QubitState,
    target: QubitState,
    params: DeviceParams,
    schedule: DetuningSchedule,
    tol: float = DEFAULT_TOL,
) -> TransferResult:
    """Propagate an arbitrary initial state and score it against ``target``."""
    if not schedule.segments:
        raise ParameterError("schedule has no segments")
    u_s, u_t = schedule_propagators(params, schedule, tol)
    final = apply_blocks(initial, u_s, u_t, schedule.total_duration)
    fid = float(abs(np.vdot(target.amps, final.amps)) ** 2)
    pops = final.populations()
    leakage = {label: p for i, (label, p) in enumerate(pops.items()) if i not in (S23, T23)}
    return TransferResult(
        final_state=final,
        fidelity=min(fid, 1.0),
        leakage=leakage,
        transfer_time=ps_to_ns(schedule.total_duration),
        schedule_used=schedule,
        target_population=pops[BASIS_LABELS[S23]] + pops[BASIS_LABELS[T23]],
    )


def run_transfer(
    initial: LogicalState,
    params: DeviceParams,
    schedule: DetuningSchedule,
    *,
    tol: float = DEFAULT_TOL,
    target: QubitState | None = None,
) -> TransferResult:
    """Move ``initial`` from dots (1, 2) to (2, 3) and report fidelity and leakage."""
    return transfer_state(initial.initial(), target or initial.target(), params, schedule, tol)


def worst_case_fidelity(
    states: Sequence[LogicalState], params: DeviceParams, schedule: DetuningSchedule, tol: float = DEFAULT_TOL
) -> float:
    u_s, u_t = schedule_propagators(params, schedule, tol)
    worst = 1.0
    for st in states:
        start = st.initial()
        final = apply_blocks(start, u_s, u_t, 0.0)
        worst = min(worst, float(abs(np.vdot(st.target().amps, final.amps)) ** 2))
    return worst


class WaitCalibration(NamedTuple):
    wait: float  # ps
    worst_case_fidelity: float


class GateCalibration(NamedTuple):
    duration: float  # ps
    wait: float  # ps
    worst_case_fidelity: float


def _grid_search(objective, lo: float, hi: float, points: int) -> tuple[float, float]:
    """Two-stage deterministic grid maximization; ties go to the smaller argument."""
    if points < 3:
        raise ParameterError("grid_points must be >= 3")
    if hi < lo:
        raise ParameterError(f"empty search window [{lo}, {hi}]")
    if hi == lo:
        return lo, objective(lo)

    def scan(grid: np.ndarray) -> tuple[int, float]:
        best_i, best_v = 0, -math.inf
        for i, x in enumerate(grid):
            v = objective(float(x))
            if v > best_v:
                best_i, best_v = i, v
        return best_i, best_v

    coarse = np.linspace(lo, hi, points)
    i, _ = scan(coarse)
    step = coarse[1] - coarse[0]
    fine_lo, fine_hi = max(lo, coarse[i] - step), min(hi, coarse[i] + step)
    n_fine = int(round((fine_hi - fine_lo) / step * REFINE_FACTOR)) + 1
    fine = np.linspace(fine_lo, fine_hi, max(n_fine, 2))
    j, best = scan(fine)
    return float(fine[j]), best


def calibrate_wait_time(
    initial_grid: Sequence[LogicalState],
    params: DeviceParams,
    schedule_template: DetuningSchedule,
    search_window: tuple[float, float],
    grid_points: int = 41,
    *,
    wait_index: int = -1,
    tol: float = DEFAULT_TOL,
) -> WaitCalibration:
    """Wait duration (ps) of segment ``wait_index`` maximizing the worst fidelity over ``initial_grid``.

    A coarse uniform grid over ``search_window`` is refined tenfold around the
    best coarse point.
    """
    states = list(initial_grid)
    if not states:
        raise ParameterError("initial_grid is empty")
    lo, hi = search_window
    if lo < 0:
        raise ParameterError("wait window must be non-negative")

    def objective(wait: float) -> float:
        return worst_case_fidelity(states, params, schedule_template.with_segment_duration(wait_index, wait), tol)

    return WaitCalibration(*_grid_search(objective, float(lo), float(hi), grid_points))


def default_wait_window(params: DeviceParams, eps_resonant: float) -> tuple[float, float]:
    """One full period of the singlet-triplet relative phase at the parking point.

    The parked singlet and triplet differ by 2 J_e on the diagonal, so a wait of
    pi hbar / J_e spans every relative phase; fall back to 2 pi hbar / eps.
    """
    if params.j_e > 0:
        return 0.0, math.pi * HBAR / params.j_e
    return 0.0, 2.0 * math.pi * HBAR / eps_resonant


def calibrate_gate_duration(
    params: DeviceParams,
    cfg: PulseGatedConfig,
    search_window: tuple[float, float],
    grid_points: int = 41,
    *,
    thetas: Sequence[float] | None = None,
    wait_window: tuple[float, float] | None = None,
    wait_grid_points: int = 41,
    tol: float = DEFAULT_TOL,
) -> GateCalibration:
    """Regime-II duration (ps) maximizing the worst fidelity, re-optimizing the wait per candidate."""
    states = [LogicalState(float(th)) for th in (theta_grid() if thetas is None else thetas)]
    window = wait_window or default_wait_window(params, cfg.eps_resonant)
    waits: dict[float, WaitCalibration] = {}

    def objective(gate: float) -> float:
        template = pulse_gated_schedule(params, cfg.replace(gate_duration=gate, wait_time=0.0, post_hold=0.0))
        cal = calibrate_wait_time(states, params, template, window, wait_grid_points, tol=tol)
        waits[gate] = cal
        return cal.worst_case_fidelity

    lo, hi = search_window
    if lo < 0:
        raise ParameterError("gate window must be non-negative")
    best_gate, best = _grid_search(objective, float(lo), float(hi), grid_points)
    return GateCalibration(best_gate, waits[best_gate].wait, best)
