"""Fidelity metrics, parameter sweeps and free-evolution studies."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import simpson

from .errors import DotChainError, ParameterError
from .evolution import DEFAULT_TOL, DetuningSchedule, LogicalState, QubitState, ScheduleSegment
from .hamiltonian import N_SINGLET, S12, S23, T12, T23, DeviceParams, build_hamiltonian
from .linalg import hermitian_eigh
from .protocols import AdiabaticConfig, PulseGatedConfig, build_schedule, run_transfer
from .units import HBAR, ns_to_ps, ps_to_ns

SWEEP_CSV_HEADER = ("theta", "phi", "delta_u_mev", "fidelity", "infidelity", "leakage_total", "transfer_time_ns")
TRACE_CSV_HEADER = ("time_ns", "average_fidelity", "min_fidelity")
SIMPSON_TOL = 1e-6


def fidelity(final: QubitState, target: QubitState) -> float:
    """|<target|final>|^2."""
    return float(abs(np.vdot(target.amps, final.amps)) ** 2)


def _simpson_x(values: np.ndarray, x: np.ndarray) -> np.ndarray:
    # (1/2) int_0^pi F sin(theta) dtheta == (1/2) int_-1^1 F dx with x = cos(theta)
    return 0.5 * simpson(values, x=x, axis=0)


def average_fidelity(
    f_of_theta: Callable[[np.ndarray], np.ndarray] | Sequence[float] | np.ndarray,
    *,
    tol: float = SIMPSON_TOL,
    max_intervals: int = 1 << 16,
):
    """(1/2) * integral_0^pi F(theta) sin(theta) dtheta by composite Simpson in x = cos(theta).

    ``f_of_theta`` is either samples on a uniform theta grid over [0, pi] (odd
    count, at least 3) or a vectorized callable. Working in x makes the rule
    exact for any F that is quadratic in cos(theta), constants included, at
    every refinement level. A callable is sampled uniformly in x and may
    return extra trailing axes (one integral per column); the interval count
    is doubled until every integral changes by less than ``tol``.
    """
    if not callable(f_of_theta):
        samples = np.asarray(f_of_theta, dtype=float)
        n = samples.shape[0]
        if n < 3 or n % 2 == 0:
            raise ParameterError(f"Simpson needs an odd number (>= 3) of samples, got {n}")
        x = np.cos(np.linspace(0.0, math.pi, n))
        result = _simpson_x(samples[::-1], x[::-1])
        return float(result) if np.ndim(result) == 0 else result

    def level(intervals: int) -> np.ndarray:
        x = np.linspace(-1.0, 1.0, intervals + 1)
        thetas = np.arccos(x)
        return _simpson_x(np.asarray(f_of_theta(thetas), dtype=float), x)

    intervals = 2
    prev = level(intervals)
    while True:
        intervals *= 2
        cur = level(intervals)
        if np.max(np.abs(cur - prev)) < tol or intervals >= max_intervals:
            return float(cur) if np.ndim(cur) == 0 else cur
        prev = cur


class Scheme(enum.Enum):
    PULSE_GATED = "pulse_gated"
    ADIABATIC = "adiabatic"
    FREE_EVOLUTION = "free_evolution"


@dataclass(frozen=True)
class FreeEvolutionConfig:
    """Hold all detunings at ``eps`` (resonance by default) for ``duration`` ps."""

    duration: float
    eps: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def schedule(self) -> DetuningSchedule:
        return DetuningSchedule((ScheduleSegment.constant(self.eps, self.duration),))


ProtocolConfig = PulseGatedConfig | AdiabaticConfig | FreeEvolutionConfig

_SCHEME_CONFIG = {
    Scheme.PULSE_GATED: PulseGatedConfig,
    Scheme.ADIABATIC: AdiabaticConfig,
    Scheme.FREE_EVOLUTION: FreeEvolutionConfig,
}


@dataclass(frozen=True)
class SweepSpec:
    theta_points: int = 33
    theta_range: tuple[float, float] = (0.0, math.pi)
    phi_values: tuple[float, ...] = (0.0,)
    delta_u_values: tuple[float, ...] = (0.0,)
    scheme: Scheme = Scheme.PULSE_GATED

    def __post_init__(self) -> None:
        object.__setattr__(self, "phi_values", tuple(float(p) for p in self.phi_values))
        object.__setattr__(self, "delta_u_values", tuple(float(d) for d in self.delta_u_values))
        lo, hi = self.theta_range
        if self.theta_points < 2:
            raise ParameterError(f"theta_points must be >= 2, got {self.theta_points}")
        if not 0.0 <= lo < hi <= math.pi:
            raise ParameterError(f"theta_range must lie within [0, pi], got {self.theta_range}")
        if not self.phi_values or not self.delta_u_values:
            raise ParameterError("phi_values and delta_u_values must be non-empty")

    @property
    def thetas(self) -> np.ndarray:
        return np.linspace(self.theta_range[0], self.theta_range[1], self.theta_points)


@dataclass(frozen=True)
class SweepRecord:
    theta: float
    phi: float
    delta_u: float
    fidelity: float
    infidelity: float
    leakage_total: float
    transfer_time_ns: float
    error: str | None = None


def _fmt(x: float) -> str:
    return format(x, ".17g")


@dataclass(frozen=True)
class SweepTable:
    records: tuple[SweepRecord, ...] = field(default_factory=tuple)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def select(self, *, phi: float | None = None, delta_u: float | None = None) -> list[SweepRecord]:
        return [
            r
            for r in self.records
            if (phi is None or r.phi == phi) and (delta_u is None or r.delta_u == delta_u)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(SWEEP_CSV_HEADER)
        for r in self.records:
            writer.writerow(
                [_fmt(v) for v in (r.theta, r.phi, r.delta_u, r.fidelity, r.infidelity, r.leakage_total, r.transfer_time_ns)]
            )
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for r in self.records:
            row = {name: (None if isinstance(v, float) and math.isnan(v) else v) for name, v in vars(r).items()}
            row["delta_u_mev"] = row.pop("delta_u")
            rows.append(row)
        return json.dumps({"records": rows}, indent=2) + "\n"


def _sweep_group(args) -> list[SweepRecord]:
    params, delta_u, schedule, thetas, phis, tol = args
    try:
        perturbed = params.replace(u=params.u + delta_u)
    except DotChainError as exc:
        return [_failed(th, ph, delta_u, exc) for th in thetas for ph in phis]
    rows = []
    for th in thetas:
        for ph in phis:
            try:
                res = run_transfer(LogicalState(float(th), ph), perturbed, schedule, tol=tol)
                rows.append(
                    SweepRecord(float(th), ph, delta_u, res.fidelity, res.infidelity, res.leakage_total, res.transfer_time)
                )
            except DotChainError as exc:
                rows.append(_failed(th, ph, delta_u, exc))
    return rows


def _failed(theta, phi, delta_u, exc) -> SweepRecord:
    nan = float("nan")
    return SweepRecord(float(theta), phi, delta_u, nan, nan, nan, nan, error=str(exc))


def sweep(
    spec: SweepSpec,
    params: DeviceParams,
    config: ProtocolConfig,
    *,
    tol: float = DEFAULT_TOL,
    workers: int = 1,
) -> SweepTable:
    """Run one transfer per (theta, phi, delta_u) grid point.

    ``delta_u`` offsets the intradot energy (U -> U + delta_u) while the
    schedule stays the one built for the unperturbed device. Rows come out
    theta-major, then phi, then delta_u, whatever the worker count.
    """
    expected = _SCHEME_CONFIG[spec.scheme]
    if not isinstance(config, expected):
        raise ParameterError(f"scheme {spec.scheme.value} needs a {expected.__name__}, got {type(config).__name__}")
    schedule = config.schedule() if isinstance(config, FreeEvolutionConfig) else build_schedule(params, config)

    thetas = spec.thetas
    jobs = [(params, d, schedule, thetas, spec.phi_values, tol) for d in spec.delta_u_values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            groups = list(pool.map(_sweep_group, jobs))
    else:
        groups = [_sweep_group(job) for job in jobs]

    n_phi = len(spec.phi_values)
    records = []
    for i in range(len(thetas)):
        for j in range(n_phi):
            for group in groups:
                records.append(group[i * n_phi + j])
    return SweepTable(tuple(records))


# ----------------------------------------------------------------------------
# free evolution


def find_peaks(values: np.ndarray) -> list[int]:
    """Indices of strict local maxima; a flat-topped peak reports its first sample."""
    v = np.asarray(values, dtype=float)
    peaks = []
    i, n = 1, len(v)
    while i < n - 1:
        if v[i] > v[i - 1]:
            j = i
            while j + 1 < n and v[j + 1] == v[i]:
                j += 1
            if j + 1 < n and v[j + 1] < v[i]:
                peaks.append(i)
            i = j + 1
        else:
            i += 1
    return peaks


@dataclass(frozen=True, eq=False)
class FreeEvolutionTrace:
    times: np.ndarray  # ps
    average_fidelity: np.ndarray
    min_fidelity: np.ndarray
    peaks: list[tuple[float, float]]  # (ps, F_ave), sorted by time
    earliest_coherent: float | None  # ps
    threshold: float

    def highest_peak(self, within: float | None = None) -> tuple[float, float] | None:
        """Largest peak, optionally restricted to times <= ``within`` ps."""
        cands = [p for p in self.peaks if within is None or p[0] <= within]
        if not cands:
            return None
        return max(cands, key=lambda p: (p[1], -p[0]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_CSV_HEADER)
        for t, fa, fm in zip(self.times, self.average_fidelity, self.min_fidelity):
            writer.writerow([_fmt(ps_to_ns(float(t))), _fmt(float(fa)), _fmt(float(fm))])
        return buf.getvalue()

    def to_json(self) -> str:
        best = self.highest_peak()
        doc = {
            "times_ns": [ps_to_ns(float(t)) for t in self.times],
            "average_fidelity": [float(x) for x in self.average_fidelity],
            "min_fidelity": [float(x) for x in self.min_fidelity],
            "peaks": [[ps_to_ns(t), v] for t, v in self.peaks],
            "highest_peak": None if best is None else [ps_to_ns(best[0]), best[1]],
            "earliest_coherent_ns": None if self.earliest_coherent is None else ps_to_ns(self.earliest_coherent),
            "threshold": self.threshold,
        }
        return json.dumps(doc, indent=2) + "\n"


def transfer_amplitudes(params: DeviceParams, eps, times: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """<S23|U(tau)|S12> and <T23|U(tau)|T12> under constant detunings, for each time in ps."""
    blocks = build_hamiltonian(params, eps)
    w_s, v_s = hermitian_eigh(blocks.h_s)
    w_t, v_t = hermitian_eigh(blocks.h_t)
    tau = np.asarray(times, dtype=float)[:, None] / HBAR
    a_s = (np.exp(-1j * w_s[None, :] * tau) * v_s[S23] * np.conj(v_s[S12])).sum(axis=1)
    i0, i2 = T12 - N_SINGLET, T23 - N_SINGLET
    a_t = (np.exp(-1j * w_t[None, :] * tau) * v_t[i2] * np.conj(v_t[i0])).sum(axis=1)
    return a_s, a_t


def logical_fidelity(theta, a_s, a_t) -> np.ndarray:
    """|cos^2(theta) a_s + sin^2(theta) a_t|^2; the phase phi drops out exactly."""
    c2 = np.cos(theta) ** 2
    s2 = np.sin(theta) ** 2
    return np.abs(np.multiply.outer(c2, a_s) + np.multiply.outer(s2, a_t)) ** 2


def free_evolution_study(
    params: DeviceParams,
    duration: float,
    sample_dt: float = 1.0,
    threshold: float = 0.7,
    *,
    theta_points: int = 33,
    eps=(0.0, 0.0, 0.0),
) -> FreeEvolutionTrace:
    """Average and worst-case fidelity versus hold time at fixed detunings.

    ``duration`` is in ns and ``sample_dt`` in ps.
    """
    if not 0.0 < sample_dt <= 1.0:
        raise ParameterError(f"sample_dt must be in (0, 1] ps, got {sample_dt!r}")
    if duration < 0:
        raise ParameterError("duration must be non-negative")
    n = int(math.floor(ns_to_ps(duration) / sample_dt + 1e-9))
    times = sample_dt * np.arange(n + 1)
    a_s, a_t = transfer_amplitudes(params, eps, times)

    f_ave = np.clip(average_fidelity(lambda th: logical_fidelity(th, a_s, a_t)), 0.0, 1.0)
    f_ave = np.atleast_1d(f_ave)
    f_min = logical_fidelity(np.linspace(0.0, math.pi, theta_points), a_s, a_t).min(axis=0)

    peaks = [(float(times[i]), float(f_ave[i])) for i in find_peaks(f_ave)]
    above = np.nonzero(f_min > threshold)[0]
    earliest = float(times[above[0]]) if above.size else None
    return FreeEvolutionTrace(times, f_ave, f_min, peaks, earliest, threshold)
