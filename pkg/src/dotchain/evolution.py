"""Time evolution of nine-amplitude states under piecewise detuning schedules.

Each block (singlet, triplet) is propagated separately, so the two sectors
never mix. Constant segments use the exact exponential from one Hermitian
eigendecomposition. Linear ramps use the exponential midpoint rule: the ramp
is cut into ``n`` equal substeps, each propagated exactly under the
Hamiltonian frozen at the substep midpoint, and ``n`` is doubled until the
propagator stops changing.

Block propagators are cached per (params, segment), which makes repeated
transfers with many initial states (theta sweeps, calibrations) cheap.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NonConvergenceError, ParameterError
from .hamiltonian import (
    BASIS_LABELS,
    DIM,
    N_SINGLET,
    S12,
    S23,
    T12,
    T23,
    DetuningVector,
    DeviceParams,
    hamiltonian_stack,
)
from .linalg import evolution_operator, hermitian_eigh, ordered_product
from .units import HBAR

DEFAULT_TOL = 1e-8
MAX_SUBSTEPS = 2**24
_CHUNK = 1 << 14


@dataclass(frozen=True, eq=False)
class QubitState:
    """Nine complex amplitudes (singlet block then triplet block) at time ``time`` ps."""

    amps: np.ndarray
    time: float = 0.0

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=complex)
        if amps.shape != (DIM,):
            raise ParameterError(f"state must have {DIM} amplitudes, got shape {amps.shape}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    @property
    def singlet(self) -> np.ndarray:
        return self.amps[:N_SINGLET]

    @property
    def triplet(self) -> np.ndarray:
        return self.amps[N_SINGLET:]

    def populations(self) -> dict[str, float]:
        return {label: float(abs(a) ** 2) for label, a in zip(BASIS_LABELS, self.amps)}

    def with_phase(self, alpha: float) -> QubitState:
        return QubitState(self.amps * cmath.exp(1j * alpha), self.time)


def logical_vector(alpha: complex, beta: complex, *, pair: str = "12") -> np.ndarray:
    """alpha |S> + beta |T0> on dots (1,2) or (2,3)."""
    s_idx, t_idx = {"12": (S12, T12), "23": (S23, T23)}[pair]
    amps = np.zeros(DIM, dtype=complex)
    amps[s_idx] = alpha
    amps[t_idx] = beta
    return amps


@dataclass(frozen=True)
class LogicalState:
    """cos(theta) |S> + exp(i phi) sin(theta) |T0> of the singlet-triplet qubit."""

    theta: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.theta) and math.isfinite(self.phi)):
            raise ParameterError("theta and phi must be finite")
        if not 0.0 <= self.theta <= math.pi:
            raise ParameterError(f"theta must lie in [0, pi], got {self.theta!r}")
        object.__setattr__(self, "phi", math.fmod(self.phi, 2.0 * math.pi) % (2.0 * math.pi))

    @property
    def coefficients(self) -> tuple[complex, complex]:
        return math.cos(self.theta), cmath.exp(1j * self.phi) * math.sin(self.theta)

    def initial(self) -> QubitState:
        """The qubit loaded on dots (1, 2)."""
        return QubitState(logical_vector(*self.coefficients, pair="12"))

    def target(self) -> QubitState:
        """The same qubit on dots (2, 3)."""
        return QubitState(logical_vector(*self.coefficients, pair="23"))


class SegmentKind(enum.Enum):
    CONSTANT = "constant"
    LINEAR_RAMP = "linear_ramp"


@dataclass(frozen=True)
class ScheduleSegment:
    """One piece of a detuning schedule; ``duration`` in ps, detunings in meV."""

    duration: float
    eps_start: DetuningVector
    eps_end: DetuningVector
    kind: SegmentKind = SegmentKind.CONSTANT

    def __post_init__(self) -> None:
        if not math.isfinite(self.duration) or self.duration < 0:
            raise ParameterError(f"segment duration must be finite and >= 0, got {self.duration!r}")
        object.__setattr__(self, "duration", float(self.duration))
        object.__setattr__(self, "eps_start", DetuningVector.of(self.eps_start))
        object.__setattr__(self, "eps_end", DetuningVector.of(self.eps_end))
        if self.kind is SegmentKind.CONSTANT and self.eps_start != self.eps_end:
            raise ParameterError("constant segment needs eps_start == eps_end")

    @classmethod
    def constant(cls, eps, duration: float) -> ScheduleSegment:
        vec = DetuningVector.of(eps)
        return cls(duration, vec, vec, SegmentKind.CONSTANT)

    @classmethod
    def ramp(cls, eps_start, eps_end, duration: float) -> ScheduleSegment:
        return cls(duration, DetuningVector.of(eps_start), DetuningVector.of(eps_end), SegmentKind.LINEAR_RAMP)

    def eps_at(self, fraction) -> np.ndarray:
        """Detunings at fractional position(s) in ``[0, 1]``; shape ``(..., 3)``."""
        f = np.asarray(fraction, dtype=float)[..., None]
        start, end = np.array(self.eps_start), np.array(self.eps_end)
        return start + f * (end - start)

    def with_duration(self, duration: float) -> ScheduleSegment:
        return ScheduleSegment(duration, self.eps_start, self.eps_end, self.kind)


@dataclass(frozen=True)
class DetuningSchedule:
    """Contiguous sequence of segments starting at tau = 0."""

    segments: tuple[ScheduleSegment, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def total_duration(self) -> float:
        return float(sum(seg.duration for seg in self.segments))

    def with_segment_duration(self, index: int, duration: float) -> DetuningSchedule:
        segs = list(self.segments)
        segs[index] = segs[index].with_duration(duration)
        return DetuningSchedule(tuple(segs))

    def eps_at(self, tau: float) -> DetuningVector:
        """Detunings at time ``tau`` ps (segment boundaries belong to the later segment)."""
        start = 0.0
        for i, seg in enumerate(self.segments):
            last = i == len(self.segments) - 1
            if tau < start + seg.duration or last:
                frac = 0.0 if seg.duration == 0 else min(max((tau - start) / seg.duration, 0.0), 1.0)
                return DetuningVector.of(seg.eps_at(frac))
            start += seg.duration
        raise ParameterError("empty schedule has no detunings")


# ----------------------------------------------------------------------------
# block propagators


def _frozen(*arrays: np.ndarray) -> tuple[np.ndarray, ...]:
    for a in arrays:
        a.setflags(write=False)
    return arrays


@lru_cache(maxsize=1024)
def _constant_eigensystem(params: DeviceParams, eps: DetuningVector):
    h_s, h_t = hamiltonian_stack(params, np.array([eps]))
    w_s, v_s = hermitian_eigh(h_s[0])
    w_t, v_t = hermitian_eigh(h_t[0])
    return _frozen(w_s, v_s, w_t, v_t)


def constant_propagators(params: DeviceParams, eps, duration: float) -> tuple[np.ndarray, np.ndarray]:
    """Exact block propagators exp(-i H duration / hbar) at fixed detunings."""
    if duration < 0:
        raise ParameterError(f"duration must be >= 0, got {duration!r}")
    w_s, v_s, w_t, v_t = _constant_eigensystem(params, DetuningVector.of(eps))
    tau = duration / HBAR
    return evolution_operator(w_s, v_s, tau), evolution_operator(w_t, v_t, tau)


def ramp_propagators(params: DeviceParams, segment: ScheduleSegment, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint-exponential block propagators for a ramp cut into ``n`` substeps."""
    if n < 1:
        raise ParameterError("need at least one substep")
    tau = segment.duration / n / HBAR
    u_s = np.eye(N_SINGLET, dtype=complex)
    u_t = np.eye(DIM - N_SINGLET, dtype=complex)
    for lo in range(0, n, _CHUNK):
        k = np.arange(lo, min(n, lo + _CHUNK))
        h_s, h_t = hamiltonian_stack(params, segment.eps_at((k + 0.5) / n))
        u_s = ordered_product(evolution_operator(*hermitian_eigh(h_s), tau)) @ u_s
        u_t = ordered_product(evolution_operator(*hermitian_eigh(h_t), tau)) @ u_t
    return u_s, u_t


@dataclass(frozen=True)
class SegmentPropagator:
    u_s: np.ndarray
    u_t: np.ndarray
    substeps: int


@lru_cache(maxsize=512)
def segment_propagator(params: DeviceParams, segment: ScheduleSegment, tol: float = DEFAULT_TOL) -> SegmentPropagator:
    """Converged block propagators for one segment.

    Ramps double the substep count until the spectral norm of the change in
    either block propagator is below ``tol``; this bounds the change of every
    normalized state by ``tol``.
    """
    if segment.kind is SegmentKind.CONSTANT or segment.duration == 0.0:
        u_s, u_t = constant_propagators(params, segment.eps_start, segment.duration)
        return SegmentPropagator(*_frozen(u_s, u_t), substeps=1)
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol!r}")
    n = 1
    prev = ramp_propagators(params, segment, n)
    while True:
        n *= 2
        if n > MAX_SUBSTEPS:
            raise NonConvergenceError(
                f"ramp of {segment.duration} ps did not converge to tol={tol!r} within {MAX_SUBSTEPS} substeps"
            )
        cur = ramp_propagators(params, segment, n)
        change = max(np.linalg.norm(c - p, 2) for c, p in zip(cur, prev))
        if change < tol:
            return SegmentPropagator(*_frozen(*cur), substeps=n)
        prev = cur


def schedule_propagators(
    params: DeviceParams, schedule: DetuningSchedule, tol: float = DEFAULT_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Time-ordered product of segment propagators for the whole schedule."""
    u_s = np.eye(N_SINGLET, dtype=complex)
    u_t = np.eye(DIM - N_SINGLET, dtype=complex)
    for seg in schedule.segments:
        prop = segment_propagator(params, seg, tol)
        u_s = prop.u_s @ u_s
        u_t = prop.u_t @ u_t
    return u_s, u_t


def apply_blocks(state: QubitState, u_s: np.ndarray, u_t: np.ndarray, duration: float) -> QubitState:
    amps = np.concatenate([u_s @ state.singlet, u_t @ state.triplet])
    return QubitState(amps, state.time + duration)


def propagate_constant(state: QubitState, params: DeviceParams, eps, duration: float) -> QubitState:
    """exp(-i H(eps) duration / hbar) applied block by block."""
    u_s, u_t = constant_propagators(params, eps, duration)
    return apply_blocks(state, u_s, u_t, duration)


def propagate_schedule(
    state: QubitState, params: DeviceParams, schedule: DetuningSchedule, tol: float = DEFAULT_TOL
) -> QubitState:
    """Propagate through every segment of ``schedule`` in order."""
    for seg in schedule.segments:
        prop = segment_propagator(params, seg, tol)
        state = apply_blocks(state, prop.u_s, prop.u_t, seg.duration)
    return state


def clear_caches() -> None:
    _constant_eigensystem.cache_clear()
    segment_propagator.cache_clear()
