"""Three-dot Hubbard Hamiltonian in the two-electron S_z = 0 sector.

The Hilbert space is nine dimensional and splits exactly into a singlet
block (6 charge configurations) and an unpolarized-triplet block
(3 configurations); nothing couples the two. Basis ordering is fixed:

    singlet:  S(3,3), S(2,3), S(1,3), S(2,2), S(1,2), S(1,1)   -> 0..5
    triplet:  T0(1,2), T0(1,3), T0(2,3)                         -> 6..8

so a full state vector is the singlet amplitudes followed by the triplet
amplitudes. Detunings enter as -(mu + eps_i) per electron on dot i; the
nearest-neighbour Coulomb energy U_12 = U_23 is the single parameter ``k``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, SingularDenominatorError

SQRT2 = math.sqrt(2.0)

SINGLET_LABELS = ("S33", "S23", "S13", "S22", "S12", "S11")
TRIPLET_LABELS = ("T12", "T13", "T23")
BASIS_LABELS = SINGLET_LABELS + TRIPLET_LABELS

N_SINGLET = len(SINGLET_LABELS)
N_TRIPLET = len(TRIPLET_LABELS)
DIM = N_SINGLET + N_TRIPLET

# Full-vector indices of the logical states at either end of the triple.
S12 = SINGLET_LABELS.index("S12")
S23 = SINGLET_LABELS.index("S23")
T12 = N_SINGLET + TRIPLET_LABELS.index("T12")
T23 = N_SINGLET + TRIPLET_LABELS.index("T23")

DEFAULT_DENOMINATOR_FLOOR = 1e-9  # meV


@dataclass(frozen=True)
class DeviceParams:
    """Physical constants of the dot chain, all in meV.

    ``t`` and ``j_e`` may be zero (the uncoupled limit); Coulomb energies
    must satisfy ``u >= k >= 0``.
    """

    t: float
    j_e: float
    u: float
    k: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        for name in ("t", "j_e", "u", "k", "mu"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.t < 0 or self.j_e < 0:
            raise ParameterError("tunnel coupling t and exchange j_e must be non-negative")
        if self.k < 0:
            raise ParameterError("interdot Coulomb energy k must be non-negative")
        if self.u < self.k:
            raise ParameterError(f"intradot u={self.u} must not be below interdot k={self.k}")

    def replace(self, **changes: float) -> DeviceParams:
        fields = {"t": self.t, "j_e": self.j_e, "u": self.u, "k": self.k, "mu": self.mu}
        fields.update(changes)
        return DeviceParams(**fields)

    @property
    def pulse_gated_condition(self) -> bool:
        """True when U = 2K, i.e. singlet and triplet couplings coincide."""
        return math.isclose(self.u, 2.0 * self.k, rel_tol=1e-12, abs_tol=1e-15)


class DetuningVector(NamedTuple):
    """Detunings (eps_1, eps_2, eps_3) of the three dots in meV."""

    eps1: float
    eps2: float
    eps3: float

    @classmethod
    def of(cls, values) -> DetuningVector:
        e1, e2, e3 = (float(v) for v in values)
        vec = cls(e1, e2, e3)
        if not all(math.isfinite(v) for v in vec):
            raise ParameterError(f"detunings must be finite, got {tuple(values)!r}")
        return vec

    def shifted(self, c: float) -> DetuningVector:
        return DetuningVector(self.eps1 + c, self.eps2 + c, self.eps3 + c)


@dataclass(frozen=True)
class HamiltonianBlocks:
    """Singlet (6x6) and triplet (3x3) Hamiltonian blocks in meV."""

    h_s: np.ndarray
    h_t: np.ndarray

    def full(self) -> np.ndarray:
        """9x9 block-diagonal assembly; off-block entries are exact zeros."""
        h = np.zeros((DIM, DIM), dtype=complex)
        h[:N_SINGLET, :N_SINGLET] = self.h_s
        h[N_SINGLET:, N_SINGLET:] = self.h_t
        return h


def hamiltonian_stack(params: DeviceParams, eps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized block construction for an ``(m, 3)`` array of detunings.

    Returns complex arrays of shape ``(m, 6, 6)`` and ``(m, 3, 3)``.
    """
    eps = np.asarray(eps, dtype=float)
    if eps.ndim != 2 or eps.shape[1] != 3:
        raise ParameterError(f"expected detunings of shape (m, 3), got {eps.shape}")
    if not np.all(np.isfinite(eps)):
        raise ParameterError("detunings must be finite")
    e1, e2, e3 = eps[:, 0], eps[:, 1], eps[:, 2]
    t, je, u, k, mu = params.t, params.j_e, params.u, params.k, params.mu
    m = eps.shape[0]

    h_s = np.zeros((m, N_SINGLET, N_SINGLET), dtype=complex)
    h_s[:, 0, 0] = u - 2.0 * (e3 + mu)
    h_s[:, 1, 1] = je + k - e2 - e3 - 2.0 * mu
    h_s[:, 2, 2] = -(e1 + e3 + 2.0 * mu)
    h_s[:, 3, 3] = u - 2.0 * (e2 + mu)
    h_s[:, 4, 4] = je + k - e1 - e2 - 2.0 * mu
    h_s[:, 5, 5] = u - 2.0 * (e1 + mu)
    for i, j, amp in (
        (0, 1, -SQRT2 * t),
        (1, 2, -t),
        (1, 3, -SQRT2 * t),
        (2, 4, -t),
        (3, 4, -SQRT2 * t),
        (4, 5, -SQRT2 * t),
    ):
        h_s[:, i, j] = amp
        h_s[:, j, i] = amp

    h_t = np.zeros((m, N_TRIPLET, N_TRIPLET), dtype=complex)
    h_t[:, 0, 0] = -je + k - e1 - e2 - 2.0 * mu
    h_t[:, 1, 1] = -(e1 + e3 + 2.0 * mu)
    h_t[:, 2, 2] = -je + k - e2 - e3 - 2.0 * mu
    for i, j in ((0, 1), (1, 2)):
        h_t[:, i, j] = -t
        h_t[:, j, i] = -t
    return h_s, h_t


def build_hamiltonian(params: DeviceParams, eps) -> HamiltonianBlocks:
    """Singlet and triplet blocks at fixed detunings ``eps = (e1, e2, e3)``."""
    vec = DetuningVector.of(eps)
    h_s, h_t = hamiltonian_stack(params, np.array([vec]))
    return HamiltonianBlocks(h_s=h_s[0], h_t=h_t[0])


def _checked(denominator: float, floor: float, what: str) -> float:
    if abs(denominator) < floor:
        raise SingularDenominatorError(f"{what} = {denominator!r} meV is below the floor {floor!r} meV")
    return denominator


def sw_effective_couplings(
    params: DeviceParams,
    eps_resonant: float,
    *,
    floor: float = DEFAULT_DENOMINATOR_FLOOR,
) -> tuple[float, float]:
    """Second-order (Schrieffer-Wolff) couplings S(1,2)<->S(2,3) and T0(1,2)<->T0(2,3).

    With both outer dots at ``eps_resonant`` and the middle dot at zero::

        j_s = -t^2 (-4/(U - K + eps) + 2/(K + eps))
        j_t = -t^2 ( 2/(K + eps))

    so |j_s| == |j_t| when U == 2K.
    """
    singlet_gap = _checked(params.u - params.k + eps_resonant, floor, "U - K + eps")
    triplet_gap = _checked(params.k + eps_resonant, floor, "K + eps")
    t2 = params.t * params.t
    j_s = -t2 * (-4.0 / singlet_gap + 2.0 / triplet_gap)
    j_t = -t2 * (2.0 / triplet_gap)
    return j_s, j_t


def pulse_gated_coupling(params: DeviceParams, eps_resonant: float) -> float:
    """J = 2 t^2 / (K + eps), the common coupling strength at U = 2K."""
    return -sw_effective_couplings(params, eps_resonant)[1]


def leading_order_coupling_error(
    params: DeviceParams,
    eps_resonant: float,
    delta_u: float,
    *,
    floor: float = DEFAULT_DENOMINATOR_FLOOR,
) -> tuple[float, float]:
    """Mismatch j_s + j_t when the intradot energy is detuned to U = 2K + delta_u.

    ``params.u`` is ignored; the intradot energy is rebuilt from ``params.k``.
    Returns ``(approx, exact)`` where ``approx = -4 t^2 delta_u / (K + eps)^2`` is
    the first-order Taylor term and ``exact`` uses the closed-form couplings.
    """
    x = _checked(params.k + eps_resonant, floor, "K + eps")
    perturbed = params.replace(u=2.0 * params.k + delta_u)
    j_s, j_t = sw_effective_couplings(perturbed, eps_resonant, floor=floor)
    approx = -4.0 * params.t * params.t * delta_u / (x * x)
    return approx, j_s + j_t
