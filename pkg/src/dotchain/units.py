"""Physical constants and unit helpers.

Energies are in meV and times in ps throughout the library. Public I/O
(config files, CSV/JSON documents) uses ns for times.
"""

HBAR = 0.6582119569  # meV * ps (CODATA 2018)

PS_PER_NS = 1000.0


def ns_to_ps(value: float) -> float:
    return value * PS_PER_NS


def ps_to_ns(value: float) -> float:
    return value / PS_PER_NS
