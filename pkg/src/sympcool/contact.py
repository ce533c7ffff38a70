"""Interspecies thermal contact: collision rate, energy flow, relaxation.

Two harmonically trapped Gaussian clouds at temperatures T1, T2 whose
centres are vertically offset by delta exchange energy through elastic
cross collisions.  The total cross-collision rate is

    Gamma = N1 N2 / (pi^2 rho_x rho_y rho_z) * sigma12 * V
            * exp(-delta^2 / (2 rho_z^2)),

where rho_i^2 = k_B T1/(M1 w1i^2) + k_B T2/(M2 w2i^2) combines the two rms
cloud sizes and V = sqrt(k_B T1/M1 + k_B T2/M2) is the thermal relative
speed scale.  Each collision moves k_B (T2 - T1) on average (equal
masses), so the heat flow into the buffer is W = k_B (T2 - T1) Gamma and
the temperature difference relaxes at

    1/tau = xi * Gamma * (N1 + N2) / (3 N1 N2),

with the mass-mismatch transfer efficiency xi = 4 M1 M2/(M1+M2)^2.  For
equal masses and a common trap this reduces to gamma/3 with gamma the
single-species collision rate; for unequal masses (equal traps, T1 ~ T2)
it reproduces the same formula with M replaced by the equivalent mass
8 (M1 M2)^2 / (M1 + M2)^3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import K_B
from .errors import DomainError
from .physics import TrapFrequencies


@dataclass(frozen=True)
class TwoGasState:
    """Instantaneous two-species state (strict SI).

    delta is the vertical distance between the cloud centres; the factory
    from_traps fills it from the trap sags.
    """

    N1: float
    N2: float
    T1: float              # K
    T2: float              # K
    f1: TrapFrequencies
    f2: TrapFrequencies
    M1: float              # kg
    M2: float              # kg
    sigma12: float         # m^2
    delta: float           # m

    def __post_init__(self):
        if self.N1 <= 0 or self.N2 <= 0:
            raise DomainError("atom numbers must be positive")
        if self.T1 <= 0 or self.T2 <= 0:
            raise DomainError("temperatures must be positive")
        if self.M1 <= 0 or self.M2 <= 0:
            raise DomainError("masses must be positive")
        if self.sigma12 < 0:
            raise DomainError("sigma12 must be >= 0")

    @classmethod
    def from_traps(cls, N1, N2, T1, T2, f1: TrapFrequencies,
                   f2: TrapFrequencies, M1, M2, sigma12) -> "TwoGasState":
        return cls(N1=N1, N2=N2, T1=T1, T2=T2, f1=f1, f2=f2, M1=M1, M2=M2,
                   sigma12=sigma12, delta=f1.sag - f2.sag)


def rms_sizes(s: TwoGasState) -> tuple[float, float, float]:
    """Combined rms widths (rho_x, rho_y, rho_z) of the pair density."""
    def rho(w1, w2):
        return math.sqrt(K_B * s.T1 / (s.M1 * w1 ** 2)
                         + K_B * s.T2 / (s.M2 * w2 ** 2))
    return (rho(s.f1.omega_x, s.f2.omega_x),
            rho(s.f1.omega_y, s.f2.omega_y),
            rho(s.f1.omega_z, s.f2.omega_z))


def overlap_factor(s: TwoGasState) -> float:
    """Gaussian suppression exp(-delta^2 / (2 rho_z^2)) of the cross rate."""
    rho_z = rms_sizes(s)[2]
    return math.exp(-s.delta ** 2 / (2.0 * rho_z ** 2))


def interspecies_collision_rate(s: TwoGasState) -> float:
    """Total cross-collision rate Gamma [1/s] between the two clouds."""
    rx, ry, rz = rms_sizes(s)
    v = math.sqrt(K_B * s.T1 / s.M1 + K_B * s.T2 / s.M2)
    return (s.N1 * s.N2 / (math.pi ** 2 * rx * ry * rz) * s.sigma12 * v
            * math.exp(-s.delta ** 2 / (2.0 * rz ** 2)))


def energy_exchange_rate(s: TwoGasState) -> float:
    """Heat flow W [W] into the buffer: k_B (T2 - T1) Gamma.

    Positive when the target is hotter.  This is the equal-mass
    per-collision average; the mass-mismatch efficiency enters only the
    relaxation rate below.
    """
    return K_B * (s.T2 - s.T1) * interspecies_collision_rate(s)


def transfer_efficiency(M1: float, M2: float) -> float:
    """Fraction xi = 4 M1 M2 / (M1 + M2)^2 of k_B (T2 - T1) moved per
    cross collision; equals 1 for equal masses."""
    return 4.0 * M1 * M2 / (M1 + M2) ** 2


def equivalent_mass(M1: float, M2: float) -> float:
    """Equivalent mass 8 (M1 M2)^2 / (M1 + M2)^3 [kg].

    Symmetric, maximal (= M) at M1 = M2 = M; replacing M by this value in
    the single-trap relaxation formula captures the slowdown of
    interspecies thermalization for mismatched masses.
    """
    if M1 <= 0 or M2 <= 0:
        raise DomainError("masses must be positive")
    return 8.0 * (M1 * M2) ** 2 / (M1 + M2) ** 3


def interspecies_thermalization_rate(s: TwoGasState) -> float:
    """Relaxation rate 1/tau [1/s] of the temperature difference T1 - T2.

    Computed as xi * Gamma * (N1 + N2)/(3 N1 N2) from the actual overlap
    integral, so it stays valid for unequal trap frequencies and a finite
    centre offset.  For equal masses in a common trap this is exactly

        1/tau = (N1 + N2) omega_bar^3 sigma12 M / (6 pi^2 k_B T),

    with T = (T1 + T2)/2, i.e. gamma/3 in the single-species limit.
    """
    return (transfer_efficiency(s.M1, s.M2)
            * interspecies_collision_rate(s)
            * (s.N1 + s.N2) / (3.0 * s.N1 * s.N2))


def single_species_collision_rate(N: float, T: float, omega_bar: float,
                                  sigma: float, mass: float) -> float:
    """Mean elastic collision rate per atom in one trapped thermal cloud:

        gamma = N omega_bar^3 sigma M / (2 pi^2 k_B T).

    Equals n_bar sigma v_rel_bar with n_bar the density-weighted mean
    density and v_rel_bar the mean relative speed.
    """
    if N <= 0 or T <= 0 or omega_bar <= 0 or mass <= 0:
        raise DomainError("N, T, omega_bar and mass must be positive")
    if sigma < 0:
        raise DomainError("sigma must be >= 0")
    return N * omega_bar ** 3 * sigma * mass / (2.0 * math.pi ** 2 * K_B * T)
