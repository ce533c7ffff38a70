"""Analytic energy budget for evaporative plus sympathetic cooling.

A buffer gas (species 1) is evaporatively cooled with truncation parameter
eta while a lossless target gas (species 2) rides along through thermal
contact.  Each evaporated atom removes (eta+1) k_B T from the joint energy
3 (N1+N2) k_B T, so the common temperature follows

    dT/T = alpha dN1/(N1+N2),    alpha = (eta-2)/3,

with the closed-form solution (N1_ini + N2 ~ N1_ini at the start)

    T(N1) = T_min (N1/N2 + 1)^alpha,    T_min = T_ini (N2/N1_ini)^alpha.

Along that law the peak phase-space densities of the two species,

    D_i(N1) = prefactor * N_i (hbar omega_i / (k_B T(N1)))^3,

admit a closed-form target endpoint D2_max = D2(N1=0), a closed-form
buffer maximum at N1 = N2/(3 alpha - 1), and a closed-form crossing at
N1 = N2 (omega2/omega1)^3.  Comparing those three numbers with the
condensation threshold 2.612 partitions the (eta, N2) plane into cooling
regimes; the boundaries expressed as ratios N2_a/N2_c, N2_b/N2_c depend
only on eta and omega2/omega1.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .constants import BEC_THRESHOLD, HBAR, K_B, PSD_PREFACTOR
from .errors import DomainError, NoInteriorPeak

SCAN_POINTS = 4096  # default grid for the numeric regime scan


class Region(enum.Enum):
    """Cooling regimes over one full evaporation ramp.

    BUFFER_ONLY does not occur when 3*alpha - 1 > (omega1/omega2)^3 (the
    ordering the closed forms assume); it is reachable only in the
    scan-defined extrapolation zone where the buffer out-peaks the target.
    """

    DUAL_BUFFER_FIRST = "DualBufferFirst"
    DUAL_TARGET_FIRST = "DualTargetFirst"
    TARGET_ONLY = "TargetOnly"
    BUFFER_ONLY = "BufferOnly"
    NO_BEC = "NoBEC"


@dataclass(frozen=True)
class BudgetParams:
    """Inputs of the closed-form cooling model (strict SI).

    eta > 2 so that evaporation cools at all; N1_ini > N2 > 0.
    psd_prefactor rescales the classical peak phase-space density onto the
    near-degenerate value and cancels from every regime-boundary ratio.
    """

    eta: float
    N1_ini: float
    N2: float
    T_ini: float               # K
    omega1_bar: float          # rad/s, buffer geometric-mean frequency
    omega2_bar: float          # rad/s, target geometric-mean frequency
    psd_prefactor: float = PSD_PREFACTOR

    def __post_init__(self):
        if self.eta <= 2:
            raise DomainError("eta must exceed 2 (alpha > 0)")
        if not (self.N1_ini > self.N2 > 0):
            raise DomainError("need N1_ini > N2 > 0")
        if self.T_ini <= 0:
            raise DomainError("T_ini must be positive")
        if self.omega1_bar <= 0 or self.omega2_bar <= 0:
            raise DomainError("trap frequencies must be positive")
        if self.psd_prefactor <= 0:
            raise DomainError("psd_prefactor must be positive")

    @property
    def alpha(self) -> float:
        return (self.eta - 2.0) / 3.0

    @property
    def T_min(self) -> float:
        """Temperature floor reached when the buffer is fully evaporated."""
        return self.T_ini * (self.N2 / self.N1_ini) ** self.alpha


@dataclass(frozen=True)
class CoolingOutcome:
    """Regime plus the three decision numbers for one (params, N2) cell.

    closed_form_ordering is False in the extrapolation zone
    3*alpha - 1 <= (omega1/omega2)^3, where only the numeric scan defines
    the fields.  D_equal is NaN when the curves never cross inside the ramp.
    """

    region: Region
    D1_max: float
    D2_max: float
    D_equal: float
    N1_at_buffer_peak: float
    closed_form_ordering: bool


def temperature_of(N1, p: BudgetParams):
    """Common temperature after evaporating the buffer down to N1 atoms.

    Accepts scalars or arrays.  Strictly increasing in N1, equals T_min at
    N1 = 0; at N1 = N1_ini it sits a relative ~N2/N1_ini above T_ini
    because the closed form drops N2 against N1_ini.
    """
    N1 = np.asarray(N1, dtype=float)
    if np.any(N1 < 0) or np.any(N1 > p.N1_ini * (1 + 1e-12)):
        raise DomainError("N1 must lie in [0, N1_ini]")
    T = p.T_min * (N1 / p.N2 + 1.0) ** p.alpha
    return float(T) if T.ndim == 0 else T


def phase_space_density(N, T, omega_bar):
    """Classical peak phase-space density N (hbar omega_bar / k_B T)^3.

    Identical to n0 * lambda_dB^3 for a Boltzmann cloud in a harmonic trap
    of geometric-mean frequency omega_bar.  No quantum calibration applied.
    """
    T = np.asarray(T, dtype=float)
    if np.any(T <= 0):
        raise DomainError("T must be positive")
    D = np.asarray(N, dtype=float) * (HBAR * omega_bar / (K_B * T)) ** 3
    return float(D) if D.ndim == 0 else D


def psd_curves(N1, p: BudgetParams):
    """Model phase-space densities (D1, D2) of both species at buffer
    number N1, with the calibration prefactor applied to both curves."""
    T = temperature_of(N1, p)
    d1 = p.psd_prefactor * phase_space_density(N1, T, p.omega1_bar)
    d2 = p.psd_prefactor * phase_space_density(p.N2, T, p.omega2_bar)
    return d1, d2


def target_psd_max(p: BudgetParams) -> float:
    """Target phase-space density at the end of the ramp (N1 = 0).

    Closed form: prefactor / N2^(3 alpha - 1) * (N1_ini^alpha hbar
    omega2_bar / (k_B T_ini))^3, i.e. the model D2 curve evaluated at
    T_min.  Scales as N2^(1 - 3 alpha).
    """
    return p.psd_prefactor * phase_space_density(p.N2, p.T_min, p.omega2_bar)


def buffer_psd_max(p: BudgetParams) -> tuple[float, float]:
    """Location and height of the buffer's phase-space density maximum.

    Returns (N1_at_peak, D1_max) with N1_at_peak = N2/(3 alpha - 1) and

        D1_max = D2_max (omega1/omega2)^3
                 (3 alpha - 1)^(3 alpha - 1) / (3 alpha)^(3 alpha).

    Raises NoInteriorPeak when 3 alpha <= 1 (D1 is then monotone in N1 and
    only the numeric scan is meaningful).
    """
    a3 = 3.0 * p.alpha
    if a3 <= 1.0:
        raise NoInteriorPeak(
            f"3*alpha = {a3:.4g} <= 1, the buffer curve has no interior peak"
        )
    n1_peak = p.N2 / (a3 - 1.0)
    ratio = ((p.omega1_bar / p.omega2_bar) ** 3
             * (a3 - 1.0) ** (a3 - 1.0) / a3 ** a3)
    return n1_peak, target_psd_max(p) * ratio


def equal_psd(p: BudgetParams) -> float:
    """Common phase-space density where the two model curves cross.

    The crossing sits at N1 = N2 (omega2/omega1)^3 and has the value
    D2_max (1 + (omega2/omega1)^3)^(-3 alpha).
    """
    r3 = (p.omega2_bar / p.omega1_bar) ** 3
    return target_psd_max(p) * (1.0 + r3) ** (-3.0 * p.alpha)


def critical_numbers(p: BudgetParams,
                     threshold: float = BEC_THRESHOLD) -> tuple[float, float, float]:
    """Target numbers (N2_a, N2_b, N2_c) where D_equal, D1_max and D2_max
    respectively hit the condensation threshold.

    All three follow from the N2^(1 - 3 alpha) scaling, so the ratios
    N2_a/N2_c and N2_b/N2_c depend only on eta and omega2/omega1.  Raises
    NoInteriorPeak (propagated from buffer_psd_max) when 3 alpha <= 1.
    """
    a3 = 3.0 * p.alpha
    if a3 <= 1.0:
        raise NoInteriorPeak(
            f"3*alpha = {a3:.4g} <= 1, no critical numbers in closed form"
        )
    # log of D2_max at N2 = 1; every quantity then scales as N2^(1-3a)
    log_k = (math.log(p.psd_prefactor)
             + 3.0 * (p.alpha * math.log(p.N1_ini)
                      + math.log(HBAR * p.omega2_bar / (K_B * p.T_ini))))
    log_ratio_b = (3.0 * math.log(p.omega1_bar / p.omega2_bar)
                   + (a3 - 1.0) * math.log(a3 - 1.0) - a3 * math.log(a3))
    log_ratio_a = -a3 * math.log1p((p.omega2_bar / p.omega1_bar) ** 3)
    n2_c = math.exp((log_k - math.log(threshold)) / (a3 - 1.0))
    n2_b = n2_c * math.exp(log_ratio_b / (a3 - 1.0))
    n2_a = n2_c * math.exp(log_ratio_a / (a3 - 1.0))
    return n2_a, n2_b, n2_c


def _scan_grid(p: BudgetParams, n: int) -> np.ndarray:
    """Buffer numbers from N1_ini down to 0, geometric in N1 + N2 so the
    small-N1 end (where both curves move fastest) is well resolved."""
    y = np.geomspace(p.N1_ini + p.N2, p.N2, n)
    n1 = y - p.N2
    n1[0] = p.N1_ini
    n1[-1] = 0.0
    return n1


def _upcross(n1: np.ndarray, d: np.ndarray, threshold: float, p: BudgetParams,
             which: int):
    """First chronological upward threshold crossing of one model curve.

    n1 is in decreasing (time) order.  Returns the crossing N1, or None.
    """
    if d[0] >= threshold:
        return n1[0]
    above = d >= threshold
    idx = np.flatnonzero(~above[:-1] & above[1:])
    if idx.size == 0:
        return None
    i = idx[0]

    def f(x):
        return psd_curves(x, p)[which] - threshold

    return brentq(f, n1[i + 1], n1[i], xtol=1e-30, rtol=1e-15)


def classify(N2: float, p: BudgetParams,
             threshold: float = BEC_THRESHOLD,
             scan_points: int = SCAN_POINTS) -> CoolingOutcome:
    """Cooling regime for N2 target atoms, everything else taken from p.

    The regime always comes from a numeric scan of both model curves over
    the full ramp N1: N1_ini -> 0 (threshold crossings refined by Brent
    root finding and ordered chronologically), which stays valid outside
    the ordering the closed forms assume.  The reported decision numbers
    use the closed forms whenever 3 alpha - 1 > (omega1/omega2)^3 and the
    scan values otherwise.
    """
    p = replace(p, N2=float(N2))
    a3 = 3.0 * p.alpha
    ordering = (a3 - 1.0) > (p.omega1_bar / p.omega2_bar) ** 3

    n1 = _scan_grid(p, scan_points)
    d1, d2 = psd_curves(n1, p)

    up1 = _upcross(n1, d1, threshold, p, which=0)
    up2 = _upcross(n1, d2, threshold, p, which=1)
    if up1 is not None and up2 is not None:
        region = Region.DUAL_BUFFER_FIRST if up1 > up2 else Region.DUAL_TARGET_FIRST
    elif up2 is not None:
        region = Region.TARGET_ONLY
    elif up1 is not None:
        region = Region.BUFFER_ONLY
    else:
        region = Region.NO_BEC

    d2_max = target_psd_max(p)
    if ordering:
        n1_peak, d1_max = buffer_psd_max(p)
        d_eq = equal_psd(p)
    else:
        i = int(np.argmax(d1))
        n1_peak, d1_max = _refine_peak(n1, i, p)
        d_eq = _scan_crossing(n1, d1, d2, p)
    return CoolingOutcome(region=region, D1_max=d1_max, D2_max=d2_max,
                          D_equal=d_eq, N1_at_buffer_peak=n1_peak,
                          closed_form_ordering=ordering)


def _refine_peak(n1: np.ndarray, i: int, p: BudgetParams) -> tuple[float, float]:
    """Parabolic refinement of a grid argmax of the buffer curve; falls
    back to the grid point when the maximum sits on the ramp boundary."""
    if i == 0 or i == len(n1) - 1 or n1[i + 1] <= 0:
        x = n1[i]
        return x, psd_curves(x, p)[0]
    xs = np.log(n1[i - 1:i + 2])
    ys = np.array([math.log(psd_curves(x, p)[0]) for x in n1[i - 1:i + 2]])
    denom = (ys[0] - 2 * ys[1] + ys[2])
    if denom >= 0:
        return n1[i], psd_curves(n1[i], p)[0]
    shift = 0.5 * (ys[0] - ys[2]) / denom
    x = math.exp(xs[1] - shift * (xs[2] - xs[0]) / 2.0)
    return x, psd_curves(x, p)[0]


def _scan_crossing(n1, d1, d2, p: BudgetParams) -> float:
    """Value at the first chronological crossing of the two curves, NaN if
    they never meet inside the ramp."""
    diff = d1 - d2
    sign_change = np.flatnonzero(np.sign(diff[:-1]) * np.sign(diff[1:]) < 0)
    if diff[0] == 0.0:
        return float(d1[0])
    if sign_change.size == 0:
        return math.nan
    i = sign_change[0]

    def f(x):
        a, b = psd_curves(x, p)
        return a - b

    x = brentq(f, n1[i + 1], n1[i], xtol=1e-30, rtol=1e-15)
    return psd_curves(x, p)[1]


def phase_diagram(eta_grid, n2_grid, trap_ratio: float,
                  threshold: float = BEC_THRESHOLD) -> dict:
    """Regime table over an (eta, N2/N2_c) grid at fixed omega2/omega1.

    Returns {"rows": [...], "boundaries": [...]}.  Each row is one grid
    cell with keys eta, n2_over_n2c, region, d1max, d2max, dequal; each
    boundary entry carries the ratios n2a_over_n2c / n2b_over_n2c (NaN for
    eta <= 3, where the closed forms have no interior peak and the cells
    are omitted as well) and closed_form_ordering.  The ratios are independent
    of the reference N1_ini and T_ini used internally.
    """
    if trap_ratio <= 0:
        raise DomainError("trap_ratio must be positive")
    omega1 = 2.0 * math.pi * 100.0
    rows, boundaries = [], []
    for eta in np.asarray(eta_grid, dtype=float):
        p = BudgetParams(eta=float(eta), N1_ini=1e8, N2=1e4, T_ini=300e-6,
                         omega1_bar=omega1, omega2_bar=trap_ratio * omega1)
        ordering = (3.0 * p.alpha - 1.0) > (1.0 / trap_ratio) ** 3
        try:
            n2a, n2b, n2c = critical_numbers(p, threshold)
        except NoInteriorPeak:
            boundaries.append({"eta": float(eta),
                               "n2a_over_n2c": math.nan,
                               "n2b_over_n2c": math.nan,
                               "closed_form_ordering": ordering})
            continue
        boundaries.append({"eta": float(eta),
                           "n2a_over_n2c": n2a / n2c,
                           "n2b_over_n2c": n2b / n2c,
                           "closed_form_ordering": ordering})
        for ratio in np.asarray(n2_grid, dtype=float):
            out = classify(ratio * n2c, p, threshold)
            rows.append({"eta": float(eta), "n2_over_n2c": float(ratio),
                         "region": out.region.value, "d1max": out.D1_max,
                         "d2max": out.D2_max, "dequal": out.D_equal})
    return {"rows": rows, "boundaries": boundaries}
