"""Time-domain cooling trajectories for the coupled two-species system.

Finite contact mode integrates

    dN1/dt  from the evaporation model,
    dT1/dt = (eta - 2) T1 Ndot1 / (3 N1) + W_eff / (3 N1 k_B),
    dT2/dt = -W_eff / (3 N2 k_B),

with W_eff the overlap-integral heat flow of the contact module scaled by
the mass-mismatch transfer efficiency (identical to the plain heat flow
for equal masses).  Instant contact mode instead pins T1 = T2 to the
closed-form temperature law of the budget module at each buffer number.

Evaporation is either rate-driven, Ndot1 = -c gamma1 exp(-eta) N1 with
gamma1 the buffer's own collision rate, or ramp-driven through a
piecewise-linear N1(t) schedule.  Condensation flags latch when a species'
peak phase-space density crosses the threshold; the stall flag latches
when the cloud-overlap factor drops below 0.01 while evaporation is still
removing atoms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np
from scipy.integrate import solve_ivp

from .budget import BudgetParams, Region, phase_space_density, temperature_of
from .constants import BEC_THRESHOLD, K_B, PSD_PREFACTOR
from .contact import (TwoGasState, energy_exchange_rate,
                      interspecies_collision_rate, overlap_factor,
                      single_species_collision_rate, transfer_efficiency)
from .errors import DomainError, StepFailure

N1_FLOOR = 1.0          # atoms; the ramp terminates cleanly at this floor
STALL_OVERLAP = 0.01    # overlap factor below which cooling counts as stalled


@dataclass(frozen=True)
class RateDriven:
    """Ndot1 = -prefactor * gamma1 * exp(-eta) * N1.

    sigma_self is the buffer's own elastic cross section entering gamma1;
    None falls back to sigma12 (all cross sections equal).
    """

    prefactor: float = 1.0
    sigma_self: float | None = None

    def __post_init__(self):
        if self.prefactor <= 0:
            raise DomainError("evaporation prefactor must be positive")
        if self.sigma_self is not None and self.sigma_self <= 0:
            raise DomainError("sigma_self must be positive when given")


@dataclass(frozen=True)
class RampDriven:
    """Imposed piecewise-linear buffer number N1(t).

    times must be increasing and start at 0; numbers must be non-increasing
    and start at the initial buffer number.  Beyond the last knot the
    schedule holds its final value.
    """

    times: tuple[float, ...]
    numbers: tuple[float, ...]

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        n = np.asarray(self.numbers, dtype=float)
        if t.size < 2 or t.size != n.size:
            raise DomainError("ramp needs >= 2 (time, N1) knots")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise DomainError("ramp times must increase from 0")
        if np.any(np.diff(n) > 0) or np.any(n < 0):
            raise DomainError("ramp numbers must be non-increasing and >= 0")

    def value(self, t: float) -> float:
        return float(np.interp(t, self.times, self.numbers))

    def slope(self, t: float) -> float:
        ts = np.asarray(self.times)
        if t >= ts[-1]:
            return 0.0
        i = int(np.searchsorted(ts, t, side="right")) - 1
        i = max(i, 0)
        dt = self.times[i + 1] - self.times[i]
        return (self.numbers[i + 1] - self.numbers[i]) / dt


EvaporationModel = Union[RateDriven, RampDriven]


@dataclass(frozen=True)
class TrajectoryConfig:
    initial: TwoGasState
    eta: float
    evaporation_model: EvaporationModel
    contact_mode: str = "finite"          # "finite" | "instant"
    t_end: float = 100.0                  # s
    dt_max: float = 0.1                   # s, output cadence and step cap
    bec_threshold: float = BEC_THRESHOLD
    psd_prefactor: float = PSD_PREFACTOR
    stop_at_threshold: bool = False       # keep integrating past a BEC flag

    def __post_init__(self):
        if self.eta <= 2:
            raise DomainError("eta must exceed 2")
        if self.t_end <= 0 or self.dt_max <= 0:
            raise DomainError("t_end and dt_max must be positive")
        if self.bec_threshold <= 0 or self.psd_prefactor <= 0:
            raise DomainError("thresholds must be positive")
        if self.contact_mode not in ("finite", "instant"):
            raise DomainError("contact_mode must be 'finite' or 'instant'")
        if self.contact_mode == "instant" and self.initial.T1 != self.initial.T2:
            raise DomainError("instant contact requires T1 == T2 initially")
        if isinstance(self.evaporation_model, RampDriven):
            start = self.evaporation_model.numbers[0]
            if not math.isclose(start, self.initial.N1, rel_tol=1e-9):
                raise DomainError("ramp must start at the initial N1")


@dataclass(frozen=True)
class TrajectoryPoint:
    t: float
    N1: float
    T1: float
    T2: float
    D1: float
    D2: float
    Gamma: float
    overlap: float
    stalled: bool
    bec1: bool
    bec2: bool


@dataclass(frozen=True)
class TrajectoryEvent:
    """A latched flag transition with linearly interpolated time/state."""

    kind: str      # "bec1" | "bec2" | "stall" | "buffer_exhausted"
    t: float
    N1: float
    T1: float
    T2: float


def _state_at(cfg: TrajectoryConfig, N1: float, T1: float, T2: float) -> TwoGasState:
    s = cfg.initial
    return replace(s, N1=max(N1, 1e-9), T1=T1, T2=T2)


def _ndot(cfg: TrajectoryConfig, t: float, N1: float, T1: float) -> float:
    m = cfg.evaporation_model
    if isinstance(m, RampDriven):
        return m.slope(t)
    sigma1 = m.sigma_self if m.sigma_self is not None else cfg.initial.sigma12
    gamma1 = single_species_collision_rate(max(N1, N1_FLOOR), T1,
                                           cfg.initial.f1.omega_bar,
                                           sigma1, cfg.initial.M1)
    return -m.prefactor * gamma1 * math.exp(-cfg.eta) * N1


def _budget_params(cfg: TrajectoryConfig) -> BudgetParams:
    s = cfg.initial
    return BudgetParams(eta=cfg.eta, N1_ini=s.N1, N2=s.N2, T_ini=s.T1,
                        omega1_bar=s.f1.omega_bar, omega2_bar=s.f2.omega_bar,
                        psd_prefactor=cfg.psd_prefactor)


def _assemble(cfg: TrajectoryConfig, ts, N1s, T1s, T2s,
              ndots) -> list[TrajectoryPoint]:
    """Build latched trajectory points from sampled arrays."""
    s0 = cfg.initial
    pts: list[TrajectoryPoint] = []
    stalled = bec1 = bec2 = False
    for t, n1, t1, t2, nd in zip(ts, N1s, T1s, T2s, ndots):
        st = _state_at(cfg, n1, t1, t2)
        ov = overlap_factor(st)
        gamma = interspecies_collision_rate(st) if n1 > 0 else 0.0
        d1 = cfg.psd_prefactor * phase_space_density(max(n1, 0.0), t1,
                                                     s0.f1.omega_bar)
        d2 = cfg.psd_prefactor * phase_space_density(s0.N2, t2,
                                                     s0.f2.omega_bar)
        # the guard keeps the latch robust when a terminal stop event lands
        # a float ulp below the threshold it just located
        bec1 = bec1 or d1 >= cfg.bec_threshold * (1.0 - 1e-12)
        bec2 = bec2 or d2 >= cfg.bec_threshold * (1.0 - 1e-12)
        stalled = stalled or (ov < STALL_OVERLAP and nd < 0)
        pts.append(TrajectoryPoint(t=float(t), N1=float(n1), T1=float(t1),
                                   T2=float(t2), D1=float(d1), D2=float(d2),
                                   Gamma=float(gamma), overlap=float(ov),
                                   stalled=stalled, bec1=bec1, bec2=bec2))
    return pts


def _sample_grid(cfg: TrajectoryConfig, t_final: float) -> np.ndarray:
    n = int(math.ceil(t_final / cfg.dt_max)) + 1
    n = min(max(n, 200), 200_000)
    return np.linspace(0.0, t_final, n)


def _simulate_finite(cfg: TrajectoryConfig):
    s0 = cfg.initial
    xi = transfer_efficiency(s0.M1, s0.M2)

    def rhs(t, y):
        n1, t1, t2, _ = y
        n1 = max(n1, N1_FLOOR)
        nd = _ndot(cfg, t, n1, t1)
        w = xi * energy_exchange_rate(_state_at(cfg, n1, t1, t2))
        dT1 = (cfg.eta - 2.0) * t1 * nd / (3.0 * n1) + w / (3.0 * n1 * K_B)
        dT2 = -w / (3.0 * s0.N2 * K_B)
        return (nd, dT1, dT2, nd * (cfg.eta + 1.0) * K_B * t1)

    def hit_floor(t, y):
        return y[0] - N1_FLOOR
    hit_floor.terminal = True
    hit_floor.direction = -1

    def cross1(t, y):
        n1, t1 = max(y[0], 0.0), y[1]
        return (cfg.psd_prefactor * phase_space_density(n1, t1, s0.f1.omega_bar)
                - cfg.bec_threshold)

    def cross2(t, y):
        return (cfg.psd_prefactor * phase_space_density(s0.N2, y[2], s0.f2.omega_bar)
                - cfg.bec_threshold)
    cross1.terminal = cfg.stop_at_threshold
    cross2.terminal = cfg.stop_at_threshold
    cross1.direction = cross2.direction = 1

    sol = solve_ivp(rhs, (0.0, cfg.t_end), (s0.N1, s0.T1, s0.T2, 0.0),
                    method="RK45", rtol=1e-8, atol=1e-12,
                    max_step=cfg.dt_max, dense_output=True,
                    events=(hit_floor, cross1, cross2))
    if sol.status == -1:
        raise StepFailure(sol.message)

    t_final = float(sol.t[-1])
    ts = _sample_grid(cfg, t_final)
    extra = [te[0] for te in sol.t_events if te.size]
    ts = np.unique(np.concatenate([ts, np.asarray(extra, dtype=float)]))
    y = sol.sol(ts)
    n1s = np.maximum(y[0], 0.0)
    ndots = np.array([_ndot(cfg, t, n1, t1)
                      for t, n1, t1 in zip(ts, n1s, y[1])])
    pts = _assemble(cfg, ts, n1s, y[1], y[2], ndots)
    audit = {"E_removed": y[3],
             "E_total": 3.0 * K_B * (n1s * y[1] + s0.N2 * y[2]),
             "t": ts}
    return pts, audit


def _instant_n1_of_t(cfg: TrajectoryConfig, p: BudgetParams):
    """Buffer number vs time in instant mode, as sampled arrays."""
    m = cfg.evaporation_model
    if isinstance(m, RampDriven):
        knots = np.asarray(m.times, dtype=float)
        ts = np.unique(np.concatenate([
            _sample_grid(cfg, cfg.t_end), knots[knots <= cfg.t_end]]))
        return ts, np.interp(ts, m.times, m.numbers)

    def rhs(t, y):
        n1 = max(y[0], N1_FLOOR)
        return (_ndot(cfg, t, n1, temperature_of(min(n1, p.N1_ini), p)),)

    def hit_floor(t, y):
        return y[0] - N1_FLOOR
    hit_floor.terminal = True
    hit_floor.direction = -1

    sol = solve_ivp(rhs, (0.0, cfg.t_end), (cfg.initial.N1,), method="RK45",
                    rtol=1e-8, atol=1e-12, max_step=cfg.dt_max,
                    dense_output=True, events=(hit_floor,))
    if sol.status == -1:
        raise StepFailure(sol.message)
    ts = _sample_grid(cfg, float(sol.t[-1]))
    return ts, np.maximum(sol.sol(ts)[0], 0.0)


def _simulate_instant(cfg: TrajectoryConfig):
    p = _budget_params(cfg)
    ts0, n1s0 = _instant_n1_of_t(cfg, p)

    # refine sampling at geometric N1 levels so the steep small-N1 end of
    # the ramp (where both phase-space densities peak) is resolved
    lo = max(N1_FLOOR, float(n1s0.min()) + 1e-300)
    levels = np.geomspace(p.N1_ini, lo, 800)
    order = np.argsort(n1s0, kind="stable")
    t_levels = np.interp(levels, n1s0[order], ts0[order])
    ts = np.unique(np.concatenate([ts0, t_levels]))
    m = cfg.evaporation_model
    if isinstance(m, RampDriven):
        n1s = np.interp(ts, m.times, m.numbers)
    else:
        n1s = np.interp(ts, ts0, n1s0)
    n1s = np.clip(n1s, 0.0, p.N1_ini)

    Ts = temperature_of(n1s, p)
    ndots = np.array([_ndot(cfg, t, n1, T) for t, n1, T in zip(ts, n1s, Ts)])
    if cfg.stop_at_threshold:
        d1 = cfg.psd_prefactor * phase_space_density(n1s, Ts, p.omega1_bar)
        d2 = cfg.psd_prefactor * phase_space_density(p.N2, Ts, p.omega2_bar)
        hit = (d1 >= cfg.bec_threshold) | (d2 >= cfg.bec_threshold)
        if np.any(hit):
            stop = int(np.argmax(hit)) + 1
            ts, n1s, Ts, ndots = ts[:stop], n1s[:stop], Ts[:stop], ndots[:stop]
    pts = _assemble(cfg, ts, n1s, Ts, Ts, ndots)
    audit = {"E_removed": None, "E_total": None, "t": ts}
    return pts, audit


def simulate(cfg: TrajectoryConfig) -> list[TrajectoryPoint]:
    """Run one cooling trajectory and return its sampled points.

    Finite mode integrates the coupled ODEs with an adaptive embedded
    Runge-Kutta scheme (rtol 1e-8, atol 1e-12, steps capped at dt_max) and
    terminates cleanly when the buffer is exhausted; with
    stop_at_threshold it also stops at the first condensation flag,
    otherwise it keeps going and the latched flags mark the points beyond
    the model's validity.
    """
    pts, _ = simulate_with_audit(cfg)
    return pts


def simulate_with_audit(cfg: TrajectoryConfig):
    """simulate() plus an energy-bookkeeping audit dict (finite mode):
    audit["E_total"][i] - audit["E_total"][0] should equal
    audit["E_removed"][i] up to integrator tolerance."""
    if cfg.contact_mode == "instant":
        return _simulate_instant(cfg)
    return _simulate_finite(cfg)


def detect_events(points: Sequence[TrajectoryPoint]) -> list[TrajectoryEvent]:
    """Flag transitions of a trajectory, with interpolated times.

    BEC times interpolate the phase-space density through its threshold
    between the bracketing samples; the stall time interpolates the
    overlap factor through 0.01.
    """
    events: list[TrajectoryEvent] = []

    def interp(i: int, frac: float, kind: str):
        a, b = points[i - 1], points[i]
        events.append(TrajectoryEvent(
            kind=kind,
            t=a.t + frac * (b.t - a.t),
            N1=a.N1 + frac * (b.N1 - a.N1),
            T1=a.T1 + frac * (b.T1 - a.T1),
            T2=a.T2 + frac * (b.T2 - a.T2)))

    def first_flag(attr: str):
        for i, pt in enumerate(points):
            if getattr(pt, attr):
                return i
        return None

    threshold_of = {"bec1": ("D1",), "bec2": ("D2",)}
    for kind, (field_name,) in threshold_of.items():
        i = first_flag(kind)
        if i is None:
            continue
        if i == 0:
            events.append(TrajectoryEvent(kind, points[0].t, points[0].N1,
                                          points[0].T1, points[0].T2))
            continue
        d0 = getattr(points[i - 1], field_name)
        d1 = getattr(points[i], field_name)
        frac = 0.0 if d1 == d0 else (BEC_THRESHOLD - d0) / (d1 - d0)
        interp(i, min(max(frac, 0.0), 1.0), kind)

    i = first_flag("stalled")
    if i is not None:
        if i == 0:
            events.append(TrajectoryEvent("stall", points[0].t, points[0].N1,
                                          points[0].T1, points[0].T2))
        else:
            o0, o1 = points[i - 1].overlap, points[i].overlap
            frac = 0.0 if o1 == o0 else (STALL_OVERLAP - o0) / (o1 - o0)
            interp(i, min(max(frac, 0.0), 1.0), "stall")

    floor = N1_FLOOR * (1.0 + 1e-12)
    for i, pt in enumerate(points):
        if pt.N1 <= floor:
            if i == 0:
                events.append(TrajectoryEvent(
                    "buffer_exhausted", points[0].t, points[0].N1,
                    points[0].T1, points[0].T2))
            else:
                n0, n1 = points[i - 1].N1, points[i].N1
                frac = 0.0 if n1 == n0 else (N1_FLOOR - n0) / (n1 - n0)
                interp(i, min(max(frac, 0.0), 1.0), "buffer_exhausted")
            break
    events.sort(key=lambda e: e.t)
    return events


def region_from_events(points: Sequence[TrajectoryPoint]) -> Region:
    """Map the chronological condensation events of a full-ramp trajectory
    onto the regime labels of the budget classifier."""
    events = {e.kind: e.t for e in detect_events(points)}
    t1, t2 = events.get("bec1"), events.get("bec2")
    if t1 is not None and t2 is not None:
        return Region.DUAL_BUFFER_FIRST if t1 < t2 else Region.DUAL_TARGET_FIRST
    if t2 is not None:
        return Region.TARGET_ONLY
    if t1 is not None:
        return Region.BUFFER_ONLY
    return Region.NO_BEC
