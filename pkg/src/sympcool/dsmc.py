"""Direct simulation Monte Carlo of trapped clouds with elastic collisions.

Test particles move on the exact flow of the harmonic-plus-gravity
potential (a rotation in each axis' phase plane about the sagged
equilibrium, which is symplectic and conserves energy to round-off, so
the free flight places no accuracy limit on dt).  Collisions use a
majorant-frequency (no-time-counter) scheme on a uniform virtual cell
grid: in every cell and for every species pair a number of candidate
pairs proportional to sigma * v_max * dt is drawn, each accepted with
probability |v_rel| / v_max, and accepted pairs scatter isotropically in
their centre-of-mass frame, conserving momentum exactly and kinetic
energy to round-off.

Because the velocity distribution of a harmonic-trap equilibrium is the
same everywhere in the cloud, a single adaptive majorant per species pair
is as sharp as a per-cell one; cells are addressed through sorted integer
keys, so no dense grid arrays are ever allocated.  All randomness flows
from one counter-based Philox generator, making runs reproducible
bit-for-bit for a given (config, seed).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .constants import K_B
from .errors import CellUnderflowWarning, DomainError, InsufficientDecay
from .physics import SpeciesState, TrapFrequencies

_CELL_KEY_SPAN = 1 << 20   # cells per axis in the virtual (unallocated) grid


@dataclass
class ParticleEnsemble:
    """Test particles of one species; each stands for `weight` real atoms."""

    species: SpeciesState
    positions: np.ndarray     # (n, 3) m
    velocities: np.ndarray    # (n, 3) m/s
    weight: float = 1.0

    def __post_init__(self):
        self.positions = np.ascontiguousarray(self.positions, dtype=float)
        self.velocities = np.ascontiguousarray(self.velocities, dtype=float)
        if self.positions.shape != self.velocities.shape \
                or self.positions.ndim != 2 or self.positions.shape[1] != 3:
            raise DomainError("positions/velocities must both be (n, 3)")
        if len(self.positions) < 2:
            raise DomainError("an ensemble needs at least 2 test particles")
        if self.weight <= 0:
            raise DomainError("weight must be positive")

    @property
    def n(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class DsmcConfig:
    """One or two ensembles, their traps, and the numerical knobs.

    dt must resolve the fastest trap period (dt < 0.05 * 2 pi / max omega)
    and cell_size must resolve the density profile (<= min rms size / 4,
    checked against each ensemble's measured kinetic temperature).
    """

    ensembles: tuple[ParticleEnsemble, ...]
    traps: tuple[TrapFrequencies, ...]
    dt: float
    t_end: float
    cell_size: float
    rng_seed: int
    record_every: int = 10

    def __post_init__(self):
        if len(self.ensembles) not in (1, 2) \
                or len(self.traps) != len(self.ensembles):
            raise DomainError("need 1 or 2 ensembles with matching traps")
        if self.dt <= 0 or self.t_end <= 0 or self.cell_size <= 0:
            raise DomainError("dt, t_end and cell_size must be positive")
        if self.record_every < 1:
            raise DomainError("record_every must be >= 1")
        w_max = max(max(f.omega_x, f.omega_y, f.omega_z) for f in self.traps)
        if self.dt >= 0.05 * 2.0 * math.pi / w_max:
            raise DomainError(
                f"dt = {self.dt:.3g} s does not resolve the fastest trap "
                f"period, need < {0.05 * 2 * math.pi / w_max:.3g} s")
        for ens, trap in zip(self.ensembles, self.traps):
            t_kin = kinetic_temperature(ens.velocities, ens.species.mass)
            if t_kin == 0.0:
                continue
            rho_min = min(
                math.sqrt(K_B * t_kin / ens.species.mass) / w
                for w in (trap.omega_x, trap.omega_y, trap.omega_z))
            if self.cell_size > rho_min / 4.0:
                raise DomainError(
                    f"cell_size = {self.cell_size:.3g} m exceeds a quarter "
                    f"of the smallest cloud size {rho_min:.3g} m")
        weights = {e.weight for e in self.ensembles}
        if len(weights) != 1:
            raise DomainError("all ensembles must share one weight")


@dataclass
class DsmcResult:
    times: np.ndarray            # (k,)
    temps: np.ndarray            # (k, n_species) kinetic temperatures, K
    collisions_cum: np.ndarray   # (k,) physical collision count
    ensembles: tuple[ParticleEnsemble, ...]
    lone_particle_fraction: float
    # physical collision count per channel, keyed by the ensemble index
    # pair (i, i) for same-species and (0, 1) for cross-species collisions
    channel_collisions: dict[tuple[int, int], float] | None = None


def kinetic_temperature(velocities: np.ndarray, mass: float) -> float:
    """Temperature from the velocity spread about the ensemble mean."""
    v = np.asarray(velocities, dtype=float)
    dv = v - v.mean(axis=0)
    return float(mass * np.mean(np.sum(dv * dv, axis=1)) / (3.0 * K_B))


def total_energy(ens: ParticleEnsemble, trap: TrapFrequencies) -> float:
    """Kinetic plus harmonic potential energy about the sagged centre [J]."""
    m = ens.species.mass
    omegas = np.array([trap.omega_x, trap.omega_y, trap.omega_z])
    dx = ens.positions - np.array([0.0, 0.0, -trap.sag])
    kin = 0.5 * m * np.sum(ens.velocities ** 2)
    pot = 0.5 * m * np.sum(omegas ** 2 * dx ** 2)
    return float(kin + pot)


def sample_equilibrium(species: SpeciesState, n: int, T: float,
                       trap: TrapFrequencies, rng: np.random.Generator,
                       weight: float = 1.0) -> ParticleEnsemble:
    """Draw n test particles from thermal equilibrium at temperature T.

    Positions are Gaussian per axis with rms sqrt(k_B T / M) / omega,
    centred on the sagged equilibrium (0, 0, -sag); velocities are
    Maxwell-Boltzmann.  T = 0 collapses everything onto the centre.
    """
    if n < 2:
        raise DomainError("need at least 2 particles")
    if T < 0:
        raise DomainError("temperature must be >= 0")
    m = species.mass
    v_th = math.sqrt(K_B * T / m)
    omegas = np.array([trap.omega_x, trap.omega_y, trap.omega_z])
    pos = rng.standard_normal((n, 3)) * (v_th / omegas)
    pos[:, 2] -= trap.sag
    vel = rng.standard_normal((n, 3)) * v_th
    return ParticleEnsemble(species=species, positions=pos, velocities=vel,
                            weight=weight)


def _iso_directions(rng: np.random.Generator, k: int) -> np.ndarray:
    """k unit vectors uniform on the sphere."""
    z = 2.0 * rng.random(k) - 1.0
    phi = 2.0 * math.pi * rng.random(k)
    s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), z])


def collide_pair(v1, v2, m1: float, m2: float,
                 rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Elastic s-wave collision: isotropic relative direction, exact
    momentum conservation, kinetic energy conserved to round-off."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    mtot = m1 + m2
    vg = (m1 * v1 + m2 * v2) / mtot
    speed = float(np.linalg.norm(v1 - v2))
    d = _iso_directions(rng, 1)[0]
    return vg + (m2 / mtot) * speed * d, vg - (m1 / mtot) * speed * d


class _Propagator:
    """Exact phase-space rotation of one species over a fixed dt."""

    def __init__(self, trap: TrapFrequencies, dt: float):
        self.omegas = np.array([trap.omega_x, trap.omega_y, trap.omega_z])
        self.eq = np.array([0.0, 0.0, -trap.sag])
        th = self.omegas * dt
        self.c = np.cos(th)
        self.s_over_w = np.sin(th) / self.omegas
        self.ws = self.omegas * np.sin(th)

    def step(self, ens: ParticleEnsemble) -> None:
        dx = ens.positions - self.eq
        v = ens.velocities
        ens.positions = self.eq + self.c * dx + self.s_over_w * v
        ens.velocities = self.c * v - self.ws * dx


def _cell_keys(positions: np.ndarray, cell: float) -> np.ndarray:
    idx = np.floor(positions / cell).astype(np.int64) + (_CELL_KEY_SPAN >> 1)
    np.clip(idx, 0, _CELL_KEY_SPAN - 1, out=idx)
    return (idx[:, 0] * _CELL_KEY_SPAN + idx[:, 1]) * _CELL_KEY_SPAN + idx[:, 2]


class _Channel:
    """Collision bookkeeping between ensembles ia and ib (ia == ib for
    same-species collisions) with one adaptive velocity majorant."""

    def __init__(self, ia: int, ib: int, sigma: float, vmax0: float):
        self.ia = ia
        self.ib = ib
        self.sigma = sigma
        self.vmax = vmax0
        self.events = 0


class _CellIndex:
    """Sorted view of one ensemble's cell keys: occupied cells, their
    particle counts and where each cell's particles start in the sorted
    order.  One argsort per step; no dense grid arrays."""

    __slots__ = ("order", "ks", "uc", "starts", "counts")

    def __init__(self, keys: np.ndarray):
        self.order = np.argsort(keys, kind="stable")
        self.ks = keys[self.order]
        cut = np.flatnonzero(self.ks[1:] != self.ks[:-1])
        self.starts = np.concatenate([[0], cut + 1])
        self.uc = self.ks[self.starts]
        self.counts = np.diff(np.concatenate([self.starts, [len(self.ks)]]))


def _select_pairs(rng, same: bool, ca: _CellIndex, cb: _CellIndex, factor):
    """Candidate pair indices (into each ensemble) for one channel."""
    if same:
        na, st_a = ca.counts, ca.starts
        pairs = 0.5 * na * (na - 1.0)
        nb = lo = None
    else:
        left = np.searchsorted(cb.ks, ca.uc, side="left")
        right = np.searchsorted(cb.ks, ca.uc, side="right")
        nb = right - left
        mask = nb > 0
        na, st_a = ca.counts[mask], ca.starts[mask]
        nb, lo = nb[mask], left[mask]
        pairs = na.astype(float) * nb
    m_float = pairs * factor
    m = m_float.astype(np.int64)
    m += rng.random(len(m_float)) < (m_float - m)
    total = int(m.sum())
    if total == 0:
        return None
    rep = np.repeat(np.arange(len(m)), m)
    na_rep = na[rep]
    i_loc = (rng.random(total) * na_rep).astype(np.int64)
    np.minimum(i_loc, na_rep - 1, out=i_loc)
    ia = ca.order[st_a[rep] + i_loc]
    if same:
        j_loc = (rng.random(total) * (na_rep - 1)).astype(np.int64)
        np.minimum(j_loc, na_rep - 2, out=j_loc)
        j_loc += j_loc >= i_loc
        ib = ca.order[st_a[rep] + j_loc]
    else:
        nb_rep = nb[rep]
        j_loc = (rng.random(total) * nb_rep).astype(np.int64)
        np.minimum(j_loc, nb_rep - 1, out=j_loc)
        ib = cb.order[lo[rep] + j_loc]
    return ia, ib


def _dedup_pairs(ia: np.ndarray, ib: np.ndarray):
    """Keep the first accepted pair per particle; later conflicting pairs
    in the same step are dropped (a vanishing-bias simplification of the
    sequential per-cell update)."""
    seen = set()
    keep = []
    for k, (i, j) in enumerate(zip(ia.tolist(), ib.tolist())):
        if i in seen or j in seen:
            continue
        seen.add(i)
        seen.add(j)
        keep.append(k)
    return np.asarray(keep, dtype=np.int64)


def run(cfg: DsmcConfig) -> DsmcResult:
    """Advance the configured system to t_end and record the history of
    kinetic temperatures and the cumulative physical collision count."""
    rng = np.random.Generator(np.random.Philox(key=cfg.rng_seed))
    ens = tuple(ParticleEnsemble(e.species, e.positions.copy(),
                                 e.velocities.copy(), e.weight)
                for e in cfg.ensembles)
    props = [_Propagator(trap, cfg.dt) for trap in cfg.traps]
    weight = ens[0].weight
    vc = cfg.cell_size ** 3

    thermal = [math.sqrt(K_B * max(kinetic_temperature(e.velocities,
                                                       e.species.mass), 1e-30)
                         / e.species.mass) for e in ens]
    channels: list[_Channel] = []
    for i, e in enumerate(ens):
        if e.species.sigma_self > 0:
            channels.append(_Channel(i, i, e.species.sigma_self,
                                     5.0 * math.sqrt(2.0) * thermal[i]))
    if len(ens) == 2:
        sig = ens[0].species.sigma_cross
        if sig != ens[1].species.sigma_cross:
            raise DomainError("the two ensembles disagree on sigma_cross")
        if sig > 0:
            vmax0 = 5.0 * math.hypot(thermal[0], thermal[1])
            channels.append(_Channel(0, 1, sig, vmax0))

    n_steps = int(round(cfg.t_end / cfg.dt))
    n_total = sum(e.n for e in ens)
    times, temps, colls = [], [], []
    collisions = 0.0
    lone_sum, lone_n = 0.0, 0

    def record(step):
        times.append(step * cfg.dt)
        temps.append([kinetic_temperature(e.velocities, e.species.mass)
                      for e in ens])
        colls.append(collisions)

    record(0)
    for step in range(1, n_steps + 1):
        for e, prop in zip(ens, props):
            prop.step(e)

        cells = [_CellIndex(_cell_keys(e.positions, cfg.cell_size))
                 for e in ens]

        lone_sum += sum(np.count_nonzero(c.counts == 1)
                        for c in cells) / n_total
        lone_n += 1

        for ch in channels:
            same = ch.ia == ch.ib
            a, b = ch.ia, ch.ib
            factor = weight * ch.sigma * ch.vmax * cfg.dt / vc
            sel = _select_pairs(rng, same, cells[a], cells[b], factor)
            if sel is None:
                continue
            ia, ib = sel
            va = ens[a].velocities
            vb = ens[b].velocities
            rel = va[ia] - vb[ib]
            speed = np.sqrt(np.sum(rel * rel, axis=1))
            top = float(speed.max())
            acc = rng.random(len(speed)) * ch.vmax < speed
            if top > ch.vmax:
                ch.vmax = 1.05 * top
            idx = np.flatnonzero(acc)
            if idx.size == 0:
                continue
            ia, ib, speed = ia[idx], ib[idx], speed[idx]
            if same:
                flat_keep = _dedup_pairs(ia, ib)
            else:
                flat_keep = _dedup_pairs(ia, ib + (1 << 40))
            if flat_keep.size == 0:
                continue
            ia, ib, speed = ia[flat_keep], ib[flat_keep], speed[flat_keep]
            ma, mb = ens[a].species.mass, ens[b].species.mass
            vg = (ma * va[ia] + mb * vb[ib]) / (ma + mb)
            d = _iso_directions(rng, len(ia)) * speed[:, None]
            va[ia] = vg + (mb / (ma + mb)) * d
            vb[ib] = vg - (ma / (ma + mb)) * d
            ch.events += len(ia)
            collisions += weight * len(ia)

        if step % cfg.record_every == 0 or step == n_steps:
            record(step)

    lone_fraction = lone_sum / max(lone_n, 1)
    if lone_fraction > 0.5:
        warnings.warn(
            f"{100 * lone_fraction:.0f}% of test particles sat alone in "
            "their collision cell on average; refine cell_size or add "
            "particles", CellUnderflowWarning, stacklevel=2)
    per_channel = {(ch.ia, ch.ib): ch.events * weight for ch in channels}
    return DsmcResult(times=np.asarray(times),
                      temps=np.asarray(temps),
                      collisions_cum=np.asarray(colls),
                      ensembles=ens,
                      lone_particle_fraction=lone_fraction,
                      channel_collisions=per_channel)


def fit_relaxation(times, delta_T) -> tuple[float, float]:
    """Exponential decay rate of a temperature-difference series.

    Log-linear least squares of ln|dT| against t, weighted by dT^2.  The
    sampling noise on a kinetic temperature is constant in absolute terms,
    so after taking the log it grows as 1/|dT|; the amplitude-squared
    weights restore equal footing and keep the near-noise tail from
    steering the slope.  A second pass reuses the first fit's model curve
    as the weight, which removes the residual leverage of points sitting
    on the noise floor (their data-based weight plateaus, the model-based
    one keeps falling).  Points where the difference has decayed exactly
    to zero carry zero weight and are skipped.  The series must hold
    >= 10 points and decay by >= 2 e-folds between its first point and the
    median of its last five, otherwise InsufficientDecay is raised.
    Returns (rate, stderr of the rate).
    """
    t = np.asarray(times, dtype=float)
    d = np.asarray(delta_T, dtype=float)
    if t.shape != d.shape or t.ndim != 1:
        raise DomainError("times and delta_T must be equal-length 1-d")
    if len(t) < 10:
        raise InsufficientDecay("fewer than 10 usable points")
    if d[0] == 0.0:
        raise InsufficientDecay("series starts at zero difference")
    tail = float(np.median(np.abs(d[-5:])))
    efolds = math.log(abs(d[0]) / tail) if tail > 0 else math.inf
    if efolds < 2.0:
        raise InsufficientDecay(
            f"series spans only {efolds:.2f} e-folds, need >= 2")

    live = d != 0.0
    if np.count_nonzero(live) < 10:
        raise InsufficientDecay("fewer than 10 usable points")
    tt = t[live]
    y = np.log(np.abs(d[live]))

    def weighted_line(w):
        sw = np.sqrt(w)
        design = np.column_stack((sw, sw * tt))
        rhs = sw * y
        coef, _, _, _ = np.linalg.lstsq(design, rhs, rcond=None)
        resid = rhs - design @ coef
        scale = float(resid @ resid) / (len(tt) - 2)
        cov = scale * np.linalg.inv(design.T @ design)
        return coef, float(math.sqrt(cov[1, 1]))

    coef, stderr = weighted_line((d[live] / np.abs(d[0])) ** 2)
    model = np.exp(coef[0] + coef[1] * tt)
    coef, stderr = weighted_line((model / model[0]) ** 2)
    rate = -float(coef[1])
    if rate <= 0 or not math.isfinite(stderr):
        raise InsufficientDecay("no resolvable exponential decay")
    return rate, stderr
