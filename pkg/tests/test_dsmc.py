"""Kinetic Monte Carlo building blocks and short end-to-end runs.

Statistical assertions use frozen seeds and bands of at least four
standard errors, so they are deterministic here yet would catch real
regressions of the sampling or collision machinery.
"""

import math

import numpy as np
import pytest

from sympcool import (
    MASS_LI6,
    MASS_RB87,
    DsmcConfig,
    ParticleEnsemble,
    SpeciesState,
    TrapFrequencies,
    collide_pair,
    fit_relaxation,
    kinetic_temperature,
    run,
    sample_equilibrium,
    total_energy,
)
from sympcool.constants import G_STANDARD, K_B
from sympcool.errors import DomainError, InsufficientDecay

SIG = 1.4e-15
F0 = TrapFrequencies.from_axes(2 * math.pi * 80, 2 * math.pi * 100,
                               2 * math.pi * 125, gravity=0.0)
FG = TrapFrequencies.from_axes(2 * math.pi * 80, 2 * math.pi * 100,
                               2 * math.pi * 125, gravity=G_STANDARD)

ignore_underflow = pytest.mark.filterwarnings(
    "ignore::sympcool.errors.CellUnderflowWarning")


def _species(ss=SIG, sc=SIG, mass=MASS_RB87, label="rb"):
    return SpeciesState(label=label, F=1, mF=-1, mass=mass,
                        sigma_self=ss, sigma_cross=sc)


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=seed))


# ------------------------------------------------------------- sampling

def test_equilibrium_sample_statistics():
    n, T = 40000, 1.0e-6
    ens = sample_equilibrium(_species(), n, T, FG, _rng(7))
    t_kin = kinetic_temperature(ens.velocities, MASS_RB87)
    se = T * math.sqrt(2.0 / (3.0 * n))
    assert abs(t_kin - T) < 4 * se
    v_th = math.sqrt(K_B * T / MASS_RB87)
    for axis, w in enumerate((FG.omega_x, FG.omega_y, FG.omega_z)):
        centre = -FG.sag if axis == 2 else 0.0
        x = ens.positions[:, axis] - centre
        rms = float(np.sqrt(np.mean(x ** 2)))
        assert rms == pytest.approx(v_th / w, rel=4.0 / math.sqrt(2 * n))
        assert abs(np.mean(x)) < 5 * (v_th / w) / math.sqrt(n)


def test_equilibrium_sample_virial():
    """Kinetic and potential energy each hold half the total on average."""
    ens = sample_equilibrium(_species(), 40000, 1e-6, FG, _rng(8))
    kin = 0.5 * MASS_RB87 * float(np.sum(ens.velocities ** 2))
    tot = total_energy(ens, FG)
    assert kin / tot == pytest.approx(0.5, abs=0.01)


def test_equilibrium_sample_zero_temperature():
    ens = sample_equilibrium(_species(), 100, 0.0, FG, _rng(9))
    assert np.all(ens.velocities == 0.0)
    assert np.all(ens.positions[:, :2] == 0.0)
    assert np.all(ens.positions[:, 2] == -FG.sag)


def test_equilibrium_sample_validation():
    with pytest.raises(DomainError):
        sample_equilibrium(_species(), 1, 1e-6, F0, _rng(0))
    with pytest.raises(DomainError):
        sample_equilibrium(_species(), 10, -1e-6, F0, _rng(0))


def test_kinetic_temperature_from_construction():
    v = np.zeros((4, 3))
    v[:2, 0] = (1.0, -1.0)            # variance 0.5 about the zero mean
    T = kinetic_temperature(v, MASS_RB87)
    assert T == pytest.approx(MASS_RB87 * 0.5 / (3 * K_B), rel=1e-12)
    # a common drift carries no temperature
    assert kinetic_temperature(v + 3.0, MASS_RB87) == pytest.approx(T,
                                                                    rel=1e-9)


# ------------------------------------------------------------- collisions

def test_collide_pair_conserves_momentum_and_energy():
    rng = _rng(11)
    for _ in range(100):
        v1 = rng.normal(size=3) * 0.01
        v2 = rng.normal(size=3) * 0.02
        m1, m2 = MASS_RB87, MASS_LI6
        w1, w2 = collide_pair(v1, v2, m1, m2, rng)
        p_in = m1 * v1 + m2 * v2
        p_out = m1 * w1 + m2 * w2
        np.testing.assert_allclose(p_out, p_in, rtol=0, atol=1e-30)
        e_in = 0.5 * m1 * v1 @ v1 + 0.5 * m2 * v2 @ v2
        e_out = 0.5 * m1 * w1 @ w1 + 0.5 * m2 * w2 @ w2
        assert e_out == pytest.approx(e_in, rel=1e-12)
        assert np.linalg.norm(w1 - w2) == pytest.approx(
            np.linalg.norm(v1 - v2), rel=1e-12)


def test_collide_pair_flux_weighted_transfer():
    """Averaged over collision flux (weight |v_rel|), one equal-mass
    collision moves k_B (T2 - T1) from gas 2 to gas 1. Monte Carlo against
    the closed form with ~4e5 pairs; the band is 8 standard errors wide."""
    rng = _rng(12)
    T1, T2, m = 1.3e-6, 0.7e-6, MASS_RB87
    n = 400000
    v1 = rng.standard_normal((n, 3)) * math.sqrt(K_B * T1 / m)
    v2 = rng.standard_normal((n, 3)) * math.sqrt(K_B * T2 / m)
    w = np.linalg.norm(v1 - v2, axis=1)
    vg = 0.5 * (v1 + v2)
    d = rng.standard_normal((n, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    w1 = vg + 0.5 * w[:, None] * d
    de1 = 0.5 * m * (np.sum(w1 ** 2, axis=1) - np.sum(v1 ** 2, axis=1))
    mean = float(np.sum(w * de1) / np.sum(w))
    n_eff = float(np.sum(w)) ** 2 / float(np.sum(w ** 2))
    se = float(np.sqrt(np.sum(w * (de1 - mean) ** 2) / np.sum(w))
               / math.sqrt(n_eff))
    assert mean == pytest.approx(K_B * (T2 - T1), abs=4 * se)
    assert abs(mean - K_B * (T2 - T1)) < 0.02 * K_B * abs(T2 - T1)


# ------------------------------------------------------------ propagation

@ignore_underflow
def test_free_flight_is_exact():
    """1000 composed steps must land on the closed-form trap orbit."""
    sp = _species(ss=0.0, sc=0.0)
    pos = np.array([[2e-6, -1e-6, 3e-6], [0.0, 1e-6, -2e-6]])
    vel = np.array([[0.0, 4e-3, -1e-3], [2e-3, 0.0, 3e-3]])
    ens = ParticleEnsemble(species=sp, positions=pos.copy(),
                           velocities=vel.copy())
    dt, steps = 2e-4, 1000
    cfg = DsmcConfig(ensembles=(ens,), traps=(F0,), dt=dt, t_end=steps * dt,
                     cell_size=1e-7, rng_seed=1, record_every=100000)
    out = run(cfg)
    t = steps * dt
    w = np.array([F0.omega_x, F0.omega_y, F0.omega_z])
    expect_x = pos * np.cos(w * t) + vel * np.sin(w * t) / w
    expect_v = vel * np.cos(w * t) - pos * w * np.sin(w * t)
    np.testing.assert_allclose(out.ensembles[0].positions, expect_x,
                               rtol=1e-10, atol=1e-16)
    np.testing.assert_allclose(out.ensembles[0].velocities, expect_v,
                               rtol=1e-10, atol=1e-13)
    assert out.collisions_cum[-1] == 0.0


@ignore_underflow
def test_energy_conserved_with_collisions():
    rng = _rng(21)
    e1 = sample_equilibrium(_species(), 10000, 1.3e-6, F0, rng)
    e2 = sample_equilibrium(_species(label="rb2"), 10000, 0.7e-6, F0, rng)
    cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                     t_end=0.05, cell_size=2.4e-6, rng_seed=21,
                     record_every=20)
    before = total_energy(e1, F0) + total_energy(e2, F0)
    out = run(cfg)
    after = sum(total_energy(e, F0) for e in out.ensembles)
    assert after == pytest.approx(before, rel=1e-11)
    assert out.collisions_cum[-1] > 0
    # the caller's ensembles are left untouched
    assert total_energy(e1, F0) + total_energy(e2, F0) == before


@ignore_underflow
def test_two_gas_temperatures_converge():
    rng = _rng(22)
    e1 = sample_equilibrium(_species(), 10000, 1.3e-6, F0, rng)
    e2 = sample_equilibrium(_species(label="rb2"), 10000, 0.7e-6, F0, rng)
    cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                     t_end=0.25, cell_size=2.4e-6, rng_seed=22,
                     record_every=20)
    out = run(cfg)
    d0 = out.temps[0, 0] - out.temps[0, 1]
    d1 = out.temps[-1, 0] - out.temps[-1, 1]
    assert d0 > 0
    assert 0.0 < d1 < 0.85 * d0
    assert abs(out.times[-1] - 0.25) <= 3.2e-4   # whole steps only


@ignore_underflow
def test_equal_temperatures_stay_balanced():
    """Detailed balance: no net energy flow between equal-temperature
    clouds beyond sampling noise (4 standard errors of the mean)."""
    rng = _rng(23)
    T = 1.0e-6
    e1 = sample_equilibrium(_species(), 10000, T, F0, rng)
    e2 = sample_equilibrium(_species(label="rb2"), 10000, T, F0, rng)
    cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                     t_end=0.15, cell_size=2.4e-6, rng_seed=23,
                     record_every=20)
    out = run(cfg)
    se = T * math.sqrt(2.0 / (3.0 * 10000))
    assert abs(out.temps[-1, 0] - T) < 4 * se
    assert abs(out.temps[-1, 1] - T) < 4 * se


@ignore_underflow
def test_channel_bookkeeping():
    rng = _rng(24)
    e1 = sample_equilibrium(_species(), 10000, 1.3e-6, F0, rng)
    e2 = sample_equilibrium(_species(label="rb2"), 10000, 0.7e-6, F0, rng)
    cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                     t_end=0.05, cell_size=2.4e-6, rng_seed=24,
                     record_every=20)
    out = run(cfg)
    assert set(out.channel_collisions) == {(0, 0), (1, 1), (0, 1)}
    assert sum(out.channel_collisions.values()) == out.collisions_cum[-1]
    assert all(v >= 0 for v in out.channel_collisions.values())
    assert 0.0 <= out.lone_particle_fraction <= 1.0


@ignore_underflow
def test_cross_only_counter():
    """With self collisions off, the cumulative count is purely the cross
    channel, which is what windowed pair-rate measurements rely on."""
    rng = _rng(25)
    e1 = sample_equilibrium(_species(ss=0.0), 10000, 1.3e-6, F0, rng)
    e2 = sample_equilibrium(_species(ss=0.0, label="rb2"), 10000, 0.7e-6,
                            F0, rng)
    cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                     t_end=0.05, cell_size=2.4e-6, rng_seed=25,
                     record_every=20)
    out = run(cfg)
    assert set(out.channel_collisions) == {(0, 1)}
    assert out.channel_collisions[(0, 1)] == out.collisions_cum[-1]


@ignore_underflow
def test_runs_are_reproducible():
    def one(seed):
        rng = _rng(26)
        e1 = sample_equilibrium(_species(), 5000, 1.3e-6, F0, rng)
        e2 = sample_equilibrium(_species(label="rb2"), 5000, 0.7e-6, F0, rng)
        cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                         t_end=0.03, cell_size=2.4e-6, rng_seed=seed,
                         record_every=10)
        return run(cfg)

    a, b, c = one(5), one(5), one(6)
    assert np.array_equal(a.temps, b.temps)
    assert np.array_equal(a.collisions_cum, b.collisions_cum)
    assert np.array_equal(a.ensembles[0].velocities,
                          b.ensembles[0].velocities)
    assert not np.array_equal(a.temps, c.temps)


# ------------------------------------------------------------- configuration

def test_config_validation():
    rng = _rng(31)
    e1 = sample_equilibrium(_species(), 100, 1e-6, F0, rng)
    e2 = sample_equilibrium(_species(label="b"), 100, 1e-6, F0, rng)
    ok = dict(dt=3.2e-4, t_end=0.1, cell_size=2.4e-6, rng_seed=1)
    with pytest.raises(DomainError):              # dt vs fastest trap period
        DsmcConfig(ensembles=(e1,), traps=(F0,), **{**ok, "dt": 5e-4})
    with pytest.raises(DomainError):              # cell vs cloud size
        DsmcConfig(ensembles=(e1,), traps=(F0,),
                   **{**ok, "cell_size": 5e-6})
    with pytest.raises(DomainError):
        DsmcConfig(ensembles=(e1,), traps=(F0, F0), **ok)
    with pytest.raises(DomainError):
        DsmcConfig(ensembles=(e1, e2), traps=(F0, F0),
                   **{**ok, "record_every": 0})
    heavy = ParticleEnsemble(species=e2.species, positions=e2.positions,
                             velocities=e2.velocities, weight=2.0)
    with pytest.raises(DomainError):              # mixed weights
        DsmcConfig(ensembles=(e1, heavy), traps=(F0, F0), **ok)


def test_config_allows_point_cloud():
    """A zero-temperature ensemble has no measurable size, so the cell
    bound is skipped rather than dividing by zero."""
    ens = sample_equilibrium(_species(), 10, 0.0, F0, _rng(32))
    cfg = DsmcConfig(ensembles=(ens,), traps=(F0,), dt=3.2e-4, t_end=0.01,
                     cell_size=1.0, rng_seed=1)
    assert cfg.cell_size == 1.0


def test_mismatched_cross_sections_rejected():
    rng = _rng(33)
    e1 = sample_equilibrium(_species(sc=SIG), 100, 1e-6, F0, rng)
    e2 = sample_equilibrium(_species(sc=2 * SIG, label="b"), 100, 1e-6, F0,
                            rng)
    cfg = DsmcConfig(ensembles=(e1, e2), traps=(F0, F0), dt=3.2e-4,
                     t_end=0.01, cell_size=2.4e-6, rng_seed=1)
    with pytest.raises(DomainError):
        run(cfg)


def test_ensemble_validation():
    sp = _species()
    with pytest.raises(DomainError):
        ParticleEnsemble(species=sp, positions=np.zeros((3, 2)),
                         velocities=np.zeros((3, 2)))
    with pytest.raises(DomainError):
        ParticleEnsemble(species=sp, positions=np.zeros((1, 3)),
                         velocities=np.zeros((1, 3)))
    with pytest.raises(DomainError):
        ParticleEnsemble(species=sp, positions=np.zeros((4, 3)),
                         velocities=np.zeros((4, 3)), weight=0.0)


# ------------------------------------------------------------------ fitting

def test_fit_recovers_exact_exponential():
    t = np.linspace(0.0, 5.0, 400)
    d = 0.6e-6 * np.exp(-1.7 * t)
    rate, err = fit_relaxation(t, d)
    assert rate == pytest.approx(1.7, rel=1e-6)
    assert err < 1e-6


def test_fit_handles_negative_difference():
    t = np.linspace(0.0, 5.0, 400)
    d = -0.6e-6 * np.exp(-1.7 * t)
    rate, _ = fit_relaxation(t, d)
    assert rate == pytest.approx(1.7, rel=1e-6)


def test_fit_coverage_under_noise():
    """With constant Gaussian noise the quoted standard error must cover
    the truth: at least 97 of 100 seeded replicas within 3 sigma."""
    t = np.linspace(0.0, 4.0, 300)
    true = 1.3
    clean = 0.6e-6 * np.exp(-true * t)
    hits = 0
    for seed in range(100):
        noisy = clean + _rng(100 + seed).normal(0.0, 8e-9, size=t.size)
        rate, err = fit_relaxation(t, noisy)
        hits += abs(rate - true) <= 3 * err
    assert hits >= 97


def test_fit_insufficient_decay():
    t = np.linspace(0.0, 1.0, 50)
    with pytest.raises(InsufficientDecay):
        fit_relaxation(t, 1e-6 * np.exp(-0.5 * t))     # only 0.5 e-folds
    with pytest.raises(InsufficientDecay):
        fit_relaxation(t[:5], 1e-6 * np.exp(-10.0 * t[:5]))
    with pytest.raises(InsufficientDecay):
        fit_relaxation(t, np.zeros_like(t))
    with pytest.raises(DomainError):
        fit_relaxation(t, np.ones((2, 25)))
