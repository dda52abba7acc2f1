import io
import json

import numpy as np
import pytest

from covbracket import dynamics as D
from covbracket.field_state import FieldState
from covbracket.mass_shell import build_lattice
from covbracket.minkowski import ETA
from covbracket.observables import random_state
from covbracket.state import ParticleState, SystemState, phase_dimension

WAVE = D.PlaneWave([0.0, 0.3, 0.0, 0.0], [1.0, 0.0, 0.0, 1.0], 0.2)


@pytest.fixture
def lat8():
    return build_lattice(1.0, 1)


def _wave_state(lat):
    part = D.free_particle(1.0, (0.1, 0.0, 0.0), e=1.0, A=WAVE.potential(np.zeros(4))[0])
    return SystemState(part, FieldState.zeros(lat))


def test_state_vector_roundtrip(lat8, rng):
    s = SystemState(D.free_particle(x=(1, 2, 3, 4)), random_state(rng, lat8))
    y = s.to_vector()
    assert len(y) == phase_dimension(26)
    back = s.from_vector(y)
    assert np.array_equal(back.field.amp, s.field.amp)
    assert np.array_equal(back.particle.x, s.particle.x)


def test_particle_validation():
    with pytest.raises(ValueError):
        ParticleState(np.zeros(4), np.zeros(4), m0=0.0)
    with pytest.raises(ValueError):
        ParticleState(np.zeros(3), np.zeros(4))


def test_plane_wave_must_be_null():
    with pytest.raises(ValueError):
        D.PlaneWave([0, 1, 0, 0], [1, 0, 0, 0.5])


def test_config_validation():
    with pytest.raises(ValueError):
        D.EvolutionConfig(0.0, 10)
    with pytest.raises(ValueError):
        D.EvolutionConfig(0.1, 10, clock="wall")


def test_free_particle_rest_sign(lat8):
    p = ParticleState(np.zeros(4), np.array([-1.0, 0, 0, 0]))
    xd, pd = D.particle_rhs(p, np.zeros(4), np.zeros((4, 4)))
    assert np.array_equal(xd, [1, 0, 0, 0]) and np.all(pd == 0)


def test_past_directed_aborts(lat8):
    p = ParticleState(np.zeros(4), np.array([1.0, 0, 0, 0]))
    with pytest.raises(ValueError):
        D.particle_rhs(p, np.zeros(4), np.zeros((4, 4)))
    with pytest.raises(D.IntegrationError) as exc:
        D.integrate(SystemState(p, FieldState.zeros(lat8)), D.EvolutionConfig(0.1, 5))
    assert exc.value.step == 1


def test_free_particle_straight_line(lat8):
    part = D.free_particle(2.0, (0.3, -0.2, 0.1), x=(0.0, 1.0, 2.0, 3.0))
    s = SystemState(part, FieldState.zeros(lat8))
    tr = D.integrate(s, D.EvolutionConfig(0.05, 100))
    v = np.array([1.0, 0.3, -0.2, 0.1])
    want = part.x + np.outer(tr.times, v)
    assert np.max(np.abs(tr.states[:, :4] - want)) <= 1e-12 * np.max(np.abs(want))
    assert np.all(tr.states[:, 4:8] == part.p)


def test_lorentz_force_sign(lat8):
    # static uniform E along x: A_0 = -E x  ->  F_{10} = d_1 A_0 = -E; force on +e along +x
    class Uniform:
        def potential(self, x):
            return np.array([-0.1 * x[1], 0, 0, 0]), np.array([[0, 0, 0, 0], [-0.1, 0, 0, 0], [0] * 4, [0] * 4])

    part = D.free_particle(1.0, e=1.0, A=Uniform().potential(np.zeros(4))[0])
    cfg = D.EvolutionConfig(0.01, 100, external_wave=Uniform())
    tr = D.integrate(SystemState(part, FieldState.zeros(lat8)), cfg)
    assert tr.states[-1][1] > 0  # accelerated along +x
    assert tr.states[-1][1] == pytest.approx(0.5 * 0.1 * 1.0 ** 2, rel=1e-2)


def test_rk4_order(lat8):
    s = _wave_state(lat8)
    T = 4.0
    ref = D.integrate(s, D.EvolutionConfig(0.0025, 1600, external_wave=WAVE), record=False).states[-1][:8]
    errs = [np.max(np.abs(D.integrate(s, D.EvolutionConfig(dt, int(round(T / dt)), external_wave=WAVE),
                                      record=False).states[-1][:8] - ref)) for dt in (0.1, 0.05)]
    assert 14.0 <= errs[0] / errs[1] <= 18.0


def test_plane_wave_vs_reference(lat8):
    s = _wave_state(lat8)
    ref = D.plane_wave_oracle(s.particle, WAVE, 4.0, 0.02)
    tr = D.integrate(s, D.EvolutionConfig(0.02, 200, external_wave=WAVE))
    got = tr.final.particle
    scale = np.max(np.abs(np.r_[ref.x, ref.p]))
    assert np.max(np.abs(np.r_[got.x - ref.x, got.p - ref.p])) <= 1e-8 * scale
    assert tr.diagnostics["mass_shell_drift"] < 1e-8


def test_transverse_oscillation_frequency(lat8):
    s = _wave_state(lat8)
    tr = D.integrate(s, D.EvolutionConfig(0.05, 600, external_wave=WAVE))
    ph = np.array([WAVE.k_lower @ y[:4] + WAVE.phase for y in tr.states])
    expected = int(np.floor((ph[-1] - np.pi / 2) / np.pi) - np.floor((ph[0] - np.pi / 2) / np.pi))
    assert abs(D.transverse_zero_crossings(tr, 1) - abs(expected)) <= 1


def test_time_reversal(lat8):
    s = _wave_state(lat8)
    cfg = D.EvolutionConfig(0.02, 200, external_wave=WAVE)
    sys_ = D._System(s, cfg)
    y1, _ = D._run(sys_, s.to_vector(), 0.02, 200, False)
    y0, _ = D._run(sys_, y1, -0.02, 200, False)
    assert np.max(np.abs(y0 - s.to_vector())) < 1e-9


def test_free_field_amplitudes_constant(lat8, rng):
    s = SystemState(D.free_particle(velocity=(0.2, 0, 0)), random_state(rng, lat8))
    tr = D.integrate(s, D.EvolutionConfig(0.1, 20, coupling="coupled"))
    assert np.array_equal(tr.final.field.amp, s.field.amp)


def test_static_source_only_time_component(lat8):
    s = SystemState(D.free_particle(e=0.5), FieldState.zeros(lat8))
    d = D.coupled_rhs(s, D.EvolutionConfig(0.1, 1, coupling="coupled"))
    damp = (d[8:8 + 104] + 1j * d[8 + 104:]).reshape(26, 4)
    assert np.all(damp[:, 1:] == 0) and np.all(damp[:, 0] != 0)


def test_field_energy_balance_refines(lat8, rng):
    # c p_0 - field_energy_proxy is conserved by the retarded coupling; RK4 error shrinks ~16x per halving
    part = D.free_particle(1.0, (0.3, 0.1, 0.0), e=0.05)
    s = SystemState(part, random_state(rng, lat8, 1e-2))

    def drift(dt):
        tr = D.integrate(s, D.EvolutionConfig(dt, int(round(2.0 / dt)), coupling="coupled"))
        inv = tr.states[:, 4] - tr.field_energy()
        return np.max(np.abs(inv - inv[0]))

    d1, d2 = drift(0.1), drift(0.05)
    assert d2 < d1 / 10
    assert d1 < 1e-6


def test_tangent_map_zero_duration(lat8):
    s = SystemState(D.free_particle(), FieldState.zeros(lat8))
    assert np.array_equal(D.tangent_map(s, D.EvolutionConfig(0.1, 0)), np.eye(phase_dimension(26)))


def test_tangent_map_free_particle(lat8):
    part = D.free_particle(1.0, (0.2, 0.1, -0.3))
    s = SystemState(part, FieldState.zeros(lat8))
    T = 1.0
    J = D.tangent_map(s, D.EvolutionConfig(0.1, 10))
    p = part.p
    want = np.eye(phase_dimension(26))
    for i in range(1, 4):
        want[i, 4 + i] = -T / p[0]
        want[i, 4] = T * p[i] / p[0] ** 2
    assert np.max(np.abs(J - want)) <= 1e-6 * np.max(np.abs(want))


def test_symplectic_free_particle(lat8):
    s = SystemState(D.free_particle(1.0, (0.2, 0.1, 0.0), x=(0, 0.1, 0.2, 0.3)), FieldState.zeros(lat8))
    assert np.array_equal(D.symplectic_check(s, D.EvolutionConfig(0.1, 0)), ETA)
    m = D.symplectic_check(s, D.EvolutionConfig(0.1, 10))
    assert np.max(np.abs(m - ETA)) < 1e-10


def test_tangent_map_nonconvergence(lat8):
    s = SystemState(D.free_particle(1.0, (0.2, 0.1, 0.0)), FieldState.zeros(lat8))
    with pytest.raises(D.TangentMapError):
        D.tangent_map(s, D.EvolutionConfig(0.1, 10), rel_step=1e-13, richardson_tol=1e-12)


def test_csv_schema(lat8):
    s = _wave_state(lat8)
    tr = D.integrate(s, D.EvolutionConfig(0.1, 5, external_wave=WAVE))
    text = tr.to_csv()
    lines = text.splitlines()
    assert lines[0] == "#schema=1"
    assert lines[1].split(",") == D.CSV_COLUMNS
    assert len(lines) == 2 + 6
    assert D.integrate(s, D.EvolutionConfig(0.1, 5, external_wave=WAVE)).to_csv() == text
    json.loads(D.to_json_matrix(np.eye(3)))
