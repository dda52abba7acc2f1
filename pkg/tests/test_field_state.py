import numpy as np
import pytest

from covbracket.field_state import (CanonicalState, FieldState, canonical_from_amplitudes, conjugate_momentum,
                                    ddw_free_density, ddw_free_density_amp, divergence, from_canonical,
                                    lorentz_condition_residual, potential_gradient, reconstruct_potential,
                                    to_canonical, verify_free_field_hamilton)
from covbracket.observables import random_state


def test_shape_and_finiteness(lat26):
    with pytest.raises(ValueError):
        FieldState(lat26, np.zeros((3, 4)))
    amp = np.zeros((26, 4), complex)
    amp[0, 0] = np.inf
    with pytest.raises(ValueError):
        FieldState(lat26, amp)


def test_canonical_roundtrip(lat26, rng):
    f = random_state(rng, lat26)
    x = rng.normal(size=4)
    back = from_canonical(to_canonical(f, x), x)
    assert np.max(np.abs(back.amp - f.amp)) < 1e-13
    with pytest.raises(ValueError):
        from_canonical(to_canonical(f, x), x + 1.0)


def test_pi_is_rank_one(lat26, rng):
    cs = to_canonical(random_state(rng, lat26), np.zeros(4))
    assert np.linalg.matrix_rank(cs.pi(3)) == 1


def test_json_roundtrip(lat26, rng):
    f = random_state(rng, lat26)
    g = FieldState.from_json(f.to_json())
    assert np.array_equal(f.amp, g.amp)
    assert g.lattice.params() == lat26.params()


def test_potential_real_and_gradient_fd(lat26, rng):
    f = random_state(rng, lat26)
    x = rng.normal(size=4)
    g = potential_gradient(f, x)
    h = 1e-6
    fd = np.array([(reconstruct_potential(f, x + h * e) - reconstruct_potential(f, x - h * e)) / (2 * h)
                   for e in np.eye(4)])
    assert np.allclose(fd, g, rtol=1e-7, atol=1e-9)
    assert np.allclose(conjugate_momentum(f, x), -g / (4 * np.pi))


def test_lorentz_condition_and_divergence(lat26, rng):
    # transverse amplitudes: A^mu along eps^1
    amp = np.zeros((26, 4), complex)
    amp[:, 1:] = -lat26.tetrads[:, 1, 1:] * (1 + 2j)
    f = FieldState(lat26, amp)
    assert lorentz_condition_residual(f).max() < 1e-14
    assert abs(divergence(f, rng.normal(size=4))) < 1e-14


def test_free_field_hamilton(lat26, rng):
    f = random_state(rng, lat26)
    r1 = verify_free_field_hamilton(f, rng.normal(size=4))
    r2 = verify_free_field_hamilton(f, rng.normal(size=4))
    assert r1["max_first"] < 1e-12
    assert r1["max_second"] <= 1e-12 * r1["q_scale"] * lat26.k0.max() ** 2
    assert r2["max_first"] < 1e-12


def test_ddw_density_zero_on_shell(lat26, rng):
    f = random_state(rng, lat26)
    cs = to_canonical(f, rng.normal(size=4))
    for j in range(len(lat26)):
        assert abs(ddw_free_density_amp(f, j)) < 1e-13 * f.norm()
        assert abs(ddw_free_density(cs, j)) < 1e-13 * f.norm()


def test_ddw_density_off_shell_agrees(lat26, rng):
    f = random_state(rng, lat26)
    k = np.array([1.3, 0.2, -0.4, 0.5])
    q, s = canonical_from_amplitudes(f.amp[0], k)
    cs = CanonicalState(lat26, np.vstack([q] + [np.zeros(4)] * 25), np.vstack([s] + [np.zeros(4)] * 25),
                        np.zeros(4))
    amp_form = ddw_free_density_amp(f, 0, k)
    assert abs(amp_form) > 1e-3
    assert ddw_free_density(cs, 0, k) == pytest.approx(amp_form, rel=1e-12)
